"""Minimax-risk workbench for dictionary learning: generative model,
closed-form and instance-specific risk lower bounds, packing/detection
machinery, and ITKM benchmarking."""

from .bounds import (
    BoundReport,
    InstanceBoundResult,
    MiBoundReport,
    NotSpdError,
    PackingCheckReport,
    PackingInfeasibleError,
    bound_chain_check,
    build_packing,
    conditional_covariance,
    fano_mi_threshold,
    gaussian_kl,
    instance_bound_search,
    mi_upper_bound,
    min_distance_detect,
    minimax_lower_bound,
    sparse_recovery_condition,
    verify_packing_desiderata,
)
from .core import (
    Dictionary,
    Ensemble,
    ObservationBatch,
    ProblemConfig,
    SupportCodec,
    frobenius_distance,
    make_dirac_hadamard_dictionary,
    make_hadamard,
    make_identity_dictionary,
    sample_dictionary_in_ball,
    sign_align,
)
from .datagen import (
    GeneratorSeed,
    generate_observations,
    normalize_signals,
    sample_coefficients,
)
from .expconfig import ConfigError, ExperimentConfig, parse_config
from .experiment import (
    CSV_HEADER,
    ResultRow,
    emit_csv,
    emit_plot_svg,
    resolve_dictionary,
    run_mse_curve,
)
from .learners import (
    ItkmSettings,
    MseEstimate,
    empirical_mse,
    itkm_learn,
    make_itkm_learner,
    oracle_ls_learn,
    oracle_ls_learner,
    thread_count,
)

__version__ = "0.1.0"
