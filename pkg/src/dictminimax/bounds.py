"""Information-theoretic machinery: conditional covariances, Gaussian
KL divergence, mutual-information upper bounds, the closed-form minimax
lower bound, random packing construction, minimum-distance detection,
and the instance-specific bound search.

The route from packing to risk bound: a set of L dictionaries inside the
radius-r ball with pairwise Frobenius separation sqrt(8*eps) reduces
estimation to an L-ary detection problem.  If the data carry too little
information to detect the generating member — conditional mutual
information below (1/2)*log2(L) - 1 — then no estimator can achieve
worst-case squared error eps, so every certified eps is a valid lower
bound on the minimax risk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np

from .core import (
    Dictionary,
    Ensemble,
    ProblemConfig,
    SupportCodec,
    frobenius_distance,
    sample_dictionary_in_ball,
)

# Support expectations with at most this many subsets are summed
# exactly; larger spaces fall back to Monte Carlo.
EXACT_SUPPORT_LIMIT = 10_000

# Default number of support draws in Monte Carlo mode.
MC_SUPPORT_SAMPLES = 1_000


class NotSpdError(ValueError):
    """A matrix that must be symmetric positive definite is not."""


class PackingInfeasibleError(RuntimeError):
    """Packing construction ran out of attempts (or is impossible by
    the ball diameter); carries the best partial ensemble found."""

    def __init__(self, message: str, partial: Ensemble | None, attempts: int):
        super().__init__(message)
        self.partial = partial
        self.attempts = attempts

    @property
    def partial_size(self) -> int:
        return 0 if self.partial is None else self.partial.size


@dataclass(frozen=True)
class BoundReport:
    """Closed-form minimax lower bound and validity metadata.

    value is always min(r^2/16, p^2 / (SNR * 5120 * N * s)); the
    conditions only say whether the guarantee regime holds, they never
    change the reported number.
    """

    value: float
    branch: Literal["radius", "sample_size"]
    conditions_met: bool
    condition_details: dict


@dataclass(frozen=True)
class MiBoundReport:
    """Upper bound on the support-conditional mutual information
    between the observations and the index of the generating member."""

    upper_bound_nats: float
    support_expectation_mode: Literal["exact", "monte_carlo"]
    pairs_evaluated: int
    std_error_nats: float = 0.0


@dataclass(frozen=True)
class PackingCheckReport:
    """Margins for the two packing desiderata: pairwise separation and
    a small mutual-information budget."""

    separation_required: float
    separation_observed: float
    separation_ok: bool
    membership_ok: bool
    eta: float
    mi_report: MiBoundReport
    mi_ok: bool

    @property
    def passed(self) -> bool:
        return self.separation_ok and self.membership_ok and self.mi_ok

    @property
    def separation_margin(self) -> float:
        return self.separation_observed - self.separation_required

    @property
    def mi_margin(self) -> float:
        return self.eta - self.mi_report.upper_bound_nats


@dataclass(frozen=True)
class InstanceBoundResult:
    """Outcome of the certified instance-specific bound search."""

    epsilon: float
    certified: bool
    ensemble: Ensemble | None
    mi_report: MiBoundReport | None
    threshold: float
    evaluations: int
    diagnostics: str


def conditional_covariance(dictionary: Dictionary, subset: Iterable[int],
                           sigma_a: float, sigma: float) -> np.ndarray:
    """Covariance of one observed signal given its support:
    sigma_a^2 * D_S D_S^T + sigma^2 * I."""
    d_s = dictionary.columns(subset)
    return sigma_a**2 * (d_s @ d_s.T) + sigma**2 * np.eye(dictionary.m)


def _chol_logdet(cov: np.ndarray, label: str) -> float:
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        eigs = np.linalg.eigvalsh(cov)
        raise NotSpdError(
            f"{label} is not positive definite: eigenvalues in "
            f"[{eigs.min():.3e}, {eigs.max():.3e}]"
        ) from None
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def gaussian_kl(cov_a: np.ndarray, cov_b: np.ndarray) -> float:
    """KL divergence (nats) between zero-mean Gaussians with the given
    covariances:

        KL(N(0,A) || N(0,B)) = (tr(B^-1 A) - m + ln det B - ln det A) / 2
    """
    cov_a = np.asarray(cov_a, dtype=float)
    cov_b = np.asarray(cov_b, dtype=float)
    if cov_a.shape != cov_b.shape or cov_a.ndim != 2 or cov_a.shape[0] != cov_a.shape[1]:
        raise ValueError(f"need equal square matrices, got {cov_a.shape} and {cov_b.shape}")
    for cov, label in ((cov_a, "cov_a"), (cov_b, "cov_b")):
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-10 * max(1.0, abs(cov).max())):
            raise NotSpdError(f"{label} is not symmetric")
    m = cov_a.shape[0]
    logdet_a = _chol_logdet(cov_a, "cov_a")
    logdet_b = _chol_logdet(cov_b, "cov_b")
    trace = float(np.trace(np.linalg.solve(cov_b, cov_a)))
    return 0.5 * (trace - m + logdet_b - logdet_a)


def _avg_pairwise_kl(covs: list[np.ndarray]) -> float:
    """(1/L^2) sum over ordered pairs of member KLs for one support."""
    size = len(covs)
    if size == 1:
        return 0.0
    m = covs[0].shape[0]
    logdets = [_chol_logdet(c, f"member {i + 1} covariance") for i, c in enumerate(covs)]
    invs = [np.linalg.inv(c) for c in covs]
    total = 0.0
    for a in range(size):
        for b in range(size):
            if a == b:
                continue
            trace = float(np.sum(invs[b] * covs[a]))
            total += 0.5 * (trace - m + logdets[b] - logdets[a])
    return total / size**2


def mi_upper_bound(ensemble: Ensemble, config: ProblemConfig,
                   codec: SupportCodec,
                   mode: Literal["auto", "exact", "monte_carlo"] = "auto",
                   rng: np.random.Generator | None = None,
                   *, exact_threshold: int = EXACT_SUPPORT_LIMIT,
                   n_support_samples: int = MC_SUPPORT_SAMPLES) -> MiBoundReport:
    """Upper bound (nats) on the conditional mutual information between
    N observations and a uniform member index, given the supports.

    Conditioned on a support, each member's observation is Gaussian, so
    the mixture-vs-component divergence is bounded by the average
    pairwise KL:  N * E_support[(1/L^2) sum_{l,l'} KL_l,l'].  The support
    expectation is exact when C(p,s) <= exact_threshold, else Monte
    Carlo over n_support_samples uniform supports.
    """
    for i, member in enumerate(ensemble.members):
        if (member.m, member.p) != (config.m, config.p):
            raise ValueError(f"ensemble member {i + 1} does not match config shape")
    if (codec.p, codec.s) != (config.p, config.s):
        raise ValueError("codec does not match config")
    n_subsets = codec.n_subsets
    if mode == "auto":
        mode = "exact" if n_subsets <= exact_threshold else "monte_carlo"

    def kl_for_rank(rank: int) -> float:
        subset = codec.unrank(rank)
        covs = [
            conditional_covariance(member, subset, config.sigma_a, config.sigma)
            for member in ensemble.members
        ]
        return _avg_pairwise_kl(covs)

    size = ensemble.size
    if mode == "exact":
        values = [kl_for_rank(rank) for rank in range(n_subsets)]
        bound = config.n_samples * float(np.mean(values))
        return MiBoundReport(
            upper_bound_nats=bound,
            support_expectation_mode="exact",
            pairs_evaluated=n_subsets * size * (size - 1),
        )
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    if rng is None:
        raise ValueError("monte_carlo mode needs an rng")
    if n_support_samples < 2:
        raise ValueError(f"need >= 2 support samples, got {n_support_samples}")
    ranks = rng.integers(0, n_subsets, size=n_support_samples, dtype=np.int64)
    values = np.array([kl_for_rank(int(r)) for r in ranks])
    bound = config.n_samples * float(values.mean())
    stderr = config.n_samples * float(values.std(ddof=1) / math.sqrt(len(values)))
    return MiBoundReport(
        upper_bound_nats=bound,
        support_expectation_mode="monte_carlo",
        pairs_evaluated=n_support_samples * size * (size - 1),
        std_error_nats=stderr,
    )


def minimax_lower_bound(config: ProblemConfig) -> BoundReport:
    """Closed-form lower bound on the minimax risk (squared Frobenius
    units):  min(r^2/16, p^2 / (SNR * 5120 * N * s)).

    The value is reported unconditionally; conditions_met records
    whether the guarantee regime holds: p > 64 (strict),
    m >= 192*s*(9 + 2*ln(p/s)), and r <= 1/sqrt(p).  Natural logarithm
    throughout.
    """
    snr = config.snr()
    radius_term = config.r**2 / 16.0
    sample_term = config.p**2 / (snr * 5120.0 * config.n_samples * config.s)
    if radius_term <= sample_term:
        value, branch = radius_term, "radius"
    else:
        value, branch = sample_term, "sample_size"
    m_threshold = 192.0 * config.s * (9.0 + 2.0 * math.log(config.p / config.s))
    r_limit = 1.0 / math.sqrt(config.p)
    details = {
        "p_gt_64": config.p > 64,
        "m_ge_threshold": config.m >= m_threshold,
        "m_threshold": m_threshold,
        "r_le_inv_sqrt_p": config.r <= r_limit,
        "r_limit": r_limit,
        "log_base": "e",
    }
    met = details["p_gt_64"] and details["m_ge_threshold"] and details["r_le_inv_sqrt_p"]
    return BoundReport(value=value, branch=branch, conditions_met=met,
                       condition_details=details)


def sparse_recovery_condition(config: ProblemConfig, c0: float) -> bool:
    """Standard dimension requirement for sparse recovery with a known
    dictionary: m >= c0 * s * ln(p/s)."""
    if c0 <= 0:
        raise ValueError(f"c0 must be > 0, got {c0}")
    return config.m >= c0 * config.s * math.log(config.p / config.s)


def fano_mi_threshold(ensemble_size: int) -> float:
    """Detection-information threshold (1/2)*log2(L) - 1.

    Whenever an ensemble with pairwise separation sqrt(8*eps) exists and
    the minimax risk is eps, the conditional mutual information must
    reach this value; an ensemble whose information bound stays below it
    therefore certifies that the risk exceeds eps.
    """
    if ensemble_size < 1:
        raise ValueError(f"ensemble size must be >= 1, got {ensemble_size}")
    return 0.5 * math.log2(ensemble_size) - 1.0


def bound_chain_check(p: int, ensemble_size: float | None = None) -> bool:
    """Verify the arithmetic chain that turns the packing cardinality
    into the constant of the closed-form bound:

        (1/2)*log2(L) - 1  >=  0.7*p/32 - 1  >=  0.2*p/32

    With the default L = e^(p/32) the first link holds identically
    (log2(e)/2 > 0.7) and the chain reduces to p >= 64; an explicit
    integer L (e.g. a floored cardinality) is checked as given.
    """
    if ensemble_size is None:
        half_log2_l = 0.5 * (p / 32.0) * math.log2(math.e)
    else:
        if ensemble_size < 1:
            raise ValueError(f"ensemble size must be >= 1, got {ensemble_size}")
        half_log2_l = 0.5 * math.log2(ensemble_size)
    mid = 0.7 * p / 32.0 - 1.0
    return half_log2_l - 1.0 >= mid and mid >= 0.2 * p / 32.0


def build_packing(reference: Dictionary, r: float, epsilon: float,
                  target_size: int, max_attempts: int,
                  rng: np.random.Generator) -> Ensemble:
    """Rejection-sample an ensemble of target_size dictionaries inside
    the radius-r ball with pairwise separation >= sqrt(8*epsilon).

    Guaranteed-existence regime is epsilon < r^2/16; larger epsilon is
    attempted anyway and fails fast when sqrt(8*epsilon) exceeds the
    ball diameter.  Raises PackingInfeasibleError carrying the best
    partial ensemble when the attempt budget runs out.
    """
    if target_size < 2:
        raise ValueError(f"target size must be >= 2, got {target_size}")
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    if max_attempts < 1:
        raise ValueError(f"max_attempts must be >= 1, got {max_attempts}")
    separation = math.sqrt(8.0 * epsilon)
    if separation > 2.0 * r + 1e-12:
        raise PackingInfeasibleError(
            f"required separation {separation:.6g} exceeds the ball diameter "
            f"{2.0 * r:.6g}; no two members can coexist",
            partial=None,
            attempts=0,
        )
    members: list[Dictionary] = []
    attempts = 0
    while len(members) < target_size and attempts < max_attempts:
        attempts += 1
        cand = sample_dictionary_in_ball(reference, r, rng)
        if all(frobenius_distance(cand, d) >= separation for d in members):
            members.append(cand)
    if len(members) < target_size:
        partial = (
            Ensemble.certify(members, radius=r, reference=reference)
            if members else None
        )
        raise PackingInfeasibleError(
            f"built {len(members)} of {target_size} members in "
            f"{attempts} attempts at separation {separation:.6g}",
            partial=partial,
            attempts=attempts,
        )
    return Ensemble.certify(members, radius=r, reference=reference)


def verify_packing_desiderata(ensemble: Ensemble, config: ProblemConfig,
                              epsilon: float, codec: SupportCodec,
                              mode: Literal["auto", "exact", "monte_carlo"] = "auto",
                              rng: np.random.Generator | None = None) -> PackingCheckReport:
    """Check both packing desiderata against an ensemble and report the
    margins: (i) pairwise separation >= sqrt(8*epsilon), (ii) the
    mutual-information upper bound stays within the budget
    eta = 32 * epsilon * N * s * SNR / p."""
    separation_required = math.sqrt(8.0 * epsilon)
    separation_observed = ensemble.min_pairwise_distance()
    membership_ok = all(
        frobenius_distance(member, config.reference) <= config.r + 1e-9
        for member in ensemble.members
    ) if config.reference is not None else True
    eta = 32.0 * epsilon * config.n_samples * config.s * config.snr() / config.p
    mi_report = mi_upper_bound(ensemble, config, codec, mode=mode, rng=rng)
    return PackingCheckReport(
        separation_required=separation_required,
        separation_observed=separation_observed,
        separation_ok=separation_observed >= separation_required,
        membership_ok=membership_ok,
        eta=eta,
        mi_report=mi_report,
        mi_ok=mi_report.upper_bound_nats <= eta,
    )


def min_distance_detect(estimate: Dictionary, ensemble: Ensemble) -> int:
    """1-based index of the ensemble member nearest to the estimate in
    Frobenius distance; ties break toward the lowest index.

    When the ensemble has separation sqrt(8*eps) and the estimate lies
    within sqrt(2*eps) of a member, the triangle inequality makes this
    detector exact.
    """
    distances = [frobenius_distance(estimate, member) for member in ensemble.members]
    return int(np.argmin(distances)) + 1


def instance_bound_search(config: ProblemConfig, target_size: int,
                          attempts: int, rng: np.random.Generator,
                          *, rounds: int = 18,
                          mode: Literal["auto", "exact", "monte_carlo"] = "auto") -> InstanceBoundResult:
    """Bisect for the largest eps in (0, r^2/16) that an explicit
    ensemble certifies as a minimax-risk lower bound.

    A candidate eps certifies when a packing at separation sqrt(8*eps)
    exists inside the ball AND its mutual-information upper bound stays
    strictly below the detection threshold (1/2)*log2(L) - 1: the data
    then cannot support reliable L-ary detection, so no estimator
    achieves worst-case squared error eps.  Members are sampled inside
    the sub-ball of radius min(r, 5*sqrt(eps)) — still inside the
    radius-r ball, but tight enough that the information bound shrinks
    with eps and the bisection is monotone in practice.

    Never raises: if nothing certifies, returns a zero bound with
    diagnostics.
    """
    if target_size < 2:
        raise ValueError(f"target size must be >= 2, got {target_size}")
    if config.reference is None:
        raise ValueError("instance bound search needs config.reference")
    r_limit = 1.0 / math.sqrt(config.p)
    if config.r > r_limit + 1e-12:
        raise ValueError(f"need r <= 1/sqrt(p) = {r_limit:.6g}, got r = {config.r}")
    threshold = fano_mi_threshold(target_size)
    codec = config.codec()
    if threshold <= 0.0:
        return InstanceBoundResult(
            epsilon=0.0, certified=False, ensemble=None, mi_report=None,
            threshold=threshold, evaluations=0,
            diagnostics=(
                f"threshold {threshold:.4g} is not positive for L = {target_size}; "
                f"need L >= 5 for a certifiable instance"
            ),
        )

    evaluations = 0

    def certify(eps: float):
        nonlocal evaluations
        evaluations += 1
        sample_radius = min(config.r, 5.0 * math.sqrt(eps))
        try:
            ensemble = build_packing(config.reference, sample_radius, eps,
                                     target_size, attempts, rng)
        except PackingInfeasibleError:
            return None
        report = mi_upper_bound(ensemble, config, codec, mode=mode, rng=rng)
        if report.upper_bound_nats < threshold:
            return ensemble, report
        return None

    cap = (config.r**2 / 16.0) * (1.0 - 1e-9)
    best_eps = 0.0
    best: tuple[Ensemble, MiBoundReport] | None = None

    hit = certify(cap)
    if hit is not None:
        best_eps, best = cap, hit
    else:
        lo, hi = 0.0, cap
        for _ in range(rounds):
            mid = 0.5 * (lo + hi)
            if mid <= 0.0:
                break
            hit = certify(mid)
            if hit is not None:
                if mid > best_eps:
                    best_eps, best = mid, hit
                lo = mid
            else:
                hi = mid

    if best is None:
        return InstanceBoundResult(
            epsilon=0.0, certified=False, ensemble=None, mi_report=None,
            threshold=threshold, evaluations=evaluations,
            diagnostics=(
                f"no eps in (0, {cap:.6g}] certified after {evaluations} "
                f"bisection evaluations (attempt budget {attempts} each)"
            ),
        )
    ensemble, report = best
    return InstanceBoundResult(
        epsilon=best_eps, certified=True, ensemble=ensemble, mi_report=report,
        threshold=threshold, evaluations=evaluations,
        diagnostics=(
            f"certified: separation {ensemble.separation:.6g} >= "
            f"{math.sqrt(8.0 * best_eps):.6g}, information bound "
            f"{report.upper_bound_nats:.6g} < threshold {threshold:.6g}"
        ),
    )
