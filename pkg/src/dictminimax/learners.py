"""Dictionary learning schemes under test and Monte Carlo MSE
estimation against a known generating dictionary.

The workhorse is iterative thresholding + K-means (ITKM): assign each
signal to the atoms it correlates with most, replace every atom by the
signed sum of its assigned signals, renormalize, repeat.  An oracle
least-squares baseline that sees the true coefficients is included for
calibration.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    Dictionary,
    ObservationBatch,
    ProblemConfig,
    frobenius_distance,
    sample_dictionary_in_ball,
    sign_align,
)
from .datagen import GeneratorSeed, generate_observations, normalize_signals

# A learner maps (batch, generating dictionary, rng) to an estimate.
# The generating dictionary is available for oracle initialization only.
Learner = Callable[[ObservationBatch, Dictionary, np.random.Generator], Dictionary]

THREADS_ENV_VAR = "DICTMINIMAX_THREADS"

_INIT_CHOICES = ("oracle", "reference", "random-in-ball")


def thread_count() -> int:
    """Worker cap from DICTMINIMAX_THREADS (0 or unset = auto)."""
    raw = os.environ.get(THREADS_ENV_VAR, "0")
    try:
        requested = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from None
    if requested < 0:
        raise ValueError(f"{THREADS_ENV_VAR} must be >= 0, got {requested}")
    if requested == 0:
        return min(os.cpu_count() or 1, 8)
    return requested


@dataclass(frozen=True)
class ItkmSettings:
    """Configuration of the ITKM iteration.

    s_tilde is the number of atoms selected per signal in the
    thresholding step; iterations is a hard cap, with early stop once
    successive iterates differ by less than stop_tol in Frobenius norm.
    """

    s_tilde: int = 1
    iterations: int = 50
    init: str = "oracle"
    normalize_signals: bool = True
    stop_tol: float = 1e-8

    def __post_init__(self):
        if self.s_tilde < 1:
            raise ValueError(f"s_tilde must be >= 1, got {self.s_tilde}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.init not in _INIT_CHOICES:
            raise ValueError(f"init must be one of {_INIT_CHOICES}, got {self.init!r}")


@dataclass(frozen=True)
class MseEstimate:
    """Monte Carlo estimate of a learner's mean squared error."""

    mean: float
    std_error: float
    trials: int


def itkm_learn(batch: ObservationBatch, settings: ItkmSettings,
               init_dict: Dictionary) -> Dictionary:
    """Run ITKM from an explicit initial dictionary.

    Each round: (thresholding) every signal column selects the s_tilde
    atoms of largest absolute inner product; (update) every atom becomes
    the sum of its selected signals weighted by the sign of that inner
    product; (renormalize) atoms are scaled back to unit norm.  Atoms
    selected by no signal keep their previous value, so the iterate
    always stays on the unit-column manifold.
    """
    config = batch.config
    if (init_dict.m, init_dict.p) != (config.m, config.p):
        raise ValueError(
            f"init dictionary is {init_dict.m}x{init_dict.p}, "
            f"batch wants {config.m}x{config.p}"
        )
    if settings.s_tilde > config.p:
        raise ValueError(f"s_tilde = {settings.s_tilde} exceeds p = {config.p}")
    if batch.n_signals == 0:
        raise ValueError("empty batch")
    if settings.normalize_signals and not batch.normalized:
        batch = normalize_signals(batch)
    signals = batch.observations
    n = signals.shape[1]
    cols = np.arange(n)

    current = np.array(init_dict.entries)
    for _ in range(settings.iterations):
        corr = current.T @ signals  # p x N
        weights = np.zeros_like(corr)
        if settings.s_tilde == 1:
            sel = np.argmax(np.abs(corr), axis=0)
            weights[sel, cols] = np.sign(corr[sel, cols])
        else:
            sel = np.argpartition(-np.abs(corr), settings.s_tilde - 1, axis=0)
            sel = sel[: settings.s_tilde]
            for row in sel:
                weights[row, cols] = np.sign(corr[row, cols])
        updated = signals @ weights.T  # m x p of signed sums
        norms = np.linalg.norm(updated, axis=0)
        alive = norms > 1e-12
        new = np.where(alive, updated / np.where(alive, norms, 1.0), current)
        if float(np.linalg.norm(new - current, "fro")) < settings.stop_tol:
            current = new
            break
        current = new
    return Dictionary(current)


def make_itkm_learner(settings: ItkmSettings) -> Learner:
    """Wrap ITKM as a learner, resolving the initial dictionary from
    settings.init: the generating dictionary (oracle), the reference,
    or a random point in the reference ball."""

    def learner(batch: ObservationBatch, truth: Dictionary,
                rng: np.random.Generator) -> Dictionary:
        if settings.init == "oracle":
            init = truth
        elif settings.init == "reference":
            if batch.config.reference is None:
                raise ValueError("reference init needs config.reference")
            init = batch.config.reference
        else:
            if batch.config.reference is None:
                raise ValueError("random-in-ball init needs config.reference")
            init = sample_dictionary_in_ball(batch.config.reference,
                                             batch.config.r, rng)
        return itkm_learn(batch, settings, init)

    return learner


def oracle_ls_learn(batch: ObservationBatch, *, return_flags: bool = False):
    """Least-squares fit of the dictionary given the true coefficients.

    Solves min_D ||Y - D X||_F^2 via the normal equations on the hidden
    support-masked coefficient matrix X, then renormalizes columns.
    Atoms active in no signal cannot be fit; they fall back to the
    reference dictionary's columns and are flagged (returned as a tuple
    of 1-based indices when return_flags is set).
    """
    config = batch.config
    coeffs = batch.coefficients
    active = np.any(coeffs != 0.0, axis=1)
    flagged = tuple(int(j) + 1 for j in np.flatnonzero(~active))
    if flagged and config.reference is None:
        raise ValueError(
            f"atoms {flagged} are never active and there is no reference "
            f"dictionary to fall back to"
        )
    fitted = np.zeros((config.m, config.p))
    if np.any(active):
        x_active = coeffs[active]
        gram = x_active @ x_active.T
        target = batch.observations @ x_active.T
        try:
            sol = np.linalg.solve(gram, target.T).T
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(gram, target.T, rcond=None)[0].T
        fitted[:, active] = sol
    norms = np.linalg.norm(fitted, axis=0)
    degenerate = norms <= 1e-12
    fallback = np.flatnonzero(degenerate & active)
    if fallback.size and config.reference is None:
        raise ValueError("degenerate fit with no reference dictionary to fall back to")
    if config.reference is not None:
        fitted[:, degenerate] = config.reference.entries[:, degenerate]
        norms = np.where(degenerate, 1.0, norms)
    estimate = Dictionary(fitted / norms)
    if return_flags:
        return estimate, flagged + tuple(int(j) + 1 for j in fallback)
    return estimate


def oracle_ls_learner(batch: ObservationBatch, truth: Dictionary,
                      rng: np.random.Generator) -> Dictionary:
    return oracle_ls_learn(batch)


def empirical_mse(config: ProblemConfig, dictionary: Dictionary,
                  learner: Learner, trials: int, seed: GeneratorSeed,
                  *, n_jobs: int | None = None,
                  return_trial_errors: bool = False):
    """Monte Carlo MSE of a learner against a fixed generating
    dictionary: mean over trials of the sign-aligned squared Frobenius
    error on fresh observations.

    Trials run on independent derived streams, so the result is
    identical whether they execute serially or in parallel; n_jobs
    defaults to the DICTMINIMAX_THREADS budget.
    """
    if trials < 2:
        raise ValueError(f"need >= 2 trials, got {trials}")

    def one_trial(index: int) -> float:
        rng = seed.generator(index)
        batch = generate_observations(config, dictionary, rng)
        estimate = learner(batch, dictionary, rng)
        aligned = sign_align(estimate, dictionary)
        return frobenius_distance(aligned, dictionary) ** 2

    workers = thread_count() if n_jobs is None else max(1, n_jobs)
    workers = min(workers, trials)
    if workers == 1:
        errors = np.array([one_trial(t) for t in range(trials)])
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            errors = np.array(list(pool.map(one_trial, range(trials))))
    estimate = MseEstimate(
        mean=float(errors.mean()),
        std_error=float(errors.std(ddof=1) / math.sqrt(trials)),
        trials=trials,
    )
    if return_trial_errors:
        return estimate, errors
    return estimate
