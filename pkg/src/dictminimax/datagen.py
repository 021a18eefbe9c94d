"""Sampling the generative model: uniform size-s supports, Gaussian
active coefficients, additive white Gaussian noise.

Reproducibility contract: every sampling routine consumes a fixed number
of draws that depends only on (m, p, s, N), never on parameter values or
on intermediate results, so a fixed seed reproduces bit-identical output
across configurations that share those shapes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import Dictionary, ObservationBatch, ProblemConfig, SupportCodec

# Support ranks are drawn as 63-bit integers; larger subset spaces are
# out of scope for this workbench.
_MAX_RANK_SPACE = 1 << 63


@dataclass(frozen=True)
class GeneratorSeed:
    """Root of a splittable random stream.

    (master_seed, stream_id) feeds a counter-based splitting
    construction, so distinct stream ids (and distinct extra keys) yield
    statistically independent streams that never depend on scheduling.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= v < (1 << 64):
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def generator(self, *extra: int) -> np.random.Generator:
        """Fresh generator for this stream, optionally split further by
        extra integer keys (e.g. a trial index)."""
        seq = np.random.SeedSequence(
            entropy=self.master_seed, spawn_key=(self.stream_id, *extra)
        )
        return np.random.default_rng(seq)


def sample_coefficients(config: ProblemConfig, codec: SupportCodec,
                        rng: np.random.Generator) -> tuple[int, np.ndarray]:
    """One draw of (support rank, sparse coefficient vector).

    The rank is uniform over all C(p,s) subsets; the s active entries
    are i.i.d. Normal(0, sigma_a^2); the rest are exactly zero.
    """
    n_subsets = codec.n_subsets
    if n_subsets > _MAX_RANK_SPACE:
        raise ValueError(f"C(p,s) = {n_subsets} exceeds the supported rank space")
    rank = int(rng.integers(0, n_subsets))
    active = config.sigma_a * rng.standard_normal(config.s)
    x = np.zeros(config.p)
    x[np.asarray(codec.unrank(rank), dtype=int) - 1] = active
    return rank, x


def generate_observations(config: ProblemConfig, dictionary: Dictionary,
                          rng: np.random.Generator) -> ObservationBatch:
    """N independent columns y = D x + w with hidden ground truth kept.

    Draw order: N support ranks, then the s x N active-coefficient
    block, then the m x N noise block.
    """
    if (dictionary.m, dictionary.p) != (config.m, config.p):
        raise ValueError(
            f"dictionary is {dictionary.m}x{dictionary.p}, "
            f"config wants {config.m}x{config.p}"
        )
    codec = config.codec()
    n_subsets = codec.n_subsets
    if n_subsets > _MAX_RANK_SPACE:
        raise ValueError(f"C(p,s) = {n_subsets} exceeds the supported rank space")
    n = config.n_samples
    ranks = rng.integers(0, n_subsets, size=n, dtype=np.int64)
    active = config.sigma_a * rng.standard_normal((config.s, n))
    noise = config.sigma * rng.standard_normal((config.m, n))

    coeffs = np.zeros((config.p, n))
    subs = codec.subsets_for(ranks)
    coeffs[subs.T - 1, np.arange(n)] = active
    observations = dictionary.entries @ coeffs + noise
    return ObservationBatch(
        observations=observations,
        supports=tuple(int(r) for r in ranks),
        coefficients=coeffs,
        config=config,
    )


def normalize_signals(batch: ObservationBatch) -> ObservationBatch:
    """Scale every observed column to unit Euclidean norm.

    Ground-truth supports and coefficients are carried through unchanged
    (they describe the pre-normalization signals; the batch is flagged
    as normalized).  Exactly-zero columns are left untouched and counted
    in n_zero_columns.
    """
    norms = np.linalg.norm(batch.observations, axis=0)
    zero = norms == 0.0
    scale = np.where(zero, 1.0, norms)
    return replace(
        batch,
        observations=batch.observations / scale,
        normalized=True,
        n_zero_columns=int(np.count_nonzero(zero)),
    )
