"""Core types for the sparse-coding dictionary model.

A dictionary is an m x p real matrix with unit-norm columns; observed
signals are noisy linear combinations of s of its columns.  This module
holds the shared domain types (dictionary, problem parameters, support
codec, packing ensembles, observation batches), the deterministic
dictionary constructors, and the metric utilities used everywhere else.

Atom indices are 1-based on every public surface (atoms are numbered
1..p, like the columns of a printed matrix); numpy storage is 0-based
internally.  All types are immutable after construction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

# Column norms must sit within this distance of 1 for a matrix to count
# as a point on the unit-column manifold.
UNIT_NORM_TOL = 1e-12

# Support codecs up to this many subsets keep an explicit table; beyond
# it, rank/unrank fall back to the O(p) combinatorial algorithm.
_TABLE_LIMIT = 1 << 16


def _frozen_matrix(entries) -> np.ndarray:
    arr = np.array(entries, dtype=float, copy=True)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dictionary:
    """An m x p matrix with unit-norm columns and p >= m atoms."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen_matrix(self.entries))
        m, p = self.entries.shape
        if p < m:
            raise ValueError(f"need at least as many atoms as rows, got {m}x{p}")
        norms = np.linalg.norm(self.entries, axis=0)
        off = np.abs(norms - 1.0)
        if np.any(off > UNIT_NORM_TOL):
            j = int(np.argmax(off))
            raise ValueError(
                f"column {j + 1} has norm {norms[j]!r}, "
                f"outside 1 +/- {UNIT_NORM_TOL}"
            )

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def p(self) -> int:
        return self.entries.shape[1]

    def columns(self, subset: Iterable[int]) -> np.ndarray:
        """Submatrix of the columns for the given 1-based atom indices."""
        idx = np.asarray(list(subset), dtype=int)
        if idx.size == 0:
            raise ValueError("empty atom subset")
        if idx.min() < 1 or idx.max() > self.p:
            raise ValueError(f"atom indices must lie in 1..{self.p}, got {idx}")
        return self.entries[:, idx - 1]


@dataclass(frozen=True)
class SupportCodec:
    """Bijection between ranks 0..C(p,s)-1 and size-s subsets of {1..p}.

    Subsets are enumerated in colexicographic order (sorted by largest
    element, then second largest, ...), which admits the closed-form
    rank  sum_t C(a_t - 1, t)  for a subset a_1 < ... < a_s.
    """

    p: int
    s: int

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if not 1 <= self.s <= self.p:
            raise ValueError(f"need 1 <= s <= p, got s={self.s}, p={self.p}")

    @property
    def n_subsets(self) -> int:
        return math.comb(self.p, self.s)

    @cached_property
    def _table(self) -> tuple[tuple[int, ...], ...] | None:
        if self.n_subsets > _TABLE_LIMIT:
            return None
        combos = itertools.combinations(range(1, self.p + 1), self.s)
        return tuple(sorted(combos, key=lambda c: c[::-1]))

    @cached_property
    def _index(self) -> dict[tuple[int, ...], int] | None:
        if self._table is None:
            return None
        return {sub: i for i, sub in enumerate(self._table)}

    @cached_property
    def _table_array(self) -> np.ndarray | None:
        if self._table is None:
            return None
        arr = np.array(self._table, dtype=np.int64)
        arr.setflags(write=False)
        return arr

    def unrank(self, rank: int) -> tuple[int, ...]:
        """Subset (ascending, 1-based) at the given colex rank."""
        rank = int(rank)
        if not 0 <= rank < self.n_subsets:
            raise ValueError(
                f"rank {rank} outside 0..{self.n_subsets - 1} for "
                f"(p={self.p}, s={self.s})"
            )
        if self._table is not None:
            return self._table[rank]
        rem = rank
        out = []
        a = self.p
        for t in range(self.s, 0, -1):
            while math.comb(a - 1, t) > rem:
                a -= 1
            out.append(a)
            rem -= math.comb(a - 1, t)
        return tuple(reversed(out))

    def rank(self, subset: Iterable[int]) -> int:
        """Colex rank of a size-s subset of {1..p}."""
        tup = tuple(sorted(int(a) for a in subset))
        if len(tup) != self.s or len(set(tup)) != self.s:
            raise ValueError(f"subset must have {self.s} distinct atoms, got {tup}")
        if tup[0] < 1 or tup[-1] > self.p:
            raise ValueError(f"atoms must lie in 1..{self.p}, got {tup}")
        if self._index is not None:
            return self._index[tup]
        return sum(math.comb(a - 1, t) for t, a in enumerate(tup, start=1))

    def subsets_for(self, ranks: np.ndarray) -> np.ndarray:
        """Vectorized unrank: (N,) ranks -> (N, s) array of 1-based atoms."""
        ranks = np.asarray(ranks, dtype=np.int64)
        if self._table_array is not None:
            return self._table_array[ranks]
        return np.array([self.unrank(int(r)) for r in ranks], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class ProblemConfig:
    """Full parameterization of the generative model.

    sigma_a is the std dev of an active coefficient, sigma the noise std
    dev, r the radius of the search ball around the reference
    dictionary.  reference may be omitted for closed-form bound
    evaluation; sampling and packing require it.
    """

    m: int
    p: int
    s: int
    sigma_a: float
    sigma: float
    r: float
    reference: Dictionary | None = None
    n_samples: int = 1

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.p < self.m:
            raise ValueError(f"p must be >= m, got p={self.p}, m={self.m}")
        if not 1 <= self.s <= self.m:
            raise ValueError(f"need 1 <= s <= m, got s={self.s}, m={self.m}")
        if self.sigma_a < 0:
            raise ValueError(f"sigma_a must be >= 0, got {self.sigma_a}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.r <= 0:
            raise ValueError(f"r must be > 0, got {self.r}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.reference is not None:
            if (self.reference.m, self.reference.p) != (self.m, self.p):
                raise ValueError(
                    f"reference is {self.reference.m}x{self.reference.p}, "
                    f"config wants {self.m}x{self.p}"
                )

    def snr(self) -> float:
        """(sigma_a / sigma)^2; undefined for a noiseless model."""
        if self.sigma == 0:
            raise ValueError("snr undefined for sigma = 0")
        return (self.sigma_a / self.sigma) ** 2

    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr())

    def codec(self) -> SupportCodec:
        return SupportCodec(self.p, self.s)


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Finite set of dictionaries inside the radius ball, with a
    certified minimum pairwise Frobenius separation."""

    members: tuple[Dictionary, ...]
    separation: float
    radius: float
    reference: Dictionary

    # Membership in the ball is checked up to this slack to absorb
    # rounding in externally supplied ensembles.
    _MEMBERSHIP_TOL = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValueError("ensemble needs at least one member")
        shape = (self.reference.m, self.reference.p)
        for i, d in enumerate(self.members):
            if (d.m, d.p) != shape:
                raise ValueError(f"member {i + 1} has shape {(d.m, d.p)} != {shape}")
            dist = frobenius_distance(d, self.reference)
            if dist > self.radius + self._MEMBERSHIP_TOL:
                raise ValueError(
                    f"member {i + 1} at distance {dist} from reference, "
                    f"outside radius {self.radius}"
                )
        observed = self.min_pairwise_distance()
        if observed < self.separation - 1e-12:
            raise ValueError(
                f"claimed separation {self.separation} exceeds observed "
                f"minimum pairwise distance {observed}"
            )

    @classmethod
    def certify(cls, members: Sequence[Dictionary], radius: float,
                reference: Dictionary) -> "Ensemble":
        """Build an ensemble with separation set to the exact observed
        minimum pairwise distance."""
        members = tuple(members)
        sep = math.inf
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                sep = min(sep, frobenius_distance(members[i], members[j]))
        return cls(members=members, separation=sep, radius=radius,
                   reference=reference)

    @property
    def size(self) -> int:
        return len(self.members)

    def min_pairwise_distance(self) -> float:
        sep = math.inf
        for i in range(len(self.members)):
            for j in range(i + 1, len(self.members)):
                sep = min(sep, frobenius_distance(self.members[i], self.members[j]))
        return sep


@dataclass(frozen=True, eq=False)
class ObservationBatch:
    """Observed signal matrix plus the hidden ground truth that
    generated it (support ranks and coefficient matrix)."""

    observations: np.ndarray   # m x N
    supports: tuple[int, ...]  # support rank of each column
    coefficients: np.ndarray   # p x N, zero off the ranked support
    config: ProblemConfig
    normalized: bool = False
    n_zero_columns: int = 0

    def __post_init__(self):
        object.__setattr__(self, "observations", _frozen_matrix(self.observations))
        object.__setattr__(self, "coefficients", _frozen_matrix(self.coefficients))
        object.__setattr__(self, "supports", tuple(int(i) for i in self.supports))
        m, n = self.observations.shape
        if m != self.config.m:
            raise ValueError(f"observations have {m} rows, config wants {self.config.m}")
        if self.coefficients.shape != (self.config.p, n):
            raise ValueError(
                f"coefficients shape {self.coefficients.shape} does not match "
                f"(p={self.config.p}, N={n})"
            )
        if len(self.supports) != n:
            raise ValueError(f"{len(self.supports)} support ranks for {n} columns")
        codec = self.config.codec()
        subs = codec.subsets_for(np.asarray(self.supports, dtype=np.int64))
        mask = np.zeros((self.config.p, n), dtype=bool)
        mask[subs.T - 1, np.arange(n)] = True
        if np.any(self.coefficients[~mask] != 0.0):
            raise ValueError("coefficients are nonzero outside their declared support")

    @property
    def n_signals(self) -> int:
        return self.observations.shape[1]


def make_identity_dictionary(m: int) -> Dictionary:
    """The m x m identity as a dictionary (orthonormal, square)."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    return Dictionary(np.eye(m))


def make_hadamard(m: int) -> np.ndarray:
    """Hadamard matrix of order m (a power of two), entries +/-1.

    Built by the Kronecker recursion from the order-2 seed
    [[1, 1], [1, -1]]; satisfies F F^T = m I exactly in integer
    arithmetic.  Order 1 is the 1x1 matrix [[1]].
    """
    if m < 1 or (m & (m - 1)) != 0:
        raise ValueError(f"Hadamard order must be a power of two, got {m}")
    f = np.array([[1]], dtype=np.int64)
    seed = np.array([[1, 1], [1, -1]], dtype=np.int64)
    while f.shape[0] < m:
        f = np.kron(seed, f)
    return f


def make_dirac_hadamard_dictionary(m: int) -> Dictionary:
    """The m x 2m concatenation [I, F/sqrt(m)] of the identity and the
    column-normalized Hadamard matrix."""
    f = make_hadamard(m)
    return Dictionary(np.hstack([np.eye(m), f / math.sqrt(m)]))


def frobenius_distance(a: Dictionary, b: Dictionary) -> float:
    """Frobenius norm of the difference of two equal-shape dictionaries."""
    if (a.m, a.p) != (b.m, b.p):
        raise ValueError(f"shape mismatch: {(a.m, a.p)} vs {(b.m, b.p)}")
    return float(np.linalg.norm(a.entries - b.entries, "fro"))


def sign_align(estimate: Dictionary, truth: Dictionary) -> Dictionary:
    """Flip the sign of each estimate column iff that strictly reduces
    its Euclidean distance to the matching truth column.

    Column order is never changed: inside a small ball around a
    reference dictionary the column identities are fixed, only the signs
    are ambiguous.
    """
    if (estimate.m, estimate.p) != (truth.m, truth.p):
        raise ValueError(
            f"shape mismatch: {(estimate.m, estimate.p)} vs {(truth.m, truth.p)}"
        )
    dots = np.sum(estimate.entries * truth.entries, axis=0)
    signs = np.where(dots < 0.0, -1.0, 1.0)
    if np.all(signs == 1.0):
        return estimate
    return Dictionary(estimate.entries * signs)


def sample_dictionary_in_ball(reference: Dictionary, r: float,
                              rng: np.random.Generator) -> Dictionary:
    """Random unit-column dictionary within Frobenius distance r of the
    reference.

    One i.i.d. Gaussian perturbation is drawn per call (the draw count
    does not depend on r or on backtracking); columns are renormalized
    and the perturbation scale is halved until the result lands inside
    the ball.  r = 0 returns the reference itself.
    """
    if r < 0:
        raise ValueError(f"r must be >= 0, got {r}")
    if r == 0.0:
        return reference
    m, p = reference.m, reference.p
    noise = rng.standard_normal((m, p))
    # Typical first-shot distance is just under r: per column the
    # renormalized perturbation keeps ~ (m-1)/m of its mass.
    tau = r / math.sqrt(m * p)
    for _ in range(200):
        cand = reference.entries + tau * noise
        norms = np.linalg.norm(cand, axis=0)
        if np.all(norms > 1e-12):
            cand = cand / norms
            if float(np.linalg.norm(cand - reference.entries, "fro")) <= r:
                return Dictionary(cand)
        tau *= 0.5
    raise RuntimeError("perturbation backtracking failed to land inside the ball")
