"""Weighted particle systems, cumulative weights, and replayable uniform streams.

Conventions used throughout the package:

* particle indices are 0-based (``0 .. N-1``);
* weights are stored normalized (they sum to 1 up to 1e-12);
* all randomness flows through :class:`UniformStream`, a counter-based
  (Philox) stream keyed by ``(seed, stream_id)``, so that any substream is
  a pure function of its identifiers and every result is replayable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "ResamplabError",
    "NegativeWeightError",
    "NonFiniteWeightError",
    "AllZeroWeightsError",
    "CountMismatchError",
    "IndexOutOfRangeError",
    "UniformStream",
    "WeightedParticleSystem",
    "CumulativeWeights",
    "ResampleResult",
    "normalize_weights",
    "inverse_cdf",
    "counts_to_ancestors",
    "ancestors_to_counts",
]

WEIGHT_SUM_TOL = 1e-12
DEVIATION_SUM_TOL = 1e-9


class ResamplabError(Exception):
    """Base class for all errors raised by this package."""


class NegativeWeightError(ResamplabError, ValueError):
    pass


class NonFiniteWeightError(ResamplabError, ValueError):
    pass


class AllZeroWeightsError(ResamplabError, ValueError):
    pass


class CountMismatchError(ResamplabError, ValueError):
    pass


class IndexOutOfRangeError(ResamplabError, ValueError):
    pass


class UniformStream:
    """Seeded, replayable stream of uniforms on [0, 1).

    Built on the counter-based Philox generator: the state is a pure
    function of ``(seed, stream_id)``, so two streams constructed with the
    same identifiers produce bitwise-equal draws.  Independent substreams
    are derived with :meth:`substream`, e.g. ``stream.substream(t, k)`` for
    replicate ``k`` at step ``t``.

    ``counter`` tracks the number of variates drawn so far (uniforms and
    normals both advance it).
    """

    __slots__ = ("seed", "stream_id", "counter", "_gen")

    def __init__(self, seed: int, stream_id: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.stream_id = tuple(int(i) for i in stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream_id)
        self._gen = np.random.Generator(np.random.Philox(ss))
        self.counter = 0

    def __repr__(self) -> str:
        return f"UniformStream(seed={self.seed}, stream_id={self.stream_id}, counter={self.counter})"

    def substream(self, *ids: int) -> "UniformStream":
        """Independent stream keyed by ``(seed, stream_id + ids)``."""
        return UniformStream(self.seed, self.stream_id + tuple(int(i) for i in ids))

    def uniform(self) -> float:
        self.counter += 1
        return float(self._gen.random())

    def uniforms(self, shape) -> np.ndarray:
        u = self._gen.random(shape)
        self.counter += u.size
        return u

    def normals(self, shape) -> np.ndarray:
        z = self._gen.standard_normal(shape)
        self.counter += z.size
        return z


def normalize_weights(raw) -> np.ndarray:
    """Scale nonnegative weights so they sum to 1.

    Raises
    ------
    NonFiniteWeightError
        if any entry is NaN or infinite.
    NegativeWeightError
        if any entry is < 0.
    AllZeroWeightsError
        if every entry is 0.
    """
    w = np.asarray(raw, dtype=np.float64)
    if w.ndim != 1 or w.size < 1:
        raise ValueError("weights must be a nonempty 1-d array")
    if not np.all(np.isfinite(w)):
        raise NonFiniteWeightError("weights contain NaN or infinity")
    if np.any(w < 0):
        raise NegativeWeightError("weights must be nonnegative")
    total = float(np.sum(np.asarray(w, dtype=np.longdouble)))
    if total == 0.0:
        raise AllZeroWeightsError("all weights are zero")
    return w / total


class WeightedParticleSystem:
    """N states in R^d with normalized nonnegative weights.

    ``states`` is stored as an (N, d) array; a 1-d input of shape (N,) is
    treated as d = 1.  Weights are normalized on construction (zero-weight
    particles are allowed).  Instances are immutable: the stored arrays are
    marked read-only.
    """

    __slots__ = ("states", "weights", "__dict__")

    def __init__(self, states, weights):
        x = np.array(states, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError("states must have shape (N,) or (N, d) with N >= 1")
        w = normalize_weights(weights)
        if w.shape[0] != x.shape[0]:
            raise ValueError(
                f"states rows ({x.shape[0]}) and weights length ({w.shape[0]}) differ"
            )
        x.setflags(write=False)
        w.setflags(write=False)
        self.states = x
        self.weights = w

    @property
    def n(self) -> int:
        return self.states.shape[0]

    @property
    def d(self) -> int:
        return self.states.shape[1]

    @cached_property
    def cumulative(self) -> "CumulativeWeights":
        return CumulativeWeights.from_weights(self.weights)

    def permuted(self, perm: np.ndarray) -> "WeightedParticleSystem":
        """System reindexed as (states[perm], weights[perm])."""
        return WeightedParticleSystem(self.states[perm], self.weights[perm])

    def __repr__(self) -> str:
        return f"WeightedParticleSystem(n={self.n}, d={self.d})"


class CumulativeWeights:
    """Nondecreasing cumulative weight array with final entry exactly 1.

    The cumulative sums are accumulated in extended precision so that
    intermediate entries carry no visible rounding drift; the last entry is
    then clamped to exactly 1.0, which makes u = 1 always resolvable by
    :func:`inverse_cdf`.
    """

    __slots__ = ("values",)

    def __init__(self, values: np.ndarray):
        self.values = values

    @classmethod
    def from_weights(cls, weights) -> "CumulativeWeights":
        w = np.asarray(weights, dtype=np.float64)
        c = np.cumsum(w.astype(np.longdouble)).astype(np.float64)
        c[-1] = 1.0
        c.setflags(write=False)
        return cls(c)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def inverse(self, u):
        """Generalized inverse: smallest index n with cumsum[n] >= u.

        Accepts a scalar or an array of values in [0, 1]; binary search.
        """
        return np.searchsorted(self.values, u, side="left")


def inverse_cdf(cw: CumulativeWeights, u):
    """Smallest index ``n`` with ``cw.values[n] >= u`` (scalar or array u)."""
    return cw.inverse(u)


def counts_to_ancestors(counts) -> np.ndarray:
    """Expand offspring counts into ancestor indices, ascending blocks.

    ``(2, 0, 1) -> (0, 0, 2)``.  The assignment of counts to output slots
    is a free convention; ascending contiguous blocks keep results
    deterministic given the counts.
    """
    c = np.asarray(counts)
    if np.any(c < 0):
        raise CountMismatchError("counts must be nonnegative")
    return np.repeat(np.arange(c.shape[0], dtype=np.int64), c)


def ancestors_to_counts(ancestors, n: int) -> np.ndarray:
    """Multiplicity of each index 0..n-1 among the ancestors."""
    a = np.asarray(ancestors, dtype=np.int64)
    if a.size and (a.min() < 0 or a.max() >= n):
        raise IndexOutOfRangeError(f"ancestor index outside 0..{n - 1}")
    return np.bincount(a, minlength=n).astype(np.int64)


@dataclass(frozen=True)
class ResampleResult:
    """Ancestor indices with derived offspring counts and deviations.

    ``deviations[n] = counts[n] - N * W[n]``; counts always sum to N and
    deviations to 0 (up to 1e-9).
    """

    ancestors: np.ndarray
    counts: np.ndarray
    deviations: np.ndarray

    @classmethod
    def from_ancestors(cls, ancestors, system: WeightedParticleSystem) -> "ResampleResult":
        n = system.n
        a = np.asarray(ancestors, dtype=np.int64)
        if a.shape != (n,):
            raise CountMismatchError(f"expected {n} ancestors, got shape {a.shape}")
        counts = ancestors_to_counts(a, n)
        return cls(a, counts, counts - n * system.weights)

    @classmethod
    def from_counts(cls, counts, system: WeightedParticleSystem) -> "ResampleResult":
        n = system.n
        c = np.asarray(counts, dtype=np.int64)
        if int(c.sum()) != n:
            raise CountMismatchError(f"counts sum to {int(c.sum())}, expected {n}")
        return cls(counts_to_ancestors(c), c, c - n * system.weights)

    @property
    def n(self) -> int:
        return self.ancestors.shape[0]
