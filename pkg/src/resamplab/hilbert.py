"""Fixed-precision Hilbert curve codec, cubifying maps, and ordered resampling.

The codec realizes the curve on the dyadic grid of side ``2**-m`` per axis
using the reflected-Gray-code construction (Skilling's transpose
transform), vectorized over points.  Key 0 maps to the cell at the origin;
in one dimension the curve is the identity.  Grid cells are half-open, so
a point exactly on a cell boundary keys to the cell whose lower corner it
is.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ResamplabError, ResampleResult, UniformStream, WeightedParticleSystem
from . import resamplers

__all__ = [
    "KeyOutOfRangeError",
    "CoordinateOutOfRangeError",
    "DomainViolationError",
    "HilbertCodec",
    "CubifyingMap",
    "psi_tilde",
    "psi_tilde_inv",
    "hilbert_encode",
    "hilbert_decode",
    "hilbert_sort",
    "ordered_resample",
]


class KeyOutOfRangeError(ResamplabError, ValueError):
    pass


class CoordinateOutOfRangeError(ResamplabError, ValueError):
    pass


class DomainViolationError(ResamplabError, ValueError):
    pass


def _lattice_to_keys(coords: np.ndarray, m: int, d: int) -> np.ndarray:
    """Skilling axes-to-transpose, then bit interleave into a single key."""
    x = [coords[:, i].astype(np.int64).copy() for i in range(d)]
    q = 1 << (m - 1)
    while q > 1:
        p = q - 1
        for i in range(d):
            hi = (x[i] & q) != 0
            x[0] = np.where(hi, x[0] ^ p, x[0])
            t = np.where(hi, 0, (x[0] ^ x[i]) & p)
            x[0] ^= t
            x[i] ^= t
        q >>= 1
    for i in range(1, d):
        x[i] ^= x[i - 1]
    t = np.zeros_like(x[0])
    q = 1 << (m - 1)
    while q > 1:
        t = np.where((x[d - 1] & q) != 0, t ^ (q - 1), t)
        q >>= 1
    for i in range(d):
        x[i] ^= t
    keys = np.zeros_like(x[0])
    for level in range(m):
        for i in range(d):
            keys |= ((x[i] >> level) & 1) << (level * d + (d - 1 - i))
    return keys


def _keys_to_lattice(keys: np.ndarray, m: int, d: int) -> np.ndarray:
    """Bit de-interleave, then Skilling transpose-to-axes."""
    x = [np.zeros_like(keys) for _ in range(d)]
    for level in range(m):
        for i in range(d):
            x[i] |= ((keys >> (level * d + (d - 1 - i))) & 1) << level
    top = 2 << (m - 1)
    t = x[d - 1] >> 1
    for i in range(d - 1, 0, -1):
        x[i] ^= x[i - 1]
    x[0] ^= t
    q = 2
    while q != top:
        p = q - 1
        for i in range(d - 1, -1, -1):
            hi = (x[i] & q) != 0
            x[0] = np.where(hi, x[0] ^ p, x[0])
            t = np.where(hi, 0, (x[0] ^ x[i]) & p)
            x[0] ^= t
            x[i] ^= t
        q <<= 1
    return np.stack(x, axis=1)


@dataclass(frozen=True)
class HilbertCodec:
    """Encoder/decoder pair between unit-cube points and curve keys.

    ``m`` levels per axis over ``d`` dimensions; keys live in
    ``0 .. 2**(m*d) - 1`` and fit a signed 64-bit integer (``m*d <= 62``).
    """

    d: int
    m: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.m < 1 or self.m * self.d > 62:
            raise ValueError(f"need 1 <= m and m*d <= 62, got m={self.m}, d={self.d}")

    @classmethod
    def for_dim(cls, d: int) -> "HilbertCodec":
        """Default precision: as many levels as fit one 64-bit key."""
        return cls(d, 62 // d)

    @property
    def n_keys(self) -> int:
        return 1 << (self.m * self.d)

    def encode_lattice(self, coords) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64)
        if self.d == 1:
            return coords[:, 0].copy()
        return _lattice_to_keys(coords, self.m, self.d)

    def decode_lattice(self, keys) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64)
        if self.d == 1:
            return keys[:, None].copy()
        return _keys_to_lattice(keys, self.m, self.d)


def hilbert_encode(x, codec: HilbertCodec) -> np.ndarray:
    """Key of the grid cell containing each point of ``[0, 1)^d``.

    ``x`` has shape (N, d) (or (d,) for a single point, returning a scalar
    array of shape ()).  Points sharing a cell share a key.
    """
    pts = np.asarray(x, dtype=np.float64)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    if pts.shape[1] != codec.d:
        raise CoordinateOutOfRangeError(f"expected {codec.d} coordinates")
    if np.any(pts < 0.0) or np.any(pts >= 1.0):
        raise CoordinateOutOfRangeError("coordinates must lie in [0, 1)")
    side = 1 << codec.m
    lattice = np.minimum((pts * side).astype(np.int64), side - 1)
    keys = codec.encode_lattice(lattice)
    return keys[0] if single else keys


def hilbert_decode(keys, codec: HilbertCodec) -> np.ndarray:
    """Lower corner of the cell visited at position ``key`` along the curve."""
    k = np.asarray(keys, dtype=np.int64)
    single = k.ndim == 0
    if single:
        k = k[None]
    if np.any(k < 0) or np.any(k >= codec.n_keys):
        raise KeyOutOfRangeError(f"keys must lie in 0..{codec.n_keys - 1}")
    pts = codec.decode_lattice(k) * 2.0 ** -codec.m
    return pts[0] if single else pts


def psi_tilde(x) -> np.ndarray:
    """Increasing bijection from R onto (0, 1), fixed point 1/2 at 0.

    Evaluated as ``1/2 + x / (2 * (sqrt(4 + x^2) + 2))``, an algebraically
    equivalent form of ``1/2 + (sqrt(4 + x^2) - 2) / (2x)`` that is stable
    near 0.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DomainViolationError("input must be finite")
    return 0.5 + x / (2.0 * (np.sqrt(4.0 + x * x) + 2.0))


def psi_tilde_inv(y) -> np.ndarray:
    """Closed-form inverse of :func:`psi_tilde` on (0, 1)."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0.0) or np.any(y >= 1.0):
        raise DomainViolationError("input must lie in (0, 1)")
    s = y - 0.5
    return 8.0 * s / (1.0 - 4.0 * s * s)


@dataclass(frozen=True)
class CubifyingMap:
    """Per-axis strictly increasing bijections onto (0, 1).

    ``forward`` maps an (N, d) state array into ``(0, 1)^d``; ``inverse``
    undoes it.  Use :meth:`real_line` for states in R^d and :meth:`box` for
    bounded product domains.
    """

    forward: callable
    inverse: callable
    label: str = field(default="custom")

    @classmethod
    def real_line(cls) -> "CubifyingMap":
        return cls(psi_tilde, psi_tilde_inv, "real-line")

    @classmethod
    def box(cls, lo, hi) -> "CubifyingMap":
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        if np.any(hi <= lo):
            raise ValueError("box must satisfy lo < hi on every axis")
        span = hi - lo

        def fwd(x):
            x = np.asarray(x, dtype=np.float64)
            if np.any(x <= lo) or np.any(x >= hi):
                raise DomainViolationError("state outside the open box")
            return (x - lo) / span

        def inv(y):
            return lo + np.asarray(y, dtype=np.float64) * span

        return cls(fwd, inv, "box")

    def __call__(self, x):
        return self.forward(x)


def hilbert_sort(
    system: WeightedParticleSystem,
    psi: CubifyingMap | None = None,
    codec: HilbertCodec | None = None,
) -> np.ndarray:
    """Permutation ordering the particles along the Hilbert curve.

    Sorts by ``hilbert_encode(psi(states))`` with a stable tie-break on the
    original index; for d = 1 this reduces to sorting by state, and the
    map/codec are not consulted.
    """
    if system.d == 1:
        return np.argsort(system.states[:, 0], kind="stable")
    psi = psi or CubifyingMap.real_line()
    codec = codec or HilbertCodec.for_dim(system.d)
    mapped = np.asarray(psi(system.states), dtype=np.float64)
    if mapped.shape != system.states.shape:
        raise DomainViolationError("cubifying map must preserve the (N, d) shape")
    if np.any(mapped <= 0.0) or np.any(mapped >= 1.0) or not np.all(np.isfinite(mapped)):
        raise DomainViolationError("cubifying map must send states into (0, 1)^d")
    keys = hilbert_encode(mapped, codec)
    return np.argsort(keys, kind="stable")


def ordered_resample(
    system: WeightedParticleSystem,
    scheme: str,
    stream: UniformStream | None,
    *,
    psi: CubifyingMap | None = None,
    codec: HilbertCodec | None = None,
    alpha: float | None = None,
) -> ResampleResult:
    """Hilbert-sort the system, run a base scheme, map ancestors back.

    ``scheme`` is one of ``stratified``, ``systematic`` or
    ``deterministic-alpha``.  The result is expressed in the original
    indexing, so it is distributionally identical to the base scheme
    applied to the sorted system.
    """
    perm = hilbert_sort(system, psi, codec)
    sorted_system = system.permuted(perm)
    if scheme == "stratified":
        inner = resamplers.stratified(sorted_system, stream)
    elif scheme == "systematic":
        inner = resamplers.systematic(sorted_system, stream)
    elif scheme == "deterministic-alpha":
        inner = resamplers.deterministic_alpha(sorted_system, 0.5 if alpha is None else alpha)
    else:
        raise ValueError(f"unsupported ordered scheme {scheme!r}")
    return ResampleResult.from_ancestors(perm[inner.ancestors], system)
