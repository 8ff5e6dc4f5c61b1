"""Resampling schemes as pure functions (system, stream) -> ResampleResult.

Uniform consumption per call is fixed and documented so that experiments
can share streams across schemes:

===================== =======================================
multinomial           N
stratified            N
systematic            1
residual (either)     R (the stochastic remainder; 0 draws if R == 0)
ssp                   max(F - 1, 0) where F = #non-integer entries of N*W
deterministic_alpha   0
===================== =======================================
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CumulativeWeights,
    ResamplabError,
    ResampleResult,
    UniformStream,
    WeightedParticleSystem,
)

__all__ = [
    "SchemeId",
    "NonIntegerTotalError",
    "AlphaOutOfRangeError",
    "multinomial",
    "stratified",
    "systematic",
    "residual",
    "ssp_round",
    "ssp_resample",
    "deterministic_alpha",
    "BASE_SCHEMES",
    "make_resampler",
]

# Snap rule: a real is treated as an integer when within this tolerance of
# one; fractional parts below it are dropped.  Declared once and shared by
# ssp_round and the residual floor so both round identically.
INTEGER_SNAP_TOL = 1e-9


class NonIntegerTotalError(ResamplabError, ValueError):
    pass


class AlphaOutOfRangeError(ResamplabError, ValueError):
    pass


def _snapped_floor_frac(xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Floor and fractional part of xi with the integer snap rule applied."""
    floor = np.floor(xi)
    frac = xi - floor
    hi = frac >= 1.0 - INTEGER_SNAP_TOL
    floor = np.where(hi, floor + 1.0, floor)
    frac = np.where(hi | (frac <= INTEGER_SNAP_TOL), 0.0, frac)
    return floor, frac


def multinomial(system: WeightedParticleSystem, stream: UniformStream) -> ResampleResult:
    """Ancestors drawn i.i.d. from the weights, one fresh uniform each."""
    u = stream.uniforms(system.n)
    return ResampleResult.from_ancestors(system.cumulative.inverse(u), system)


def stratified(system: WeightedParticleSystem, stream: UniformStream) -> ResampleResult:
    """One uniform per stratum ((n-1)/N, n/N) pushed through the inverse CDF."""
    n = system.n
    u = stream.uniforms(n)
    pos = (np.arange(n) + u) / n
    return ResampleResult.from_ancestors(system.cumulative.inverse(pos), system)


def systematic(system: WeightedParticleSystem, stream: UniformStream) -> ResampleResult:
    """A single shared uniform across all strata; consumes exactly one draw."""
    n = system.n
    u = stream.uniform()
    pos = (np.arange(n) + u) / n
    return ResampleResult.from_ancestors(system.cumulative.inverse(pos), system)


def residual(
    system: WeightedParticleSystem,
    stream: UniformStream,
    inner: str = "multinomial",
) -> ResampleResult:
    """floor(N*W) copies deterministically, remainder by an inner scheme.

    ``inner`` is ``"multinomial"`` or ``"stratified"``; the inner scheme
    draws the remainder R from the residual weights N*W - floor(N*W).
    When R == 0 the stream is untouched.
    """
    if inner not in ("multinomial", "stratified"):
        raise ValueError(f"unsupported inner scheme {inner!r}")
    n = system.n
    floor, frac = _snapped_floor_frac(n * system.weights)
    base = floor.astype(np.int64)
    r = n - int(base.sum())
    if r == 0:
        return ResampleResult.from_counts(base, system)
    res_cum = CumulativeWeights.from_weights(frac / frac.sum()).values
    u = stream.uniforms(r)
    if inner == "stratified":
        u = (np.arange(r) + u) / r
    extra = np.searchsorted(res_cum, u, side="left")
    counts = base + np.bincount(extra, minlength=n)
    return ResampleResult.from_counts(counts, system)


def _ssp_pair_loop(frac: np.ndarray, budget: np.ndarray) -> np.ndarray:
    """Pivotal pairing loop on fractional parts; returns +1/0 per entry.

    ``frac`` holds values in (0, 1) at the working indices and exactly 0.0
    elsewhere; ``budget`` supplies the uniforms consumed in order.  Entries
    already integral never enter a pair, which keeps every output within
    one unit of its input.
    """
    n = frac.shape[0]
    up = np.zeros(n, dtype=np.int64)
    work = np.flatnonzero(frac > 0.0)
    if work.size < 2:
        return up
    f = frac.copy()
    k = 0
    i = work[0]
    pos = 1
    while pos < work.size:
        j = work[pos]
        delta = min(1.0 - f[i], f[j])
        eps = min(f[i], 1.0 - f[j])
        if budget[k] <= eps / (delta + eps):
            f[i] += delta
            f[j] -= delta
        else:
            f[i] -= eps
            f[j] += eps
        k += 1
        i_done = f[i] <= INTEGER_SNAP_TOL or f[i] >= 1.0 - INTEGER_SNAP_TOL
        j_done = f[j] <= INTEGER_SNAP_TOL or f[j] >= 1.0 - INTEGER_SNAP_TOL
        if i_done:
            if f[i] >= 0.5:
                up[i] = 1
            i = j
        if j_done:
            if f[j] >= 0.5:
                up[j] = 1
            if i == j:  # both resolved: next working index becomes the carrier
                pos += 1
                if pos >= work.size:
                    break
                i = work[pos]
        pos += 1
    return up


def ssp_round(xi, stream: UniformStream) -> np.ndarray:
    """Srinivasan randomized rounding of a nonnegative vector with integer sum.

    Returns Y with sum(Y) == sum(xi) exactly, Y[n] in {floor(xi[n]),
    floor(xi[n]) + 1}, and P(Y[n] = floor + 1) equal to the fractional part
    of xi[n].  Consumes max(F - 1, 0) uniforms, F = #non-integral entries.
    """
    x = np.asarray(xi, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("entries must be nonnegative")
    total = float(x.sum())
    if abs(total - round(total)) > INTEGER_SNAP_TOL:
        raise NonIntegerTotalError(f"sum {total!r} is not an integer")
    floor, frac = _snapped_floor_frac(x)
    n_work = int(np.count_nonzero(frac))
    if n_work >= 2:
        budget = stream.uniforms(n_work - 1)
        out = floor.astype(np.int64) + _ssp_pair_loop(frac, budget)
    else:
        out = floor.astype(np.int64)
    return _repair_total(out, x, round(total))


def _repair_total(out: np.ndarray, xi: np.ndarray, target: int) -> np.ndarray:
    """Restore exact conservation after tolerance-boundary snapping.

    Snapping fractional parts independently can leave the committed sum off
    by one when an entry sits exactly at the snap threshold; the unit is
    then moved at the entry whose unsnapped fractional part most favors the
    move, which stays within one unit of the input.
    """
    deficit = target - int(out.sum())
    if deficit == 0:
        return out
    floor_raw = np.floor(xi)
    frac_raw = xi - floor_raw
    for _ in range(abs(deficit)):
        if deficit > 0:
            ok = (out == floor_raw) & (frac_raw > 0.0)
            if not ok.any():
                raise ResamplabError("cannot conserve the rounding total")
            out[np.argmax(np.where(ok, frac_raw, -1.0))] += 1
        else:
            ok = (out == floor_raw + 1.0) & (frac_raw < 1.0)
            if not ok.any():
                raise ResamplabError("cannot conserve the rounding total")
            out[np.argmin(np.where(ok, frac_raw, 2.0))] -= 1
    return out


def ssp_resample(system: WeightedParticleSystem, stream: UniformStream) -> ResampleResult:
    """SSP resampling: randomized rounding of N*W into offspring counts."""
    counts = ssp_round(system.n * system.weights, stream)
    return ResampleResult.from_counts(counts, system)


def deterministic_alpha(system: WeightedParticleSystem, alpha: float) -> ResampleResult:
    """Stratified positions with the constant alpha in place of uniforms.

    The caller is responsible for passing an already-ordered system (see
    ``hilbert.ordered_resample``); the scheme itself consumes no
    randomness.
    """
    if not 0.0 < alpha < 1.0:
        raise AlphaOutOfRangeError(f"alpha must be in (0, 1), got {alpha}")
    n = system.n
    pos = (np.arange(n) + alpha) / n
    return ResampleResult.from_ancestors(system.cumulative.inverse(pos), system)


@dataclass(frozen=True)
class SchemeId:
    """Parsed scheme identifier, e.g. ``ssp`` or ``deterministic-alpha:0.4``."""

    tag: str
    alpha: float | None = None

    KNOWN = (
        "multinomial",
        "stratified",
        "systematic",
        "residual-multinomial",
        "residual-stratified",
        "ssp",
        "deterministic-alpha",
        "ordered-stratified",
        "ordered-systematic",
        "ordered-alpha",
    )

    @classmethod
    def parse(cls, text: str) -> "SchemeId":
        tag, _, arg = text.partition(":")
        if tag not in cls.KNOWN:
            raise ValueError(f"unknown scheme {text!r}; known: {', '.join(cls.KNOWN)}")
        if tag in ("deterministic-alpha", "ordered-alpha"):
            alpha = float(arg) if arg else 0.5
            if not 0.0 < alpha < 1.0:
                raise AlphaOutOfRangeError(f"alpha must be in (0, 1), got {alpha}")
            return cls(tag, alpha)
        if arg:
            raise ValueError(f"scheme {tag!r} takes no argument")
        return cls(tag)

    def __str__(self) -> str:
        if self.alpha is not None:
            return f"{self.tag}:{self.alpha:g}"
        return self.tag


BASE_SCHEMES = {
    "multinomial": multinomial,
    "stratified": stratified,
    "systematic": systematic,
    "residual-multinomial": lambda s, u: residual(s, u, "multinomial"),
    "residual-stratified": lambda s, u: residual(s, u, "stratified"),
    "ssp": ssp_resample,
}


def make_resampler(scheme, *, psi=None, codec=None):
    """Resolve a scheme name/SchemeId into a callable (system, stream) -> result.

    Ordered variants are delegated to :mod:`resamplab.hilbert`; ``psi`` and
    ``codec`` override the default cubifying map and codec used there.
    """
    if callable(scheme):
        return scheme
    sid = scheme if isinstance(scheme, SchemeId) else SchemeId.parse(str(scheme))
    if sid.tag in BASE_SCHEMES:
        return BASE_SCHEMES[sid.tag]
    if sid.tag == "deterministic-alpha":
        return lambda s, u: deterministic_alpha(s, sid.alpha)
    from . import hilbert  # deferred: hilbert imports this module's schemes

    base = {"ordered-stratified": "stratified", "ordered-systematic": "systematic",
            "ordered-alpha": "deterministic-alpha"}[sid.tag]
    return lambda s, u: hilbert.ordered_resample(
        s, base, u, psi=psi, codec=codec, alpha=sid.alpha
    )
