"""Statistical verification machinery for resampling schemes.

Provides replicated offspring-count experiments (vectorized per scheme),
moment and covariance reports, exact one-dimensional discrepancy metrics,
and log-log variance-rate fits.  Every operation takes an explicit seed
and is deterministic given its inputs; replicate r draws from the r-th
counter block of the experiment's substream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    ResamplabError,
    UniformStream,
    WeightedParticleSystem,
    normalize_weights,
)
from . import hilbert, resamplers

__all__ = [
    "OutOfUnitIntervalError",
    "MomentReport",
    "CovarianceReport",
    "RateFit",
    "PHI_FUNCTIONS",
    "random_system",
    "na_counterexample_system",
    "gaussian_likelihood_family",
    "replicate_counts",
    "replicate_estimates",
    "offspring_moments",
    "pairwise_count_cov",
    "star_discrepancy_1d",
    "kolmogorov_weighted",
    "empirical_measure",
    "variance_rate_fit",
]


class OutOfUnitIntervalError(ResamplabError, ValueError):
    pass


# Named test functions phi: (N, d) states -> (N,) values.
PHI_FUNCTIONS = {
    "x": lambda x: x[:, 0],
    "x2": lambda x: x[:, 0] ** 2,
    "sin": lambda x: np.sin(x[:, 0]),
    "tanh": lambda x: np.tanh(x[:, 0]),
    "l1-half": lambda x: 0.5 * np.abs(x).sum(axis=1),
}


def random_system(n: int, d: int, stream: UniformStream) -> WeightedParticleSystem:
    """Gaussian states with exponential (Dirichlet-like) random weights."""
    states = stream.normals((n, d))
    raw = -np.log(stream.uniforms(n))
    return WeightedParticleSystem(states, raw)


def na_counterexample_system() -> WeightedParticleSystem:
    """N = 4 system with N*W = (0.5, 0.5, 0.5, 2.5).

    Three entries have fractional part 1/2, which makes the offspring
    counts of systematic resampling positively correlated.
    """
    return WeightedParticleSystem(
        np.arange(4.0), np.array([0.5, 0.5, 0.5, 2.5]) / 4.0
    )


def gaussian_likelihood_family(d: int, seed: int, obs=None):
    """Family N -> system of N Gaussian draws weighted by a Gaussian likelihood.

    Mimics one particle-filter step: states are i.i.d. N(0, I_d) and the
    weight of a state x is proportional to exp(-||y - x||^2 / 2) for a
    fixed pseudo-observation y (default 0.5 on every axis).  Deterministic
    given (seed, N).
    """
    y = np.full(d, 0.5) if obs is None else np.asarray(obs, dtype=np.float64)

    def make(n: int) -> WeightedParticleSystem:
        stream = UniformStream(seed, (d, n))
        states = stream.normals((n, d))
        log_like = -0.5 * ((states - y) ** 2).sum(axis=1)
        return WeightedParticleSystem(states, np.exp(log_like - log_like.max()))

    return make


def _counts_from_ancestor_rows(anc: np.ndarray, n: int) -> np.ndarray:
    rows = anc.shape[0]
    flat = anc + n * np.arange(rows, dtype=np.int64)[:, None]
    return (
        np.bincount(flat.ravel(), minlength=rows * n)
        .reshape(rows, n)
        .astype(np.int64)
    )


def _ancestor_rows(tag: str, system: WeightedParticleSystem, n_reps: int,
                   stream: UniformStream, alpha: float | None) -> np.ndarray:
    """Vectorized ancestors for index-valued schemes, one replicate per row."""
    n = system.n
    cw = system.cumulative
    if tag == "multinomial":
        pos = stream.uniforms((n_reps, n))
    elif tag == "stratified":
        pos = (np.arange(n) + stream.uniforms((n_reps, n))) / n
    elif tag == "systematic":
        pos = (np.arange(n) + stream.uniforms((n_reps, 1))) / n
    elif tag == "deterministic-alpha":
        pos = np.tile((np.arange(n) + (0.5 if alpha is None else alpha)) / n, (n_reps, 1))
    else:
        raise ValueError(f"no ancestor fast path for {tag!r}")
    return cw.inverse(pos)


def replicate_counts(
    scheme,
    system: WeightedParticleSystem,
    n_reps: int,
    stream: UniformStream,
) -> np.ndarray:
    """(n_reps, N) offspring counts of a scheme on a fixed system.

    ``scheme`` is a scheme name (vectorized paths) or a callable
    ``(system, stream) -> ResampleResult`` (looped over per-replicate
    substreams).
    """
    n = system.n
    if callable(scheme):
        out = np.empty((n_reps, n), dtype=np.int64)
        for r in range(n_reps):
            out[r] = scheme(system, stream.substream(r)).counts
        return out
    sid = scheme if isinstance(scheme, resamplers.SchemeId) else resamplers.SchemeId.parse(scheme)
    tag = sid.tag
    if tag.startswith("ordered-"):
        perm = hilbert.hilbert_sort(system)
        base = {"ordered-stratified": "stratified",
                "ordered-systematic": "systematic",
                "ordered-alpha": "deterministic-alpha"}[tag]
        inner = replicate_counts(
            resamplers.SchemeId(base, sid.alpha), system.permuted(perm), n_reps, stream
        )
        out = np.empty_like(inner)
        out[:, perm] = inner
        return out
    if tag in ("multinomial", "stratified", "systematic", "deterministic-alpha"):
        return _counts_from_ancestor_rows(
            _ancestor_rows(tag, system, n_reps, stream, sid.alpha), n
        )
    if tag in ("residual-multinomial", "residual-stratified"):
        floor, frac = resamplers._snapped_floor_frac(n * system.weights)
        base = floor.astype(np.int64)
        r = n - int(base.sum())
        if r == 0:
            return np.tile(base, (n_reps, 1))
        from .core import CumulativeWeights

        res_cum = CumulativeWeights.from_weights(frac / frac.sum()).values
        u = stream.uniforms((n_reps, r))
        if tag == "residual-stratified":
            u = (np.arange(r) + u) / r
        extra = np.searchsorted(res_cum, u, side="left")
        return base[None, :] + _counts_from_ancestor_rows(extra, n)
    if tag == "ssp":
        floor, frac = resamplers._snapped_floor_frac(n * system.weights)
        base = floor.astype(np.int64)
        n_work = int(np.count_nonzero(frac))
        if n_work == 0:
            return np.tile(base, (n_reps, 1))
        budget = stream.uniforms((n_reps, n_work - 1))
        out = np.empty((n_reps, n), dtype=np.int64)
        for r in range(n_reps):
            out[r] = base + resamplers._ssp_pair_loop(frac, budget[r])
        return out
    raise ValueError(f"unsupported scheme {scheme!r}")


def replicate_estimates(
    scheme,
    system: WeightedParticleSystem,
    phi_vals: np.ndarray,
    n_reps: int,
    stream: UniformStream,
    chunk: int = 1 << 22,
) -> np.ndarray:
    """(n_reps,) values of the resampled measure applied to a test function.

    ``phi_vals[n]`` is the test function evaluated at state n; each
    replicate returns ``mean(phi_vals[ancestors])``.  Replicates are
    processed in row blocks of at most ``chunk`` uniforms to bound memory;
    blocking does not change the draws.
    """
    n = system.n
    phi_vals = np.asarray(phi_vals, dtype=np.float64)
    sid = scheme if isinstance(scheme, resamplers.SchemeId) or callable(scheme) \
        else resamplers.SchemeId.parse(scheme)
    if not callable(sid) and sid.tag.startswith("ordered-"):
        perm = hilbert.hilbert_sort(system)
        base = {"ordered-stratified": "stratified",
                "ordered-systematic": "systematic",
                "ordered-alpha": "deterministic-alpha"}[sid.tag]
        return replicate_estimates(
            resamplers.SchemeId(base, sid.alpha),
            system.permuted(perm), phi_vals[perm], n_reps, stream, chunk,
        )
    if not callable(sid) and sid.tag in ("multinomial", "stratified", "systematic",
                                         "deterministic-alpha"):
        out = np.empty(n_reps, dtype=np.float64)
        rows_per_block = max(chunk // n, 1)
        done = 0
        while done < n_reps:
            rows = min(rows_per_block, n_reps - done)
            anc = _ancestor_rows(sid.tag, system, rows, stream, sid.alpha)
            out[done:done + rows] = phi_vals[anc].mean(axis=1)
            done += rows
        return out
    counts = replicate_counts(sid, system, n_reps, stream)
    return counts @ phi_vals / n


@dataclass(frozen=True)
class MomentReport:
    """Per-index offspring-count moments over replicated resampling."""

    scheme: str
    n_reps: int
    expected: np.ndarray      # N * W
    mean_counts: np.ndarray
    var_counts: np.ndarray
    se_counts: np.ndarray     # sample std / sqrt(R)
    mean_dev: np.ndarray      # mean of counts - N*W
    max_abs_dev: float

    @property
    def max_unbiasedness_z(self) -> float:
        """max_n |mean - N*W| / SE (SE floored at machine level)."""
        se = np.maximum(self.se_counts, 1e-300)
        return float(np.max(np.abs(self.mean_dev) / se))


def offspring_moments(
    scheme, system: WeightedParticleSystem, n_reps: int, seed: int
) -> MomentReport:
    """Empirical count moments of a scheme over ``n_reps`` replicates."""
    if n_reps < 2:
        raise ValueError("need at least 2 replicates for standard errors")
    stream = UniformStream(seed, ())
    counts = replicate_counts(scheme, system, n_reps, stream)
    dev = counts - system.n * system.weights
    sd = counts.std(axis=0, ddof=1)
    return MomentReport(
        scheme=str(scheme),
        n_reps=n_reps,
        expected=system.n * system.weights,
        mean_counts=counts.mean(axis=0),
        var_counts=counts.var(axis=0, ddof=1),
        se_counts=sd / np.sqrt(n_reps),
        mean_dev=dev.mean(axis=0),
        max_abs_dev=float(np.abs(dev).max()),
    )


@dataclass(frozen=True)
class CovarianceReport:
    """Pairwise covariance estimates of offspring counts, with SEs."""

    scheme: str
    n_reps: int
    cov: np.ndarray   # (N, N), diagonal = variances
    se: np.ndarray    # (N, N) standard errors of each entry

    def max_positive_offdiag_z(self) -> float:
        """max over i != j of cov / se; <= 0 when nothing is positive."""
        n = self.cov.shape[0]
        mask = ~np.eye(n, dtype=bool)
        return float((self.cov[mask] / np.maximum(self.se[mask], 1e-300)).max())


def pairwise_count_cov(
    scheme, system: WeightedParticleSystem, n_reps: int, seed: int
) -> CovarianceReport:
    """Estimated covariance matrix of offspring counts over replicates."""
    if n_reps < 2:
        raise ValueError("need at least 2 replicates")
    stream = UniformStream(seed, ())
    counts = replicate_counts(scheme, system, n_reps, stream).astype(np.float64)
    centered = counts - counts.mean(axis=0)
    cov = centered.T @ centered / (n_reps - 1)
    m1 = centered.T @ centered / n_reps
    m2 = (centered**2).T @ (centered**2) / n_reps
    se = np.sqrt(np.maximum(m2 - m1**2, 0.0) / n_reps)
    return CovarianceReport(str(scheme), n_reps, cov, se)


def star_discrepancy_1d(points) -> float:
    """Exact star discrepancy of a point set in [0, 1].

    Sorted-points formula: ``max_i max(i/N - u_(i), u_(i) - (i-1)/N)``.
    """
    u = np.sort(np.asarray(points, dtype=np.float64))
    if u.size == 0:
        raise ValueError("need at least one point")
    if u[0] < 0.0 or u[-1] > 1.0:
        raise OutOfUnitIntervalError("points must lie in [0, 1]")
    n = u.size
    i = np.arange(1, n + 1)
    return float(np.maximum(i / n - u, u - (i - 1) / n).max())


def empirical_measure(system_or_states, weights=None):
    """(locations, weights) pair for :func:`kolmogorov_weighted` (d = 1)."""
    if weights is None:
        system = system_or_states
        return system.states[:, 0], system.weights
    return np.asarray(system_or_states, dtype=np.float64), np.asarray(weights)


def kolmogorov_weighted(xp, wp, xq, wq) -> float:
    """Kolmogorov distance between two finite weighted atomic measures on R.

    Exact sup-norm of the CDF difference, evaluated by sweeping the merged
    sorted support.  Both weight vectors must describe probability
    measures (they are validated and normalized).
    """
    xp = np.asarray(xp, dtype=np.float64)
    xq = np.asarray(xq, dtype=np.float64)
    wp = normalize_weights(wp)
    wq = normalize_weights(wq)
    grid = np.union1d(xp, xq)

    def cdf_at(x, w):
        order = np.argsort(x, kind="stable")
        cum = np.cumsum(w[order])
        idx = np.searchsorted(x[order], grid, side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    return float(np.abs(cdf_at(xp, wp) - cdf_at(xq, wq)).max())


@dataclass(frozen=True)
class RateFit:
    """Least-squares slope of log-variance against log-N."""

    scheme: str
    phi: str
    n_values: np.ndarray
    variances: np.ndarray
    slope: float
    intercept: float
    slope_se: float
    excluded: tuple = field(default=())  # N values with zero variance estimate

    def __str__(self) -> str:
        return (
            f"RateFit({self.scheme}, phi={self.phi}): slope={self.slope:.3f} "
            f"+/- {self.slope_se:.3f} over N={list(self.n_values)}"
        )


def fit_loglog(n_values, variances) -> tuple[float, float, float]:
    """OLS slope/intercept/slope-SE of log(var) vs log(N)."""
    x = np.log(np.asarray(n_values, dtype=np.float64))
    y = np.log(np.asarray(variances, dtype=np.float64))
    xc = x - x.mean()
    slope = float(xc @ y / (xc @ xc))
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    dof = max(x.size - 2, 1)
    slope_se = float(np.sqrt(resid @ resid / dof / (xc @ xc)))
    return slope, intercept, slope_se


def variance_rate_fit(
    scheme,
    system_family,
    phi,
    n_grid,
    n_reps: int,
    seed: int,
    phi_name: str = "phi",
) -> RateFit:
    """Slope of the resampling variance of ``phi`` against N, on a log-log grid.

    For each N the system is fixed (drawn once by ``system_family``) and
    the variance is over the resampling randomness only.  Zero-variance
    estimates are reported in ``excluded`` and dropped from the fit.
    """
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 4:
        raise ValueError("need at least 4 grid points")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("N grid must be strictly increasing")
    phi_fn = PHI_FUNCTIONS[phi] if isinstance(phi, str) else phi
    variances, kept, excluded = [], [], []
    for idx, n in enumerate(n_grid):
        system = system_family(n)
        est = replicate_estimates(
            scheme, system, phi_fn(system.states), n_reps,
            UniformStream(seed, (idx,)),
        )
        v = float(est.var(ddof=1))
        if v <= 0.0:
            excluded.append(n)
        else:
            kept.append(n)
            variances.append(v)
    if len(kept) < 2:
        raise ResamplabError(
            f"degenerate variance at {len(excluded)} grid points; cannot fit"
        )
    slope, intercept, slope_se = fit_loglog(kept, variances)
    return RateFit(
        scheme=str(scheme),
        phi=phi_name if not isinstance(phi, str) else phi,
        n_values=np.asarray(kept),
        variances=np.asarray(variances),
        slope=slope,
        intercept=intercept,
        slope_se=slope_se,
        excluded=tuple(excluded),
    )
