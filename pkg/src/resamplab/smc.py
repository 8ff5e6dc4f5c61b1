"""Particle filtering on Feynman-Kac models, with an exact Kalman oracle.

The filter resamples at every step.  Weights are carried as unnormalized
log-weights; per-step normalizing increments are computed with
max-subtracted log-sum-exp so long horizons cannot underflow.  The
resampling substream at step t is keyed by t only, so different schemes
run against common random numbers; propagation uses a second t-keyed
substream shared the same way.

Time convention: the state starts at t = 0 from the initial law, and
observations arrive at t = 1..T.  The time-0 potential of the supplied
linear-Gaussian models is identically 1, so ``log L_T`` estimates
``log p(y_{1:T})``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    AllZeroWeightsError,
    ResamplabError,
    UniformStream,
    WeightedParticleSystem,
)
from .resamplers import make_resampler

__all__ = [
    "NonPosDefCovarianceError",
    "ZeroAuxiliaryWeightError",
    "FeynmanKacModel",
    "LgssmParams",
    "FilterOutput",
    "KalmanResult",
    "simulate_lgssm",
    "kalman_loglik",
    "make_bootstrap_fk",
    "make_guided_fk",
    "perfectly_adapted_aux",
    "particle_filter",
    "auxiliary_particle_filter",
    "save_observations_csv",
    "load_observations_csv",
]


class NonPosDefCovarianceError(ResamplabError, ValueError):
    pass


class ZeroAuxiliaryWeightError(ResamplabError, ValueError):
    pass


@dataclass(frozen=True)
class FeynmanKacModel:
    """Initial law, transitions and potentials defining a filter.

    ``init(stream, n)`` samples n initial states; ``transition(t, xprev,
    stream)`` moves them at step t >= 1; ``log_g0(x0)`` and ``log_g(t,
    xprev, x)`` are log-potentials.  ``log_aux``, when present, is the log
    of the auxiliary twisting function, indexed so that step t twists the
    resampling of the time t-1 particles with ``log_aux(t - 1, x_{t-1})``.
    """

    d: int
    horizon: int
    init: callable
    transition: callable
    log_g0: callable
    log_g: callable
    log_aux: callable | None = None


@dataclass(frozen=True)
class LgssmParams:
    """Linear-Gaussian state-space model X_t = F X_{t-1} + V_t, Y_t = X_t + W_t.

    ``F[i, j] = alpha ** (|i - j| + 1)``; state, observation and initial
    covariances are all identity.  The spectral radius of F is validated
    to be < 1.
    """

    d: int
    horizon: int
    alpha: float
    transition_matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.d < 1 or self.horizon < 0:
            raise ValueError("need d >= 1 and horizon >= 0")
        idx = np.arange(self.d)
        f = self.alpha ** (np.abs(idx[:, None] - idx[None, :]) + 1.0)
        rho = float(np.abs(np.linalg.eigvals(f)).max())
        if rho >= 1.0:
            raise ValueError(f"transition matrix has spectral radius {rho:.3f} >= 1")
        f.setflags(write=False)
        object.__setattr__(self, "transition_matrix", f)

    def to_dict(self) -> dict:
        return {"d": self.d, "horizon": self.horizon, "alpha": self.alpha}

    @classmethod
    def from_dict(cls, data: dict) -> "LgssmParams":
        return cls(int(data["d"]), int(data["horizon"]), float(data["alpha"]))


def simulate_lgssm(params: LgssmParams, stream: UniformStream):
    """Forward-simulate states x_{0:T} and observations y_{1:T}."""
    d, t_max, f = params.d, params.horizon, params.transition_matrix
    states = np.empty((t_max + 1, d))
    obs = np.empty((t_max, d))
    states[0] = stream.normals(d)
    for t in range(1, t_max + 1):
        states[t] = f @ states[t - 1] + stream.normals(d)
        obs[t - 1] = states[t] + stream.normals(d)
    return states, obs


@dataclass(frozen=True)
class KalmanResult:
    log_lik: float
    step_log_lik: np.ndarray      # (T,) predictive log-densities
    filter_means: np.ndarray      # (T, d)
    filter_covs: np.ndarray       # (T, d, d)

    def log_lik_upto(self, t: int) -> float:
        """log p(y_{1:t})."""
        return float(self.step_log_lik[:t].sum())


def kalman_loglik(params: LgssmParams, obs) -> KalmanResult:
    """Exact log p(y_{1:T}) and filtering moments for the LGSSM.

    Standard predict/update recursion with H = I, Q = R = I; covariances
    are re-symmetrized each step.
    """
    y = np.asarray(obs, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    d, f = params.d, params.transition_matrix
    if y.shape[1] != d:
        raise ValueError(f"observations must have {d} columns")
    t_max = y.shape[0]
    eye = np.eye(d)
    mean = np.zeros(d)
    cov = eye.copy()
    step_ll = np.empty(t_max)
    means = np.empty((t_max, d))
    covs = np.empty((t_max, d, d))
    for t in range(t_max):
        mean = f @ mean
        cov = f @ cov @ f.T + eye
        cov = 0.5 * (cov + cov.T)
        innov_cov = cov + eye
        sign, logdet = np.linalg.slogdet(innov_cov)
        if sign <= 0:
            raise NonPosDefCovarianceError(f"innovation covariance at step {t + 1}")
        resid = y[t] - mean
        solved = np.linalg.solve(innov_cov, resid)
        step_ll[t] = -0.5 * (d * np.log(2.0 * np.pi) + logdet + resid @ solved)
        gain = np.linalg.solve(innov_cov, cov).T
        mean = mean + gain @ resid
        cov = (eye - gain) @ cov
        cov = 0.5 * (cov + cov.T)
        means[t] = mean
        covs[t] = cov
    return KalmanResult(float(step_ll.sum()), step_ll, means, covs)


def make_bootstrap_fk(params: LgssmParams, obs) -> FeynmanKacModel:
    """Bootstrap formalism: propose from the model transition, weight by
    the observation density."""
    y = np.asarray(obs, dtype=np.float64)
    d, f = params.d, params.transition_matrix
    const = -0.5 * d * np.log(2.0 * np.pi)

    def init(stream, n):
        return stream.normals((n, d))

    def transition(t, xprev, stream):
        return xprev @ f.T + stream.normals(xprev.shape)

    def log_g(t, xprev, x):
        return const - 0.5 * ((y[t - 1] - x) ** 2).sum(axis=1)

    return FeynmanKacModel(
        d=d,
        horizon=y.shape[0],
        init=init,
        transition=transition,
        log_g0=lambda x0: np.zeros(x0.shape[0]),
        log_g=log_g,
    )


def make_guided_fk(params: LgssmParams, obs) -> FeynmanKacModel:
    """Guided formalism: propose from N((y_t + F x)/2, I/2), weight by the
    predictive density N(y_t; F x, 2 I), which depends on x_{t-1} only."""
    y = np.asarray(obs, dtype=np.float64)
    d, f = params.d, params.transition_matrix
    const = -0.5 * d * np.log(4.0 * np.pi)

    def init(stream, n):
        return stream.normals((n, d))

    def transition(t, xprev, stream):
        mean = 0.5 * (y[t - 1] + xprev @ f.T)
        return mean + np.sqrt(0.5) * stream.normals(xprev.shape)

    def log_g(t, xprev, x):
        return const - 0.25 * ((y[t - 1] - xprev @ f.T) ** 2).sum(axis=1)

    return FeynmanKacModel(
        d=d,
        horizon=y.shape[0],
        init=init,
        transition=transition,
        log_g0=lambda x0: np.zeros(x0.shape[0]),
        log_g=log_g,
    )


def perfectly_adapted_aux(params: LgssmParams, obs):
    """Auxiliary function eta_t(x) = integral of G_{t+1} under the guided
    proposal, which for the guided model equals its own next-step potential.

    Twisting the guided filter with this function makes every per-step
    weight constant across particles.
    """
    y = np.asarray(obs, dtype=np.float64)
    d, f = params.d, params.transition_matrix
    const = -0.5 * d * np.log(4.0 * np.pi)

    def log_aux(t, x):
        if t + 1 > y.shape[0]:
            return np.zeros(x.shape[0])
        return const - 0.25 * ((y[t] - x @ f.T) ** 2).sum(axis=1)

    return log_aux


@dataclass(frozen=True)
class FilterOutput:
    """Per-step filter summaries.

    ``log_increments[t]`` is log of the step-t normalizing estimate, so
    ``log_norm[t]`` (its cumulative sum) estimates log L_t.
    """

    scheme: str
    n_particles: int
    log_increments: np.ndarray          # (T + 1,)
    log_norm: np.ndarray                # (T + 1,) cumulative
    ess: np.ndarray                     # (T + 1,)
    means: dict                         # phi name -> (T + 1,) weighted means

    @property
    def log_norm_final(self) -> float:
        return float(self.log_norm[-1])


def _normalized_from_log(logw: np.ndarray, step: int) -> tuple[np.ndarray, float]:
    """(normalized weights, log mean weight) with max subtraction."""
    top = logw.max()
    if not np.isfinite(top):
        raise AllZeroWeightsError(f"all particle weights vanished at step {step}")
    shifted = np.exp(logw - top)
    total = shifted.sum()
    return shifted / total, float(top + np.log(total) - np.log(logw.size))


def _run_filter(fk, n_particles, scheme, stream, phis, twisted, twist_final):
    resampler = make_resampler(scheme)
    scheme_label = str(scheme) if not callable(scheme) else getattr(scheme, "__name__", "custom")
    phis = phis or {}
    t_max = fk.horizon
    log_inc = np.empty(t_max + 1)
    ess = np.empty(t_max + 1)
    means = {name: np.empty(t_max + 1) for name in phis}

    x = fk.init(stream.substream(0, 1), n_particles)
    logw = np.asarray(fk.log_g0(x), dtype=np.float64)
    weights, log_inc[0] = _normalized_from_log(logw, 0)
    for name, phi in phis.items():
        means[name][0] = weights @ phi(x)
    ess[0] = 1.0 / (weights**2).sum()

    for t in range(1, t_max + 1):
        if twisted and (twist_final or t < t_max):
            log_eta = np.asarray(fk.log_aux(t - 1, x), dtype=np.float64)
            if np.any(np.isneginf(log_eta) & (weights > 0.0)):
                raise ZeroAuxiliaryWeightError(
                    f"auxiliary function vanishes on a weighted particle at step {t}"
                )
            logw_twist = logw + log_eta
            tw_weights, _ = _normalized_from_log(logw_twist, t)
            # log correction W/W~ of each ancestor, grouped so identical
            # terms cancel exactly when log_eta == 0
            log_z, log_z_t = _log_total(logw), _log_total(logw_twist)
            log_corr = (logw - logw_twist) + (log_z_t - log_z)
        else:
            tw_weights = weights
            log_corr = None

        ancestors = resampler(
            WeightedParticleSystem(x, tw_weights), stream.substream(t, 0)
        ).ancestors
        x_prev = x[ancestors]
        x = fk.transition(t, x_prev, stream.substream(t, 1))
        logw = np.asarray(fk.log_g(t, x_prev, x), dtype=np.float64)
        if log_corr is not None:
            logw = logw + log_corr[ancestors]
        weights, log_inc[t] = _normalized_from_log(logw, t)
        for name, phi in phis.items():
            means[name][t] = weights @ phi(x)
        ess[t] = 1.0 / (weights**2).sum()

    return FilterOutput(
        scheme=scheme_label,
        n_particles=n_particles,
        log_increments=log_inc,
        log_norm=np.cumsum(log_inc),
        ess=ess,
        means=means,
    )


def _log_total(logw: np.ndarray) -> float:
    top = logw.max()
    return float(top + np.log(np.exp(logw - top).sum()))


def particle_filter(
    fk: FeynmanKacModel,
    n_particles: int,
    scheme,
    stream: UniformStream,
    phis: dict | None = None,
) -> FilterOutput:
    """Standard particle filter, resampling with ``scheme`` at every step."""
    if n_particles < 1:
        raise ValueError("need at least one particle")
    return _run_filter(fk, n_particles, scheme, stream, phis,
                       twisted=False, twist_final=False)


def auxiliary_particle_filter(
    fk: FeynmanKacModel,
    n_particles: int,
    scheme,
    stream: UniformStream,
    phis: dict | None = None,
    twist_final: bool = True,
) -> FilterOutput:
    """Particle filter with resampling weights twisted by the model's
    auxiliary function.

    A model without ``log_aux`` (constant twisting) runs the standard
    filter code path, so its output is bitwise identical to
    :func:`particle_filter` on shared streams.  ``twist_final`` controls
    whether the last step is twisted too (the printed recursion) or left
    untwisted.
    """
    if n_particles < 1:
        raise ValueError("need at least one particle")
    twisted = fk.log_aux is not None
    return _run_filter(fk, n_particles, scheme, stream, phis,
                       twisted=twisted, twist_final=twist_final)


def save_observations_csv(path, obs) -> None:
    """One row per time step, d comma-separated columns."""
    np.savetxt(path, np.atleast_2d(np.asarray(obs, dtype=np.float64)), delimiter=",")


def load_observations_csv(path) -> np.ndarray:
    obs = np.loadtxt(path, delimiter=",")
    return obs[:, None] if obs.ndim == 1 else obs
