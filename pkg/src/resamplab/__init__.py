"""Resampling schemes for particle filters, with ordering and verification tools.

Subpackages:

* :mod:`resamplab.core` -- weighted particle systems, uniform streams,
  cumulative weights and their generalized inverses;
* :mod:`resamplab.resamplers` -- multinomial, stratified, systematic,
  residual, SSP and deterministic resampling;
* :mod:`resamplab.hilbert` -- Hilbert curve codec, cubifying maps, and
  Hilbert-ordered scheme variants;
* :mod:`resamplab.diagnostics` -- moment/covariance reports, discrepancy
  metrics, variance-rate fits;
* :mod:`resamplab.smc` -- particle and auxiliary particle filters on
  Feynman-Kac models, linear-Gaussian simulator and Kalman oracle;
* :mod:`resamplab.bench` -- the ``resamplab-bench`` experiment CLI.
"""

__version__ = "0.1.0"

from .core import (
    CumulativeWeights,
    ResampleResult,
    UniformStream,
    WeightedParticleSystem,
    ancestors_to_counts,
    counts_to_ancestors,
    inverse_cdf,
    normalize_weights,
)
from .resamplers import (
    SchemeId,
    deterministic_alpha,
    make_resampler,
    multinomial,
    residual,
    ssp_resample,
    ssp_round,
    stratified,
    systematic,
)
from .hilbert import (
    CubifyingMap,
    HilbertCodec,
    hilbert_decode,
    hilbert_encode,
    hilbert_sort,
    ordered_resample,
    psi_tilde,
    psi_tilde_inv,
)

__all__ = [
    "__version__",
    "CumulativeWeights",
    "ResampleResult",
    "UniformStream",
    "WeightedParticleSystem",
    "ancestors_to_counts",
    "counts_to_ancestors",
    "inverse_cdf",
    "normalize_weights",
    "SchemeId",
    "deterministic_alpha",
    "make_resampler",
    "multinomial",
    "residual",
    "ssp_resample",
    "ssp_round",
    "stratified",
    "systematic",
    "CubifyingMap",
    "HilbertCodec",
    "hilbert_decode",
    "hilbert_encode",
    "hilbert_sort",
    "ordered_resample",
    "psi_tilde",
    "psi_tilde_inv",
]
