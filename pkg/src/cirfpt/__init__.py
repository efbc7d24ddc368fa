"""First-passage times of the CIR diffusion through a constant threshold.

Exact cumulants, a Laguerre-Gamma density expansion with positivity
repairs, Monte Carlo validation and an acceptance-rejection sampler.
"""

__version__ = "0.1.0"

from .cir import CASES, CirParams, cumulants_to_moments, fpt_cumulants, fpt_moments_bell  # noqa: E402
from .correction import correct_cdf_monotone, correct_pdf  # noqa: E402
from .expansion import GammaReference, LaguerreGammaExpansion, build_expansion, expansion_from_params  # noqa: E402
from .montecarlo import FptSample, SimulationConfig, simulate  # noqa: E402
from .sampler import ArConfig, ar_sample  # noqa: E402
from .specfun import PrecisionContext, default_context  # noqa: E402

__all__ = [
    "CASES",
    "CirParams",
    "cumulants_to_moments",
    "fpt_cumulants",
    "fpt_moments_bell",
    "correct_cdf_monotone",
    "correct_pdf",
    "GammaReference",
    "LaguerreGammaExpansion",
    "build_expansion",
    "expansion_from_params",
    "FptSample",
    "SimulationConfig",
    "simulate",
    "ArConfig",
    "ar_sample",
    "PrecisionContext",
    "default_context",
]
