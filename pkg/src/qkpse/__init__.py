"""Classical estimation of bosonic quantum kernels from s-ordered phase-space distributions."""

from .estimator import EstimateReport, algorithm1_kernel, algorithm2_kernel, hoeffding_samples, mc_overlap
from .gaussian import GaussianState, TransferMatrix, exact_gaussian_kernel, make_gaussian, nonclassical_depth
from .sources import InputStateSpec, LonEncoding

__all__ = [
    "EstimateReport",
    "GaussianState",
    "InputStateSpec",
    "LonEncoding",
    "TransferMatrix",
    "algorithm1_kernel",
    "algorithm2_kernel",
    "exact_gaussian_kernel",
    "hoeffding_samples",
    "make_gaussian",
    "mc_overlap",
    "nonclassical_depth",
]
