"""Non-parametric blind estimation of a telescope PSF core from transit images.

A transiting body is a black disk whose position is known, so any light
recorded inside it is instrumental.  The package jointly restores a stack of
observation patches and the core of the convolution kernel by proximal
alternating minimisation under a wavelet analysis sparsity prior.
"""

from .blind import (
    RunReport,
    SolverConfig,
    adaptive_sigma,
    build_problem,
    iterative_rho,
    warm_start_sweep,
    whiteness_measure,
)
from .grid import DiskGeometry, ExpandedDomain, FilterEstimate, ImagePatch
from .nonblind import MetricSet, compute_isnr, compute_rsnr, deconvolve, disk_intensity_ratio
from .solvers import NumericalError

__version__ = "0.1.0"

__all__ = [
    "DiskGeometry",
    "ExpandedDomain",
    "FilterEstimate",
    "ImagePatch",
    "MetricSet",
    "NumericalError",
    "RunReport",
    "SolverConfig",
    "adaptive_sigma",
    "build_problem",
    "compute_isnr",
    "compute_rsnr",
    "deconvolve",
    "disk_intensity_ratio",
    "iterative_rho",
    "warm_start_sweep",
    "whiteness_measure",
]
