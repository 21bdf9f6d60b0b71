"""Deconvolution with a known PSF core and the quality metrics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from .blind import whiteness_measure
from .grid import ExpandedDomain, FilterEstimate
from .io import write_profile_csv
from .prox import project_P0
from .solvers import ProblemSetup, solve_image_step
from .wavelet import WaveletDictionary, build_theta

__all__ = [
    "MAX_DB",
    "MetricSet",
    "DeconvolutionResult",
    "deconvolve",
    "deconvolve_adaptive",
    "compute_isnr",
    "compute_rsnr",
    "compute_bsnr",
    "disk_intensity_ratio",
    "ratio_profile",
    "export_profile",
]

# reported instead of +inf when a reconstruction is exact
MAX_DB = 999.0


def _db_ratio(num: float, den: float) -> float:
    if den == 0.0:
        return MAX_DB if num > 0 else 0.0
    if num == 0.0:
        return -MAX_DB
    return min(20.0 * math.log10(num / den), MAX_DB)


def compute_isnr(y: np.ndarray, x: np.ndarray, x_gt: np.ndarray) -> float:
    """Improvement in SNR of ``x`` over the observation ``y`` (dB)."""
    y, x, x_gt = (np.asarray(a, dtype=np.float64) for a in (y, x, x_gt))
    if not (y.shape == x.shape == x_gt.shape):
        raise ValueError("ISNR needs equally shaped arrays")
    return _db_ratio(float(np.linalg.norm(y - x_gt)), float(np.linalg.norm(x - x_gt)))


def compute_rsnr(h_gt, h) -> float:
    """Reconstruction SNR of a filter estimate (dB), both on the same window."""
    a = np.asarray(getattr(h_gt, "data", h_gt), dtype=np.float64)
    e = np.asarray(getattr(h, "data", h), dtype=np.float64)
    if a.shape != e.shape:
        raise ValueError(f"filters differ in shape: {a.shape} vs {e.shape}")
    return _db_ratio(float(np.linalg.norm(a)), float(np.linalg.norm(a - e)))


def compute_bsnr(blurred: np.ndarray, sigma: float) -> float:
    """``10 log10(var(blurred) / sigma^2)``."""
    if sigma <= 0:
        return MAX_DB
    return 10.0 * math.log10(float(np.var(blurred)) / sigma**2)


def disk_intensity_ratio(y: np.ndarray, x: np.ndarray, omega: np.ndarray) -> float:
    """Light left inside the disk after restoration, relative to the observation."""
    omega = np.asarray(omega, dtype=bool)
    if not omega.any():
        raise ValueError("empty disk mask")
    s_y = float(np.asarray(y, dtype=np.float64)[omega].sum())
    if s_y == 0.0:
        raise ValueError("observation has no intensity inside the disk")
    return float(np.asarray(x, dtype=np.float64)[omega].sum()) / s_y


@dataclass
class MetricSet:
    isnr: Optional[float] = None
    rsnr: Optional[float] = None
    disk_intensity_ratio: Optional[float] = None
    bsnr: Optional[float] = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class DeconvolutionResult:
    x: np.ndarray
    """Restored window, ``n x n``."""
    x_expanded: np.ndarray
    rho: float
    whiteness: float
    candidates: Tuple[Tuple[float, float], ...] = ()


def _setup(n: int, h: FilterEstimate, levels: int, prefilter) -> ProblemSetup:
    domain = ExpandedDomain(n, h.half_width)
    dictionary = WaveletDictionary(domain.m, levels)
    sets = build_theta([None], domain, dictionary)
    # no disk: every detail coefficient clear of the free border is penalised
    return ProblemSetup(domain, dictionary, sets.unbounded, None, prefilter)


def deconvolve(
    z: np.ndarray,
    h: FilterEstimate,
    rho: float,
    tol: float = 1e-5,
    max_inner: int = 300,
    levels: int = 3,
    prefilter: Optional[np.ndarray] = None,
    whiteness_window: int = 4,
) -> DeconvolutionResult:
    """Sparse, non-negative restoration of one patch with a fixed filter.

    Minimises ``rho ||S W^T x||_1 + 1/2 ||z - S_N Phi(h) x||^2`` over
    ``x >= 0`` on the expanded domain; ``S`` keeps all border-free details.
    """
    if rho < 0:
        raise ValueError("rho must be non-negative")
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] != z.shape[1]:
        raise ValueError("deconvolve expects one square patch")
    setup = _setup(z.shape[0], h, levels, prefilter)
    zz = z[None]
    x0 = project_P0(setup.domain.expand(zz))
    x, _ = solve_image_step(zz, h, x0, rho, 0.0, setup, tol=tol, max_inner=max_inner)
    m = whiteness_measure(setup.residual(zz, x, h), whiteness_window)
    return DeconvolutionResult(setup.domain.crop(x)[0], x[0], rho, m)


def deconvolve_adaptive(
    z: np.ndarray,
    h: FilterEstimate,
    rho_blind: float,
    factors: Sequence[float] = (1.0, 0.5, 0.25),
    scale: float = 0.5,
    **kwargs,
) -> DeconvolutionResult:
    """Try ``rho = scale * rho_blind * f`` for each factor; keep the whitest residual."""
    best = None
    tried = []
    for f in factors:
        res = deconvolve(z, h, scale * rho_blind * f, **kwargs)
        tried.append((res.rho, res.whiteness))
        if best is None or res.whiteness > best.whiteness:
            best = res
    best.candidates = tuple(tried)
    return best


def ratio_profile(y: np.ndarray, x: np.ndarray, row: int, floor: float = 1e-12) -> dict:
    """Row profiles of the observation, the restoration and their ratio."""
    y = np.asarray(y, dtype=np.float64)[row]
    x = np.asarray(x, dtype=np.float64)[row]
    ratio = np.where(np.abs(y) > floor, x / np.where(np.abs(y) > floor, y, 1.0), np.nan)
    return {"col": np.arange(y.size), "observed": y, "restored": x, "ratio": ratio}


def export_profile(path: str | Path, y: np.ndarray, x: np.ndarray, row: int) -> Path:
    return write_profile_csv(path, ratio_profile(y, x, row))
