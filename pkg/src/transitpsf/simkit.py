"""Synthetic transit experiments: ground-truth filters, texture and observations."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage, signal

from .grid import DiskGeometry, ExpandedDomain, FilterEstimate, disk_mask, embed_filter, irfft2, rfft2

__all__ = [
    "make_gaussian_filter",
    "make_x_filter",
    "solar_texture",
    "DEFAULT_CUTOUT_CENTERS",
    "SyntheticScenario",
    "Simulation",
    "simulate_observations",
    "make_power_law_psf",
    "LongRangeCheck",
    "longrange_constant_check",
]

# decay length (pixels) of the X filter arms
X_FILTER_DECAY = 4.0

TEXTURE_SIZE = 1024
TEXTURE_SEED = 20120606
# cutouts of the bundled texture, at least 256 px apart; the last one is
# kept out of the blind estimation and used for validation
DEFAULT_CUTOUT_CENTERS: Tuple[Tuple[int, int], ...] = ((256, 256), (256, 768), (768, 256), (768, 768))


def make_gaussian_filter(
    b: int = 16, sigma_h: float = 2.0, sigma_v: float = 4.0, rotation: float = 45.0
) -> FilterEstimate:
    """Rotated anisotropic Gaussian sampled on the ``(2b+1)^2`` window.

    ``sigma_h`` acts along columns (horizontal), ``sigma_v`` along rows; the
    ellipse is rotated by ``rotation`` degrees, then the window is normalised
    to unit mass.
    """
    if b < 1:
        raise ValueError("b must be >= 1")
    off = np.arange(-b, b + 1, dtype=np.float64)
    y, x = np.meshgrid(off, off, indexing="ij")
    t = math.radians(rotation)
    xr = x * math.cos(t) + y * math.sin(t)
    yr = -x * math.sin(t) + y * math.cos(t)
    g = np.exp(-0.5 * ((xr / sigma_h) ** 2 + (yr / sigma_v) ** 2))
    return FilterEstimate(g / g.sum())


def make_x_filter(b: int = 16, decay: float = X_FILTER_DECAY) -> FilterEstimate:
    """X-shaped diffraction-like filter.

    Each diagonal carries ``exp(-d / decay)`` at diagonal distance ``d`` from
    the centre; the two diagonals are summed (the centre gets weight 2) and
    the result is normalised to unit mass.
    """
    if b < 1:
        raise ValueError("b must be >= 1")
    k = 2 * b + 1
    h = np.zeros((k, k))
    for d in range(-b, b + 1):
        w = math.exp(-abs(d) / decay)
        h[b + d, b + d] += w
        h[b + d, b - d] += w
    return FilterEstimate(h / h.sum())


@functools.lru_cache(maxsize=8)
def _texture(
    size: int,
    seed: int,
    mottling: float,
    loop_gain: float,
    region_gain: float,
    point_gain: float,
) -> np.ndarray:
    rng = np.random.default_rng(seed)
    # small-scale mottling and diffuse corona
    fine = ndimage.gaussian_filter(rng.standard_normal((size, size)), 2.0, mode="wrap")
    coarse = ndimage.gaussian_filter(rng.standard_normal((size, size)), 24.0, mode="wrap")
    fine /= fine.std()
    coarse /= coarse.std()
    img = 80.0 * np.exp(mottling * fine + 0.45 * coarse)

    # active regions: broad bright patches with loop systems rooted in them
    n_regions = max(1, size // 160)
    loops = np.zeros((size, size))
    regions = np.zeros((size, size))
    for _ in range(n_regions):
        cr, cc = rng.uniform(0.05 * size, 0.95 * size, 2)
        radius = rng.uniform(30, 80)
        blob = np.zeros((size, size))
        blob[int(cr) % size, int(cc) % size] = 1.0
        regions += rng.uniform(400, 1200) * ndimage.gaussian_filter(blob, radius / 2, mode="wrap") * (
            2 * np.pi * (radius / 2) ** 2
        )
        for _ in range(rng.integers(12, 30)):
            length = rng.uniform(20, 2.5 * radius)
            height = rng.uniform(0.2, 0.8) * length
            angle = rng.uniform(0, np.pi)
            t = np.linspace(0.0, np.pi, int(8 * length))
            u = np.array([np.cos(angle), np.sin(angle)])
            v = np.array([-np.sin(angle), np.cos(angle)])
            base = np.array([cr, cc]) + rng.normal(0, radius / 2, 2)
            pts = base[:, None] + np.outer(u, -0.5 * length * np.cos(t)) + np.outer(v, height * np.sin(t))
            r = np.round(pts[0]).astype(int) % size
            c = np.round(pts[1]).astype(int) % size
            np.add.at(loops, (r, c), rng.uniform(20, 60) / 8.0)
    loops = ndimage.gaussian_filter(loops, 1.2, mode="wrap") * 2 * np.pi * 1.2**2
    img = img + region_gain * regions + loop_gain * loops

    # a few compact bright points
    for _ in range(size // 24):
        r, c = rng.integers(0, size, 2)
        img[r, c] += point_gain * rng.uniform(500, 3000)
    img = ndimage.gaussian_filter(img, 0.7, mode="wrap")
    return img


def solar_texture(
    size: int = TEXTURE_SIZE,
    seed: int = TEXTURE_SEED,
    mottling: float = 0.0,
    loop_gain: float = 0.0,
    region_gain: float = 1.0,
    point_gain: float = 0.0,
) -> np.ndarray:
    """Procedural EUV-like scene in DN.

    Log-normal diffuse corona plus broad active regions.  Small-scale
    mottling, loop systems and compact bright points can be mixed in with
    the gain arguments; they are off by default because sparse fine detail
    pulls blind filter estimates toward the identity.  Deterministic for a
    given set of arguments; a copy is returned.
    """
    return _texture(
        int(size), int(seed), float(mottling), float(loop_gain), float(region_gain), float(point_gain)
    ).copy()


def _noise_rng(seed: int, index: int) -> np.random.Generator:
    # counter-based stream per (seed, patch) so adding patches leaves earlier
    # noise realisations untouched
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


@dataclass
class SyntheticScenario:
    """Description of a simulated transit.

    ``bsnr_db=None`` produces noiseless observations.  ``disk_center`` is in
    observation-window coordinates.
    """

    h: FilterEstimate
    n: int = 256
    centers: Sequence[Tuple[int, int]] = DEFAULT_CUTOUT_CENTERS[:3]
    disk_center: Tuple[float, float] = (128.0, 128.0)
    radius: float = 48.0
    bsnr_db: Optional[float] = 30.0
    seed: int = 0
    texture: Optional[np.ndarray] = field(default=None, repr=False)
    blur: bool = True

    @property
    def b(self) -> int:
        return self.h.half_width

    def geometry(self) -> DiskGeometry:
        return DiskGeometry(self.disk_center, self.radius)

    def source(self) -> np.ndarray:
        return solar_texture() if self.texture is None else np.asarray(self.texture, dtype=np.float64)

    def manifest(self) -> dict:
        return {
            "n": self.n,
            "b": self.b,
            "centers": [list(c) for c in self.centers],
            "geometry": [self.geometry().to_dict() for _ in self.centers],
            "bsnr_db": self.bsnr_db,
            "seed": self.seed,
            "blur": self.blur,
            "texture": "bundled" if self.texture is None else "user",
        }


@dataclass
class Simulation:
    y: np.ndarray
    x_gt: np.ndarray
    h_gt: FilterEstimate
    sigma: float
    blurred: np.ndarray
    geometries: List[DiskGeometry]


def simulate_observations(scenario: SyntheticScenario) -> Simulation:
    """Blur the disk-masked cutouts, then add white Gaussian noise.

    The true disk (``radius``) is zeroed before blurring.  Each cutout is
    blurred on an ``(n + 2b)`` window so that the observed ``n x n`` patch is
    an exact linear (non-periodic) convolution of the scene.  ``sigma`` is set
    from the variance of all blurred patches to reach the requested BSNR.
    """
    src = scenario.source()
    n, b = scenario.n, scenario.b
    domain = ExpandedDomain(n, b)
    m = domain.m
    geom = scenario.geometry()
    geom.check_inside(n)
    disk = disk_mask((m, m), domain.expand_geometry(geom).center, scenario.radius)
    kernel_hat = rfft2(embed_filter(scenario.h.data, m)) if scenario.blur else None

    x_gt, blurred = [], []
    for (cr, cc) in scenario.centers:
        r0, c0 = int(cr) - n // 2 - b, int(cc) - n // 2 - b
        if r0 < 0 or c0 < 0 or r0 + m > src.shape[0] or c0 + m > src.shape[1]:
            raise ValueError(f"cutout centred at {(cr, cc)} does not fit the source image")
        window = src[r0 : r0 + m, c0 : c0 + m].copy()
        window[disk] = 0.0
        x_gt.append(domain.crop(window))
        if kernel_hat is None:
            blurred.append(domain.crop(window))
        else:
            blurred.append(domain.crop(irfft2(rfft2(window) * kernel_hat, m)))
    x_gt = np.stack(x_gt)
    blurred = np.stack(blurred)

    if scenario.bsnr_db is None or not np.isfinite(scenario.bsnr_db):
        sigma = 0.0
        y = blurred.copy()
    else:
        sigma = float(np.sqrt(blurred.var() / 10.0 ** (scenario.bsnr_db / 10.0)))
        noise = np.stack([_noise_rng(scenario.seed, j).standard_normal((n, n)) for j in range(len(x_gt))])
        y = blurred + sigma * noise
    return Simulation(
        y=y,
        x_gt=x_gt,
        h_gt=scenario.h,
        sigma=sigma,
        blurred=blurred,
        geometries=[geom for _ in scenario.centers],
    )


def make_power_law_psf(
    half_size: int = 256,
    core_sigma: float = 1.5,
    tail_fraction: float = 0.1,
    exponent: float = 2.5,
    r0: float = 3.0,
) -> np.ndarray:
    """Centred PSF: Gaussian core plus an isotropic power-law scattering halo.

    The halo ``(1 + (r / r0)^2)^(-exponent / 2)`` carries ``tail_fraction``
    of the unit mass.
    """
    off = np.arange(-half_size, half_size + 1, dtype=np.float64)
    y, x = np.meshgrid(off, off, indexing="ij")
    r2 = x * x + y * y
    core = np.exp(-0.5 * r2 / core_sigma**2)
    tail = (1.0 + r2 / r0**2) ** (-exponent / 2.0)
    return (1.0 - tail_fraction) * core / core.sum() + tail_fraction * tail / tail.sum()


@dataclass
class LongRangeCheck:
    convolved: np.ndarray
    spread: float
    mean: float

    @property
    def relative_spread(self) -> float:
        return self.spread / self.mean if self.mean != 0 else (0.0 if self.spread == 0 else math.inf)


def longrange_constant_check(
    full_psf: np.ndarray,
    image: np.ndarray,
    b: int = 64,
    center: Optional[Tuple[float, float]] = None,
    radius: float = 10.0,
) -> LongRangeCheck:
    """Convolve ``image`` with the PSF whose central ``(2b+1)^2`` core is zeroed.

    Reports the intensity spread (max - min) and the mean of the result on
    the disk of ``radius`` pixels around ``center`` (image centre by default).
    """
    psf = np.array(full_psf, dtype=np.float64)
    if psf.ndim != 2 or psf.shape[0] % 2 != 1 or psf.shape[0] != psf.shape[1]:
        raise ValueError("full_psf must be square with odd side")
    c = psf.shape[0] // 2
    if c <= b:
        raise ValueError("full_psf must extend beyond the zeroed core window")
    psf[c - b : c + b + 1, c - b : c + b + 1] = 0.0
    img = np.asarray(image, dtype=np.float64)
    conv = signal.fftconvolve(img, psf, mode="same")
    if center is None:
        center = ((img.shape[0] - 1) / 2.0, (img.shape[1] - 1) / 2.0)
    sel = conv[disk_mask(img.shape, center, radius)]
    if np.all(psf == 0):
        sel = np.zeros_like(sel)
        conv = np.zeros_like(conv)
    return LongRangeCheck(conv, float(sel.max() - sel.min()), float(sel.mean()))
