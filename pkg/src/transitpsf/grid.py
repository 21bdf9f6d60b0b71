"""Array types, disk geometry and FFT convolution on the expanded domain.

Images live on an ``n x n`` observation window.  Every convolution is carried
out on a larger ``m x m`` grid (``m = n + 2b``) whose ``b``-wide border holds
free, unobserved pixels, so the periodic FFT convolution never wraps data
from one side of the observed window onto the other.  The observed values are
the central ``n x n`` crop of that periodic convolution.

Kernels are stored centred at ``(b, b)`` in a ``(2b+1) x (2b+1)`` array and
shifted to the wrap-around origin when embedded on the ``m`` grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.fft as sfft

__all__ = [
    "ImagePatch",
    "DiskGeometry",
    "FilterEstimate",
    "ExpandedDomain",
    "convolve_circular",
    "correlate_circular",
    "embed_filter",
    "extract_filter",
    "delta_filter",
    "derive_omega",
    "disk_mask",
    "forward_operator",
    "adjoint_operator",
    "fft_workers",
    "set_fft_workers",
]

_WORKERS = 1


def set_fft_workers(workers: int) -> None:
    """Cap the number of threads used by every FFT in the package."""
    global _WORKERS
    _WORKERS = max(1, int(workers))


def fft_workers() -> int:
    return _WORKERS


def rfft2(a: np.ndarray) -> np.ndarray:
    return sfft.rfft2(a, workers=_WORKERS)


def irfft2(a: np.ndarray, side: int) -> np.ndarray:
    return sfft.irfft2(a, s=(side, side), workers=_WORKERS)


@dataclass(frozen=True)
class ImagePatch:
    """Square image in detector units (DN)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != data.shape[1] or data.shape[0] < 1:
            raise ValueError(f"ImagePatch needs a square 2-D array, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("ImagePatch contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def side(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class DiskGeometry:
    """Black disk of the occulting body.

    ``center`` is ``(row, col)`` in pixel coordinates of the observation
    window; pixel ``(i, j)`` has its centre at ``(i, j)``.  The inner radius
    defines the zero-pixel set and the outer radius the set of wavelet
    coefficients left out of the sparsity prior; by default they sit one
    pixel either side of ``radius`` to absorb ephemeris errors.
    """

    center: Tuple[float, float]
    radius: float
    inner_radius: Optional[float] = None
    outer_radius: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if self.inner_radius is None:
            object.__setattr__(self, "inner_radius", self.radius - 1.0)
        if self.outer_radius is None:
            object.__setattr__(self, "outer_radius", self.radius + 1.0)
        if not 0 < self.inner_radius < self.radius < self.outer_radius:
            raise ValueError(
                "disk radii must satisfy 0 < inner < radius < outer, got "
                f"{self.inner_radius}, {self.radius}, {self.outer_radius}"
            )

    def shifted(self, drow: float, dcol: float) -> "DiskGeometry":
        return DiskGeometry(
            (self.center[0] + drow, self.center[1] + dcol),
            self.radius,
            self.inner_radius,
            self.outer_radius,
        )

    def check_inside(self, side: int) -> None:
        r = self.outer_radius
        row, col = self.center
        if row - r < 0 or col - r < 0 or row + r > side - 1 or col + r > side - 1:
            raise ValueError(
                f"disk at {self.center} with outer radius {r} exceeds a {side}x{side} patch"
            )

    def to_dict(self) -> dict:
        return {
            "center": list(self.center),
            "radius": self.radius,
            "inner_radius": self.inner_radius,
            "outer_radius": self.outer_radius,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiskGeometry":
        return cls(
            tuple(d["center"]),
            float(d["radius"]),
            d.get("inner_radius"),
            d.get("outer_radius"),
        )


@dataclass(frozen=True)
class FilterEstimate:
    """PSF core on a ``(2b+1) x (2b+1)`` window, non-negative with unit mass."""

    data: np.ndarray
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != data.shape[1] or data.shape[0] % 2 != 1:
            raise ValueError(f"filter must be square with odd side, got {data.shape}")
        if self.check:
            if np.any(data < 0):
                raise ValueError("filter has negative entries")
            if abs(data.sum() - 1.0) > 1e-9:
                raise ValueError(f"filter mass is {data.sum()!r}, expected 1")
        object.__setattr__(self, "data", data)

    @property
    def half_width(self) -> int:
        return self.data.shape[0] // 2

    @property
    def side(self) -> int:
        return self.data.shape[0]

    def embed(self, side: int) -> np.ndarray:
        return embed_filter(self.data, side)


@dataclass(frozen=True)
class ExpandedDomain:
    """Observation window of side ``n`` padded by a free border of width ``b``."""

    n: int
    b: int

    def __post_init__(self):
        if self.n < 1 or self.b < 0:
            raise ValueError(f"invalid domain n={self.n}, b={self.b}")

    @property
    def m(self) -> int:
        return self.n + 2 * self.b

    @property
    def inner(self) -> Tuple[slice, slice]:
        s = slice(self.b, self.b + self.n)
        return (s, s)

    def crop(self, x: np.ndarray) -> np.ndarray:
        """Selection ``S_N``: central ``n x n`` window of the trailing two axes."""
        s = slice(self.b, self.b + self.n)
        return x[..., s, s]

    def zero_insert(self, y: np.ndarray) -> np.ndarray:
        """Adjoint of :meth:`crop`: place ``y`` in the centre of a zero ``m`` grid."""
        out = np.zeros(y.shape[:-2] + (self.m, self.m))
        s = slice(self.b, self.b + self.n)
        out[..., s, s] = y
        return out

    def border_mask(self) -> np.ndarray:
        mask = np.ones((self.m, self.m), dtype=bool)
        mask[self.inner] = False
        return mask

    def expand(self, y: np.ndarray, mode: str = "symmetric") -> np.ndarray:
        """Pad an observation out to the expanded grid (initial guess only)."""
        pad = [(0, 0)] * (y.ndim - 2) + [(self.b, self.b), (self.b, self.b)]
        return np.pad(y, pad, mode=mode)

    def expand_geometry(self, geom: DiskGeometry) -> DiskGeometry:
        return geom.shifted(self.b, self.b)


def _check_square_pair(a: np.ndarray, k: np.ndarray) -> None:
    if a.shape[-2:] != k.shape[-2:]:
        raise ValueError(f"shape mismatch: {a.shape} vs {k.shape}")


def convolve_circular(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """2-D circular convolution, kernel origin at index ``(0, 0)``."""
    image = np.asarray(image, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    _check_square_pair(image, kernel)
    side = image.shape[-1]
    if image.shape[-2] != side:
        raise ValueError("convolve_circular expects square arrays")
    return irfft2(rfft2(image) * rfft2(kernel), side)


def correlate_circular(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`convolve_circular` with respect to ``image``."""
    image = np.asarray(image, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    _check_square_pair(image, kernel)
    side = image.shape[-1]
    return irfft2(rfft2(image) * np.conj(rfft2(kernel)), side)


def embed_filter(h: np.ndarray, side: int) -> np.ndarray:
    """Place a centred ``(2b+1)^2`` kernel at the wrap-around origin of an ``side`` grid."""
    h = np.asarray(h, dtype=np.float64)
    k = h.shape[-1]
    if h.shape[-2] != k or k % 2 != 1:
        raise ValueError(f"kernel must be square with odd side, got {h.shape}")
    if k > side:
        raise ValueError(f"kernel of side {k} does not fit a {side} grid")
    b = k // 2
    out = np.zeros(h.shape[:-2] + (side, side))
    out[..., :k, :k] = h
    return np.roll(out, (-b, -b), axis=(-2, -1))


def extract_filter(h_full: np.ndarray, half_width: int) -> np.ndarray:
    """Inverse of :func:`embed_filter`: the central ``(2b+1)^2`` window."""
    k = 2 * half_width + 1
    if k > h_full.shape[-1]:
        raise ValueError("requested window is larger than the grid")
    rolled = np.roll(h_full, (half_width, half_width), axis=(-2, -1))
    return rolled[..., :k, :k].copy()


def delta_filter(half_width: int) -> FilterEstimate:
    k = 2 * half_width + 1
    d = np.zeros((k, k))
    d[half_width, half_width] = 1.0
    return FilterEstimate(d)


def disk_mask(shape: Tuple[int, int], center: Tuple[float, float], radius: float) -> np.ndarray:
    """Pixels whose centre lies within ``radius`` of ``center`` (inclusive)."""
    rows = np.arange(shape[0])[:, None] - center[0]
    cols = np.arange(shape[1])[None, :] - center[1]
    return rows * rows + cols * cols <= radius * radius


def derive_omega(geom: DiskGeometry, side: int) -> np.ndarray:
    """Boolean mask of the known-zero pixels (inner-radius disk)."""
    geom.check_inside(side)
    return disk_mask((side, side), geom.center, geom.inner_radius)


def _kernel_spectrum(
    h: np.ndarray | FilterEstimate,
    side: int,
    prefilter: Optional[np.ndarray] = None,
) -> np.ndarray:
    data = h.data if isinstance(h, FilterEstimate) else np.asarray(h, dtype=np.float64)
    if data.shape[-1] != side:
        data = embed_filter(data, side)
    spec = rfft2(data)
    if prefilter is not None:
        pre = prefilter if prefilter.shape[-1] == side else embed_filter(prefilter, side)
        spec = spec * rfft2(pre)
    return spec


def forward_operator(
    x: np.ndarray,
    h: np.ndarray | FilterEstimate,
    domain: ExpandedDomain,
    prefilter: Optional[np.ndarray] = None,
) -> np.ndarray:
    """``S_N Phi(p * h) x`` for an expanded image (or stack of them).

    ``h`` may be a centred core or an already embedded ``m x m`` kernel; the
    optional ``prefilter`` (a known parametric PSF) is convolved in first.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-2:] != (domain.m, domain.m):
        raise ValueError(f"expected expanded images of side {domain.m}, got {x.shape}")
    spec = _kernel_spectrum(h, domain.m, prefilter)
    return domain.crop(irfft2(rfft2(x) * spec, domain.m))


def adjoint_operator(
    y: np.ndarray,
    h: np.ndarray | FilterEstimate,
    domain: ExpandedDomain,
    prefilter: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Adjoint of :func:`forward_operator`: zero-insert, then correlate."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-2:] != (domain.n, domain.n):
        raise ValueError(f"expected observations of side {domain.n}, got {y.shape}")
    spec = _kernel_spectrum(h, domain.m, prefilter)
    return irfft2(rfft2(domain.zero_insert(y)) * np.conj(spec), domain.m)
