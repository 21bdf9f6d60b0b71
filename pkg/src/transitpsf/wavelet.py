"""Undecimated Daubechies wavelet frame, coefficient sets and noise estimation.

The transform is the a-trous (stationary) cascade with periodic extension,
evaluated in the Fourier domain.  Filters are scaled by ``1/sqrt(2)`` per
level so that the frame is Parseval: ``synthesize(analyze(x)) == x`` and
``||analyze(x)|| == ||x||``; synthesis is exactly the adjoint of analysis.

Coefficient layout along the subband axis::

    [approx_J, detail_J (3), detail_{J-1} (3), ..., detail_1 (3)]

with the three orientations of each level ordered ``(LH, HL, HH)``, where
the first letter is the filter applied along axis 0 (rows index) and the
second along axis 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import DiskGeometry, ExpandedDomain, disk_mask, irfft2, rfft2

__all__ = [
    "WaveletDictionary",
    "CoefficientSets",
    "build_theta",
    "estimate_sigma_rme",
    "DB2_LOWPASS",
]

# orthonormal Daubechies filter with two vanishing moments, in closed form
_S3 = np.sqrt(3.0)
DB2_LOWPASS = np.array([1.0 + _S3, 3.0 + _S3, 3.0 - _S3, 1.0 - _S3]) / (4.0 * np.sqrt(2.0))
_FILTERS = {"db2": DB2_LOWPASS}
_ORIENTATIONS = ("LH", "HL", "HH")


def _highpass(lo: np.ndarray) -> np.ndarray:
    n = lo.size
    return np.array([(-1) ** k * lo[n - 1 - k] for k in range(n)])


def _response(taps: np.ndarray, spacing: int, side: int, real_half: bool) -> np.ndarray:
    """DFT of a filter with taps ``spacing`` apart, roughly centred on 0."""
    line = np.zeros(side)
    offset = (taps.size - 1) // 2
    for k, t in enumerate(taps):
        line[((k - offset) * spacing) % side] += t
    return np.fft.rfft(line) if real_half else np.fft.fft(line)


@dataclass(frozen=True)
class WaveletDictionary:
    """Parseval undecimated wavelet frame on a periodic ``side x side`` grid."""

    side: int
    levels: int = 3
    wavelet: str = "db2"
    _spectra: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.wavelet not in _FILTERS:
            raise ValueError(f"unknown wavelet {self.wavelet!r}; available: {sorted(_FILTERS)}")
        if self.levels < 1 or self.side < 1:
            raise ValueError("need at least one level and a positive side")
        lo = _FILTERS[self.wavelet] / np.sqrt(2.0)
        hi = _highpass(lo)
        bands = []
        acc_r = np.ones(self.side, dtype=complex)
        acc_c = np.ones(self.side // 2 + 1, dtype=complex)
        details = []
        for j in range(self.levels):
            step = 2**j
            lr, hr = (_response(f, step, self.side, False) for f in (lo, hi))
            lc, hc = (_response(f, step, self.side, True) for f in (lo, hi))
            level = [
                np.outer(acc_r * lr, acc_c * hc),
                np.outer(acc_r * hr, acc_c * lc),
                np.outer(acc_r * hr, acc_c * hc),
            ]
            details.append(level)
            acc_r = acc_r * lr
            acc_c = acc_c * lc
        bands.append(np.outer(acc_r, acc_c))
        for level in reversed(details):
            bands.extend(level)
        object.__setattr__(self, "_spectra", np.stack(bands))

    @property
    def n_subbands(self) -> int:
        return 1 + 3 * self.levels

    @property
    def n_details(self) -> int:
        return 3 * self.levels

    @property
    def frame_constant(self) -> float:
        return 1.0

    def subband_names(self) -> list[str]:
        names = [f"approx_{self.levels}"]
        for j in range(self.levels, 0, -1):
            names += [f"detail_{j}_{o}" for o in _ORIENTATIONS]
        return names

    @property
    def finest_slice(self) -> slice:
        """Detail subbands of the finest scale within the full layout."""
        return slice(self.n_subbands - 3, self.n_subbands)

    def _check(self, x: np.ndarray) -> None:
        if x.shape[-2:] != (self.side, self.side):
            raise ValueError(f"expected trailing shape {(self.side, self.side)}, got {x.shape}")

    def analyze(self, x: np.ndarray) -> np.ndarray:
        """Coefficients with shape ``x.shape[:-2] + (n_subbands, side, side)``."""
        x = np.asarray(x, dtype=np.float64)
        self._check(x)
        return irfft2(rfft2(x)[..., None, :, :] * self._spectra, self.side)

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if coeffs.ndim < 3 or coeffs.shape[-3] != self.n_subbands:
            raise ValueError(
                f"expected {self.n_subbands} subbands on axis -3, got shape {coeffs.shape}"
            )
        self._check(coeffs)
        spec = np.einsum("...sij,sij->...ij", rfft2(coeffs), np.conj(self._spectra))
        return irfft2(spec, self.side)

    def analyze_details(self, x: np.ndarray, x_hat: Optional[np.ndarray] = None) -> np.ndarray:
        """Detail subbands only (layout without the leading approximation)."""
        if x_hat is None:
            x = np.asarray(x, dtype=np.float64)
            self._check(x)
            x_hat = rfft2(x)
        return irfft2(x_hat[..., None, :, :] * self._spectra[1:], self.side)

    def synthesize_details_hat(self, details: np.ndarray) -> np.ndarray:
        """Fourier transform of the adjoint of :meth:`analyze_details`."""
        return np.einsum("...sij,sij->...ij", rfft2(details), np.conj(self._spectra[1:]))

    def synthesize_details(self, details: np.ndarray) -> np.ndarray:
        return irfft2(self.synthesize_details_hat(details), self.side)


@dataclass
class CoefficientSets:
    """Boolean masks over detail coefficients, shape ``(P, n_details, m, m)``.

    ``theta``: coefficients untouched by the disk and by the free border.
    ``delta``: every detail coefficient.  ``unbounded``: details untouched
    by the free border only (the set used without a disk).  ``finest``:
    mask of the finest-scale details in the detail-only layout.
    """

    theta: np.ndarray
    delta: np.ndarray
    unbounded: np.ndarray
    finest: np.ndarray

    @property
    def q(self) -> np.ndarray:
        """Number of selected coefficients per observation."""
        return self.theta.reshape(self.theta.shape[0], -1).sum(axis=1)


def _affected(
    dictionary: WaveletDictionary,
    region: np.ndarray,
    rng: np.random.Generator,
    background: float,
    eps_zero: float,
) -> np.ndarray:
    img = np.full(region.shape, background)
    img[region] = rng.uniform(0.0, 1.0, size=int(region.sum()))
    return np.abs(dictionary.analyze_details(img)) > eps_zero


def build_theta(
    geoms: Sequence[Optional[DiskGeometry]],
    domain: ExpandedDomain,
    dictionary: WaveletDictionary,
    draws: int = 3,
    seed: int = 0,
    eps_zero: float = 1e-12,
    background: float = 1.0,
) -> CoefficientSets:
    """Find the detail coefficients not influenced by the disks or the border.

    For every draw, the outer-radius disk of each observation (and, separately,
    the free border frame) is filled with ``U(0, 1)`` values over a constant
    background.  A coefficient is affected when its magnitude exceeds
    ``eps_zero`` in any draw.  ``geoms`` entries are in observation-window
    coordinates; ``None`` means the observation has no disk.
    """
    if len(geoms) == 0:
        raise ValueError("need at least one observation geometry")
    if dictionary.side != domain.m:
        raise ValueError("dictionary side must equal the expanded domain side")
    rng = np.random.default_rng(seed)
    shape = (domain.m, domain.m)
    nd = dictionary.n_details

    border_hit = np.zeros((nd,) + shape, dtype=bool)
    if domain.b > 0:
        frame = domain.border_mask()
        for _ in range(draws):
            border_hit |= _affected(dictionary, frame, rng, background, eps_zero)

    theta = np.empty((len(geoms), nd) + shape, dtype=bool)
    for j, geom in enumerate(geoms):
        hit = border_hit.copy()
        if geom is not None:
            g = domain.expand_geometry(geom)
            region = disk_mask(shape, g.center, g.outer_radius)
            for _ in range(draws):
                hit |= _affected(dictionary, region, rng, background, eps_zero)
        theta[j] = ~hit

    delta = np.ones_like(theta)
    unbounded = np.broadcast_to(~border_hit, theta.shape).copy()
    finest = np.zeros((nd,) + shape, dtype=bool)
    finest[-3:] = True
    return CoefficientSets(theta=theta, delta=delta, unbounded=unbounded, finest=finest)


def estimate_sigma_rme(y: np.ndarray, dictionary: Optional[WaveletDictionary] = None) -> float:
    """Robust median estimate of the white-noise standard deviation.

    Uses the three finest-scale detail subbands rescaled to orthonormal
    (decimated-transform) normalisation: ``median(|alpha|) / 0.6745``.
    """
    y = np.asarray(y, dtype=np.float64)
    if dictionary is None:
        dictionary = WaveletDictionary(y.shape[-1])
    coeffs = dictionary.analyze_details(y)[..., -3:, :, :]
    # undo the 1/sqrt(2) per-axis frame scaling of the first level
    alpha = 2.0 * coeffs
    return float(np.median(np.abs(alpha)) / 0.6745)
