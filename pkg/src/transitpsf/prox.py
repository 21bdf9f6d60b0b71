"""Proximal operators and projections used by the image and filter sub-problems.

Every ``prox_*`` function returns ``argmin_u f(u) + ||u - v||^2 / (2 * step)``.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .grid import FilterEstimate, extract_filter

__all__ = [
    "prox_l1",
    "prox_quadratic_fidelity",
    "prox_cost_to_move",
    "conjugate_prox",
    "conj_prox_l1",
    "conj_prox_quadratic_fidelity",
    "conj_prox_cost_to_move",
    "project_simplex",
    "project_simplex_support",
    "project_P0",
]


def prox_l1(v: np.ndarray, threshold: float) -> np.ndarray:
    """Soft thresholding, the prox of ``threshold * ||.||_1`` with unit step."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)


def prox_quadratic_fidelity(v: np.ndarray, z: np.ndarray, step: float) -> np.ndarray:
    """Prox of ``0.5 * ||z - u||^2``."""
    return (v + step * z) / (1.0 + step)


def prox_cost_to_move(v: np.ndarray, anchor: np.ndarray, lam: float, step: float) -> np.ndarray:
    """Prox of ``lam / 2 * ||u - anchor||^2``."""
    if lam < 0:
        raise ValueError("cost-to-move weight must be non-negative")
    return (v + step * lam * anchor) / (1.0 + step * lam)


def conjugate_prox(prox_f: Callable[[np.ndarray, float], np.ndarray], z: np.ndarray, step: float):
    """Prox of the convex conjugate via Moreau's identity.

    ``prox_f(v, s)`` must return the prox of ``s * f`` at ``v``; the result is
    ``z - step * prox_f(z / step, 1 / step)``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    return z - step * prox_f(z / step, 1.0 / step)


# Closed forms of the conjugate proxes evaluated by the primal-dual solver.
# They agree with ``conjugate_prox`` applied to the primal operators above.


def conj_prox_l1(z: np.ndarray, weight: float, out: Optional[np.ndarray] = None) -> np.ndarray:
    """Conjugate prox of ``weight * ||.||_1``: projection onto the l-inf ball."""
    return np.clip(z, -weight, weight, out=out)


def conj_prox_quadratic_fidelity(z: np.ndarray, data: np.ndarray, step: float) -> np.ndarray:
    return (z - step * data) / (1.0 + step)


def conj_prox_cost_to_move(z: np.ndarray, anchor: np.ndarray, lam: float, step: float) -> np.ndarray:
    if lam == 0:
        return np.zeros_like(z)
    return lam * (z - step * anchor) / (step + lam)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a vector onto the probability simplex.

    Sort-based algorithm, ``O(d log d)``.
    """
    v = np.asarray(v, dtype=np.float64)
    flat = v.ravel()
    u = np.sort(flat)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, flat.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def project_simplex_support(h: np.ndarray, half_width: int):
    """Project a kernel onto the simplex restricted to the central window.

    ``h`` is either a centred ``(2b+1)^2`` array or an embedded ``m x m``
    kernel (origin at index ``(0, 0)``); entries outside the window are
    discarded.  Returns a :class:`~transitpsf.grid.FilterEstimate`.
    """
    h = np.asarray(h, dtype=np.float64)
    k = 2 * half_width + 1
    window = h if h.shape == (k, k) else extract_filter(h, half_width)
    proj = project_simplex(window)
    return FilterEstimate(proj)


def project_P0(
    x: np.ndarray,
    omega: Optional[np.ndarray] = None,
    out: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Projection onto non-negative images that vanish on the disk pixels.

    ``omega`` is a boolean mask broadcastable to ``x`` (already in expanded
    coordinates).  Border pixels are clamped like any other pixel.
    """
    out = np.maximum(x, 0.0, out=out)
    if omega is not None:
        np.putmask(out, np.broadcast_to(omega, out.shape), 0.0)
    return out
