"""Inner solvers of the alternating scheme.

Image step
    ``min_X rho ||S_theta W^T X||_1 + 1/2 ||Z - S_N Phi(h) X||^2
    + lam/2 ||X - X_prev||^2`` subject to ``X >= 0`` and ``X = 0`` on the
    disk pixels.  Solved with a primal-dual (Chambolle-Pock) iteration with
    one dual block per term, ``K = [S_theta W^T; S_N Phi(h); I]``.

Filter step
    ``min_h 1/2 sum_j ||z_j - S_N Phi(x_j) h||^2 + lam/2 ||h - h_prev||^2``
    over the probability simplex on the ``(2b+1)^2`` window.  Solved with an
    accelerated proximal gradient method (momentum ``t / (t + 3)``) and a
    backtracking line search, with a monotone restart safeguard.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .grid import (
    ExpandedDomain,
    FilterEstimate,
    embed_filter,
    extract_filter,
    irfft2,
    rfft2,
)
from .prox import (
    conj_prox_cost_to_move,
    conj_prox_l1,
    conj_prox_quadratic_fidelity,
    project_P0,
    project_simplex,
)
from .wavelet import WaveletDictionary

log = logging.getLogger(__name__)

__all__ = [
    "NumericalError",
    "ProblemSetup",
    "CPState",
    "APGState",
    "estimate_operator_norm",
    "image_operator_norm",
    "image_objective",
    "solve_image_step",
    "filter_objective",
    "filter_objective_and_gradient",
    "solve_filter_step",
]

Trace = Optional[Callable[[dict], None]]


class NumericalError(RuntimeError):
    """Raised when a solver produces non-finite values or diverges.

    ``dump`` carries the iteration history collected so far.
    """

    def __init__(self, message: str, dump: Optional[dict] = None):
        super().__init__(message)
        self.dump = dump or {}


@dataclass
class ProblemSetup:
    """Everything fixed across the outer iterations for one set of observations.

    ``theta`` selects the penalised detail coefficients, shape
    ``(P, n_details, m, m)``; ``omega`` marks the known-zero pixels in expanded
    coordinates, shape ``(P, m, m)`` (or ``None``).  ``prefilter`` is an
    optional known parametric PSF, centred, convolved with the estimated core.
    """

    domain: ExpandedDomain
    dictionary: WaveletDictionary
    theta: np.ndarray
    omega: Optional[np.ndarray] = None
    prefilter: Optional[np.ndarray] = None
    _theta_f: np.ndarray = field(init=False, repr=False)
    _pre_hat: Optional[np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        m = self.domain.m
        if self.dictionary.side != m:
            raise ValueError("dictionary side must match the expanded domain")
        if self.theta.shape[-3:] != (self.dictionary.n_details, m, m):
            raise ValueError(f"theta has shape {self.theta.shape}")
        if self.omega is not None and self.omega.shape[-2:] != (m, m):
            raise ValueError(f"omega has shape {self.omega.shape}")
        self._theta_f = self.theta.astype(np.float64)
        self._pre_hat = None
        if self.prefilter is not None:
            pre = np.asarray(self.prefilter, dtype=np.float64)
            if pre.shape != (m, m):
                pre = embed_filter(pre, m)
            self._pre_hat = rfft2(pre)

    @property
    def n_obs(self) -> int:
        return self.theta.shape[0]

    def kernel_hat(self, h: np.ndarray | FilterEstimate) -> np.ndarray:
        data = h.data if isinstance(h, FilterEstimate) else np.asarray(h, dtype=np.float64)
        spec = rfft2(embed_filter(data, self.domain.m))
        if self._pre_hat is not None:
            spec = spec * self._pre_hat
        return spec

    def forward(self, x: np.ndarray, kernel_hat: np.ndarray) -> np.ndarray:
        return self.domain.crop(irfft2(rfft2(x) * kernel_hat, self.domain.m))

    def residual(self, z: np.ndarray, x: np.ndarray, h) -> np.ndarray:
        return z - self.forward(x, self.kernel_hat(h))

    def sparsity(self, x: np.ndarray) -> float:
        """``||S_theta W^T x||_1`` summed over observations."""
        return float(np.abs(self.dictionary.analyze_details(x) * self._theta_f).sum())

    def select(self, x: np.ndarray) -> np.ndarray:
        """Selected detail coefficients of ``x`` (zero outside theta)."""
        return self.dictionary.analyze_details(x) * self._theta_f


# --------------------------------------------------------------------------
# operator norm
# --------------------------------------------------------------------------


def estimate_operator_norm(
    apply: Callable[[np.ndarray], object],
    adjoint: Callable[[object], np.ndarray],
    shape: Tuple[int, ...],
    iterations: int = 50,
    seed: int = 0,
    rtol: float = 1e-9,
    start: Optional[np.ndarray] = None,
    return_vector: bool = False,
):
    """Largest singular value of a linear map by power iteration on ``K^T K``.

    ``apply`` may return any object ``adjoint`` understands (e.g. a tuple of
    blocks).  The raw estimate is returned; callers add a safety margin.
    ``start`` replaces the seeded random starting vector (warm start).
    """
    if start is not None and start.shape == tuple(shape) and np.any(start):
        u = start / np.linalg.norm(start)
    else:
        u = np.random.default_rng(seed).standard_normal(shape)
        u /= np.linalg.norm(u)
    est = 0.0
    for _ in range(iterations):
        w = adjoint(apply(u))
        nrm = float(np.linalg.norm(w))
        if nrm == 0.0:
            est = 0.0
            break
        u = w / nrm
        new = np.sqrt(nrm)
        if abs(new - est) <= rtol * new:
            est = new
            break
        est = new
    return (est, u) if return_vector else est


class _ImageOperator:
    """The stacked map ``K`` of the image step for a fixed kernel."""

    def __init__(self, setup: ProblemSetup, kernel_hat: np.ndarray):
        self.setup = setup
        self.kh = kernel_hat
        self.kh_conj = np.conj(kernel_hat)
        self.m = setup.domain.m

    def apply_hat(self, u_hat: np.ndarray):
        s = self.setup
        w = s.dictionary.analyze_details(None, x_hat=u_hat)
        w *= s._theta_f
        pred = s.domain.crop(irfft2(u_hat * self.kh, self.m))
        return w, pred

    def apply(self, u: np.ndarray):
        w, pred = self.apply_hat(rfft2(u))
        return w, pred, u

    def adjoint(self, blocks) -> np.ndarray:
        v1, v2, v3 = blocks
        s = self.setup
        acc = s.dictionary.synthesize_details_hat(v1 * s._theta_f)
        acc += rfft2(s.domain.zero_insert(v2)) * self.kh_conj
        return irfft2(acc, self.m) + v3


def image_operator_norm(setup: ProblemSetup, h, iterations: int = 30, seed: int = 0) -> float:
    """Power-iteration estimate of ``||K||`` for the image step (no safety factor)."""
    op = _ImageOperator(setup, setup.kernel_hat(h))
    shape = (setup.n_obs, setup.domain.m, setup.domain.m)
    return estimate_operator_norm(op.apply, op.adjoint, shape, iterations, seed)


# --------------------------------------------------------------------------
# image step
# --------------------------------------------------------------------------


@dataclass
class CPState:
    """Primal-dual iterates, kept between outer iterations for warm starts."""

    u: np.ndarray
    u_bar: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray
    nu: float = 0.0
    beta: float = 0.0
    t: int = 0
    objectives: List[float] = field(default_factory=list)
    iterations: int = 0
    # last power-iteration vector, reused as the next starting point
    power_vec: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def zeros(cls, x0: np.ndarray, setup: ProblemSetup) -> "CPState":
        p, m, n = x0.shape[0], setup.domain.m, setup.domain.n
        nd = setup.dictionary.n_details
        return cls(
            u=x0.copy(),
            u_bar=x0.copy(),
            v1=np.zeros((p, nd, m, m)),
            v2=np.zeros((p, n, n)),
            v3=np.zeros((p, m, m)),
        )


def image_objective(
    x: np.ndarray,
    z: np.ndarray,
    kernel_hat: np.ndarray,
    rho: float,
    lam: float,
    x_prev: Optional[np.ndarray],
    setup: ProblemSetup,
) -> float:
    r = z - setup.forward(x, kernel_hat)
    val = 0.5 * float(np.vdot(r, r))
    if rho > 0:
        val += rho * setup.sparsity(x)
    if lam > 0 and x_prev is not None:
        d = x - x_prev
        val += 0.5 * lam * float(np.vdot(d, d))
    return val


def solve_image_step(
    z: np.ndarray,
    h,
    x_prev: np.ndarray,
    rho: float,
    lam: float,
    setup: ProblemSetup,
    tol: float = 1e-5,
    max_inner: int = 300,
    state: Optional[CPState] = None,
    adaptive: bool = False,
    check_every: int = 25,
    divergence_factor: float = 10.0,
    trace: Trace = None,
    outer_index: int = 0,
) -> Tuple[np.ndarray, CPState]:
    """Approximately solve the image sub-problem.

    Parameters
    ----------
    z : (P, n, n) array
        Modified observations.
    h : FilterEstimate or centred array
        Current PSF core.
    x_prev : (P, m, m) array
        Previous image iterate, anchor of the cost-to-move term and starting
        point of the primal variable.
    state : CPState, optional
        Dual variables from the previous outer iteration (warm start).

    Returns
    -------
    x : (P, m, m) array
        New iterate, exactly feasible.
    state : CPState
    """
    if rho < 0 or lam < 0:
        raise ValueError("rho and lam must be non-negative")
    z = np.asarray(z, dtype=np.float64)
    x_prev = np.asarray(x_prev, dtype=np.float64)
    domain = setup.domain
    omega = setup.omega

    kh = setup.kernel_hat(h)
    op = _ImageOperator(setup, kh)

    x0 = project_P0(x_prev, omega)
    if state is None or state.u.shape != x0.shape:
        state = CPState.zeros(x0, setup)
    else:
        state.u = x0.copy()
        state.u_bar = x0.copy()
    knorm, state.power_vec = estimate_operator_norm(
        op.apply, op.adjoint, x_prev.shape, iterations=30, rtol=1e-6,
        start=state.power_vec, return_vector=True,
    )
    knorm *= 1.05
    if not adaptive or state.nu <= 0:
        state.nu = state.beta = 0.99 / knorm
    nu, beta = state.nu, state.beta

    u, u_bar = state.u, state.u_bar
    v1, v2, v3 = state.v1, state.v2, state.v3
    theta_f = setup._theta_f
    m = domain.m

    obj0 = image_objective(u, z, kh, rho, lam, x_prev, setup)
    history = [obj0]
    if not np.isfinite(obj0):
        raise NumericalError("non-finite objective at the start of the image step", {"objectives": history})

    t = 0
    change = np.inf
    u_norm = max(float(np.linalg.norm(u)), 1e-300)
    for t in range(1, max_inner + 1):
        ub_hat = rfft2(u_bar)
        w = setup.dictionary.analyze_details(None, x_hat=ub_hat)
        w *= nu
        w *= theta_f
        v1_old = v1.copy() if adaptive else None
        v1 += w
        conj_prox_l1(v1, rho, out=v1)
        pred = domain.crop(irfft2(ub_hat * kh, m))
        v2_old, v3_old = (v2, v3) if adaptive else (None, None)
        v2 = conj_prox_quadratic_fidelity(v2 + nu * pred, z, nu)
        v3 = conj_prox_cost_to_move(v3 + nu * u_bar, x_prev, lam, nu)

        kt = setup.dictionary.synthesize_details_hat(v1)
        kt += rfft2(domain.zero_insert(v2)) * op.kh_conj
        kt = irfft2(kt, m)
        kt += v3
        u_new = u - beta * kt
        project_P0(u_new, omega, out=u_new)

        diff = u_new - u
        dnorm = float(np.linalg.norm(diff))
        u_norm = max(float(np.linalg.norm(u_new)), 1e-300)
        change = dnorm / u_norm

        if adaptive:
            nu, beta = _balance_steps(op, diff, v1 - v1_old, v2 - v2_old, v3 - v3_old, nu, beta)

        u_bar = u_new + diff
        u = u_new

        if t % check_every == 0 or change <= tol or t == max_inner:
            obj = image_objective(u, z, kh, rho, lam, x_prev, setup)
            history.append(obj)
            if trace is not None:
                trace({"solver": "cp", "k": outer_index, "t": t, "objective": obj, "primal_change": change, "step": nu})
            if not np.isfinite(obj):
                raise NumericalError(
                    f"non-finite objective at CP iteration {t}",
                    {"objectives": history, "t": t, "primal_change": change},
                )
            if obj0 > 0 and obj > divergence_factor * obj0:
                raise NumericalError(
                    f"image step diverging: objective {obj:.4g} > {divergence_factor} x {obj0:.4g}",
                    {"objectives": history, "t": t},
                )
        if change <= tol:
            break

    state.u, state.u_bar, state.v1, state.v2, state.v3 = u, u_bar, v1, v2, v3
    state.nu, state.beta = nu, beta
    state.t += t
    state.iterations = t
    state.objectives = history
    log.debug("image step: %d CP iterations, rel. change %.2e", t, change)
    return u.copy(), state


def _balance_steps(op, du, dv1, dv2, dv3, nu, beta, ratio=2.0, alpha=0.1):
    """Residual-balancing step adaptation keeping ``nu * beta`` fixed."""
    kdu = op.apply(du)
    primal = du / beta - op.adjoint((dv1, dv2, dv3))
    p = float(np.linalg.norm(primal))
    d = np.sqrt(
        sum(float(np.linalg.norm(dv / nu - k) ** 2) for dv, k in zip((dv1, dv2, dv3), kdu))
    )
    if p > ratio * d:
        return nu * (1 - alpha), beta / (1 - alpha)
    if d > ratio * p:
        return nu / (1 - alpha), beta * (1 - alpha)
    return nu, beta


# --------------------------------------------------------------------------
# filter step
# --------------------------------------------------------------------------


@dataclass
class APGState:
    u: np.ndarray
    u_prev: np.ndarray
    step: float
    t: int = 0
    objectives: List[float] = field(default_factory=list)
    backtracks: int = 0
    restarts: int = 0
    iterations: int = 0

    @staticmethod
    def momentum(t: int) -> float:
        return t / (t + 3.0)


class _FilterProblem:
    """Smooth part of the filter sub-problem with FFT-cached images."""

    def __init__(self, z, x, h_prev, lam, setup: ProblemSetup):
        self.setup = setup
        self.domain = setup.domain
        self.z = np.asarray(z, dtype=np.float64)
        self.half = h_prev.shape[-1] // 2
        self.h_prev = h_prev
        self.lam = lam
        x_hat = rfft2(np.asarray(x, dtype=np.float64))
        if setup._pre_hat is not None:
            x_hat = x_hat * setup._pre_hat
        self.x_hat = x_hat
        self.x_hat_conj = np.conj(x_hat)

    def residuals(self, h: np.ndarray) -> np.ndarray:
        m = self.domain.m
        k_hat = rfft2(embed_filter(h, m))
        pred = self.domain.crop(irfft2(self.x_hat * k_hat, m))
        return pred - self.z

    def value(self, h: np.ndarray, r: Optional[np.ndarray] = None) -> float:
        if r is None:
            r = self.residuals(h)
        d = h - self.h_prev
        return 0.5 * float(np.vdot(r, r)) + 0.5 * self.lam * float(np.vdot(d, d))

    def gradient(self, h: np.ndarray, r: Optional[np.ndarray] = None) -> np.ndarray:
        if r is None:
            r = self.residuals(h)
        m = self.domain.m
        acc = (rfft2(self.domain.zero_insert(r)) * self.x_hat_conj).sum(axis=0)
        g = extract_filter(irfft2(acc, m), self.half)
        return g + self.lam * (h - self.h_prev)

    def hessian(self, d: np.ndarray) -> np.ndarray:
        """Curvature of the data term along ``d`` (the term is quadratic)."""
        m = self.domain.m
        pred = self.domain.crop(irfft2(self.x_hat * rfft2(embed_filter(d, m)), m))
        acc = (rfft2(self.domain.zero_insert(pred)) * self.x_hat_conj).sum(axis=0)
        return extract_filter(irfft2(acc, m), self.half)

    def lipschitz(self, iterations: int = 30, seed: int = 0) -> float:
        """Curvature bound along zero-sum filters, the directions the simplex allows.

        The low-frequency image power dominates the full Hessian but is
        invisible to mass-preserving updates, so it is projected out.
        """
        d = np.random.default_rng(seed).standard_normal(self.h_prev.shape)
        d -= d.mean()
        d /= np.linalg.norm(d)
        est = 0.0
        for _ in range(iterations):
            w = self.hessian(d)
            w -= w.mean()
            new = float(np.linalg.norm(w))
            if new == 0.0:
                break
            d = w / new
            if abs(new - est) <= 1e-6 * new:
                est = new
                break
            est = new
        return est + self.lam


def filter_objective(h, z, x, h_prev, lam, setup: ProblemSetup) -> float:
    h = np.asarray(getattr(h, "data", h), dtype=np.float64)
    h_prev = np.asarray(getattr(h_prev, "data", h_prev), dtype=np.float64)
    return _FilterProblem(z, x, h_prev, lam, setup).value(h)


def filter_objective_and_gradient(h, z, x, h_prev, lam, setup: ProblemSetup):
    """Value and gradient of the smooth part of the filter sub-problem."""
    h = np.asarray(getattr(h, "data", h), dtype=np.float64)
    h_prev = np.asarray(getattr(h_prev, "data", h_prev), dtype=np.float64)
    prob = _FilterProblem(z, x, h_prev, lam, setup)
    r = prob.residuals(h)
    return prob.value(h, r), prob.gradient(h, r)


def solve_filter_step(
    z: np.ndarray,
    x: np.ndarray,
    h_prev,
    lam: float,
    setup: ProblemSetup,
    tol: float = 1e-5,
    max_inner: int = 300,
    step: Optional[float] = None,
    monotone: bool = True,
    trace: Trace = None,
    outer_index: int = 0,
) -> Tuple[FilterEstimate, APGState]:
    """Accelerated projected gradient on the simplex for the filter core.

    ``step`` is the last accepted step of a previous call; the line search
    starts from twice that value.
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    h0 = np.asarray(getattr(h_prev, "data", h_prev), dtype=np.float64)
    prob = _FilterProblem(z, x, h0, lam, setup)
    if step is None or step <= 0:
        step = 1.0 / max(1.05 * prob.lipschitz(), 1e-300)

    u = project_simplex(h0)
    r_u = prob.residuals(u)
    f_u = prob.value(u, r_u)
    state = APGState(u=u, u_prev=u.copy(), step=step, objectives=[f_u])
    mom_t = 0
    change = np.inf
    it = 0
    for it in range(1, max_inner + 1):
        beta = APGState.momentum(mom_t)
        v = u + beta * (u - state.u_prev) if beta > 0 else u
        r_v = prob.residuals(v) if beta > 0 else r_u
        f_v = prob.value(v, r_v)
        g_v = prob.gradient(v, r_v)
        if not (np.isfinite(f_v) and np.all(np.isfinite(g_v))):
            raise NumericalError(
                f"non-finite filter gradient at APG iteration {it}",
                {"objectives": state.objectives},
            )

        nu = 2.0 * state.step
        while True:
            cand = project_simplex(v - nu * g_v)
            d = cand - v
            r_c = prob.residuals(cand)
            f_c = prob.value(cand, r_c)
            bound = f_v + float(np.vdot(g_v, d)) + float(np.vdot(d, d)) / (2.0 * nu)
            if f_c <= bound + 1e-12 * abs(bound) or nu < 1e-300:
                break
            nu *= 0.5
            state.backtracks += 1
        state.step = nu

        if monotone and f_c > f_u:
            # restart the momentum from the current point
            state.restarts += 1
            state.u_prev = u
            mom_t = 0
            if beta == 0:
                break
            continue

        change = float(np.linalg.norm(cand - u)) / max(float(np.linalg.norm(cand)), 1e-300)
        state.u_prev, u, r_u, f_u = u, cand, r_c, f_c
        state.objectives.append(f_u)
        mom_t += 1
        if trace is not None:
            trace({"solver": "apg", "k": outer_index, "t": it, "objective": f_u, "primal_change": change, "step": nu})
        if change <= tol:
            break

    state.u = u
    state.iterations = it
    log.debug("filter step: %d APG iterations, rel. change %.2e", it, change)
    return FilterEstimate(u), state
