"""Blind estimation of the PSF core: proximal alternating minimisation.

The outer loop alternates an image step and a filter step, each with a
quadratic cost-to-move term whose weight decays geometrically.  Iterations
stop once the residual stops getting whiter, and the whitest iterate is
returned.  Around it sit the data-driven choice of the sparsity weight
``rho`` (driven by the expected noise energy) and the selection of the noise
level among multiples of a robust estimate.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .grid import (
    DiskGeometry,
    ExpandedDomain,
    FilterEstimate,
    delta_filter,
    disk_mask,
    irfft2,
    rfft2,
)
from .prox import project_P0
from .solvers import NumericalError, ProblemSetup, solve_filter_step, solve_image_step
from .wavelet import WaveletDictionary, build_theta, estimate_sigma_rme

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "RunReport",
    "BlindProblem",
    "whiteness_measure",
    "noise_bound",
    "estimate_mu",
    "build_problem",
    "initial_guess",
    "initial_rho",
    "alternating_minimization",
    "iterative_rho",
    "adaptive_sigma",
    "warm_start_sweep",
]


@dataclass
class SolverConfig:
    """Tuning of the blind estimation.

    ``rho0=None`` lets :func:`iterative_rho` pick the starting weight from
    the data.  ``fixed_point_tol`` ends the alternation early when neither
    the image nor the filter moves any more.
    """

    rho0: Optional[float] = None
    delta: float = 0.75
    max_iter: int = 20
    max_rho_iter: int = 5
    sigma: float = 0.0
    mu: float = 0.0
    whiteness_window: int = 4
    noise_bound_c: float = 2.0
    rho_min: float = 1e-12
    cp_max_inner: int = 300
    apg_max_inner: int = 300
    inner_tol: float = 1e-5
    adaptive_steps: bool = False
    fixed_point_tol: float = 1e-10
    levels: int = 3
    theta_draws: int = 3
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if min(self.max_iter, self.max_rho_iter, self.cp_max_inner, self.apg_max_inner) < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.sigma < 0 or self.whiteness_window < 1:
            raise ValueError("need sigma >= 0 and whiteness_window >= 1")
        if self.rho0 is not None and self.rho0 < 0:
            raise ValueError("rho0 must be non-negative")

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown solver settings: {sorted(unknown)}")
        return cls(**d)


@dataclass
class RunReport:
    """History of a blind run.  Arrays ``x`` and ``h`` are not serialised."""

    records: List[dict] = field(default_factory=list)
    rounds: List[dict] = field(default_factory=list)
    rho: float = float("nan")
    sigma: float = float("nan")
    mu: float = 0.0
    whiteness: float = -math.inf
    best_round: int = 0
    best_k: int = 0
    wall_clock: float = 0.0
    sigma_candidates: List[dict] = field(default_factory=list)
    x: Optional[np.ndarray] = field(default=None, repr=False)
    h: Optional[FilterEstimate] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
            return v

        out = {}
        for f in dataclasses.fields(self):
            if f.name in ("x", "h"):
                continue
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = [{k: clean(x) for k, x in item.items()} for item in v]
            out[f.name] = clean(v)
        return out

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path


# --------------------------------------------------------------------------
# statistics
# --------------------------------------------------------------------------


def whiteness_measure(residual: np.ndarray, window: int = 4) -> float:
    """Distance of the residual autocorrelation from a Kronecker delta.

    Each ``n x n`` residual is normalised to zero mean and unit variance;
    its biased circular autocorrelation ``C`` (so ``C(0, 0) = 1``) gives
    ``M = -sum C(a, b)^2`` over lags ``|a|, |b| <= window`` other than the
    origin.  The result is averaged over the stack.  A residual with zero
    variance yields ``-inf``.
    """
    r = np.asarray(residual, dtype=np.float64)
    if r.ndim == 2:
        r = r[None]
    n0, n1 = r.shape[-2:]
    if window >= min(n0, n1):
        raise ValueError("whiteness window must be smaller than the residual")
    r = r - r.mean(axis=(-2, -1), keepdims=True)
    var = (r * r).mean(axis=(-2, -1))
    if np.any(~(var > 0)):
        return -math.inf
    power = np.abs(rfft2(r)) ** 2
    corr = irfft2(power, n0) if n0 == n1 else np.fft.irfft2(power, s=(n0, n1))
    corr /= (n0 * n1 * var)[:, None, None]
    lags = np.r_[0 : window + 1, -window:0]
    block = corr[:, lags[:, None], lags[None, :]]
    per_image = -((block**2).sum(axis=(-2, -1)) - block[:, 0, 0] ** 2)
    return float(per_image.mean())


def noise_bound(sigma: float, count: int, c: float = 2.0) -> float:
    """High-probability bound on the Frobenius norm of ``count`` noise samples.

    ``sigma * sqrt(count + c * sqrt(count))``.
    """
    return float(sigma * math.sqrt(count + c * math.sqrt(count)))


def estimate_mu(
    patches: Sequence[np.ndarray], geoms: Sequence[DiskGeometry], inner_radius: float = 10.0
) -> float:
    """Mean intensity on small disks at the disk centres, averaged over patches."""
    if len(patches) != len(geoms) or not patches:
        raise ValueError("need one geometry per patch")
    means = []
    for y, g in zip(patches, geoms):
        y = np.asarray(y, dtype=np.float64)
        if g.radius < inner_radius:
            raise ValueError(f"disk radius {g.radius} is smaller than the sampling radius {inner_radius}")
        g.check_inside(y.shape[-1])
        means.append(float(y[disk_mask(y.shape, g.center, inner_radius)].mean()))
    return float(np.mean(means))


# --------------------------------------------------------------------------
# problem assembly
# --------------------------------------------------------------------------


@dataclass
class BlindProblem:
    """Modified observations ``z = y - mu`` and the fixed operators."""

    z: np.ndarray
    setup: ProblemSetup
    geoms: List[Optional[DiskGeometry]]

    @property
    def domain(self) -> ExpandedDomain:
        return self.setup.domain

    @property
    def n_obs(self) -> int:
        return self.z.shape[0]

    @property
    def b(self) -> int:
        return self.setup.domain.b


def build_problem(
    y: np.ndarray,
    geoms: Sequence[Optional[DiskGeometry]],
    b: int,
    mu: float = 0.0,
    levels: int = 3,
    prefilter: Optional[np.ndarray] = None,
    theta_draws: int = 3,
    seed: int = 0,
) -> BlindProblem:
    """Subtract ``mu`` and derive the disk pixels and penalised coefficients."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 2:
        y = y[None]
    if y.ndim != 3 or y.shape[1] != y.shape[2]:
        raise ValueError(f"observations must be a stack of square patches, got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("observations contain non-finite values")
    if len(geoms) != y.shape[0]:
        raise ValueError(f"{len(geoms)} geometries for {y.shape[0]} observations")
    n = y.shape[-1]
    domain = ExpandedDomain(n, b)
    dictionary = WaveletDictionary(domain.m, levels)
    omega = np.zeros((y.shape[0], domain.m, domain.m), dtype=bool)
    for j, g in enumerate(geoms):
        if g is not None:
            g.check_inside(n)
            eg = domain.expand_geometry(g)
            omega[j] = disk_mask((domain.m, domain.m), eg.center, eg.inner_radius)
    sets = build_theta(list(geoms), domain, dictionary, draws=theta_draws, seed=seed)
    setup = ProblemSetup(domain, dictionary, sets.theta, omega, prefilter)
    return BlindProblem(y - mu, setup, list(geoms))


def initial_guess(problem: BlindProblem) -> Tuple[np.ndarray, FilterEstimate]:
    """Trivial solution: the (padded, projected) observations and a delta filter."""
    x0 = project_P0(problem.domain.expand(problem.z), problem.setup.omega)
    return x0, delta_filter(problem.b)


def initial_rho(problem: BlindProblem, sigma: float) -> float:
    """Starting sparsity weight ``sqrt(2) sigma^2 / tau``.

    ``tau`` is the mean absolute penalised wavelet coefficient of the data,
    times ``sqrt(2)``.
    """
    setup = problem.setup
    coeffs = setup.select(problem.domain.zero_insert(problem.z))
    count = float(setup.theta.sum())
    total = float(np.abs(coeffs).sum())
    if count == 0 or total == 0:
        raise ValueError("observations carry no usable wavelet detail (tau = 0)")
    tau = math.sqrt(2.0) * total / count
    return math.sqrt(2.0) * sigma**2 / tau


def _total_objective(setup: ProblemSetup, r: np.ndarray, x: np.ndarray, rho: float) -> float:
    val = 0.5 * float(np.vdot(r, r))
    if rho > 0:
        val += rho * setup.sparsity(x)
    return val


# --------------------------------------------------------------------------
# outer loops
# --------------------------------------------------------------------------


def alternating_minimization(
    problem: BlindProblem,
    config: SolverConfig,
    x0: np.ndarray,
    h0: FilterEstimate,
    rho: Optional[float] = None,
    report: Optional[RunReport] = None,
    round_index: int = 1,
    trace: Optional[Callable[[dict], None]] = None,
) -> Tuple[np.ndarray, FilterEstimate, RunReport]:
    """Alternate image and filter steps until the residual whiteness drops.

    Cost-to-move weights start at ``rho`` and shrink by ``config.delta``
    after every outer iteration.  Returns the iterate with the largest
    whiteness measure.
    """
    setup, z = problem.setup, problem.z
    rho = config.rho0 if rho is None else rho
    if rho is None:
        raise ValueError("rho is required (pass it or set config.rho0)")
    report = RunReport() if report is None else report
    lam = rho
    x, h = np.asarray(x0, dtype=np.float64), h0
    cp_state, apg_step = None, None
    best = None
    prev_m = -math.inf

    for k in range(1, config.max_iter + 1):
        x_new, cp_state = solve_image_step(
            z, h, x, rho, lam, setup,
            tol=config.inner_tol, max_inner=config.cp_max_inner, state=cp_state,
            adaptive=config.adaptive_steps, trace=trace, outer_index=k,
        )
        h_new, apg = solve_filter_step(
            z, x_new, h, lam, setup,
            tol=config.inner_tol, max_inner=config.apg_max_inner, step=apg_step,
            trace=trace, outer_index=k,
        )
        apg_step = apg.step
        r = setup.residual(z, x_new, h_new)
        m_k = whiteness_measure(r, config.whiteness_window)
        res_norm = float(np.linalg.norm(r))
        obj = _total_objective(setup, r, x_new, rho)
        if not math.isfinite(obj):
            raise NumericalError(f"non-finite objective at outer iteration {k}", {"records": report.records})
        report.records.append(
            {
                "round": round_index,
                "k": k,
                "rho": rho,
                "lam": lam,
                "objective": obj,
                "residual_norm": res_norm,
                "whiteness": m_k,
                "cp_iterations": cp_state.iterations,
                "apg_iterations": apg.iterations,
            }
        )
        log.info("round %d k=%d rho=%.4g M=%.5f |R|=%.4g", round_index, k, rho, m_k, res_norm)
        if best is None or m_k > best[2]:
            best = (x_new, h_new, m_k, k, res_norm)

        if k > 1 and m_k < prev_m:
            break
        still = np.linalg.norm(x_new - x) <= config.fixed_point_tol * max(np.linalg.norm(x), 1e-300)
        if still and np.linalg.norm(h_new.data - h.data) <= config.fixed_point_tol:
            break
        x, h, prev_m = x_new, h_new, m_k
        lam *= config.delta

    report.x, report.h = best[0], best[1]
    report.whiteness, report.best_k = best[2], best[3]
    report.rho = rho
    return best[0], best[1], report


def iterative_rho(
    problem: BlindProblem,
    config: SolverConfig,
    x0: Optional[np.ndarray] = None,
    h0: Optional[FilterEstimate] = None,
    rho: Optional[float] = None,
    trace: Optional[Callable[[dict], None]] = None,
) -> Tuple[np.ndarray, FilterEstimate, RunReport]:
    """Rescale ``rho`` until the residual energy matches the noise bound.

    Each round runs :func:`alternating_minimization` warm-started from the
    previous round; afterwards ``rho`` is multiplied by ``eps / ||R||``.
    Rounds stop when the whiteness decreases; the whitest round is returned.
    """
    t0 = time.perf_counter()
    sigma = config.sigma
    count = problem.z.size
    eps = noise_bound(sigma, count, config.noise_bound_c)
    if rho is None:
        rho = config.rho0 if config.rho0 is not None else initial_rho(problem, sigma)
    rho = max(rho, config.rho_min)
    if x0 is None or h0 is None:
        gx, gh = initial_guess(problem)
        x0 = gx if x0 is None else x0
        h0 = gh if h0 is None else h0

    report = RunReport(sigma=sigma, mu=config.mu)
    x, h = x0, h0
    best = None
    prev_m = -math.inf
    for l in range(1, config.max_rho_iter + 1):
        sub = RunReport()
        xr, hr, sub = alternating_minimization(problem, config, x, h, rho, sub, l, trace)
        report.records.extend(sub.records)
        r = problem.setup.residual(problem.z, xr, hr)
        eps_l = float(np.linalg.norm(r))
        m_l = sub.whiteness
        report.rounds.append(
            {"round": l, "rho": rho, "residual_norm": eps_l, "noise_bound": eps, "whiteness": m_l, "best_k": sub.best_k}
        )
        if best is None or m_l > best[2]:
            best = (xr, hr, m_l, l, rho, sub.best_k)
        if l > 1 and m_l < prev_m:
            break
        prev_m = m_l
        x, h = xr, hr
        if l < config.max_rho_iter:
            rho = max(rho * eps / eps_l, config.rho_min) if eps_l > 0 else config.rho_min

    report.x, report.h, report.whiteness = best[0], best[1], best[2]
    report.best_round, report.rho, report.best_k = best[3], best[4], best[5]
    report.wall_clock = time.perf_counter() - t0
    return best[0], best[1], report


def adaptive_sigma(
    problem: BlindProblem,
    config: SolverConfig,
    multipliers: Sequence[float] = (1.0, 2.0, 3.0),
    sigma_base: Optional[float] = None,
    threads: int = 1,
    x0: Optional[np.ndarray] = None,
    h0: Optional[FilterEstimate] = None,
) -> Tuple[float, RunReport, Dict[float, RunReport]]:
    """Run :func:`iterative_rho` for multiples of a robust noise estimate.

    ``sigma_base`` defaults to the robust estimate from the first
    observation.  The candidate with the largest final whiteness wins.
    Candidates are independent and run on ``threads`` workers.
    """
    if not multipliers:
        raise ValueError("need at least one sigma multiplier")
    if sigma_base is None:
        sigma_base = estimate_sigma_rme(problem.z[0])
    t0 = time.perf_counter()

    def run(mult):
        cfg = config.replace(sigma=float(mult) * sigma_base)
        return iterative_rho(problem, cfg, x0, h0)[2]

    if threads > 1 and len(multipliers) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(run, multipliers))
    else:
        reports = [run(m) for m in multipliers]

    results = dict(zip(multipliers, reports))
    best_mult = max(multipliers, key=lambda mm: results[mm].whiteness)
    best = results[best_mult]
    best.sigma_candidates = [
        {"multiplier": float(mm), "sigma": float(mm) * sigma_base, "whiteness": results[mm].whiteness, "rho": results[mm].rho}
        for mm in multipliers
    ]
    best.wall_clock = time.perf_counter() - t0
    return float(best_mult) * sigma_base, best, results


def warm_start_sweep(
    y: np.ndarray,
    geoms: Sequence[Optional[DiskGeometry]],
    b: int,
    config: SolverConfig,
    prefilter: Optional[np.ndarray] = None,
    carry_rho: bool = True,
    trace: Optional[Callable[[dict], None]] = None,
    callback: Optional[Callable[[int, BlindProblem, RunReport], None]] = None,
) -> List[RunReport]:
    """Estimate with the first 1, 2, ..., P observations in turn.

    Each run starts from the previous one: its images for the patches seen
    so far, the trivial guess for the new patch, its filter and, when
    ``carry_rho``, its final ``rho``.  Returns one report per ``P``.
    """
    y = np.asarray(y, dtype=np.float64)
    reports: List[RunReport] = []
    prev: Optional[RunReport] = None
    for p in range(1, y.shape[0] + 1):
        problem = build_problem(
            y[:p], geoms[:p], b, config.mu, config.levels, prefilter, config.theta_draws, config.seed
        )
        x0, h0 = initial_guess(problem)
        rho = None
        if prev is not None:
            x0[: p - 1] = prev.x
            h0 = prev.h
            rho = prev.rho if carry_rho else None
        _, _, rep = iterative_rho(problem, config, x0, h0, rho, trace)
        if callback is not None:
            callback(p, problem, rep)
        reports.append(rep)
        prev = rep
    return reports
