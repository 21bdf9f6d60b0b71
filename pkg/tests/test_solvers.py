import numpy as np
import pytest

from transitpsf.grid import DiskGeometry, ExpandedDomain, FilterEstimate, delta_filter, disk_mask
from transitpsf.nonblind import compute_rsnr
from transitpsf.prox import project_P0, project_simplex_support
from transitpsf.simkit import make_gaussian_filter
from transitpsf.solvers import (
    ProblemSetup,
    estimate_operator_norm,
    filter_objective,
    filter_objective_and_gradient,
    image_objective,
    image_operator_norm,
    solve_filter_step,
    solve_image_step,
)
from transitpsf.wavelet import WaveletDictionary, build_theta


def small_setup(n=24, b=2, disk=True, levels=2):
    dom = ExpandedDomain(n, b)
    d = WaveletDictionary(dom.m, levels)
    geom = DiskGeometry((n / 2, n / 2), n / 6) if disk else None
    sets = build_theta([geom], dom, d)
    omega = None
    if disk:
        eg = dom.expand_geometry(geom)
        omega = disk_mask((dom.m, dom.m), eg.center, eg.inner_radius)[None]
    return ProblemSetup(dom, d, sets.theta, omega), geom


def smooth_scene(m, seed=0, count=1):
    from scipy import ndimage

    rng = np.random.default_rng(seed)
    return np.stack([50 + 20 * ndimage.gaussian_filter(rng.standard_normal((m, m)), 1.5, mode="wrap") for _ in range(count)])


def test_filter_gradient_matches_central_differences():
    setup, _ = small_setup(n=16, b=2)
    rng = np.random.default_rng(0)
    m = setup.domain.m
    x = rng.uniform(0, 2, (1, m, m))
    z = rng.normal(size=(1, 16, 16))
    h_prev = rng.uniform(0, 1, (5, 5))
    h = rng.uniform(0, 1, (5, 5))
    lam = 0.7
    _, g = filter_objective_and_gradient(h, z, x, h_prev, lam, setup)
    f = lambda hh: filter_objective(hh, z, x, h_prev, lam, setup)
    worst = 0.0
    for _ in range(10):
        d = rng.normal(size=(5, 5))
        eps = 1e-5
        fd = (f(h + eps * d) - f(h - eps * d)) / (2 * eps)
        an = float(np.vdot(g, d))
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-12))
    assert worst <= 1e-6


def test_operator_norm_matches_dense_svd():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(7, 5))
    est = estimate_operator_norm(lambda u: a @ u, lambda v: a.T @ v, (5,), iterations=500, rtol=1e-14)
    assert est == pytest.approx(np.linalg.svd(a, compute_uv=False)[0], rel=1e-8)


def test_image_operator_norm_bounds():
    setup, _ = small_setup()
    k = image_operator_norm(setup, delta_filter(2))
    # ||K||^2 <= ||W||^2 + ||crop conv||^2 + ||I||^2 = 3 for a unit-mass kernel
    assert 1.0 <= k <= np.sqrt(3.0) + 1e-9


def test_image_step_identity_filter_without_prior():
    setup, _ = small_setup(disk=False)
    rng = np.random.default_rng(2)
    z = rng.normal(1.0, 1.0, (1, 24, 24))
    x0 = project_P0(setup.domain.expand(z))
    x, st = solve_image_step(z, delta_filter(2), x0, 0.0, 0.0, setup, tol=1e-9, max_inner=3000)
    assert x.min() >= 0.0
    assert np.abs(setup.domain.crop(x) - np.maximum(z, 0)).max() < 1e-3


def test_image_step_decreases_objective_and_is_feasible():
    setup, _ = small_setup()
    h = make_gaussian_filter(2, 1.0, 1.0, 0.0)
    m = setup.domain.m
    x_true = smooth_scene(m)
    x_true[setup.omega] = 0.0
    z = setup.forward(x_true, setup.kernel_hat(h)) + np.random.default_rng(3).normal(0, 0.5, (1, 24, 24))
    x0 = project_P0(setup.domain.expand(z), setup.omega)
    kh = setup.kernel_hat(h)
    f0 = image_objective(x0, z, kh, 0.2, 0.1, x0, setup)
    x, st = solve_image_step(z, h, x0, 0.2, 0.1, setup, tol=1e-7, max_inner=500)
    assert image_objective(x, z, kh, 0.2, 0.1, x0, setup) < f0
    assert x.min() >= 0.0 and np.all(x[setup.omega] == 0.0)
    # warm start from the returned state resumes close to the solution
    x2, st2 = solve_image_step(z, h, x, 0.2, 0.1, setup, tol=1e-7, max_inner=500, state=st)
    assert st2.iterations <= st.iterations


def test_image_step_rejects_negative_weights():
    setup, _ = small_setup()
    z = np.zeros((1, 24, 24))
    with pytest.raises(ValueError):
        solve_image_step(z, delta_filter(2), np.zeros((1, 28, 28)), -1.0, 0.0, setup)


def test_filter_step_recovers_kernel_from_exact_images():
    setup, _ = small_setup(n=32, b=3, disk=False)
    h = make_gaussian_filter(3, 1.0, 1.5, 30.0)
    x = smooth_scene(setup.domain.m, seed=5) + np.random.default_rng(6).uniform(0, 30, (1, 38, 38))
    z = setup.forward(x, setup.kernel_hat(h))
    est, st = solve_filter_step(z, x, delta_filter(3), 0.0, setup, tol=0.0, max_inner=2000)
    assert compute_rsnr(h, est) > 30.0
    objs = np.asarray(st.objectives)
    assert np.all(np.diff(objs) <= 1e-9 * np.abs(objs[:-1]))


def test_filter_step_large_anchor_returns_projected_previous():
    setup, _ = small_setup(n=16, b=2, disk=False)
    rng = np.random.default_rng(7)
    x = rng.uniform(0, 1, (1, 20, 20))
    z = rng.normal(size=(1, 16, 16))
    prev = FilterEstimate(project_simplex_support(rng.uniform(0, 1, (5, 5)), 2).data)
    est, _ = solve_filter_step(z, x, prev, 1e12, setup, tol=1e-12, max_inner=200)
    assert np.abs(est.data - prev.data).max() < 1e-6
    assert est.data.min() >= 0 and est.data.sum() == pytest.approx(1.0, abs=1e-12)
