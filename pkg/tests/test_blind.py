import math

import numpy as np
import pytest
from scipy import ndimage

from transitpsf.blind import (
    RunReport,
    SolverConfig,
    adaptive_sigma,
    alternating_minimization,
    build_problem,
    estimate_mu,
    initial_guess,
    initial_rho,
    iterative_rho,
    noise_bound,
    warm_start_sweep,
    whiteness_measure,
)
from transitpsf.grid import DiskGeometry, delta_filter
from transitpsf.nonblind import compute_rsnr
from transitpsf.simkit import SyntheticScenario, make_gaussian_filter, simulate_observations


def tiny_scenario(bsnr=30.0, blur=True, patches=2, seed=0):
    h = make_gaussian_filter(3, 1.0, 1.5, 45.0)
    centers = [(200, 200), (200, 600), (600, 200)][:patches]
    return SyntheticScenario(h, n=64, centers=centers, disk_center=(32.0, 32.0), radius=12.0, bsnr_db=bsnr, seed=seed, blur=blur)


def test_whiteness_of_white_noise_is_near_zero():
    rng = np.random.default_rng(0)
    vals = [whiteness_measure(rng.standard_normal((256, 256))) for _ in range(5)]
    assert all(-0.01 <= v <= 0 for v in vals)


def test_whiteness_of_correlated_residual_is_low():
    rng = np.random.default_rng(1)
    smooth = ndimage.gaussian_filter(rng.standard_normal((128, 128)), 2.0, mode="wrap")
    assert whiteness_measure(smooth) < -0.5
    ramp = np.add.outer(np.arange(64.0), np.arange(64.0))
    assert whiteness_measure(ramp) < -0.5
    assert whiteness_measure(np.zeros((16, 16))) == -math.inf
    with pytest.raises(ValueError):
        whiteness_measure(np.zeros((4, 4)), window=4)


def test_whiteness_is_scale_and_shift_invariant(rng):
    r = rng.standard_normal((2, 32, 32))
    assert whiteness_measure(3.0 * r + 5.0) == pytest.approx(whiteness_measure(r), rel=1e-12)


def test_noise_bound_formula():
    assert noise_bound(2.0, 100) == pytest.approx(2.0 * math.sqrt(120.0))
    assert noise_bound(1.0, 256 * 256 * 3) ** 2 > 256 * 256 * 3


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(delta=1.0)
    with pytest.raises(ValueError):
        SolverConfig(cp_max_inner=0)
    with pytest.raises(ValueError):
        SolverConfig.from_dict({"bogus": 1})
    cfg = SolverConfig(sigma=2.0)
    assert SolverConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.replace(max_iter=3).max_iter == 3


def test_estimate_mu_on_constant_offset():
    y = np.full((64, 64), 4.0)
    assert estimate_mu([y, y + 2], [DiskGeometry((32, 32), 12)] * 2) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        estimate_mu([y], [DiskGeometry((32, 32), 5)])


def test_initial_rho_rejects_blank_data():
    pb = build_problem(np.zeros((1, 64, 64)), [DiskGeometry((32, 32), 12)], 3)
    with pytest.raises(ValueError):
        initial_rho(pb, 1.0)


def test_build_problem_checks_geometry_count():
    with pytest.raises(ValueError):
        build_problem(np.ones((2, 64, 64)), [DiskGeometry((32, 32), 12)], 3)


def test_initial_guess_is_feasible():
    sim = simulate_observations(tiny_scenario())
    pb = build_problem(sim.y, sim.geometries, 3)
    x0, h0 = initial_guess(pb)
    assert x0.min() >= 0 and np.all(x0[pb.setup.omega] == 0)
    assert np.array_equal(h0.data, delta_filter(3).data)


def test_fixed_point_stops_alternation():
    # without blur, noise or sparsity the trivial pair is already optimal
    sim = simulate_observations(tiny_scenario(bsnr=None, blur=False, patches=1))
    pb = build_problem(sim.y, sim.geometries, 3)
    x0, h0 = initial_guess(pb)
    x0[:, 3:-3, 3:-3] = sim.x_gt
    cfg = SolverConfig(sigma=0.0, max_iter=10, inner_tol=1e-12, fixed_point_tol=1e-6)
    _, h, rep = alternating_minimization(pb, cfg, x0, h0, rho=0.0)
    assert len(rep.records) < cfg.max_iter
    assert compute_rsnr(delta_filter(3), h) > 60.0


def test_iterative_rho_report_structure():
    sim = simulate_observations(tiny_scenario())
    pb = build_problem(sim.y, sim.geometries, 3)
    cfg = SolverConfig(sigma=sim.sigma, max_iter=3, max_rho_iter=2, cp_max_inner=30, apg_max_inner=30)
    x, h, rep = iterative_rho(pb, cfg)
    assert 1 <= len(rep.rounds) <= 2
    assert rep.whiteness == max(r["whiteness"] for r in rep.rounds)
    assert x.shape == (2, 70, 70) and x.min() >= 0 and np.all(x[pb.setup.omega] == 0)
    assert h.data.min() >= 0 and h.data.sum() == pytest.approx(1.0, abs=1e-12)
    assert rep.rounds[0]["rho"] == pytest.approx(initial_rho(pb, sim.sigma))
    if len(rep.rounds) == 2:
        r0 = rep.rounds[0]
        assert rep.rounds[1]["rho"] == pytest.approx(r0["rho"] * r0["noise_bound"] / r0["residual_norm"])
    for rec in rep.records:
        assert rec["lam"] == pytest.approx(rec["rho"] * 0.75 ** (rec["k"] - 1))
    d = rep.to_dict()
    assert "x" not in d and isinstance(d["records"], list)


def test_adaptive_sigma_picks_whitest_candidate():
    sim = simulate_observations(tiny_scenario(patches=1))
    pb = build_problem(sim.y, sim.geometries, 3)
    cfg = SolverConfig(max_iter=2, max_rho_iter=1, cp_max_inner=20, apg_max_inner=20)
    sigma, best, runs = adaptive_sigma(pb, cfg, (1.0, 2.0), threads=2)
    assert set(runs) == {1.0, 2.0}
    assert best.whiteness == max(r.whiteness for r in runs.values())
    assert len(best.sigma_candidates) == 2


def test_warm_start_sweep_runs_each_prefix():
    sim = simulate_observations(tiny_scenario())
    cfg = SolverConfig(sigma=sim.sigma, max_iter=2, max_rho_iter=1, cp_max_inner=20, apg_max_inner=20)
    seen = []
    reps = warm_start_sweep(sim.y, sim.geometries, 3, cfg, callback=lambda p, pb, rep: seen.append((p, pb.n_obs)))
    assert seen == [(1, 1), (2, 2)]
    assert reps[1].x.shape[0] == 2
    assert isinstance(reps[0], RunReport)
