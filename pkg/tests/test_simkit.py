import numpy as np
import pytest

from transitpsf.grid import FilterEstimate
from transitpsf.nonblind import compute_bsnr
from transitpsf.simkit import (
    DEFAULT_CUTOUT_CENTERS,
    SyntheticScenario,
    longrange_constant_check,
    make_gaussian_filter,
    make_power_law_psf,
    make_x_filter,
    simulate_observations,
    solar_texture,
)


def test_gaussian_filter_symmetries():
    iso = make_gaussian_filter(8, 2.0, 2.0, 0.0).data
    assert np.abs(iso - np.rot90(iso)).max() < 1e-12
    h = make_gaussian_filter().data
    assert h.shape == (33, 33) and h.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.abs(h - h.T).max() < 1e-12
    # elongated along one diagonal only
    diag, anti = h[20, 20], h[20, 12]
    assert max(diag, anti) > 5 * min(diag, anti)
    with pytest.raises(ValueError):
        make_gaussian_filter(0)


def test_x_filter_symmetries_and_hand_case():
    h = make_x_filter().data
    assert np.abs(h - h.T).max() < 1e-15 and np.abs(h - np.rot90(h)).max() < 1e-15
    assert isinstance(make_x_filter(), FilterEstimate)
    w = np.exp(-1 / 4.0)
    ref = np.array([[w, 0, w], [0, 2, 0], [w, 0, w]]) / (2 + 4 * w)
    assert np.allclose(make_x_filter(1).data, ref, atol=1e-15)


def test_texture_is_deterministic_copy():
    a = solar_texture()
    a[0, 0] = -1
    b = solar_texture()
    assert b[0, 0] != -1 and b.min() > 0
    assert np.array_equal(b, solar_texture())


def test_cutouts_are_well_separated():
    c = np.asarray(DEFAULT_CUTOUT_CENTERS)
    d = np.abs(c[:, None] - c[None]).max(axis=-1)
    assert d[~np.eye(len(c), dtype=bool)].min() >= 256


def test_simulation_properties():
    sc = SyntheticScenario(make_gaussian_filter(), seed=3)
    sim = simulate_observations(sc)
    assert sim.y.shape == (3, 256, 256)
    om = np.add.outer((np.arange(256) - 128.0) ** 2, (np.arange(256) - 128.0) ** 2) <= 48**2
    assert np.all(sim.x_gt[:, om] == 0)
    assert np.array_equal(simulate_observations(sc).y, sim.y)
    clean = simulate_observations(SyntheticScenario(make_gaussian_filter(), bsnr_db=None))
    assert clean.sigma == 0 and np.array_equal(clean.y, clean.blurred)
    # adding a patch leaves the noise of the others unchanged
    more = simulate_observations(SyntheticScenario(make_gaussian_filter(), seed=3, centers=DEFAULT_CUTOUT_CENTERS))
    assert np.allclose((more.y - more.blurred)[:3] / more.sigma, (sim.y - sim.blurred) / sim.sigma)


def test_empirical_bsnr_within_tolerance():
    h = make_gaussian_filter()
    for seed in range(10):
        sim = simulate_observations(SyntheticScenario(h, seed=seed))
        emp = compute_bsnr(sim.blurred, float(np.std(sim.y - sim.blurred)))
        assert abs(emp - 30.0) <= 0.2


def test_cutout_must_fit():
    with pytest.raises(ValueError):
        simulate_observations(SyntheticScenario(make_gaussian_filter(), centers=[(10, 10)]))


def test_longrange_trivial_cases():
    img = solar_texture(256)
    psf = make_power_law_psf(64, tail_fraction=0.0)
    core_only = np.zeros_like(psf)
    core_only[64, 64] = 1.0
    assert longrange_constant_check(core_only, img, b=16).spread == 0.0
    flat = np.full((300, 300), 5.0)
    chk = longrange_constant_check(make_power_law_psf(64), flat, b=16)
    assert chk.spread <= 1e-9 * chk.mean
    with pytest.raises(ValueError):
        longrange_constant_check(make_power_law_psf(8), img, b=16)
    assert make_power_law_psf(32).sum() == pytest.approx(1.0)
