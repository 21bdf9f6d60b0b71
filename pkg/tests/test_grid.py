import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from transitpsf.grid import (
    DiskGeometry,
    ExpandedDomain,
    FilterEstimate,
    adjoint_operator,
    convolve_circular,
    correlate_circular,
    delta_filter,
    derive_omega,
    disk_mask,
    embed_filter,
    extract_filter,
    forward_operator,
)


def direct_circular_convolution(x, k):
    """Textbook O(n^4) circular convolution, independent of any FFT."""
    n = x.shape[0]
    out = np.zeros_like(x)
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for a in range(n):
                for c in range(n):
                    acc += k[a, c] * x[(i - a) % n, (j - c) % n]
            out[i, j] = acc
    return out


def direct_linear_observation(x_exp, h, n, b):
    """Observation window of a linear convolution, by explicit summation."""
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            ii, jj = i + b, j + b
            out[i, j] = np.sum(h[::-1, ::-1] * x_exp[ii - b : ii + b + 1, jj - b : jj + b + 1])
    return out


def test_fft_convolution_matches_direct_sum_on_50_instances():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(3, 9))
        x = rng.standard_normal((n, n))
        k = rng.standard_normal((n, n))
        ref = direct_circular_convolution(x, k)
        got = convolve_circular(x, k)
        worst = max(worst, np.linalg.norm(got - ref) / np.linalg.norm(ref))
    assert worst <= 1e-10


def test_forward_operator_is_linear_convolution_crop():
    rng = np.random.default_rng(1)
    for _ in range(10):
        n, b = int(rng.integers(4, 10)), int(rng.integers(1, 4))
        dom = ExpandedDomain(n, b)
        x = rng.standard_normal((dom.m, dom.m))
        h = rng.standard_normal((2 * b + 1, 2 * b + 1))
        ref = direct_linear_observation(x, h, n, b)
        got = forward_operator(x, h, dom)
        assert np.linalg.norm(got - ref) <= 1e-10 * np.linalg.norm(ref)


def test_adjoint_dot_products():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n, b = int(rng.integers(4, 20)), int(rng.integers(1, 5))
        dom = ExpandedDomain(n, b)
        x = rng.standard_normal((dom.m, dom.m))
        y = rng.standard_normal((n, n))
        h = rng.standard_normal((2 * b + 1, 2 * b + 1))
        lhs = np.vdot(forward_operator(x, h, dom), y)
        rhs = np.vdot(x, adjoint_operator(y, h, dom))
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0) * 10

        k = rng.standard_normal((dom.m, dom.m))
        u = rng.standard_normal((dom.m, dom.m))
        assert abs(np.vdot(convolve_circular(x, k), u) - np.vdot(x, correlate_circular(u, k))) <= 1e-10 * np.abs(
            np.vdot(convolve_circular(x, k), u)
        ) + 1e-9


def test_crop_and_zero_insert_are_adjoint(rng):
    dom = ExpandedDomain(12, 3)
    x = rng.standard_normal((dom.m, dom.m))
    y = rng.standard_normal((12, 12))
    assert np.vdot(dom.crop(x), y) == pytest.approx(np.vdot(x, dom.zero_insert(y)), rel=1e-12)


@given(st.integers(1, 6), st.integers(0, 5))
def test_embed_extract_round_trip(b, extra):
    side = 2 * b + 1 + extra
    h = np.random.default_rng(b * 31 + extra).standard_normal((2 * b + 1, 2 * b + 1))
    assert np.array_equal(extract_filter(embed_filter(h, side), b), h)


def test_delta_convolution_is_identity(rng):
    dom = ExpandedDomain(10, 2)
    x = rng.standard_normal((dom.m, dom.m))
    assert np.allclose(forward_operator(x, delta_filter(2), dom), dom.crop(x), atol=1e-12)


def test_symmetric_expansion_keeps_centre(rng):
    dom = ExpandedDomain(8, 3)
    y = rng.standard_normal((8, 8))
    assert np.array_equal(dom.crop(dom.expand(y)), y)
    assert dom.border_mask().sum() == dom.m**2 - 64


def test_filter_estimate_invariants():
    with pytest.raises(ValueError):
        FilterEstimate(np.ones((3, 3)))
    with pytest.raises(ValueError):
        FilterEstimate(np.full((2, 2), 0.25))
    bad = np.zeros((3, 3))
    bad[0, 0], bad[1, 1] = -0.5, 1.5
    with pytest.raises(ValueError):
        FilterEstimate(bad)
    assert delta_filter(4).half_width == 4


def test_disk_geometry():
    g = DiskGeometry((128, 128), 48)
    assert (g.inner_radius, g.outer_radius) == (47, 49)
    omega = derive_omega(g, 256)
    assert omega[128, 128] and not omega[128, 128 + 48]
    assert DiskGeometry.from_dict(g.to_dict()) == g
    with pytest.raises(ValueError):
        DiskGeometry((10, 10), 48).check_inside(256)
    with pytest.raises(ValueError):
        DiskGeometry((128, 128), 5, inner_radius=6)


def test_disk_mask_is_inclusive():
    m = disk_mask((5, 5), (2, 2), 2)
    assert m[0, 2] and m[2, 4] and not m[0, 0]
