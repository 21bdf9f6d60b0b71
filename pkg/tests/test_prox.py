import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from transitpsf.prox import (
    conj_prox_cost_to_move,
    conj_prox_l1,
    conj_prox_quadratic_fidelity,
    conjugate_prox,
    project_P0,
    project_simplex,
    project_simplex_support,
    prox_cost_to_move,
    prox_l1,
    prox_quadratic_fidelity,
)
from transitpsf.grid import embed_filter

finite = st.floats(-1e3, 1e3, allow_nan=False)


def brute_force_simplex(v):
    """Projection by enumerating active sets of the KKT system."""
    best, best_d = None, np.inf
    d = v.size
    for k in range(1, d + 1):
        for support in itertools.combinations(range(d), k):
            idx = list(support)
            u = np.zeros(d)
            u[idx] = v[idx] - (v[idx].sum() - 1.0) / k
            if u.min() < -1e-15:
                continue
            dist = np.sum((u - v) ** 2)
            if dist < best_d:
                best, best_d = u, dist
    return best


def test_simplex_matches_brute_force_qp():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        v = rng.normal(scale=rng.uniform(0.1, 3.0), size=6)
        worst = max(worst, np.abs(project_simplex(v) - brute_force_simplex(v)).max())
    assert worst <= 1e-9


@given(arrays(np.float64, st.integers(1, 30), elements=finite))
def test_simplex_properties(v):
    p = project_simplex(v)
    assert p.min() >= 0 and p.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(project_simplex(p), p, atol=1e-12)
    # projection is non-expansive and the optimality inequality holds
    w = project_simplex(np.linspace(0, 1, v.size))
    assert np.dot(v - p, w - p) <= 1e-7 * (1 + np.abs(v).max())


def test_simplex_support_accepts_embedded():
    k = np.zeros((7, 7))
    k[3, 3], k[3, 4] = 2.0, 1.0
    full = embed_filter(k, 16)
    full[8, 8] = 100.0  # outside the window: discarded
    est = project_simplex_support(full, 3)
    assert est.data.shape == (7, 7)
    assert est.data[3, 3] == pytest.approx(1.0)


@given(arrays(np.float64, 12, elements=finite), st.floats(0.01, 10), st.floats(0.0, 5.0))
def test_moreau_identity(v, step, weight):
    # prox_{s f*}(v) + s prox_{f/s}(v/s) = v, checked against the closed forms
    z = np.random.default_rng(7).normal(size=12)
    l1 = lambda u, s: prox_l1(u, s * weight)
    assert np.abs(conjugate_prox(l1, v, step) - conj_prox_l1(v, weight)).max() <= 1e-12 * (1 + np.abs(v).max())
    fid = lambda u, s: prox_quadratic_fidelity(u, z, s)
    assert np.abs(conjugate_prox(fid, v, step) - conj_prox_quadratic_fidelity(v, z, step)).max() <= 1e-12 * (
        1 + np.abs(v).max()
    )
    ctm = lambda u, s: prox_cost_to_move(u, z, weight, s)
    assert np.abs(conjugate_prox(ctm, v, step) - conj_prox_cost_to_move(v, z, weight, step)).max() <= 1e-12 * (
        1 + np.abs(v).max()
    )


@given(arrays(np.float64, 9, elements=finite), st.floats(0.0, 10.0))
def test_prox_l1_optimality(v, t):
    u = prox_l1(v, t)
    # subgradient condition of soft thresholding
    big = np.abs(v) > t
    assert np.allclose(u[~big], 0.0)
    assert np.allclose(v[big] - u[big], t * np.sign(u[big]))


def test_prox_errors_and_limits():
    with pytest.raises(ValueError):
        prox_l1(np.zeros(2), -1.0)
    with pytest.raises(ValueError):
        prox_cost_to_move(np.zeros(2), np.zeros(2), -1.0, 1.0)
    with pytest.raises(ValueError):
        conjugate_prox(lambda u, s: u, np.zeros(2), 0.0)
    assert np.allclose(prox_cost_to_move(np.ones(3), np.zeros(3), 1e12, 1.0), 0.0, atol=1e-10)


def test_project_P0():
    x = np.array([[-1.0, 2.0], [3.0, -4.0]])
    omega = np.array([[False, True], [False, False]])
    assert np.array_equal(project_P0(x, omega), [[0.0, 0.0], [3.0, 0.0]])
    stack = np.stack([x, x])
    assert project_P0(stack, omega)[1, 0, 1] == 0.0
