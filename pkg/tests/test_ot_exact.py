import numpy as np
import pytest
from hypothesis import given, strategies as st

from awbounds.errors import Degenerate, ShapeMismatch, TooLarge
from awbounds.measures import PathMeasure, dirac
from awbounds.ot_exact import (
    MAX_ATOMS, Coupling, certify, pairwise_cost, transport_lp, w1_grid_flow, wasserstein_1d,
    wasserstein_1d_pp, wasserstein_p, wasserstein_pp,
)
from scipy.optimize import linprog

from conftest import random_pair


def _lp_reference(a, b, C):
    n, m = C.shape
    A = np.zeros((n + m, n * m))
    for i in range(n):
        A[i, i * m:(i + 1) * m] = 1
    for j in range(m):
        A[n + j, j::m] = 1
    return linprog(C.ravel(), A_eq=A, b_eq=np.r_[a, b], bounds=(0, None), method="highs").fun


@given(st.integers(0, 10_000))
def test_transport_matches_dense_lp(seed):
    rng = np.random.default_rng(seed)
    n, m = rng.integers(1, 7, size=2)
    a, b = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(m))
    C = rng.random((n, m))
    val, G = transport_lp(a, b, C)
    assert val == pytest.approx(_lp_reference(a, b, C), abs=1e-10)
    assert G.marginal_gap() < 1e-9
    assert G.cost(C) == pytest.approx(val, abs=1e-10)


def test_certificate_detects_bad_plan():
    a = b = np.array([0.5, 0.5])
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    val, G = transport_lp(a, b, C)
    assert val == pytest.approx(0.0)
    assert certify(G.dense(), G.u, G.v, a, b, C) < 1e-9
    bad = np.full((2, 2), 0.25)
    assert certify(bad, G.u, G.v, a, b, C) > 1e-3


def test_weight_validation():
    with pytest.raises(Degenerate):
        transport_lp(np.array([0.5, 0.4]), np.array([1.0]), np.zeros((2, 1)))
    with pytest.raises(TooLarge):
        transport_lp(np.full(MAX_ATOMS + 1, 1 / (MAX_ATOMS + 1)), np.array([1.0]), np.zeros((MAX_ATOMS + 1, 1)))
    with pytest.raises(ShapeMismatch):
        transport_lp(np.array([1.0]), np.array([1.0]), np.zeros((2, 2)))


def test_dirac_pair_distance():
    assert wasserstein_pp(dirac([0.0, 0.0]), dirac([1.0, 2.0]), 2) == pytest.approx(5.0)
    assert wasserstein_p(dirac([0.0]), dirac([3.0]), 1) == pytest.approx(3.0)


@given(st.integers(0, 10_000), st.sampled_from([1.0, 2.0, 3.0]))
def test_quantile_coupling_matches_lp(seed, p):
    rng = np.random.default_rng(seed)
    xa, xb = rng.normal(size=5), rng.normal(size=4)
    a, b = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(4))
    lp = transport_lp(a, b, pairwise_cost(xa[:, None], xb[:, None], p))[0]
    assert wasserstein_1d_pp(xa, a, xb, b, p) == pytest.approx(lp, abs=1e-10)
    assert wasserstein_1d(xa, a, xb, b, p) == pytest.approx(lp ** (1 / p), abs=1e-8)


@given(st.integers(0, 10_000))
def test_w_pp_symmetry_and_triangle(seed):
    mu, nu = random_pair(seed, T=2)
    rho, _ = random_pair(seed + 1, T=2)
    assert wasserstein_pp(mu, nu, 1) == pytest.approx(wasserstein_pp(nu, mu, 1), abs=1e-10)
    assert wasserstein_p(mu, rho, 2) <= wasserstein_p(mu, nu, 2) + wasserstein_p(nu, rho, 2) + 1e-9


@pytest.mark.parametrize("method", ["network", "lp"])
def test_grid_flow_matches_transport(method):
    rng = np.random.default_rng(3)
    a, b = rng.random((5, 6)), rng.random((5, 6))
    a, b = a / a.sum(), b / b.sum()
    X = np.stack(np.meshgrid(np.arange(5) * 0.25, np.arange(6) * 0.25, indexing="ij"), -1).reshape(-1, 2)
    ref = wasserstein_pp(PathMeasure.from_paths(X, a.ravel()), PathMeasure.from_paths(X, b.ravel()), 1)
    assert w1_grid_flow(a - b, 0.25, method=method) == pytest.approx(ref, abs=1e-10)


def test_grid_flow_unequal_spacing_uses_lp():
    a = np.zeros((3, 3)); a[0, 0] = 1
    b = np.zeros((3, 3)); b[2, 2] = 1
    assert w1_grid_flow(a - b, [0.5, 1.0]) == pytest.approx(2 * 0.5 + 2 * 1.0)


def test_coupling_dense_round_trip():
    G = np.array([[0.2, 0.0], [0.3, 0.5]])
    c = Coupling.from_dense(G, G.sum(1), G.sum(0))
    np.testing.assert_allclose(c.dense(), G)
