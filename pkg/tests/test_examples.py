import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from awbounds.adapted import atv_dp, atv_weighted, tv_weighted
from awbounds.errors import InvalidEpsilon, InvalidParams, MeshTooCoarse
from awbounds.examples import (
    Example35Params, example36_closed_form, example43_closed_form, gen_example35, gen_example36, gen_example43,
)
from awbounds.measures import WeightSpec


@given(st.floats(0.001, 0.45))
def test_two_stage_blocks_match_closed_form(eps):
    par = Example35Params(2, eps)
    mu, nu, _ = gen_example35(par)
    cf = par.closed_form()
    assert tv_weighted(mu, nu) == pytest.approx(cf["TV"], rel=1e-9)
    assert atv_weighted(mu, nu) == pytest.approx(cf["ATV"], rel=1e-9)


@pytest.mark.parametrize("T", [3, 4, 5])
def test_literal_rule_invalid_beyond_two_stages(T):
    with pytest.raises(InvalidEpsilon):
        Example35Params(T, 0.01, p_rule="literal")


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 5), st.floats(0.001, 0.3))
def test_minimal_rule_matches_closed_form(T, eps):
    par = Example35Params(T, eps, p_rule="minimal")
    mu, nu, _ = gen_example35(par)
    assert np.isclose(mu.weights.sum(), 1) and np.isclose(nu.weights.sum(), 1)
    cf = par.closed_form()
    assert tv_weighted(mu, nu) == pytest.approx(cf["TV"], rel=1e-9)
    assert atv_weighted(mu, nu) == pytest.approx(cf["ATV"], rel=1e-9)
    assert atv_dp(mu, nu) == pytest.approx(cf["ATV"], rel=1e-7)


def test_weighted_blocks_agree_with_dp():
    par = Example35Params(3, 0.01, c=(1.0, 1.0), p_rule="minimal")
    mu, nu, w = gen_example35(par)
    assert isinstance(w, WeightSpec)
    assert atv_weighted(mu, nu, w) == pytest.approx(atv_dp(mu, nu, w), rel=1e-7)
    assert par.lambda_limit() == pytest.approx(13.0)


def test_param_validation():
    with pytest.raises(InvalidParams):
        Example35Params(1, 0.1)
    with pytest.raises(InvalidEpsilon):
        Example35Params(2, 0.6)
    with pytest.raises(InvalidParams):
        Example35Params(3, 0.1, c=(1.0,), p_rule="minimal")


@given(st.floats(0.001, 0.5))
def test_unbounded_ratio_pair(eps):
    mu, nu = gen_example36(eps)
    w = WeightSpec.ppower(1)
    cf = example36_closed_form(eps)
    assert tv_weighted(mu, nu, w) == pytest.approx(cf["TV_1"], rel=1e-9)
    assert atv_weighted(mu, nu, w) == pytest.approx(cf["ATV_1"], rel=1e-9)
    with pytest.raises(InvalidEpsilon):
        gen_example36(1.0)


def test_example43_grid():
    p_mu, p_nu = gen_example43(0.1, 1, 0.005)
    assert p_mu.shape == (200, 200)
    assert p_nu.total_mass() == pytest.approx(1.0, rel=1e-12)
    assert p_nu.values.min() >= 1 - 0.1 * 2 - 1e-12
    # the perturbation only lives in the two boundary bands
    x1, x2 = p_nu.mesh_grid()
    mid = (x2 > 0.2) & (x2 < 0.8)
    assert np.allclose(p_nu.values[mid], 1.0)
    with pytest.raises(MeshTooCoarse):
        gen_example43(0.1, 1, 0.01)
    with pytest.raises(InvalidEpsilon):
        gen_example43(0.2, 1, 0.005)
    cf = example43_closed_form(0.1, 2)
    assert cf["AW1_lower"] == pytest.approx(0.01 / math.pi)
