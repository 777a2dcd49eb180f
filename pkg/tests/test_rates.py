import math

import numpy as np
import pytest

from recur_ldp import Bernoulli, UnsupportedModel
from recur_ldp import measures
from recur_ldp.convex import Grid, GridFunction, is_convex
from recur_ldp.presets import preset
from recur_ldp.pressure import pressure_bernoulli
from recur_ldp.rates import (
    build_IR,
    build_IV,
    build_IW,
    build_rates,
    convexity_verdict,
    rate_at,
    rate_function,
    rate_IQ,
    zero_set,
)

from oracles import dense_conjugate

STEP = 1e-3


@pytest.fixture(scope="module")
def curves37():
    return build_rates(Bernoulli("ab", [0.3, 0.7]), step=STEP)


def test_dirac_pressure_gives_indicator():
    h = 0.61
    qa = GridFunction.from_callable(Grid(-4, 3, STEP), lambda a: h * a, variable="alpha")
    rate = rate_IQ(qa, Grid(-0.5, 2.0, STEP), support=(h, h))
    fin = np.flatnonzero(rate.finite)
    assert fin.size == 1
    assert rate.points[fin[0]] == pytest.approx(h)
    assert rate.values[fin[0]] == pytest.approx(0.0, abs=1e-12)


def test_rate_matches_dense_conjugate_oracle(figure_pair):
    p, q = figure_pair
    rate = rate_function(p, q, step=STEP)
    alphas = np.linspace(-80, 80, 160001)
    qa = pressure_bernoulli(p, q, alphas)
    lo, hi = -math.log(0.6), -math.log(0.1)
    s = np.linspace(lo + 0.05, hi - 0.05, 25)
    ref = np.array([np.max(x * alphas - qa) for x in s])
    ours = np.array([rate.at(x) for x in s])
    # nearest-grid evaluation costs at most |slope| * step / 2
    assert np.max(np.abs(ours - ref)) < 5 * STEP
    # the coarse dual tails (step 0.05 beyond |alpha| = 4) limit accuracy near the ends
    np.testing.assert_allclose(rate_at(p, s, q=q), ref, atol=5e-5)


def test_rate_is_infinite_outside_support(bern37):
    rate = rate_function(bern37, step=STEP)
    assert rate.at(-math.log(0.7) - 0.01) == math.inf
    assert rate.at(-math.log(0.3) + 0.01) == math.inf
    assert rate_at(bern37, -0.1) == math.inf


def test_rate_endpoint_values(bern37):
    # I_P(-gamma_-) = -gamma_- - ln(number of least probable letters)
    assert rate_at(bern37, -math.log(0.3)) == pytest.approx(-math.log(0.3), abs=1e-9)
    deg = preset("bern_degenerate")
    assert rate_at(deg, -math.log(0.15)) == pytest.approx(-math.log(0.15) - math.log(2), abs=1e-9)
    assert rate_at(bern37, -math.log(0.7)) == pytest.approx(-math.log(0.7), abs=1e-9)


def test_rate_zero_at_entropy(bern37):
    h = measures.entropy(bern37)
    assert rate_at(bern37, h) == pytest.approx(0.0, abs=1e-9)
    z = zero_set(rate_function(bern37, step=STEP), tol=1e-6)
    assert z.lo <= h + STEP and z.hi >= h - STEP
    assert z.width <= 2 * STEP


def test_build_IR_dip(curves37):
    I_R, I_V = curves37.I_R, curves37.I_V
    assert I_R.at(0.0) == -math.log(0.7)
    assert I_R.at(0.0) == pytest.approx(0.356675, abs=1e-6)
    assert I_V.at(0.0) == pytest.approx(-math.log(0.58), abs=2 * STEP)
    assert I_V.at(0.0) == pytest.approx(0.544727, abs=2 * STEP)
    s = I_R.points
    pos = s > STEP / 2
    np.testing.assert_array_equal(I_R.values[pos], I_V.values[pos])
    assert not is_convex(I_R)
    assert is_convex(I_V)


def test_suffix_construction_against_loop(curves37):
    I_P = curves37.I_P
    s, v = I_P.points, I_P.values
    ref = np.full(s.size, np.inf)
    for i in range(s.size):
        if s[i] < -STEP / 2:
            continue
        ref[i] = max(0.0, min(s[j] - s[i] + v[j] for j in range(i, s.size)))
    np.testing.assert_allclose(build_IV(I_P).values, ref, atol=1e-12)
    np.testing.assert_allclose(build_IW(I_P).values, ref, atol=1e-12)
    assert build_IR(I_P, 0.0).at(0.0) == 0.0


def test_waiting_rate_shape(figure_pair):
    p, q = figure_pair
    curves = build_rates(p, q, step=STEP)
    I_W, I_Q = curves.I_W, curves.I_Q
    assert is_convex(I_W)
    assert is_convex(I_Q)
    z = zero_set(I_W, tol=1e-6)
    hc = measures.cross_entropy(p, q)
    assert z.lo == pytest.approx(hc, abs=2 * STEP) and z.width <= 2 * STEP
    assert not z.right_saturated
    # I_W(0) = -q_Q(-1) and I_W = I_Q on the right of the contact point
    assert I_W.at(0.0) == pytest.approx(-pressure_bernoulli(p, q, -1.0), abs=2 * STEP)
    right = I_W.points > hc
    np.testing.assert_allclose(I_W.values[right], I_Q.values[right], atol=1e-12)
    assert I_W.at(-math.log(0.1) + 0.01) == math.inf


def test_flat_tail_is_right_saturated():
    g = Grid(0, 1, 0.01)
    z = zero_set(GridFunction(g, np.where(g.points > 0.5, 0.0, 1.0)))
    assert z.lo == pytest.approx(0.51) and z.right_saturated


def test_zero_set_none_and_dirac():
    g = Grid(0, 1, 0.01)
    assert zero_set(GridFunction(g, np.ones(g.size))) is None
    v = np.full(g.size, np.inf)
    v[30] = 0.0
    z = zero_set(GridFunction(g, v))
    assert z.lo == z.hi == pytest.approx(0.3)


def test_verdict_bernoulli_all_false(bern37):
    v = convexity_verdict(bern37)
    for k in v.CORE:
        assert getattr(v, k) is False, k
    assert not v.gammaPlus_equals_gammaMinus and not v.hP_equals_hTop
    assert v.consistent
    assert "IR_convex=false" in v.to_text()


@pytest.mark.parametrize("name", ["uniform2"])
def test_verdict_uniform_all_true(name):
    v = convexity_verdict(preset(name))
    for k in v.CORE:
        assert getattr(v, k) is True, k
    assert v.consistent


def test_verdict_uniform_on_support():
    v = convexity_verdict(Bernoulli("abc", [0.0, 0.5, 0.5]))
    assert v.IR_convex and v.consistent


def test_verdict_parry_chain_all_true():
    chain = measures.parry_chain(Bernoulli("ab", [0.5, 0.5]).alphabet, np.array([[1, 1], [1, 0]]))
    v = convexity_verdict(chain)
    for k in v.CORE:
        assert getattr(v, k) is True, k
    assert v.hP_equals_hTop
    assert v.consistent


def test_verdict_markov_all_false(markov_example):
    v = convexity_verdict(markov_example)
    assert not any(getattr(v, k) for k in v.CORE)
    assert v.consistent


def test_verdict_rejects_hmm():
    with pytest.raises(UnsupportedModel):
        convexity_verdict(preset("hmm_runs"))


def test_hmm_rates_are_finite_n():
    h = preset("hmm_runs")
    curves = build_rates(h, step=0.01, n=6)
    assert curves.I_P.provenance.startswith("finite_n")
    assert is_convex(curves.I_V)
    assert np.isfinite(curves.I_R.at(0.0))
