import math

import numpy as np
import pytest

from recur_ldp import AllZeroCounts, Bernoulli, CapTooSmall
from recur_ldp import montecarlo as mc
from recur_ldp.presets import preset
from recur_ldp.recurrence import exact_nonoverlap_law, exact_return_law, return_time

from oracles import naive_nonoverlap, naive_return, naive_waiting


def test_samples_are_reproducible(bern37):
    a = mc.sample_times(bern37, "R", 6, 5000, 500, seed=11)
    b = mc.sample_times(bern37, "R", 6, 5000, 500, seed=11)
    c = mc.sample_times(bern37, "R", 6, 5000, 500, seed=12)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_prefix_of_larger_batch_is_unchanged(bern37):
    a = mc.sample_times(bern37, "V", 4, 300, 200, seed=3)
    b = mc.sample_times(bern37, "V", 4, 1000, 200, seed=3)
    np.testing.assert_array_equal(a, b[:300])


@pytest.mark.parametrize("statistic", ["R", "V"])
def test_kernel_times_match_replayed_trajectories(markov_example, statistic):
    n, cap = 5, 60
    t = mc.sample_times(markov_example, statistic, n, 50, cap, seed=4)
    scan = naive_return if statistic == "R" else naive_nonoverlap
    for i in range(50):
        x = mc.sample_trajectory(markov_example, statistic, i, 2 * n + cap + 1, seed=4).indices
        assert t[i] == scan(x, n, cap)


def test_deterministic_model():
    d = Bernoulli("ab", [1.0, 0.0])
    assert set(mc.sample_times(d, "R", 5, 100, 10)) == {1}
    assert set(mc.sample_times(d, "W", 5, 100, 10)) == {1}
    assert str(mc.sample_prefix(d, 8, stream_id=2)) == "aaaaaaaa"


def test_invalid_arguments(bern37):
    with pytest.raises(ValueError):
        mc.sample_times(bern37, "X", 3, 10, 10)
    with pytest.raises(CapTooSmall):
        mc.sample_times(bern37, "R", 3, 10, 0)
    with pytest.raises(ValueError):
        mc.empirical_rate(bern37, "R", [4], s_max=1.0, M=0)
    with pytest.raises(CapTooSmall):
        mc.empirical_rate(bern37, "R", [10], s_max=1.0, M=10, cap=100)
    with pytest.raises(ValueError):
        mc.empirical_rate(bern37, "R", [4], centers=[0.0, 0.1], epsilon=0.1, M=10)


def test_empirical_law_matches_exact_law(bern37):
    M, cap = 200_000, 12
    law = mc.empirical_law(bern37, "R", 2, M, cap, seed=1)
    exact = exact_return_law(bern37, 2, cap)
    sigma = np.sqrt(exact.mass * (1 - exact.mass) / M)
    assert np.all(np.abs(law.frequency - exact.mass) <= 4.5 * sigma + 1e-12)
    assert law.censored + law.counts.sum() == M


def test_nonoverlap_law_matches_exact(markov_example):
    M, cap = 200_000, 10
    law = mc.empirical_law(markov_example, "V", 2, M, cap, seed=2)
    exact = exact_nonoverlap_law(markov_example, 2, cap)
    sigma = np.sqrt(exact.mass * (1 - exact.mass) / M)
    assert np.all(np.abs(law.frequency - exact.mass) <= 4.5 * sigma + 1e-12)


def test_empirical_rate_accounting(bern37):
    ldp = mc.empirical_rate(bern37, "R", [4, 8], s_max=1.2, M=20_000, seed=0)
    assert np.all(ldp.counts.sum(axis=1) + ldp.censored == ldp.M)
    assert np.all(ldp.out_of_band == 0)
    np.testing.assert_allclose(ldp.centers, [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2])
    assert ldp.caps == [mc.default_cap(4, 1.2), mc.default_cap(8, 1.2)]
    text = ldp.to_csv(["h"])
    assert text.startswith("# h\n# statistic=R seed=0")


def test_zero_band_rate_moves_towards_minus_gamma_plus(bern37):
    ldp = mc.empirical_rate(bern37, "R", [4, 8, 12], s_max=0.4, M=200_000, seed=0)
    r0 = ldp.rates[:, 0]
    target = -math.log(0.7)
    errors = np.abs(r0 - target)
    assert errors[-1] < errors[0]
    assert errors[-1] < 0.15


def test_sparse_bands_are_flagged(bern37):
    ldp = mc.empirical_rate(bern37, "R", [6], s_max=1.2, M=200, seed=0)
    assert np.all(np.isnan(ldp.rates[ldp.sparse]))
    assert np.all(ldp.counts[ldp.sparse] < mc.MIN_COUNT + ldp.censored[0])


def test_default_caps():
    assert mc.default_cap(10, 1.0) == math.ceil(math.exp(10 * 1.1)) - 1
    assert mc.default_cap(100, 1.0) == mc.MAX_CAP
    assert mc.default_pressure_cap(12, -2.0) == 1000
    assert mc.default_pressure_cap(12, 0.5) == mc.MAX_CAP


def test_tail_slope_deterministic_and_errors():
    d = Bernoulli("ab", [1.0, 0.0])
    fit = mc.tail_slope(d, [4, 6, 8, 10], M=1000)
    assert fit.slope == 0.0 and np.all(fit.counts == 1000)
    with pytest.raises(ValueError):
        mc.tail_slope(d, [4, 6, 8], M=10)
    with pytest.raises(AllZeroCounts) as info:
        mc.tail_slope(preset("uniform2"), [30, 32, 34, 36], M=100)
    assert info.value.upper_bound == pytest.approx(0.03)


def test_tail_slope_uniform_trend():
    # P{R_n < n} ~ (n - 1) 2^-n: the polynomial prefactor biases short windows upwards
    early = mc.tail_slope(preset("uniform2"), [6, 8, 10, 12], M=10**6, seed=0)
    late = mc.tail_slope(preset("uniform2"), [14, 16, 18, 20], M=10**6, seed=0)
    target = -math.log(2)
    assert abs(late.slope - target) < abs(early.slope - target)
    assert late.slope == pytest.approx(target, abs=0.1)
    assert "slope=" in late.to_csv()


def test_empirical_pressure_basics(bern37):
    zero = mc.empirical_pressure(bern37, "R", 0.0, 6, M=10)
    assert zero.value == 0.0
    est = mc.empirical_pressure(bern37, "R", -1.0, 6, M=20_000, seed=0)
    t = mc.sample_times(bern37, "R", 6, 20_000, est.cap, seed=0)
    manual = math.log(np.mean(np.where(t == 0, est.cap, t).astype(float) ** -1.0)) / 6
    assert est.value == pytest.approx(manual, abs=1e-12)
    assert est.ci[0] < est.value < est.ci[1]
    with pytest.raises(CapTooSmall):
        mc.empirical_pressure(bern37, "R", -1.0, 6, M=10, cap=3)


def test_positive_alpha_flags_lower_bound(bern37):
    est = mc.empirical_pressure(bern37, "R", 0.5, 10, M=2000, cap=20)
    assert est.censored_fraction > 0 and est.lower_bound_only


def test_nonoverlap_pressure_trend(bern37):
    # alpha = -1 sits on the kink of q_V; the estimate approaches ln 0.58 only slowly
    target = math.log(0.58)
    vals = [mc.empirical_pressure(bern37, "V", -1.0, n, M=100_000, seed=0).value for n in (4, 8, 12)]
    gaps = [abs(v - target) for v in vals]
    assert gaps[0] > gaps[1] > gaps[2]
    assert all(v > target for v in vals)


def test_law_test_under_null(bern37):
    test = mc.law_equality_test(bern37, 3, M=100_000, seed=0)
    assert test.p_value > 0.001
    assert test.dof >= 1


def test_law_test_small_samples_merge_bins(markov_example):
    test = mc.law_equality_test(markov_example, 3, M=50, seed=0)
    assert test.table is None or np.all(test.table.sum(axis=0) > 0)
    assert test.dof <= 20


def test_wilson_interval():
    lo, hi = mc.wilson_interval(0, 100)
    assert lo == pytest.approx(0.0, abs=1e-15) and 0 < hi < 0.05
    lo, hi = mc.wilson_interval(50, 100)
    assert lo < 0.5 < hi


def test_waiting_times_against_scan():
    p = preset("markov_example")
    q = preset("uniform2")
    n, cap = 3, 40
    t = mc.sample_times(p, "W", n, 30, cap, seed=5, q=q)
    assert t.shape == (30,)
    assert np.all((t >= 0) & (t <= cap))
