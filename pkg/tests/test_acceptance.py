"""Acceptance suite: one PASS/FAIL line per criterion (1-10).

Lines are printed as each check finishes and collected again in the
terminal summary.  Run on its own with ``python tests/test_acceptance.py``.
"""

import itertools
import math
import time

import numpy as np
import pytest

from recur_ldp import Bernoulli, Markov, measures
from recur_ldp import montecarlo as mc
from recur_ldp.convex import Grid, is_convex, legendre
from recur_ldp.decoupling import psi_mixing, sld_constants, ud_constants
from recur_ldp.presets import preset
from recur_ldp.pressure import build_report, pressure, pressure_finite_n
from recur_ldp.rates import build_rates
from recur_ldp.recurrence import exact_nonoverlap_law, exact_return_law, exact_waiting_law, period, return_time

import properties
from oracles import brute_finite_pressure, naive_period, naive_return, spectral_pressure

STEP = 1e-3
ALPHAS = Grid(-4.0, 3.0, STEP)


@pytest.fixture(scope="module")
def p37():
    return Bernoulli("ab", [0.3, 0.7])


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


# --------------------------------------------------------------------------


def test_criterion_1_closed_form_scalars(p37, acceptance):
    with Timer() as t:
        got = {
            "gamma_plus": measures.gamma_plus(p37),
            "gamma_minus": measures.gamma_minus(p37),
            "q_P(-1)": float(pressure(p37, p37, -1.0)),
            "h": measures.entropy(p37),
            "h_top": measures.h_top_support(p37),
        }
    # recomputed by hand from the letter probabilities
    want = {
        "gamma_plus": math.log(0.7),
        "gamma_minus": math.log(0.3),
        "q_P(-1)": math.log(0.3**2 + 0.7**2),
        "h": -0.3 * math.log(0.3) - 0.7 * math.log(0.7),
        "h_top": math.log(2),
    }
    assert want["q_P(-1)"] == pytest.approx(math.log(0.58), abs=1e-15)
    err = max(abs(got[k] - want[k]) for k in want)
    ok = err <= 1e-12 and t.seconds < 1
    acceptance(1, ok, f"max error {err:.1e}, {t.seconds:.2f}s")
    assert ok


def test_criterion_2_rate_geometry(p37, acceptance):
    with Timer() as t:
        curves = build_rates(p37, step=STEP)
        I_R, I_V = curves.I_R, curves.I_V
        convex_R, convex_V = is_convex(I_R), is_convex(I_V)
    gp = measures.gamma_plus(p37)
    s = I_R.points
    pos = s > STEP / 2
    checks = {
        "I_R(0)=-gamma+": I_R.at(0.0) == -gp,
        "I_V(0)=-q_P(-1)": abs(I_V.at(0.0) + math.log(0.58)) <= 2 * STEP,
        "I_R=I_V for s>0": bool(np.array_equal(I_R.values[pos], I_V.values[pos])),
        "I_R nonconvex": not convex_R,
        "I_V convex": convex_V,
        "time<5s": t.seconds < 5,
    }
    ok = all(checks.values())
    acceptance(2, ok, ", ".join(k for k, v in checks.items() if not v) or
               f"I_R(0)={I_R.at(0.0):.6f} I_V(0)={I_V.at(0.0):.6f}, {t.seconds:.2f}s")
    assert ok


def _duality_errors(p, q):
    curves = build_rates(p, q, step=STEP)
    report = build_report(p, q, alpha_grid=ALPHAS)
    a = ALPHAS.points
    qq = report.q_Q.values
    want_W = np.maximum(qq, report.q_Q_minus1)
    err_W = np.max(np.abs(legendre(curves.I_W, ALPHAS).values - want_W))
    want_R = np.maximum(report.q_P.values, measures.gamma_plus(p))
    err_R = np.max(np.abs(legendre(curves.I_R, ALPHAS).values - want_R))
    return err_W, err_R, curves, report


@pytest.fixture(scope="module")
def duality(p37):
    p, q = preset("figP"), preset("figQ")
    with Timer() as t:
        pair = _duality_errors(p, q)
        self_pair = _duality_errors(p37, p37)
    return pair, self_pair, t.seconds


def test_criterion_3_duality(duality, acceptance):
    pair, self_pair, seconds = duality
    tol = 2 * STEP + 1e-9
    errs = {"W pair": pair[0], "W self": self_pair[0], "R pair": pair[1], "R self": self_pair[1]}
    ok = all(v <= tol for v in errs.values()) and seconds < 10
    # the nonconvexity is seen one step away from 0: the hull of I_R lies strictly below it
    curves = self_pair[2]
    qR = self_pair[3].q_R
    hull = legendre(qR, curves.I_R.grid)
    witness = hull.at(0.05) < curves.I_R.at(0.05) - 0.1
    ok = ok and witness
    acceptance(3, ok, " ".join(f"{k}={v:.1e}" for k, v in errs.items())
               + f", q_R*(0.05)={hull.at(0.05):.4f} < I_R(0.05)={curves.I_R.at(0.05):.4f}, {seconds:.1f}s",
               part="duality")
    assert ok


@pytest.mark.xfail(strict=True, reason="q_R*(0) equals -gamma_+ = I_R(0), so the stated inequality cannot hold")
def test_criterion_3_literal_zero_clause(duality, acceptance):
    curves, report = duality[1][2], duality[1][3]
    star0 = legendre(report.q_R, curves.I_R.grid).at(0.0)
    I_V0, I_R0 = curves.I_V.at(0.0), curves.I_R.at(0.0)
    ok = abs(star0 - I_V0) <= 2 * STEP and abs(I_V0 - I_R0) > 2 * STEP
    acceptance(3, ok, f"q_R*(0)={star0:.6f} I_V(0)={I_V0:.6f} I_R(0)={I_R0:.6f} (q_R*(0) = I_R(0))",
               part="q_R*(0)=I_V(0)")
    assert ok


def test_criterion_4_markov_pressure(acceptance):
    rows = [[0.9, 0.1], [0.5, 0.5]]
    m = Markov("ab", rows)
    alphas = [-2.0, -1.0, -0.5, 0.5]
    worst, monotone = 0.0, True
    with Timer() as t:
        for a in alphas:
            for n in range(1, 13):
                worst = max(worst, abs(pressure_finite_n(m, m, a, n, method="matrix")
                                       - brute_finite_pressure(m, m, a, n)))
            limit = spectral_pressure(rows, rows, a)
            gap6 = abs(pressure_finite_n(m, m, a, 6) - limit)
            gap12 = abs(pressure_finite_n(m, m, a, 12) - limit)
            monotone &= gap12 <= gap6
    ok = worst <= 1e-12 and monotone and t.seconds < 10
    acceptance(4, ok, f"max |matrix - enumeration| {worst:.1e}, monotone={monotone}, {t.seconds:.1f}s")
    assert ok


def test_criterion_5_period_identity(acceptance):
    bad = checked = 0
    with Timer() as t:
        for length in range(2, 13):
            for w in itertools.product((0, 1), repeat=length):
                x = np.array(w, dtype=np.int64)
                per = period(x)
                for k in range(1, (length + 1) // 2):
                    n = length - k  # k < n
                    hit = return_time(x, n, k) == k
                    checked += 1
                    if hit != (per == k):
                        bad += 1
    # independent route on a sample: naive scans agree with the identity
    rng = np.random.default_rng(0)
    for _ in range(2000):
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, n))
        x = tuple(rng.integers(0, 2, n + k))
        if (naive_return(x, n, k) == k) != (naive_period(x) == k):
            bad += 1
    ok = bad == 0 and t.seconds < 5
    acceptance(5, ok, f"{checked} word/shift pairs, {bad} counterexamples, {t.seconds:.2f}s")
    assert ok


def test_criterion_6_oracle_equivalence(p37, acceptance):
    with Timer() as t:
        W = exact_waiting_law(p37, p37, 2, 6)
        V = exact_nonoverlap_law(p37, 2, 6)
        law_err = float(np.max(np.abs(W.mass - V.mass)))
        k_max, M = 12, 10**6
        exact = exact_return_law(p37, 2, k_max)
        emp = mc.empirical_law(p37, "R", 2, M, k_max, seed=0)
        sigma = np.sqrt(exact.mass * (1 - exact.mass) / M)
        z = np.abs(emp.frequency - exact.mass) / sigma
        tail_z = abs(emp.censored / M - exact.tail) / math.sqrt(exact.tail * (1 - exact.tail) / M)
    ok = law_err <= 1e-10 and z.max() <= 4 and tail_z <= 4 and t.seconds < 60
    acceptance(6, ok, f"|W-V| {law_err:.1e}, worst bin {z.max():.2f} sigma (k<={k_max}), "
                      f"tail {tail_z:.2f} sigma, {t.seconds:.1f}s")
    assert ok


def test_criterion_7_gamma_plus_slope(p37, acceptance):
    with Timer() as t:
        fit = mc.tail_slope(p37, [8, 10, 12, 14, 16, 18, 20], M=10**6, seed=0)
    err = abs(fit.slope - math.log(0.7))
    ok = err <= 0.05 and t.seconds < 120
    acceptance(7, ok, f"slope {fit.slope:.4f} vs ln 0.7 = {math.log(0.7):.4f}, {t.seconds:.1f}s")
    assert ok


def test_criterion_8_pressure_plateau(p37, acceptance):
    with Timer() as t:
        low = mc.empirical_pressure(p37, "R", -2.0, 12, M=10**6, seed=0)
        high = mc.empirical_pressure(p37, "R", 0.5, 12, M=10**6, seed=0)
    target_high = float(pressure(p37, p37, 0.5))
    err_low, err_high = abs(low.value - math.log(0.7)), abs(high.value - target_high)
    ok = err_low <= 0.06 and err_high <= 0.06 and t.seconds < 120
    acceptance(8, ok, f"alpha=-2: {low.value:.4f} vs {math.log(0.7):.4f}; "
                      f"alpha=0.5: {high.value:.4f} vs {target_high:.4f}; {t.seconds:.1f}s")
    assert ok


def test_criterion_9_decoupling(acceptance):
    with Timer() as t:
        ones = all(
            np.all(ud_constants(preset(name), 6, tau=0) == 1.0) and np.all(sld_constants(preset(name), 6, tau=0) == 1.0)
            for name in ("bern_37", "figP", "uniform2")
        )
        per = preset("period2")
        inf0 = bool(np.any(np.isinf(sld_constants(per, 6, tau=0))))
        fin1 = bool(np.all(np.isfinite(sld_constants(per, 6, tau=1))))
        psi0 = all(np.all(psi_mixing(preset(name), 6, 6) == 0.0) for name in ("bern_37", "figP"))
    ok = ones and inf0 and fin1 and psi0 and t.seconds < 30
    acceptance(9, ok, f"Bernoulli C=1: {ones}, period-2 inf at tau=0: {inf0}, finite at tau=1: {fin1}, "
                      f"psi=0: {psi0}, {t.seconds:.1f}s")
    assert ok


@pytest.mark.parametrize("name", list(properties.SUITES))
def test_criterion_10_property_suites(name, acceptance):
    try:
        properties.SUITES[name]()
        ok, note = True, f"{properties.CASES} cases"
    except Exception as exc:  # recorded, then re-raised
        ok, note = False, f"{type(exc).__name__}"
        acceptance(10, ok, note, part=name)
        raise
    acceptance(10, ok, note, part=name)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider", *sys.argv[1:]]))
