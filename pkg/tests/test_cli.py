import os
import subprocess
import sys

import pytest

from recur_ldp.cli import main
from recur_ldp.presets import DOCUMENTS


def run(tmp_path, *argv):
    out = tmp_path / "out"
    code = main([*argv, "--out", str(out)])
    return code, out


def read(path):
    return path.read_text(encoding="utf-8")


@pytest.fixture
def bern_file(tmp_path):
    path = tmp_path / "bern_37.model"
    path.write_text(DOCUMENTS["bern_37"])
    return str(path)


def test_pressure_command(tmp_path, bern_file):
    code, out = run(tmp_path, "pressure", "--p", bern_file, "--alpha-step", "0.01")
    assert code == 0
    csv = read(out / "pressure.csv").splitlines()
    assert csv[0].startswith("# recur_ldp ")
    assert csv[1].startswith("# command=pressure config=")
    assert sum(line.startswith("# provenance") for line in csv) == 1
    scalars = read(out / "pressure_scalars.txt")
    assert "alpha_star=" in scalars and "gamma_plus=" in scalars


def test_pressure_pair(tmp_path):
    code, out = run(tmp_path, "pressure", "--p", "preset:figP", "--q", "preset:figQ", "--alpha-step", "0.05")
    assert code == 0
    assert "q_W" in read(out / "pressure.csv")


def test_rates_command(tmp_path):
    code, out = run(tmp_path, "rates", "--p", "preset:bern_37", "--s-step", "0.01")
    assert code == 0
    header = [l for l in read(out / "rates.csv").splitlines() if not l.startswith("#")][0]
    assert header == "s,I_Q,I_P,I_W,I_V,I_R"
    points = read(out / "rate_points.txt")
    assert "I_P_at_minus_gamma_minus=" in points
    assert "IR_convex=false" in read(out / "verdict.txt")


def test_rates_hmm_skips_verdict(tmp_path):
    code, out = run(tmp_path, "rates", "--p", "preset:hmm_runs", "--s-step", "0.01", "--n", "6")
    assert code == 0
    assert "skipped=" in read(out / "verdict.txt")
    assert "provenance=finite-n-approximation" in read(out / "rates.csv")


def test_estimate_command(tmp_path):
    code, out = run(tmp_path, "estimate", "--p", "preset:bern_37", "--n", "4,6,8,10", "--M", "2e4",
                    "--alpha=-2,0.5", "--law-test")
    assert code == 0
    for name in ("empirical_rates.csv", "tail_slope.csv", "empirical_pressure.csv", "law_test.txt"):
        assert (out / name).exists(), name
    assert "analytic overlay" in read(out / "empirical_rates.csv")


def test_estimate_waiting(tmp_path):
    code, out = run(tmp_path, "estimate", "--p", "preset:figP", "--q", "preset:figQ", "--statistic", "W",
                    "--n", "3,5", "--M", "5000")
    assert code == 0
    assert not (out / "tail_slope.csv").exists()


def test_oracle_command(tmp_path):
    code, out = run(tmp_path, "oracle", "--p", "preset:bern_37", "--n", "2", "--k-max", "6")
    assert code == 0
    lines = read(out / "oracle.csv").splitlines()
    assert "k,R_exact,V_exact,W_exact,nu_toy,rho_toy" in lines
    row = lines[lines.index("k,R_exact,V_exact,W_exact,nu_toy,rho_toy") + 1].split(",")
    assert row[2] == row[3] or abs(float(row[2]) - float(row[3])) < 1e-12


def test_verify_command(tmp_path):
    code, out = run(tmp_path, "verify", "--p", "preset:period2", "--n-max", "3", "--tau", "1",
                    "--psi-tau-max", "3")
    assert code == 0
    assert (out / "decoupling.csv").exists() and (out / "psi.csv").exists()


@pytest.mark.parametrize("name", ["fig1", "fig2", "fig3"])
def test_figure_reproducible(tmp_path, name):
    code, out = run(tmp_path, "figure", name, "--s-step", "0.01")
    assert code == 0
    assert not (out / "NOT_REPRODUCIBLE.txt").exists()
    files = set(os.listdir(out))
    if name == "fig1":
        assert files == {"rates_IQ_IW.csv", "pressures_qQ_qW.csv"}
    else:
        assert {"rate_I_P.csv", "rate_I_V.csv", "rate_I_R.csv", "pressures.csv", "points.txt"} <= files


def test_figure_marker(tmp_path):
    code, out = run(tmp_path, "figure", "fig5", "--s-step", "0.02")
    assert code == 0
    assert "not-reproducible" in read(out / "NOT_REPRODUCIBLE.txt")


@pytest.mark.parametrize("argv,code", [
    (["pressure", "--p", "/nonexistent/model"], 2),
    (["estimate", "--p", "preset:bern_37", "--M", "0"], 2),
    (["figure", "fig9"], 2),
    (["oracle", "--p", "preset:bern_37", "--n", "20"], 3),
    (["pressure", "--p", "preset:nope"], 2),
    (["pressure", "--p", "preset:bern_37", "--q", "preset:figQ"], 2),
])
def test_exit_codes(tmp_path, argv, code):
    assert main([*argv, "--out", str(tmp_path / "o")]) == code


def test_malformed_model_file(tmp_path):
    bad = tmp_path / "bad.model"
    bad.write_text("type=markov\nalphabet=a,b\nrows=0.9,0.2;0.5,0.5\n")
    assert main(["pressure", "--p", str(bad), "--out", str(tmp_path)]) == 2


def test_replay_is_byte_identical(tmp_path):
    argv = ["estimate", "--p", "preset:markov_example", "--n", "4,6,8,10", "--M", "3000", "--seed", "9"]
    assert main([*argv, "--out", str(tmp_path / "a")]) == 0
    assert main([*argv, "--out", str(tmp_path / "b")]) == 0
    for name in os.listdir(tmp_path / "a"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_changes_output(tmp_path):
    base = ["estimate", "--p", "preset:bern_37", "--n", "4,6,8,10", "--M", "3000"]
    main([*base, "--seed", "1", "--out", str(tmp_path / "a")])
    main([*base, "--seed", "2", "--out", str(tmp_path / "b")])
    assert read(tmp_path / "a" / "empirical_rates.csv") != read(tmp_path / "b" / "empirical_rates.csv")


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "recur_ldp", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
