import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from propcov import cli, inference


def write_groups(path, groups):
    path.write_text(json.dumps({"groups": [{"n": n, "S": np.asarray(S).tolist()} for n, S in groups]}))
    return str(path)


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def scalar_file(tmp_path):
    return write_groups(tmp_path / "g.json", [(100, [[1.0]]), (100, [[4.0]])])


def test_estimate_scalar(scalar_file, capsys):
    code, out, _ = run(["estimate", scalar_file, "--format", "json"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["c"][1] == pytest.approx(4.0, rel=1e-10)
    assert rep["Sigma1"][0][0] == pytest.approx(1.0, rel=1e-10)
    # v11 = (2/p) c^2 (1/r_2 + 1/r_1) = 128 per unit n_+, n_+ = 200
    assert rep["c_se"][1] == pytest.approx(0.8, rel=1e-10)


def test_estimate_identical_groups(tmp_path, capsys):
    S = [[2.0, 0.5], [0.5, 1.0]]
    path = write_groups(tmp_path / "g.json", [(50, S), (50, S)])
    code, out, _ = run(["estimate", path], capsys)
    assert code == 0
    assert "c2 = 1.000000   se 0.200000" in out
    rep = json.loads(run(["estimate", path, "--format", "json"], capsys)[1])
    assert rep["c"][1] == pytest.approx(1.0, abs=1e-10)
    assert rep["c_se"][1] == pytest.approx(math.sqrt((2 / 2) * (2 + 2) / 100), rel=1e-10)


@pytest.mark.parametrize("tag", ["b", "a", "sigma"])
def test_estimate_full_covariance(scalar_file, capsys, tag):
    code, out, _ = run(["estimate", scalar_file, "--cov", tag, "--format", "json"], capsys)
    cov = json.loads(out)["cov"]
    assert code == 0 and cov["parametrization"] == tag
    assert np.asarray(cov["matrix"]).shape == (2, 2)


def test_json_round_trip(tmp_path, capsys):
    rng = np.random.default_rng(0)
    groups = [(n, np.cov(rng.standard_normal((3, n + 1)))) for n in (30, 45, 60)]
    path = write_groups(tmp_path / "g.json", groups)
    out = run(["estimate", path, "--format", "json", "--cov", "sigma"], capsys)[1]
    rep = json.loads(out)
    assert json.loads(cli.emit_json(rep)) == rep


def test_parse_error_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"groups": [\n  {"n": 3 "S": [[1]]}]}')
    code, out, err = run(["estimate", str(bad)], capsys)
    assert code == 2 and out == ""
    assert "line 2" in err and "column" in err


@pytest.mark.parametrize("doc", ['{"groups": []}', '{"groups": [{"n": 5}]}', '[1, 2]',
                                 '{"groups": [{"n": 5, "S": [[1, 2]]}]}'])
def test_malformed_documents(tmp_path, capsys, doc):
    p = tmp_path / "x.json"
    p.write_text(doc)
    assert run(["estimate", str(p)], capsys)[0] == 2


def test_missing_file(capsys):
    assert run(["estimate", "/nonexistent/file.json"], capsys)[0] == 2


def test_not_positive_definite(tmp_path, capsys):
    path = write_groups(tmp_path / "g.json", [(10, [[1.0, 2.0], [2.0, 1.0]])])
    code, _, err = run(["estimate", path], capsys)
    assert code == 3 and "positive definite" in err


def test_not_converged_still_reports(tmp_path, capsys):
    rng = np.random.default_rng(1)
    groups = [(n, np.cov(rng.standard_normal((3, n + 1)))) for n in (20, 30, 40)]
    path = write_groups(tmp_path / "g.json", groups)
    code, out, _ = run(["estimate", path, "--max-iter", "1", "--format", "json"], capsys)
    assert code == 4
    assert json.loads(out)["converged"] is False


def test_homogeneity_identical(tmp_path, capsys):
    S = [[1.0, 0.2], [0.2, 3.0]]
    path = write_groups(tmp_path / "g.json", [(40, S), (70, S)])
    code, out, _ = run(["test", path, "--format", "json"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["statistic"] == pytest.approx(0.0, abs=1e-12) and rep["p_value"] == pytest.approx(1.0)


def test_homogeneity_worked_example(tmp_path, capsys):
    # c_hat_2 = 2 at p = 2 with equal weights and n_+ = 100 gives 6.25
    path = write_groups(tmp_path / "g.json", [(50, np.eye(2)), (50, 2 * np.eye(2))])
    code, out, _ = run(["test", path, "--format", "json"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["df"] == 1
    assert rep["statistic"] == pytest.approx(6.25, rel=1e-8)
    assert rep["p_value"] == pytest.approx(inference.chi_square_sf(rep["statistic"], 1), rel=1e-10)
    assert rep["p_value"] == pytest.approx(math.erfc(math.sqrt(6.25 / 2)), rel=1e-7)


def test_homogeneity_single_group(scalar_file, tmp_path, capsys):
    path = write_groups(tmp_path / "one.json", [(10, np.eye(2))])
    code, _, err = run(["test", path], capsys)
    assert code == 5 and "two groups" in err


def test_csv_input(tmp_path, capsys):
    (tmp_path / "a.csv").write_text("1.0,0.0\n0.0,1.0\n")
    (tmp_path / "b.csv").write_text("3.0,0.0\n0.0,3.0\n")
    code, out, _ = run(["estimate", str(tmp_path / "a.csv"), str(tmp_path / "b.csv"),
                        "--n", "20", "--n", "20", "--format", "json"], capsys)
    assert code == 0
    assert json.loads(out)["c"][1] == pytest.approx(3.0, rel=1e-10)
    assert run(["estimate", str(tmp_path / "a.csv")], capsys)[0] == 2  # missing --n


def test_validate(capsys):
    code, out, _ = run(["validate"], capsys)
    assert code == 0
    assert out.count("PASS") == 15 and "FAIL" not in out


def sim_config(tmp_path, **kw):
    doc = {"study": "level", "c": [1.0, 1.0, 1.0], "Sigma1": [[1.0, 0.3], [0.3, 2.0]],
           "N": [200, 200, 200], "reps": 200, "seed": 3, "alpha": 0.05}
    doc.update(kw)
    path = tmp_path / "sim.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_simulate_level(tmp_path, capsys):
    out_file = tmp_path / "rep.json"
    code, out, _ = run(["simulate", sim_config(tmp_path), "--output", str(out_file)], capsys)
    assert code == 0 and "rejection rate" in out
    rep = json.loads(out_file.read_text())
    lo, hi = rep["nominal_band"]
    assert lo <= rep["rejection_rate"] <= hi


def test_simulate_is_deterministic(tmp_path):
    cfg = sim_config(tmp_path, study="covariance", c=[1.0, 1.5], Sigma1=[[1.0]], N=[100, 100], reps=100)
    cmd = [sys.executable, "-m", "propcov.cli", "simulate", cfg, "--seed", "9", "--format", "json"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b and a


def test_simulate_bad_config(tmp_path, capsys):
    assert run(["simulate", sim_config(tmp_path, study="nope")], capsys)[0] == 2
    assert run(["simulate", sim_config(tmp_path, reps=10)], capsys)[0] == 2


def test_console_script_help():
    exe = os.path.join(os.path.dirname(sys.executable), "propcov")
    cmd = [exe, "--help"] if os.path.exists(exe) else [sys.executable, "-m", "propcov.cli", "--help"]
    out = subprocess.run(cmd, capture_output=True, text=True, check=True).stdout
    assert "exit codes" in out
