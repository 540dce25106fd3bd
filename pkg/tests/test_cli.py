import csv
import json
import math

import pytest

from wolffpot.cli import main


def run(tmp_path, *argv, name="out.csv"):
    out = tmp_path / name
    code = main(list(argv) + ["--out", str(out)])
    return code, out


def test_eval_zero_measure(tmp_path):
    code, out = run(tmp_path, "eval", "--measure", "zero", "--n", "3", "--two-alpha", "1", "--probes", "4")
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 4
    assert all(float(r["wolff"]) == 0.0 and float(r["riesz"]) == 0.0 for r in rows)


def test_eval_powerlaw_matches_oracle(tmp_path):
    code, out = run(tmp_path, "eval", "--measure", "powerlaw", "--n", "3", "--two-alpha", "1", "--probes", "1e-3")
    assert code == 0
    row = next(csv.DictReader(out.open()))
    assert float(row["wolff"]) == pytest.approx(611.6420863344943, rel=1e-4)


def test_counterexample_csv(tmp_path):
    code, out = run(tmp_path, "counterexample", "--n", "3", "--two-alpha", "1", "--q", "0.5", "--beta", "2")
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["rho", "u", "k_term", "tail_term", "envelope", "ratio_5_2", "riesz_potential"]
    at = {float(r["rho"]): float(r["ratio_5_2"]) for r in rows}
    assert 1e-4 in at
    assert at[1e-4] / math.log(1e4) == pytest.approx(0.726586609484736, rel=1e-6)


def test_solve_powerlaw_json(tmp_path):
    code, out = run(tmp_path, "solve", "--measure", "powerlaw", "--n", "3", "--two-alpha", "1", "--q", "0.5",
                    "--format", "json", name="s.json")
    assert code == 0
    data = json.loads(out.read_text())
    sw = data["sandwich"]
    assert sw["c_lower"] > 0 and sw["c_upper"] >= sw["c_lower"]


def test_solve_counterexample_signals_condition_failure(tmp_path):
    code, out = run(tmp_path, "solve", "--measure", "counterexample", "--n", "3", "--two-alpha", "1", "--q", "0.5")
    assert code == 2 and out.exists()


def test_check_conditions_exit_codes(tmp_path):
    code, out = run(tmp_path, "check-conditions", "--measure", "counterexample", "--n", "3", "--two-alpha", "1",
                    "--q", "0.5", "--probes", "0.1,0.01,0.001,1e-4,1e-5,1e-6", "--format", "json", name="c.json")
    assert code == 2
    reports = {r["condition_id"]: r for r in json.loads(out.read_text())}
    assert reports["pointwise_kappa"]["verdict"] == "fails"
    assert reports["radial_existence"]["verdict"] == "holds"


@pytest.mark.parametrize("argv", [
    ["eval", "--measure", "missing.json", "--n", "3", "--alpha", "1"],
    ["eval", "--measure", "powerlaw", "--n", "3"],
    ["eval", "--measure", "powerlaw", "--n", "3", "--two-alpha", "1", "--s", "2.5"],
    ["solve", "--measure", "atom", "--n", "3", "--alpha", "1", "--q", "1.5"],
    ["eval", "--measure", "atom", "--n", "3", "--alpha", "2"],
    ["eval", "--measure", "atom", "--n", "3", "--alpha", "1", "--probes", "abc"],
    ["eval", "--measure", "atom", "--n", "3", "--alpha", "1", "--probes", "-1.0,2.0"],
    ["eval", "--measure", "atom", "--n", "3", "--alpha", "1", "--probes=-1.0,2.0"],
    ["eval", "--measure", "atom", "--n", "3", "--alpha", "1", "--format", "xml"],
    ["frobnicate"],
    ["counterexample", "--n", "3", "--two-alpha", "1", "--q", "0.5", "--beta", "1"],
])
def test_input_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    err = capsys.readouterr().err.strip()
    assert err.startswith("error:") and "\n" not in err


@pytest.mark.parametrize("payload", ['{"n": 3, "radial', '{"n": 2, "radial_segments": [], "atoms": []}',
                                     '{"n": 3, "radial_segments": [{"c": -1, "s": 0, "beta": 0, "r_lo": 0, '
                                     '"r_hi": 1, "log_scale": 1}], "atoms": []}'])
def test_malformed_measure_files(tmp_path, payload, capsys):
    path = tmp_path / "m.json"
    path.write_text(payload)
    assert main(["eval", "--measure", str(path), "--n", "3", "--alpha", "1"]) == 1
    assert capsys.readouterr().err.startswith("error:")


def test_measure_file_roundtrip(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"n": 3, "radial_segments": [], "atoms": [
        {"center": [0.5, 0.0, 0.0], "mass": 1.0, "radius": 0.01}]}))
    code, out = run(tmp_path, "eval", "--measure", str(path), "--n", "3", "--alpha", "1", "--probes", "3.0")
    assert code == 0
    row = next(csv.DictReader(out.open()))
    # distance 2.5 from a near-point unit mass: 1/2.5
    assert float(row["wolff"]) == pytest.approx(0.4, rel=1e-3)


def test_byte_identical_reruns(tmp_path):
    argv = ["check-conditions", "--measure", "powerlaw", "--n", "3", "--two-alpha", "1", "--q", "0.5",
            "--probes", "5", "--seed", "7"]
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    main(argv + ["--out", str(a)])
    main(argv + ["--out", str(b)])
    assert a.read_bytes() == b.read_bytes()
