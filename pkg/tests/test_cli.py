import json
import math

import pytest

from besovtrace.cli import build_parser, main


def _run(capsys, argv):
    code = main(argv)
    return code, capsys.readouterr()


def test_norm_verb(capsys, tmp_path):
    out = tmp_path / "n.json"
    code, cap = _run(capsys, ["norm", "bump:cx=0,ct=0.5,radius=0.4", "--depth", "4",
                              "--p", "2", "--q", "2", "--out", str(out)])
    assert code == 0
    data = json.loads(cap.out)
    assert data["value"] > 0
    assert json.loads(out.read_text()) == data


def test_norm_tent_and_infinite_p(capsys):
    code, cap = _run(capsys, ["norm", "bump:cx=0,ct=0.5,radius=0.4", "--depth", "4", "--mode", "tent"])
    assert code == 0 and json.loads(cap.out)["value"] > 0
    code, cap = _run(capsys, ["norm", "bump:cx=0,ct=0.5,radius=0.4", "--depth", "4",
                              "--p", "inf", "--q", "inf"])
    assert code == 0 and math.isfinite(json.loads(cap.out)["value"])


def test_extend_verb_on_sawtooth(capsys):
    code, cap = _run(capsys, ["extend", "atom:kind=positive,profile=hat,x0=0,r=1",
                              "--domain", "sawtooth", "--slope", "0.5",
                              "--at", "0.1", "0.5", "0.3", "0.9"])
    assert code == 0
    data = json.loads(cap.out)
    assert len(data["values"]) == 2


def test_trace_verbs(capsys):
    code, cap = _run(capsys, ["trace", "extract", "bump:cx=0,ct=0,radius=0.8,power=3",
                              "--interval", "-1", "1", "--grid", "64", "--levels", "6",
                              "--depth", "5", "--p", "2", "--q", "2"])
    assert code == 0
    assert 1e-2 < json.loads(cap.out)["ratio"] < 1e2
    code, cap = _run(capsys, ["trace", "roundtrip", "atom:kind=positive,profile=hat,x0=0.1,r=1",
                              "--domain", "sawtooth", "--interval", "-0.6", "0.8",
                              "--grid", "9", "--levels", "8"])
    assert code == 0
    assert json.loads(cap.out)["sup_error"] < 0.05


def test_neumann_verbs(capsys, tmp_path):
    code, cap = _run(capsys, ["neumann", "extend", "atom:profile=oddbump,x0=0,r=1"])
    assert code == 0
    data = json.loads(cap.out)
    assert data["pairing"] == pytest.approx(data["boundary_pairing"], rel=1e-3)
    assert abs(data["weak_divergence"]) < 1e-3
    csv_path = tmp_path / "m.csv"
    code, cap = _run(capsys, ["neumann", "trace", "atom:profile=square,x0=0,r=1", "--levels", "3",
                              "--csv", str(csv_path)])
    assert code == 0
    assert json.loads(cap.out)["coefficients"] > 0
    assert csv_path.read_text().startswith("kind,level,translate,j,value")


def test_experiment_verb(capsys, tmp_path):
    cfg = json.dumps({"name": "wavelet-sanity", "options": {"orders": [2]}})
    out = tmp_path / "r.json"
    code, cap = _run(capsys, ["experiment", "--config", cfg, "--json", str(out)])
    assert code == 0
    assert "PASS D4" in cap.out
    assert json.loads(out.read_text())["passed"] is True


def test_experiment_failure_exit_code(capsys):
    cfg = json.dumps({"name": "wavelet-sanity", "options": {"orders": [2]},
                      "tolerances": {"gram": 1e-30}})
    code, cap = _run(capsys, ["experiment", "--config", cfg])
    assert code == 1 and "FAIL D4" in cap.out


def test_oracle_verb(capsys):
    code, cap = _run(capsys, ["oracle", "brute_double_sum", "--inputs",
                              json.dumps({"f": [0, 1], "p": 2, "theta": 0.5, "n": 2000})])
    assert code == 0
    assert json.loads(cap.out)["value"] == pytest.approx(1.0, abs=2e-3)
    code, cap = _run(capsys, ["oracle", "fourier_truncation", "--inputs",
                              json.dumps({"g": "square", "terms": 64})])
    assert code == 0 and 0 < json.loads(cap.out)["value"] < 1


def test_value_errors_give_exit_code_2(capsys):
    code, cap = _run(capsys, ["norm", "bump:radius=1", "--p", "0.5"])
    assert code == 2 and cap.err.startswith("error:")


@pytest.mark.parametrize("argv", [[], ["norm"], ["trace", "sideways", "x"], ["experiment", "bogus"]])
def test_parser_rejects_bad_usage(argv):
    with pytest.raises(SystemExit):
        build_parser().parse_args(argv)
