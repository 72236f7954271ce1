import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besovtrace import harness
from besovtrace.funcspace import ArrayField, NormParams, bump
from besovtrace.geometry import sawtooth_graph
from besovtrace.harness import (EXPERIMENTS, PRESETS, ExperimentConfig, Report, cusp_data, oracle,
                                parse_atom, parse_field, preset, run_experiment)


@pytest.mark.parametrize("kw", [dict(ladder=(6,)), dict(ladder=(7, 6)), dict(ladder=(6, 6)),
                                dict(tolerances={"relative": 0.0}),
                                dict(tolerances={"relative": -1})])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ExperimentConfig("poincare", **kw)


def test_config_from_json_sources_and_overrides(tmp_path):
    data = {"name": "wavelet-sanity", "seed": 3, "ladder": [5, 6, 8]}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data))
    for src in (data, str(path), json.dumps(data)):
        cfg = ExperimentConfig.from_json(src, seed=11, workers=None)
        assert cfg.experiment == "wavelet-sanity"
        assert cfg.seed == 11 and cfg.workers == 1
        assert cfg.ladder == (5, 6, 8)
    assert cfg.tol("missing", 0.25) == 0.25
    assert cfg.to_dict()["ladder"] == [5, 6, 8]


def test_unknown_experiment_and_preset():
    with pytest.raises(ValueError):
        run_experiment(ExperimentConfig("no-such-experiment"))
    with pytest.raises(ValueError):
        preset("no-such-experiment")


def test_presets_cover_every_experiment():
    assert set(PRESETS) == set(EXPERIMENTS)
    for name in EXPERIMENTS:
        assert preset(name).experiment == name


def test_empty_case_list_passes():
    rep = run_experiment(ExperimentConfig("poincare"), cases=[])
    assert rep.passed and rep.cases == []
    assert rep.to_dict()["schema"] == harness.SCHEMA


def _cases():
    def good():
        return {"values": {"x": 1.5, "inf": math.inf, "arr": np.arange(2)}, "passed": True}

    def bad():
        raise RuntimeError("boom")

    def quiet():
        return {"passed": np.bool_(True)}

    return [("good", {"a": 1}, good), ("bad", {}, bad), ("quiet", {}, quiet)]


def test_case_failures_are_captured():
    rep = run_experiment(ExperimentConfig("poincare"), cases=_cases())
    names = [c["name"] for c in rep.cases]
    assert names == ["good", "bad", "quiet"]
    assert not rep.passed
    bad = rep.cases[1]
    assert bad["passed"] is False and bad["error"] == "RuntimeError: boom"
    assert rep.cases[0]["values"]["inf"] == "inf"
    assert rep.cases[2]["passed"] is True and rep.cases[2]["values"] == {}


@pytest.mark.parametrize("workers", [1, 3])
def test_writers_and_determinism(tmp_path, workers):
    outs = {k: str(tmp_path / f"r.{k}") for k in ("json", "csv", "dat")}
    cfg = ExperimentConfig("poincare", outputs=outs, seed=5, workers=workers)
    rep = run_experiment(cfg, cases=_cases())
    again = run_experiment(ExperimentConfig("poincare", outputs={}, seed=5, workers=workers),
                           cases=_cases())
    d1, d2 = json.loads(rep.values_json()), json.loads(again.values_json())
    d1.pop("config"), d2.pop("config")
    assert d1 == d2
    loaded = json.loads(open(outs["json"]).read())
    assert loaded["schema"] == harness.SCHEMA and loaded["passed"] is False
    assert set(loaded["env"]) >= {"python", "numpy"}
    rows = list(csv.reader(open(outs["csv"])))
    assert rows[0] == ["case", "quantity", "value", "passed"]
    assert ["good", "x", "1.5", "1"] in rows
    dat = open(outs["dat"]).read()
    assert "# x" in dat and "0 1.5 1  # good" in dat


def test_report_rows_skip_non_numeric():
    rep = Report("x", [{"name": "c", "passed": True, "values": {"a": 2.0, "flag": True, "s": "t"}}],
                 {}, 0, 0.0, {})
    assert rep.rows() == [("c", "a", 2.0, True)]


def test_oracle_cache_and_log():
    log = []
    inputs = {"exponent": -0.5, "levels": 12}
    a = oracle("richardson_quadrature", inputs, log)
    b = oracle("richardson_quadrature", dict(inputs), log)
    assert a is b
    assert len(log) == 2 and log[0]["inputs_hash"] == log[1]["inputs_hash"]
    with pytest.raises(ValueError):
        oracle("nope", {})


@pytest.mark.parametrize("s, exact", [(-0.5, 2.0), (0.0, 1.0), (0.5, 2 / 3), (-0.3, 1 / 0.7)])
def test_richardson_oracle_singular_powers(s, exact):
    assert oracle("richardson_quadrature", {"exponent": s})["value"] == pytest.approx(exact, abs=1e-6)


def test_richardson_oracle_smooth_integrand():
    out = oracle("richardson_quadrature", {"f": np.exp, "a": 0.0, "b": 1.0})
    assert out["value"] == pytest.approx(math.e - 1, abs=1e-10)


def test_dense_distance_oracle():
    # distance from (0, 1) to the graph of |x| is 1/sqrt(2)
    out = oracle("dense_boundary_distance", {"domain": {"psi": "abs", "M": 1.0}, "point": (0.0, 1.0)})
    assert out["value"] == pytest.approx(1 / math.sqrt(2), abs=1e-4)


def test_fourier_truncation_oracle_is_exact_for_trig_polynomials():
    out = oracle("fourier_truncation", {"g": lambda p: np.cos(3 * p) - 2 * np.sin(p), "terms": 4})
    assert out["value"] < 1e-12
    assert out["coefficients"][3] == pytest.approx(0.5)
    assert out["coefficients"][1] == pytest.approx(1j)


def test_parse_field_grammar():
    f = parse_field("2*bump:cx=0,ct=0,radius=1 + 0.5")
    g = bump((0.0, 0.0), 1.0)
    x, t = np.array([0.1, 0.4]), np.array([0.2, 0.3])
    assert np.allclose(f(x, t), 2 * g(x, t) + 0.5)
    assert parse_field("zoo:bump:radius=1")(0.0, 0.0) == pytest.approx(1.0)
    G = parse_field("grad1:monomial:a=1,b=1")
    assert isinstance(G, ArrayField)
    assert float(G[(1, 0)](np.array(0.5), np.array(3.0))) == pytest.approx(3.0)
    assert parse_field(f) is f
    with pytest.raises(ValueError):
        parse_field("nonsense:x=1")


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(-1, 1), st.floats(0, 1))
def test_parse_field_constant_terms(c, x, t):
    f = parse_field(f"{c!r} + {c!r}*monomial:a=1,b=0")
    assert f(x, t) == pytest.approx(c + c * x, abs=1e-12)


def test_parse_atom():
    P = NormParams(1.0, 0.5)
    D = sawtooth_graph(0.5, 1.0, (-8, 8))
    a = parse_atom("atom:kind=negative,profile=sine,k=2,x0=0.3,r=0.5", P, D)
    assert a.kind == "negative" and a.x0 == 0.3 and a.r == 0.5
    b = parse_atom("profile=hat,kind=positive", P)
    assert b.kind == "positive" and b.r == 1.0
    with pytest.raises(ValueError):
        parse_atom("atom:profile=zigzag", P)


def test_cusp_data():
    f = cusp_data(0.3, 0.5)
    assert f(np.array(0.3)) == 0.0
    assert f(np.array(0.3 + 1e-4)) == pytest.approx(1e-2, rel=1e-3)
    assert 0.3 in f.breaks


def test_small_preset_runs():
    rep = run_experiment(preset("wavelet-sanity", options={"orders": [2]}))
    assert rep.passed and [c["name"] for c in rep.cases] == ["D4"]
    assert rep.cases[0]["values"]["gram_deviation"] < 1e-6


def test_jsonable_handles_numpy_and_complex():
    out = harness._jsonable({"c": np.array([1 + 2j]), "n": np.int64(3), "x": -math.inf,
                             "nan": float("nan"), "P": NormParams(2.0, 0.5)})
    assert out["c"] == [[1.0, 2.0]] and out["n"] == 3 and out["x"] == "-inf" and out["nan"] == "nan"
    assert json.loads(json.dumps(out))["P"]["p"] == 2.0
