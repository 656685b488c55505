import csv
import io
import json
import math
from pathlib import Path

import pytest

from chandisc.cli import run
from chandisc.serialization import (ConfigError, config_hash, dumps, parse_config_text,
                                    parse_real, parse_state, to_jsonable)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def invoke(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


EX_ROWS = {
    "E1": {"rows": [["1/2", 0, "1/2", 0], ["1/2", 0, "1/2", 0]]},
    "F1": {"rows": [["3/4", 0, "1/4", 0], ["1/2", 0, "1/2", 0]]},
}


# --- divergence ---------------------------------------------------------------

def test_dh_uniform(tmp_path):
    cfg = {"version": "1", "kind": "divergence", "divergence": "dh",
           "states": {"rho": ["1/2", "1/2"], "sigma": ["1/2", "1/2"]}, "params": {"eps": 0.1}}
    code, out, _ = invoke("divergence", "--config", write(tmp_path, cfg))
    rep = json.loads(out)
    assert code == 0
    assert rep["value"] == pytest.approx(0.152003, abs=1e-6) and rep["infinite"] is False


def test_kl_on_example_marginals(tmp_path):
    cfg = {"version": "1", "kind": "divergence", "divergence": "kl",
           "states": {"rho": ["1/2", 0, "1/2", 0], "sigma": ["3/4", 0, "1/4", 0]}}
    rep = json.loads(invoke("divergence", "--config", write(tmp_path, cfg))[1])
    assert rep["value"] == pytest.approx(0.207519, abs=1e-6)


def test_quantum_orthogonal_is_infinite(tmp_path):
    cfg = {"version": "1", "kind": "divergence", "divergence": "quantum",
           "states": {"rho": [[1, 0], [0, 0]], "sigma": [[0, 0], [0, 1]]}}
    code, out, _ = invoke("divergence", "--config", write(tmp_path, cfg))
    rep = json.loads(out)
    assert code == 0 and rep["infinite"] is True and rep["value"] == "inf"


def test_dimension_mismatch_exit_3(tmp_path):
    cfg = {"version": "1", "kind": "divergence", "divergence": "kl",
           "states": {"rho": ["1/2", "1/2"], "sigma": ["1/3", "1/3", "1/3"]}}
    assert invoke("divergence", "--config", write(tmp_path, cfg))[0] == 3


# --- schema errors ----------------------------------------------------------------

def test_schema_error_names_field(tmp_path):
    cfg = {"version": "1", "kind": "divergence", "divergence": "renyi"}
    code, _, err = invoke("divergence", "--config", write(tmp_path, cfg))
    assert code == 2 and "divergence" in err


def test_json_syntax_error_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "version": "1",\n  "kind": \n}')
    code, _, err = invoke("divergence", "--config", str(p))
    assert code == 2 and "line 4" in err


def test_missing_config_and_kind_mismatch(tmp_path):
    assert invoke("divergence")[0] == 2
    cfg = {"version": "1", "kind": "exponent", "exponent": "convex", "use_example12": True}
    assert invoke("divergence", "--config", write(tmp_path, cfg))[0] == 2


# --- exponents -------------------------------------------------------------------

@pytest.mark.parametrize("which,expected", [("parallel-finite", 0.103759), ("iid-bound", 0.207519)])
def test_example_exponents(tmp_path, which, expected):
    cfg = {"version": "1", "kind": "exponent", "exponent": which, "use_example12": True}
    code, out, _ = invoke("exponent", "--config", write(tmp_path, cfg))
    assert code == 0 and json.loads(out)["value"] == pytest.approx(expected, abs=1e-6)


def test_convex_singletons_and_precondition(tmp_path):
    cfg = {"version": "1", "kind": "exponent", "exponent": "convex", "channels": EX_ROWS,
           "hypotheses": {"s": {"vertices": ["E1"], "take_hull": True},
                          "t": {"vertices": ["F1"], "take_hull": True}}}
    code, out, _ = invoke("exponent", "--config", write(tmp_path, cfg))
    assert code == 0 and json.loads(out)["value"] == pytest.approx(math.log2(4 / 3) / 2, abs=1e-6)
    cfg["hypotheses"]["s"]["take_hull"] = False
    assert invoke("exponent", "--config", write(tmp_path, cfg))[0] == 4


def test_exponent_csv(tmp_path):
    cfg = {"version": "1", "kind": "exponent", "exponent": "parallel-finite", "use_example12": True}
    code, out, _ = invoke("exponent", "--config", write(tmp_path, cfg), "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["instance", "value", "lower", "upper"]
    assert float(rows[1][1]) == pytest.approx(0.103759375)


# --- simulate -----------------------------------------------------------------------

def test_simulate_equal_families_flat(tmp_path):
    cfg = {"version": "1", "kind": "simulate", "channels": EX_ROWS,
           "hypotheses": {"s": {"vertices": ["E1"]}, "t": {"vertices": ["E1"]}},
           "strategy": {"type": "parallel", "input": 0}, "params": {"n_list": [8, 9, 10, 11]}}
    rep = json.loads(invoke("simulate", "--config", write(tmp_path, cfg))[1])
    assert abs(rep["slope"]) <= 1e-3


def test_simulate_csv_columns(tmp_path):
    cfg = {"version": "1", "kind": "simulate", "use_example12": True,
           "strategy": {"type": "parallel", "input": "alternating"}}
    code, out, _ = invoke("simulate", "--config", write(tmp_path, cfg), "--n-list", "8:10",
                          "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert rows[0] == ["n", "alpha", "beta", "exponent_estimate", "ci_low", "ci_high"]
    assert [r[0] for r in rows[1:4]] == ["8", "9", "10"]
    assert rows[4][0] == "# slope"


def test_simulate_size_cap_exit_5_and_monte_carlo_fallback(tmp_path):
    cfg = {"version": "1", "kind": "simulate", "use_example12": True,
           "hypotheses": {"s": {"vertices": ["E1"], "family_kind": "arbitrarily_varying"},
                          "t": {"vertices": ["F1"]}},
           "strategy": {"type": "parallel", "input": 0}, "params": {"n": 13}}
    cfg.pop("use_example12")
    cfg["channels"] = {**EX_ROWS, "E2": {"rows": [[0, "1/2", 0, "1/2"], [0, "1/2", 0, "1/2"]]}}
    cfg["hypotheses"]["s"]["vertices"] = ["E1", "E2"]
    path = write(tmp_path, cfg)
    assert invoke("simulate", "--config", path)[0] == 5


FOUR_SYMBOL = {
    "A": {"rows": [["0.1", "0.2", "0.3", "0.4"], ["0.15", "0.35", "0.2", "0.3"]]},
    "B": {"rows": [["0.4", "0.3", "0.2", "0.1"], ["0.3", "0.2", "0.35", "0.15"]]},
    "C": {"rows": [["0.11", "0.23", "0.29", "0.37"], ["0.17", "0.31", "0.23", "0.29"]]},
}


def test_incomplete_policy_table_is_a_config_error(tmp_path):
    cfg = {"version": "1", "kind": "simulate", "channels": FOUR_SYMBOL,
           "hypotheses": {"s": {"vertices": ["A", "C"]}, "t": {"vertices": ["B"]}},
           "strategy": {"type": "adaptive", "policy": {"": 0}}}
    assert invoke("simulate", "--config", write(tmp_path, cfg), "--n", "2")[0] == 2


def test_simulate_monte_carlo_when_lumping_overflows(tmp_path):
    cfg = {"version": "1", "kind": "simulate", "channels": FOUR_SYMBOL,
           "hypotheses": {"s": {"vertices": ["A", "C"]}, "t": {"vertices": ["B"]}},
           "strategy": {"type": "parallel", "input": ["1/2", "1/2"]}}
    path = write(tmp_path, cfg)
    assert invoke("simulate", "--config", path, "--n", "8")[0] == 5
    code, out, _ = invoke("simulate", "--config", path, "--n", "8", "--monte-carlo",
                          "--samples", "2000", "--seed", "5")
    assert code == 0
    row = json.loads(out)["rows"][0]
    assert row["ci_low"] <= row["exponent_estimate"] <= row["ci_high"]
    assert row["ci_low"] < row["ci_high"]


# --- adversary -------------------------------------------------------------------------

def test_adversary_singleton(tmp_path):
    cfg = {"version": "1", "kind": "adversary",
           "adversary": {"q": [["0.3", "0.7"]], "region": [1, 0, 0, 1]}, "params": {"n": 2}}
    rep = json.loads(invoke("adversary", "--config", write(tmp_path, cfg))[1])
    assert rep["value"] == pytest.approx(0.09 + 0.49)


def test_adversary_truncation_and_cap(tmp_path):
    cfg = {"version": "1", "kind": "adversary",
           "adversary": {"p": [["0.8", "0.2"]], "q": [["0.3", "0.7"], ["0.1", "0.9"]],
                         "universal": True}, "params": {"n": 6}}
    rep = json.loads(invoke("adversary", "--config", write(tmp_path, cfg))[1])
    assert rep["policy_truncated"] is True and len(rep["policy"]) == 1 + 2 + 4 + 8
    assert len(rep["policy_sha256"]) == 64
    assert invoke("adversary", "--config", write(tmp_path, cfg), "--n", "13")[0] == 5


# --- example, determinism, provenance ---------------------------------------------------

def test_example12_command():
    code, out, _ = invoke("example12")
    rep = json.loads(out)
    assert code == 0
    assert rep["ratio"] == pytest.approx(2.0, abs=1e-6)


def test_reports_are_deterministic_and_stamped(tmp_path):
    cfg = {"version": "1", "kind": "divergence", "divergence": "dm-lower",
           "states": {"rho": [["0.7", "0.2"], ["0.2", "0.3"]], "sigma": [["0.5", 0], [0, "0.5"]]}}
    path = write(tmp_path, cfg)
    a = invoke("divergence", "--config", path, "--seed", "9")[1]
    b = invoke("divergence", "--config", path, "--seed", "9")[1]
    assert a == b
    rep = json.loads(a)
    assert rep["seed"] == 9 and rep["tool_version"]
    c = json.loads(invoke("divergence", "--config", path, "--seed", "10")[1])
    assert c["config_hash"] != rep["config_hash"]


def test_out_file(tmp_path):
    target = tmp_path / "report.json"
    assert invoke("example12", "--out", str(target))[0] == 0
    assert json.loads(target.read_text())["command"] == "example12"


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.name)
def test_shipped_configs_run(path):
    cfg = json.loads(path.read_text())
    code, out, err = invoke(cfg["kind"], "--config", str(path))
    assert code == 0, err
    assert json.loads(out)["command"] == cfg["kind"]


# --- serialization ------------------------------------------------------------------------

def test_rational_parsing_and_round_trip():
    assert parse_real("3/4") == 0.75
    with pytest.raises(ConfigError):
        parse_real("three")
    state = parse_state([["1/2", [0, "1/4"]], [[0, "-1/4"], "1/2"]])
    again = parse_state(json.loads(dumps(state)))
    assert (again.matrix == state.matrix).all()


def test_float_formatting():
    plain = to_jsonable({"a": 1 / 3, "b": math.inf, "c": [2.0 ** -40]})
    assert plain == {"a": 0.333333333, "b": "inf", "c": [9.09494702e-13]}


def test_config_hash_is_canonical():
    a = {"version": "1", "kind": "example12", "params": {"n": 3, "eps": 0.1}}
    b = {"params": {"eps": 0.1, "n": 3}, "kind": "example12", "version": "1"}
    assert config_hash(a) == config_hash(b)


def test_schema_accepts_shipped_and_rejects_extras():
    for p in CONFIGS.glob("*.json"):
        parse_config_text(p.read_text())
    with pytest.raises(ConfigError):
        parse_config_text('{"version": "1", "kind": "example12", "colour": 1}')
