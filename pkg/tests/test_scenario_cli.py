import csv
import io
import json
from fractions import Fraction as F
from importlib.resources import files

import jsonschema
import pytest

from treerbsde import cli, pricing
from treerbsde.scenario import (
    Expression,
    ScenarioError,
    bundled,
    bundled_scenarios,
    load_scenario,
    node_env,
    scenario_from_dict,
)

SCENARIO_A = {
    "name": "a",
    "mode": "rational",
    "tree": {"binomial": {"s0": 100, "u": "6/5", "d": "9/10", "n_steps": 2, "maturity": 1}},
    "generator": {"name": "zero"},
    "payoff": {"expr": "-max(100 - S, 0)"},
}


def schema(name):
    return json.loads((files("treerbsde") / "schemas" / name).read_text())


def write(tmp_path, doc, name="sc.json"):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return str(p)


def path_of(name):
    return next(p for p in bundled_scenarios() if p.endswith(f"/{name}.json"))


def test_dict_round_trip():
    sc = scenario_from_dict(SCENARIO_A)
    assert sc.tree.n_nodes == 7 and sc.contract.payoff[6] == F(-19)


@pytest.mark.parametrize("patch, message", [
    ({"colour": "red"}, "unknown key"),
    ({"mode": "decimal"}, "mode"),
    ({"payoff": {"expr": "__import__('os')"}}, "expression"),
    ({"payoff": {"expr": "S +"}}, "expression"),
    ({"payoff": {"expr": "spot * 2"}}, "unknown name"),
    ({"payoff": {"table": [1, 2]}}, "expected 7 values"),
    ({"generator": {"name": "mystery"}}, "generator"),
])
def test_rejections(patch, message):
    with pytest.raises(ScenarioError, match=message):
        scenario_from_dict({**SCENARIO_A, **patch})


def test_json_error_has_location(tmp_path):
    p = write(tmp_path, '{\n  "name": ,\n}')
    with pytest.raises(ScenarioError, match=r"sc\.json:2:11"):
        load_scenario(p)


def test_expressions_over_paths():
    sc = bundled("scenario_a")
    tree = sc.tree
    look = Expression("path_max - S if k == N else 0", exact=True)
    assert look(node_env(tree, 4)) == 12 and look(node_env(tree, 1)) == 0
    assert Expression("max(S, 1) + abs(-t) + (k > 0 and 1)", exact=True)(node_env(tree, 0)) == 100
    two = bundled("two_asset_d2")
    assert Expression("S[1] - S[0]", exact=True)(node_env(two.tree, 0)) == (
        two.tree.prices[0][1] - two.tree.prices[0][0])


def test_price_json_and_csv(tmp_path, capsys):
    out = tmp_path / "a.json"
    assert cli.main(["price", path_of("scenario_a"), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, schema("price_report.schema.json"))
    assert doc["p_issuer"] == "76/9" and doc["p_holder"] == "76/9"
    rows = list(csv.DictReader(io.StringIO((tmp_path / "a.nodes.csv").read_text())))
    assert len(rows) == 14 and rows[0]["Y"] == "76/9"
    assert cli.main(["price", path_of("scenario_b"), "--format", "csv", "--side", "issuer"]) == 0
    assert capsys.readouterr().out.startswith("side,node,k,S,Y,Z,dK,obstacle,contact")


def test_verify_report_schema(tmp_path):
    out = tmp_path / "v.json"
    assert cli.main(["verify", path_of("put_d3_linear"), "--suite", "fast", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, schema("verification_report.schema.json"))
    assert doc["passed"] and doc["summary"]["failed"] == 0


def test_exit_code_parse_error(tmp_path, capsys):
    assert cli.main(["price", write(tmp_path, "{ not json")]) == 2
    assert "sc.json:1:3" in capsys.readouterr().err
    assert cli.main(["verify", str(tmp_path / "missing.json")]) == 2


def test_exit_code_solver_error(tmp_path):
    bad = {**SCENARIO_A, "generator": {"name": "linear", "params": {"r": 100}}}
    assert cli.main(["price", write(tmp_path, bad)]) == 3


def test_negative_control_fails_verification(tmp_path, monkeypatch):
    real = pricing.solve_reflected_lower

    def broken(*args, **kwargs):
        sol = real(*args, **kwargs)
        Y = list(sol.Y)
        Y[0] += 1
        return sol._replace(Y=tuple(Y)) if hasattr(sol, "_replace") else type(sol)(
            **{**sol.__dict__, "Y": tuple(Y)})

    monkeypatch.setattr(pricing, "solve_reflected_lower", broken)
    out = tmp_path / "v.json"
    assert cli.main(["verify", path_of("scenario_a"), "--suite", "fast", "--out", str(out)]) == 1
    assert not json.loads(out.read_text())["passed"]


def test_deep_tree_refuses_enumeration(tmp_path):
    out = tmp_path / "v.json"
    assert cli.main(["verify", path_of("deep_d8"), "--suite", "fast", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert any(s["name"] == "enumeration" for s in doc["skipped"])


def test_exercise_table(capsys):
    assert cli.main(["exercise", path_of("scenario_a")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["issuer_earliest"] == [1, 5, 6] and doc["holder_latest"] == [3, 4, 5, 6]
    assert len(doc["rows"]) == 2
    assert all(all(r["issuer_break_even"].values()) and r["holder_rational"] for r in doc["rows"])
