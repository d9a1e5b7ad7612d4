"""Scenario files: a JSON document that pins down tree, driver, contract and numerics.

Example::

    {
      "name": "put",
      "mode": "rational",
      "tree": {"binomial": {"s0": 100, "u": "6/5", "d": "9/10", "n_steps": 2, "maturity": 1}},
      "generator": {"name": "zero"},
      "payoff": {"expr": "-max(100 - S, 0)"}
    }

Payoffs and cash-flow increments are either expressions or explicit node
tables. Expressions see ``k``, ``t``, ``S`` (``S[i]`` for several assets),
``path_max``, ``path_min``, ``N`` and ``T`` and may use ``max``, ``min``,
``abs``, comparisons, ``and``/``or``/``not`` and ``a if cond else b``.
"""

from __future__ import annotations

import ast
import json
import operator
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

from .generators import (
    CashFlowProcess,
    Endowments,
    Generator,
    RateSchedule,
    make_generator,
)
from .lattice import EventTree, build_binomial, default_budget
from .numeric import convert, to_exact
from .pricing import ContractSpec


class ScenarioError(ValueError):
    """The scenario document is malformed or underdetermined."""


TOP_KEYS = {"name", "description", "mode", "tree", "generator", "payoff", "flows",
            "benchmark", "endowments", "tolerances", "budget", "seed"}
TREE_KEYS = {"binomial", "file", "inline"}
BINOMIAL_KEYS = {"s0", "u", "d", "n_steps", "maturity", "probs"}
GENERATOR_KEYS = {"name", "params"}
PROCESS_KEYS = {"expr", "table"}
BENCHMARK_KEYS = {"rates", "process"}
RATE_KEYS = {"r_lend", "r_borrow"}
ENDOWMENT_KEYS = {"x1", "x2"}
TOL_KEYS = {"float", "picard", "bisect"}


def _check_keys(obj: Any, allowed: set, where: str, required: set = frozenset()) -> None:
    if not isinstance(obj, Mapping):
        raise ScenarioError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = set(required) - set(obj)
    if missing:
        raise ScenarioError(f"{where}: missing key(s) {sorted(missing)}")


def _num(x, exact: bool, where: str):
    if isinstance(x, bool) or not isinstance(x, (int, float, str)):
        raise ScenarioError(f"{where}: expected a number, got {x!r}")
    try:
        return convert(to_exact(x), exact) if isinstance(x, str) else convert(x, exact)
    except (ValueError, ZeroDivisionError) as exc:
        raise ScenarioError(f"{where}: bad number {x!r}") from exc


# -- expressions -----------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_CMPOPS = {ast.Lt: operator.lt, ast.LtE: operator.le, ast.Gt: operator.gt,
           ast.GtE: operator.ge, ast.Eq: operator.eq, ast.NotEq: operator.ne}
_FUNCS = {"max": max, "min": min, "abs": abs}


class Expression:
    """A parsed payoff expression; evaluation walks the syntax tree directly."""

    def __init__(self, source: str, exact: bool):
        self.source = source
        self.exact = exact
        try:
            self.tree = ast.parse(source, mode="eval")
        except SyntaxError as exc:
            raise ScenarioError(f"expression {source!r}: {exc.msg} at column {exc.offset}") from None
        self._check(self.tree.body)

    def _check(self, node) -> None:
        allowed = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.BoolOp, ast.Compare, ast.IfExp,
                   ast.Call, ast.Name, ast.Constant, ast.Subscript, ast.Load, ast.USub,
                   ast.UAdd, ast.Not, ast.And, ast.Or)
        for sub in ast.walk(node):
            if isinstance(sub, (ast.operator, ast.cmpop)):
                if type(sub) not in _BINOPS and type(sub) not in _CMPOPS:
                    raise ScenarioError(f"expression {self.source!r}: operator not allowed")
                continue
            if not isinstance(sub, allowed):
                raise ScenarioError(
                    f"expression {self.source!r}: {type(sub).__name__} not allowed"
                )
            if isinstance(sub, ast.Call):
                if not isinstance(sub.func, ast.Name) or sub.func.id not in _FUNCS or sub.keywords:
                    raise ScenarioError(f"expression {self.source!r}: only max/min/abs calls")
            if isinstance(sub, ast.Constant) and not isinstance(sub.value, (int, float)):
                raise ScenarioError(f"expression {self.source!r}: only numeric constants")

    def __call__(self, env: Mapping):
        try:
            return self._eval(self.tree.body, env)
        except ScenarioError:
            raise
        except Exception as exc:
            raise ScenarioError(f"expression {self.source!r}: {exc}") from None

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            v = node.value
            return convert(to_exact(v), True) if self.exact else float(v)
        if isinstance(node, ast.Name):
            if node.id not in env:
                raise ScenarioError(f"expression {self.source!r}: unknown name {node.id!r}")
            return env[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            x = self._eval(node.operand, env)
            if isinstance(node.op, ast.Not):
                return not x
            return -x if isinstance(node.op, ast.USub) else +x
        if isinstance(node, ast.BoolOp):
            vals = [self._eval(v, env) for v in node.values]
            return all(vals) if isinstance(node.op, ast.And) else any(vals)
        if isinstance(node, ast.Compare):
            left = self._eval(node.left, env)
            for op, comp in zip(node.ops, node.comparators):
                right = self._eval(comp, env)
                if not _CMPOPS[type(op)](left, right):
                    return False
                left = right
            return True
        if isinstance(node, ast.IfExp):
            branch = node.body if self._eval(node.test, env) else node.orelse
            return self._eval(branch, env)
        if isinstance(node, ast.Call):
            return _FUNCS[node.func.id](*(self._eval(a, env) for a in node.args))
        if isinstance(node, ast.Subscript):
            seq = self._eval(node.value, env)
            return seq[int(self._eval(node.slice, env))]
        raise ScenarioError(f"expression {self.source!r}: unsupported syntax")


def node_env(tree: EventTree, v: int) -> dict:
    path = tree.path(v)
    first = [tree.prices[u][0] for u in path]
    spot = tree.prices[v]
    return {
        "k": tree.level[v],
        "t": tree.time(v),
        "S": spot[0] if tree.dim == 1 else spot,
        "path_max": max(first),
        "path_min": min(first),
        "N": tree.depth,
        "T": tree.times[-1],
    }


def _result(x, exact: bool, where: str):
    if isinstance(x, bool):
        x = int(x)
    if not isinstance(x, (int, float, Fraction)):
        raise ScenarioError(f"{where}: expression did not produce a number")
    return convert(x, exact)


def build_process(spec, tree: EventTree, exact: bool, where: str, predictable: bool = False):
    _check_keys(spec, PROCESS_KEYS, where)
    if len(spec) != 1:
        raise ScenarioError(f"{where}: give exactly one of 'expr' or 'table'")
    nodes = tree.internal if predictable else range(tree.n_nodes)
    out = [convert(0, exact)] * tree.n_nodes
    if "expr" in spec:
        if not isinstance(spec["expr"], str):
            raise ScenarioError(f"{where}.expr: expected a string")
        expr = Expression(spec["expr"], exact)
        for v in nodes:
            out[v] = _result(expr(node_env(tree, v)), exact, where)
        return out
    table = spec["table"]
    if isinstance(table, list):
        if len(table) != tree.n_nodes:
            raise ScenarioError(f"{where}.table: expected {tree.n_nodes} values, got {len(table)}")
        table = {str(i): x for i, x in enumerate(table)}
    if not isinstance(table, Mapping):
        raise ScenarioError(f"{where}.table: expected a list or an object keyed by node id")
    for key, x in table.items():
        try:
            v = int(key)
        except ValueError:
            raise ScenarioError(f"{where}.table: bad node id {key!r}") from None
        if not 0 <= v < tree.n_nodes:
            raise ScenarioError(f"{where}.table: node {v} not in tree")
        out[v] = _num(x, exact, f"{where}.table[{v}]")
    if predictable and any(out[v] != 0 for v in tree.leaves):
        raise ScenarioError(f"{where}: increments on leaves are not allowed")
    if not predictable and len(table) != tree.n_nodes:
        raise ScenarioError(f"{where}.table: every node needs a value")
    return out


# -- scenario ------------------------------------------------------------------------

@dataclass(frozen=True)
class Tolerances:
    float: float = 1e-9
    picard: float = 1e-12
    bisect: float = 1e-10


@dataclass(frozen=True)
class Scenario:
    name: str
    exact: bool
    tree: EventTree
    generator: Generator
    contract: ContractSpec
    endowments: Endowments
    benchmark: object
    tolerances: Tolerances
    budget: int
    seed: int
    description: str = ""

    @property
    def tol(self):
        return 0 if self.exact else self.tolerances.float


def _build_tree(spec, exact: bool, base: Path | None) -> EventTree:
    _check_keys(spec, TREE_KEYS, "tree")
    if len(spec) != 1:
        raise ScenarioError("tree: give exactly one of 'binomial', 'file' or 'inline'")
    if "binomial" in spec:
        b = spec["binomial"]
        _check_keys(b, BINOMIAL_KEYS, "tree.binomial", {"s0", "u", "d", "n_steps", "maturity"})
        n = b["n_steps"]
        if not isinstance(n, int) or isinstance(n, bool):
            raise ScenarioError("tree.binomial.n_steps: expected an integer")
        args = {k: _num(b[k], exact, f"tree.binomial.{k}") for k in ("s0", "u", "d", "maturity")}
        probs = _num(b["probs"], exact, "tree.binomial.probs") if "probs" in b else None
        try:
            return build_binomial(args["s0"], args["u"], args["d"], n, args["maturity"], probs)
        except ValueError as exc:
            raise ScenarioError(f"tree.binomial: {exc}") from None
    if "file" in spec:
        path = Path(spec["file"])
        if base is not None and not path.is_absolute():
            path = base / path
        try:
            text = path.read_text()
        except OSError as exc:
            raise ScenarioError(f"tree.file: {exc}") from None
        data = _loads(text, str(path))
    else:
        data = spec["inline"]
    try:
        return EventTree.from_dict(data, exact=exact)
    except (ValueError, KeyError, TypeError) as exc:
        raise ScenarioError(f"tree: {exc}") from None


def _build_generator(spec, exact: bool) -> Generator:
    _check_keys(spec, GENERATOR_KEYS, "generator", {"name"})
    params = spec.get("params", {})
    if not isinstance(params, Mapping):
        raise ScenarioError("generator.params: expected an object")
    values = {k: _num(v, exact, f"generator.params.{k}") for k, v in params.items()}
    try:
        return make_generator(spec["name"], **values)
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"generator: {exc}") from None


def _build_benchmark(spec, tree: EventTree, gen: Generator, exact: bool):
    if spec is None:
        p = gen.params
        if "r_lend" in p:
            return RateSchedule(p["r_lend"], p["r_borrow"])
        return None
    _check_keys(spec, BENCHMARK_KEYS, "benchmark")
    if len(spec) != 1:
        raise ScenarioError("benchmark: give exactly one of 'rates' or 'process'")
    if "rates" in spec:
        r = spec["rates"]
        _check_keys(r, RATE_KEYS, "benchmark.rates", RATE_KEYS)
        try:
            return RateSchedule(_num(r["r_lend"], exact, "benchmark.rates.r_lend"),
                                _num(r["r_borrow"], exact, "benchmark.rates.r_borrow"))
        except ValueError as exc:
            raise ScenarioError(f"benchmark.rates: {exc}") from None
    return build_process(spec["process"], tree, exact, "benchmark.process")


def _loads(text: str, source: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def scenario_from_dict(data: Mapping, base: Path | None = None) -> Scenario:
    _check_keys(data, TOP_KEYS, "scenario", {"tree", "generator", "payoff"})
    mode = data.get("mode", "float")
    if mode not in ("rational", "float"):
        raise ScenarioError("mode: expected 'rational' or 'float'")
    exact = mode == "rational"
    tree = _build_tree(data["tree"], exact, base)
    gen = _build_generator(data["generator"], exact)
    payoff = build_process(data["payoff"], tree, exact, "payoff")
    if "flows" in data:
        flows = CashFlowProcess(tuple(build_process(data["flows"], tree, exact, "flows", True)))
    else:
        flows = CashFlowProcess.zero(tree)
    endow = data.get("endowments", {})
    _check_keys(endow, ENDOWMENT_KEYS, "endowments")
    endowments = Endowments(*(_num(endow.get(k, 0), exact, f"endowments.{k}") for k in ("x1", "x2")))
    tols = data.get("tolerances", {})
    _check_keys(tols, TOL_KEYS, "tolerances")
    tolerances = Tolerances(**{k: float(v) for k, v in tols.items()})
    budget = data.get("budget", default_budget())
    seed = data.get("seed", 0)
    for key, val in (("budget", budget), ("seed", seed)):
        if not isinstance(val, int) or isinstance(val, bool) or val < 0:
            raise ScenarioError(f"{key}: expected a non-negative integer")
    return Scenario(
        name=str(data.get("name", "scenario")),
        exact=exact,
        tree=tree,
        generator=gen,
        contract=ContractSpec(tuple(payoff), flows),
        endowments=endowments,
        benchmark=_build_benchmark(data.get("benchmark"), tree, gen, exact),
        tolerances=tolerances,
        budget=budget,
        seed=seed,
        description=str(data.get("description", "")),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror or exc}") from None
    return scenario_from_dict(_loads(text, str(path)), base=path.parent)


def bundled_scenarios() -> list:
    """Paths of the scenario fixtures shipped with the package."""
    from importlib.resources import files

    root = files("treerbsde") / "scenarios"
    return sorted(str(p) for p in root.iterdir() if p.name.endswith(".json"))


def bundled(name: str) -> Scenario:
    for p in bundled_scenarios():
        if Path(p).stem == name:
            return load_scenario(p)
    raise KeyError(name)
