"""System definitions: the JSON format and the builtin fields.

JSON layout::

    {"dim": 3, "vars": ["a", "b", "c"],
     "components": [[{"coef": "-sigma", "powers": [1, 0, 0]}, ...], ...],
     "params": {"sigma": 10.0},
     "blocks": [0, 0, 0]}            # optional, coordinate -> time-variable index

A coefficient is either a number or an arithmetic expression over the
parameter names; expressions are resolved when the file is loaded.
"""
from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass
from pathlib import Path

from .polymap import DimensionError, PolyMap

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"sqrt": math.sqrt}


class SystemError_(ValueError):
    """Malformed system definition."""


def eval_coef(expr, params: dict[str, float]) -> float:
    """Evaluate a numeric coefficient or a parameter expression like ``"-beta"``."""
    if isinstance(expr, (int, float)) and not isinstance(expr, bool):
        return float(expr)
    if not isinstance(expr, str):
        raise SystemError_(f"bad coefficient {expr!r}")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id not in params:
                raise SystemError_(f"unknown parameter {node.id!r}")
            return float(params[node.id])
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise SystemError_(f"unsupported expression {expr!r}")

    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise SystemError_(f"cannot parse coefficient {expr!r}") from exc
    return ev(tree)


@dataclass(frozen=True)
class SystemSpec:
    field: PolyMap
    params: dict
    blocks: tuple[int, ...] | None = None
    name: str = "custom"


def system_from_dict(doc: dict, overrides: dict | None = None) -> SystemSpec:
    try:
        dim = int(doc["dim"])
        comps = doc["components"]
    except (KeyError, TypeError, ValueError) as exc:
        raise SystemError_("system needs 'dim' and 'components'") from exc
    params = dict(doc.get("params", {}))
    params.update(overrides or {})
    if len(comps) != dim:
        raise SystemError_(f"{len(comps)} components for dim={dim}")
    terms = []
    for comp in comps:
        row = []
        for mono in comp:
            powers = tuple(mono["powers"])
            if len(powers) != dim:
                raise SystemError_(f"powers {powers} do not have length {dim}")
            row.append((eval_coef(mono["coef"], params), powers))
        terms.append(row)
    names = doc.get("vars")
    try:
        field = PolyMap.from_terms(dim, terms, names)
    except (DimensionError, ValueError) as exc:
        raise SystemError_(str(exc)) from exc
    blocks = doc.get("blocks")
    return SystemSpec(field, params, None if blocks is None else tuple(blocks),
                      doc.get("name", "custom"))


def system_to_dict(field: PolyMap, params: dict | None = None, blocks=None) -> dict:
    doc = {
        "dim": field.dim_in,
        "vars": list(field.names or [f"x{j}" for j in range(field.dim_in)]),
        "components": [[{"coef": m.coef, "powers": list(m.powers)} for m in comp]
                       for comp in field.components],
        "params": dict(params or {}),
    }
    if blocks is not None:
        doc["blocks"] = list(blocks)
    return doc


def load_system(path: str | Path, overrides: dict | None = None) -> SystemSpec:
    with open(path) as fh:
        return system_from_dict(json.load(fh), overrides)


# -- builtin fields ----------------------------------------------------------

def lorenz(sigma: float = 10.0, rho: float = 28.0, beta: float = 8.0 / 3.0) -> PolyMap:
    """(sigma(b - a), rho a - b - a c, -beta c + a b)."""
    return PolyMap.from_terms(3, [
        [(-sigma, (1, 0, 0)), (sigma, (0, 1, 0))],
        [(rho, (1, 0, 0)), (-1.0, (0, 1, 0)), (-1.0, (1, 0, 1))],
        [(-beta, (0, 0, 1)), (1.0, (1, 1, 0))],
    ], names=("a", "b", "c"))


def logistic(alpha: float = 1.0) -> PolyMap:
    """alpha (a - a^2)."""
    return PolyMap.from_terms(1, [[(alpha, (1,)), (-alpha, (2,))]], names=("a",))


def harmonic() -> PolyMap:
    """Hamilton field of H = (p^2 + q^2)/2 on (p, q): (-q, p)."""
    return PolyMap.from_terms(2, [[(-1.0, (0, 1))], [(1.0, (1, 0))]], names=("p", "q"))


BUILTIN_PARAMS = {
    "lorenz": {"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0},
    "logistic": {"alpha": 1.0},
    "harmonic": {},
}


def builtin(name: str, **params) -> SystemSpec:
    if name not in BUILTIN_PARAMS:
        raise SystemError_(f"unknown builtin system {name!r}")
    p = dict(BUILTIN_PARAMS[name])
    unknown = set(params) - set(p)
    if unknown:
        raise SystemError_(f"unknown parameters for {name}: {sorted(unknown)}")
    p.update(params)
    makers = {"lorenz": lorenz, "logistic": logistic, "harmonic": harmonic}
    return SystemSpec(makers[name](**p), p, None, name)
