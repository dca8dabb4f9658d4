"""Synthetic zero-inflated Tweedie datasets with known ground truth.

Mean surfaces are written as small arithmetic expressions over feature
names, e.g. ``"exp(0.5 + 0.8 * x1 - 0.6 * x2)"``.  Expressions are parsed
with :mod:`ast` and evaluated against a fixed whitelist of operators and
numpy functions; nothing else is reachable.
"""
from __future__ import annotations

import ast
import operator
from typing import Dict

import numpy as np

from .config import ConfigError, SimSpec
from .tweedie import sample_zitw

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_CMPOPS = {ast.Eq: np.equal, ast.NotEq: np.not_equal, ast.Lt: np.less,
           ast.LtE: np.less_equal, ast.Gt: np.greater, ast.GtE: np.greater_equal}
_FUNCS = {"exp": np.exp, "log": np.log, "sqrt": np.sqrt, "abs": np.abs, "sin": np.sin,
          "cos": np.cos, "tanh": np.tanh, "minimum": np.minimum, "maximum": np.maximum,
          "where": np.where}


def evaluate_expression(expr, env: Dict[str, np.ndarray], n: int) -> np.ndarray:
    """Evaluate ``expr`` (string or number) to a float array of length ``n``."""
    if isinstance(expr, (int, float)) and not isinstance(expr, bool):
        return np.full(n, float(expr))
    if not isinstance(expr, str):
        raise ConfigError(f"expected an expression string, got {expr!r}")
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {expr!r}: {exc.msg}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, str)) \
                and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.Name):
            if node.id not in env:
                raise ConfigError(f"unknown name {node.id!r} in expression {expr!r}")
            return env[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Compare) and len(node.ops) == 1 \
                and type(node.ops[0]) in _CMPOPS:
            res = _CMPOPS[type(node.ops[0])](ev(node.left), ev(node.comparators[0]))
            return np.asarray(res, dtype=np.float64)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
                and node.func.id in _FUNCS and not node.keywords:
            return _FUNCS[node.func.id](*[ev(a) for a in node.args])
        raise ConfigError(f"unsupported syntax in expression {expr!r}")

    with np.errstate(all="ignore"):
        out = np.asarray(ev(tree), dtype=np.float64)
    return np.broadcast_to(out, (n,)).astype(np.float64)


def _draw_features(spec: SimSpec, rng) -> Dict[str, np.ndarray]:
    cols: Dict[str, np.ndarray] = {}
    n = spec.n
    for f in spec.features:
        dist = f["dist"]
        if dist == "uniform":
            cols[f["name"]] = rng.uniform(float(f.get("low", 0.0)), float(f.get("high", 1.0)), n)
        elif dist == "normal":
            cols[f["name"]] = rng.normal(float(f.get("mean", 0.0)), float(f.get("sd", 1.0)), n)
        elif dist == "categorical":
            levels = [str(v) for v in f["levels"]]
            probs = f.get("probs")
            idx = rng.choice(len(levels), size=n, p=probs)
            cols[f["name"]] = np.asarray(levels, dtype=str)[idx] if n else np.zeros(0, dtype=str)
        else:
            parts = f["parts"]
            alpha = np.asarray(f.get("alpha", [1.0] * len(parts)), dtype=np.float64)
            draws = rng.dirichlet(alpha, size=n) if n else np.zeros((0, len(parts)))
            for j, name in enumerate(parts):
                cols[name] = draws[:, j]
    return cols


def _exposure(spec: SimSpec, rng) -> np.ndarray:
    e = spec.exposure
    if e["dist"] == "constant":
        return np.full(spec.n, float(e.get("value", 1.0)))
    return rng.uniform(float(e["low"]), float(e["high"]), spec.n)


def simulate(spec: SimSpec):
    """Draw a dataset.

    Returns ``(columns, truth)``: ``columns`` maps names to arrays (features,
    exposure, target) in output order, ``truth`` holds the per-row Tweedie
    mean ``mu = exposure * mu_unit`` and the inflation probability ``q``.
    With ``gamma`` given, ``q = 1 / (1 + mu**gamma)`` uses that exposure-
    scaled mean.
    """
    rng = np.random.default_rng(spec.seed)
    feats = _draw_features(spec, rng)
    exposure = _exposure(spec, rng)
    n = spec.n
    mu_unit = evaluate_expression(spec.mu, feats, n)
    if np.any(~(mu_unit > 0)) or not np.all(np.isfinite(mu_unit)):
        raise ConfigError("the mu expression must be positive and finite on every row")
    mu = exposure * mu_unit
    if spec.gamma is not None:
        q = 1.0 / (1.0 + np.exp(float(spec.gamma) * np.log(mu)))
    else:
        q = evaluate_expression(spec.q, feats, n)
        if np.any((q < 0) | (q > 1)) or not np.all(np.isfinite(q)):
            raise ConfigError("the q expression must lie in [0, 1] on every row")
    y = sample_zitw(mu_unit, float(spec.phi), float(spec.p), q, exposure, rng) if n \
        else np.zeros(0)
    columns = dict(feats)
    columns[spec.exposure_name] = exposure
    columns[spec.target_name] = y
    return columns, {"mu": mu, "q": q}
