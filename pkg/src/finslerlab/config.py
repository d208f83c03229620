"""JSON forms of metrics and hypersurfaces, config validation and
deterministic JSON output.

Metric documents::

    {"type": "euclidean", "dim": 3}
    {"type": "randers_navigation", "base": {"dim": 3, "matrix": null}, "wind": [0, 0, 0.5]}
    {"type": "conformal", "inner": {...}, "rho": "log(2 + cos(pi * x1))"}
    {"type": "paper", "dim": 3, "b": 0.5}

Expressions are strings in x1..xn (or plain numbers).  ``paper`` is shorthand
for the conformal Randers example and serializes in expanded form.

Hypersurface documents::

    {"type": "hyperplane", "height": 0.0, "orientation": 1}
    {"type": "sphere", "radius": 2.0, "center": [0, 0, 0], "inward": true}
    {"type": "level_set", "f": "x1**2 + x2**2", "value": 1.0, "orientation": 1}
    {"type": "graph", "height": "0.1 * x1 * x2", "orientation": 1}
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import expr as ex
from .errors import ConfigError, FinslerError
from .hypersurface import Graph, LevelSet, hyperplane, sphere
from .metric import ConformalScale, EuclideanBase, MetricSpec, RandersNavigation, RiemannianSpec


def check_keys(doc, required: set, optional: set = frozenset(), where: str = "config") -> dict:
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(doc) - required - set(optional)
    if unknown:
        raise ConfigError(f"unknown keys in {where}", keys=sorted(unknown))
    missing = required - set(doc)
    if missing:
        raise ConfigError(f"missing keys in {where}", keys=sorted(missing))
    return doc


def _expr(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise ConfigError(f"{where} must be a number or an expression string", value=v)
    return ex.parse(v) if isinstance(v, str) else ex.const(v)


def _int(v, where):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where} must be an integer", value=v)
    return v


def number(v, where) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where} must be a finite number", value=v)
    return float(v)


def vector(v, where, dim: int | None = None) -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{where} must be a non-empty list of numbers")
    out = np.array([number(c, where) for c in v])
    if dim is not None and len(out) != dim:
        raise ConfigError(f"{where} must have {dim} components", got=len(out))
    return out


def vectors(v, where, dim: int) -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{where} must be a non-empty list of vectors")
    return np.array([vector(p, where, dim) for p in v])


def metric_from_dict(doc) -> MetricSpec:
    check_keys(doc, {"type"}, {"dim", "base", "wind", "inner", "rho", "b"}, "metric")
    kind = doc["type"]
    try:
        if kind == "euclidean":
            check_keys(doc, {"type", "dim"}, where="euclidean metric")
            return EuclideanBase(_int(doc["dim"], "dim"))
        if kind == "randers_navigation":
            check_keys(doc, {"type", "base", "wind"}, where="navigation metric")
            base = check_keys(doc["base"], {"dim"}, {"matrix"}, "navigation base")
            matrix = base.get("matrix")
            if matrix is not None:
                if not isinstance(matrix, list) or not all(isinstance(r, list) for r in matrix):
                    raise ConfigError("base matrix must be a list of rows")
                matrix = tuple(tuple(_expr(e, "matrix entry") for e in row) for row in matrix)
            if not isinstance(doc["wind"], list):
                raise ConfigError("wind must be a list of components")
            return RandersNavigation(RiemannianSpec(_int(base["dim"], "dim"), matrix),
                                     tuple(_expr(w, "wind component") for w in doc["wind"]))
        if kind == "conformal":
            check_keys(doc, {"type", "inner", "rho"}, where="conformal metric")
            return ConformalScale(metric_from_dict(doc["inner"]), _expr(doc["rho"], "rho"))
        if kind == "paper":
            from .counterexample import build_paper_metric

            check_keys(doc, {"type", "dim", "b"}, where="paper metric")
            return build_paper_metric(_int(doc["dim"], "dim"), number(doc["b"], "b")).metric
    except FinslerError as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(err.message, **err.context) from None
    raise ConfigError(f"unknown metric type {kind!r}",
                      allowed=["euclidean", "randers_navigation", "conformal", "paper"])


def metric_to_dict(metric: MetricSpec) -> dict:
    if isinstance(metric, EuclideanBase):
        return {"type": "euclidean", "dim": metric.dim}
    if isinstance(metric, RandersNavigation):
        base = metric.base
        matrix = None if base.matrix is None else [[ex.to_string(e) for e in row] for row in base.matrix]
        return {"type": "randers_navigation", "base": {"dim": base.dim, "matrix": matrix},
                "wind": [ex.to_string(w) for w in metric.wind]}
    if isinstance(metric, ConformalScale):
        return {"type": "conformal", "inner": metric_to_dict(metric.inner), "rho": ex.to_string(metric.rho)}
    raise TypeError(f"not a metric specification: {metric!r}")


def hypersurface_from_dict(doc, dim: int):
    check_keys(doc, {"type"}, {"height", "orientation", "radius", "center", "inward", "f", "value"},
               "hypersurface")
    kind = doc["type"]
    orientation = _int(doc.get("orientation", 1), "orientation")
    if orientation not in (1, -1):
        raise ConfigError("orientation must be 1 or -1", orientation=orientation)
    if kind == "hyperplane":
        check_keys(doc, {"type"}, {"height", "orientation"}, "hyperplane")
        return hyperplane(dim, number(doc.get("height", 0.0), "height"), orientation)
    if kind == "sphere":
        check_keys(doc, {"type", "radius"}, {"center", "inward"}, "sphere")
        center = vector(doc["center"], "center", dim) if "center" in doc else None
        inward = doc.get("inward", True)
        if not isinstance(inward, bool):
            raise ConfigError("inward must be true or false")
        return sphere(dim, number(doc["radius"], "radius"), center, inward)
    if kind == "level_set":
        check_keys(doc, {"type", "f"}, {"value", "orientation"}, "level set")
        return LevelSet(_expr(doc["f"], "f"), number(doc.get("value", 0.0), "value"), orientation)
    if kind == "graph":
        check_keys(doc, {"type", "height"}, {"orientation"}, "graph")
        return Graph(_expr(doc["height"], "height"), dim, orientation)
    raise ConfigError(f"unknown hypersurface type {kind!r}",
                      allowed=["hyperplane", "sphere", "level_set", "graph"])


# ---------------------------------------------------------------------------
# deterministic JSON


def _encode(obj) -> str:
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return "%.12e" % v if math.isfinite(v) else json.dumps(str(v))
    return json.dumps(str(obj))


def dumps(obj) -> str:
    """JSON text with every float as %.12e so identical runs give identical bytes."""
    return _encode(obj) + "\n"
