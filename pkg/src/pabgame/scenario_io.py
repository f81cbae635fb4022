"""JSON scenario files (schema version 1) and the bundled example fixtures.

A market file looks like::

    {"schema_version": 1,
     "demand": {"type": "affine", "gamma": 1, "p_hat": 10},
     "producers": [{"b": 0, "c": 0.5}, {"c": 2}],
     "k": 1,
     "labels": ["a", "b"]}

Polynomial demand uses ``{"type": "polynomial", "coeffs": [10, -1, -0.2]}``
(ascending powers).  Ensemble files (``"kind": "ensemble"``) describe the
randomised baseline comparisons instead of a single market.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from .models import CostModel, DemandModel, Scenario

SCHEMA_VERSION = 1
BUNDLED = ("ex1_lin", "ex2_lin", "ex3_lin", "ex1_nonlin", "ex2_nonlin", "twoplayer_c2",
           "limit1", "limit1_hom", "limit2")

_MARKET_KEYS = {"schema_version", "kind", "demand", "producers", "k", "labels", "description"}
_ENSEMBLE_KEYS = {"schema_version", "kind", "demand", "k", "homogeneous", "heterogeneous", "description"}
_DEMAND_KEYS = {"affine": {"type", "gamma", "p_hat"}, "polynomial": {"type", "coeffs"}}
_PRODUCER_KEYS = {"b", "c"}
_HOMOGENEOUS_KEYS = {"c", "n"}
_HETEROGENEOUS_KEYS = {"n", "c_low", "c_high", "samples"}


class ScenarioFileError(ValueError):
    """The file is not a valid scenario description."""


@dataclass
class EnsembleSpec:
    gamma: float
    p_hat: float
    k: Optional[float]
    homogeneous_c: float
    homogeneous_n: List[int]
    heterogeneous_n: int
    c_low: float
    c_high: float
    samples: int


def _check_keys(obj, allowed, where, strict):
    if not isinstance(obj, dict):
        raise ScenarioFileError(f"{where}: expected an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        msg = f"{where}: unknown field(s) {', '.join(unknown)}"
        if strict:
            raise ScenarioFileError(msg)
        warnings.warn(msg, stacklevel=3)


def _number(obj, key, where, default=None):
    if key not in obj:
        if default is None:
            raise ScenarioFileError(f"{where}: missing '{key}'")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ScenarioFileError(f"{where}: '{key}' must be a finite number")
    return float(v)


def _demand(obj, strict):
    if not isinstance(obj, dict):
        raise ScenarioFileError("demand: expected an object")
    kind = obj.get("type")
    if kind not in _DEMAND_KEYS:
        raise ScenarioFileError("demand: 'type' must be 'affine' or 'polynomial'")
    _check_keys(obj, _DEMAND_KEYS[kind], "demand", strict)
    try:
        if kind == "affine":
            return DemandModel.affine(_number(obj, "gamma", "demand"), _number(obj, "p_hat", "demand"))
        coeffs = obj.get("coeffs")
        if not isinstance(coeffs, list) or not coeffs:
            raise ScenarioFileError("demand: 'coeffs' must be a non-empty list")
        return DemandModel.polynomial([_number({"c": c}, "c", "demand.coeffs") for c in coeffs])
    except ScenarioFileError:
        raise
    except ValueError as exc:
        raise ScenarioFileError(f"demand: {exc}") from exc


def _version(data):
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ScenarioFileError(f"schema_version must be {SCHEMA_VERSION}")


def parse_scenario(data: Dict[str, Any], strict: bool = True) -> Scenario:
    """Build a :class:`Scenario` from a decoded market file."""
    if not isinstance(data, dict):
        raise ScenarioFileError("top level: expected an object")
    _version(data)
    if data.get("kind", "market") != "market":
        raise ScenarioFileError("not a market file (kind = %r)" % data.get("kind"))
    _check_keys(data, _MARKET_KEYS, "top level", strict)
    demand = _demand(data.get("demand"), strict)
    producers = data.get("producers")
    if not isinstance(producers, list) or not producers:
        raise ScenarioFileError("producers: expected a non-empty list")
    costs = []
    for j, p in enumerate(producers):
        where = f"producers[{j}]"
        _check_keys(p, _PRODUCER_KEYS, where, strict)
        try:
            costs.append(CostModel.quadratic(_number(p, "b", where, 0.0), _number(p, "c", where)))
        except ScenarioFileError:
            raise
        except ValueError as exc:
            raise ScenarioFileError(f"{where}: {exc}") from exc
    k = _number(data, "k", "top level", 1.0)
    labels = data.get("labels")
    if labels is not None and (not isinstance(labels, list) or len(labels) != len(costs)
                               or not all(isinstance(s, str) for s in labels)):
        raise ScenarioFileError("labels: expected one string per producer")
    try:
        return Scenario(costs, demand, lipschitz_k=k, labels=labels)
    except ValueError as exc:
        raise ScenarioFileError(str(exc)) from exc


def parse_ensemble(data: Dict[str, Any], strict: bool = True) -> EnsembleSpec:
    if not isinstance(data, dict):
        raise ScenarioFileError("top level: expected an object")
    _version(data)
    if data.get("kind") != "ensemble":
        raise ScenarioFileError("not an ensemble file")
    _check_keys(data, _ENSEMBLE_KEYS, "top level", strict)
    demand = _demand(data.get("demand"), strict)
    if not demand.is_affine:
        raise ScenarioFileError("ensemble demand must be affine")
    hom = data.get("homogeneous", {})
    het = data.get("heterogeneous", {})
    _check_keys(hom, _HOMOGENEOUS_KEYS, "homogeneous", strict)
    _check_keys(het, _HETEROGENEOUS_KEYS, "heterogeneous", strict)
    ns = hom.get("n")
    if not isinstance(ns, list) or not ns or not all(isinstance(v, int) and v > 0 for v in ns):
        raise ScenarioFileError("homogeneous.n: expected a list of positive integers")
    k = data.get("k")
    spec = EnsembleSpec(
        gamma=demand.gamma, p_hat=demand.p_hat,
        k=None if k is None else _number(data, "k", "top level"),
        homogeneous_c=_number(hom, "c", "homogeneous"), homogeneous_n=ns,
        heterogeneous_n=int(_number(het, "n", "heterogeneous")),
        c_low=_number(het, "c_low", "heterogeneous"), c_high=_number(het, "c_high", "heterogeneous"),
        samples=int(_number(het, "samples", "heterogeneous")),
    )
    if not (0 < spec.c_low <= spec.c_high) or spec.homogeneous_c <= 0 or spec.samples < 1 or spec.heterogeneous_n < 1:
        raise ScenarioFileError("ensemble parameters must be positive with c_low <= c_high")
    if spec.k is not None and spec.k <= 0:
        raise ScenarioFileError("k must be positive")
    return spec


def _read_text(source: Union[str, Path]) -> str:
    path = Path(source)
    if path.exists():
        return path.read_text(encoding="utf-8")
    name = path.name[:-5] if path.name.endswith(".json") else path.name
    if str(path.parent) in ("", ".") and name in BUNDLED:
        return resources.files("pabgame.data").joinpath(f"{name}.json").read_text(encoding="utf-8")
    raise ScenarioFileError(f"no such file or bundled scenario: {source}")


def load_json(source: Union[str, Path]) -> Dict[str, Any]:
    """Decode a file, falling back to a bundled fixture of that name."""
    try:
        return json.loads(_read_text(source))
    except json.JSONDecodeError as exc:
        raise ScenarioFileError(f"invalid JSON: {exc}") from exc


def load_scenario(source: Union[str, Path], strict: bool = True) -> Scenario:
    return parse_scenario(load_json(source), strict)


def load_ensemble(source: Union[str, Path], strict: bool = True) -> EnsembleSpec:
    return parse_ensemble(load_json(source), strict)


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    if not all(c.is_quadratic for c in scenario.costs):
        raise ScenarioFileError("only quadratic costs can be written to a file")
    d = scenario.demand
    demand = ({"type": "affine", "gamma": d.gamma, "p_hat": d.p_hat} if d.kind == "affine"
              else {"type": "polynomial", "coeffs": list(d.coeffs)})
    out = {"schema_version": SCHEMA_VERSION, "demand": demand,
           "producers": [{"b": c.b, "c": c.c} for c in scenario.costs], "k": scenario.lipschitz_k}
    if scenario.labels:
        out["labels"] = list(scenario.labels)
    return out


def load_profile(source: Union[str, Path], n: int) -> np.ndarray:
    """Activation prices from a JSON list or from ``solve --out json`` output."""
    try:
        data = json.loads(Path(source).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioFileError(f"cannot read profile {source}: {exc}") from exc
    if isinstance(data, dict):
        data = data.get("x_star")
    if not isinstance(data, list) or len(data) != n or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in data):
        raise ScenarioFileError(f"profile must be a list of {n} numbers (or an object with 'x_star')")
    return np.array(data, dtype=float)


def twoplayer_scenario(c2: float) -> Scenario:
    """Two producers, ``D = 1 - p``, costs ``q^2 / 2`` and ``c2 q + q^2 / 2``."""
    return Scenario([CostModel.quadratic(0.0, 1.0), CostModel.quadratic(c2, 1.0)], DemandModel.affine(1.0, 1.0))
