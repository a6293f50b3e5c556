"""Build library objects from JSON experiment documents."""

from __future__ import annotations

import copy
import json

import numpy as np

from .contest import DEFAULT_A, ContestConfig
from .costs import CostSpec
from .discounted_sum import AdversarialMax, BestCase, ConstantBeta, UniformBeta
from .dynamics import BestCaseGreedy, StoppingRule
from .selection import Alternating, ExplicitSchedule, FlooredRandom, RoundRobin, UniformRandom


class ConfigError(ValueError):
    """The experiment document is malformed."""


def load(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def apply_overrides(doc: dict, assignments) -> dict:
    """Apply ``key.sub=value`` overrides; values parse as JSON, else as strings."""
    doc = copy.deepcopy(doc)
    for item in assignments or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        if not all(parts):
            raise ConfigError(f"bad key {key!r}")
        node = doc
        for p in parts[:-1]:
            nxt = node.get(p)
            if not isinstance(nxt, dict):
                nxt = {}
                node[p] = nxt
            node = nxt
        node[parts[-1]] = value
    return doc


def _require(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise ConfigError(f"{where}: missing {key!r}")
    return d[key]


def cost_from(obj) -> CostSpec:
    try:
        return CostSpec.from_json(obj)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"bad cost spec {obj!r}: {exc}") from exc


def contest_from(obj: dict) -> ContestConfig:
    """``{"n", "cost"}`` (normalised base), ``{"n", "raw_cost"}`` or ``{"costs": [...]}``."""
    if not isinstance(obj, dict):
        raise ConfigError("contest must be an object")
    a = float(obj.get("a", DEFAULT_A))
    try:
        if "costs" in obj:
            costs = [cost_from(c) for c in obj["costs"]]
            return ContestConfig(tuple(costs), a=a)
        n = int(_require(obj, "n", "contest"))
        if "raw_cost" in obj:
            cfg, _ = ContestConfig.from_raw_homogeneous(n, cost_from(obj["raw_cost"]), a)
            return cfg
        return ContestConfig.normalized_homogeneous(n, cost_from(_require(obj, "cost", "contest")), a)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad contest: {exc}") from exc


def policy_from(obj, n: int):
    if obj is None:
        obj = {"kind": "alternating"} if n == 2 else {"kind": "uniform"}
    if isinstance(obj, str):
        obj = {"kind": obj}
    kind = _require(obj, "kind", "policy")
    try:
        if kind == "alternating":
            pol = Alternating(int(obj.get("first", 1)))
        elif kind == "uniform":
            pol = UniformRandom()
        elif kind == "floored":
            pol = FlooredRandom(float(_require(obj, "L", "policy")))
        elif kind == "round_robin":
            pol = RoundRobin()
        elif kind == "best_case":
            pol = BestCaseGreedy()
        elif kind == "schedule":
            pol = ExplicitSchedule(_require(obj, "agents", "policy"), bool(obj.get("repeat", False)))
        else:
            raise ConfigError(f"unknown policy kind {kind!r}")
        pol.validate(n)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad policy: {exc}") from exc
    return pol


def dissum_selection_from(obj, n: int):
    if obj is None:
        obj = {"kind": "best_case"}
    if isinstance(obj, str):
        obj = {"kind": obj}
    if obj.get("kind") == "best_case":
        return BestCase()
    if obj.get("kind") == "alternating":
        raise ConfigError("alternating selection is not available for the discounted-sum dynamics")
    return policy_from(obj, n)


def beta_from(obj):
    if obj is None:
        return AdversarialMax()
    if isinstance(obj, str):
        obj = {"kind": obj}
    kind = _require(obj, "kind", "beta")
    if kind == "max":
        return AdversarialMax()
    if kind == "uniform":
        return UniformBeta()
    if kind == "constant":
        return ConstantBeta(float(_require(obj, "value", "beta")))
    raise ConfigError(f"unknown beta kind {kind!r}")


def stop_from(obj) -> StoppingRule:
    if obj is None:
        obj = {}
    if not isinstance(obj, dict):
        raise ConfigError("stop must be an object")
    allowed = {"eps", "l1_eps", "target", "max_steps", "cycle_tol", "max_period"}
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"unknown stop keys {sorted(extra)}")
    try:
        return StoppingRule(**obj)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad stopping rule: {exc}") from exc


def profile_from(obj, n: int, default: float = 0.5) -> np.ndarray:
    """A list, or ``{"fill": v}`` for a constant profile."""
    if obj is None:
        return np.full(n, default)
    if isinstance(obj, dict):
        return np.full(n, float(_require(obj, "fill", "x0")))
    arr = np.asarray(obj, dtype=float)
    if arr.shape != (n,):
        raise ConfigError(f"x0 must have length {n}, got shape {arr.shape}")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ConfigError("x0 must be finite and non-negative")
    return arr
