"""Experiment configuration: JSON documents, defaults, overrides and validation."""
from __future__ import annotations

import copy
import itertools
import json
import math
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

__all__ = ["ConfigError", "DEFAULTS", "load_config", "apply_override", "validate", "sweep_points"]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


DEFAULTS: Dict[str, Any] = {
    "seed": 0,
    "model": {"kind": "ising_ring", "L": 5, "omega": 1.0, "gamma": 1.1, "width": 0.2, "seed": None},
    "observable": "sx",
    "initial": {
        "system_state": "plus",
        "bath_kind": "mixed",
        "window": "default",
        "center": None,
        "width": None,
        "seed": None,
    },
    "analysis": {
        "mode": "hamiltonian",
        "eps": None,
        "n_eps": 200,
        "K": 10.0,
        "T": None,
        "T_range": [0.1, 100.0, 20],
        "T_markers": [],
        "tight": False,
        "pair_cap": 4000,
        "n_times": 2000,
        "n_bins": 60,
        "n_bits": 2_000_000,
        "n_samples": 200,
        "use_truncated_distribution": False,
        "dos_bins": 20,
    },
    "output": {"dir": None},
    "parallelism": {"workers": 1},
    "limits": {"max_L": 12, "allow_large": False},
    "command": "bound",
    "sweep": {},
}

MODEL_KINDS = ("ising_ring", "random_ring", "free_spin")
OBSERVABLES = ("sx", "sy", "sz")
SYSTEM_STATES = ("up", "down", "plus", "minus", "plus_y", "mixed")
SWEEPABLE_COMMANDS = ("spectrum", "gapdist", "bound", "evolve", "truncate", "typicality")


def _merge(base, extra, path=""):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        where = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"{where}: unknown field")
        if isinstance(base[k], dict) and k != "sweep":
            if not isinstance(v, dict):
                raise ConfigError(f"{where}: expected an object")
            out[k] = _merge(base[k], v, where + ".")
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path=None, overrides=()) -> dict:
    """Defaults, then the JSON file at ``path``, then ``KEY=VALUE`` overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
        cfg = _merge(cfg, doc)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like KEY=VALUE")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        apply_override(cfg, key.strip(), value)
    return cfg


def apply_override(cfg: dict, key: str, value) -> None:
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigError(f"{key}: unknown field")
        node = node[p]
    if parts[-1] not in node and parts[0] != "sweep":
        raise ConfigError(f"{key}: unknown field")
    node[parts[-1]] = value


def _finite(cfg, path, positive=False, allow_none=False):
    node = cfg
    for p in path.split("."):
        node = node[p]
    if node is None and allow_none:
        return
    if isinstance(node, bool) or not isinstance(node, (int, float)) or not math.isfinite(node):
        raise ConfigError(f"{path}: expected a finite number, got {node!r}")
    if positive and node <= 0:
        raise ConfigError(f"{path}: must be positive, got {node!r}")


def _int(cfg, path, minimum=None):
    node = cfg
    for p in path.split("."):
        node = node[p]
    if isinstance(node, bool) or not isinstance(node, int):
        raise ConfigError(f"{path}: expected an integer, got {node!r}")
    if minimum is not None and node < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {node}")


def _number_list(value, path, positive=True):
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{path}: expected a non-empty list of numbers")
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{path}: entries must be finite numbers, got {v!r}")
        if positive and v <= 0:
            raise ConfigError(f"{path}: entries must be positive, got {v!r}")


def validate(cfg: dict) -> dict:
    """Check every field; raise :class:`ConfigError` naming the first bad one."""
    m = cfg["model"]
    if m["kind"] not in MODEL_KINDS:
        raise ConfigError(f"model.kind: expected one of {MODEL_KINDS}, got {m['kind']!r}")
    _int(cfg, "model.L", 1 if m["kind"] == "free_spin" else 2)
    lim = cfg["limits"]
    if m["L"] > lim["max_L"] and not lim["allow_large"]:
        raise ConfigError(
            f"model.L: {m['L']} exceeds limits.max_L={lim['max_L']}; "
            "set limits.allow_large=true to accept the memory cost"
        )
    _finite(cfg, "model.omega", positive=True)
    _finite(cfg, "model.gamma")
    _finite(cfg, "model.width")
    if m["width"] < 0:
        raise ConfigError("model.width: must be non-negative")
    _int(cfg, "seed", 0)
    if m["seed"] is not None:
        _int(cfg, "model.seed", 0)

    obs = cfg["observable"]
    if isinstance(obs, str):
        if obs not in OBSERVABLES:
            raise ConfigError(f"observable: expected one of {OBSERVABLES} or {{'matrix'|'file': ...}}, got {obs!r}")
    elif isinstance(obs, dict):
        if set(obs) not in ({"matrix"}, {"file"}):
            raise ConfigError("observable: object must have exactly one key, 'matrix' or 'file'")
    else:
        raise ConfigError("observable: expected a string or an object")

    ini = cfg["initial"]
    if isinstance(ini["system_state"], str) and ini["system_state"] not in SYSTEM_STATES:
        raise ConfigError(f"initial.system_state: expected one of {SYSTEM_STATES}, got {ini['system_state']!r}")
    if ini["bath_kind"] not in ("mixed", "microcanonical", "haar"):
        raise ConfigError(f"initial.bath_kind: unknown kind {ini['bath_kind']!r}")
    if ini["window"] not in ("default", "central"):
        raise ConfigError(f"initial.window: expected 'default' or 'central', got {ini['window']!r}")
    _finite(cfg, "initial.center", allow_none=True)
    _finite(cfg, "initial.width", positive=True, allow_none=True)
    if ini["seed"] is not None:
        _int(cfg, "initial.seed", 0)

    an = cfg["analysis"]
    if an["mode"] not in ("hamiltonian", "binomial"):
        raise ConfigError(f"analysis.mode: expected 'hamiltonian' or 'binomial', got {an['mode']!r}")
    if an["eps"] is not None:
        _number_list(an["eps"], "analysis.eps")
    if an["T"] is not None:
        _number_list(an["T"], "analysis.T")
    tr = an["T_range"]
    if not (isinstance(tr, list) and len(tr) == 3):
        raise ConfigError("analysis.T_range: expected [T_min, T_max, n_points]")
    _number_list(tr, "analysis.T_range")
    if not tr[0] < tr[1] or int(tr[2]) != tr[2]:
        raise ConfigError("analysis.T_range: need T_min < T_max and an integer point count")
    if an["T_markers"]:
        _number_list(an["T_markers"], "analysis.T_markers")
    _finite(cfg, "analysis.K")
    if an["K"] <= 1:
        raise ConfigError(f"analysis.K: must exceed 1, got {an['K']}")
    for key, lo in (("pair_cap", 1), ("n_times", 2), ("n_bins", 1), ("n_bits", 1), ("n_samples", 2), ("n_eps", 1), ("dos_bins", 2)):
        _int(cfg, f"analysis.{key}", lo)
    if not isinstance(an["tight"], bool):
        raise ConfigError("analysis.tight: expected true or false")

    w = cfg["parallelism"]["workers"]
    if isinstance(w, bool) or not isinstance(w, int) or w < 0:
        raise ConfigError(f"parallelism.workers: expected an integer >= 0, got {w!r}")
    if cfg["command"] not in SWEEPABLE_COMMANDS:
        raise ConfigError(f"command: expected one of {SWEEPABLE_COMMANDS}, got {cfg['command']!r}")
    if not isinstance(cfg["sweep"], dict):
        raise ConfigError("sweep: expected an object mapping field paths to value lists")
    for key, values in cfg["sweep"].items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.{key}: expected a non-empty list")
    return cfg


def sweep_points(cfg: dict) -> List[dict]:
    """Cartesian product of ``cfg['sweep']`` in key order, last key fastest."""
    keys = list(cfg["sweep"])
    points = []
    for combo in itertools.product(*(cfg["sweep"][k] for k in keys)):
        point = copy.deepcopy(cfg)
        point["sweep"] = {}
        for k, v in zip(keys, combo):
            apply_override(point, k, v)
        points.append((dict(zip(keys, combo)), validate(point)))
    return points


def t_values(cfg: dict) -> np.ndarray:
    an = cfg["analysis"]
    if an["T"] is not None:
        return np.asarray(an["T"], dtype=float)
    lo, hi, n = an["T_range"]
    return np.geomspace(lo, hi, int(n))
