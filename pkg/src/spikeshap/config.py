"""Pipeline configuration: defaults, YAML loading, dotted overrides.

Every tunable of every stage lives here under one nested mapping. CLI flags
arrive as ``section.key=value`` strings and win over the file; the file wins
over the defaults. Stage RNG streams derive from the single ``seed`` by fixed
offsets: split seed+1000, forest seed+2000, clustering seed+3000.
"""

from __future__ import annotations

import copy

import yaml

from .errors import ConfigError

SPLIT_SEED_OFFSET = 1000
FOREST_SEED_OFFSET = 2000
CLUSTER_SEED_OFFSET = 3000

DEFAULTS = {
    "seed": 0,
    "tz_offset": 0.0,
    "input": {
        "csv": None,
        "schema": None,
    },
    "fill": {
        "policy": "linear",  # forward-fill | linear | fail
    },
    "threshold": {
        "mode": "percentile",  # fixed | percentile
        "moderate": 95.0,
        "high": 99.0,
    },
    "group": {
        "max_gap": 0,
    },
    "segment": {
        "b_len": 6,
        "f_len": 6,
    },
    "features": {
        "include": None,  # channel names; None = all non-price channels
    },
    "split": {
        "ratio": 0.67,
    },
    "forest": {
        "n_trees": 200,
        "max_depth": 12,
        "min_samples_leaf": 2,
        "mtry": None,  # None = ceil(sqrt(n_features))
        "class_weighting": True,
        "decision_threshold": 0.5,
    },
    "explain": {
        "top_k": 5,
        "min_phi": 0.0,
    },
    "cluster": {
        "k": None,  # None = pick by elbow
        "k_min": 2,
        "k_max": 15,
        "max_iter": 300,
        "tol": 1.0e-6,
        "n_restarts": 10,
        "anomalous_only": False,
    },
    "radar": {
        "axes": 8,
    },
    "output": {
        "dir": "out",  # run directory; holds work/ and report/
    },
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be a mapping")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path=None) -> dict:
    """Defaults merged with an optional YAML file."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is None:
        return cfg
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if raw is None:
        return cfg
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return _merge(cfg, raw)


def apply_overrides(cfg: dict, assignments: list[str]) -> dict:
    """Apply ``section.key=value`` strings; values parse as YAML scalars."""
    out = copy.deepcopy(cfg)
    for text in assignments:
        if "=" not in text:
            raise ConfigError(f"override {text!r} must look like section.key=value")
        dotted, raw_value = text.split("=", 1)
        keys = dotted.strip().split(".")
        try:
            value = yaml.safe_load(raw_value)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse override value {raw_value!r}: {exc}") from exc
        node = out
        ref = DEFAULTS
        for k in keys[:-1]:
            if not isinstance(ref, dict) or k not in ref:
                raise ConfigError(f"unknown config key {dotted!r}")
            node = node.setdefault(k, {})
            ref = ref[k]
        leaf = keys[-1]
        if not isinstance(ref, dict) or leaf not in ref or isinstance(ref[leaf], dict):
            raise ConfigError(f"unknown config key {dotted!r}")
        node[leaf] = value
    return out


def validate_config(cfg: dict, require_input: bool = True) -> None:
    if require_input:
        if not cfg["input"]["csv"] or not cfg["input"]["schema"]:
            raise ConfigError("input.csv and input.schema are required")
    seg = cfg["segment"]
    if seg["b_len"] < 1 or seg["f_len"] < 1:
        raise ConfigError(
            "segment.b_len and segment.f_len must be >= 1 so boundary events "
            "still yield windows long enough to summarize"
        )
    if cfg["group"]["max_gap"] < 0:
        raise ConfigError("group.max_gap must be >= 0")
    if not (0.0 < cfg["split"]["ratio"] < 1.0):
        raise ConfigError("split.ratio must be in (0, 1)")
    if cfg["explain"]["top_k"] < 1:
        raise ConfigError("explain.top_k must be >= 1")
    cl = cfg["cluster"]
    if cl["k"] is not None and cl["k"] < 1:
        raise ConfigError("cluster.k must be >= 1")
    if cl["k_min"] < 1 or cl["k_max"] < cl["k_min"]:
        raise ConfigError("cluster.k_min..k_max must be a non-empty range")
    if cl["n_restarts"] < 1:
        raise ConfigError("cluster.n_restarts must be >= 1")
    if cfg["radar"]["axes"] < 3:
        raise ConfigError("radar.axes must be >= 3")
    if not (0.0 < cfg["forest"]["decision_threshold"] < 1.0):
        raise ConfigError("forest.decision_threshold must be in (0, 1)")


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)
