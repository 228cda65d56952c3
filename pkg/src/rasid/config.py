"""Run configuration: one JSON document plus command-line overrides.

Layout::

    {
      "seed": 0,
      "paths": {"trace": ..., "labels": ..., "geometry": ..., "profiles": ...,
                "decisions": ..., "verdicts": ..., "out": ...},
      "train": {"start": 0, "end": 120},
      "detector": {"l": 5, "alpha": 0.01, "l_update": 15, "update": true,
                   "beta": 0.04, "rel_threshold": 0.225, "feature": "variance"},
      "synth": {... SynthConfig fields ...},
      "baselines": {"ma_short": 5, "ma_long": 60, "mv_window": 5, "target_fa": 0.01,
                    "mle_trace": ..., "mle_labels": ...},
      "sweep": {"l": [...], "alpha": [...], "l_update": [...]}
    }

Relative paths inside the file resolve against the file's directory.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any, Mapping

from .detector import (DEFAULT_BETA, DEFAULT_NORMAL_RATE, DEFAULT_QUIET_TICKS,
                       DEFAULT_REL_THRESHOLD, DEFAULT_WARMUP, DetectorConfig)
from .profiling import DEFAULT_ALPHA, DEFAULT_L, DEFAULT_L_UPDATE, FeatureKind


class ConfigError(ValueError):
    """Bad or missing configuration (exit code 2)."""


DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "paths": {},
    "train": {"start": 0.0, "end": 120.0},
    "detector": {"l": DEFAULT_L, "alpha": DEFAULT_ALPHA, "l_update": DEFAULT_L_UPDATE,
                 "update": True, "beta": DEFAULT_BETA, "rel_threshold": DEFAULT_REL_THRESHOLD,
                 "warmup": DEFAULT_WARMUP, "normal_rate": DEFAULT_NORMAL_RATE,
                 "quiet_ticks": DEFAULT_QUIET_TICKS, "feature": FeatureKind.VARIANCE.value,
                 "rate_hz": 1.0},
    "synth": {},
    "baselines": {"ma_short": 5, "ma_long": 60, "mv_window": 5, "target_fa": 0.01},
    "sweep": {"l": list(range(2, 31)), "alpha": [0.1, 0.05, 0.01, 0.005, 0.001],
              "l_update": [5, 8, 10, 12, 15, 20, 25, 30, 40, 50]},
}

PATH_KEYS = ("trace", "labels", "geometry", "profiles", "decisions", "verdicts", "out")
MLE_PATH_KEYS = ("mle_trace", "mle_labels")


def _merge(base: dict, over: Mapping) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path=None, overrides: Mapping | None = None) -> dict:
    """Defaults, then the file, then ``overrides`` (same nested layout)."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{p}: top level must be an object")
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"{p}: unknown section(s) {sorted(unknown)}")
        for section, keys in (("paths", PATH_KEYS), ("baselines", MLE_PATH_KEYS)):
            for k, v in dict(doc.get(section, {})).items():
                if k in keys and v is not None and not Path(v).is_absolute():
                    doc[section][k] = str(p.parent / v)
        cfg = _merge(cfg, doc)
    if overrides:
        cfg = _merge(cfg, overrides)
    validate(cfg)
    return cfg


def validate(cfg: Mapping) -> None:
    d = cfg["detector"]
    try:
        FeatureKind(d["feature"])
    except ValueError:
        raise ConfigError(f"unknown feature {d['feature']!r}") from None
    if not (isinstance(d["l"], int) and d["l"] >= 2):
        raise ConfigError("detector.l must be an integer >= 2")
    if not 0 < d["alpha"] < 1:
        raise ConfigError("detector.alpha must lie in (0, 1)")
    if not (isinstance(d["l_update"], int) and d["l_update"] >= 1):
        raise ConfigError("detector.l_update must be a positive integer")
    if not 0 < d["beta"] <= 1:
        raise ConfigError("detector.beta must lie in (0, 1]")
    if not d["rel_threshold"] > 0:
        raise ConfigError("detector.rel_threshold must be positive")
    t = cfg["train"]
    if not t["start"] < t["end"]:
        raise ConfigError("train.start must precede train.end")
    unknown = set(cfg["paths"]) - set(PATH_KEYS)
    if unknown:
        raise ConfigError(f"unknown path key(s) {sorted(unknown)}")


def detector_config(cfg: Mapping) -> DetectorConfig:
    d = cfg["detector"]
    return DetectorConfig(l=d["l"], l_update=d["l_update"], update=bool(d["update"]),
                          beta=d["beta"], rel_threshold=d["rel_threshold"],
                          warmup=d["warmup"], normal_rate=d["normal_rate"],
                          quiet_ticks=d["quiet_ticks"], rate_hz=d["rate_hz"])


def require_path(cfg: Mapping, key: str, must_exist: bool = True) -> Path:
    v = cfg["paths"].get(key)
    if not v:
        raise ConfigError(f"no {key} path given (paths.{key} or --{key})")
    p = Path(v)
    if must_exist and not p.exists():
        raise ConfigError(f"{key} file not found: {p}")
    return p
