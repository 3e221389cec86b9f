"""Run configuration: defaults, schema validation and typed views."""
from __future__ import annotations

import copy
import json
import os
from importlib import resources

import jsonschema

from .amg import AmgConfig
from .dataset import SplitSpec, TimingPolicy
from .nn import NetworkSpec, TrainConfig
from .problems import SuiteConfig

__all__ = ["ConfigError", "DEFAULTS", "load_schema", "load_config", "validate_config",
           "suite_config", "timing_policy", "split_spec", "network_spec", "train_config",
           "amg_config"]


class ConfigError(ValueError):
    pass


DEFAULTS: dict = {
    "seed": 0,
    "problems": {
        "count": 10,
        "p_values": [1],
        "modes": [1, 2, 3],
        "sizes": [2, 3, 4, 5],
        "cells": [4, 6, 8],
        "eps_max_values": [1.0, 3.0, 10.0],
        "renumberings": ["natural"],
    },
    "dataset": {
        "mode": "cost_model",
        "r_min": 2,
        "r_max": 100,
        "budget_seconds": 60.0,
        "m": 75,
        "window": 21,
        "degree": 7,
        "review_threshold": 0.05,
        "workers": 1,
        "split": {"train": 0.2, "val": 0.2, "test": 0.6},
    },
    "network": {
        "conv_blocks": [{"filters": 64, "layers": 3, "kernel_size": 6}],
        "cnn_output_size": 256,
        "dense_widths": [512, 512],
        "include_p": True,
    },
    "train": {
        "lr": 1e-3,
        "batch": 32,
        "plateau_patience": 15,
        "plateau_factor": 0.5,
        "max_epochs": 200,
        "freeze_conv": False,
        "cache_features": True,
        "include_flagged": False,
        "time_limit_seconds": None,
    },
    "amg": {},
    "tuner": {"default_theta": 0.5, "baseline_theta": 0.5, "sigma_bar": None},
    "paths": {},
}


def load_schema() -> dict:
    text = resources.files("amgtune").joinpath("data/config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate_config(doc: dict) -> None:
    try:
        jsonschema.validate(doc, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None


def load_config(path: str | os.PathLike | None = None, overrides: dict | None = None) -> dict:
    """Read, validate and merge a config over :data:`DEFAULTS`.

    The user document is validated before merging so unknown keys are
    reported against what the user wrote.
    """
    doc: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None
    validate_config(doc)
    cfg = _merge(DEFAULTS, doc)
    if overrides:
        cfg = _merge(cfg, overrides)
    validate_config(cfg)
    return cfg


def _seed(cfg: dict, section: dict) -> int:
    return int(section.get("seed", cfg["seed"]))


def suite_config(cfg: dict) -> SuiteConfig:
    d = dict(cfg["problems"])
    d["seed"] = _seed(cfg, d)
    return SuiteConfig.from_dict(d)


def timing_policy(cfg: dict) -> TimingPolicy:
    d = cfg["dataset"]
    return TimingPolicy(d["mode"], d["r_min"], d["r_max"], d["budget_seconds"])


def split_spec(cfg: dict) -> SplitSpec:
    s = cfg["dataset"]["split"]
    return SplitSpec(s["train"], s["val"], s["test"], _seed(cfg, s))


def network_spec(cfg: dict) -> NetworkSpec:
    d = dict(cfg["network"])
    d["m"] = cfg["dataset"]["m"]
    return NetworkSpec.from_dict(d)


def train_config(cfg: dict) -> TrainConfig:
    d = dict(cfg["train"])
    d["seed"] = _seed(cfg, d)
    return TrainConfig(**d)


def amg_config(cfg: dict) -> AmgConfig:
    d = dict(cfg["amg"])
    d.setdefault("seed", cfg["seed"])
    return AmgConfig(**d)
