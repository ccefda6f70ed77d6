"""YAML run configuration: defaults for every tunable, deep-merged with an
optional config file; CLI flags override individual keys on top."""

from __future__ import annotations

import copy
from pathlib import Path

import yaml

from .losses import LossWeights
from .synth import SynthSpec
from .training import SplitSpec, TrainConfig

DEFAULTS: dict = {
    "pipeline": {
        "window_s": 3.0,
        "step_s": 1.5,
        "target_len": 50,
        "conflict_pairs": [],
        "pairing_scope": "activity+context",
    },
    "split": {"train": 0.6, "val": 0.2, "test": 0.2, "seed": 0},
    "train": {
        "batch_size": 128,
        "max_epochs": 50,
        "learning_rate": 1.0e-3,
        "patience": 10,
        "alpha": 0.5,
        "gamma1": 1.0,
        "gamma2": 1.0,
        "hidden_size": 64,
        "encoder_dim": 64,
        "seed": 0,
        "ablation": "none",
    },
    "grid": {
        "alpha": [0.1, 0.5, 1.0],
        "gamma1": [0.1, 0.5, 1.0],
        "gamma2": [0.1, 0.5, 1.0],
        "learning_rate": [1.0e-3],
        "encoder_dim": [64],
    },
    "synth": {
        "n_users": 4,
        "n_activities": 4,
        "n_contexts": 2,
        "instances_per_user": 200,
        "channels": 3,
        "snapshots": 50,
        "noise_sigma": 0.1,
        "co_occurrence_rate": 0.2,
        "context_rate": 0.35,
        "seed": 0,
    },
}


# sections where a user-provided mapping replaces the default wholesale
# (a smaller grid must not inherit the default axes)
REPLACE_SECTIONS = ("grid",)


def deep_update(base: dict, override: dict, replace=REPLACE_SECTIONS) -> dict:
    for key, value in override.items():
        if (key not in replace and isinstance(value, dict)
                and isinstance(base.get(key), dict)):
            deep_update(base[key], value, replace=())
        else:
            base[key] = value
    return base


def load_config(path: str | Path | None = None) -> dict:
    """Defaults merged with the given YAML file (if any)."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"config root must be a mapping: {path}")
        deep_update(cfg, loaded)
    return cfg


def apply_overrides(cfg: dict, section: str, overrides: dict) -> dict:
    """Overlay non-None CLI flag values onto one config section."""
    for key, value in overrides.items():
        if value is not None:
            cfg[section][key] = value
    return cfg


def train_config_from(cfg: dict) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        batch_size=int(t["batch_size"]), max_epochs=int(t["max_epochs"]),
        learning_rate=float(t["learning_rate"]), patience=int(t["patience"]),
        loss_weights=LossWeights(alpha=float(t["alpha"]),
                                 gamma1=float(t["gamma1"]),
                                 gamma2=float(t["gamma2"])),
        hidden_size=int(t["hidden_size"]), encoder_dim=int(t["encoder_dim"]),
        pairing_scope=cfg["pipeline"]["pairing_scope"],
        seed=int(t["seed"]), ablation=t["ablation"])


def split_spec_from(cfg: dict) -> SplitSpec:
    s = cfg["split"]
    return SplitSpec(train=float(s["train"]), val=float(s["val"]),
                     test=float(s["test"]), seed=int(s["seed"]))


def synth_spec_from(cfg: dict) -> SynthSpec:
    s = cfg["synth"]
    known = {k: v for k, v in s.items() if k != "seed"}
    return SynthSpec(**known)


def synth_seed_from(cfg: dict) -> int:
    return int(cfg["synth"]["seed"])
