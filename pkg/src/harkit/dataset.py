"""Array-backed dataset container bridging the instance pipeline and the
training loop, plus the prepared-dataset disk format (npz + schema csv +
normalizer npz) consumed by the train/eval/grid/ablate entry points.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .labels import LabelSchema, load_schema, save_schema
from .pipeline import (FeatureVector, Instance, Normalizer, fit_normalizer,
                       load_normalizer, normalize, save_normalizer)

SPLIT_CODES = {"train": 0, "val": 1, "test": 2}


@dataclass(frozen=True)
class Dataset:
    """Stacked model-ready arrays for one split (or a whole corpus)."""

    windows: np.ndarray          # (N, S, T) float, zero-filled where missing
    features: np.ndarray         # (N, D) float
    feature_missing: np.ndarray  # (N, D) bool
    activities: np.ndarray       # (N, C_A) int8
    contexts: np.ndarray         # (N, C_PP) int8
    users: np.ndarray            # (N, C_U) int8 one-hot
    schema: LabelSchema

    @property
    def n(self) -> int:
        return self.windows.shape[0]

    @property
    def user_index(self) -> np.ndarray:
        return np.argmax(self.users, axis=1)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(windows=self.windows[idx], features=self.features[idx],
                       feature_missing=self.feature_missing[idx],
                       activities=self.activities[idx], contexts=self.contexts[idx],
                       users=self.users[idx], schema=self.schema)


def stack_instances(instances: list[Instance], schema: LabelSchema) -> Dataset:
    """Stack a list of pipeline Instances into contiguous arrays.

    Window data is zero-filled on missing channels so the encoder always
    sees finite input; the per-feature missing mask is kept alongside.
    """
    if not instances:
        raise ValueError("cannot stack an empty instance list")
    windows = np.stack([np.where(inst.window.missing[:, None], 0.0, inst.window.data)
                        for inst in instances])
    return Dataset(
        windows=windows,
        features=np.stack([inst.features.values for inst in instances]),
        feature_missing=np.stack([inst.features.missing_mask for inst in instances]),
        activities=np.stack([inst.labels.activities for inst in instances]),
        contexts=np.stack([inst.labels.contexts for inst in instances]),
        users=np.stack([inst.labels.user for inst in instances]),
        schema=schema,
    )


def normalize_features(dataset: Dataset, norm: Normalizer) -> Dataset:
    """Apply train-statistics normalization to every feature row."""
    rows = [normalize(FeatureVector(v, m), norm).values
            for v, m in zip(dataset.features, dataset.feature_missing)]
    return replace(dataset, features=np.stack(rows))


def fit_and_normalize(train: Dataset, *others: Dataset):
    """Fit the normalizer on the training split only, then apply it everywhere."""
    feats = [FeatureVector(v, m)
             for v, m in zip(train.features, train.feature_missing)]
    norm = fit_normalizer(feats)
    out = [normalize_features(d, norm) for d in (train, *others)]
    return norm, out


def save_prepared(out_dir: str | Path, full: Dataset, split_codes: np.ndarray,
                  norm: Normalizer) -> None:
    """Write the prepared-dataset artifact: instances.npz holds raw feature
    values (normalization is re-applied from normalizer.npz on load)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.savez(out / "instances.npz",
             windows=full.windows, features=full.features,
             feature_missing=full.feature_missing, activities=full.activities,
             contexts=full.contexts, users=full.users,
             split=np.asarray(split_codes, dtype=np.int8),
             split_codes_json=np.str_(json.dumps(SPLIT_CODES)))
    save_schema(full.schema, out / "schema.csv")
    save_normalizer(norm, out / "normalizer.npz")


def load_prepared(out_dir: str | Path):
    """Load a prepared artifact; returns (train, val, test) with normalized
    features, plus the schema and normalizer."""
    out = Path(out_dir)
    schema = load_schema(out / "schema.csv")
    norm = load_normalizer(out / "normalizer.npz")
    with np.load(out / "instances.npz") as data:
        full = Dataset(windows=data["windows"], features=data["features"],
                       feature_missing=data["feature_missing"],
                       activities=data["activities"], contexts=data["contexts"],
                       users=data["users"], schema=schema)
        split = data["split"]
    full = normalize_features(full, norm)
    parts = {name: full.subset(np.where(split == code)[0])
             for name, code in SPLIT_CODES.items()}
    return parts["train"], parts["val"], parts["test"], schema, norm
