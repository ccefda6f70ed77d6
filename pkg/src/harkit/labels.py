"""Binary label encoding for activities, contexts, and user identity, plus
the pairing vector that drives positive/negative pair formation.

Activities and contexts are multi-hot (they co-occur); the user is one-hot.
The pairing vector deliberately excludes the user bits by default: including
them would make every same-user pair positive regardless of activity, which
defeats the point of pulling different users doing the same activity together.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PAIRING_SCOPES = ("activity", "activity+context", "all")


class SchemaError(ValueError):
    """Raised for label names absent from the schema."""


class LabelIntegrityError(ValueError):
    """Raised when an instance has zero or multiple user annotations."""


@dataclass(frozen=True)
class LabelSchema:
    """Fixed, ordered name lists for the three label kinds."""

    activity_names: tuple[str, ...]
    context_names: tuple[str, ...]
    user_ids: tuple[str, ...]

    def __post_init__(self):
        for kind, names in (("activity", self.activity_names),
                            ("context", self.context_names),
                            ("user", self.user_ids)):
            if len(set(names)) != len(names):
                raise SchemaError(f"duplicate {kind} names: {names}")

    @property
    def n_activities(self) -> int:
        return len(self.activity_names)

    @property
    def n_contexts(self) -> int:
        return len(self.context_names)

    @property
    def n_users(self) -> int:
        return len(self.user_ids)


@dataclass(frozen=True)
class LabelSet:
    """Encoded labels for one instance: multi-hot activities and contexts,
    one-hot user."""

    activities: np.ndarray
    contexts: np.ndarray
    user: np.ndarray

    def __post_init__(self):
        for name, vec in (("activities", self.activities),
                          ("contexts", self.contexts), ("user", self.user)):
            if not np.isin(vec, (0, 1)).all():
                raise ValueError(f"{name} must be binary")
        if int(self.user.sum()) != 1:
            raise LabelIntegrityError("user vector must be one-hot")

    def active_activity_names(self, schema: LabelSchema) -> set[str]:
        return {schema.activity_names[i] for i in np.where(self.activities)[0]}

    def active_context_names(self, schema: LabelSchema) -> set[str]:
        return {schema.context_names[i] for i in np.where(self.contexts)[0]}

    def user_id(self, schema: LabelSchema) -> str:
        return schema.user_ids[int(np.argmax(self.user))]


def encode_labels(activity_names, context_names, user_names,
                  schema: LabelSchema) -> LabelSet:
    """Encode active annotation names into a LabelSet per the schema order.

    Exactly one user name is required; unknown names raise SchemaError.
    """
    users = list(user_names)
    if len(users) != 1:
        raise LabelIntegrityError(f"expected exactly one user, got {users}")

    def _multi_hot(names, ordered, kind):
        vec = np.zeros(len(ordered), dtype=np.int8)
        index = {n: i for i, n in enumerate(ordered)}
        for name in names:
            if name not in index:
                raise SchemaError(f"unknown {kind} label: {name!r}")
            vec[index[name]] = 1
        return vec

    return LabelSet(
        activities=_multi_hot(activity_names, schema.activity_names, "activity"),
        contexts=_multi_hot(context_names, schema.context_names, "context"),
        user=_multi_hot(users, schema.user_ids, "user"),
    )


def pairing_vector(labels: LabelSet, scope: str = "activity+context") -> np.ndarray:
    """Binary vector whose pairwise dot products define positive pairs.

    Default scope concatenates activities and contexts; "all" additionally
    appends the user one-hot (making every same-user pair positive).
    """
    if scope not in PAIRING_SCOPES:
        raise ValueError(f"pairing scope must be one of {PAIRING_SCOPES}")
    if scope == "activity":
        return labels.activities.copy()
    if scope == "activity+context":
        return np.concatenate([labels.activities, labels.contexts])
    return np.concatenate([labels.activities, labels.contexts, labels.user])


def save_schema(schema: LabelSchema, path: str | Path) -> None:
    """Write the schema as delimited text: label_kind, name, index."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label_kind", "name", "index"])
        for kind, names in (("activity", schema.activity_names),
                            ("context", schema.context_names),
                            ("user", schema.user_ids)):
            for i, name in enumerate(names):
                writer.writerow([kind, name, i])


def load_schema(path: str | Path) -> LabelSchema:
    """Read a schema file written by save_schema."""
    buckets: dict[str, list[tuple[int, str]]] = {"activity": [], "context": [], "user": []}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kind = row["label_kind"]
            if kind not in buckets:
                raise SchemaError(f"unknown label_kind {kind!r} in {path}")
            buckets[kind].append((int(row["index"]), row["name"]))
    return LabelSchema(
        activity_names=tuple(n for _, n in sorted(buckets["activity"])),
        context_names=tuple(n for _, n in sorted(buckets["context"])),
        user_ids=tuple(n for _, n in sorted(buckets["user"])),
    )
