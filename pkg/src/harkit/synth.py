"""Synthetic multi-user, multi-label sensor data with controllable user
signatures, for desk-scale verification of everything the real datasets
would support.

Signal family: each activity is a sinusoid at its own frequency (cycles per
window) shared by all users; each user perturbs it with a phase offset,
amplitude scale, and additive bias, so activity identity is user-invariant
(frequency) while user identity is recoverable (signature). Contexts add
their own high-frequency tones, and a configurable subset damps the activity
amplitude (a phone in a bag attenuates motion), keeping context prediction
non-trivial.

Two emission modes: in-memory instances for model experiments, and
stream/annotation files in the exact format the ingestion pipeline reads,
so synthetic data can exercise the full pipeline end to end.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset, fit_and_normalize, stack_instances
from .labels import LabelSchema, LabelSet
from .pipeline import (Annotation, Instance, RawWindow, SensorStream,
                       extract_features, save_annotations, save_stream)
from .training import SplitSpec, split_indices


class SynthSpecError(ValueError):
    """Raised for infeasible generator specifications."""


@dataclass
class SynthSpec:
    n_users: int = 4
    n_activities: int = 4
    n_contexts: int = 2
    instances_per_user: int = 200
    channels: int = 3
    snapshots: int = 50
    window_s: float = 3.0
    # per-activity base waveform: frequency in cycles per window, amplitude
    activity_freqs: tuple = None
    activity_amps: tuple = None
    # per-user signature: phase offset, amplitude scale, additive bias
    user_phases: tuple = None
    user_amp_scales: tuple = None
    user_biases: tuple = None
    noise_sigma: float = 0.1
    co_occurrence_rate: float = 0.2
    # contexts: independent activation, each adds a tone; some damp the signal
    context_rate: float = 0.5
    context_freqs: tuple = None
    context_amp: float = 0.8
    damping_contexts: tuple = (0,)
    damping_factor: float = 0.6
    # per-activity, per-channel amplitude gains: activities excite the axes
    # unevenly (rotating profile by default), giving channel statistics an
    # activity signature that survives user scaling
    axis_gains: tuple = None
    holdout_pairs: tuple = ()  # (user_index, activity_index) pairs kept out of train

    def __post_init__(self):
        counts = (self.n_users, self.n_activities, self.n_contexts,
                  self.instances_per_user, self.channels, self.snapshots)
        if any(c <= 0 for c in counts):
            raise SynthSpecError("all counts must be positive")
        if self.activity_freqs is None:
            self.activity_freqs = tuple(2.0 + 2.0 * i for i in range(self.n_activities))
        if self.activity_amps is None:
            self.activity_amps = tuple(1.0 for _ in range(self.n_activities))
        if self.user_phases is None:
            self.user_phases = tuple(2.0 * np.pi * u / self.n_users
                                     for u in range(self.n_users))
        if self.user_amp_scales is None:
            self.user_amp_scales = tuple(np.linspace(0.75, 1.25, self.n_users))
        if self.user_biases is None:
            self.user_biases = tuple(np.linspace(-0.45, 0.45, self.n_users))
        if self.context_freqs is None:
            top = max(self.activity_freqs)
            self.context_freqs = tuple(top + 6.0 + 3.0 * k
                                       for k in range(self.n_contexts))
        if self.axis_gains is None:
            self.axis_gains = tuple(
                tuple(0.75 + 0.25 * ((a + c) % 3) for c in range(self.channels))
                for a in range(self.n_activities))
        for name, seq, want in (("activity_freqs", self.activity_freqs, self.n_activities),
                                ("activity_amps", self.activity_amps, self.n_activities),
                                ("user_phases", self.user_phases, self.n_users),
                                ("user_amp_scales", self.user_amp_scales, self.n_users),
                                ("user_biases", self.user_biases, self.n_users),
                                ("context_freqs", self.context_freqs, self.n_contexts),
                                ("axis_gains", self.axis_gains, self.n_activities)):
            if len(seq) != want:
                raise SynthSpecError(f"{name} must have {want} entries")
        if any(len(row) != self.channels for row in self.axis_gains):
            raise SynthSpecError("axis_gains rows must have one gain per channel")
        per_user_holdouts: dict[int, set[int]] = {}
        for u, a in self.holdout_pairs:
            if not (0 <= u < self.n_users and 0 <= a < self.n_activities):
                raise SynthSpecError(f"holdout pair {(u, a)} out of range")
            per_user_holdouts.setdefault(u, set()).add(a)
        for u, acts in per_user_holdouts.items():
            if len(acts) >= self.n_activities:
                raise SynthSpecError(f"holdout covers every activity of user {u}")

    def schema(self) -> LabelSchema:
        return LabelSchema(
            activity_names=tuple(f"activity_{i}" for i in range(self.n_activities)),
            context_names=tuple(f"context_{i}" for i in range(self.n_contexts)),
            user_ids=tuple(f"user_{u}" for u in range(self.n_users)))

    def triaxial_groups(self) -> tuple:
        return tuple((3 * g, 3 * g + 1, 3 * g + 2)
                     for g in range(self.channels // 3))


def _window_signal(spec: SynthSpec, user: int, active_acts, active_ctxs,
                   rng: np.random.Generator) -> np.ndarray:
    """One (channels, snapshots) window following the signal family."""
    t = np.arange(spec.snapshots) / spec.snapshots
    phase_u = spec.user_phases[user]
    damp = (spec.damping_factor
            if any(k in spec.damping_contexts for k in active_ctxs) else 1.0)
    sig = np.zeros((spec.channels, spec.snapshots))
    for c in range(spec.channels):
        psi = np.pi * c / (2.0 * spec.channels)
        wave = np.zeros(spec.snapshots)
        for a in active_acts:
            wave += spec.axis_gains[a][c] * spec.activity_amps[a] * np.sin(
                2 * np.pi * spec.activity_freqs[a] * t + phase_u + psi)
        wave *= spec.user_amp_scales[user] * damp
        for k in active_ctxs:
            wave += spec.context_amp * np.sin(
                2 * np.pi * spec.context_freqs[k] * t + phase_u + psi)
        sig[c] = wave + spec.user_biases[user]
    if spec.noise_sigma > 0:
        sig = sig + rng.normal(0.0, spec.noise_sigma, sig.shape)
    return sig


def generate(spec: SynthSpec, seed: int = 0):
    """Generate the in-memory dataset: a list of Instances plus the schema.

    Deterministic per (spec, seed). Each user contributes exactly
    instances_per_user windows; activities are drawn uniformly with an
    optional co-occurring second activity; contexts are independent
    Bernoulli draws.
    """
    rng = np.random.default_rng(seed)
    schema = spec.schema()
    groups = spec.triaxial_groups()
    instances: list[Instance] = []
    for user in range(spec.n_users):
        for _ in range(spec.instances_per_user):
            primary = int(rng.integers(spec.n_activities))
            acts = [primary]
            if spec.n_activities >= 2 and rng.random() < spec.co_occurrence_rate:
                other = int(rng.integers(spec.n_activities - 1))
                acts.append(other if other < primary else other + 1)
            ctxs = [k for k in range(spec.n_contexts)
                    if rng.random() < spec.context_rate]
            data = _window_signal(spec, user, acts, ctxs, rng)
            window = RawWindow(data=data, start_time=0.0, end_time=spec.window_s,
                               missing=np.zeros(spec.channels, dtype=bool))
            act_vec = np.zeros(spec.n_activities, dtype=np.int8)
            act_vec[acts] = 1
            ctx_vec = np.zeros(spec.n_contexts, dtype=np.int8)
            ctx_vec[ctxs] = 1
            user_vec = np.zeros(spec.n_users, dtype=np.int8)
            user_vec[user] = 1
            labels = LabelSet(activities=act_vec, contexts=ctx_vec, user=user_vec)
            instances.append(Instance(
                window=window,
                features=extract_features(window, groups),
                labels=labels, user_id=schema.user_ids[user]))
    return instances, schema


def generate_dataset(spec: SynthSpec, seed: int = 0) -> Dataset:
    """Stacked (unnormalized) arrays for the generated corpus."""
    instances, schema = generate(spec, seed)
    return stack_instances(instances, schema)


def _holdout_mask(data: Dataset, holdout_pairs) -> np.ndarray:
    mask = np.zeros(data.n, dtype=bool)
    for u, a in holdout_pairs:
        mask |= (data.users[:, u] == 1) & (data.activities[:, a] == 1)
    return mask


def cross_user_benchmark(spec: SynthSpec, seed: int = 0,
                         split: SplitSpec | None = None):
    """(train, val, test) with every holdout (user, activity) combination
    confined to test; features are normalized with train statistics.

    With an empty holdout this reduces to the plain stratified split. Raises
    if the holdout leaves any user or activity unseen in train.
    """
    split = split or SplitSpec(seed=seed)
    full = generate_dataset(spec, seed)
    held = _holdout_mask(full, spec.holdout_pairs)
    rest = np.where(~held)[0]
    if rest.size < 5:
        raise SynthSpecError("holdout leaves too few instances to split")
    tr, va, te = split_indices(full.user_index[rest], split)
    train_idx = rest[tr]
    val_idx = rest[va]
    test_idx = np.sort(np.concatenate([rest[te], np.where(held)[0]]))
    train = full.subset(train_idx)
    if (train.users.sum(axis=0) == 0).any():
        raise SynthSpecError("a user is absent from train; infeasible holdout/split")
    if (train.activities.sum(axis=0) == 0).any():
        raise SynthSpecError("an activity is absent from train; infeasible holdout/split")
    _, (train, val, test) = fit_and_normalize(train, full.subset(val_idx),
                                              full.subset(test_idx))
    return train, val, test


# ---------------------------------------------------------------------------
# stream-file emission (full-pipeline mode)
# ---------------------------------------------------------------------------

def _episode_plan(spec: SynthSpec, rng: np.random.Generator,
                  episode_s: float, n_episodes: int):
    """Per-episode active activities and contexts for one user."""
    plan = []
    for e in range(n_episodes):
        primary = int(rng.integers(spec.n_activities))
        acts = [primary]
        if spec.n_activities >= 2 and rng.random() < spec.co_occurrence_rate:
            other = int(rng.integers(spec.n_activities - 1))
            acts.append(other if other < primary else other + 1)
        ctxs = [k for k in range(spec.n_contexts)
                if rng.random() < spec.context_rate]
        plan.append((e * episode_s, (e + 1) * episode_s, acts, ctxs))
    return plan


def write_session_files(spec: SynthSpec, seed: int, out_dir: str | Path,
                        episode_s: float = 30.0) -> list[Path]:
    """Emit one session directory per user: stream csv(s) + annotations.csv.

    The continuous signal follows the same family as the instance mode
    (frequencies in cycles per window become cycles/window_s in hertz), so
    windows cut by the ingestion pipeline carry the same structure. Returns
    the session directories written.
    """
    out = Path(out_dir)
    rng = np.random.default_rng(seed)
    rate = spec.snapshots / spec.window_s
    step_s = spec.window_s / 2.0
    duration_needed = (spec.instances_per_user - 1) * step_s + spec.window_s
    n_episodes = int(np.ceil(duration_needed / episode_s))
    sessions = []
    for user in range(spec.n_users):
        session = out / f"user_{user}"
        session.mkdir(parents=True, exist_ok=True)
        plan = _episode_plan(spec, rng, episode_s, n_episodes)
        total_s = n_episodes * episode_s
        n_samples = int(round(total_s * rate))
        t = np.arange(n_samples) / rate
        phase_u = spec.user_phases[user]
        values = np.zeros((spec.channels, n_samples))
        for start, end, acts, ctxs in plan:
            sel = (t >= start) & (t < end)
            damp = (spec.damping_factor
                    if any(k in spec.damping_contexts for k in ctxs) else 1.0)
            for c in range(spec.channels):
                psi = np.pi * c / (2.0 * spec.channels)
                wave = np.zeros(sel.sum())
                for a in acts:
                    wave += spec.axis_gains[a][c] * spec.activity_amps[a] * np.sin(
                        2 * np.pi * (spec.activity_freqs[a] / spec.window_s) * t[sel]
                        + phase_u + psi)
                wave *= spec.user_amp_scales[user] * damp
                for k in ctxs:
                    wave += spec.context_amp * np.sin(
                        2 * np.pi * (spec.context_freqs[k] / spec.window_s) * t[sel]
                        + phase_u + psi)
                values[c, sel] = wave + spec.user_biases[user]
        if spec.noise_sigma > 0:
            values = values + rng.normal(0.0, spec.noise_sigma, values.shape)

        annotations = [Annotation(0.0, total_s, f"user_{user}", "user")]
        for start, end, acts, ctxs in plan:
            for a in acts:
                annotations.append(Annotation(start, end, f"activity_{a}", "activity"))
            for k in ctxs:
                annotations.append(Annotation(start, end, f"context_{k}", "context"))

        for g, chans in enumerate(_channel_files(spec.channels)):
            stream = SensorStream(sensor_id=f"sensor{g}", timestamps=t,
                                  values=values[list(chans)])
            save_stream(stream, session / f"sensor{g}.csv",
                        channel_names=[f"ch{c}" for c in chans])
        save_annotations(annotations, session / "annotations.csv")
        sessions.append(session)
    (out / "synth_spec.json").write_text(json.dumps(
        {"seed": seed, "n_users": spec.n_users, "n_activities": spec.n_activities,
         "n_contexts": spec.n_contexts, "channels": spec.channels,
         "snapshots": spec.snapshots, "noise_sigma": spec.noise_sigma}, indent=2))
    return sessions


def _channel_files(n_channels: int):
    """Group channels into tri-axial stream files plus a remainder file."""
    groups = [tuple(range(3 * g, 3 * g + 3)) for g in range(n_channels // 3)]
    rest = tuple(range(3 * (n_channels // 3), n_channels))
    if rest:
        groups.append(rest)
    return groups
