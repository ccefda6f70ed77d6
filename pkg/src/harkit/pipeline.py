"""Raw sensor streams -> fixed-shape model-ready instances.

Stages: sliding-window segmentation, Fourier resampling to a fixed length,
handcrafted feature extraction, train-statistics normalization, and
conflicting-label filtering. Everything is a pure function of its inputs, so
the same stream and config always produce bit-identical instances.

Stream files are delimited text with a header row; the first column is the
timestamp in seconds, the remaining columns are channel values, and missing
values are empty fields. Annotation files carry (start_s, end_s, label_name,
label_kind) rows with label_kind in {activity, context, user}.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import resample as _fourier_resample

from .labels import LabelSchema, LabelSet, encode_labels

ANNOTATION_KINDS = ("activity", "context", "user")

# features computed per channel, in block order
CHANNEL_FEATURES = ("mean", "std", "min", "max", "median", "mad", "iqr",
                    "energy", "dom_bin", "spec_entropy")
# features computed per tri-axial group on the magnitude signal
GROUP_FEATURES = ("mag_mean", "mag_std")


class DataIntegrityError(ValueError):
    """Raised for malformed streams (non-increasing timestamps etc.)."""


@dataclass(frozen=True)
class SensorStream:
    """One sensor's time series: strictly increasing timestamps and a
    (channels, n) value matrix. NaN marks missing samples."""

    sensor_id: str
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float)
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "values", v)
        if t.size and not (np.diff(t) > 0).all():
            raise DataIntegrityError(f"{self.sensor_id}: timestamps not strictly increasing")
        if v.shape[1] != t.size:
            raise DataIntegrityError(f"{self.sensor_id}: values length != timestamps length")

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    def sample_period(self) -> float:
        if self.timestamps.size < 2:
            raise DataIntegrityError(f"{self.sensor_id}: need >= 2 samples for a rate")
        return float(np.median(np.diff(self.timestamps)))


@dataclass(frozen=True)
class Segment:
    """Variable-length slice of a stream covering [start_s, start_s + window_s)."""

    start_s: float
    end_s: float
    timestamps: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class RawWindow:
    """Fixed-shape (channels, target_len) window; missing[c] marks channels
    with no usable samples (their data rows are zero-filled)."""

    data: np.ndarray
    start_time: float
    end_time: float
    missing: np.ndarray

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    missing_mask: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.missing_mask.shape:
            raise ValueError("values and missing_mask must have the same shape")


@dataclass(frozen=True)
class Normalizer:
    """Per-feature training mean and (floored) standard deviation."""

    mu: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        if (self.s <= 0).any():
            raise ValueError("normalizer std entries must be strictly positive")


@dataclass
class Instance:
    """One model-ready row: window + features + labels + provenance."""

    window: RawWindow
    features: FeatureVector
    labels: LabelSet
    user_id: str
    annotations: dict = field(default_factory=dict)


def segment_windows(stream: SensorStream, window_s: float, step_s: float) -> list[Segment]:
    """Slide a window of window_s seconds by step_s over the stream.

    Window i covers [t0 + i*step_s, t0 + i*step_s + window_s); enumeration
    stops once the window end passes the last timestamp by more than one
    sample period. Segments holding fewer than half the expected samples are
    dropped (signal-quality floor on gaps / stream tails).
    """
    if window_s <= 0:
        raise ValueError("window_s must be positive")
    if not (0 < step_s <= window_s):
        raise ValueError("step_s must satisfy 0 < step_s <= window_s")
    if stream.timestamps.size == 0:
        return []
    if stream.timestamps.size < 2:
        return []
    period = stream.sample_period()
    expected = window_s / period
    min_samples = 0.5 * expected
    t = stream.timestamps
    t0 = float(t[0])
    out: list[Segment] = []
    i = 0
    while t0 + i * step_s + window_s <= t[-1] + period * (1 + 1e-9):
        start = t0 + i * step_s
        end = start + window_s
        lo, hi = np.searchsorted(t, [start, end], side="left")
        if (hi - lo) >= min_samples:
            out.append(Segment(start_s=start, end_s=end,
                               timestamps=t[lo:hi].copy(),
                               values=stream.values[:, lo:hi].copy()))
        i += 1
    return out


def resample_fourier(segment: np.ndarray, target_len: int) -> np.ndarray:
    """FFT-domain resampling of a 1-D signal to target_len samples.

    Forward transform, spectrum truncation or zero-padding, inverse transform
    with amplitude rescaling by target_len/n. Preserves the signal mean
    exactly (the DC bin is untouched).
    """
    x = np.asarray(segment, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("segment must be 1-D with at least 2 samples")
    if target_len < 2:
        raise ValueError("target_len must be >= 2")
    if not np.isfinite(x).all():
        raise ValueError("segment must be finite; interpolate gaps first")
    return _fourier_resample(x, target_len)


def _fill_gaps(timestamps: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Linearly interpolate NaNs in one channel; returns None if nothing is finite."""
    finite = np.isfinite(values)
    if not finite.any():
        return None
    if finite.all():
        return values
    return np.interp(timestamps, timestamps[finite], values[finite])


def window_from_segment(segment: Segment, target_len: int) -> RawWindow:
    """Resample every channel of a segment to target_len samples.

    Channels with no finite samples are flagged missing and zero-filled;
    interior gaps are linearly interpolated before the Fourier resampling.
    """
    n_ch = segment.values.shape[0]
    data = np.zeros((n_ch, target_len))
    missing = np.zeros(n_ch, dtype=bool)
    for c in range(n_ch):
        filled = _fill_gaps(segment.timestamps, segment.values[c])
        if filled is None or filled.size < 2:
            missing[c] = True
            continue
        data[c] = resample_fourier(filled, target_len)
    return RawWindow(data=data, start_time=segment.start_s,
                     end_time=segment.end_s, missing=missing)


def feature_names(n_channels: int, triaxial_groups=()) -> list[str]:
    """Stable feature ordering: per-channel blocks, then per-group blocks."""
    names = [f"ch{c}_{f}" for c in range(n_channels) for f in CHANNEL_FEATURES]
    for g, chans in enumerate(triaxial_groups):
        names += [f"grp{g}_{f}" for f in GROUP_FEATURES]
    return names


def _channel_features(x: np.ndarray) -> np.ndarray:
    spectrum = np.abs(np.fft.rfft(x))
    power = spectrum ** 2
    total = power.sum()
    if total > 0:
        p = power / total
        nz = p > 0
        entropy = float(-(p[nz] * np.log(p[nz])).sum())
    else:
        entropy = 0.0
    # dominant bin excludes DC (captured by the mean); ties -> lowest bin
    dom = int(np.argmax(spectrum[1:])) + 1 if spectrum.size > 1 else 0
    q75, q25 = np.percentile(x, [75, 25])
    med = float(np.median(x))
    return np.array([
        x.mean(),
        x.std(),
        x.min(),
        x.max(),
        med,
        float(np.median(np.abs(x - med))),
        q75 - q25,
        (x ** 2).mean(),
        float(dom),
        entropy,
    ])


def extract_features(window: RawWindow, triaxial_groups=()) -> FeatureVector:
    """Deterministic statistical/spectral summary of a window.

    Per channel: mean, std, min, max, median, median absolute deviation,
    interquartile range, energy (mean square), dominant FFT bin index, and
    spectral entropy of the normalized power spectrum. Per tri-axial group:
    mean and std of the magnitude signal. Missing channels produce
    missing-masked blocks (zeros), as does any group touching one.
    """
    n_ch = window.n_channels
    n_blk = len(CHANNEL_FEATURES)
    dim = n_ch * n_blk + len(triaxial_groups) * len(GROUP_FEATURES)
    values = np.zeros(dim)
    mask = np.zeros(dim, dtype=bool)
    for c in range(n_ch):
        lo = c * n_blk
        if window.missing[c]:
            mask[lo:lo + n_blk] = True
        else:
            values[lo:lo + n_blk] = _channel_features(window.data[c])
    base = n_ch * n_blk
    for g, chans in enumerate(triaxial_groups):
        lo = base + g * len(GROUP_FEATURES)
        chans = tuple(chans)
        if len(chans) != 3:
            raise ValueError(f"tri-axial group {g} must list 3 channels, got {chans}")
        if window.missing[list(chans)].any():
            mask[lo:lo + len(GROUP_FEATURES)] = True
        else:
            mag = np.sqrt((window.data[list(chans)] ** 2).sum(axis=0))
            values[lo] = mag.mean()
            values[lo + 1] = mag.std()
    return FeatureVector(values=values, missing_mask=mask)


def fit_normalizer(train_features: list[FeatureVector], eps: float = 1e-8) -> Normalizer:
    """Per-dimension mean/std over non-missing training entries, std floored
    at eps. Dimensions that are missing everywhere get mu=0, s=eps."""
    if len(train_features) < 2:
        raise ValueError("need at least 2 training instances to fit a normalizer")
    vals = np.stack([f.values for f in train_features])
    present = ~np.stack([f.missing_mask for f in train_features])
    count = present.sum(axis=0)
    any_present = count > 0
    safe = np.maximum(count, 1)
    mu = np.where(any_present, (vals * present).sum(axis=0) / safe, 0.0)
    var = np.where(any_present, ((vals - mu) ** 2 * present).sum(axis=0) / safe, 0.0)
    s = np.maximum(np.sqrt(var), eps)
    return Normalizer(mu=mu, s=s)


def normalize(feat: FeatureVector, norm: Normalizer) -> FeatureVector:
    """Standardize non-missing entries; missing entries become exactly 0."""
    if feat.values.shape != norm.mu.shape:
        raise ValueError(f"dimension mismatch: {feat.values.shape} vs {norm.mu.shape}")
    values = (feat.values - norm.mu) / norm.s
    values[feat.missing_mask] = 0.0
    return FeatureVector(values=values, missing_mask=feat.missing_mask.copy())


def has_conflict(active_names: set[str], conflict_pairs) -> bool:
    """True iff any configured mutually exclusive pair is simultaneously active."""
    for a, b in conflict_pairs:
        if a in active_names and b in active_names:
            return True
    return False


def filter_conflicts(labels: LabelSet, schema: LabelSchema, conflict_pairs) -> bool:
    """Keep/drop decision for an encoded instance: True means keep."""
    active = labels.active_activity_names(schema) | labels.active_context_names(schema)
    return not has_conflict(active, conflict_pairs)


# ---------------------------------------------------------------------------
# file ingestion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Annotation:
    start_s: float
    end_s: float
    name: str
    kind: str


def load_stream(path: str | Path) -> SensorStream:
    """Read one delimited stream file (header, timestamp + channel columns)."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    if len(header) < 2:
        raise DataIntegrityError(f"{path}: need a timestamp column and >= 1 channel")
    ts = np.empty(len(rows))
    vals = np.empty((len(header) - 1, len(rows)))
    for i, row in enumerate(rows):
        ts[i] = float(row[0])
        for c, cell in enumerate(row[1:]):
            vals[c, i] = float(cell) if cell.strip() else np.nan
    return SensorStream(sensor_id=path.stem, timestamps=ts, values=vals)


def save_stream(stream: SensorStream, path: str | Path,
                channel_names: list[str] | None = None) -> None:
    names = channel_names or [f"ch{c}" for c in range(stream.n_channels)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp"] + list(names))
        for i, t in enumerate(stream.timestamps):
            row = [repr(float(t))]
            for c in range(stream.n_channels):
                v = stream.values[c, i]
                row.append("" if not np.isfinite(v) else repr(float(v)))
            writer.writerow(row)


def load_annotations(path: str | Path) -> list[Annotation]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kind = row["label_kind"]
            if kind not in ANNOTATION_KINDS:
                raise DataIntegrityError(f"{path}: unknown label_kind {kind!r}")
            out.append(Annotation(float(row["start_s"]), float(row["end_s"]),
                                  row["label_name"], kind))
    return out


def save_annotations(annotations: list[Annotation], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["start_s", "end_s", "label_name", "label_kind"])
        for a in annotations:
            writer.writerow([repr(a.start_s), repr(a.end_s), a.name, a.kind])


def active_names(annotations: list[Annotation], start_s: float, end_s: float,
                 kind: str) -> set[str]:
    """Labels whose annotation covers more than half of [start_s, end_s)."""
    window = end_s - start_s
    covered: dict[str, float] = {}
    for a in annotations:
        if a.kind != kind:
            continue
        overlap = min(a.end_s, end_s) - max(a.start_s, start_s)
        if overlap > 0:
            covered[a.name] = covered.get(a.name, 0.0) + overlap
    return {name for name, t in covered.items() if t > 0.5 * window}


def build_schema(session_annotations: list[list[Annotation]]) -> LabelSchema:
    """Schema from all annotation names, sorted for a stable ordering."""
    names: dict[str, set[str]] = {k: set() for k in ANNOTATION_KINDS}
    for annotations in session_annotations:
        for a in annotations:
            names[a.kind].add(a.name)
    return LabelSchema(activity_names=tuple(sorted(names["activity"])),
                       context_names=tuple(sorted(names["context"])),
                       user_ids=tuple(sorted(names["user"])))


def build_instances(streams: list[SensorStream], annotations: list[Annotation],
                    schema: LabelSchema, window_s: float = 3.0, step_s: float = 1.5,
                    target_len: int = 50, conflict_pairs=()) -> list[Instance]:
    """Segment a session's streams on a common grid and assemble instances.

    All streams are windowed on the grid of the first stream; per window, each
    stream contributes its channels (missing-masked if the stream has no
    usable samples there). Windows without exactly one majority user, or with
    a configured label conflict, are dropped.
    """
    if not streams:
        return []
    grids = [segment_windows(s, window_s, step_s) for s in streams]
    by_start = [{round(seg.start_s, 9): seg for seg in g} for g in grids]
    tri_groups = []
    offset = 0
    for s in streams:
        if s.n_channels == 3:
            tri_groups.append((offset, offset + 1, offset + 2))
        offset += s.n_channels
    total_ch = offset

    starts = sorted({k for d in by_start for k in d})
    out: list[Instance] = []
    for start in starts:
        parts = []
        for s, d in zip(streams, by_start):
            seg = d.get(start)
            if seg is None:
                data = np.zeros((s.n_channels, target_len))
                parts.append(RawWindow(data=data, start_time=start,
                                       end_time=start + window_s,
                                       missing=np.ones(s.n_channels, dtype=bool)))
            else:
                parts.append(window_from_segment(seg, target_len))
        missing = np.concatenate([p.missing for p in parts])
        if missing.all():
            continue
        window = RawWindow(data=np.vstack([p.data for p in parts]),
                           start_time=start, end_time=start + window_s,
                           missing=missing)
        assert window.n_channels == total_ch
        acts = active_names(annotations, start, start + window_s, "activity")
        ctxs = active_names(annotations, start, start + window_s, "context")
        users = active_names(annotations, start, start + window_s, "user")
        if len(users) != 1:
            continue
        labels = encode_labels(sorted(acts), sorted(ctxs), sorted(users), schema)
        if not filter_conflicts(labels, schema, conflict_pairs):
            continue
        feats = extract_features(window, tri_groups)
        out.append(Instance(window=window, features=feats, labels=labels,
                            user_id=next(iter(users))))
    return out


def save_normalizer(norm: Normalizer, path: str | Path) -> None:
    np.savez(path, mu=norm.mu, s=norm.s)


def load_normalizer(path: str | Path) -> Normalizer:
    with np.load(path) as data:
        return Normalizer(mu=data["mu"], s=data["s"])
