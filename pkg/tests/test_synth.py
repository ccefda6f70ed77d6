"""Synthetic generator: determinism, signal separability, label statistics,
holdout integrity, and stream-file emission."""

import numpy as np
import pytest

from harkit.dataset import stack_instances
from harkit.pipeline import build_instances, build_schema, load_annotations, load_stream
from harkit.synth import (SynthSpec, SynthSpecError, cross_user_benchmark,
                          generate, generate_dataset, write_session_files)
from harkit.training import SplitSpec, split_indices


def small_spec(**overrides):
    base = dict(n_users=3, n_activities=3, n_contexts=2, instances_per_user=30,
                channels=3, snapshots=50, noise_sigma=0.05)
    base.update(overrides)
    return SynthSpec(**base)


class TestGenerate:
    def test_deterministic(self):
        spec = small_spec()
        a = generate_dataset(spec, seed=5)
        b = generate_dataset(small_spec(), seed=5)
        np.testing.assert_array_equal(a.windows, b.windows)
        np.testing.assert_array_equal(a.activities, b.activities)
        np.testing.assert_array_equal(a.users, b.users)

    def test_different_seeds_differ(self):
        spec = small_spec()
        a = generate_dataset(spec, seed=1)
        b = generate_dataset(spec, seed=2)
        assert not np.array_equal(a.windows, b.windows)

    def test_degenerate_spec_identical_windows(self):
        spec = SynthSpec(n_users=1, n_activities=1, n_contexts=1,
                         instances_per_user=8, channels=2, snapshots=40,
                         noise_sigma=0.0, co_occurrence_rate=0.0,
                         context_rate=0.0)
        data = generate_dataset(spec, seed=3)
        for i in range(1, data.n):
            np.testing.assert_array_equal(data.windows[i], data.windows[0])

    def test_label_invariants(self):
        data = generate_dataset(small_spec(), seed=7)
        assert np.isin(data.activities, (0, 1)).all()
        assert np.isin(data.contexts, (0, 1)).all()
        assert (data.users.sum(axis=1) == 1).all()
        assert (data.activities.sum(axis=1) >= 1).all()
        assert data.windows.shape == (90, 3, 50)

    def test_instances_per_user_exact(self):
        data = generate_dataset(small_spec(), seed=8)
        np.testing.assert_array_equal(data.users.sum(axis=0), [30, 30, 30])

    def test_context_frequency_within_binomial_bounds(self):
        rate = 0.35
        spec = small_spec(instances_per_user=400, context_rate=rate)
        data = generate_dataset(spec, seed=9)
        n = data.n
        sigma = np.sqrt(rate * (1 - rate) / n)
        freq = data.contexts.mean(axis=0)
        assert (np.abs(freq - rate) <= 3 * sigma).all()

    def test_co_occurrence_frequency_within_bounds(self):
        rate = 0.25
        spec = small_spec(instances_per_user=400, co_occurrence_rate=rate)
        data = generate_dataset(spec, seed=10)
        two_active = (data.activities.sum(axis=1) == 2).mean()
        sigma = np.sqrt(rate * (1 - rate) / data.n)
        assert abs(two_active - rate) <= 3 * sigma

    def test_nearest_centroid_separates_activities(self):
        spec = SynthSpec(n_users=2, n_activities=2, n_contexts=1,
                         instances_per_user=60, channels=1, snapshots=50,
                         noise_sigma=0.05, co_occurrence_rate=0.0,
                         context_rate=0.0, activity_freqs=(3.0, 11.0))
        data = generate_dataset(spec, seed=11)
        feats = np.abs(np.fft.rfft(data.windows[:, 0, :], axis=1))
        labels = data.activities.argmax(axis=1)
        train = np.arange(data.n) % 2 == 0
        centroids = np.stack([feats[train & (labels == c)].mean(axis=0)
                              for c in (0, 1)])
        d = ((feats[~train, None, :] - centroids[None]) ** 2).sum(axis=2)
        accuracy = (d.argmin(axis=1) == labels[~train]).mean()
        assert accuracy > 0.95

    def test_invalid_counts_rejected(self):
        with pytest.raises(SynthSpecError):
            SynthSpec(n_users=0)
        with pytest.raises(SynthSpecError):
            small_spec(activity_freqs=(1.0,))  # wrong length


class TestHoldout:
    def test_holdout_confined_to_test(self):
        spec = small_spec(holdout_pairs=((2, 0),), instances_per_user=40)
        train, val, test = cross_user_benchmark(spec, seed=1)
        for part, allowed in ((train, False), (val, False), (test, True)):
            hits = (part.users[:, 2] == 1) & (part.activities[:, 0] == 1)
            if allowed:
                assert hits.any()
            else:
                assert not hits.any()

    def test_all_users_and_activities_in_train(self):
        spec = small_spec(holdout_pairs=((2, 0), (1, 1)), instances_per_user=40)
        train, _, _ = cross_user_benchmark(spec, seed=2)
        assert (train.users.sum(axis=0) > 0).all()
        assert (train.activities.sum(axis=0) > 0).all()

    def test_empty_holdout_matches_plain_split(self):
        spec = small_spec(instances_per_user=40)
        train, val, test = cross_user_benchmark(spec, seed=3)
        full = generate_dataset(spec, seed=3)
        tr, va, te = split_indices(full.user_index, SplitSpec(seed=3))
        assert (train.n, val.n, test.n) == (len(tr), len(va), len(te))
        np.testing.assert_array_equal(train.activities, full.activities[tr])

    def test_train_features_are_normalized(self):
        spec = small_spec(instances_per_user=40)
        train, _, _ = cross_user_benchmark(spec, seed=4)
        means = train.features.mean(axis=0)
        assert np.abs(means).max() < 1e-6

    def test_infeasible_holdout_rejected(self):
        with pytest.raises(SynthSpecError):
            small_spec(holdout_pairs=((0, 0), (0, 1), (0, 2)))
        with pytest.raises(SynthSpecError):
            small_spec(holdout_pairs=((9, 0),))


class TestSessionFiles:
    def test_emitted_files_feed_the_pipeline(self, tmp_path):
        spec = small_spec(instances_per_user=20, noise_sigma=0.02)
        sessions = write_session_files(spec, seed=5, out_dir=tmp_path)
        assert len(sessions) == 3
        annotations = [load_annotations(s / "annotations.csv") for s in sessions]
        schema = build_schema(annotations)
        assert schema.n_activities == 3
        assert schema.n_users == 3
        session = sessions[0]
        streams = [load_stream(f) for f in sorted(session.glob("*.csv"))
                   if f.name != "annotations.csv"]
        assert streams[0].n_channels == 3
        instances = build_instances(streams, annotations[0], schema)
        assert len(instances) >= spec.instances_per_user // 2
        stacked = stack_instances(instances, schema)
        assert stacked.windows.shape[1:] == (3, 50)
        assert (stacked.users.sum(axis=1) == 1).all()

    def test_emission_deterministic(self, tmp_path):
        spec = small_spec(instances_per_user=10)
        write_session_files(spec, seed=6, out_dir=tmp_path / "a")
        write_session_files(spec, seed=6, out_dir=tmp_path / "b")
        for name in ("user_0/sensor0.csv", "user_1/annotations.csv"):
            assert (tmp_path / "a" / name).read_text() == \
                   (tmp_path / "b" / name).read_text()
