"""Splitting, optimizer behavior, the training loop, grid search, and the
ablation driver."""

import warnings

import numpy as np
import pytest

import harkit.training as training
from harkit.dataset import Dataset
from harkit.labels import LabelSchema
from harkit.losses import LossBreakdown, LossWeights
from harkit.training import (RAdam, SplitSpec, TrainConfig, _allocate_counts,
                             _batches, ablate, evaluate, grid_search,
                             split_dataset, split_indices, train)


def make_dataset(n=40, n_users=2, seed=0, separation=3.0):
    """Linearly separable 2-activity set: the first feature carries the
    class, the rest is noise; users alternate deterministically."""
    rng = np.random.default_rng(seed)
    schema = LabelSchema(activity_names=("a0", "a1"), context_names=("c0", "c1"),
                         user_ids=tuple(f"u{i}" for i in range(n_users)))
    acts = np.zeros((n, 2), dtype=np.int8)
    acts[np.arange(n), np.arange(n) % 2] = 1
    ctxs = rng.integers(0, 2, (n, 2)).astype(np.int8)
    users = np.zeros((n, n_users), dtype=np.int8)
    users[np.arange(n), np.arange(n) % n_users] = 1
    feats = rng.normal(size=(n, 3))
    feats[:, 0] = np.where(acts[:, 0] == 1, separation, -separation)
    feats[:, 0] += rng.normal(scale=0.1, size=n)
    feats[:, 1] = np.where(users.argmax(axis=1) == 0, separation, -separation)
    windows = rng.normal(size=(n, 2, 6)) * 0.1
    return Dataset(windows=windows, features=feats,
                   feature_missing=np.zeros_like(feats, dtype=bool),
                   activities=acts, contexts=ctxs, users=users, schema=schema)


def fast_config(**overrides):
    base = dict(batch_size=16, max_epochs=5, learning_rate=5e-3, patience=10,
                loss_weights=LossWeights(alpha=0.5, gamma1=1.0, gamma2=1.0),
                hidden_size=4, encoder_dim=4, seed=0)
    base.update(overrides)
    return TrainConfig(**base)


class TestAllocateCounts:
    def test_exact_fractions(self):
        assert _allocate_counts(10, SplitSpec()) == (6, 2, 2)

    def test_seven_floor_then_distribute(self):
        # 4.2/1.4/1.4 -> floors 4/1/1, leftover to test (remainder tie)
        assert _allocate_counts(7, SplitSpec()) == (4, 1, 2)

    def test_sums_match(self):
        for n in range(3, 60):
            assert sum(_allocate_counts(n, SplitSpec())) == n

    def test_bad_fractions_rejected(self):
        with pytest.raises(ValueError):
            SplitSpec(train=0.5, val=0.2, test=0.2)
        with pytest.raises(ValueError):
            SplitSpec(train=-0.2, val=0.6, test=0.6)


class TestSplitDataset:
    def test_per_user_stratified(self):
        data = make_dataset(30, n_users=3)
        tr, va, te = split_dataset(data, SplitSpec(seed=1))
        assert (tr.n, va.n, te.n) == (18, 6, 6)
        for part in (tr, va, te):
            # every user appears in every split: 10 per user -> 6/2/2
            assert (part.users.sum(axis=0) > 0).all()

    def test_deterministic(self):
        data = make_dataset(25, n_users=2)
        a = split_indices(data.user_index, SplitSpec(seed=7))
        b = split_indices(data.user_index, SplitSpec(seed=7))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_different_seed_differs(self):
        data = make_dataset(30, n_users=2)
        a = split_indices(data.user_index, SplitSpec(seed=1))[0]
        b = split_indices(data.user_index, SplitSpec(seed=2))[0]
        assert not np.array_equal(a, b)

    def test_tiny_user_warned_into_train(self):
        user_index = np.array([0] * 10 + [1] * 2)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            tr, va, te = split_indices(user_index, SplitSpec(seed=0))
        assert any("assigning all to train" in str(w.message) for w in caught)
        assert set(np.where(user_index == 1)[0]) <= set(tr.tolist())

    def test_too_few_instances_rejected(self):
        with pytest.raises(ValueError):
            split_indices(np.array([0, 0, 1]), SplitSpec())


class TestRAdam:
    def test_lr_zero_is_identity(self):
        params = {"w": np.array([1.0, -2.0])}
        opt = RAdam(lr=0.0)
        for _ in range(5):
            opt.step(params, {"w": np.array([3.0, 3.0])})
        np.testing.assert_array_equal(params["w"], [1.0, -2.0])

    def test_warmup_is_unrectified_momentum(self):
        params = {"w": np.array([0.0])}
        opt = RAdam(lr=0.1)
        opt.step(params, {"w": np.array([1.0])})
        # m_hat == grad on the first step; rectification starts later
        np.testing.assert_allclose(params["w"], [-0.1], atol=1e-12)

    def test_rectification_kicks_in(self):
        opt = RAdam(lr=0.1)
        params = {"w": np.array([0.0])}
        deltas = []
        for _ in range(6):
            before = params["w"].copy()
            opt.step(params, {"w": np.array([1.0])})
            deltas.append(float((before - params["w"])[0]))
        # constant unit gradient: first four steps move by exactly lr
        np.testing.assert_allclose(deltas[:4], [0.1] * 4, atol=1e-12)
        # from step 5 the rectified adaptive step is smaller than lr
        assert 0 < deltas[4] < 0.1


class TestBatches:
    def test_no_singleton_when_contrastive(self):
        rng = np.random.default_rng(0)
        for n in (17, 33, 64, 65):
            chunks = _batches(n, 16, rng, drop_short=True)
            assert all(len(c) >= 2 for c in chunks)
            assert all(len(c) == 16 for c in chunks)

    def test_short_final_kept_without_contrastive(self):
        rng = np.random.default_rng(0)
        chunks = _batches(33, 16, rng, drop_short=False)
        assert sum(len(c) for c in chunks) == 33

    def test_single_small_chunk_survives(self):
        rng = np.random.default_rng(0)
        chunks = _batches(6, 16, rng, drop_short=True)
        assert len(chunks) == 1 and len(chunks[0]) == 6

    def test_batch_size_one_with_alpha_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(batch_size=1)


class TestTrain:
    def test_lr_zero_leaves_params_and_metrics_constant(self):
        data = make_dataset(40)
        tr, va, _ = split_dataset(data, SplitSpec(seed=0))
        config = fast_config(learning_rate=0.0, max_epochs=3)
        params, mconfig, history = train(config, tr, va)
        fresh = training.init_params(mconfig)
        for k in fresh:
            np.testing.assert_array_equal(params[k], fresh[k])
        scores = [r["activity"].macro_mcc for r in history.val_reports]
        assert len(set(scores)) == 1

    def test_loss_decreases_on_separable_set(self):
        data = make_dataset(60, separation=4.0)
        tr, va, _ = split_dataset(data, SplitSpec(seed=0))
        config = fast_config(batch_size=64, max_epochs=5, learning_rate=5e-3)
        _, _, history = train(config, tr, va)
        totals = [b.L_total for b in history.epoch_losses]
        assert len(totals) == 5
        assert all(b < a for a, b in zip(totals, totals[1:]))

    def test_deterministic_history(self):
        data = make_dataset(40)
        tr, va, _ = split_dataset(data, SplitSpec(seed=0))
        config = fast_config(max_epochs=3)
        p1, _, h1 = train(config, tr, va)
        p2, _, h2 = train(config, tr, va)
        for k in p1:
            np.testing.assert_array_equal(p1[k], p2[k])
        assert [b.L_total for b in h1.epoch_losses] == \
               [b.L_total for b in h2.epoch_losses]
        assert h1.best_epoch == h2.best_epoch

    def test_all_losses_finite_and_logged(self):
        data = make_dataset(40)
        tr, va, _ = split_dataset(data, SplitSpec(seed=0))
        config = fast_config(max_epochs=2)
        _, _, history = train(config, tr, va)
        for row in history.step_log:
            assert np.isfinite(row["L_total"])
        assert history.step_log[0]["step"] == 0

    def test_early_stop_after_patience(self):
        data = make_dataset(40)
        tr, va, _ = split_dataset(data, SplitSpec(seed=0))
        config = fast_config(learning_rate=0.0, max_epochs=50, patience=3)
        _, _, history = train(config, tr, va)
        assert history.n_epochs == 4  # epoch 0 best, 3 non-improving, stop
        assert history.best_epoch == 0

    def test_nan_loss_aborts_with_batch_index(self, monkeypatch):
        data = make_dataset(40)
        tr, va, _ = split_dataset(data, SplitSpec(seed=0))
        calls = {"n": 0}
        real = training.total_loss

        def flaky(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] == 1:
                b, g = real(*args, **kwargs)
                return LossBreakdown(b.L_A, b.L_PP, b.L_U, b.L_d, float("nan")), g
            return real(*args, **kwargs)

        monkeypatch.setattr(training, "total_loss", flaky)
        with pytest.raises(RuntimeError, match="batch 0"):
            train(fast_config(max_epochs=1), tr, va)

    def test_no_cl_history_still_reports_ld(self):
        data = make_dataset(40)
        tr, va, _ = split_dataset(data, SplitSpec(seed=0))
        config = fast_config(ablation="no_CL", max_epochs=2)
        _, _, history = train(config, tr, va)
        assert all(np.isfinite(b.L_d) and b.L_d > 0 for b in history.epoch_losses)
        b = history.epoch_losses[0]
        assert b.L_total == pytest.approx(b.L_A + b.L_PP + b.L_U, abs=1e-9)


class TestAblationSwitches:
    def test_effective_weights(self):
        assert fast_config(ablation="no_UI").effective_weights().gamma2 == 0.0
        assert fast_config(ablation="no_CL").effective_weights().alpha == 0.0
        assert fast_config(ablation="none").effective_weights().alpha == 0.5

    def test_no_ts_has_zero_encoder_params(self):
        data = make_dataset(40)
        tr, va, _ = split_dataset(data, SplitSpec(seed=0))
        params, mconfig, _ = train(fast_config(ablation="no_TS", max_epochs=1),
                                   tr, va)
        assert not mconfig.use_encoder
        assert not any(k.startswith(("lstm", "proj")) for k in params)

    def test_invalid_ablation_rejected(self):
        with pytest.raises(ValueError):
            fast_config(ablation="no_everything")


class TestGridSearch:
    def test_single_point_returned(self):
        data = make_dataset(40)
        tr, va, _ = split_dataset(data, SplitSpec(seed=0))
        best, trials = grid_search(fast_config(max_epochs=1),
                                   {"alpha": [0.3]}, tr, va)
        assert len(trials) == 1
        assert best.loss_weights.alpha == 0.3

    def test_product_count(self):
        data = make_dataset(40)
        tr, va, _ = split_dataset(data, SplitSpec(seed=0))
        _, trials = grid_search(fast_config(max_epochs=1),
                                {"alpha": [0.1, 0.5], "learning_rate": [1e-3, 1e-2]},
                                tr, va)
        assert len(trials) == 4

    def test_rigged_grid_selects_dominant(self):
        data = make_dataset(60, separation=4.0)
        tr, va, _ = split_dataset(data, SplitSpec(seed=0))
        best, trials = grid_search(
            fast_config(max_epochs=60, batch_size=16, learning_rate=5e-2,
                        patience=60),
            {"learning_rate": [0.0, 5e-2]}, tr, va)
        assert best.learning_rate == 5e-2
        by_lr = {t.config.learning_rate: t.score for t in trials}
        assert by_lr[5e-2] > by_lr[0.0]

    def test_unknown_key_rejected(self):
        data = make_dataset(40)
        tr, va, _ = split_dataset(data, SplitSpec(seed=0))
        with pytest.raises(ValueError):
            grid_search(fast_config(), {"dropout": [0.5]}, tr, va)

    def test_empty_grid_rejected(self):
        data = make_dataset(40)
        tr, va, _ = split_dataset(data, SplitSpec(seed=0))
        with pytest.raises(ValueError):
            grid_search(fast_config(), {}, tr, va)


class TestAblate:
    def test_four_variants_three_heads(self):
        data = make_dataset(60)
        tr, va, te = split_dataset(data, SplitSpec(seed=0))
        result = ablate(fast_config(max_epochs=1), tr, va, te)
        assert set(result.reports) == {"full", "no_UI", "no_CL", "no_TS"}
        for variant, by_head in result.reports.items():
            assert set(by_head) == {"activity", "context", "user"}
        assert not result.model_configs["no_TS"].use_encoder
        assert result.model_configs["full"].use_encoder


class TestEvaluate:
    def test_reports_cover_all_heads_and_chunking_is_consistent(self):
        data = make_dataset(50)
        tr, va, _ = split_dataset(data, SplitSpec(seed=0))
        config = fast_config(max_epochs=1)
        params, mconfig, _ = train(config, tr, va)
        full = evaluate(params, mconfig, va, chunk=1024)
        chunked = evaluate(params, mconfig, va, chunk=7)
        for head in ("activity", "context", "user"):
            assert full[head].macro_mcc == pytest.approx(chunked[head].macro_mcc)
