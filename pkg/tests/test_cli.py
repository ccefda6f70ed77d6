"""End-to-end CLI flows on tiny synthetic sessions."""

import numpy as np
import pytest
import yaml

from harkit.cli import main
from harkit.dataset import load_prepared
from harkit.reporting import parse_ablation_table, read_metrics_report


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """gen-synth + prepare once; the training commands reuse the artifact."""
    root = tmp_path_factory.mktemp("cli")
    raw = root / "raw"
    prepared = root / "prepared"
    assert main(["gen-synth", "--out", str(raw), "--seed", "3",
                 "--users", "2", "--activities", "2", "--contexts", "1",
                 "--instances-per-user", "30", "--noise", "0.05"]) == 0
    assert main(["prepare", "--data", str(raw), "--out", str(prepared),
                 "--seed", "1"]) == 0
    return root


def test_prepare_outputs(workspace):
    prepared = workspace / "prepared"
    for name in ("instances.npz", "schema.csv", "normalizer.npz"):
        assert (prepared / name).exists()
    train, val, test, schema, _ = load_prepared(prepared)
    assert train.n > 0 and val.n > 0 and test.n > 0
    assert schema.n_users == 2
    # features are train-normalized on load
    assert abs(train.features.mean()) < 1.0


def test_prepare_deterministic(workspace, tmp_path):
    other = tmp_path / "prepared2"
    assert main(["prepare", "--data", str(workspace / "raw"),
                 "--out", str(other), "--seed", "1"]) == 0
    a = np.load(workspace / "prepared" / "instances.npz")
    b = np.load(other / "instances.npz")
    for key in ("windows", "features", "split"):
        np.testing.assert_array_equal(a[key], b[key])


def test_train_eval_round_trip(workspace):
    prepared = workspace / "prepared"
    run = workspace / "run"
    assert main(["train", "--data", str(prepared), "--out", str(run),
                 "--epochs", "2", "--batch-size", "16",
                 "--hidden-size", "4", "--encoder-dim", "4"]) == 0
    for name in ("checkpoint.npz", "history.csv", "step_losses.csv",
                 "loss_curves.png", "loss_curves.csv", "metrics_activity.csv",
                 "metrics_context.csv", "metrics_user.csv",
                 "metrics_activity.txt"):
        assert (run / name).exists(), name
    out = workspace / "eval"
    assert main(["eval", "--checkpoint", str(run / "checkpoint.npz"),
                 "--data", str(prepared), "--out", str(out)]) == 0
    train_rep = read_metrics_report(run / "metrics_activity.csv")
    eval_rep = read_metrics_report(out / "metrics_activity.csv")
    assert train_rep.counts == eval_rep.counts


def test_ablate_writes_table(workspace):
    prepared = workspace / "prepared"
    out = workspace / "ablation"
    assert main(["ablate", "--data", str(prepared), "--out", str(out),
                 "--epochs", "1", "--batch-size", "16",
                 "--hidden-size", "4", "--encoder-dim", "4"]) == 0
    parsed = parse_ablation_table(out / "ablation_table.txt")
    assert set(parsed) == {"full", "no_UI", "no_CL", "no_TS"}
    for by_head in parsed.values():
        assert set(by_head) == {"activity", "context", "user"}


def test_grid_with_config_file(workspace, tmp_path):
    prepared = workspace / "prepared"
    out = workspace / "grid"
    cfg = tmp_path / "grid.yaml"
    cfg.write_text(yaml.safe_dump({
        "train": {"max_epochs": 1, "batch_size": 16, "hidden_size": 4,
                  "encoder_dim": 4},
        "grid": {"alpha": [0.1, 0.5]},
    }))
    assert main(["grid", "--config", str(cfg), "--data", str(prepared),
                 "--out", str(out)]) == 0
    trials = (out / "grid_trials.csv").read_text().splitlines()
    assert len(trials) == 3  # header + 2 points
    assert (out / "best_config.json").exists()


def test_config_flag_overrides_file(workspace, tmp_path):
    # flag beats config file for the same key
    prepared = workspace / "prepared"
    cfg = tmp_path / "t.yaml"
    cfg.write_text(yaml.safe_dump({"train": {"max_epochs": 50}}))
    run = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--data", str(prepared),
                 "--out", str(run), "--epochs", "1", "--batch-size", "16",
                 "--hidden-size", "4", "--encoder-dim", "4"]) == 0
    history = (run / "history.csv").read_text().splitlines()
    assert len(history) == 2  # header + exactly one epoch
