"""Command-line entry points: gen-synth, prepare, train, grid, eval, ablate.

Every subcommand reads the merged YAML config (defaults <- --config file)
and lets individual flags override single keys. Run `harkit <cmd> --help`
for the flag list.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import reporting
from .dataset import load_prepared, save_prepared, stack_instances
from .model import load_checkpoint, save_checkpoint
from .pipeline import (
    build_instances, build_schema, fit_normalizer, load_annotations,
    load_stream, FeatureVector)
from .synth import write_session_files
from .training import ablate, evaluate, grid_search, split_indices, train


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help="YAML config file merged over defaults")


def cmd_gen_synth(args: argparse.Namespace) -> int:
    cfg = cfgmod.load_config(args.config)
    cfgmod.apply_overrides(cfg, "synth", {
        "n_users": args.users, "n_activities": args.activities,
        "n_contexts": args.contexts, "instances_per_user": args.instances_per_user,
        "noise_sigma": args.noise, "seed": args.seed})
    spec = cfgmod.synth_spec_from(cfg)
    seed = cfgmod.synth_seed_from(cfg)
    sessions = write_session_files(spec, seed, args.out, episode_s=args.episode_s)
    print(f"wrote {len(sessions)} session(s) under {args.out}")
    return 0


def cmd_prepare(args: argparse.Namespace) -> int:
    cfg = cfgmod.load_config(args.config)
    if args.seed is not None:
        cfg["split"]["seed"] = args.seed
    pipe = cfg["pipeline"]
    data_dir = Path(args.data)
    sessions = sorted(p for p in data_dir.iterdir()
                      if p.is_dir() and (p / "annotations.csv").exists())
    if not sessions:
        raise SystemExit(f"no session directories with annotations.csv under {data_dir}")
    all_annotations = [load_annotations(s / "annotations.csv") for s in sessions]
    schema = build_schema(all_annotations)
    conflict_pairs = [tuple(p) for p in pipe["conflict_pairs"]]
    instances = []
    for session, annotations in zip(sessions, all_annotations):
        streams = [load_stream(f) for f in sorted(session.glob("*.csv"))
                   if f.name != "annotations.csv"]
        instances.extend(build_instances(
            streams, annotations, schema, window_s=float(pipe["window_s"]),
            step_s=float(pipe["step_s"]), target_len=int(pipe["target_len"]),
            conflict_pairs=conflict_pairs))
    if not instances:
        raise SystemExit("no instances survived the pipeline")
    full = stack_instances(instances, schema)
    split = cfgmod.split_spec_from(cfg)
    tr, va, te = split_indices(full.user_index, split)
    codes = np.empty(full.n, dtype=np.int8)
    codes[tr], codes[va], codes[te] = 0, 1, 2
    norm = fit_normalizer([FeatureVector(full.features[i], full.feature_missing[i])
                           for i in tr])
    save_prepared(args.out, full, codes, norm)
    print(f"prepared {full.n} instances "
          f"(train {len(tr)}, val {len(va)}, test {len(te)}) -> {args.out}")
    return 0


_TRAIN_FLAGS = ("alpha", "gamma1", "gamma2", "learning_rate", "batch_size",
                "max_epochs", "patience", "hidden_size", "encoder_dim",
                "seed", "ablation")


def _train_config(args: argparse.Namespace):
    cfg = cfgmod.load_config(args.config)
    cfgmod.apply_overrides(cfg, "train",
                           {k: getattr(args, k, None) for k in _TRAIN_FLAGS})
    return cfg, cfgmod.train_config_from(cfg)


def _write_run_outputs(out_dir: Path, params, mconfig, history, reports) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(params, mconfig, out_dir / "checkpoint.npz")
    reporting.write_history(history, out_dir / "history.csv")
    reporting.write_step_log(history.step_log, out_dir / "step_losses.csv")
    reporting.render_loss_curves(history, out_dir / "loss_curves.png",
                                 out_dir / "loss_curves.csv")
    for head, report in reports.items():
        reporting.write_metrics_report(report, out_dir / f"metrics_{head}.csv",
                                       out_dir / f"metrics_{head}.txt")


def cmd_train(args: argparse.Namespace) -> int:
    _, tconfig = _train_config(args)
    train_set, val_set, test_set, _, _ = load_prepared(args.data)
    params, mconfig, history = train(tconfig, train_set, val_set)
    reports = evaluate(params, mconfig, test_set)
    _write_run_outputs(Path(args.out), params, mconfig, history, reports)
    for head, report in reports.items():
        print(f"test {head}: macro-MCC {report.macro_mcc:.3f} "
              f"macro-F1 {report.macro_f1:.3f}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    params, mconfig = load_checkpoint(args.checkpoint)
    splits = dict(zip(("train", "val", "test"), load_prepared(args.data)[:3]))
    data = splits[args.split]
    reports = evaluate(params, mconfig, data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for head, report in reports.items():
        reporting.write_metrics_report(report, out / f"metrics_{head}.csv",
                                       out / f"metrics_{head}.txt")
        print(f"{args.split} {head}: macro-MCC {report.macro_mcc:.3f} "
              f"macro-F1 {report.macro_f1:.3f}")
    return 0


def cmd_grid(args: argparse.Namespace) -> int:
    cfg, tconfig = _train_config(args)
    grid = {k: list(v) for k, v in cfg["grid"].items()}
    train_set, val_set, _, _, _ = load_prepared(args.data)
    best, trials = grid_search(tconfig, grid, train_set, val_set)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "grid_trials.csv", "w") as fh:
        fh.write("point,val_activity_macro_mcc\n")
        for t in trials:
            fh.write(f"\"{json.dumps(t.point)}\",{t.score!r}\n")
    best_point = {"alpha": best.loss_weights.alpha, "gamma1": best.loss_weights.gamma1,
                  "gamma2": best.loss_weights.gamma2,
                  "learning_rate": best.learning_rate,
                  "encoder_dim": best.encoder_dim}
    (out / "best_config.json").write_text(json.dumps(best_point, indent=2))
    print(f"best grid point: {best_point}")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    _, tconfig = _train_config(args)
    train_set, val_set, test_set, _, _ = load_prepared(args.data)
    result = ablate(tconfig, train_set, val_set, test_set)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text = reporting.render_ablation_table(result.reports,
                                           out / "ablation_table.txt",
                                           out / "ablation_table.csv")
    print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harkit",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="write synthetic session files")
    _add_common(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--users", type=int, default=None)
    p.add_argument("--activities", type=int, default=None)
    p.add_argument("--contexts", type=int, default=None)
    p.add_argument("--instances-per-user", dest="instances_per_user",
                   type=int, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--episode-s", dest="episode_s", type=float, default=30.0)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("prepare", help="raw sessions -> model-ready instances")
    _add_common(p)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=None, help="split seed")
    p.set_defaults(func=cmd_prepare)

    def add_train_flags(p):
        _add_common(p)
        p.add_argument("--data", type=Path, required=True)
        p.add_argument("--out", type=Path, required=True)
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--gamma1", type=float, default=None)
        p.add_argument("--gamma2", type=float, default=None)
        p.add_argument("--learning-rate", dest="learning_rate", type=float,
                       default=None)
        p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
        p.add_argument("--epochs", dest="max_epochs", type=int, default=None)
        p.add_argument("--patience", type=int, default=None)
        p.add_argument("--hidden-size", dest="hidden_size", type=int, default=None)
        p.add_argument("--encoder-dim", dest="encoder_dim", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--ablation", choices=("none", "no_UI", "no_CL", "no_TS"),
                       default=None)

    p = sub.add_parser("train", help="train one model and report test metrics")
    add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", help="grid search over validation")
    add_train_flags(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("ablate", help="full / no_UI / no_CL / no_TS comparison")
    add_train_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
