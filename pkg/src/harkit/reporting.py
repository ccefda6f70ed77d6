"""File renderers for metrics reports, training histories, loss curves, and
the ablation comparison table.

Tables show 3 decimals; the machine-readable delimited files keep full
precision and round-trip exactly (repr -> float).
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .metrics import ConfusionCounts, MetricsReport  # noqa: E402
from .training import TrainHistory  # noqa: E402

MACRO_LABEL = "__macro__"
LOSS_COLUMNS = ("L_A", "L_PP", "L_U", "L_d", "L_total")


def write_metrics_report(report: MetricsReport, csv_path: str | Path,
                         txt_path: str | Path | None = None) -> None:
    """Per-label rows plus a macro summary row (counts summed, metrics
    macro-averaged)."""
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["head", "label", "tp", "fp", "tn", "fn",
                         "precision", "recall", "f1", "mcc"])
        for label in report.labels:
            row = report.per_label[label]
            writer.writerow([report.head, label, row["tp"], row["fp"], row["tn"],
                             row["fn"], repr(row["precision"]), repr(row["recall"]),
                             repr(row["f1"]), repr(row["mcc"])])
        totals = [sum(report.per_label[l][k] for l in report.labels)
                  for k in ("tp", "fp", "tn", "fn")]
        writer.writerow([report.head, MACRO_LABEL, *totals,
                         "", "", repr(report.macro_f1), repr(report.macro_mcc)])
    if txt_path is not None:
        lines = [f"head: {report.head}",
                 f"{'label':<24} {'mcc':>8} {'f1':>8} {'prec':>8} {'rec':>8}"]
        for label in report.labels:
            r = report.per_label[label]
            lines.append(f"{label:<24} {r['mcc']:>8.3f} {r['f1']:>8.3f} "
                         f"{r['precision']:>8.3f} {r['recall']:>8.3f}")
        lines.append(f"{'macro':<24} {report.macro_mcc:>8.3f} {report.macro_f1:>8.3f}")
        Path(txt_path).write_text("\n".join(lines) + "\n")


def read_metrics_report(csv_path: str | Path) -> MetricsReport:
    """Rebuild a MetricsReport from its delimited file."""
    labels, counts = [], []
    head = ""
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            head = row["head"]
            if row["label"] == MACRO_LABEL:
                continue
            labels.append(row["label"])
            counts.append(ConfusionCounts(int(row["tp"]), int(row["fp"]),
                                          int(row["tn"]), int(row["fn"])))
    return MetricsReport(head=head, labels=labels, counts=counts)


def write_step_log(step_log: list[dict], path: str | Path) -> None:
    """Per-step loss components: step, L_A, L_PP, L_U, L_d, L_total."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", *LOSS_COLUMNS])
        for row in step_log:
            writer.writerow([row["step"], *(repr(row[c]) for c in LOSS_COLUMNS)])


def write_history(history: TrainHistory, path: str | Path) -> None:
    """Per-epoch training losses and validation macro metrics."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", *LOSS_COLUMNS,
                         "val_activity_mcc", "val_activity_f1",
                         "val_context_mcc", "val_context_f1",
                         "val_user_mcc", "val_user_f1", "best"])
        for epoch, (losses, reports) in enumerate(zip(history.epoch_losses,
                                                      history.val_reports)):
            writer.writerow([
                epoch,
                *(repr(getattr(losses, c)) for c in LOSS_COLUMNS),
                repr(reports["activity"].macro_mcc), repr(reports["activity"].macro_f1),
                repr(reports["context"].macro_mcc), repr(reports["context"].macro_f1),
                repr(reports["user"].macro_mcc), repr(reports["user"].macro_f1),
                int(epoch == history.best_epoch)])


def render_loss_curves(history: TrainHistory, plot_path: str | Path,
                       data_path: str | Path) -> None:
    """One curve per loss component; the delimited companion file holds the
    exact plotted values."""
    if not history.epoch_losses:
        raise ValueError("history is empty")
    epochs = list(range(len(history.epoch_losses)))
    series = {c: [getattr(b, c) for b in history.epoch_losses] for c in LOSS_COLUMNS}
    with open(data_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", *LOSS_COLUMNS])
        for e in epochs:
            writer.writerow([e, *(repr(series[c][e]) for c in LOSS_COLUMNS)])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for c in LOSS_COLUMNS:
        ax.plot(epochs, series[c], label=c)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend()
    fig.tight_layout()
    fig.savefig(plot_path, dpi=120)
    plt.close(fig)


def read_loss_curve_data(data_path: str | Path) -> dict[str, list[float]]:
    out: dict[str, list[float]] = {c: [] for c in LOSS_COLUMNS}
    with open(data_path, newline="") as fh:
        for row in csv.DictReader(fh):
            for c in LOSS_COLUMNS:
                out[c].append(float(row[c]))
    return out


def render_ablation_table(reports: dict[str, dict[str, MetricsReport]],
                          path: str | Path,
                          csv_path: str | Path | None = None) -> str:
    """Rows = variants, one column per head, cells formatted "MCC/Macro-F1"
    with 3 decimals. A full-precision csv companion is written when asked."""
    if not reports:
        raise ValueError("need at least one variant")
    heads = list(next(iter(reports.values())).keys())
    width = max(len(v) for v in reports) + 2
    lines = [" " * width + "".join(f"{h:>16}" for h in heads)]
    for variant, by_head in reports.items():
        cells = [format_cell(by_head[h].macro_mcc, by_head[h].macro_f1) for h in heads]
        lines.append(f"{variant:<{width}}" + "".join(f"{c:>16}" for c in cells))
    text = "\n".join(lines) + "\n"
    Path(path).write_text(text)
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["variant", "head", "macro_mcc", "macro_f1"])
            for variant, by_head in reports.items():
                for h in heads:
                    writer.writerow([variant, h, repr(by_head[h].macro_mcc),
                                     repr(by_head[h].macro_f1)])
    return text


def format_cell(mcc: float, f1: float) -> str:
    return f"{mcc:.3f}/{f1:.3f}"


def parse_cell(cell: str) -> tuple[float, float]:
    mcc, f1 = cell.strip().split("/")
    return float(mcc), float(f1)


def parse_ablation_table(path: str | Path) -> dict[str, dict[str, tuple[float, float]]]:
    """Inverse of render_ablation_table for the numeric fields."""
    lines = Path(path).read_text().splitlines()
    heads = lines[0].split()
    out: dict[str, dict[str, tuple[float, float]]] = {}
    for line in lines[1:]:
        parts = line.split()
        variant, cells = parts[0], parts[1:]
        out[variant] = {h: parse_cell(c) for h, c in zip(heads, cells)}
    return out
