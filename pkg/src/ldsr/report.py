"""Result rendering: aligned text tables, JSON/CSV files, and figures.

JSON and CSV outputs are byte-deterministic for a fixed seed: they carry
no timestamps or timings (wall-clock numbers appear only in the human
table). Figures are rendered headlessly to files next to the delimited
output.
"""

from __future__ import annotations

import csv
import json

import numpy as np
from matplotlib.figure import Figure

from .evaluate import MethodSummary


def format_table(rows: list[dict], columns: list[tuple[str, str]]) -> str:
    """Align ``rows`` under the given (key, header) columns."""
    cells = [[h for _, h in columns]]
    for row in rows:
        cells.append([_fmt(row.get(k)) for k, _ in columns])
    widths = [max(len(r[i]) for r in cells) for i in range(len(columns))]
    lines = []
    for i, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def summary_rows(summaries: list[MethodSummary], with_seconds: bool = False):
    rows = []
    for s in summaries:
        row = {
            "method": s.method,
            "n_per_class": s.n_per_class,
            "trials": s.trials,
            "mean_top1": s.mean_top1,
            "std_top1": s.std_top1,
            "mean_top5": s.mean_top5,
        }
        if with_seconds:
            row["seconds"] = s.seconds
        rows.append(row)
    return rows


def benchmark_table(summaries: list[MethodSummary]) -> str:
    return format_table(
        summary_rows(summaries, with_seconds=True),
        [
            ("method", "method"),
            ("n_per_class", "n/class"),
            ("trials", "trials"),
            ("mean_top1", "top1"),
            ("std_top1", "std"),
            ("mean_top5", "top5"),
            ("seconds", "seconds"),
        ],
    )


def sweep_table(rows: list[dict]) -> str:
    return format_table(
        rows,
        [("fraction", "fraction"), ("method", "method"), ("mean_top1", "top1")],
    )


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def write_csv(path, rows: list[dict], fieldnames: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k) for k in fieldnames})


def save_benchmark_figure(summaries: list[MethodSummary], path) -> None:
    """Accuracy per method; lines over n/class when several sizes ran."""
    fig = Figure(figsize=(6.4, 4.2))
    ax = fig.subplots()
    methods = list(dict.fromkeys(s.method for s in summaries))
    sizes = sorted({s.n_per_class for s in summaries})
    if len(sizes) > 1:
        for method in methods:
            pts = sorted(
                (s.n_per_class, s.mean_top1, s.std_top1)
                for s in summaries
                if s.method == method
            )
            xs, ys, es = zip(*pts)
            ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=method)
        ax.set_xlabel("training samples per class")
    else:
        xs = np.arange(len(methods))
        ys = [s.mean_top1 for s in summaries]
        es = [s.std_top1 for s in summaries]
        ax.bar(xs, ys, yerr=es, capsize=3)
        ax.set_xticks(xs, methods)
    ax.set_ylabel("top-1 accuracy")
    ax.set_title("benchmark results")
    ax.grid(True, alpha=0.3)
    if len(sizes) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)


def save_sweep_figure(rows: list[dict], path) -> None:
    """Accuracy against locality fraction, one line per method."""
    fig = Figure(figsize=(6.4, 4.2))
    ax = fig.subplots()
    methods = list(dict.fromkeys(r["method"] for r in rows))
    for method in methods:
        pts = sorted(
            (r["fraction"], r["mean_top1"]) for r in rows if r["method"] == method
        )
        xs, ys = zip(*pts)
        ax.plot(xs, ys, marker="o", label=method)
    ax.set_xlabel("locality fraction")
    ax.set_ylabel("top-1 accuracy")
    ax.set_title("locality-fraction sweep")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
