"""Report rendering: structured text, delimited rows, and figures.

Every CLI run that asks for a report directory gets the same trio: a
``report.json`` with the full metrics, a ``report.csv`` with one row per
trial or per category, and matplotlib figures saved next to them. The
stdout table is the human-readable view of the same numbers.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional

from .harness import MetricsReport


def _figure_backend():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_table(report: MetricsReport) -> str:
    """Plain aligned table for terminal output."""
    rows: list[tuple[str, str]] = []
    if report.by_category:
        for category, m in sorted(report.by_category.items()):
            rows.append((f"{category} accuracy", f"{m['accuracy']:.1f} %"))
            rows.append((f"{category} hallucinations", f"{m['hallucination_rate']:.1f} %"))
            rows.append((f"{category} mean latency", f"{m['mean_latency']:.2f} s"))
            rows.append((f"{category} frames", str(m["n"])))
    elif report.accuracy is not None:
        rows.append(("accuracy", f"{report.accuracy:.1f} %"))
        rows.append(("hallucinations", f"{report.hallucination_rate:.1f} %"))
    if report.n_trials:
        successes = round(report.success_rate * report.n_trials)
        rows.append(("success rate", f"{successes}/{report.n_trials}"))
        for code in ("e1", "e2", "e3"):
            rows.append((code, str(report.error_counts.get(code, 0))))
        rows.append(("hallucinations", f"{report.hallucination_rate:.1f} %"))
        if report.mean_latency is not None:
            rows.append(("mean latency", f"{report.mean_latency:.2f} s"))
    if not rows:
        return "(no metrics collected)"
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def write_report(report: MetricsReport, outdir: Path, name: str = "report") -> dict:
    """Write report.json, report.csv and figures; returns written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = {}

    json_path = outdir / f"{name}.json"
    json_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    written["json"] = json_path

    csv_path = outdir / f"{name}.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        if report.trials:
            writer.writerow(["trial", "x", "y", "outcome", "errors", "assignments"])
            for t in report.trials:
                writer.writerow(
                    [
                        t["trial"],
                        f"{t['x']:.3f}",
                        f"{t['y']:.3f}",
                        t["outcome"],
                        ";".join(t.get("errors", [])),
                        json.dumps(t.get("assignments", {}), sort_keys=True),
                    ]
                )
        else:
            writer.writerow(["category", "accuracy", "hallucination_rate", "mean_latency", "n"])
            for category, m in sorted(report.by_category.items()):
                writer.writerow(
                    [
                        category,
                        f"{m['accuracy']:.2f}",
                        f"{m['hallucination_rate']:.2f}",
                        f"{m['mean_latency']:.3f}",
                        m["n"],
                    ]
                )
    written["csv"] = csv_path

    fig_path = outdir / f"{name}.png"
    if report.n_trials:
        _trials_figure(report, fig_path)
        written["figure"] = fig_path
    elif report.by_category:
        _classification_figure(report, fig_path)
        written["figure"] = fig_path
    return written


def _trials_figure(report: MetricsReport, path: Path) -> None:
    plt = _figure_backend()
    fig, ax = plt.subplots(figsize=(6, 4))
    codes = ["e1", "e2", "e3"]
    counts = [report.error_counts.get(c, 0) for c in codes]
    ax.bar(codes, counts, color=["#d95f02", "#7570b3", "#e7298a"])
    successes = round(report.success_rate * report.n_trials)
    ax.set_title(f"Reposition trials: {successes}/{report.n_trials} successful")
    ax.set_ylabel("error count")
    ax.set_ylim(bottom=0)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _classification_figure(report: MetricsReport, path: Path) -> None:
    plt = _figure_backend()
    fig, ax = plt.subplots(figsize=(6, 4))
    categories = sorted(report.by_category)
    xs = range(len(categories))
    acc = [report.by_category[c]["accuracy"] for c in categories]
    hall = [report.by_category[c]["hallucination_rate"] for c in categories]
    width = 0.35
    ax.bar([x - width / 2 for x in xs], acc, width, label="accuracy %", color="#1b9e77")
    ax.bar([x + width / 2 for x in xs], hall, width, label="hallucinations %", color="#d95f02")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(categories)
    ax.set_ylim(0, 100)
    ax.legend()
    ax.set_title("Classification metrics")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
