"""Cross-variant comparison tables and box plots."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .evaluation import MetricsReport, summarize

BASELINE = "M2_vanilla"
METRICS = ("collision_rate", "relative_average_speed")


def improvement(base: float, value: float) -> float:
    """Percentage reduction of ``value`` relative to ``base``."""
    if base == 0:
        return 0.0 if value == 0 else -math.inf
    return (base - value) / base * 100.0


def change(base: float, value: float) -> float:
    """Percentage increase of ``value`` relative to ``base``."""
    if base == 0:
        return 0.0 if value == 0 else math.inf
    return (value - base) / base * 100.0


def _group(reports) -> dict[str, MetricsReport]:
    by_variant: dict[str, list] = {}
    for r in reports:
        by_variant.setdefault(r.variant, []).append(r)
    return {v: MetricsReport.merge(rs) for v, rs in sorted(by_variant.items())}


def comparison_rows(reports, baseline: str = BASELINE) -> list[dict]:
    if not reports:
        raise ValueError("need at least one report")
    merged = _group(reports)
    base = merged.get(baseline)
    rows = []
    for variant, rep in merged.items():
        for metric in METRICS:
            s = summarize(getattr(rep, metric))
            row = {"variant": variant, "metric": metric, "n": len(rep.episode_seeds), **s}
            if base is not None:
                b = summarize(getattr(base, metric))["median"]
                fn = improvement if metric == "collision_rate" else change
                row["vs_baseline_pct"] = fn(b, s["median"])
            else:
                row["vs_baseline_pct"] = math.nan
            rows.append(row)
    return rows


def _boxplot(merged: dict, metric: str, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 3.5))
    names = list(merged)
    ax.boxplot([getattr(merged[v], metric) for v in names], showfliers=True)
    ax.set_xticks(range(1, len(names) + 1), [v.split("_")[0] for v in names])
    ax.set_ylabel(metric.replace("_", " "))
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def emit_report(reports, out_dir, baseline: str = BASELINE, plots: bool = True) -> list[Path]:
    """Write ``comparison.csv`` and one box plot per metric; return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = comparison_rows(reports, baseline)
    cols = ["variant", "metric", "n", "min", "q1", "median", "q3", "max", "mean", "vs_baseline_pct"]
    path = out / "comparison.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([r[c] if isinstance(r[c], (str, int)) else repr(float(r[c])) for c in cols])
    written = [path]
    if plots:
        merged = _group(reports)
        for metric in METRICS:
            p = out / f"{metric}.png"
            _boxplot(merged, metric, p)
            written.append(p)
    return written


def load_reports(in_dir) -> list[MetricsReport]:
    paths = sorted(Path(in_dir).glob("*metrics*.csv"))
    if not paths:
        raise FileNotFoundError(f"no metrics CSVs under {in_dir}")
    return [MetricsReport.read_csv(p) for p in paths]
