"""Figure rendering for the report command: one metric-vs-top_k curve per PNG."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .mlknn import MetricsReport

# metrics where smaller is better get flagged in the axis label
_LOWER_IS_BETTER = {"hamming_loss", "ranking_loss", "coverage"}


def render_metric_curves(rows: list[dict], outdir: str | Path) -> list[Path]:
    """Render one PNG per metric from report rows of (dataset, top_k, metric, value).

    Rows are grouped by dataset so several sweeps can share a figure. Returns
    the written paths.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for metric in MetricsReport.METRIC_NAMES:
        series: dict[str, list[tuple[int, float]]] = {}
        for row in rows:
            if row["metric"] == metric:
                series.setdefault(row["dataset"], []).append((row["top_k"], row["value"]))
        if not series:
            continue
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for dataset, points in sorted(series.items()):
            points.sort()
            ax.plot([p[0] for p in points], [p[1] for p in points], marker="o", label=dataset)
        ax.set_xlabel("number of selected features")
        direction = " (lower is better)" if metric in _LOWER_IS_BETTER else ""
        ax.set_ylabel(metric.replace("_", " ") + direction)
        ax.grid(True, alpha=0.3)
        if len(series) > 1:
            ax.legend(fontsize=8)
        fig.tight_layout()
        path = outdir / f"{metric}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
