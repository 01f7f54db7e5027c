"""Render sweep summaries to image files (no interactive display)."""

from __future__ import annotations

from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

LABELS = {"maxent": "MaxEnt", "wmaxent": "W-MaxEnt", "wairl": "WAIRL"}
PANELS = (("evd", "EVD (training env)"), ("transfer_evd", "EVD (transfer env)"))


def plot_summary(summary: dict[str, Any], out_dir: str | Path, title: str = "") -> list[Path]:
    """Plot mean EVD against demo count with standard-error bands.

    Args:
        summary: The ``summary.json`` structure with a ``cells`` list.
        out_dir: Directory for the PNG files; created if missing.
        title: Figure title prefix.

    Returns:
        Paths of the written figures, one per metric that has data.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for metric, ylabel in PANELS:
        series: dict[str, list[tuple[int, float, float]]] = {}
        for cell in summary["cells"]:
            stat = cell.get(metric)
            if stat is None:
                continue
            series.setdefault(cell["algorithm"], []).append(
                (cell["n_demos"], stat["mean"], stat["stderr"])
            )
        if not series:
            continue
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for alg, pts in sorted(series.items()):
            pts.sort()
            n = [p[0] for p in pts]
            mean = [p[1] for p in pts]
            lo = [p[1] - p[2] for p in pts]
            hi = [p[1] + p[2] for p in pts]
            (line,) = ax.plot(n, mean, marker="o", label=LABELS.get(alg, alg))
            ax.fill_between(n, lo, hi, color=line.get_color(), alpha=0.2)
        ax.set_xscale("log", base=2)
        ax.set_xlabel("number of demonstrations")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"{metric}.png"
        fig.savefig(path, dpi=120, metadata={"Software": None})
        plt.close(fig)
        written.append(path)
    return written
