"""Report rendering: delimited tables plus matplotlib figures written next to
them (loss curves, posterior-entropy bars, PCA scatter, cluster-tendency
tables)."""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import ClusterTendencyRow  # noqa: E402

FIG_DPI = 120


def write_table(rows: list[dict], path: str | Path, delimiter: str = "\t") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        if rows:
            writer = csv.DictWriter(f, fieldnames=list(rows[0]), delimiter=delimiter)
            writer.writeheader()
            writer.writerows(rows)
    return path


def read_loss_log(path: str | Path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Parse the step/term/value loss log into per-term (steps, values)."""
    series: dict[str, tuple[list, list]] = {}
    with open(path, encoding="utf-8") as f:
        next(f)  # header
        for line in f:
            parts = line.strip().split("\t")
            if len(parts) != 3:
                continue
            step, term, value = parts
            series.setdefault(term, ([], []))
            series[term][0].append(int(step))
            series[term][1].append(float(value))
    return {k: (np.asarray(s), np.asarray(v)) for k, (s, v) in series.items()}


def plot_loss_curves(log_path: str | Path, fig_path: str | Path) -> Path:
    series = read_loss_log(log_path)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for term in sorted(series):
        steps, values = series[term]
        ax.plot(steps, values, label=term, linewidth=1.2)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.legend(fontsize=7, ncol=2)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=FIG_DPI)
    plt.close(fig)
    return Path(fig_path)


def plot_entropy_bars(values: dict[str, float], upper_bounds: dict[str, float],
                      fig_path: str | Path) -> Path:
    """Mean posterior entropy per (code, classifier) pair with ln K markers."""
    names = list(values)
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(names)), 3.5))
    ax.bar(range(len(names)), [values[n] for n in names], color="#4878cf")
    for i, n in enumerate(names):
        if n in upper_bounds:
            ax.hlines(upper_bounds[n], i - 0.4, i + 0.4, color="k",
                      linestyle="--", linewidth=1)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("entropy (nats)")
    fig.tight_layout()
    fig.savefig(fig_path, dpi=FIG_DPI)
    plt.close(fig)
    return Path(fig_path)


def plot_pca_scatter(projection: np.ndarray, labels: np.ndarray, title: str,
                     fig_path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4.5))
    for lab in np.unique(labels):
        mask = labels == lab
        ax.scatter(projection[mask, 0], projection[mask, 1], s=8,
                   label=str(int(lab)), alpha=0.7)
    ax.set_xlabel("pc1")
    ax.set_ylabel("pc2")
    ax.set_title(title)
    ax.legend(fontsize=7, title="label", markerscale=1.5)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=FIG_DPI)
    plt.close(fig)
    return Path(fig_path)


def cluster_tendency_rows(rows: list[ClusterTendencyRow]) -> list[dict]:
    return [{
        "cluster": r.cluster_label,
        "n": r.n_points,
        "hopkins_pooled_mean": f"{r.pooled_mean:.4f}",
        "hopkins_pooled_std": f"{r.pooled_std:.4f}",
        "hopkins_per_label_mean": f"{r.per_label_mean:.4f}",
        "hopkins_per_label_std": f"{r.per_label_std:.4f}",
    } for r in rows]


def save_image_grid(images: list[np.ndarray], fig_path: str | Path,
                    titles: list[str] | None = None, cols: int = 8) -> Path:
    """Render [-1, 1] images side by side (interpolation strips, swaps)."""
    n = len(images)
    cols = min(cols, n)
    rows = (n + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(1.4 * cols, 1.5 * rows),
                             squeeze=False)
    for i in range(rows * cols):
        ax = axes[i // cols][i % cols]
        ax.axis("off")
        if i < n:
            ax.imshow(np.clip((images[i] + 1) / 2, 0, 1))
            if titles and i < len(titles):
                ax.set_title(titles[i], fontsize=7)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=FIG_DPI)
    plt.close(fig)
    return Path(fig_path)
