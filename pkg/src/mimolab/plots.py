"""Headless SVG figures; every figure gets a twin CSV with the same stem."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _twin_csv(svg_path: Path, rows: list[dict], columns: list[str]):
    with open(svg_path.with_suffix(".csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c, "") for c in columns})


def bar_chart(path, labels, series: dict[str, list], ylabel: str, title: str = ""):
    """Grouped bars: one group per label, one bar per series entry."""
    path = Path(path)
    n_groups = len(labels)
    n_series = max(1, len(series))
    width = 0.8 / n_series
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * n_groups), 4))
    x = np.arange(n_groups)
    rows = []
    for i, (name, values) in enumerate(series.items()):
        ax.bar(x + (i - (n_series - 1) / 2) * width, values, width, label=name)
        for lbl, v in zip(labels, values):
            rows.append({"group": lbl, "series": name, "value": v})
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    _twin_csv(path, rows, ["group", "series", "value"])


def cdf_plot(path, samples: dict[str, list], xlabel: str, title: str = ""):
    """Empirical CDF per series (non-decreasing, 0 to 1)."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    rows = []
    for name, values in samples.items():
        v = np.sort(np.asarray(values, dtype=float))
        if v.size == 0:
            continue
        y = np.arange(1, v.size + 1) / v.size
        ax.step(v, y, where="post", label=name)
        for xi, yi in zip(v, y):
            rows.append({"series": name, "x": xi, "cdf": yi})
    ax.set_xlabel(xlabel)
    ax.set_ylabel("CDF")
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    _twin_csv(path, rows, ["series", "x", "cdf"])


def line_plot(path, x, series: dict[str, list], xlabel: str, ylabel: str,
              title: str = ""):
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    rows = []
    for name, values in series.items():
        ax.plot(x, values, marker="o", label=name)
        for xi, yi in zip(x, values):
            rows.append({"series": name, "x": xi, "y": yi})
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    _twin_csv(path, rows, ["series", "x", "y"])
