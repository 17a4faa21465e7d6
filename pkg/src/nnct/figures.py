"""File-based figure rendering for analyses and experiments.

Figures are drawn on standalone ``matplotlib.figure.Figure`` objects --
no pyplot, no global backend state -- so rendering works the same in
scripts, tests, and headless batch jobs. Every function writes PNG
files and returns the paths it wrote.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from .points import LabeledPointSet

__all__ = [
    "save_points_figure",
    "save_z_heatmap",
    "save_rate_curves",
    "render_analysis_figures",
    "render_experiment_figures",
]

_MARKERS = ("o", "s", "^", "v", "D", "P", "X", "*")


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_")


def save_points_figure(points: LabeledPointSet, path) -> Path:
    """Scatter plot of the point set, one marker style per class."""
    path = Path(path)
    fig = Figure(figsize=(6.0, 6.0))
    ax = fig.subplots()
    for k, name in enumerate(points.class_names):
        xy = points.coords[points.labels == k]
        ax.scatter(xy[:, 0], xy[:, 1], s=22,
                   marker=_MARKERS[k % len(_MARKERS)],
                   label=f"{name} (n={xy.shape[0]})", alpha=0.8)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel(f"x ({points.units})" if points.units else "x")
    ax.set_ylabel(f"y ({points.units})" if points.units else "y")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(f"{points.n} points, {len(points.class_names)} classes")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    return path


def save_z_heatmap(z, class_names, family: str, path) -> Path:
    """Diverging heatmap of one family's cell z scores."""
    path = Path(path)
    z = np.asarray(z, dtype=float)
    m = z.shape[0]
    span = max(3.0, float(np.nanmax(np.abs(z))))
    fig = Figure(figsize=(1.2 * m + 2.4, 1.2 * m + 1.8))
    ax = fig.subplots()
    image = ax.imshow(z, cmap="RdBu_r", vmin=-span, vmax=span)
    ax.set_xticks(range(m), labels=class_names, rotation=30, ha="right")
    ax.set_yticks(range(m), labels=class_names)
    ax.set_xlabel("class of nearest neighbor")
    ax.set_ylabel("class of point")
    for i in range(m):
        for j in range(m):
            ax.text(j, i, f"{z[i, j]:.2f}", ha="center", va="center",
                    fontsize=9,
                    color="white" if abs(z[i, j]) > 0.6 * span else "black")
    ax.set_title(f"family {family} cell z scores")
    fig.colorbar(image, ax=ax, shrink=0.85, label="z")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    return path


def save_rate_curves(rows, target: str, alpha: float, path,
                     size_mode: bool) -> Path:
    """Rejection-rate curves for one target across size combinations.

    ``rows`` are :class:`~nnct.experiments.ExperimentRow` objects for a
    single target, ordered as emitted (combinations x families). In size
    mode the binomial acceptance band is shaded.
    """
    path = Path(path)
    combos, families = [], []
    for r in rows:
        if r.sizes not in combos:
            combos.append(r.sizes)
        if r.family not in families:
            families.append(r.family)
    x = np.arange(len(combos))
    fig = Figure(figsize=(max(5.0, 1.0 + 0.9 * len(combos)), 4.2))
    ax = fig.subplots()
    for fi, fam in enumerate(families):
        y = np.full(len(combos), np.nan)
        for r in rows:
            if r.family == fam and r.reject_rate is not None:
                y[combos.index(r.sizes)] = r.reject_rate
        ax.plot(x, y, marker=_MARKERS[fi % len(_MARKERS)], label=f"family {fam}")
    if size_mode:
        lower = np.full(len(combos), np.nan)
        upper = np.full(len(combos), np.nan)
        for r in rows:
            if r.lower is not None:
                lower[combos.index(r.sizes)] = r.lower
                upper[combos.index(r.sizes)] = r.upper
        if np.isfinite(lower).any():
            ax.fill_between(x, lower, upper, color="0.8", alpha=0.5,
                            label="acceptance band")
    ax.axhline(alpha, color="0.3", linestyle=":", linewidth=1)
    ax.set_xticks(x, labels=[",".join(map(str, c)) for c in combos],
                  rotation=45, ha="right")
    ax.set_xlabel("class sizes")
    ax.set_ylabel("rejection rate")
    ax.set_ylim(bottom=0.0)
    ax.set_title(f"target {target}")
    ax.legend(fontsize=8)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    return path


def render_analysis_figures(points: LabeledPointSet, report: dict,
                            out_dir, stem: str = "analysis") -> list[Path]:
    """Scatter plot plus one z heatmap per family with cell results."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [save_points_figure(points, out_dir / f"{stem}_points.png")]
    names = report["input"]["class_names"]
    for family, block in report["families"].items():
        if "Z" not in block:
            continue
        paths.append(save_z_heatmap(
            block["Z"], names, family,
            out_dir / f"{stem}_z_{_slug(family)}.png"))
    return paths


def render_experiment_figures(result, out_dir,
                              stem: str = "experiment") -> list[Path]:
    """One rejection-rate figure per target of an experiment result."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    targets = []
    for r in result.rows:
        if r.target not in targets:
            targets.append(r.target)
    paths = []
    for target in targets:
        rows = [r for r in result.rows if r.target == target]
        paths.append(save_rate_curves(
            rows, target, result.spec.alpha,
            out_dir / f"{stem}_rates_{_slug(target)}.png",
            size_mode=result.spec.mode == "size"))
    return paths
