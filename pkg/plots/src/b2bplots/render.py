"""Violin and marginal-value figures from b2bvalue result CSVs.

Input is the per-scenario CSV (``set,subset,rep,system,r_ec,...``, usually
the collated ``all_scenarios__cap*.csv``) or the marginal CSV
(``...,capacity_kw,mean_value,delta``). Rendering is read-only and uses a
fixed style, so identical input produces an identical figure.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

RATE_METRICS = ("r_ec", "r_ees", "r_pes", "r_deep")

_METRIC_LABELS = {
    "r_ec": "curtailment reduction rate",
    "r_ees": "storage capacity reduction rate",
    "r_pes": "storage power rating reduction rate",
    "r_deep": "deep-cycle reduction rate",
}

_SET_COLORS = plt.get_cmap("tab10").colors


class RenderError(Exception):
    """Input CSV cannot be rendered (missing columns, too few points)."""


@dataclass(frozen=True)
class FigureSpec:
    """What to render and where to put it."""

    out_dir: Path
    metrics: tuple[str, ...] = RATE_METRICS
    image_format: str = "png"
    system: int = 1
    dpi: int = 150

    def __post_init__(self):
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        if self.image_format not in ("png", "svg"):
            raise RenderError(f"unsupported format {self.image_format!r}")
        if self.system not in (1, 2):
            raise RenderError("system must be 1 or 2")


@dataclass(frozen=True)
class GroupStats:
    label: str
    n: int
    mean: float
    median: float


@dataclass(frozen=True)
class RenderedFigure:
    path: Path
    groups: tuple[GroupStats, ...] = field(default_factory=tuple)


def _save(fig, path: Path, spec: FigureSpec) -> None:
    kwargs = {"dpi": spec.dpi}
    if spec.image_format == "svg":
        kwargs["metadata"] = {"Date": None}  # keep SVG output byte-stable
    fig.savefig(path, format=spec.image_format, **kwargs)
    plt.close(fig)


def _require_columns(frame: pd.DataFrame, columns, path) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise RenderError(f"{path}: missing column(s) {missing}")


def render_violins(per_scenario_csv, spec: FigureSpec) -> dict[str, RenderedFigure]:
    """One violin per (set, subset) group; one image per metric.

    The left half of each violin is the kernel-density estimate of the
    group's defined values; the right half mirrors it. Mean and median are
    marked. Groups whose values are all undefined are skipped with a
    warning; a constant-valued group degenerates to a flat bar.
    """
    per_scenario_csv = Path(per_scenario_csv)
    frame = pd.read_csv(per_scenario_csv)
    _require_columns(frame, ("set", "subset", "system"), per_scenario_csv)
    for metric in spec.metrics:
        _require_columns(frame, (metric,), per_scenario_csv)
    frame = frame[frame["system"] == spec.system]

    group_keys: list[tuple[str, str]] = []
    for key in zip(frame["set"].astype(str), frame["subset"].astype(str)):
        if key not in group_keys:
            group_keys.append(key)
    set_order = list(dict.fromkeys(k[0] for k in group_keys))

    spec.out_dir.mkdir(parents=True, exist_ok=True)
    rendered: dict[str, RenderedFigure] = {}
    for metric in spec.metrics:
        groups: list[tuple[str, str, np.ndarray]] = []
        for set_id, subset in group_keys:
            mask = (frame["set"].astype(str) == set_id) & (frame["subset"].astype(str) == subset)
            values = frame.loc[mask, metric].dropna().to_numpy(dtype=float)
            if values.size == 0:
                warnings.warn(f"{metric}: group {set_id}/{subset} has no defined values; skipped")
                continue
            groups.append((set_id, subset, values))
        if not groups:
            warnings.warn(f"{metric}: nothing to plot")
            continue

        fig, ax = plt.subplots(figsize=(max(6.0, 1.1 * len(groups) + 2.0), 4.5))
        stats: list[GroupStats] = []
        for pos, (set_id, subset, values) in enumerate(groups, start=1):
            color = _SET_COLORS[set_order.index(set_id) % len(_SET_COLORS)]
            if np.ptp(values) > 0.0:
                parts = ax.violinplot([values], positions=[pos], widths=0.8,
                                      showextrema=False)
                for body in parts["bodies"]:
                    body.set_facecolor(color)
                    body.set_alpha(0.6)
            else:
                # degenerate group: a flat bar instead of a density estimate
                ax.hlines(values[0], pos - 0.3, pos + 0.3, color=color, linewidth=6.0,
                          alpha=0.6)
            mean = float(np.mean(values))
            median = float(np.median(values))
            ax.hlines(mean, pos - 0.2, pos + 0.2, color="black", linewidth=1.4)
            ax.plot([pos], [median], marker="o", color="white",
                    markeredgecolor="black", markersize=4.5, zorder=3)
            stats.append(GroupStats(f"{set_id}/{subset}", int(values.size), mean, median))

        ax.set_xticks(range(1, len(groups) + 1))
        ax.set_xticklabels([s.label for s in stats], rotation=45, ha="right")
        ax.set_ylabel(_METRIC_LABELS.get(metric, metric))
        ax.set_title(f"{_METRIC_LABELS.get(metric, metric)} — system {spec.system}")
        ax.grid(axis="y", alpha=0.3)
        fig.tight_layout()
        path = spec.out_dir / f"violin_{metric}_sys{spec.system}.{spec.image_format}"
        _save(fig, path, spec)
        rendered[metric] = RenderedFigure(path, tuple(stats))
    return rendered


def render_marginal(marginal_csv, spec: FigureSpec) -> dict[str, RenderedFigure]:
    """Mean metric value vs converter capacity, one image per set."""
    marginal_csv = Path(marginal_csv)
    frame = pd.read_csv(marginal_csv)
    _require_columns(frame, ("capacity_kw", "mean_value", "delta"), marginal_csv)
    if "set" not in frame.columns:
        frame = frame.assign(set="all")
    if "system" not in frame.columns:
        frame = frame.assign(system=1)

    spec.out_dir.mkdir(parents=True, exist_ok=True)
    rendered: dict[str, RenderedFigure] = {}
    for set_id in dict.fromkeys(frame["set"].astype(str)):
        sub = frame[frame["set"].astype(str) == set_id]
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        plotted = 0
        for system in sorted(dict.fromkeys(sub["system"])):
            series = sub[sub["system"] == system].sort_values("capacity_kw")
            if len(series) < 2:
                plt.close(fig)
                raise RenderError(
                    f"{marginal_csv}: set {set_id} system {system} has fewer than "
                    "2 capacity points")
            ax.plot(series["capacity_kw"], series["mean_value"], marker="o",
                    label=f"system {int(system)}")
            plotted += len(series)
        metric = str(sub["metric"].iloc[0]) if "metric" in sub.columns else "metric"
        ax.set_xlabel("converter capacity (kW)")
        ax.set_ylabel(f"mean {_METRIC_LABELS.get(metric, metric)}")
        ax.set_title(f"marginal value — set {set_id}")
        ax.legend()
        ax.grid(alpha=0.3)
        fig.tight_layout()
        path = spec.out_dir / f"marginal_{set_id}.{spec.image_format}"
        _save(fig, path, spec)
        rendered[set_id] = RenderedFigure(path, (GroupStats(set_id, plotted,
                                                            float("nan"), float("nan")),))
    return rendered
