"""SVG figures: mAP vs minimum UE per method, and spatial variance by GT-IoU accuracy."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

HIGH_ACCURACY_IOU = 0.7
LOW_ACCURACY_IOU = 0.3

_SVG_META = {"Date": None, "Creator": "detmerge"}


def _label(row: Mapping) -> str:
    return " ".join(str(row[k]) for k in ("method", "affinity", "theta") if row.get(k) not in ("", None))


def _save(fig, path: Path) -> Path:
    with matplotlib.rc_context({"svg.hashsalt": "detmerge", "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def _pad(lo: float, hi: float) -> tuple[float, float]:
    span = hi - lo
    margin = 0.05 * span if span > 0 else 0.05 * max(abs(lo), 1.0)
    return lo - margin, hi + margin


def scatter_map_vs_ue(rows: Sequence[Mapping], path: Path, union: str = "all",
                      kind: str = "entropy") -> Path:
    pts = [(float(r["ue_min"]), float(r["map"]), _label(r)) for r in rows
           if r["dataset_regimes"] == union and r["uncertainty_kind"] == kind]
    pts = [p for p in pts if not (math.isnan(p[0]) or math.isnan(p[1]))]
    fig, ax = plt.subplots(figsize=(7, 5))
    for ue, mp, name in pts:
        ax.scatter(ue, mp, s=18)
        ax.annotate(name, (ue, mp), fontsize=5, xytext=(2, 2), textcoords="offset points")
    if pts:
        ax.set_xlim(*_pad(min(p[0] for p in pts), max(p[0] for p in pts)))
        ax.set_ylim(*_pad(min(p[1] for p in pts), max(p[1] for p in pts)))
    ax.set_xlabel("minimum uncertainty error")
    ax.set_ylabel("mAP")
    ax.set_title(f"mAP vs minimum UE ({union}, {kind})")
    return _save(fig, path)


def spatial_accuracy_plot(spatial: Sequence[Mapping], path: Path) -> Path:
    groups: dict[str, tuple[list[float], list[float]]] = {}
    for r in spatial:
        high, low = groups.setdefault(_label(r), ([], []))
        iou_value, var = float(r["gt_iou"]), float(r["total_variance"])
        if iou_value >= HIGH_ACCURACY_IOU:
            high.append(var)
        elif iou_value <= LOW_ACCURACY_IOU:
            low.append(var)
    names = sorted(groups)
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(names) + 2), 5))
    data, positions = [], []
    for i, name in enumerate(names):
        high, low = groups[name]
        for offset, values in ((-0.2, high), (0.2, low)):
            if values:
                data.append(values)
                positions.append(i + offset)
    if data:
        ax.boxplot(data, positions=positions, widths=0.3, showfliers=False)
        all_values = [v for vs in data for v in vs]
        ax.set_ylim(*_pad(min(all_values), max(all_values)))
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=90, fontsize=5)
    ax.set_xlim(-1, max(len(names), 1))
    ax.set_ylabel("total box variance (px^2)")
    ax.set_title(f"left: GT-IoU >= {HIGH_ACCURACY_IOU}, right: GT-IoU <= {LOW_ACCURACY_IOU}")
    fig.tight_layout()
    return _save(fig, path)


def emit_plots(rows: Sequence[Mapping], out_dir: str | Path,
               spatial: Optional[Sequence[Mapping]] = None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [scatter_map_vs_ue(rows, out / "map_vs_ue.svg")]
    if spatial:
        paths.append(spatial_accuracy_plot(spatial, out / "spatial_variance.svg"))
    return paths
