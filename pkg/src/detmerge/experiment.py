"""Affinity/clustering grid evaluation over a corpus, one report row per
(grid cell, regime union, uncertainty kind)."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .affinity import AffinityKind
from .clustering import ClusterConfig, Method, cluster_sample_set
from .errors import EmptyClass, EmptyCorpus, MalformedInput
from .hdbscan import Embedding, HdbscanConfig, hdbscan_cluster
from .metrics import (Correctness, EvalRecord, GroundTruthObject, aupr, auroc, label_correctness,
                      mean_average_precision, min_uncertainty_error)
from .model import Observation, Regime, SampleSet
from .observation import UncertaintyKind, form_observations, passthrough_observations, uncertainty_of

log = logging.getLogger(__name__)

PAPER_THETAS = (0.7, 0.8, 0.9, 0.95)
BSAS_AFFINITIES = ("IoU", "IoU+SL", "IoU+KL")
HUNGARIAN_AFFINITIES = ("IoU", "IoU+SL", "IoU+KL", "PAC", "PAC+SL", "PAC+KL", "EAC", "EAC+SL", "EAC+KL")
HUNGARIAN_DEFAULT_GATE = 0.5

STANDARD = "Standard"
BSAS_BASELINE = "BSAS-baseline"
HDBSCAN = "HDBSCAN"

REGIME_UNIONS: tuple[tuple[str, frozenset[Regime]], ...] = (
    ("closed", frozenset({Regime.CLOSED})),
    ("closed+distant", frozenset({Regime.CLOSED, Regime.DISTANT})),
    ("closed+near", frozenset({Regime.CLOSED, Regime.NEAR})),
    ("all", frozenset({Regime.CLOSED, Regime.NEAR, Regime.DISTANT})),
)


@dataclass(frozen=True)
class GridCell:
    method: str
    affinity: str = ""
    theta: Optional[float] = None
    min_cluster_size: Optional[int] = None
    min_samples: Optional[int] = None

    def __post_init__(self):
        valid = {m.value for m in Method} | {STANDARD, BSAS_BASELINE, HDBSCAN}
        if self.method not in valid:
            raise MalformedInput(f"unknown method {self.method!r}")
        if self.method == HDBSCAN:
            Embedding(self.affinity)
        elif self.method != STANDARD:
            AffinityKind.parse(self.affinity)

    @property
    def theta_text(self) -> str:
        return "" if self.theta is None else f"{self.theta:g}"

    @property
    def label(self) -> str:
        return " ".join(p for p in (self.method, self.affinity, self.theta_text) if p)

    def cluster_config(self) -> ClusterConfig:
        method = Method.BSAS if self.method == BSAS_BASELINE else Method(self.method)
        theta = self.theta if self.theta is not None else HUNGARIAN_DEFAULT_GATE
        return ClusterConfig(method, AffinityKind.parse(self.affinity), theta)

    def hdbscan_config(self, n_samples: int) -> HdbscanConfig:
        base = HdbscanConfig.default_for(n_samples)
        return HdbscanConfig(self.min_cluster_size or base.min_cluster_size,
                             self.min_samples or base.min_samples)

    def observations(self, sample_set: SampleSet) -> list[Observation]:
        if self.method == STANDARD:
            # The un-sampled detector is emulated by the first stochastic pass.
            return passthrough_observations(sample_set.first_sample())
        if self.method == HDBSCAN:
            clusters = hdbscan_cluster(sample_set, self.affinity, self.hdbscan_config(sample_set.n_samples))
        else:
            clusters = cluster_sample_set(sample_set, self.cluster_config())
        return form_observations(clusters, sample_set.image_id)

    def to_json(self) -> dict:
        out: dict = {"method": self.method, "affinity": self.affinity}
        if self.theta is not None:
            out["theta"] = self.theta
        if self.min_cluster_size is not None:
            out["min_cluster_size"] = self.min_cluster_size
        if self.min_samples is not None:
            out["min_samples"] = self.min_samples
        return out


def paper_default_grid() -> list[GridCell]:
    cells = [GridCell(STANDARD, "none"), GridCell(BSAS_BASELINE, "IoU", 0.95)]
    for method in (Method.BSAS.value, Method.BSAS_EXCLUSIVE.value):
        for theta in PAPER_THETAS:
            cells.extend(GridCell(method, aff, theta) for aff in BSAS_AFFINITIES)
    cells.extend(GridCell(Method.HUNGARIAN.value, aff, HUNGARIAN_DEFAULT_GATE) for aff in HUNGARIAN_AFFINITIES)
    cells.extend(GridCell(HDBSCAN, e.value) for e in Embedding)
    return cells


def load_grid(spec: str) -> list[GridCell]:
    """``paper-default`` or a JSON file holding a list of cell objects."""
    if spec == "paper-default":
        return paper_default_grid()
    try:
        doc = json.loads(Path(spec).read_text(encoding="utf-8"))
        cells = [GridCell(c["method"], c.get("affinity", ""), c.get("theta"),
                          c.get("min_cluster_size"), c.get("min_samples")) for c in doc]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, MalformedInput):
            raise
        raise MalformedInput(f"{spec}: bad grid file ({exc!r})") from None
    if not cells:
        raise MalformedInput(f"{spec}: empty grid")
    return cells


@dataclass
class CellResult:
    cell: GridCell
    rows: list[dict] = field(default_factory=list)
    spatial: list[dict] = field(default_factory=list)
    error: Optional[str] = None


def _nan_guard(fn, *args) -> float:
    try:
        return fn(*args)
    except EmptyClass:
        return math.nan


def summarize(records: Sequence[EvalRecord], observations: Sequence[Observation],
              gts: Sequence[GroundTruthObject]) -> dict:
    """Metric columns for one regime union and one uncertainty kind."""
    counts = {c: 0 for c in Correctness}
    for r in records:
        counts[r.correctness] += 1
    usable = [r for r in records if not math.isnan(r.uncertainty)]
    correct = [r.uncertainty for r in usable if r.is_correct]
    incorrect = [r.uncertainty for r in usable if not r.is_correct]
    split = (correct, incorrect)
    ue_min, delta_star = math.nan, math.nan
    if correct and incorrect:
        ue_min, delta_star = min_uncertainty_error(split)
    if math.isnan(delta_star):
        accepted = list(observations)
    else:
        accepted = [r.observation for r in usable if r.uncertainty <= delta_star]
    return {
        "map": mean_average_precision(accepted, gts),
        "ue_min": ue_min,
        "delta_star": delta_star,
        "auroc": _nan_guard(auroc, split),
        "aupr_in": _nan_guard(aupr, split, "in"),
        "aupr_out": _nan_guard(aupr, split, "out"),
        "n_correct": counts[Correctness.CORRECT],
        "n_closed_err": counts[Correctness.CLOSED_SET_ERROR],
        "n_open_err": counts[Correctness.OPEN_SET_ERROR],
    }


def evaluate_cell(cell: GridCell, sample_sets: Sequence[SampleSet],
                  gts: Sequence[GroundTruthObject],
                  kinds: Sequence[UncertaintyKind] = (UncertaintyKind.ENTROPY, UncertaintyKind.SPATIAL),
                  collect_spatial: bool = True) -> CellResult:
    result = CellResult(cell)
    kinds = [UncertaintyKind(k) for k in kinds]
    gts_by_image: dict[str, list[GroundTruthObject]] = {}
    for gt in gts:
        gts_by_image.setdefault(gt.image_id, []).append(gt)
    per_image = [(s, cell.observations(s)) for s in sample_sets]
    for kind in kinds:
        records: list[EvalRecord] = []
        for s, obs in per_image:
            us = [uncertainty_of(o, kind) for o in obs]
            records.extend(label_correctness(obs, gts_by_image.get(s.image_id, []), s.regime, us))
        for union_name, regimes in REGIME_UNIONS:
            recs = [r for r in records if r.regime in regimes]
            obs = [r.observation for r in recs]
            union_gts = [g for s in sample_sets if s.regime in regimes for g in gts_by_image.get(s.image_id, [])]
            row = {"method": cell.method, "affinity": cell.affinity, "theta": cell.theta_text,
                   "dataset_regimes": union_name, "uncertainty_kind": kind.value}
            row.update(summarize(recs, obs, union_gts))
            result.rows.append(row)
        if collect_spatial and kind is UncertaintyKind.SPATIAL:
            for r in records:
                if not math.isnan(r.uncertainty):
                    result.spatial.append({
                        "method": cell.method, "affinity": cell.affinity, "theta": cell.theta_text,
                        "image_id": r.observation.image_id, "regime": r.regime.value,
                        "gt_iou": r.gt_iou, "total_variance": r.uncertainty,
                    })
    return result


_WORKER_DATA: dict = {}


def _init_worker(sample_sets, gts, kinds):
    _WORKER_DATA.update(sample_sets=sample_sets, gts=gts, kinds=kinds)


def _safe_evaluate(cell: GridCell, sample_sets, gts, kinds) -> CellResult:
    try:
        return evaluate_cell(cell, sample_sets, gts, kinds)
    except Exception as exc:  # one bad cell must not abort the grid
        log.warning("grid cell %s failed: %s", cell.label, exc)
        return CellResult(cell, error=f"{type(exc).__name__}: {exc}")


def _worker(cell: GridCell) -> CellResult:
    d = _WORKER_DATA
    return _safe_evaluate(cell, d["sample_sets"], d["gts"], d["kinds"])


def run_grid(sample_sets: Sequence[SampleSet], gts: Sequence[GroundTruthObject],
             cells: Sequence[GridCell],
             kinds: Iterable[UncertaintyKind | str] = ("entropy", "spatial"),
             jobs: int = 1) -> list[CellResult]:
    """Evaluate every cell; results come back in cell order regardless of ``jobs``."""
    if not sample_sets:
        raise EmptyCorpus("corpus has no images")
    kinds = tuple(UncertaintyKind(k) for k in kinds)
    if jobs <= 1 or len(cells) <= 1:
        return [_safe_evaluate(c, sample_sets, gts, kinds) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                             initargs=(list(sample_sets), list(gts), kinds)) as pool:
        return list(pool.map(_worker, cells))
