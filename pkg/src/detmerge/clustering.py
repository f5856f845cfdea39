"""Sequential clustering of detection samples: BSAS, exclusive BSAS, Hungarian."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

from .affinity import AffinityKind, Semantic, composite_affinity, kl_semantic, spatial_affinity
from .assignment import hungarian_solve
from .errors import MalformedInput
from .model import BoundingBox, Detection, SampleSet, canonical_order, winning_label

KL_THRESHOLD_OFFSET = 0.1


class Method(str, enum.Enum):
    BSAS = "BSAS"
    BSAS_EXCLUSIVE = "BSASExclusive"
    HUNGARIAN = "Hungarian"


@dataclass(frozen=True)
class ClusterConfig:
    method: Method = Method.BSAS
    affinity: AffinityKind = field(default_factory=AffinityKind)
    theta: float = 0.95
    hungarian_gate: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.theta <= 1.0):
            raise MalformedInput(f"theta must lie in (0, 1], got {self.theta}")

    @property
    def effective_threshold(self) -> float:
        if self.affinity.semantic is Semantic.KL:
            return self.theta - KL_THRESHOLD_OFFSET
        return self.theta

    @property
    def gate(self) -> float:
        return self.theta if self.hungarian_gate is None else self.hungarian_gate


class Cluster:
    """Detections grouped so far, with running-mean box and scores."""

    __slots__ = ("members", "sample_mask", "_box_sum", "_score_sum", "box", "scores")

    def __init__(self, first: Detection):
        self.members: list[Detection] = []
        self.sample_mask: set[int] = set()
        self._box_sum = [0.0, 0.0, 0.0, 0.0]
        self._score_sum = [0.0] * len(first.scores)
        self.add(first)

    def add(self, det: Detection) -> None:
        self.members.append(det)
        self.sample_mask.add(det.sample_index)
        for i, c in enumerate(det.box.as_tuple()):
            self._box_sum[i] += c
        for i, s in enumerate(det.scores):
            self._score_sum[i] += s
        n = len(self.members)
        self.box = BoundingBox(*(c / n for c in self._box_sum))
        self.scores = tuple(s / n for s in self._score_sum)

    @property
    def representative_box(self) -> BoundingBox:
        return self.box

    @property
    def representative_scores(self) -> tuple[float, ...]:
        return self.scores

    @property
    def winning_label(self) -> int:
        return winning_label(self.scores)

    def __len__(self) -> int:
        return len(self.members)

    def __repr__(self) -> str:
        return f"Cluster(n={len(self.members)}, box={self.box.as_tuple()})"


def _ordered(sample_set: SampleSet) -> list[Detection]:
    return canonical_order(sample_set.detections())


def bsas(sample_set: SampleSet, config: ClusterConfig) -> list[Cluster]:
    """Single pass: join the best-affinity cluster if it reaches the threshold, else open one."""
    return _bsas(_ordered(sample_set), config, exclusive=False)


def bsas_exclusive(sample_set: SampleSet, config: ClusterConfig) -> list[Cluster]:
    """BSAS where a cluster already holding a detection from the same sample is off limits.

    With a KL modifier the spatial threshold gates eligibility and the detection
    joins the eligible cluster of smallest KL cost.
    """
    return _bsas(_ordered(sample_set), config, exclusive=True)


def _bsas(detections: list[Detection], config: ClusterConfig, exclusive: bool) -> list[Cluster]:
    kind = config.affinity
    min_kl_mode = exclusive and kind.semantic is Semantic.KL
    threshold = config.theta if min_kl_mode else config.effective_threshold
    clusters: list[Cluster] = []
    for det in detections:
        best_idx = -1
        best_val = -math.inf
        for idx, cl in enumerate(clusters):
            if exclusive and det.sample_index in cl.sample_mask:
                continue
            if min_kl_mode:
                if spatial_affinity(kind, det.box, cl.box) < threshold:
                    continue
                value = -kl_semantic(det.scores, cl.scores)
            else:
                value = composite_affinity(kind, det, cl)
                if value < threshold:
                    continue
            if value > best_val:
                best_val = value
                best_idx = idx
        if best_idx >= 0:
            clusters[best_idx].add(det)
        else:
            clusters.append(Cluster(det))
    return clusters


def hungarian_cluster(sample_set: SampleSet, config: ClusterConfig) -> list[Cluster]:
    """Sample-by-sample optimal assignment of detections to existing clusters.

    Matched pairs whose spatial affinity falls below the gate, and pairs that
    could only be matched at infinite cost, open new clusters instead.
    """
    kind = config.affinity
    gate = config.gate
    by_sample: dict[int, list[Detection]] = {}
    for det in _ordered(sample_set):
        by_sample.setdefault(det.sample_index, []).append(det)
    clusters: list[Cluster] = []
    for sample_index in sorted(by_sample):
        dets = by_sample[sample_index]
        if not clusters:
            clusters.extend(Cluster(d) for d in dets)
            continue
        spatial = [[spatial_affinity(kind, d.box, c.box) for c in clusters] for d in dets]
        cost = []
        for r, d in enumerate(dets):
            row = []
            for c_idx, cl in enumerate(clusters):
                value = -spatial[r][c_idx]
                if kind.semantic is Semantic.SAME_LABEL and d.winning_label != cl.winning_label:
                    value = math.inf
                elif kind.semantic is Semantic.KL:
                    value += kl_semantic(d.scores, cl.scores)
                row.append(value)
            cost.append(row)
        matched = set()
        assignments = []
        for r, c in hungarian_solve(cost):
            if spatial[r][c] >= gate:
                assignments.append((r, c))
                matched.add(r)
        for r, c in assignments:
            clusters[c].add(dets[r])
        clusters.extend(Cluster(dets[r]) for r in range(len(dets)) if r not in matched)
    return clusters


def cluster_sample_set(sample_set: SampleSet, config: ClusterConfig) -> list[Cluster]:
    if config.method is Method.BSAS:
        return bsas(sample_set, config)
    if config.method is Method.BSAS_EXCLUSIVE:
        return bsas_exclusive(sample_set, config)
    return hungarian_cluster(sample_set, config)
