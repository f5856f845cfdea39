"""Observation formation, uncertainty extraction and the accept/reject rule."""

from __future__ import annotations

import enum
import math
from typing import Iterable, Sequence

import numpy as np

from .affinity import EPS
from .clustering import Cluster
from .errors import DegenerateDistribution, InsufficientMembers, NotSingleSample
from .model import BoundingBox, Detection, Observation, SampleSet, winning_label

MIN_MEMBERS = 2


class UncertaintyKind(str, enum.Enum):
    ENTROPY = "entropy"
    SPATIAL = "spatial"


def entropy(scores: Sequence[float]) -> float:
    """Shannon entropy in nats of the renormalized foreground distribution."""
    p = np.asarray(scores, dtype=float)
    total = p.sum()
    if not total > 0:
        raise DegenerateDistribution("score vector sums to zero")
    p = p / total
    h = -float(np.sum(p * np.log(np.maximum(p, EPS))))
    return max(h, 0.0)


def _boxes(members: Iterable[Detection]) -> np.ndarray:
    return np.array([d.box.as_tuple() for d in members], dtype=float)


def spatial_variance(cluster: Cluster | Sequence[Detection]) -> tuple[float, float, float]:
    """Population variance of member box coordinates: (x1+x2 part, y1+y2 part, total)."""
    members = cluster.members if isinstance(cluster, Cluster) else list(cluster)
    if len(members) < MIN_MEMBERS:
        raise InsufficientMembers(f"need at least {MIN_MEMBERS} members, got {len(members)}")
    boxes = _boxes(members)
    # Shifting by the first box keeps identical boxes at exactly zero variance.
    var = (boxes - boxes[0]).var(axis=0)
    var_x = float(var[0] + var[2])
    var_y = float(var[1] + var[3])
    return var_x, var_y, var_x + var_y


def _observation(members: Sequence[Detection], image_id: str) -> Observation:
    boxes = _boxes(members)
    mean_box = BoundingBox(*(float(c) for c in boxes.mean(axis=0)))
    scores = tuple(float(s) for s in np.mean([d.scores for d in members], axis=0))
    label = winning_label(scores)
    return Observation(
        box=mean_box,
        scores=scores,
        member_count=len(members),
        entropy=entropy(scores),
        spatial_variance=spatial_variance(members)[2],
        winning_label=label,
        winning_score=scores[label],
        image_id=image_id,
    )


def form_observations(clusters: Sequence[Cluster], image_id: str = "") -> list[Observation]:
    """Average every cluster with at least two members; singletons are dropped."""
    return [_observation(c.members, image_id) for c in clusters if len(c) >= MIN_MEMBERS]


def passthrough_observations(sample_set: SampleSet) -> list[Observation]:
    """Baseline path for a single un-sampled forward pass: one observation per detection."""
    if sample_set.n_samples != 1:
        raise NotSingleSample(f"expected 1 sample, got {sample_set.n_samples}")
    out = []
    for det in sample_set.samples[0]:
        label = det.winning_label
        out.append(Observation(
            box=det.box,
            scores=det.scores,
            member_count=1,
            entropy=entropy(det.scores),
            spatial_variance=None,
            winning_label=label,
            winning_score=det.scores[label],
            image_id=sample_set.image_id,
        ))
    return out


def uncertainty_of(obs: Observation, kind: UncertaintyKind | str) -> float:
    """Uncertainty value of an observation; NaN when spatial variance is unavailable."""
    kind = UncertaintyKind(kind)
    if kind is UncertaintyKind.ENTROPY:
        return obs.entropy
    return math.nan if obs.spatial_variance is None else obs.spatial_variance


def accept_reject(observations: Sequence[Observation], kind: UncertaintyKind | str,
                  delta: float) -> tuple[list[Observation], list[Observation]]:
    """Accept when uncertainty <= delta, reject otherwise."""
    accepted, rejected = [], []
    for obs in observations:
        (accepted if uncertainty_of(obs, kind) <= delta else rejected).append(obs)
    return accepted, rejected
