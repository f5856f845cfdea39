"""Pairwise spatial and semantic affinities between detections.

Every spatial measure lives in [0, 1] and equals 1 exactly for identical
boxes, so the clustering code can swap them freely.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .errors import DegenerateDistribution, MalformedInput
from .model import BoundingBox, winning_label

EPS = 1e-10
DEFAULT_LAMBDA_MOTION = 0.5
DEFAULT_LAMBDA_SHAPE = 1.5


class Spatial(str, enum.Enum):
    IOU = "IoU"
    PAC = "PAC"
    EAC = "EAC"


class Semantic(str, enum.Enum):
    NONE = "none"
    SAME_LABEL = "SL"
    KL = "KL"


@dataclass(frozen=True)
class AffinityKind:
    spatial: Spatial = Spatial.IOU
    semantic: Semantic = Semantic.NONE
    lambda_motion: float = DEFAULT_LAMBDA_MOTION
    lambda_shape: float = DEFAULT_LAMBDA_SHAPE

    def __post_init__(self):
        if not (self.lambda_motion > 0 and self.lambda_shape > 0):
            raise MalformedInput("affinity weights must be positive")

    @property
    def name(self) -> str:
        if self.semantic is Semantic.NONE:
            return self.spatial.value
        return f"{self.spatial.value}+{self.semantic.value}"

    @classmethod
    def parse(cls, text: str) -> AffinityKind:
        """Parse names like ``IoU``, ``IoU+SL``, ``EAC+KL`` (also ``&`` as separator)."""
        parts = [p.strip() for p in text.replace("&", "+").split("+") if p.strip()]
        if not parts or len(parts) > 2:
            raise MalformedInput(f"bad affinity {text!r}")
        spatial_names = {"iou": Spatial.IOU, "pac": Spatial.PAC, "product": Spatial.PAC,
                         "eac": Spatial.EAC, "exponential": Spatial.EAC}
        semantic_names = {"sl": Semantic.SAME_LABEL, "kl": Semantic.KL, "none": Semantic.NONE}
        try:
            spatial = spatial_names[parts[0].lower()]
            semantic = semantic_names[parts[1].lower()] if len(parts) == 2 else Semantic.NONE
        except KeyError:
            raise MalformedInput(f"bad affinity {text!r}") from None
        return cls(spatial, semantic)


class HasBoxAndScores(Protocol):
    box: BoundingBox
    scores: Sequence[float]


def iou(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return min(1.0, inter / union)


def _motion_shape(a: BoundingBox, b: BoundingBox) -> tuple[float, float]:
    wa, ha, wb, hb = a.width, a.height, b.width, b.height
    cxa, cya = a.center
    cxb, cyb = b.center
    mean_w = (wa + wb) / 2.0
    mean_h = (ha + hb) / 2.0
    motion = ((cxa - cxb) / mean_w) ** 2 + ((cya - cyb) / mean_h) ** 2
    shape = abs(wa - wb) / (wa + wb) + abs(ha - hb) / (ha + hb)
    return motion, shape


def eac(a: BoundingBox, b: BoundingBox,
        lambda_motion: float = DEFAULT_LAMBDA_MOTION,
        lambda_shape: float = DEFAULT_LAMBDA_SHAPE) -> float:
    motion, shape = _motion_shape(a, b)
    return math.exp(-(lambda_motion * motion + lambda_shape * shape))


def pac(a: BoundingBox, b: BoundingBox, lambda_shape: float = DEFAULT_LAMBDA_SHAPE) -> float:
    motion, shape = _motion_shape(a, b)
    return (1.0 / (1.0 + motion)) * math.exp(-lambda_shape * shape)


def spatial_affinity(kind: AffinityKind, a: BoundingBox, b: BoundingBox) -> float:
    if kind.spatial is Spatial.IOU:
        return iou(a, b)
    if kind.spatial is Spatial.PAC:
        return pac(a, b, kind.lambda_shape)
    return eac(a, b, kind.lambda_motion, kind.lambda_shape)


def same_label(a: HasBoxAndScores, b: HasBoxAndScores) -> bool:
    return winning_label(a.scores) == winning_label(b.scores)


def _normalized(p: Sequence[float]) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    total = arr.sum()
    if not total > 0:
        raise DegenerateDistribution("score vector sums to zero")
    return np.maximum(arr / total, EPS)


def kl_directed(p: Sequence[float], q: Sequence[float]) -> float:
    """KL(p||q) on renormalized, epsilon-floored inputs."""
    ph, qh = _normalized(p), _normalized(q)
    return float(np.sum(ph * np.log(ph / qh)))


def kl_semantic(p: Sequence[float], q: Sequence[float]) -> float:
    """Symmetrized KL divergence; symmetric by construction, zero for proportional inputs."""
    if len(p) != len(q):
        raise MalformedInput("score vectors differ in length")
    ph, qh = _normalized(p), _normalized(q)
    # (p - q)(log p - log q) is bitwise symmetric under swapping p and q.
    value = 0.5 * float(np.sum((ph - qh) * (np.log(ph) - np.log(qh))))
    return max(value, 0.0)


def composite_affinity(kind: AffinityKind, a: HasBoxAndScores, b: HasBoxAndScores) -> float:
    """Spatial affinity adjusted by the semantic modifier; -inf marks a label mismatch."""
    value = spatial_affinity(kind, a.box, b.box)
    if kind.semantic is Semantic.SAME_LABEL:
        return value if same_label(a, b) else -math.inf
    if kind.semantic is Semantic.KL:
        return value - kl_semantic(a.scores, b.scores)
    return value
