"""Shared data types: boxes, detections, per-image sample sets and observations."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .errors import MalformedInput, UnknownRegime

SCORE_SUM_TOL = 1e-6

# Softmax vector over the m known classes; background mass is implicit (1 - sum).
ScoreDistribution = tuple[float, ...]


class Regime(str, enum.Enum):
    CLOSED = "closed"
    NEAR = "near"
    DISTANT = "distant"

    @classmethod
    def parse(cls, value: str | Regime) -> Regime:
        if isinstance(value, Regime):
            return value
        aliases = {
            "closed": cls.CLOSED, "closedset": cls.CLOSED,
            "near": cls.NEAR, "nearopenset": cls.NEAR,
            "distant": cls.DISTANT, "distantopenset": cls.DISTANT,
        }
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        try:
            return aliases[key]
        except KeyError:
            raise UnknownRegime(f"unknown regime {value!r}") from None

    @property
    def is_open_set(self) -> bool:
        return self is not Regime.CLOSED


@dataclass(frozen=True)
class BoundingBox:
    x1: float
    y1: float
    x2: float
    y2: float

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    def is_finite(self) -> bool:
        return all(math.isfinite(c) for c in self.as_tuple())

    def is_valid(self) -> bool:
        return self.is_finite() and self.x1 < self.x2 and self.y1 < self.y2

    def clamp(self, width: float, height: float) -> BoundingBox:
        return BoundingBox(
            min(max(self.x1, 0.0), width),
            min(max(self.y1, 0.0), height),
            min(max(self.x2, 0.0), width),
            min(max(self.y2, 0.0), height),
        )


def winning_label(scores: Sequence[float]) -> int:
    """Index of the highest score; ties go to the lowest class index."""
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return best


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    scores: ScoreDistribution
    sample_index: int = 0

    @property
    def winning_label(self) -> int:
        return winning_label(self.scores)

    @property
    def winning_score(self) -> float:
        return self.scores[self.winning_label]

    @property
    def num_classes(self) -> int:
        return len(self.scores)


@dataclass(frozen=True)
class SampleSet:
    """All stochastic forward passes for one image."""

    image_id: str
    image_width: float
    image_height: float
    samples: tuple[tuple[Detection, ...], ...]
    regime: Regime = Regime.CLOSED

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    def detections(self) -> list[Detection]:
        return [d for sample in self.samples for d in sample]

    @property
    def num_classes(self) -> Optional[int]:
        for sample in self.samples:
            for det in sample:
                return det.num_classes
        return None

    def first_sample(self) -> SampleSet:
        return replace(self, samples=self.samples[:1])


@dataclass(frozen=True)
class Observation:
    box: BoundingBox
    scores: ScoreDistribution
    member_count: int
    entropy: float
    spatial_variance: Optional[float]
    winning_label: int
    winning_score: float
    image_id: str = ""


def _order_key(det: Detection):
    return (det.sample_index, -det.winning_score, det.box.as_tuple())


def canonical_order(detections: Sequence[Detection]) -> list[Detection]:
    """Stable sort by sample index, then descending winning score, then box coordinates."""
    return sorted(detections, key=_order_key)


def _check_scores(scores: Sequence[float]) -> bool:
    if not scores:
        return False
    total = 0.0
    for s in scores:
        if not math.isfinite(s) or s < 0.0 or s > 1.0:
            return False
        total += s
    return total <= 1.0 + SCORE_SUM_TOL and max(scores) > 0.0


def validate_sample_set(raw: SampleSet) -> SampleSet:
    """Clamp boxes to the image, drop degenerate boxes and invalid score vectors.

    Raises MalformedInput for non-positive image dimensions, an empty sample
    list, or inconsistent class counts.
    """
    w, h = raw.image_width, raw.image_height
    if not (math.isfinite(w) and math.isfinite(h)) or w <= 0 or h <= 0:
        raise MalformedInput(f"image {raw.image_id!r}: non-positive dimensions {w}x{h}")
    if len(raw.samples) < 1:
        raise MalformedInput(f"image {raw.image_id!r}: no samples")
    m = None
    for sample in raw.samples:
        for det in sample:
            if m is None:
                m = len(det.scores)
            elif len(det.scores) != m:
                raise MalformedInput(
                    f"image {raw.image_id!r}: inconsistent class count ({m} vs {len(det.scores)})"
                )
    samples = []
    for idx, sample in enumerate(raw.samples):
        kept = []
        for det in sample:
            if not det.box.is_finite() or not _check_scores(det.scores):
                continue
            box = det.box.clamp(w, h)
            if not box.is_valid():
                continue
            kept.append(Detection(box, tuple(float(s) for s in det.scores), idx))
        samples.append(tuple(kept))
    return SampleSet(raw.image_id, float(w), float(h), tuple(samples), Regime.parse(raw.regime))
