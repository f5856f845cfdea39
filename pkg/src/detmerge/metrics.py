"""Ground-truth matching, correctness labels and the uncertainty/detection metrics."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .affinity import iou
from .errors import EmptyClass
from .model import BoundingBox, Observation, Regime

MATCH_IOU = 0.5


class Correctness(str, enum.Enum):
    CORRECT = "correct"
    CLOSED_SET_ERROR = "closed_set_error"
    OPEN_SET_ERROR = "open_set_error"


@dataclass(frozen=True)
class GroundTruthObject:
    box: BoundingBox
    class_label: int
    image_id: str


@dataclass(frozen=True)
class EvalRecord:
    observation: Observation
    correctness: Correctness
    uncertainty: float
    gt_iou: float
    regime: Regime

    @property
    def is_correct(self) -> bool:
        return self.correctness is Correctness.CORRECT


def gt_iou(observation: Observation, gts: Iterable[GroundTruthObject]) -> float:
    """Best IoU against ground truth of the observation's winning class (0 if none)."""
    best = 0.0
    for gt in gts:
        if gt.class_label == observation.winning_label:
            best = max(best, iou(observation.box, gt.box))
    return best


def label_correctness(observations: Sequence[Observation], gts: Sequence[GroundTruthObject],
                      regime: Regime, uncertainties: Sequence[float] | None = None) -> list[EvalRecord]:
    """Join observations of one image with its ground truth.

    ``uncertainties`` (parallel to ``observations``) defaults to entropy.
    """
    regime = Regime.parse(regime)
    records = []
    for i, obs in enumerate(observations):
        overlap = gt_iou(obs, gts)
        if overlap >= MATCH_IOU:
            label = Correctness.CORRECT
        elif regime.is_open_set:
            label = Correctness.OPEN_SET_ERROR
        else:
            label = Correctness.CLOSED_SET_ERROR
        u = obs.entropy if uncertainties is None else float(uncertainties[i])
        records.append(EvalRecord(obs, label, u, overlap, regime))
    return records


def _split(records: Sequence[EvalRecord] | tuple[Sequence[float], Sequence[float]]):
    if isinstance(records, tuple):
        correct, incorrect = records
        return np.asarray(correct, dtype=float), np.asarray(incorrect, dtype=float)
    correct = np.array([r.uncertainty for r in records if r.is_correct], dtype=float)
    incorrect = np.array([r.uncertainty for r in records if not r.is_correct], dtype=float)
    return correct, incorrect


def _require(correct: np.ndarray, incorrect: np.ndarray) -> None:
    if len(correct) == 0:
        raise EmptyClass("no correct records")
    if len(incorrect) == 0:
        raise EmptyClass("no incorrect records")


def uncertainty_error(records, delta: float) -> float:
    """Half the rejected-correct rate plus half the accepted-incorrect rate at ``delta``.

    ``records`` is a sequence of EvalRecord or a ``(correct_u, incorrect_u)`` tuple.
    """
    correct, incorrect = _split(records)
    _require(correct, incorrect)
    rejected_correct = np.count_nonzero(correct > delta)
    accepted_incorrect = np.count_nonzero(incorrect <= delta)
    return 0.5 * rejected_correct / len(correct) + 0.5 * accepted_incorrect / len(incorrect)


def min_uncertainty_error(records) -> tuple[float, float]:
    """(minimum UE, smallest threshold attaining it) over all distinct uncertainty values."""
    correct, incorrect = _split(records)
    _require(correct, incorrect)
    values = np.unique(np.concatenate([correct, incorrect]))
    candidates = np.concatenate([[values[0] - 1.0], values])
    cs, ins = np.sort(correct), np.sort(incorrect)
    rejected_correct = len(cs) - np.searchsorted(cs, candidates, side="right")
    accepted_incorrect = np.searchsorted(ins, candidates, side="right")
    ue = 0.5 * rejected_correct / len(cs) + 0.5 * accepted_incorrect / len(ins)
    best = int(np.argmin(ue))
    return float(ue[best]), float(candidates[best])


def auroc(records) -> float:
    """P(correct uncertainty < incorrect uncertainty), ties counted half."""
    correct, incorrect = _split(records)
    _require(correct, incorrect)
    ranks = rankdata(np.concatenate([incorrect, correct]))
    # Mann-Whitney U of the incorrect set ranked above the correct set.
    rank_sum = ranks[: len(incorrect)].sum()
    u_stat = rank_sum - len(incorrect) * (len(incorrect) + 1) / 2.0
    return float(u_stat / (len(correct) * len(incorrect)))


class PrPositive(str, enum.Enum):
    IN = "in"
    OUT = "out"


def aupr(records, positive: PrPositive | str = PrPositive.IN) -> float:
    """Step-wise area under the precision-recall curve.

    In: correct records are positive, accepted first (ascending uncertainty).
    Out: incorrect records are positive, rejected first (descending uncertainty).
    """
    positive = PrPositive(positive)
    correct, incorrect = _split(records)
    if positive is PrPositive.IN:
        pos, neg = correct, incorrect
    else:
        pos, neg = -incorrect, -correct
    if len(pos) == 0:
        raise EmptyClass(f"no positive records for AUPR-{positive.value}")
    thresholds = np.unique(np.concatenate([pos, neg]))
    ps, ns = np.sort(pos), np.sort(neg)
    tp = np.searchsorted(ps, thresholds, side="right")
    fp = np.searchsorted(ns, thresholds, side="right")
    precision = tp / (tp + fp)
    recall = tp / len(ps)
    recall_step = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(recall_step * precision))


def _voc_ap(recall: np.ndarray, precision: np.ndarray) -> float:
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    idx = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[idx + 1] - mrec[idx]) * mpre[idx + 1]))


def average_precision(observations: Sequence[Observation], gts: Sequence[GroundTruthObject],
                      class_id: int) -> float:
    """All-points interpolated AP for one class, winning score as confidence."""
    class_gts: dict[str, list[GroundTruthObject]] = {}
    for gt in gts:
        if gt.class_label == class_id:
            class_gts.setdefault(gt.image_id, []).append(gt)
    n_gt = sum(len(v) for v in class_gts.values())
    if n_gt == 0:
        return 0.0
    dets = [o for o in observations if o.winning_label == class_id]
    order = sorted(range(len(dets)), key=lambda i: -dets[i].winning_score)
    used = {img: [False] * len(v) for img, v in class_gts.items()}
    tp = np.zeros(len(dets))
    for rank, i in enumerate(order):
        obs = dets[i]
        candidates = class_gts.get(obs.image_id, [])
        best, best_j = -1.0, -1
        for j, gt in enumerate(candidates):
            if used[obs.image_id][j]:
                continue
            overlap = iou(obs.box, gt.box)
            if overlap > best:
                best, best_j = overlap, j
        if best_j >= 0 and best >= MATCH_IOU:
            used[obs.image_id][best_j] = True
            tp[rank] = 1.0
    if len(dets) == 0:
        return 0.0
    ctp = np.cumsum(tp)
    cfp = np.cumsum(1.0 - tp)
    return _voc_ap(ctp / n_gt, ctp / (ctp + cfp))


def mean_average_precision(observations: Sequence[Observation],
                           gts: Sequence[GroundTruthObject]) -> float:
    """Mean AP over classes with at least one ground-truth instance (NaN if none)."""
    classes = sorted({gt.class_label for gt in gts})
    if not classes:
        return float("nan")
    return float(np.mean([average_precision(observations, gts, c) for c in classes]))
