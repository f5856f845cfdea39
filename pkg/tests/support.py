"""Builders and brute-force oracles shared by the test modules.

The oracles are deliberately naive (loops, enumeration) and share no code
with the package beyond the data types.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np

from detmerge.model import BoundingBox, Detection, SampleSet

# Every hypothesis-driven test increments this so the acceptance suite can
# report how many generated cases the invariant suites exercised.
CASE_COUNTER: Counter = Counter()
ACCEPTANCE_LINES: list = []


def count_case(name: str) -> None:
    CASE_COUNTER[name] += 1


def box(x1, y1, x2, y2) -> BoundingBox:
    return BoundingBox(float(x1), float(y1), float(x2), float(y2))


def onehot(m: int, k: int, peak: float = 0.9) -> tuple[float, ...]:
    rest = (1.0 - peak) / max(m - 1, 1) * 0.5
    return tuple(peak if i == k else rest for i in range(m))


def det(coords, scores=(0.9, 0.05), sample=0) -> Detection:
    return Detection(box(*coords), tuple(float(s) for s in scores), sample)


def sample_set(samples, width=100.0, height=100.0, image_id="img", regime="closed") -> SampleSet:
    from detmerge.model import Regime

    fixed = tuple(tuple(Detection(d.box, d.scores, i) for d in s) for i, s in enumerate(samples))
    return SampleSet(image_id, float(width), float(height), fixed, Regime.parse(regime))


# ---------------------------------------------------------------------------
# geometry

def iou_raster(a, b) -> float:
    """IoU of integer-coordinate boxes by counting unit cells."""
    cells_a = {(x, y) for x in range(int(a[0]), int(a[2])) for y in range(int(a[1]), int(a[3]))}
    cells_b = {(x, y) for x in range(int(b[0]), int(b[2])) for y in range(int(b[1]), int(b[3]))}
    union = len(cells_a | cells_b)
    return len(cells_a & cells_b) / union if union else 0.0


# ---------------------------------------------------------------------------
# assignment

def brute_assignment(cost) -> tuple[int, float]:
    """Best (number of +inf pairs, finite total) over all maximum matchings."""
    rows, cols = len(cost), len(cost[0])
    best = None
    if rows <= cols:
        for perm in itertools.permutations(range(cols), rows):
            vals = [cost[r][perm[r]] for r in range(rows)]
            key = (sum(1 for v in vals if math.isinf(v)), sum(v for v in vals if not math.isinf(v)))
            if best is None or key < best:
                best = key
    else:
        for perm in itertools.permutations(range(rows), cols):
            vals = [cost[perm[c]][c] for c in range(cols)]
            key = (sum(1 for v in vals if math.isinf(v)), sum(v for v in vals if not math.isinf(v)))
            if best is None or key < best:
                best = key
    return best


# ---------------------------------------------------------------------------
# spanning trees

def _prufer_edges(seq, n):
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    edges = []
    for v in seq:
        leaf = min(i for i in range(n) if degree[i] == 1)
        edges.append((leaf, v))
        degree[leaf] -= 1
        degree[v] -= 1
    u, w = [i for i in range(n) if degree[i] == 1]
    edges.append((u, w))
    return edges


def brute_mst_weight(weight) -> float:
    """Minimum spanning-tree weight by enumerating every labelled tree (Pruefer codes)."""
    n = len(weight)
    if n == 1:
        return 0.0
    if n == 2:
        return float(weight[0][1])
    best = math.inf
    for seq in itertools.product(range(n), repeat=n - 2):
        total = sum(weight[a][b] for a, b in _prufer_edges(seq, n))
        best = min(best, total)
    return best


def mutual_reachability(points, min_samples) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    dist = [[math.dist(pts[i], pts[j]) for j in range(n)] for i in range(n)]
    core = []
    for i in range(n):
        others = sorted(dist[i][j] for j in range(n) if j != i)
        core.append(others[min_samples - 1])
    return np.array([[0.0 if i == j else max(core[i], core[j], dist[i][j]) for j in range(n)]
                     for i in range(n)])


# ---------------------------------------------------------------------------
# uncertainty metrics

def ue_loop(correct, incorrect, delta) -> float:
    rejected = sum(1 for u in correct if u > delta)
    accepted = sum(1 for u in incorrect if u <= delta)
    return 0.5 * rejected / len(correct) + 0.5 * accepted / len(incorrect)


def min_ue_enumerate(correct, incorrect) -> float:
    """UE minimised over every distinct value, every midpoint, and both extremes."""
    values = sorted(set(correct) | set(incorrect))
    cands = [values[0] - 1.0, values[-1] + 1.0] + values
    cands += [(a + b) / 2.0 for a, b in zip(values, values[1:])]
    return min(ue_loop(correct, incorrect, t) for t in cands)


def auroc_pairs(correct, incorrect) -> float:
    score = 0.0
    for c in correct:
        for i in incorrect:
            if c < i:
                score += 1.0
            elif c == i:
                score += 0.5
    return score / (len(correct) * len(incorrect))


def aupr_enumerate(positives, negatives) -> float:
    """Step-wise PR area, accepting records with value <= t for each distinct t."""
    area, prev_recall = 0.0, 0.0
    for t in sorted(set(positives) | set(negatives)):
        tp = sum(1 for v in positives if v <= t)
        fp = sum(1 for v in negatives if v <= t)
        if tp + fp == 0:
            continue
        recall = tp / len(positives)
        area += (recall - prev_recall) * (tp / (tp + fp))
        prev_recall = recall
    return area


def ap_envelope(tp_flags, n_gt) -> float:
    """All-points interpolated AP from a ranked list of TP/FP flags."""
    precisions, recalls = [], []
    tp = fp = 0
    for flag in tp_flags:
        tp += flag
        fp += 1 - flag
        precisions.append(tp / (tp + fp))
        recalls.append(tp / n_gt)
    area, prev = 0.0, 0.0
    for k, r in enumerate(recalls):
        if r > prev:
            area += (r - prev) * max(precisions[k:])
            prev = r
    return area


def entropy_loop(scores) -> float:
    total = sum(scores)
    h = 0.0
    for s in scores:
        p = s / total
        if p > 0:
            h -= p * math.log(max(p, 1e-10))
    return h


def kl_loop(p, q, eps=1e-10) -> float:
    sp, sq = sum(p), sum(q)
    ph = [max(v / sp, eps) for v in p]
    qh = [max(v / sq, eps) for v in q]
    return sum(a * math.log(a / b) for a, b in zip(ph, qh))
