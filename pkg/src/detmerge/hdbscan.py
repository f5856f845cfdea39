"""HDBSCAN over 2-D embeddings of detection boxes.

Pipeline: core distances -> mutual-reachability MST -> single-linkage tree ->
condensed tree -> excess-of-mass cluster selection.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .clustering import Cluster
from .errors import InsufficientPoints, MalformedInput
from .model import SampleSet, canonical_order


class Embedding(str, enum.Enum):
    CENTROID = "Centroid"
    CORNER = "Corner"
    EUCLIDEAN = "Euclidean"


@dataclass(frozen=True)
class PointEmbedding:
    kind: Embedding
    points: np.ndarray  # shape (n, 2), detection canonical order


@dataclass(frozen=True)
class HdbscanConfig:
    min_cluster_size: int = 5
    min_samples: int = 1
    # Lets the root (all points) be selected, so a single-object image yields one cluster.
    allow_single_cluster: bool = True

    def __post_init__(self):
        if self.min_cluster_size < 2 or self.min_samples < 1:
            raise MalformedInput("need min_cluster_size >= 2 and min_samples >= 1")

    @classmethod
    def default_for(cls, n_samples: int) -> HdbscanConfig:
        return cls(min_cluster_size=max(2, n_samples // 4), min_samples=1)


def embed(sample_set: SampleSet, kind: Embedding | str) -> PointEmbedding:
    kind = Embedding(kind)
    dets = canonical_order(sample_set.detections())
    w, h = sample_set.image_width, sample_set.image_height
    pts = np.empty((len(dets), 2))
    for i, d in enumerate(dets):
        b = d.box
        if kind is Embedding.CENTROID:
            pts[i] = ((b.x1 + b.x2) / 2.0, (b.y1 + b.y2) / 2.0)
        elif kind is Embedding.CORNER:
            pts[i] = (b.x1, b.y1)
        else:
            pts[i] = (math.hypot(b.x1, b.y1), math.hypot(w - b.x2, h - b.y2))
    return PointEmbedding(kind, pts)


def _pairwise(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def core_distances(points: Sequence[Sequence[float]] | np.ndarray, min_samples: int) -> np.ndarray:
    """Distance from each point to its ``min_samples``-th nearest other point."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < min_samples + 1:
        raise InsufficientPoints(f"{len(pts)} points, need at least {min_samples + 1}")
    dist = _pairwise(pts)
    np.fill_diagonal(dist, np.inf)
    return np.sort(dist, axis=1)[:, min_samples - 1]


def mutual_reachability_mst(points, core: Sequence[float]) -> list[tuple[int, int, float]]:
    """Kruskal MST under max(core_a, core_b, dist); ties resolved by lowest (i, j)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n < 2:
        return []
    core = np.asarray(core, dtype=float)
    mreach = np.maximum(_pairwise(pts), np.maximum(core[:, None], core[None, :]))
    iu, ju = np.triu_indices(n, k=1)
    weights = mreach[iu, ju]
    order = np.lexsort((ju, iu, weights))
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edges = []
    for k in order:
        a, b = int(iu[k]), int(ju[k])
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra
            edges.append((a, b, float(weights[k])))
            if len(edges) == n - 1:
                break
    return edges


def _single_linkage(n: int, mst: Sequence[tuple[int, int, float]]):
    """Binary merge tree; node ids >= n are merges, returned as (left, right, dist, size)."""
    edges = sorted(mst, key=lambda e: (e[2], min(e[0], e[1]), max(e[0], e[1])))
    parent = list(range(2 * n - 1))
    size = [1] * n + [0] * (n - 1)
    merges = []

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for a, b, w in edges:
        ra, rb = find(a), find(b)
        node = n + len(merges)
        parent[ra] = node
        parent[rb] = node
        size[node] = size[ra] + size[rb]
        merges.append((ra, rb, w, size[node]))
    return merges


def _leaves(node: int, n: int, merges) -> list[int]:
    out, stack = [], [node]
    while stack:
        x = stack.pop()
        if x < n:
            out.append(x)
        else:
            left, right, _, _ = merges[x - n]
            stack.append(right)
            stack.append(left)
    return out


def _condense(n: int, merges, min_cluster_size: int):
    """Rows of (parent_cluster, child, lambda, child_size); cluster ids start at n."""
    root = 2 * n - 2
    rows = []
    relabel = {root: n}
    next_label = n + 1
    stack = [root]
    while stack:
        node = stack.pop()
        left, right, dist, _ = merges[node - n]
        lam = 1.0 / dist if dist > 0 else math.inf
        parent_label = relabel[node]
        sizes = [1 if c < n else merges[c - n][3] for c in (left, right)]
        big = [s >= min_cluster_size for s in sizes]
        if big[0] and big[1]:
            for child, sz in zip((left, right), sizes):
                relabel[child] = next_label
                rows.append((parent_label, next_label, lam, sz))
                next_label += 1
                stack.append(child)
        else:
            for child, sz, keep in zip((left, right), sizes, big):
                if keep:
                    # min_cluster_size >= 2, so a kept child is always a merge node
                    relabel[child] = parent_label
                    stack.append(child)
                else:
                    for leaf in _leaves(child, n, merges):
                        rows.append((parent_label, leaf, lam, 1))
    return rows, next_label


def _persistence(lam: float, birth: float) -> float:
    return 0.0 if lam == birth else lam - birth


def extract_clusters(mst: Sequence[tuple[int, int, float]], config: HdbscanConfig,
                     n_points: Optional[int] = None) -> np.ndarray:
    """Excess-of-mass cluster labels per point; ``-1`` marks noise."""
    n = n_points if n_points is not None else len(mst) + 1
    if len(mst) != n - 1:
        raise MalformedInput("MST must have n - 1 edges")
    mcs = config.min_cluster_size
    if n < mcs:
        # Not even the root is big enough to be a cluster.
        return np.full(n, -1)
    merges = _single_linkage(n, mst)
    rows, next_label = _condense(n, merges, mcs)
    n_clusters = next_label - n
    birth = [0.0] * n_clusters
    children: list[list[int]] = [[] for _ in range(n_clusters)]
    parent_of_cluster = [-1] * n_clusters
    point_parent = [-1] * n
    for parent, child, lam, sz in rows:
        if child >= n:
            birth[child - n] = lam
            children[parent - n].append(child - n)
            parent_of_cluster[child - n] = parent - n
        else:
            point_parent[child] = parent - n
    stability = [0.0] * n_clusters
    for parent, child, lam, sz in rows:
        p = parent - n
        stability[p] += _persistence(lam, birth[p]) * sz

    selected = [False] * n_clusters
    # Children always carry larger labels than their parent.
    for c in range(n_clusters - 1, -1, -1):
        if c == 0 and not config.allow_single_cluster:
            break
        if not children[c]:
            selected[c] = True
            continue
        subtree = sum(stability[k] for k in children[c])
        if stability[c] > subtree:
            selected[c] = True
            stack = list(children[c])
            while stack:
                k = stack.pop()
                selected[k] = False
                stack.extend(children[k])
        else:
            stability[c] = subtree

    chosen = [c for c in range(n_clusters) if selected[c]]
    dense = {c: i for i, c in enumerate(chosen)}
    labels = np.full(n, -1)
    for point in range(n):
        c = point_parent[point]
        while c >= 0 and not selected[c]:
            c = parent_of_cluster[c]
        if c >= 0:
            labels[point] = dense[c]
    return labels


def hdbscan_labels(points, config: HdbscanConfig) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < config.min_samples + 1:
        return np.full(len(pts), -1)
    core = core_distances(pts, config.min_samples)
    mst = mutual_reachability_mst(pts, core)
    return extract_clusters(mst, config, n_points=len(pts))


def hdbscan_cluster(sample_set: SampleSet, kind: Embedding | str,
                    config: Optional[HdbscanConfig] = None) -> list[Cluster]:
    """Cluster detections by spatial embedding; noise detections come back as singletons."""
    if config is None:
        config = HdbscanConfig.default_for(sample_set.n_samples)
    dets = canonical_order(sample_set.detections())
    if not dets:
        return []
    labels = hdbscan_labels(embed(sample_set, kind).points, config)
    grouped: dict[int, Cluster] = {}
    clusters: list[Cluster] = []
    for det, label in zip(dets, labels):
        if label < 0:
            clusters.append(Cluster(det))
        elif label in grouped:
            grouped[label].add(det)
        else:
            grouped[label] = Cluster(det)
            clusters.append(grouped[label])
    return clusters
