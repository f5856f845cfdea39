"""Minimum-cost rectangular assignment (Hungarian method, shortest augmenting paths)."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np


def _solve_square(cost: list[list[float]]) -> list[int]:
    """O(n^3) potentials-based Hungarian method; returns column assigned to each row."""
    n = len(cost)
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    match_col = [0] * (n + 1)  # match_col[j] = row (1-based) owning column j
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        match_col[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = match_col[j0]
            row = cost[i0 - 1]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match_col[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match_col[j0] == 0:
                break
        while True:
            j1 = way[j0]
            match_col[j0] = match_col[j1]
            j0 = j1
            if j0 == 0:
                break
    result = [0] * n
    for j in range(1, n + 1):
        result[match_col[j] - 1] = j - 1
    return result


def hungarian_solve(cost: Sequence[Sequence[float]]) -> list[tuple[int, int]]:
    """Min-total-cost matching of size min(rows, cols).

    ``+inf`` entries act as a forbidden-but-feasible sentinel ranked above every
    finite cost; a pair that can only be completed through such an entry is
    left out of the result (reported as unassigned). Pairs are sorted by row.
    """
    arr = np.asarray(cost, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("cost must be a non-empty 2-D matrix")
    if np.isnan(arr).any() or np.isneginf(arr).any():
        raise ValueError("cost entries must be finite or +inf")
    rows, cols = arr.shape
    size = max(rows, cols)
    finite = np.isfinite(arr)
    span = float(np.abs(arr[finite]).sum()) if finite.any() else 0.0
    # Any solution using k sentinels costs more than any using k-1: each sentinel
    # outweighs the full spread of finite costs.
    big = 2.0 * span + 1.0
    sentinel = big
    pad = big * (size + 1)
    work = np.full((size, size), pad)
    work[:rows, :cols] = np.where(finite, arr, sentinel)
    assigned = _solve_square(work.tolist())
    pairs = []
    for r in range(rows):
        c = assigned[r]
        if c < cols and finite[r, c]:
            pairs.append((r, c))
    return pairs


def assignment_cost(cost: Sequence[Sequence[float]], pairs: Sequence[tuple[int, int]]) -> float:
    return float(sum(cost[r][c] for r, c in pairs))
