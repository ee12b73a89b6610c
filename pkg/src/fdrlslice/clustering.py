"""Traffic-aware agent selection: banded DTW distances + DBSCAN.

The per-BS demand series of one slice are min-max normalized, compared
pairwise with a Sakoe-Chiba banded DTW, and the resulting distance matrix is
clustered with DBSCAN. Points that end up in no cluster carry the ``NOISE``
label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

NOISE = -1


@dataclass(frozen=True)
class DistanceMatrix:
    ids: tuple[int, ...]  # row/col order -> bs ids
    values: np.ndarray  # symmetric, zero diagonal

    @property
    def n(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class ClusterAssignment:
    labels: dict[int, int]  # bs_id -> cluster id, or NOISE
    n_clusters: int

    def members(self, cluster_id: int) -> list[int]:
        return sorted(b for b, l in self.labels.items() if l == cluster_id)

    def clusters(self) -> list[list[int]]:
        return [self.members(k) for k in range(self.n_clusters)]

    def noise(self) -> list[int]:
        return sorted(b for b, l in self.labels.items() if l == NOISE)


def normalize_series(samples) -> np.ndarray:
    """Min-max normalize to [0, 1]; a constant series maps to all zeros."""
    x = np.asarray(samples, dtype=float)
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


@njit(cache=True)
def _dtw_band(a, b, window):
    n, m = len(a), len(b)
    w = window
    if w < abs(n - m):  # band must reach the corner
        w = abs(n - m)
    inf = np.inf
    prev = np.full(m + 1, inf)
    cur = np.full(m + 1, inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        cur[:] = inf
        lo = max(1, i - w)
        hi = min(m, i + w)
        for j in range(lo, hi + 1):
            cost = abs(a[i - 1] - b[j - 1])
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = cost + best
        prev, cur = cur, prev
    return prev[m]


def dtw(a, b, window: int = 0) -> float:
    """Length-normalized DTW with a Sakoe-Chiba band of half-width ``window``.

    ``window = 0`` means unbounded. Local cost is the absolute difference;
    the path cost is divided by len(a) + len(b).
    """
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("dtw requires non-empty series")
    w = int(window) if window > 0 else max(len(a), len(b))
    return float(_dtw_band(a, b, w)) / (len(a) + len(b))


def distance_matrix(all_series: dict[int, np.ndarray],
                    window: int = 0) -> DistanceMatrix:
    """Pairwise banded DTW over normalized series, one computation per pair."""
    ids = tuple(sorted(all_series))
    if len(ids) < 2:
        raise ValueError("need at least two series")
    lengths = {len(all_series[i]) for i in ids}
    if len(lengths) != 1:
        raise ValueError(f"mismatched series lengths: {sorted(lengths)}")
    norm = [normalize_series(all_series[i]) for i in ids]
    n = len(ids)
    d = np.zeros((n, n))
    for j in range(n):
        for z in range(j + 1, n):
            d[j, z] = d[z, j] = dtw(norm[j], norm[z], window)
    return DistanceMatrix(ids=ids, values=d)


def dbscan(dist: DistanceMatrix, eps_d: float, n_min: int) -> ClusterAssignment:
    """DBSCAN over a precomputed distance matrix.

    A point is core iff at least ``n_min`` points (itself included) lie
    within ``eps_d``. Points are visited in ascending id order, so border
    points reachable from several clusters deterministically join the
    first-visited one.
    """
    d = dist.values
    n = dist.n
    neighbor = d <= eps_d
    core = neighbor.sum(axis=1) >= n_min
    labels = np.full(n, NOISE, dtype=int)
    n_clusters = 0
    for i in range(n):
        if labels[i] != NOISE or not core[i]:
            continue
        cid = n_clusters
        n_clusters += 1
        labels[i] = cid
        frontier = [i]
        while frontier:
            p = frontier.pop(0)
            for q in np.nonzero(neighbor[p])[0]:
                if labels[q] == NOISE:
                    labels[q] = cid
                    if core[q]:
                        frontier.append(int(q))
    return ClusterAssignment(
        labels={bs: int(l) for bs, l in zip(dist.ids, labels)},
        n_clusters=n_clusters,
    )
