"""Temperature bin packing with DBSCAN over one-dimensional core temperatures."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

DEFAULT_EPSILON = 0.7  # K
DEFAULT_MIN_PTS = 1


@dataclass(frozen=True)
class BinPartition:
    """Cores grouped into bins, ordered by smallest member id.

    ``noise`` holds cores DBSCAN left unassigned; it is always empty for
    ``min_pts == 1``.
    """

    bins: tuple[tuple[int, ...], ...]
    averages: tuple[float, ...]
    task_counts: tuple[int, ...]
    epsilon: float = DEFAULT_EPSILON
    min_pts: int = DEFAULT_MIN_PTS
    noise: tuple[int, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.bins)

    def bin_of(self, core: int) -> int:
        for b, members in enumerate(self.bins):
            if core in members:
                return b
        raise KeyError(core)

    def with_task_counts(self, counts: Sequence[int]) -> "BinPartition":
        if len(counts) != len(self.bins):
            raise ValueError("one task count per bin required")
        return replace(self, task_counts=tuple(int(c) for c in counts))


def dbscan_1d(values: Sequence[float], epsilon: float, min_pts: int) -> list[int]:
    """DBSCAN labels for scalar points; ``-1`` marks noise.

    Neighbourhoods are closed intervals ``|x - y| <= epsilon`` and include the
    point itself.  Clusters are numbered in order of discovery by index.
    """
    x = np.asarray(values, dtype=float)
    n = len(x)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    # sliding window on the sorted values; uses the exact |x - y| <= eps test
    # so ties at the boundary agree with a pairwise check
    lo = np.empty(n, dtype=int)
    hi = np.empty(n, dtype=int)
    a = b = 0
    vals = xs.tolist()
    for i, v in enumerate(vals):
        while v - vals[a] > epsilon:
            a += 1
        while b < n and vals[b] - v <= epsilon:
            b += 1
        lo[i], hi[i] = a, b
    # neighbour counts in sorted order, then mapped back
    counts_sorted = hi - lo
    pos = np.empty(n, dtype=int)
    pos[order] = np.arange(n)
    is_core = counts_sorted[pos] >= min_pts

    labels = [-1] * n
    visited = [False] * n
    cluster = 0
    for i in range(n):
        if visited[i] or not is_core[i]:
            continue
        visited[i] = True
        labels[i] = cluster
        frontier = [i]
        while frontier:
            j = frontier.pop()
            pj = pos[j]
            for k in order[lo[pj]:hi[pj]]:
                k = int(k)
                if labels[k] == -1:
                    labels[k] = cluster
                if not visited[k] and is_core[k]:
                    visited[k] = True
                    frontier.append(k)
        cluster += 1
    return labels


def pack_bins(
    temps: Sequence[float],
    epsilon: float = DEFAULT_EPSILON,
    min_pts: int = DEFAULT_MIN_PTS,
) -> BinPartition:
    """Group cores whose temperatures are density-connected within ``epsilon``."""
    if len(temps) == 0:
        raise ValueError("no cores to pack")
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    t = np.asarray(temps, dtype=float)
    labels = dbscan_1d(t, epsilon, min_pts)
    groups: dict[int, list[int]] = {}
    noise = []
    for core, lab in enumerate(labels):
        if lab < 0:
            noise.append(core)
        else:
            groups.setdefault(lab, []).append(core)
    bins = sorted((tuple(sorted(g)) for g in groups.values()), key=lambda b: b[0])
    return BinPartition(
        bins=tuple(bins),
        averages=tuple(float(t[list(b)].mean()) for b in bins),
        task_counts=(0,) * len(bins),
        epsilon=epsilon,
        min_pts=min_pts,
        noise=tuple(noise),
    )


def refresh_bin_stats(partition: BinPartition, state) -> BinPartition:
    """Recompute bin averages from ``state`` (a ThermalState or array); membership is kept."""
    temps = np.asarray(getattr(state, "temps", state), dtype=float)
    n = len(temps)
    for b in partition.bins:
        for c in b:
            if not 0 <= c < n:
                raise ValueError(f"core id {c} not present in state with {n} cores")
    return replace(partition, averages=tuple(float(temps[list(b)].mean()) for b in partition.bins))
