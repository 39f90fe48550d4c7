"""Hoshen-Kopelman labeling of same-opinion clusters (von Neumann adjacency)."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np


class UnionFind:
    """Disjoint sets with path compression and union by size."""

    def __init__(self):
        self.parent: list[int] = []
        self.size: list[int] = []

    def make(self) -> int:
        self.parent.append(len(self.parent))
        self.size.append(1)
        return len(self.parent) - 1

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> int:
        a, b = self.find(a), self.find(b)
        if a == b:
            return a
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        return a


@dataclass(frozen=True, eq=False)
class ClusterLabeling:
    """Cluster id per site and member count per id.

    Ids are consecutive from 0 in row-major order of first appearance.
    """

    labels: np.ndarray
    sizes: dict[int, int]

    @property
    def n_clusters(self) -> int:
        return len(self.sizes)


def label_clusters(opinions) -> ClusterLabeling:
    grid = np.asarray(opinions)
    if grid.ndim != 2:
        raise ValueError(f"expected a 2-D grid, got shape {grid.shape}")
    rows, cols = grid.shape
    values = grid.tolist()
    provisional = [[0] * cols for _ in range(rows)]
    uf = UnionFind()
    for r in range(rows):
        row = values[r]
        for c in range(cols):
            v = row[c]
            up = r > 0 and values[r - 1][c] == v
            left = c > 0 and row[c - 1] == v
            if up and left:
                provisional[r][c] = uf.union(provisional[r - 1][c], provisional[r][c - 1])
            elif up:
                provisional[r][c] = provisional[r - 1][c]
            elif left:
                provisional[r][c] = provisional[r][c - 1]
            else:
                provisional[r][c] = uf.make()

    canonical: dict[int, int] = {}
    labels = np.empty((rows, cols), dtype=np.int64)
    for r in range(rows):
        for c in range(cols):
            root = uf.find(provisional[r][c])
            if root not in canonical:
                canonical[root] = len(canonical)
            labels[r, c] = canonical[root]
    counts = np.bincount(labels.ravel(), minlength=len(canonical))
    return ClusterLabeling(labels, {k: int(n) for k, n in enumerate(counts)})


def largest_cluster_fraction(labeling: ClusterLabeling, L: int | None = None) -> float:
    """Size of the largest cluster relative to the number of sites."""
    total = labeling.labels.size if L is None else L * L
    return max(labeling.sizes.values()) / total


def cluster_size_histogram(labeling: ClusterLabeling) -> dict[int, int]:
    return dict(sorted(Counter(labeling.sizes.values()).items()))


def count_small_clusters(labeling: ClusterLabeling, threshold: int = 5) -> int:
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")
    return sum(1 for s in labeling.sizes.values() if s <= threshold)


def boundary_mask(opinions) -> np.ndarray:
    """Sites with at least one von Neumann neighbor holding a different opinion."""
    g = np.asarray(opinions)
    mask = np.zeros(g.shape, dtype=bool)
    diff_v = g[1:, :] != g[:-1, :]
    diff_h = g[:, 1:] != g[:, :-1]
    mask[1:, :] |= diff_v
    mask[:-1, :] |= diff_v
    mask[:, 1:] |= diff_h
    mask[:, :-1] |= diff_h
    return mask
