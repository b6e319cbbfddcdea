"""Column standardization and k-NN positive partitions over 1-hop neighborhoods.

Partition 1 is always the identity (every node is its own positive). For
k >= 2, partition k maps node i to its (k-1)-th closest 1-hop neighbor in
target-representation space by Euclidean distance, computed on the raw
(pre-standardization) representations. A node participates in partition k
iff its degree is at least k - 1; ties are broken toward the smaller node
index, so construction is independent of storage order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import DegenerateColumnError, standardize_forward

__all__ = [
    "DegenerateColumnError",
    "StandardizedMatrix",
    "PositivePartition",
    "standardize",
    "build_positive_partitions",
]


@dataclass(frozen=True)
class StandardizedMatrix:
    """Matrix whose columns have zero mean and unit Euclidean norm.

    Keeps the source column means and population stds for audit.
    """

    values: np.ndarray
    col_mean: np.ndarray
    col_std: np.ndarray

    @property
    def shape(self):
        return self.values.shape


def standardize(m: np.ndarray) -> StandardizedMatrix:
    """(m - mean) / (std * sqrt(N)) per column, population std.

    Raises DegenerateColumnError naming the first zero-variance column.
    """
    out, mean, sigma = standardize_forward(m)
    return StandardizedMatrix(values=out, col_mean=mean, col_std=sigma)


@dataclass(frozen=True)
class PositivePartition:
    """K index maps from target node to positive node, with participation masks.

    Row k-1 of ``positive_for`` holds partition k; entries are -1 where the
    node does not participate. ``distance`` holds the Euclidean distance to
    the mapped positive (0 for the identity partition, NaN where absent).
    """

    K: int
    num_nodes: int
    positive_for: np.ndarray  # (K, N) int64, -1 where absent
    mask: np.ndarray          # (K, N) bool
    distance: np.ndarray      # (K, N) float64, NaN where absent

    def pairs(self, k: int):
        """(targets, positives) index arrays for partition k (1-based)."""
        if not 1 <= k <= self.K:
            raise ValueError(f"partition index {k} out of range 1..{self.K}")
        targets = np.nonzero(self.mask[k - 1])[0]
        return targets, self.positive_for[k - 1, targets]


def build_positive_partitions(h_target: np.ndarray, neighbors: list[np.ndarray],
                              K: int) -> PositivePartition:
    """k-NN over each node's 1-hop neighbors in representation space.

    For each node the K-1 nearest neighbors (squared Euclidean distance on
    rows of ``h_target``, ascending) fill partitions 2..K.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    h = np.asarray(h_target, dtype=np.float64)
    n = h.shape[0]
    if len(neighbors) != n:
        raise ValueError(f"{len(neighbors)} neighbor lists for {n} representation rows")

    positive_for = np.full((K, n), -1, dtype=np.int64)
    mask = np.zeros((K, n), dtype=bool)
    distance = np.full((K, n), np.nan)
    positive_for[0] = np.arange(n)
    mask[0] = True
    distance[0] = 0.0

    for i in range(n):
        nbrs = neighbors[i]
        take = min(len(nbrs), K - 1)
        if take == 0:
            continue
        diff = h[nbrs] - h[i]
        d2 = np.einsum("ij,ij->i", diff, diff)
        # stable sort on ascending node index => ties go to the smaller index
        order = np.argsort(d2, kind="stable")[:take]
        positive_for[1:1 + take, i] = nbrs[order]
        mask[1:1 + take, i] = True
        distance[1:1 + take, i] = np.sqrt(d2[order])

    return PositivePartition(K=K, num_nodes=n, positive_for=positive_for,
                             mask=mask, distance=distance)
