"""Graph containers, symmetric normalization, synthetic benchmarks and splits.

The on-disk container is a directory with four files: ``meta`` (text,
``key=value`` lines), ``edges.bin`` (little-endian u32 pairs, one pair per
directed edge as given), ``features.bin`` (little-endian f32, row-major) and
optionally ``labels.bin`` (little-endian u32, one per node). Loading
symmetrizes and deduplicates the edge set and drops self-loops, so the
in-memory adjacency is always undirected and clean; self-loops reappear only
inside :func:`normalize_adjacency`.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

META_KEYS = ("n_nodes", "n_feats", "n_classes", "directed")


class GraphFormatError(Exception):
    """A container file is missing, malformed, or inconsistent."""

    def __init__(self, path, message, offset=None):
        loc = f"{path}" if offset is None else f"{path} (byte {offset})"
        super().__init__(f"{loc}: {message}")
        self.path = str(path)
        self.offset = offset


@dataclass(frozen=True)
class SparseGraph:
    """Undirected graph in CSR form with dense node features.

    The stored structure is symmetric, deduplicated and self-loop free;
    ``col_indices`` is sorted ascending within each row. Instances are
    immutable and safe to share across threads.
    """

    num_nodes: int
    row_offsets: np.ndarray  # int64, length N+1
    col_indices: np.ndarray  # int64, length 2*|E|
    features: np.ndarray     # float64, N x F
    labels: np.ndarray | None = None  # int64 per node
    directed_source: bool = False

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        """Undirected edge count (each edge stored twice in CSR)."""
        return self.col_indices.shape[0] // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def neighbors(self, i: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[i]:self.row_offsets[i + 1]]


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Symmetrically normalized adjacency with self-loops, in CSR form.

    Edge (i, j) carries weight 1/sqrt(dhat_i * dhat_j) where dhat counts the
    self-loop, so every diagonal entry is 1/dhat_i.
    """

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    weights: np.ndarray

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.weights, self.col_indices, self.row_offsets),
            shape=(self.num_nodes, self.num_nodes),
        )

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True)
class SplitAssignment:
    """Disjoint train/valid/test node index lists covering [0, N)."""

    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    seed: int
    ratios: tuple[float, float, float]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _csr_from_undirected_pairs(pairs: np.ndarray, n: int):
    """Build sorted CSR arrays from a (possibly duplicated) symmetric pair list."""
    if pairs.shape[0]:
        keys = np.unique(pairs[:, 0].astype(np.int64) * n + pairs[:, 1].astype(np.int64))
        rows = keys // n
        cols = keys % n
    else:
        rows = np.empty(0, dtype=np.int64)
        cols = np.empty(0, dtype=np.int64)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=offsets[1:])
    return _freeze(offsets), _freeze(cols)


def build_graph(num_nodes, edge_pairs, features, labels=None, directed_source=False) -> SparseGraph:
    """Assemble a validated SparseGraph from raw directed edge pairs.

    Self-loops are dropped, the edge set is closed under reversal and
    deduplicated. ``edge_pairs`` is an (m, 2) integer array.
    """
    pairs = np.asarray(edge_pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= num_nodes):
        raise ValueError(f"edge endpoint out of range for {num_nodes} nodes")
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    sym = np.concatenate([pairs, pairs[:, ::-1]]) if pairs.size else pairs
    offsets, cols = _csr_from_undirected_pairs(sym, num_nodes)
    feats = np.ascontiguousarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] != num_nodes:
        raise ValueError(f"features must be 2-d with {num_nodes} rows, got {feats.shape}")
    if not np.isfinite(feats).all():
        raise ValueError("features contain non-finite entries")
    lab = None
    if labels is not None:
        lab = np.ascontiguousarray(labels, dtype=np.int64)
        if lab.shape != (num_nodes,):
            raise ValueError(f"labels must have shape ({num_nodes},), got {lab.shape}")
    return SparseGraph(
        num_nodes=num_nodes,
        row_offsets=offsets,
        col_indices=cols,
        features=_freeze(feats),
        labels=_freeze(lab) if lab is not None else None,
        directed_source=directed_source,
    )


def _read_meta(path):
    if not os.path.isfile(path):
        raise GraphFormatError(path, "missing file")
    seen = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if "=" not in line:
                raise GraphFormatError(path, f"malformed header line {lineno}: {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in META_KEYS:
                raise GraphFormatError(path, f"unknown header key {key!r} on line {lineno}")
            if key in seen:
                raise GraphFormatError(path, f"duplicate header key {key!r} on line {lineno}")
            try:
                seen[key] = int(value.strip())
            except ValueError:
                raise GraphFormatError(path, f"non-integer value for {key!r} on line {lineno}") from None
    for key in META_KEYS:
        if key not in seen:
            raise GraphFormatError(path, f"missing header key {key!r}")
    if seen["n_nodes"] < 1 or seen["n_feats"] < 1:
        raise GraphFormatError(path, "n_nodes and n_feats must be positive")
    if seen["directed"] not in (0, 1):
        raise GraphFormatError(path, "directed must be 0 or 1")
    return seen


def _read_binary(path, dtype, expected_count, what):
    if not os.path.isfile(path):
        raise GraphFormatError(path, "missing file")
    raw = np.fromfile(path, dtype=np.uint8)
    itemsize = np.dtype(dtype).itemsize
    if raw.size % itemsize:
        raise GraphFormatError(path, f"trailing bytes after last {what}", offset=raw.size - raw.size % itemsize)
    values = raw.view(dtype)
    if expected_count is not None and values.size != expected_count:
        raise GraphFormatError(
            path, f"expected {expected_count} {what} entries, found {values.size}"
        )
    return values


def load_graph(path: str) -> SparseGraph:
    """Load and validate a graph container directory.

    Directed inputs are symmetrized (union of edge directions); duplicate
    edges and self-loops are removed.
    """
    meta = _read_meta(os.path.join(path, "meta"))
    n, f, c = meta["n_nodes"], meta["n_feats"], meta["n_classes"]

    edges_path = os.path.join(path, "edges.bin")
    flat = _read_binary(edges_path, "<u4", None, "edge index")
    if flat.size % 2:
        raise GraphFormatError(edges_path, "odd number of edge endpoints", offset=flat.size * 4 - 4)
    pairs = flat.astype(np.int64).reshape(-1, 2)
    bad = np.nonzero((pairs >= n).any(axis=1))[0]
    if bad.size:
        i = int(bad[0])
        col = 0 if pairs[i, 0] >= n else 1
        raise GraphFormatError(
            edges_path, f"node index {pairs[i, col]} out of range [0, {n})", offset=i * 8 + col * 4
        )

    feats_path = os.path.join(path, "features.bin")
    flat_feats = _read_binary(feats_path, "<f4", None, "feature value")
    if flat_feats.size != n * f:
        if flat_feats.size % f == 0:
            raise GraphFormatError(
                feats_path, f"feature-row count {flat_feats.size // f} != n_nodes {n}"
            )
        raise GraphFormatError(feats_path, f"expected {n * f} f32 values, found {flat_feats.size}")
    features = flat_feats.astype(np.float64).reshape(n, f)
    if not np.isfinite(features).all():
        raise GraphFormatError(feats_path, "non-finite feature value")

    labels = None
    labels_path = os.path.join(path, "labels.bin")
    if os.path.isfile(labels_path):
        raw_labels = _read_binary(labels_path, "<u4", n, "label")
        labels = raw_labels.astype(np.int64)
        if c > 0 and labels.size and labels.max() >= c:
            raise GraphFormatError(
                labels_path, f"label {labels.max()} out of range [0, {c})",
                offset=int(np.argmax(labels)) * 4,
            )

    return build_graph(n, pairs, features, labels, directed_source=bool(meta["directed"]))


def save_graph(path: str, g: SparseGraph) -> None:
    """Write a SparseGraph as a container directory (undirected, one pair per edge)."""
    os.makedirs(path, exist_ok=True)
    n_classes = int(g.labels.max()) + 1 if g.labels is not None and g.labels.size else 0
    with open(os.path.join(path, "meta"), "w", encoding="utf-8") as fh:
        fh.write(f"n_nodes={g.num_nodes}\n")
        fh.write(f"n_feats={g.num_features}\n")
        fh.write(f"n_classes={n_classes}\n")
        fh.write("directed=0\n")
    rows = np.repeat(np.arange(g.num_nodes, dtype=np.int64), g.degrees())
    upper = rows < g.col_indices
    pairs = np.stack([rows[upper], g.col_indices[upper]], axis=1)
    pairs.astype("<u4").tofile(os.path.join(path, "edges.bin"))
    g.features.astype("<f4").tofile(os.path.join(path, "features.bin"))
    if g.labels is not None:
        g.labels.astype("<u4").tofile(os.path.join(path, "labels.bin"))


def normalize_adjacency(g: SparseGraph) -> NormalizedAdjacency:
    """Return the symmetrically normalized adjacency with self-loops in CSR form.

    Isolated nodes end up with a single self-loop of weight 1.
    """
    n = g.num_nodes
    deg_hat = g.degrees() + 1  # self-loop included
    rows = np.concatenate([np.repeat(np.arange(n, dtype=np.int64), g.degrees()),
                           np.arange(n, dtype=np.int64)])
    cols = np.concatenate([g.col_indices, np.arange(n, dtype=np.int64)])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    weights = 1.0 / np.sqrt(deg_hat[rows] * deg_hat[cols])
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=offsets[1:])
    return NormalizedAdjacency(
        num_nodes=n,
        row_offsets=_freeze(offsets),
        col_indices=_freeze(cols),
        weights=_freeze(weights),
    )


def neighbor_sets(g: SparseGraph) -> list[np.ndarray]:
    """Per-node sorted 1-hop neighbor index lists (views into the CSR arrays)."""
    return [g.neighbors(i) for i in range(g.num_nodes)]


def generate_sbm(blocks, nodes_per_block, p_in, p_out, feat_dim, feat_shift, seed) -> SparseGraph:
    """Stochastic block model with block-dependent Gaussian feature means.

    Block b's feature mean is ``feat_shift`` times a random unit direction;
    features have unit variance around it. Labels are block ids. Feature
    values are quantized to f32 so in-memory graphs match their on-disk
    round-trip exactly.
    """
    if not (0.0 <= p_out <= p_in <= 1.0):
        raise ValueError(f"require 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if blocks < 1 or nodes_per_block < 1 or feat_dim < 1:
        raise ValueError("blocks, nodes_per_block and feat_dim must be positive")
    n = blocks * nodes_per_block
    rng = np.random.default_rng(seed)

    chunks = []
    for b1 in range(blocks):
        base1 = b1 * nodes_per_block
        for b2 in range(b1, blocks):
            base2 = b2 * nodes_per_block
            if b1 == b2:
                iu, ju = np.triu_indices(nodes_per_block, k=1)
                hit = rng.random(iu.size) < p_in
            else:
                iu, ju = np.indices((nodes_per_block, nodes_per_block)).reshape(2, -1)
                hit = rng.random(iu.size) < p_out
            if hit.any():
                chunks.append(np.stack([base1 + iu[hit], base2 + ju[hit]], axis=1))
    pairs = np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)

    labels = np.repeat(np.arange(blocks, dtype=np.int64), nodes_per_block)
    dirs = rng.normal(size=(blocks, feat_dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    feats = feat_shift * dirs[labels] + rng.standard_normal((n, feat_dim))
    feats = feats.astype(np.float32).astype(np.float64)
    return build_graph(n, pairs, feats, labels)


def make_splits(n, ratios, seed) -> SplitAssignment:
    """Deterministic shuffle-partition of [0, n) into train/valid/test.

    Sizes are floor(train), floor(valid), remainder to test.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative fractions summing to 1, got {ratios}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(np.floor(ratios[0] * n))
    n_valid = int(np.floor(ratios[1] * n))
    return SplitAssignment(
        train=_freeze(np.sort(perm[:n_train])),
        valid=_freeze(np.sort(perm[n_train:n_train + n_valid])),
        test=_freeze(np.sort(perm[n_train + n_valid:])),
        seed=seed,
        ratios=ratios,
    )
