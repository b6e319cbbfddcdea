#!/usr/bin/env python3
"""Convert public node-classification benchmarks to the graph container format.

Supported sources:
  - WikiCS ``data.json`` (per-node out-link lists, dense feature rows, labels)
  - gnn-benchmark ``.npz`` archives (CSR adjacency + CSR or dense attributes)
    covering Coauthor CS/Physics and Amazon Computers/Photo

The emitted directory holds ``meta`` (key=value text), ``edges.bin``
(little-endian u32 pairs, one per directed edge as given), ``features.bin``
(little-endian f32, row-major) and ``labels.bin`` (little-endian u32). This
is the training engine's container interface; this script never imports the
engine itself.

Usage: ``convert.py --dataset wikics --out data/wikics [--source data.json]``
Without ``--source`` the archive is downloaded into ``downloads/``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import urllib.request
from dataclasses import dataclass

import numpy as np


class ConversionError(Exception):
    pass


@dataclass(frozen=True)
class DatasetDescriptor:
    name: str
    url: str
    filename: str
    fmt: str  # "wikics-json" or "gnn-benchmark-npz"
    n_nodes: int
    n_feats: int
    n_classes: int
    directed: bool
    sha256: str | None = None  # verified when provided


DATASETS = {
    "wikics": DatasetDescriptor(
        name="wikics",
        url="https://github.com/pmernyei/wiki-cs-dataset/raw/master/dataset/data.json",
        filename="wikics-data.json",
        fmt="wikics-json",
        n_nodes=11701, n_feats=300, n_classes=10, directed=True,
    ),
    "cs": DatasetDescriptor(
        name="cs",
        url="https://github.com/shchur/gnn-benchmark/raw/master/data/npz/ms_academic_cs.npz",
        filename="ms_academic_cs.npz",
        fmt="gnn-benchmark-npz",
        n_nodes=18333, n_feats=6805, n_classes=15, directed=False,
    ),
    "physics": DatasetDescriptor(
        name="physics",
        url="https://github.com/shchur/gnn-benchmark/raw/master/data/npz/ms_academic_phy.npz",
        filename="ms_academic_phy.npz",
        fmt="gnn-benchmark-npz",
        n_nodes=34493, n_feats=8415, n_classes=5, directed=False,
    ),
    "computers": DatasetDescriptor(
        name="computers",
        url="https://github.com/shchur/gnn-benchmark/raw/master/data/npz/amazon_electronics_computers.npz",
        filename="amazon_electronics_computers.npz",
        fmt="gnn-benchmark-npz",
        n_nodes=13381, n_feats=757, n_classes=10, directed=False,
    ),
    "photo": DatasetDescriptor(
        name="photo",
        url="https://github.com/shchur/gnn-benchmark/raw/master/data/npz/amazon_electronics_photo.npz",
        filename="amazon_electronics_photo.npz",
        fmt="gnn-benchmark-npz",
        n_nodes=7487, n_feats=745, n_classes=8, directed=False,
    ),
}


@dataclass(frozen=True)
class ConversionReport:
    name: str
    n_nodes: int
    n_feats: int
    n_classes: int
    raw_edges: int         # directed pairs as stored in the source
    undirected_edges: int  # after symmetrization + dedup, self-loops dropped
    directed: bool

    def __str__(self):
        return (f"dataset={self.name} nodes={self.n_nodes} feats={self.n_feats} "
                f"classes={self.n_classes} raw_edges={self.raw_edges} "
                f"undirected_edges={self.undirected_edges} directed={int(self.directed)}")


def sha256_of(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def fetch(desc: DatasetDescriptor, dest_dir="downloads"):
    os.makedirs(dest_dir, exist_ok=True)
    dest = os.path.join(dest_dir, desc.filename)
    if not os.path.exists(dest):
        print(f"downloading {desc.url} -> {dest}")
        urllib.request.urlretrieve(desc.url, dest)
    return dest


def parse_wikics_json(path):
    """WikiCS release format: features/labels per node, links[i] = out-neighbors of i."""
    with open(path, "r", encoding="utf-8") as fh:
        blob = json.load(fh)
    for key in ("features", "labels", "links"):
        if key not in blob:
            raise ConversionError(f"{path}: missing key {key!r}")
    features = np.asarray(blob["features"], dtype=np.float32)
    labels = np.asarray(blob["labels"], dtype=np.int64)
    links = blob["links"]
    if len(links) != features.shape[0]:
        raise ConversionError(f"{path}: {len(links)} link lists for {features.shape[0]} nodes")
    sources = np.repeat(np.arange(len(links), dtype=np.int64),
                        [len(row) for row in links])
    targets = np.concatenate([np.asarray(row, dtype=np.int64) for row in links]) \
        if sources.size else np.empty(0, dtype=np.int64)
    pairs = np.stack([sources, targets], axis=1)
    return pairs, features, labels


def _csr_to_dense(data, indices, indptr, shape):
    dense = np.zeros(shape, dtype=np.float32)
    rows = np.repeat(np.arange(shape[0], dtype=np.int64), np.diff(indptr))
    dense[rows, indices] = data
    return dense


def parse_gnn_benchmark_npz(path):
    """shchur-style npz: CSR adjacency plus CSR or dense node attributes."""
    with np.load(path, allow_pickle=False) as npz:
        keys = set(npz.files)
        for key in ("adj_data", "adj_indices", "adj_indptr", "adj_shape", "labels"):
            if key not in keys:
                raise ConversionError(f"{path}: missing key {key!r}")
        n = int(npz["adj_shape"][0])
        rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(npz["adj_indptr"]))
        pairs = np.stack([rows, npz["adj_indices"].astype(np.int64)], axis=1)
        if "attr_matrix" in keys:
            features = np.asarray(npz["attr_matrix"], dtype=np.float32)
        elif "attr_data" in keys:
            features = _csr_to_dense(npz["attr_data"], npz["attr_indices"].astype(np.int64),
                                     npz["attr_indptr"], (n, int(npz["attr_shape"][1])))
        else:
            raise ConversionError(f"{path}: no attr_matrix or attr_data/indices/indptr")
        labels = npz["labels"].astype(np.int64)
    return pairs, features, labels


PARSERS = {
    "wikics-json": parse_wikics_json,
    "gnn-benchmark-npz": parse_gnn_benchmark_npz,
}


def count_undirected(pairs, n):
    """Unique undirected edges after symmetrization, self-loops dropped."""
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    if not pairs.size:
        return 0
    lo = np.minimum(pairs[:, 0], pairs[:, 1]).astype(np.int64)
    hi = np.maximum(pairs[:, 0], pairs[:, 1]).astype(np.int64)
    return int(np.unique(lo * n + hi).size)


def emit_container(out_dir, pairs, features, labels, n_classes, directed):
    os.makedirs(out_dir, exist_ok=True)
    n, f = features.shape
    with open(os.path.join(out_dir, "meta"), "w", encoding="utf-8") as fh:
        fh.write(f"n_nodes={n}\n")
        fh.write(f"n_feats={f}\n")
        fh.write(f"n_classes={n_classes}\n")
        fh.write(f"directed={int(directed)}\n")
    pairs.astype("<u4").tofile(os.path.join(out_dir, "edges.bin"))
    features.astype("<f4").tofile(os.path.join(out_dir, "features.bin"))
    labels.astype("<u4").tofile(os.path.join(out_dir, "labels.bin"))


def convert(desc: DatasetDescriptor, source: str, out_dir: str) -> ConversionReport:
    """Parse, verify against the descriptor's expected stats, and emit."""
    if not os.path.isfile(source):
        raise ConversionError(f"source not readable: {source}")
    if desc.sha256:
        digest = sha256_of(source)
        if digest != desc.sha256:
            raise ConversionError(f"{source}: sha256 {digest} != expected {desc.sha256}")

    pairs, features, labels = PARSERS[desc.fmt](source)
    n, f = features.shape
    n_classes = int(labels.max()) + 1 if labels.size else 0
    measured = {"nodes": n, "feats": f, "classes": n_classes}
    expected = {"nodes": desc.n_nodes, "feats": desc.n_feats, "classes": desc.n_classes}
    mismatched = {k: (measured[k], expected[k]) for k in expected if measured[k] != expected[k]}
    if mismatched:
        raise ConversionError(f"{desc.name}: stat mismatch (measured, expected): {mismatched}")
    if labels.shape[0] != n:
        raise ConversionError(f"{desc.name}: {labels.shape[0]} labels for {n} nodes")
    if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
        raise ConversionError(f"{desc.name}: edge endpoint out of range [0, {n})")

    emit_container(out_dir, pairs, features, labels, n_classes, desc.directed)
    return ConversionReport(name=desc.name, n_nodes=n, n_feats=f, n_classes=n_classes,
                            raw_edges=int(pairs.shape[0]),
                            undirected_edges=count_undirected(pairs, n),
                            directed=desc.directed)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dataset", required=True, choices=sorted(DATASETS))
    parser.add_argument("--out", required=True, help="container output directory")
    parser.add_argument("--source", default=None,
                        help="local archive path (downloaded to downloads/ if omitted)")
    args = parser.parse_args(argv)
    desc = DATASETS[args.dataset]
    try:
        source = args.source or fetch(desc)
        report = convert(desc, source, args.out)
    except ConversionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(report)
    return 0


if __name__ == "__main__":
    sys.exit(main())
