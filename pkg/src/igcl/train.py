"""Full-batch training loop, embedding extraction and run artifacts.

Each epoch: forward both branches on the whole graph, rebuild the positive
partitions from the current target representations, evaluate the
multi-positive objective, backprop into the online branch and projector,
take an Adam step, then move the target by EMA. Runs are deterministic for
a fixed seed and single-threaded execution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Tape
from .graph import SparseGraph, neighbor_sets, normalize_adjacency
from .loss import cross_correlation_diagnostics, multi_positive_loss_tape
from .model import (ModelParams, ema_update, gcn_forward, gcn_forward_tape,
                    init_siamese, projector_forward_tape)
from .positives import build_positive_partitions, standardize

HISTORY_COLUMNS = ("epoch", "total", "invariance", "discrimination",
                   "gram_identity_error", "off_diag_redundancy")


class TrainingDivergedError(Exception):
    def __init__(self, epoch):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = int(epoch)


@dataclass
class TrainConfig:
    """All training hyperparameters; defaults follow the reference protocol."""

    L: int = 1
    D: int = 1024
    D_q: int = 2048
    K: int = 1
    lam: float = 0.001
    tau: float = 0.99
    epochs: int = 1000
    lr: float = 0.005
    weight_decay: float = 0.0001
    seed: int = 0

    def validate(self) -> "TrainConfig":
        checks = [
            (self.L >= 1, "L >= 1"),
            (self.D >= 1, "D >= 1"),
            (self.D_q >= 1, "D_q >= 1"),
            (self.K >= 1, "K >= 1"),
            (self.lam >= 0, "lambda >= 0"),
            (0.0 <= self.tau <= 1.0, "tau in [0, 1]"),
            (self.epochs >= 1, "epochs >= 1"),
            (self.lr >= 0, "lr >= 0"),
            (self.weight_decay >= 0, "weight_decay >= 0"),
        ]
        for ok, rule in checks:
            if not ok:
                raise ValueError(f"config violates {rule}")
        return self


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    total: float
    invariance: float
    discrimination: float
    gram_identity_error: float
    off_diag_redundancy: float
    on_diag_invariance: float


def train(cfg: TrainConfig, g: SparseGraph, on_epoch=None):
    """Run the self-supervised loop; returns (params, per-epoch stats, adam state).

    ``on_epoch(epoch, params)`` is invoked after each optimizer + EMA step.
    """
    cfg.validate()
    adj = normalize_adjacency(g)
    nbrs = neighbor_sets(g)
    params = init_siamese(cfg, g.num_features, cfg.seed)
    trainables = params.trainables()
    adam = AdamState.init_like(trainables)
    history: list[EpochStats] = []

    for epoch in range(cfg.epochs):
        tape = Tape()
        leaves = [tape.leaf(w) for w in trainables]
        h_online = gcn_forward_tape(tape, adj, tape.constant(g.features), leaves[:cfg.L])
        z_online = projector_forward_tape(tape, h_online, leaves[cfg.L], leaves[cfg.L + 1])
        h_target = gcn_forward(params.target, adj, g.features)
        # 1e150 guard: entries beyond it overflow the squared sums downstream
        for branch in (z_online.data, h_target):
            if not np.isfinite(branch).all() or np.abs(branch).max() > 1e150:
                raise TrainingDivergedError(epoch)

        parts = build_positive_partitions(h_target, nbrs, cfg.K)
        loss, breakdown = multi_positive_loss_tape(tape, z_online, h_target, parts, cfg.lam)
        if not np.isfinite(breakdown.total):
            raise TrainingDivergedError(epoch)
        diag = cross_correlation_diagnostics(standardize(z_online.data), standardize(h_target))

        grads = ad.reverse_gradients(tape, loss, leaves)
        ad.adam_step(trainables, grads, adam, cfg.lr, cfg.weight_decay)
        ema_update(params, cfg.tau)

        history.append(EpochStats(
            epoch=epoch, total=breakdown.total, invariance=breakdown.invariance,
            discrimination=breakdown.discrimination,
            gram_identity_error=diag.gram_identity_error,
            off_diag_redundancy=diag.off_diag_redundancy,
            on_diag_invariance=diag.on_diag_invariance,
        ))
        if on_epoch is not None:
            on_epoch(epoch, params)
    return params, history, adam


def embed(model: ModelParams, g: SparseGraph) -> np.ndarray:
    """Online encoder output H (the projector is not applied)."""
    return gcn_forward(model.online, normalize_adjacency(g), g.features)


def write_history_csv(path, history: list[EpochStats]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(HISTORY_COLUMNS) + "\n")
        for row in history:
            fh.write("%d,%.17g,%.17g,%.17g,%.17g,%.17g\n" % (
                row.epoch, row.total, row.invariance, row.discrimination,
                row.gram_identity_error, row.off_diag_redundancy))


def write_embeddings(path, emb: np.ndarray) -> None:
    """Text header "N,D" followed by row-major little-endian f64 values."""
    with open(path, "wb") as fh:
        fh.write(f"{emb.shape[0]},{emb.shape[1]}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(emb, dtype="<f8").tobytes())


def read_embeddings(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    split = blob.find(b"\n")
    if split < 0:
        raise ValueError(f"{path}: missing embeddings header")
    try:
        n, d = (int(v) for v in blob[:split].decode("ascii").split(","))
    except ValueError:
        raise ValueError(f"{path}: malformed embeddings header") from None
    payload = blob[split + 1:]
    if len(payload) != n * d * 8:
        raise ValueError(f"{path}: payload is {len(payload)} bytes, expected {n * d * 8}")
    return np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(n, d)
