"""Siamese GCN pair: online encoder with projector, target encoder, EMA coupling.

Both encoders share one architecture: L graph convolutions with ReLU between
layers and a linear final layer. Only the online branch has a projector (two
dense layers with ReLU between, mapping D -> D_q -> D). The target branch is
never updated by gradients; it tracks the online weights through an
exponential moving average.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .graph import NormalizedAdjacency


@dataclass
class GCNStack:
    """Chained convolution weights; first input dim F, last output dim D."""

    weights: list[np.ndarray]

    def __post_init__(self):
        if not self.weights:
            raise ValueError("a GCN stack needs at least one layer")
        for a, b in zip(self.weights, self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise ValueError(f"layer dims do not chain: {a.shape} -> {b.shape}")

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]


@dataclass
class ModelParams:
    """Online and target encoder stacks plus the online-only projector."""

    online: GCNStack
    target: GCNStack
    proj_w1: np.ndarray  # D x D_q
    proj_w2: np.ndarray  # D_q x D

    def __post_init__(self):
        shapes_o = [w.shape for w in self.online.weights]
        shapes_t = [w.shape for w in self.target.weights]
        if shapes_o != shapes_t:
            raise ValueError(f"online/target shapes differ: {shapes_o} vs {shapes_t}")

    def trainables(self) -> list[np.ndarray]:
        """Arrays updated by the optimizer: online stack then projector."""
        return [*self.online.weights, self.proj_w1, self.proj_w2]


def init_siamese(cfg, num_features: int, seed: int) -> ModelParams:
    """Glorot-initialize the online branch; target starts as an exact copy.

    Hidden convolution layers all have width cfg.D.
    """
    rng = np.random.default_rng(seed)
    dims = [num_features] + [cfg.D] * cfg.L
    weights = [ad.glorot_from(rng, dims[i], dims[i + 1]) for i in range(cfg.L)]
    proj_w1 = ad.glorot_from(rng, cfg.D, cfg.D_q)
    proj_w2 = ad.glorot_from(rng, cfg.D_q, cfg.D)
    return ModelParams(
        online=GCNStack([w.copy() for w in weights]),
        target=GCNStack([w.copy() for w in weights]),
        proj_w1=proj_w1,
        proj_w2=proj_w2,
    )


def gcn_forward_tape(tape: Tape, adj: NormalizedAdjacency, h: Tensor,
                     weights: list[Tensor]) -> Tensor:
    x = h
    for i, w in enumerate(weights):
        x = ad.matmul(ad.spmm(adj, x), w)
        if i < len(weights) - 1:
            x = ad.relu(x)
    return x


def gcn_forward(stack: GCNStack, adj: NormalizedAdjacency, h: np.ndarray) -> np.ndarray:
    """Encoder output for fixed weights (no gradients recorded)."""
    if h.shape[1] != stack.in_dim:
        raise ValueError(f"feature dim {h.shape[1]} != first layer input {stack.in_dim}")
    tape = Tape()
    out = gcn_forward_tape(tape, adj, tape.constant(h),
                           [tape.constant(w) for w in stack.weights])
    return out.data


def projector_forward_tape(tape: Tape, h: Tensor, w1: Tensor, w2: Tensor) -> Tensor:
    return ad.matmul(ad.relu(ad.matmul(h, w1)), w2)


def projector_forward(params: ModelParams, h_online: np.ndarray) -> np.ndarray:
    """Project online representations D -> D_q -> D (no gradients recorded)."""
    if h_online.shape[1] != params.proj_w1.shape[0]:
        raise ValueError(
            f"representation dim {h_online.shape[1]} != projector input {params.proj_w1.shape[0]}"
        )
    tape = Tape()
    out = projector_forward_tape(tape, tape.constant(h_online),
                                 tape.constant(params.proj_w1),
                                 tape.constant(params.proj_w2))
    return out.data


def ema_update(params: ModelParams, tau: float) -> ModelParams:
    """target <- tau * target + (1 - tau) * online, element-wise on the GCN stacks.

    The projector has no target counterpart; the online branch is untouched.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    for i, (t, o) in enumerate(zip(params.target.weights, params.online.weights)):
        params.target.weights[i] = tau * t + (1.0 - tau) * o
    return params


def save_checkpoint(path, params: ModelParams, adam: ad.AdamState, epoch: int, seed: int):
    tensors = []
    for i, w in enumerate(params.online.weights):
        tensors.append((f"online.{i}", w))
    for i, w in enumerate(params.target.weights):
        tensors.append((f"target.{i}", w))
    tensors.append(("proj.w1", params.proj_w1))
    tensors.append(("proj.w2", params.proj_w2))
    for i, m in enumerate(adam.m):
        tensors.append((f"adam.m.{i}", m))
    for i, v in enumerate(adam.v):
        tensors.append((f"adam.v.{i}", v))
    meta = {
        "seed": str(seed),
        "epoch": str(epoch),
        "step": str(adam.step),
        "beta1": repr(adam.beta1),
        "beta2": repr(adam.beta2),
        "eps": repr(adam.eps),
    }
    ad.save_tensors(path, tensors, meta)


def load_checkpoint(path):
    """Returns (params, adam_state, epoch, seed)."""
    meta, tensors = ad.load_tensors(path)
    groups: dict[str, list] = {"online": [], "target": [], "adam.m": [], "adam.v": []}
    proj = {}
    for name, arr in tensors:
        head, _, idx = name.rpartition(".")
        if head in groups:
            groups[head].append((int(idx), arr))
        elif name in ("proj.w1", "proj.w2"):
            proj[name] = arr
        else:
            raise ValueError(f"{path}: unexpected tensor {name!r}")
    stacks = {k: [arr for _, arr in sorted(v)] for k, v in groups.items()}
    params = ModelParams(
        online=GCNStack(stacks["online"]),
        target=GCNStack(stacks["target"]),
        proj_w1=proj["proj.w1"],
        proj_w2=proj["proj.w2"],
    )
    adam = ad.AdamState(
        m=stacks["adam.m"], v=stacks["adam.v"], step=int(meta["step"]),
        beta1=float(meta["beta1"]), beta2=float(meta["beta2"]), eps=float(meta["eps"]),
    )
    return params, adam, int(meta["epoch"]), int(meta["seed"])
