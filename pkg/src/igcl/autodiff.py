"""Reverse-mode tape over dense float64 matrices.

Only the ops needed by the training graph are registered: sparse-dense
products, dense matmul, ReLU, row gather, column standardization, Gram
products and Frobenius-style reductions. Every op appends a TapeNode whose
inputs reference earlier nodes, so a reverse sweep over node ids is a valid
topological order. All arrays are float64; scalars are 0-d arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class DegenerateColumnError(Exception):
    """A column has zero variance and cannot be standardized."""

    def __init__(self, column):
        super().__init__(f"column {column} has zero variance (collapsed dimension)")
        self.column = int(column)


@dataclass
class TapeNode:
    op: str
    inputs: tuple[int, ...]
    data: np.ndarray
    requires_grad: bool
    # maps the output gradient to one gradient per input (None = not differentiable)
    backward: Callable[[np.ndarray], tuple] | None = None


class Tensor:
    """Handle to a node on a Tape."""

    __slots__ = ("tape", "id")

    def __init__(self, tape, node_id):
        self.tape = tape
        self.id = node_id

    @property
    def data(self) -> np.ndarray:
        return self.tape.nodes[self.id].data

    @property
    def shape(self):
        return self.data.shape

    @property
    def requires_grad(self) -> bool:
        return self.tape.nodes[self.id].requires_grad

    def __repr__(self):
        return f"Tensor(id={self.id}, op={self.tape.nodes[self.id].op!r}, shape={self.shape})"


class Tape:
    def __init__(self):
        self.nodes: list[TapeNode] = []

    def record(self, op, inputs, data, requires_grad, backward=None) -> Tensor:
        for i in inputs:
            if not 0 <= i < len(self.nodes):
                raise ValueError(f"op {op!r} references unknown node {i}")
        self.nodes.append(TapeNode(op, tuple(inputs), data, requires_grad, backward))
        return Tensor(self, len(self.nodes) - 1)

    def leaf(self, data, requires_grad=True) -> Tensor:
        arr = np.asarray(data, dtype=np.float64)
        return self.record("leaf", (), arr, requires_grad)

    def constant(self, data) -> Tensor:
        return self.leaf(data, requires_grad=False)


def _same_tape(*tensors):
    tape = tensors[0].tape
    if any(t.tape is not tape for t in tensors):
        raise ValueError("operands live on different tapes")
    return tape


def add(a: Tensor, b: Tensor) -> Tensor:
    tape = _same_tape(a, b)
    if a.shape != b.shape:
        raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")
    return tape.record("add", (a.id, b.id), a.data + b.data,
                       a.requires_grad or b.requires_grad,
                       lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    tape = _same_tape(a, b)
    if a.shape != b.shape:
        raise ValueError(f"sub shape mismatch: {a.shape} vs {b.shape}")
    return tape.record("sub", (a.id, b.id), a.data - b.data,
                       a.requires_grad or b.requires_grad,
                       lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    tape = _same_tape(a, b)
    if a.shape != b.shape:
        raise ValueError(f"mul shape mismatch: {a.shape} vs {b.shape}")
    ad, bd = a.data, b.data
    return tape.record("mul", (a.id, b.id), ad * bd,
                       a.requires_grad or b.requires_grad,
                       lambda g: (g * bd, g * ad))


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return a.tape.record("scale", (a.id,), a.data * c, a.requires_grad,
                         lambda g: (g * c,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    tape = _same_tape(a, b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return tape.record("matmul", (a.id, b.id), ad @ bd,
                       a.requires_grad or b.requires_grad,
                       lambda g: (g @ bd.T, ad.T @ g))


def spmm(adj, x: Tensor) -> Tensor:
    """Normalized-adjacency times dense matrix; adjacency is a graph constant."""
    if adj.num_nodes != x.shape[0]:
        raise ValueError(f"spmm shape mismatch: adjacency {adj.num_nodes} rows vs {x.shape}")
    # adjacency is symmetric, so the transpose in the backward rule is free
    return x.tape.record("spmm", (x.id,), adj.matrix @ x.data, x.requires_grad,
                         lambda g: (adj.matrix @ g,))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0  # subgradient 0 at exactly 0
    return x.tape.record("relu", (x.id,), np.where(mask, x.data, 0.0), x.requires_grad,
                         lambda g: (g * mask,))


def gather_rows(x: Tensor, indices) -> Tensor:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise ValueError(f"gather index out of range for {x.shape[0]} rows")

    def backward(g):
        out = np.zeros_like(x.data)
        np.add.at(out, idx, g)  # repeated indices accumulate
        return (out,)

    return x.tape.record("gather_rows", (x.id,), x.data[idx], x.requires_grad, backward)


def standardize_forward(values: np.ndarray):
    """Center and scale columns to zero mean and unit Euclidean norm.

    Returns (standardized, mean, sigma) with population sigma; dividing by
    sigma * sqrt(N) makes every column an exact unit vector, so Gram matrices
    of the result are correlation matrices.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    mean = values.mean(axis=0)
    centered = values - mean
    sigma = np.sqrt(np.mean(centered * centered, axis=0))
    bad = np.nonzero(~np.isfinite(sigma))[0]
    if bad.size:
        raise ValueError(f"column {bad[0]} overflowed during standardization")
    dead = np.nonzero(sigma == 0.0)[0]
    if dead.size:
        raise DegenerateColumnError(dead[0])
    out = centered / (sigma * np.sqrt(n))
    return out, mean, sigma


def standardize_cols(x: Tensor) -> Tensor:
    out, _, sigma = standardize_forward(x.data)
    n = x.shape[0]
    denom = sigma * np.sqrt(n)

    def backward(g):
        # d/dx of y = (x - mean)/(sigma*sqrt(n)) per column:
        # (g - mean(g) - y * sum(g*y)) / (sigma*sqrt(n))
        return ((g - g.mean(axis=0) - out * (g * out).sum(axis=0)) / denom,)

    return x.tape.record("standardize", (x.id,), out, x.requires_grad, backward)


def gram(x: Tensor) -> Tensor:
    xd = x.data
    return x.tape.record("gram", (x.id,), xd.T @ xd, x.requires_grad,
                         lambda g: (xd @ (g + g.T),))


def sum_all(x: Tensor) -> Tensor:
    xd = x.data
    return x.tape.record("sum", (x.id,), np.asarray(xd.sum()), x.requires_grad,
                         lambda g: (g * np.ones_like(xd),))


def sum_squares(x: Tensor) -> Tensor:
    """Squared Frobenius norm, reduced to a 0-d scalar."""
    xd = x.data
    return x.tape.record("sum_squares", (x.id,), np.asarray((xd * xd).sum()), x.requires_grad,
                         lambda g: (2.0 * g * xd,))


def stop_gradient(x: Tensor) -> Tensor:
    """Identity forward; receives no gradient and propagates none."""
    return x.tape.record("stop_gradient", (x.id,), x.data, False)


def reverse_gradients(tape: Tape, loss: Tensor, params: list[Tensor]) -> list[np.ndarray]:
    """Gradients of a scalar loss for each requested tensor (zeros if unreached)."""
    if loss.tape is not tape:
        raise ValueError("loss does not live on this tape")
    if loss.data.ndim != 0:
        raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
    grads: list[np.ndarray | None] = [None] * len(tape.nodes)
    grads[loss.id] = np.ones((), dtype=np.float64)
    for nid in range(loss.id, -1, -1):
        node = tape.nodes[nid]
        g = grads[nid]
        if g is None or node.backward is None or not node.requires_grad:
            continue
        for inp, contrib in zip(node.inputs, node.backward(g)):
            if contrib is None or not tape.nodes[inp].requires_grad:
                continue
            grads[inp] = contrib if grads[inp] is None else grads[inp] + contrib
    out = []
    for p in params:
        if p.tape is not tape:
            raise ValueError("parameter does not live on this tape")
        out.append(grads[p.id] if grads[p.id] is not None else np.zeros_like(p.data))
    return out


def glorot_from(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


def glorot_init(rows: int, cols: int, seed: int) -> np.ndarray:
    """Uniform(-a, a) with a = sqrt(6 / (rows + cols)), deterministic per seed."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    return glorot_from(np.random.default_rng(seed), rows, cols)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init_like(cls, params, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params],
                   step=0, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params, grads, state: AdamState, lr: float, weight_decay: float = 0.0):
    """In-place Adam update with L2 added to the gradient (g + weight_decay * w)."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and state must have matching lengths")
    for w, g in zip(params, grads):
        if w.shape != g.shape:
            raise ValueError(f"shape mismatch: param {w.shape} vs grad {g.shape}")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for w, g, m, v in zip(params, grads, state.m, state.v):
        if weight_decay:
            g = g + weight_decay * w
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        w -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


_TENSOR_MAGIC = "igcl-tensors 1"


def save_tensors(path, tensors, meta=None):
    """Write named 2-d tensors: text header (names, shapes, meta) + f64 LE blobs."""
    lines = [_TENSOR_MAGIC]
    for key, value in (meta or {}).items():
        lines.append(f"{key}={value}")
    for name, arr in tensors:
        if arr.ndim != 2:
            raise ValueError(f"tensor {name!r} must be 2-d, got shape {arr.shape}")
        if any(ch.isspace() for ch in name):
            raise ValueError(f"tensor name {name!r} contains whitespace")
        lines.append(f"tensor {name} {arr.shape[0]} {arr.shape[1]}")
    lines.append("end")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))
        for _, arr in tensors:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_tensors(path):
    """Read a tensor file; returns (meta dict, list of (name, array)). Rejects trailing bytes."""
    with open(path, "rb") as fh:
        blob = fh.read()
    marker = b"\nend\n"
    split = blob.find(marker)
    if split < 0:
        raise ValueError(f"{path}: missing header terminator")
    header = blob[:split].decode("utf-8").splitlines()
    payload = blob[split + len(marker):]
    if not header or header[0] != _TENSOR_MAGIC:
        raise ValueError(f"{path}: bad magic line")
    meta, decls = {}, []
    for line in header[1:]:
        if line.startswith("tensor "):
            _, name, rows, cols = line.split()
            decls.append((name, int(rows), int(cols)))
        elif "=" in line:
            key, _, value = line.partition("=")
            meta[key] = value
        else:
            raise ValueError(f"{path}: malformed header line {line!r}")
    expected = sum(r * c for _, r, c in decls) * 8
    if len(payload) != expected:
        raise ValueError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    tensors, offset = [], 0
    for name, rows, cols in decls:
        count = rows * cols
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        tensors.append((name, arr.astype(np.float64).reshape(rows, cols)))
        offset += count * 8
    return meta, tensors
