"""Linear evaluation: multinomial logistic regression on frozen embeddings.

The probe trains full-batch with plain gradient descent, early-stops on
validation accuracy, and reports test accuracy at the best-validation
checkpoint. The label-ratio sweep drops the validation split and uses a
fixed epoch budget instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import SplitAssignment


@dataclass(frozen=True)
class ProbeResult:
    accuracy: float
    per_class: np.ndarray  # test accuracy per class id (NaN where absent)
    split_seed: int
    weights_shape: tuple[int, int]


@dataclass(frozen=True)
class SweepRow:
    ratio: float
    mean: float
    std: float


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _accuracy(x, w, y):
    return float((np.argmax(x @ w, axis=1) == y).mean())


def _with_bias(x):
    return np.concatenate([x, np.ones((x.shape[0], 1))], axis=1)


def _gd_step(w, x, y_onehot, lr, l2):
    probs = _softmax(x @ w)
    grad = x.T @ (probs - y_onehot) / x.shape[0]
    grad[:-1] += l2 * w[:-1]  # bias row unregularized
    w -= lr * grad


def linear_probe(embeddings, labels, split: SplitAssignment, lr=0.01, l2=1e-4,
                 max_epochs=2000, patience=100) -> ProbeResult:
    """Early-stopped probe; test accuracy is taken at the best validation epoch."""
    labels = np.asarray(labels, dtype=np.int64)
    n_classes = int(labels.max()) + 1
    x = _with_bias(np.asarray(embeddings, dtype=np.float64))
    x_tr, y_tr = x[split.train], labels[split.train]
    x_va, y_va = x[split.valid], labels[split.valid]
    x_te, y_te = x[split.test], labels[split.test]
    if np.unique(y_tr).size < 2:
        raise ValueError("training split contains a single class")

    w = np.zeros((x.shape[1], n_classes))
    onehot = np.eye(n_classes)[y_tr]
    best_val, best_w, stale = -1.0, w.copy(), 0
    for _ in range(max_epochs):
        _gd_step(w, x_tr, onehot, lr, l2)
        val_acc = _accuracy(x_va, w, y_va)
        if val_acc > best_val:
            best_val, best_w, stale = val_acc, w.copy(), 0
        else:
            stale += 1
            if stale >= patience:
                break

    preds = np.argmax(x_te @ best_w, axis=1)
    per_class = np.full(n_classes, np.nan)
    for c in range(n_classes):
        hits = y_te == c
        if hits.any():
            per_class[c] = float((preds[hits] == c).mean())
    return ProbeResult(accuracy=float((preds == y_te).mean()), per_class=per_class,
                       split_seed=split.seed, weights_shape=w.shape)


def label_ratio_sweep(embeddings, labels, ratios, repeats, seed,
                      probe_epochs=500, lr=0.01, l2=1e-4) -> list[SweepRow]:
    """Mean and std test accuracy over random train/test partitions per ratio.

    No validation split; the probe runs a fixed epoch budget. Partitions
    whose train side is single-class are redrawn deterministically.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    n_classes = int(labels.max()) + 1
    x = _with_bias(np.asarray(embeddings, dtype=np.float64))
    rows = []
    for ri, ratio in enumerate(ratios):
        ratio = float(ratio)
        if not 0.0 < ratio < 1.0:
            raise ValueError(f"ratio must be in (0, 1), got {ratio}")
        n_train = int(np.floor(ratio * n))
        if n_train < 1:
            raise ValueError(f"ratio {ratio} yields an empty train set for n={n}")
        accs = []
        for rep in range(repeats):
            for attempt in range(100):
                rng = np.random.default_rng([seed, ri, rep, attempt])
                perm = rng.permutation(n)
                train_idx, test_idx = perm[:n_train], perm[n_train:]
                if np.unique(labels[train_idx]).size >= min(2, n_classes):
                    break
            else:
                raise ValueError(f"could not draw a multi-class train set at ratio {ratio}")
            w = np.zeros((x.shape[1], n_classes))
            onehot = np.eye(n_classes)[labels[train_idx]]
            for _ in range(probe_epochs):
                _gd_step(w, x[train_idx], onehot, lr, l2)
            accs.append(_accuracy(x[test_idx], w, labels[test_idx]))
        rows.append(SweepRow(ratio=ratio, mean=float(np.mean(accs)), std=float(np.std(accs))))
    return rows
