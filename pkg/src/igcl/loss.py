"""Invariance + orthonormality-discrimination objective and collapse diagnostics.

The single-pair form is ||Z - H||_F^2 + lambda * (||Z'Z - I||_F^2 +
||H'H - I||_F^2) on column-standardized matrices. The multi-positive form
standardizes both sides once over all rows, evaluates the pair form on each
positive partition (online rows gathered by the partition map, target rows
restricted to participating nodes) and averages over the non-empty
partitions. Gradients flow through the online side only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor, standardize_forward
from .positives import PositivePartition, StandardizedMatrix


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    invariance: float
    discrimination: float
    per_part_invariance: list[float]


@dataclass(frozen=True)
class DiagnosticsReport:
    """Cross-correlation summaries between two standardized matrices."""

    cross_correlation: np.ndarray  # C = Z' H, d x d
    on_diag_invariance: float      # sum_i (1 - C_ii)^2
    off_diag_redundancy: float     # sum_{i != j} C_ij^2
    gram_identity_error: float     # ||Z'Z - I||_F


def _pair_terms(tape: Tape, z_rows: Tensor, h_rows: Tensor):
    eye = tape.constant(np.eye(z_rows.shape[1]))
    inv = ad.sum_squares(ad.sub(z_rows, h_rows))
    disc = ad.add(ad.sum_squares(ad.sub(ad.gram(z_rows), eye)),
                  ad.sum_squares(ad.sub(ad.gram(h_rows), eye)))
    return inv, disc


def _chain_add(terms: list[Tensor]) -> Tensor:
    acc = terms[0]
    for t in terms[1:]:
        acc = ad.add(acc, t)
    return acc


def id_loss(z_std: StandardizedMatrix, h_std: StandardizedMatrix,
            lam: float) -> LossBreakdown:
    """Single-pair objective on already-standardized matrices."""
    if z_std.shape != h_std.shape:
        raise ValueError(f"shape mismatch: {z_std.shape} vs {h_std.shape}")
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    tape = Tape()
    inv, disc = _pair_terms(tape, tape.constant(z_std.values), tape.constant(h_std.values))
    total = ad.add(inv, ad.scale(disc, lam))
    return LossBreakdown(total=float(total.data), invariance=float(inv.data),
                         discrimination=float(disc.data),
                         per_part_invariance=[float(inv.data)])


def multi_positive_loss_tape(tape: Tape, z_online: Tensor, h_target: np.ndarray,
                             parts: PositivePartition, lam: float):
    """Tape-recorded multi-positive objective; returns (loss tensor, breakdown).

    ``z_online`` is the raw (unstandardized) online projection on the tape;
    ``h_target`` is the raw target representation, entering as constants.
    Empty partitions contribute nothing and are excluded from the mean.
    """
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if z_online.shape != h_target.shape:
        raise ValueError(f"shape mismatch: {z_online.shape} vs {h_target.shape}")
    if z_online.shape[0] != parts.num_nodes:
        raise ValueError(f"partition built for {parts.num_nodes} nodes, got {z_online.shape[0]} rows")

    z_bar = ad.standardize_cols(z_online)
    h_bar, _, _ = standardize_forward(h_target)

    inv_terms, disc_terms = [], []
    per_part = [0.0] * parts.K
    for k in range(1, parts.K + 1):
        targets, positives = parts.pairs(k)
        if targets.size == 0:
            continue
        z_k = ad.gather_rows(z_bar, positives)
        h_k = tape.constant(h_bar[targets])
        inv, disc = _pair_terms(tape, z_k, h_k)
        inv_terms.append(inv)
        disc_terms.append(disc)
        per_part[k - 1] = float(inv.data)

    k_eff = len(inv_terms)
    invariance = ad.scale(_chain_add(inv_terms), 1.0 / k_eff)
    discrimination = ad.scale(_chain_add(disc_terms), 1.0 / k_eff)
    loss = ad.add(invariance, ad.scale(discrimination, lam))
    breakdown = LossBreakdown(total=float(loss.data),
                              invariance=float(invariance.data),
                              discrimination=float(discrimination.data),
                              per_part_invariance=per_part)
    return loss, breakdown


def multi_positive_id_loss(z_online: np.ndarray, h_target: np.ndarray,
                           parts: PositivePartition, lam: float) -> LossBreakdown:
    """Multi-positive objective on raw matrices (standardization included)."""
    tape = Tape()
    _, breakdown = multi_positive_loss_tape(tape, tape.constant(z_online),
                                            np.asarray(h_target, dtype=np.float64),
                                            parts, lam)
    return breakdown


def cross_correlation_diagnostics(z_std: StandardizedMatrix,
                                  h_std: StandardizedMatrix) -> DiagnosticsReport:
    """C = Z'H plus scalar summaries; reported only, never optimized."""
    if z_std.shape != h_std.shape:
        raise ValueError(f"shape mismatch: {z_std.shape} vs {h_std.shape}")
    z, h = z_std.values, h_std.values
    c = z.T @ h
    diag = np.diag(c)
    on_diag = float(((1.0 - diag) ** 2).sum())
    off_diag = float((c * c).sum() - (diag * diag).sum())
    gram_err = float(np.linalg.norm(z.T @ z - np.eye(z.shape[1])))
    return DiagnosticsReport(cross_correlation=c, on_diag_invariance=on_diag,
                             off_diag_redundancy=off_diag, gram_identity_error=gram_err)
