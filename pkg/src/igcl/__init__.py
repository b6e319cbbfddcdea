"""Augmentation-free graph contrastive learning with an invariant-discriminative objective.

Siamese GCN encoders coupled by an exponential moving average, positive
samples drawn from each node's own twin plus its nearest 1-hop neighbors in
representation space, and a loss that pulls positives together while forcing
representation dimensions toward orthonormality. Includes a linear-probe
evaluation harness and collapse diagnostics.

Attributes resolve lazily so the CLI can cap BLAS threads before numpy loads.
"""

import importlib

__version__ = "0.1.0"

_EXPORTS = {
    "GraphFormatError": "graph", "NormalizedAdjacency": "graph", "SparseGraph": "graph",
    "SplitAssignment": "graph", "build_graph": "graph", "generate_sbm": "graph",
    "load_graph": "graph", "make_splits": "graph", "neighbor_sets": "graph",
    "normalize_adjacency": "graph", "save_graph": "graph",
    "DiagnosticsReport": "loss", "LossBreakdown": "loss",
    "cross_correlation_diagnostics": "loss", "id_loss": "loss",
    "multi_positive_id_loss": "loss",
    "GCNStack": "model", "ModelParams": "model", "ema_update": "model",
    "gcn_forward": "model", "init_siamese": "model", "projector_forward": "model",
    "DegenerateColumnError": "positives", "PositivePartition": "positives",
    "StandardizedMatrix": "positives", "build_positive_partitions": "positives",
    "standardize": "positives",
    "ProbeResult": "probe", "SweepRow": "probe", "label_ratio_sweep": "probe",
    "linear_probe": "probe",
    "EpochStats": "train", "TrainConfig": "train", "TrainingDivergedError": "train",
    "embed": "train", "read_embeddings": "train", "train": "train",
    "write_embeddings": "train", "write_history_csv": "train",
}


def __getattr__(name):
    module_name = _EXPORTS.get(name)
    if module_name is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    value = getattr(importlib.import_module(f".{module_name}", __name__), name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(set(globals()) | set(_EXPORTS))
