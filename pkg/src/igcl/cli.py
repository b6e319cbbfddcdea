"""Command-line entry point: reproducible train/embed/probe/sweep/sbm/diag runs.

Every command that writes into an output directory first records a manifest
(resolved arguments, command name, timestamp, version). Re-running from the
manifest reproduces the outputs byte-identically on a single thread. The
IGCL_THREADS environment variable caps BLAS parallelism (default 1); it is
applied before numpy loads, so heavy imports happen inside the handlers.
"""

from __future__ import annotations

import argparse
import datetime
import os
import sys
from dataclasses import dataclass

from . import __version__

MANIFEST_NAME = "manifest"

# config-file key -> (TrainConfig attribute, parser)
CONFIG_FIELDS = {
    "L": ("L", int),
    "D": ("D", int),
    "D_q": ("D_q", int),
    "K": ("K", int),
    "lambda": ("lam", float),
    "tau": ("tau", float),
    "epochs": ("epochs", int),
    "lr": ("lr", float),
    "weight_decay": ("weight_decay", float),
    "seed": ("seed", int),
}


def parse_config(path):
    """Parse a key=value config file into a validated TrainConfig."""
    from .train import TrainConfig

    if not os.path.isfile(path):
        raise ValueError(f"config file not found: {path}")
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in CONFIG_FIELDS:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            attr, cast = CONFIG_FIELDS[key]
            if attr in values:
                raise ValueError(f"{path}:{lineno}: duplicate config key {key!r}")
            try:
                values[attr] = cast(raw.strip())
            except ValueError:
                raise ValueError(f"{path}:{lineno}: cannot parse {key}={raw.strip()!r}") from None
    return TrainConfig(**values).validate()


def config_as_args(cfg) -> dict:
    return {key: getattr(cfg, attr) for key, (attr, _) in CONFIG_FIELDS.items()}


@dataclass(frozen=True)
class RunManifest:
    command: str
    version: str
    timestamp: str
    args: dict

    @classmethod
    def create(cls, command, args):
        stamp = datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        return cls(command=command, version=__version__, timestamp=stamp,
                   args={k: str(v) for k, v in args.items()})

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, MANIFEST_NAME), "w", encoding="utf-8") as fh:
            fh.write(f"command={self.command}\n")
            fh.write(f"version={self.version}\n")
            fh.write(f"timestamp={self.timestamp}\n")
            for key, value in self.args.items():
                fh.write(f"arg.{key}={value}\n")

    @classmethod
    def read(cls, path):
        fields, args = {}, {}
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                key, _, value = line.partition("=")
                if key.startswith("arg."):
                    args[key[4:]] = value
                else:
                    fields[key] = value
        return cls(command=fields["command"], version=fields["version"],
                   timestamp=fields["timestamp"], args=args)


def _parse_ratio_list(text):
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise ValueError(f"cannot parse ratio list {text!r}") from None


def cmd_train(cfg, data, out):
    from .model import save_checkpoint
    from .train import train, write_embeddings, write_history_csv
    from .train import embed as embed_model
    from .graph import load_graph

    manifest = RunManifest.create("train", {**config_as_args(cfg), "data": data, "out": out})
    manifest.write(out)
    g = load_graph(data)
    params, history, adam = train(cfg, g)
    write_history_csv(os.path.join(out, "history.csv"), history)
    save_checkpoint(os.path.join(out, "checkpoint"), params, adam,
                    epoch=cfg.epochs, seed=cfg.seed)
    write_embeddings(os.path.join(out, "emb"), embed_model(params, g))
    last = history[-1]
    print(f"trained {cfg.epochs} epochs: total={last.total:.6g} "
          f"invariance={last.invariance:.6g} discrimination={last.discrimination:.6g}")
    print(f"outputs in {out}: history.csv checkpoint emb")
    return 0


def cmd_embed(checkpoint, data, out):
    from .graph import load_graph
    from .model import load_checkpoint
    from .train import embed as embed_model
    from .train import write_embeddings

    manifest = RunManifest.create("embed", {"checkpoint": checkpoint, "data": data, "out": out})
    manifest.write(out)
    params, _, _, _ = load_checkpoint(checkpoint)
    emb = embed_model(params, load_graph(data))
    write_embeddings(os.path.join(out, "emb"), emb)
    print(f"wrote {emb.shape[0]}x{emb.shape[1]} embeddings to {os.path.join(out, 'emb')}")
    return 0


def _probe_report(result):
    lines = [f"accuracy={result.accuracy:.6f}", f"split_seed={result.split_seed}"]
    for c, acc in enumerate(result.per_class):
        shown = "absent" if acc != acc else f"{acc:.6f}"  # NaN -> class absent from test set
        lines.append(f"class_{c}_accuracy={shown}")
    return "\n".join(lines) + "\n"


def cmd_probe(embeddings, data, ratios, seed, out, lr, l2, max_epochs, patience):
    from .graph import load_graph, make_splits
    from .probe import linear_probe
    from .train import read_embeddings

    if out:
        RunManifest.create("probe", {
            "embeddings": embeddings, "data": data,
            "ratios": ",".join(repr(r) for r in ratios), "seed": seed, "out": out,
            "lr": lr, "l2": l2, "max_epochs": max_epochs, "patience": patience,
        }).write(out)
    g = load_graph(data)
    if g.labels is None:
        raise ValueError(f"{data}: container has no labels to probe against")
    emb = read_embeddings(embeddings)
    if emb.shape[0] != g.num_nodes:
        raise ValueError(f"embeddings have {emb.shape[0]} rows for {g.num_nodes} nodes")
    split = make_splits(g.num_nodes, ratios, seed)
    result = linear_probe(emb, g.labels, split, lr=lr, l2=l2,
                          max_epochs=max_epochs, patience=patience)
    report = _probe_report(result)
    print(report, end="")
    if out:
        with open(os.path.join(out, "report.txt"), "w", encoding="utf-8") as fh:
            fh.write(report)
    return 0


def cmd_sweep(embeddings, data, ratios, repeats, seed, out, probe_epochs):
    from .graph import load_graph
    from .probe import label_ratio_sweep
    from .train import read_embeddings

    if out:
        RunManifest.create("sweep", {
            "embeddings": embeddings, "data": data,
            "ratios": ",".join(repr(r) for r in ratios),
            "repeats": repeats, "seed": seed, "out": out, "probe_epochs": probe_epochs,
        }).write(out)
    g = load_graph(data)
    if g.labels is None:
        raise ValueError(f"{data}: container has no labels to probe against")
    emb = read_embeddings(embeddings)
    rows = label_ratio_sweep(emb, g.labels, ratios, repeats, seed, probe_epochs=probe_epochs)
    lines = ["ratio,mean,std"] + [f"{r.ratio:g},{r.mean:.6f},{r.std:.6f}" for r in rows]
    print("\n".join(lines))
    if out:
        with open(os.path.join(out, "sweep.csv"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


def cmd_sbm(blocks, per_block, p_in, p_out, feat_dim, feat_shift, seed, out):
    from .graph import generate_sbm, save_graph

    manifest = RunManifest.create("sbm", {
        "blocks": blocks, "per_block": per_block, "p_in": p_in, "p_out": p_out,
        "feat_dim": feat_dim, "feat_shift": feat_shift, "seed": seed, "out": out,
    })
    manifest.write(out)
    g = generate_sbm(blocks, per_block, p_in, p_out, feat_dim, feat_shift, seed)
    save_graph(out, g)
    print(f"wrote container to {out}: {g.num_nodes} nodes, {g.num_edges} edges, "
          f"{g.num_features} features, {blocks} classes")
    return 0


def cmd_diag(data, embeddings, k, out):
    from .graph import load_graph, neighbor_sets
    from .positives import build_positive_partitions
    from .train import read_embeddings

    g = load_graph(data)
    n_classes = int(g.labels.max()) + 1 if g.labels is not None and g.labels.size else 0
    print(f"nodes={g.num_nodes}")
    print(f"edges={g.num_edges}")
    print(f"features={g.num_features}")
    print(f"classes={n_classes}")
    print(f"directed_source={int(g.directed_source)}")
    reps = read_embeddings(embeddings) if embeddings else g.features
    parts = build_positive_partitions(reps, neighbor_sets(g), k)
    lines = ["node k positive distance"]
    for kk in range(1, parts.K + 1):
        targets, positives = parts.pairs(kk)
        for node, pos in zip(targets, positives):
            lines.append(f"{node} {kk} {pos} {parts.distance[kk - 1, node]:.17g}")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote partition dump to {out}")
    else:
        print("\n".join(lines))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="igcl",
        description="Augmentation-free graph contrastive learning engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="self-supervised training run")
    p.add_argument("--config", required=True, help="key=value hyperparameter file")
    p.add_argument("--data", required=True, help="graph container directory")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("embed", help="recompute embeddings from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("probe", help="linear probe on stored embeddings")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--ratios", required=True, help="train,valid,test fractions")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--max-epochs", type=int, default=2000)
    p.add_argument("--patience", type=int, default=100)

    p = sub.add_parser("sweep", help="label-ratio sweep on stored embeddings")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--ratios", required=True, help="comma-separated train ratios")
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--probe-epochs", type=int, default=500)

    p = sub.add_parser("sbm", help="generate a synthetic block-model container")
    p.add_argument("--blocks", type=int, required=True)
    p.add_argument("--per-block", type=int, required=True)
    p.add_argument("--p-in", type=float, required=True)
    p.add_argument("--p-out", type=float, required=True)
    p.add_argument("--feat-dim", type=int, default=32)
    p.add_argument("--feat-shift", type=float, default=1.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("diag", help="validate a container and dump positive partitions")
    p.add_argument("--data", required=True)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--out", default=None)

    return parser


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if ns.command == "train":
            return cmd_train(parse_config(ns.config), ns.data, ns.out)
        if ns.command == "embed":
            return cmd_embed(ns.checkpoint, ns.data, ns.out)
        if ns.command == "probe":
            return cmd_probe(ns.embeddings, ns.data, _parse_ratio_list(ns.ratios),
                             ns.seed, ns.out, ns.lr, ns.l2, ns.max_epochs, ns.patience)
        if ns.command == "sweep":
            return cmd_sweep(ns.embeddings, ns.data, _parse_ratio_list(ns.ratios),
                             ns.repeats, ns.seed, ns.out, ns.probe_epochs)
        if ns.command == "sbm":
            return cmd_sbm(ns.blocks, ns.per_block, ns.p_in, ns.p_out,
                           ns.feat_dim, ns.feat_shift, ns.seed, ns.out)
        if ns.command == "diag":
            return cmd_diag(ns.data, ns.embeddings, ns.k, ns.out)
        raise ValueError(f"unhandled command {ns.command!r}")
    except Exception as exc:  # uniform nonzero exit with a message
        print(f"error: {exc}", file=sys.stderr)
        return 1


def replay(manifest_path, out_override=None) -> int:
    """Re-execute a recorded run; outputs land in ``out_override`` if given."""
    from .train import TrainConfig

    m = RunManifest.read(manifest_path)
    a = m.args
    out = out_override or a.get("out")
    if m.command == "train":
        cfg_values = {attr: cast(a[key]) for key, (attr, cast) in CONFIG_FIELDS.items()}
        return cmd_train(TrainConfig(**cfg_values).validate(), a["data"], out)
    if m.command == "embed":
        return cmd_embed(a["checkpoint"], a["data"], out)
    if m.command == "probe":
        return cmd_probe(a["embeddings"], a["data"], _parse_ratio_list(a["ratios"]),
                         int(a["seed"]), out, float(a["lr"]), float(a["l2"]),
                         int(a["max_epochs"]), int(a["patience"]))
    if m.command == "sweep":
        return cmd_sweep(a["embeddings"], a["data"], _parse_ratio_list(a["ratios"]),
                         int(a["repeats"]), int(a["seed"]), out, int(a["probe_epochs"]))
    if m.command == "sbm":
        return cmd_sbm(int(a["blocks"]), int(a["per_block"]), float(a["p_in"]),
                       float(a["p_out"]), int(a["feat_dim"]), float(a["feat_shift"]),
                       int(a["seed"]), out)
    raise ValueError(f"manifest command {m.command!r} cannot be replayed")


def _apply_thread_cap():
    n = os.environ.get("IGCL_THREADS", "1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "VECLIB_MAXIMUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, n)


def main():
    _apply_thread_cap()
    sys.exit(dispatch(sys.argv[1:]))
