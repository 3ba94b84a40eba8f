"""Command-line entry point.

Subcommands: ingest, verify, eval, sweep-ref, sweep-threshold, hist,
fixture. Reports are JSON documents embedding the resolved configuration,
engine version and a timestamp (the one field excluded from determinism
comparisons); optional CSV exports carry the curves. Human-readable
diagnostics go to stderr, data to stdout or files.

Exit codes: 0 success (a Fake verdict is data, not an error), 1
operational failure, 2 usage error. PVE_OUT_DIR sets the default output
directory for report files.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .fixture import synthetic_store
from .metrics import CostModel, MetricError
from .protocols import (
    DEFAULT_BINS,
    DEFAULT_GRID_POINTS,
    DEFAULT_REPETITIONS,
    DEFAULT_SWEEP_SIZES,
    ProtocolError,
    default_threshold_grid,
    evaluate,
    group_by_dataset,
    histogram,
    reference_sweep,
    score_all,
    threshold_sweep,
)
from .similarity import DEFAULT_THRESHOLD, decide, max_similarity
from .store import (
    EmbeddingStore,
    StoreError,
    ingest_binary,
    ingest_jsonl,
    reference_set,
    subsample_reference,
    write_binary,
    write_jsonl,
)

OUT_DIR_ENV = "PVE_OUT_DIR"


def _log(message):
    print(message, file=sys.stderr)


def _load_store(path, fmt="auto") -> EmbeddingStore:
    path = Path(path)
    if fmt == "auto":
        fmt = "jsonl" if path.suffix in (".jsonl", ".json") else "binary"
        if path.suffix in (".pve", ".bin"):
            fmt = "binary"
    return ingest_jsonl(path) if fmt == "jsonl" else ingest_binary(path)


def _out_path(args, default_name):
    if getattr(args, "out", None):
        return Path(args.out)
    out_dir = os.environ.get(OUT_DIR_ENV)
    if out_dir:
        return Path(out_dir) / default_name
    return None  # stdout


def _config_echo(args):
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg["backend"] = kernels.active_backend()
    return cfg


def _envelope(command, args, body):
    doc = {
        "engine_version": __version__,
        "command": command,
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "config": _config_echo(args),
    }
    doc.update(body)
    return doc


def _emit_json(doc, path):
    text = json.dumps(doc, indent=2)
    if path is None:
        print(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n", encoding="utf-8")
        _log(f"wrote {path}")


def _write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    _log(f"wrote {path}")


def _cost_from_args(args) -> CostModel:
    return CostModel(c_miss=args.c_miss, c_fa=args.c_fa,
                     p_target=args.p_target, p_spoof=args.p_spoof)


def _add_cost_args(parser):
    parser.add_argument("--c-miss", type=float, default=1.0,
                        help="miss cost (default 1, community convention)")
    parser.add_argument("--c-fa", type=float, default=10.0,
                        help="false-alarm cost (default 10)")
    parser.add_argument("--p-target", type=float, default=0.95,
                        help="bona fide prior (default 0.95)")
    parser.add_argument("--p-spoof", type=float, default=0.05,
                        help="spoof prior (default 0.05)")


def _add_store_arg(parser):
    parser.add_argument("--store", required=True, help="embedding store path")
    parser.add_argument("--store-format", choices=("auto", "jsonl", "binary"),
                        default="auto", help="store format (default: by extension)")


# ---------------------------------------------------------------- commands


def cmd_ingest(args):
    store = _load_store(args.input, args.input_format)
    if args.to_binary:
        write_binary(store, args.to_binary)
        _log(f"wrote binary store {args.to_binary}")
    if args.to_jsonl:
        write_jsonl(store, args.to_jsonl)
        _log(f"wrote JSONL store {args.to_jsonl}")
    print(json.dumps(store.stats(), indent=2))
    return 0


def _load_external_embedding(path):
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if isinstance(obj, dict):
        obj = obj.get("embedding")
    if not isinstance(obj, list):
        raise StoreError(
            f"{path}: expected a JSON array of numbers or an object with an "
            f"'embedding' key"
        )
    return np.asarray(obj, dtype=np.float64)


def cmd_verify(args):
    store = _load_store(args.store, args.store_format)
    ref = reference_set(store, args.identity)
    utterance_id = None
    if args.utterance:
        utterance_id = args.utterance
        row = store.row(args.utterance)
        test = store.matrix64[row]
        rec = store.record_at(row)
        if rec.label.value == "bonafide" and args.utterance in ref.utterance_ids:
            keep = [i for i, u in enumerate(ref.utterance_ids) if u != args.utterance]
            if not keep:
                raise StoreError(
                    "reference set empty after leave-one-out; enroll more "
                    f"bona fide utterances for {args.identity!r}"
                )
            vecs = ref.vectors[keep]
            from .store import ReferenceSet

            ref = ReferenceSet(args.identity,
                               tuple(ref.utterance_ids[i] for i in keep), vecs)
    else:
        test = _load_external_embedding(args.embedding_file)
    stat = max_similarity(test, ref)
    verdict = decide(stat, args.threshold)
    doc = _envelope("verify", args, {
        "utterance_id": utterance_id,
        "claimed_identity": args.identity,
        "decision": verdict.decision.value,
        "statistic": stat.value,
        "argmax_reference": stat.argmax_reference,
        "threshold": args.threshold,
        "reference_size": len(ref),
    })
    _emit_json(doc, _out_path(args, "verify.json"))
    return 0


def cmd_eval(args):
    store = _load_store(args.store, args.store_format)
    cost = _cost_from_args(args)
    summary = evaluate(store, cost)
    doc = _envelope("eval", args, {"report": summary.to_dict()})
    _emit_json(doc, _out_path(args, "eval.json"))
    if args.trials_out:
        trials = score_all(store)
        path = Path(args.trials_out)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for t in trials:
                fh.write(json.dumps(t.to_dict()))
                fh.write("\n")
        _log(f"wrote {path}")
    return 0


def cmd_sweep_ref(args):
    store = _load_store(args.store, args.store_format)
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    result = reference_sweep(store, sizes, repetitions=args.repetitions, seed=args.seed)
    doc = _envelope("sweep-ref", args, {"sweep": result.to_dict()})
    _emit_json(doc, _out_path(args, "sweep_ref.json"))
    if args.csv:
        rows = [
            (k, m, s) for k, m, s in zip(result.sizes, result.means, result.stds)
        ]
        _write_csv(args.csv, ("size", "mean_auc", "std_auc"), rows)
    return 0


def cmd_sweep_threshold(args):
    store = _load_store(args.store, args.store_format)
    trials = score_all(store, reference_size=args.ref_size, seed=args.seed)
    grid = default_threshold_grid(points=args.grid_points, full_range=args.full_range)
    result = threshold_sweep(trials, grid)
    doc = _envelope("sweep-threshold", args, {"sweep": result.to_dict()})
    _emit_json(doc, _out_path(args, "sweep_threshold.json"))
    if args.csv:
        rows = list(zip(result.thresholds, result.accuracies))
        _write_csv(args.csv, ("threshold", "accuracy"), rows)
    return 0


def cmd_hist(args):
    store = _load_store(args.store, args.store_format)
    trials = score_all(store, reference_size=args.ref_size, seed=args.seed)
    result = histogram(trials, bins=args.bins, reference_size=args.ref_size)
    doc = _envelope("hist", args, {"histogram": result.to_dict()})
    _emit_json(doc, _out_path(args, "hist.json"))
    if args.csv:
        rows = [
            (result.bin_edges[i], result.bin_edges[i + 1],
             result.real_counts[i], result.fake_counts[i])
            for i in range(len(result.real_counts))
        ]
        _write_csv(args.csv, ("bin_lo", "bin_hi", "real_count", "fake_count"), rows)
    return 0


def cmd_fixture(args):
    store = synthetic_store(
        n_identities=args.identities,
        bona_per_identity=args.bona,
        spoof_per_identity=args.spoof,
        dim=args.dim,
        seed=args.seed,
        spoof_shift=args.spoof_shift,
        within_scale=args.within_scale,
        dataset=args.dataset,
    )
    if args.format == "jsonl":
        write_jsonl(store, args.out)
    else:
        write_binary(store, args.out)
    _log(f"wrote fixture store {args.out}")
    print(json.dumps(store.stats(), indent=2))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pve",
        description="Identity-based audio deepfake verification over "
                    "pretrained-model embeddings",
    )
    parser.add_argument("--version", action="version", version=f"pve {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and convert embedding stores")
    p.add_argument("--input", required=True, help="JSONL or binary store")
    p.add_argument("--input-format", choices=("auto", "jsonl", "binary"), default="auto")
    p.add_argument("--to-binary", help="also write the store in binary format")
    p.add_argument("--to-jsonl", help="also write the store in JSONL format")
    p.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("verify", help="verify one utterance against an identity")
    _add_store_arg(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--utterance", help="utterance_id already in the store")
    group.add_argument("--embedding-file",
                       help="JSON file with an embedding array to test")
    p.add_argument("--identity", required=True, help="claimed identity")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                   help=f"decision threshold (default {DEFAULT_THRESHOLD})")
    p.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    p.add_argument("--out", help="write verdict JSON here instead of stdout")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("eval", help="full evaluation: EER / min t-DCF / AUC per dataset")
    _add_store_arg(p)
    _add_cost_args(p)
    p.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    p.add_argument("--out", help="report JSON path (default stdout or $PVE_OUT_DIR)")
    p.add_argument("--trials-out", help="also write per-trial scores as JSONL")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-ref", help="AUC vs reference-set size")
    _add_store_arg(p)
    p.add_argument("--sizes", default=",".join(str(s) for s in DEFAULT_SWEEP_SIZES),
                   help="comma-separated sizes (default %(default)s)")
    p.add_argument("--repetitions", type=int, default=DEFAULT_REPETITIONS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--csv", help="also write size,mean,std CSV")
    p.set_defaults(func=cmd_sweep_ref)

    p = sub.add_parser("sweep-threshold", help="accuracy vs decision threshold")
    _add_store_arg(p)
    p.add_argument("--grid-points", type=int, default=DEFAULT_GRID_POINTS)
    p.add_argument("--full-range", action="store_true",
                   help="sweep [-1, 1] instead of [0, 1]")
    p.add_argument("--ref-size", type=int, default=None,
                   help="subsample references to this size first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--csv", help="also write threshold,accuracy CSV")
    p.set_defaults(func=cmd_sweep_threshold)

    p = sub.add_parser("hist", help="per-class histograms of max-similarity scores")
    _add_store_arg(p)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--ref-size", type=int, default=None,
                   help="subsample references to this size first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--csv", help="also write per-bin counts CSV")
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("fixture", help="generate the synthetic embedding fixture")
    p.add_argument("--out", required=True, help="output store path")
    p.add_argument("--format", choices=("binary", "jsonl"), default="binary")
    p.add_argument("--identities", type=int, default=20)
    p.add_argument("--bona", type=int, default=300)
    p.add_argument("--spoof", type=int, default=100)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--spoof-shift", type=float, default=0.45)
    p.add_argument("--within-scale", type=float, default=1.75)
    p.add_argument("--dataset", default="synthetic")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fixture)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (StoreError, MetricError, ProtocolError, ValueError, OSError) as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
