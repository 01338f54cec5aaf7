"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError, FDGATIIError, NumericError
from .graph_data import (Dataset, check_split, generate_splits, homophily, integrity_report, load_dataset,
                         load_graph, load_splits, write_dataset)
from .layers import Variant
from .model import PRESET_TABLE, ModelConfig, build_from_table, parameter_count
from .training import (DEFAULT_DEPTHS, ablation_suite, depth_sweep, evaluate_dataset, timing_harness,
                       train_one, write_results, ExperimentReport)

log = logging.getLogger("fdgatii")


# ------------------------------------------------------------------ config

def _coerce(field: dataclasses.Field, raw: str):
    name = field.name
    try:
        if name == "variant":
            return Variant.parse(raw)
        if name == "weight_decay":
            parts = [float(v) for v in raw.split(",")]
            if len(parts) == 1:
                parts = parts * 2
            return tuple(parts)
        if name == "arch":
            return raw
        default = field.default
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from None
    return raw


def apply_overrides(config: ModelConfig, items: Sequence[str]) -> ModelConfig:
    fields = {f.name: f for f in dataclasses.fields(ModelConfig)}
    aliases = {"lambda": "lam", "layers": "num_layers", "hidden": "hidden_dim", "wd": "weight_decay"}
    changes = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = aliases.get(key.strip(), key.strip())
        if key not in fields:
            raise ConfigError(f"unknown config key {key!r}; known: {sorted(fields)}")
        changes[key] = _coerce(fields[key], raw.strip())
    return config.replace(**changes)


def resolve_config(args, dataset_name: str) -> ModelConfig:
    if args.preset == "paper":
        cfg = build_from_table(dataset_name)
    else:
        cfg = ModelConfig()
    cfg = apply_overrides(cfg, args.set or [])
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def resolve_dataset(name_or_path: str, data_root: Optional[str]) -> Path:
    p = Path(name_or_path)
    if p.is_dir():
        return p
    root = Path(data_root or os.environ.get("FDGATII_DATA", "data"))
    candidate = root / name_or_path
    if candidate.is_dir():
        return candidate
    raise DataError(f"dataset {name_or_path!r} not found (looked at {p} and {candidate}); "
                    f"prepare it with 'fdgatii prepare'")


def _dataset_name(ds: Dataset) -> str:
    return ds.name.lower()


def _out_dir(args, ds: Dataset, command: str) -> Path:
    if args.out:
        return Path(args.out)
    return Path("results") / _dataset_name(ds) / command


def _split_ids(args, ds: Dataset):
    if not getattr(args, "split_ids", None):
        return None
    ids = [int(v) for v in args.split_ids.split(",")]
    if any(i < 0 or i >= len(ds.splits) for i in ids):
        raise ConfigError(f"split ids must be in [0, {len(ds.splits)})")
    return ids


def _load(args):
    """Validate configuration first, then read data."""
    path = resolve_dataset(args.dataset, args.data_root)
    name = Path(args.dataset).name.lower()
    report = path / "report.json"
    if report.is_file():
        name = (json.loads(report.read_text(encoding="utf-8")).get("name") or name).lower()
    cfg = resolve_config(args, name)
    ds = load_dataset(path, name)
    return ds, cfg


def _fmt_report(label: str, rep: ExperimentReport) -> str:
    return f"{label:<24} {100 * rep.mean:6.2f} ± {100 * rep.std:5.2f}  (n={len(rep.runs)})"


# ---------------------------------------------------------------- commands

def cmd_prepare(args) -> int:
    g = load_graph(args.features, args.edges, name=args.name or "")
    if args.splits and args.gen_splits is not None:
        raise ConfigError("use either --splits or --gen-splits, not both")
    if args.splits:
        splits = load_splits(args.splits, g.n)
    elif args.gen_splits is not None:
        splits = generate_splits(g, args.gen_splits)
    else:
        raise ConfigError("prepare needs --splits FILE or --gen-splits SEED")
    out = Path(args.out)
    report = write_dataset(g, splits, out)
    print(f"prepared {out}")
    for k in ("name", "nodes", "undirected_edges", "raw_edge_lines", "features", "classes", "homophily", "splits"):
        print(f"  {k:<17} {report[k]}")
    return 0


def cmd_homophily(args) -> int:
    path = resolve_dataset(args.dataset, args.data_root)
    ds = load_dataset(path)
    h = homophily(ds.graph)
    print(f"{_dataset_name(ds)} homophily {h:.4f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rep = integrity_report(ds.graph)
        (out / "homophily.json").write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def cmd_train(args) -> int:
    ds, cfg = _load(args)
    if not 0 <= args.split < len(ds.splits):
        raise ConfigError(f"--split must be in [0, {len(ds.splits)})")
    result, model = train_one(ds.graph, ds.splits[args.split], cfg, split_id=args.split, return_model=True)
    rep = ExperimentReport(ds.graph.name, cfg.to_dict(), [result])
    out = _out_dir(args, ds, "train")
    write_results(rep, out)
    from .model import save_checkpoint
    save_checkpoint(model, out / "model.npz")
    print(f"{_dataset_name(ds)} split {args.split}: test accuracy {100 * result.test_accuracy:.2f}% "
          f"(best val {100 * result.best_val_accuracy:.2f}% at epoch {result.best_epoch}, "
          f"{result.epochs_run} epochs, {parameter_count(model)} parameters)")
    return 0


def cmd_eval(args) -> int:
    ds, cfg = _load(args)
    rep = evaluate_dataset(ds.graph, ds.splits, cfg, args.parallel_splits, _split_ids(args, ds))
    write_results(rep, _out_dir(args, ds, "eval"))
    for r in rep.runs:
        print(f"  split {r.split_id}: {100 * r.test_accuracy:6.2f}  ({r.epochs_run} epochs)")
    print(_fmt_report(f"{_dataset_name(ds)} {cfg.arch}/{cfg.variant.value}/L{cfg.num_layers}", rep))
    return 0


def cmd_ablate(args) -> int:
    ds, cfg = _load(args)
    out = _out_dir(args, ds, "ablate")
    reports = ablation_suite(ds.graph, ds.splits, cfg, args.parallel_splits, _split_ids(args, ds))
    rows = []
    for (variant, layers), rep in reports.items():
        write_results(rep, out, f"{variant}_L{layers}")
        rows.append({"variant": variant, "layers": layers, "mean": rep.mean, "std": rep.std})
        print(_fmt_report(f"{variant} L{layers}", rep))
    (out / "ablation.json").write_text(json.dumps({"schema_version": 1, "dataset": _dataset_name(ds),
                                                   "base_config": cfg.to_dict(), "arms": rows},
                                                  indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def cmd_depth(args) -> int:
    ds, cfg = _load(args)
    depths = [int(d) for d in args.depths.split(",")] if args.depths else list(DEFAULT_DEPTHS)
    if min(depths) < 1:
        raise ConfigError("depths must be >= 1")
    out = _out_dir(args, ds, "depth")
    reports = depth_sweep(ds.graph, ds.splits, cfg, depths, args.parallel_splits, _split_ids(args, ds))
    rows = []
    for d, rep in reports.items():
        write_results(rep, out, f"depth_{d}")
        rows.append({"layers": d, "mean": rep.mean, "std": rep.std})
        print(_fmt_report(f"layers={d}", rep))
    (out / "depth.json").write_text(json.dumps({"schema_version": 1, "dataset": _dataset_name(ds),
                                                "base_config": cfg.to_dict(), "depths": rows},
                                               indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def cmd_bench(args) -> int:
    ds, cfg = _load(args)
    if args.n_inference < 1:
        raise ConfigError("--n-inference must be >= 1")
    out = _out_dir(args, ds, "bench")
    out.mkdir(parents=True, exist_ok=True)
    split = ds.splits[args.split]
    rows = {}
    arms = [("fdgatii", cfg)]
    if args.compare_gcnii:
        # informational only: GCNII-style propagation with the same width and depth
        arms.append(("gcnii", cfg.replace(arch="gcnii",
                                          variant=cfg.variant if cfg.variant is not Variant.NONE else Variant.EQ3)))
    for label, c in arms:
        t = timing_harness(ds.graph, split, c, args.n_inference, warmup=not args.no_warmup)
        rows[label] = {"train_ms": t.train_ms, "mean_inference_ms": t.mean_infer_ms,
                       "std_inference_ms": t.std_infer_ms, "relative_std": t.relative_std,
                       "n_inference": t.n_inference, "warmup": t.warmup, "config": c.to_dict()}
        print(f"{label:<8} train {t.train_ms:10.1f} ms   inference {t.mean_infer_ms:8.3f} ± {t.std_infer_ms:.3f} ms")
    (out / "bench.json").write_text(json.dumps({"schema_version": 1, "dataset": _dataset_name(ds), "timings": rows},
                                               indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdgatii", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="convert raw files into a canonical dataset directory")
    p.add_argument("--features", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--splits")
    p.add_argument("--gen-splits", type=int, metavar="SEED")
    p.add_argument("--name")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prepare)

    def common(sp, parallel=True):
        sp.add_argument("--dataset", required=True, help="dataset name under --data-root, or a directory")
        sp.add_argument("--data-root", help="defaults to $FDGATII_DATA or ./data")
        sp.add_argument("--preset", choices=["paper", "default"], default="default")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override (repeatable)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        if parallel:
            sp.add_argument("--parallel-splits", type=int, default=1)
            sp.add_argument("--split-ids", help="comma-separated subset of split ids")

    p = sub.add_parser("train", help="train on one split")
    common(p, parallel=False)
    p.add_argument("--split", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="10-split evaluation")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="with/without initial residual + identity mapping, 1 and 2 layers")
    common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("depth", help="accuracy versus number of layers")
    common(p)
    p.add_argument("--depths", help="comma-separated, default 1,2,4,8,16,32")
    p.set_defaults(func=cmd_depth)

    p = sub.add_parser("bench", help="training and inference timing")
    common(p, parallel=False)
    p.add_argument("--split", type=int, default=0)
    p.add_argument("--n-inference", type=int, default=1000)
    p.add_argument("--no-warmup", action="store_true")
    p.add_argument("--compare-gcnii", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("homophily", help="edge homophily of a prepared dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--data-root")
    p.add_argument("--out")
    p.set_defaults(func=cmd_homophily)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except FDGATIIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
