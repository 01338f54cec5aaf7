#!/usr/bin/env python3
"""Convert a Geom-GCN style heterophily dataset into a canonical dataset directory.

Expected inputs (as distributed with the Geom-GCN code release):

    new_data/<name>/out1_node_feature_label.txt   node_id <TAB> f1,f2,... <TAB> label
    new_data/<name>/out1_graph_edges.txt          node_id <TAB> node_id
    splits/<name>_split_0.6_0.2_<k>.npz           train_mask / val_mask / test_mask, k = 0..9

Usage:
    python scripts/convert_geom_gcn.py --root geom-gcn --name texas --out data/texas
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from fdgatii.graph_data import Graph, Split, SplitSet, check_split, write_dataset


def read_nodes(path: Path):
    ids, feats, labels = [], [], []
    with open(path, encoding="utf-8") as fh:
        next(fh)  # header
        for line in fh:
            node, f, label = line.rstrip("\n").split("\t")
            ids.append(int(node))
            feats.append(np.array(f.split(","), dtype=np.float64))
            labels.append(int(label))
    order = np.argsort(ids)
    if not np.array_equal(np.asarray(ids)[order], np.arange(len(ids))):
        sys.exit(f"{path}: node ids are not 0..N-1")
    if len({len(f) for f in feats}) != 1:
        sys.exit(f"{path}: rows have different feature widths")
    return np.stack(feats)[order], np.asarray(labels)[order]


def read_edges(path: Path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        next(fh)
        return np.array([[int(v) for v in line.split()] for line in fh if line.strip()], dtype=np.int64)


def read_splits(split_dir: Path, name: str, n: int) -> SplitSet:
    out = []
    for k in range(10):
        z = np.load(split_dir / f"{name}_split_0.6_0.2_{k}.npz")
        s = Split(np.flatnonzero(z["train_mask"]), np.flatnonzero(z["val_mask"]), np.flatnonzero(z["test_mask"]))
        check_split(s, n, where=f"split {k}: ")
        out.append(s)
    return SplitSet(tuple(out))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--root", required=True, help="directory holding new_data/ and splits/")
    ap.add_argument("--name", required=True)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    root = Path(args.root)
    x, y = read_nodes(root / "new_data" / args.name / "out1_node_feature_label.txt")
    pairs = read_edges(root / "new_data" / args.name / "out1_graph_edges.txt")
    g = Graph.from_edges(x, y, pairs, name=args.name)
    g.meta["raw_edge_lines"] = len(pairs)
    report = write_dataset(g, read_splits(root / "splits", args.name, g.n), args.out)
    print(report)


if __name__ == "__main__":
    main()
