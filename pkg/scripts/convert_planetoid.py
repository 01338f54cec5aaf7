#!/usr/bin/env python3
"""Convert a Planetoid citation dataset (Cora, Citeseer, Pubmed) into a canonical dataset directory.

Expected inputs: the ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index} files of
the Planetoid release, plus the ten full-supervised split files
<name>_split_0.6_0.2_<k>.npz (train_mask / val_mask / test_mask) used by the
Geom-GCN / GCNII benchmark code. Node order follows the usual loader: training
block then test block, with the test rows permuted back to their index order.

Usage:
    python scripts/convert_planetoid.py --raw planetoid/data --splits geom-gcn/splits --name cora --out data/cora
"""

import argparse
import pickle
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from fdgatii.graph_data import Graph, Split, SplitSet, check_split, write_dataset


def _load(raw: Path, name: str, part: str):
    with open(raw / f"ind.{name}.{part}", "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def read_planetoid(raw: Path, name: str):
    x, y, tx, ty, allx, ally, graph = (_load(raw, name, p) for p in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_idx = np.loadtxt(raw / f"ind.{name}.test.index", dtype=np.int64)
    test_sorted = np.sort(test_idx)
    if name == "citeseer":
        # some test nodes are isolated and missing from tx/ty; pad them with zero rows
        full = np.arange(test_sorted.min(), test_sorted.max() + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[test_sorted - test_sorted.min(), :] = tx
        tx = tx_ext
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[test_sorted - test_sorted.min(), :] = ty
        ty = ty_ext
    features = sp.vstack((allx, tx)).tolil()
    features[test_idx, :] = features[test_sorted, :]
    labels = np.vstack((ally, ty))
    labels[test_idx, :] = labels[test_sorted, :]
    pairs = [(int(s), int(d)) for s, nbrs in graph.items() for d in nbrs]
    raw_lines = len(pairs)
    return np.asarray(features.todense(), dtype=np.float64), labels.argmax(1), np.array(pairs), raw_lines


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
    ap.add_argument("--raw", required=True, help="directory with the ind.<name>.* files")
    ap.add_argument("--splits", required=True, help="directory with <name>_split_0.6_0.2_<k>.npz")
    ap.add_argument("--name", required=True, choices=["cora", "citeseer", "pubmed"])
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    x, y, pairs, raw_lines = read_planetoid(Path(args.raw), args.name)
    g = Graph.from_edges(x, y, pairs, name=args.name)
    g.meta["raw_edge_lines"] = raw_lines
    print(write_dataset(g, read_splits(Path(args.splits), args.name, g.n), args.out))


if __name__ == "__main__":
    main()
