"""Graphs, canonical dataset files, self-loop / normalization preprocessing,
homophily and train/val/test splits.

Canonical on-disk format (UTF-8, decimal, 0-based):

* features file: ``node_id<TAB>f1,f2,...,fd<TAB>label`` per node
* edges file: ``src<TAB>dst`` per edge (read as undirected)
* splits file: one split per line, ``train|val|test`` with comma-separated indices
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import IntegrityError, ParseError

log = logging.getLogger(__name__)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class EdgeIndex:
    """Directed COO edge list, sorted by (dst, src)."""

    src: np.ndarray
    dst: np.ndarray

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.int64)
        dst = np.asarray(self.dst, dtype=np.int64)
        if src.shape != dst.shape or src.ndim != 1:
            raise IntegrityError("src and dst must be 1-D arrays of equal length")
        object.__setattr__(self, "src", _frozen(src))
        object.__setattr__(self, "dst", _frozen(dst))

    @classmethod
    def from_pairs(cls, src, dst, n: int) -> "EdgeIndex":
        """Validate endpoints, drop duplicate pairs and sort by (dst, src)."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
            raise IntegrityError(f"edge endpoint outside [0, {n})")
        key = np.unique(dst * n + src)
        return cls(key % n, key // n)

    def __len__(self) -> int:
        return int(self.src.shape[0])

    @property
    def num_edges(self) -> int:
        return len(self)

    def has_self_loops(self) -> bool:
        return bool(np.any(self.src == self.dst))

    def validate(self, n: int) -> None:
        if len(self) and (min(self.src.min(), self.dst.min()) < 0 or max(self.src.max(), self.dst.max()) >= n):
            raise IntegrityError(f"edge endpoint outside [0, {n})")
        key = self.dst * n + self.src
        if np.unique(key).size != key.size:
            raise IntegrityError("duplicate (src, dst) pairs")


@dataclass(frozen=True, eq=False)
class Graph:
    features: np.ndarray
    labels: np.ndarray
    edges: EdgeIndex
    num_classes: int
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64)
        if feats.ndim != 2:
            raise IntegrityError(f"features must be N x d, got shape {feats.shape}")
        n = feats.shape[0]
        if labels.shape != (n,):
            raise IntegrityError(f"labels must have length {n}, got {labels.shape}")
        if np.isnan(feats).any():
            raise IntegrityError("feature matrix contains NaN")
        if n and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise IntegrityError(f"labels outside [0, {self.num_classes})")
        self.edges.validate(n)
        if self.edges.has_self_loops():
            raise IntegrityError("base graph must not contain self-loops")
        fwd = self.edges.dst * n + self.edges.src
        rev = self.edges.src * n + self.edges.dst
        if not np.array_equal(np.sort(fwd), np.sort(rev)):
            raise IntegrityError("edge list is not symmetric")
        object.__setattr__(self, "features", _frozen(feats))
        object.__setattr__(self, "labels", _frozen(labels))

    @classmethod
    def from_edges(cls, features, labels, pairs: Iterable[tuple[int, int]] | np.ndarray,
                   num_classes: Optional[int] = None, name: str = "", meta: Optional[dict] = None) -> "Graph":
        """Build a graph from (possibly directed, duplicated, self-looped) pairs.

        Pairs are symmetrized, deduplicated, and self-loops are dropped.
        """
        labels = np.asarray(labels, dtype=np.int64)
        n = labels.shape[0]
        arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=np.int64).reshape(-1, 2)
        arr = arr[arr[:, 0] != arr[:, 1]]
        src = np.concatenate([arr[:, 0], arr[:, 1]])
        dst = np.concatenate([arr[:, 1], arr[:, 0]])
        edges = EdgeIndex.from_pairs(src, dst, n)
        if num_classes is None:
            num_classes = int(labels.max()) + 1 if n else 0
        return cls(features, labels, edges, num_classes, name, dict(meta or {}))

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])

    def undirected_pairs(self) -> np.ndarray:
        keep = self.edges.src < self.edges.dst
        pairs = np.stack([self.edges.src[keep], self.edges.dst[keep]], axis=1)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        return pairs[order]

    @property
    def num_undirected_edges(self) -> int:
        return len(self.edges) // 2

    def with_features(self, features: np.ndarray) -> "Graph":
        return Graph(features, self.labels, self.edges, self.num_classes, self.name, dict(self.meta))


@dataclass(frozen=True, eq=False)
class SelfLoopedView:
    base: Graph
    edges_with_loops: EdgeIndex
    degrees: np.ndarray

    @property
    def n(self) -> int:
        return self.base.n


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """Symmetrically normalized self-looped adjacency in COO form."""

    row: np.ndarray
    col: np.ndarray
    weight: np.ndarray
    n: int

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.weight, (self.row, self.col)), shape=(self.n, self.n))

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()


def add_self_loops(g) -> SelfLoopedView:
    if isinstance(g, SelfLoopedView) or (isinstance(g, EdgeIndex) and g.has_self_loops()):
        raise IntegrityError("self-loops already present; add_self_loops is not idempotent")
    if not isinstance(g, Graph):
        raise TypeError(f"add_self_loops expects a Graph, got {type(g).__name__}")
    n = g.n
    loops = np.arange(n, dtype=np.int64)
    edges = EdgeIndex.from_pairs(np.concatenate([g.edges.src, loops]),
                                 np.concatenate([g.edges.dst, loops]), n)
    degrees = np.bincount(g.edges.dst, minlength=n).astype(np.int64) + 1
    return SelfLoopedView(g, edges, _frozen(degrees))


def normalized_adjacency(v: SelfLoopedView) -> NormalizedAdjacency:
    e = v.edges_with_loops
    if not isinstance(v, SelfLoopedView) or int(np.sum(e.src == e.dst)) != v.n:
        raise IntegrityError("normalized_adjacency needs a self-looped view")
    d = v.degrees.astype(np.float64)
    w = 1.0 / np.sqrt(d[e.dst] * d[e.src])
    return NormalizedAdjacency(e.dst, e.src, _frozen(w), v.n)


def homophily(g: Graph) -> float:
    """Fraction of undirected non-loop edges joining same-label endpoints."""
    pairs = g.undirected_pairs()
    if pairs.shape[0] == 0:
        raise ValueError("homophily is undefined for a graph with no edges")
    same = g.labels[pairs[:, 0]] == g.labels[pairs[:, 1]]
    return float(same.mean())


def row_normalize(features: np.ndarray) -> np.ndarray:
    """Scale each row to unit L1 norm; all-zero rows stay zero."""
    s = np.abs(features).sum(axis=1, keepdims=True)
    return features / np.where(s == 0, 1.0, s)


# ----------------------------------------------------------------- file IO

def _fmt(x: float) -> str:
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def load_graph(features_path, edges_path, name: str = "") -> Graph:
    features_path, edges_path = Path(features_path), Path(edges_path)
    for p in (features_path, edges_path):
        if not p.is_file():
            raise FileNotFoundError(f"no such file: {p}")
    ids: dict[str, int] = {}
    rows: list[list[float]] = []
    labels: list[int] = []
    width = None
    with open(features_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(features_path, line_no, f"expected 3 tab-separated fields, got {len(parts)}")
            node, feats, label = parts
            try:
                vec = [float(v) for v in feats.split(",")] if feats else []
                lab = int(label)
            except ValueError as exc:
                raise ParseError(features_path, line_no, str(exc)) from None
            if lab < 0:
                raise ParseError(features_path, line_no, f"negative label {lab}")
            if width is None:
                width = len(vec)
            elif len(vec) != width:
                raise ParseError(features_path, line_no, f"expected {width} features, got {len(vec)}")
            if node in ids:
                raise IntegrityError(f"{features_path}:{line_no}: duplicate node id {node!r}")
            ids[node] = len(ids)
            rows.append(vec)
            labels.append(lab)
    pairs = []
    raw_lines = 0
    with open(edges_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(edges_path, line_no, f"expected 2 tab-separated fields, got {len(parts)}")
            for end in parts:
                if end not in ids:
                    raise IntegrityError(f"{edges_path}:{line_no}: dangling edge endpoint {end!r}")
            pairs.append((ids[parts[0]], ids[parts[1]]))
            raw_lines += 1
    feats = np.array(rows, dtype=np.float64).reshape(len(rows), width or 0)
    meta = {"raw_edge_lines": raw_lines,
            "raw_self_loops": sum(1 for a, b in pairs if a == b)}
    return Graph.from_edges(feats, labels, np.array(pairs, dtype=np.int64).reshape(-1, 2),
                            name=name or features_path.parent.name, meta=meta)


def save_graph(g: Graph, features_path, edges_path) -> None:
    with open(features_path, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(g.n):
            fh.write(f"{i}\t{','.join(map(_fmt, g.features[i]))}\t{int(g.labels[i])}\n")
    with open(edges_path, "w", encoding="utf-8", newline="\n") as fh:
        for a, b in g.undirected_pairs():
            fh.write(f"{a}\t{b}\n")


# ------------------------------------------------------------------ splits

@dataclass(frozen=True, eq=False)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "val", "test"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=np.int64)))

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)


@dataclass(frozen=True, eq=False)
class SplitSet:
    splits: tuple[Split, ...]

    def __len__(self) -> int:
        return len(self.splits)

    def __getitem__(self, i: int) -> Split:
        return self.splits[i]

    def __iter__(self):
        return iter(self.splits)


def check_split(s: Split, n: int, where: str = "") -> None:
    parts = np.concatenate([s.train, s.val, s.test])
    if parts.size and (parts.min() < 0 or parts.max() >= n):
        raise IntegrityError(f"{where}split index outside [0, {n})")
    if np.unique(parts).size != parts.size:
        raise IntegrityError(f"{where}train/val/test indices overlap or repeat")
    if parts.size != n:
        raise IntegrityError(f"{where}split covers {parts.size} of {n} nodes")


def generate_splits(g: Graph, seed: int, n_splits: int = 10,
                    fractions: tuple[float, float] = (0.6, 0.2)) -> SplitSet:
    """Label-stratified 60/20/20 partitions.

    Nodes are shuffled within each class and interleaved by their relative
    position in the class, so every prefix of the ordering is close to the
    global label distribution; the prefix is cut at the global target sizes.
    """
    rng = np.random.default_rng(seed)
    n = g.n
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    out = []
    for _ in range(n_splits):
        position = np.empty(n)
        for c in np.unique(g.labels):
            members = np.flatnonzero(g.labels == c)
            rng.shuffle(members)
            position[members] = (np.arange(members.size) + rng.random()) / members.size
        order = np.lexsort((rng.random(n), position))
        out.append(Split(np.sort(order[:n_train]), np.sort(order[n_train:n_train + n_val]),
                         np.sort(order[n_train + n_val:])))
    return SplitSet(tuple(out))


def load_splits(path, n: int) -> SplitSet:
    path = Path(path)
    splits = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("|")
            if len(parts) != 3:
                raise ParseError(path, line_no, "expected train|val|test")
            try:
                idx = [np.array([int(v) for v in p.split(",") if v != ""], dtype=np.int64) for p in parts]
            except ValueError as exc:
                raise ParseError(path, line_no, str(exc)) from None
            s = Split(*idx)
            check_split(s, n, f"{path}:{line_no}: ")
            tr, va, te = (x / n for x in s.sizes())
            if abs(tr - 0.6) > 0.05 or abs(va - 0.2) > 0.05:
                log.warning("%s:%d: split proportions %.2f/%.2f/%.2f differ from 60/20/20",
                            path, line_no, tr, va, te)
            splits.append(s)
    if not splits:
        raise ParseError(path, 0, "no splits found")
    return SplitSet(tuple(splits))


def save_splits(splits: SplitSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in splits:
            fh.write("|".join(",".join(str(int(i)) for i in part) for part in (s.train, s.val, s.test)) + "\n")


# ------------------------------------------------------- dataset directory

FEATURES_FILE = "features.tsv"
EDGES_FILE = "edges.tsv"
SPLITS_FILE = "splits.txt"
REPORT_FILE = "report.json"


@dataclass
class Dataset:
    graph: Graph
    splits: SplitSet
    path: Optional[Path] = None

    @property
    def name(self) -> str:
        return self.graph.name


def integrity_report(g: Graph) -> dict:
    return {
        "name": g.name,
        "nodes": g.n,
        "undirected_edges": g.num_undirected_edges,
        "raw_edge_lines": g.meta.get("raw_edge_lines"),
        "features": g.num_features,
        "classes": g.num_classes,
        "homophily": round(homophily(g), 6) if len(g.edges) else None,
    }


def write_dataset(g: Graph, splits: SplitSet, out_dir) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for s in splits:
        check_split(s, g.n)
    save_graph(g, out_dir / FEATURES_FILE, out_dir / EDGES_FILE)
    save_splits(splits, out_dir / SPLITS_FILE)
    report = integrity_report(g)
    report["splits"] = len(splits)
    (out_dir / REPORT_FILE).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return report


def load_dataset(directory, name: str = "") -> Dataset:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {directory}")
    report_path = directory / REPORT_FILE
    if not name and report_path.is_file():
        name = json.loads(report_path.read_text(encoding="utf-8")).get("name") or ""
    g = load_graph(directory / FEATURES_FILE, directory / EDGES_FILE, name=name or directory.name)
    if report_path.is_file():
        raw = json.loads(report_path.read_text(encoding="utf-8")).get("raw_edge_lines")
        if raw is not None:
            g.meta["raw_edge_lines"] = raw
    splits = load_splits(directory / SPLITS_FILE, g.n)
    return Dataset(g, splits, directory)


# --------------------------------------------------------------- synthetic

def make_synthetic(n: int = 60, num_features: int = 20, num_classes: int = 3, avg_degree: float = 3.0,
                   edge_homophily: float = 0.8, signal: float = 2.0, seed: int = 0,
                   binary: bool = False, name: str = "synthetic") -> Graph:
    """Random labelled graph with controllable edge homophily and class-dependent features.

    With ``binary`` the features are sparse 0/1 bag-of-words style vectors.
    """
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % num_classes
    rng.shuffle(labels)
    centers = rng.normal(size=(num_classes, num_features))
    if binary:
        probs = 1.0 / (1.0 + np.exp(-(centers[labels] * signal - 3.0)))
        feats = (rng.random((n, num_features)) < probs).astype(np.float64)
    else:
        feats = centers[labels] * signal + rng.normal(size=(n, num_features))
    m = max(1, int(round(avg_degree * n / 2)))
    pairs = set()
    by_class = [np.flatnonzero(labels == c) for c in range(num_classes)]
    tries = 0
    while len(pairs) < m and tries < 50 * m:
        tries += 1
        i = int(rng.integers(n))
        if rng.random() < edge_homophily:
            pool = by_class[labels[i]]
        else:
            pool = np.flatnonzero(labels != labels[i])
        if pool.size == 0:
            continue
        j = int(pool[rng.integers(pool.size)])
        if i != j:
            pairs.add((min(i, j), max(i, j)))
    return Graph.from_edges(feats, labels, np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2),
                            num_classes=num_classes, name=name)


def dense_adjacency(g: Graph, self_loops: bool = False) -> np.ndarray:
    a = np.zeros((g.n, g.n))
    a[g.edges.dst, g.edges.src] = 1.0
    if self_loops:
        a += np.eye(g.n)
    return a


def permute_graph(g: Graph, perm: Sequence[int]) -> Graph:
    """Relabel node ``i`` as ``perm[i]``."""
    perm = np.asarray(perm, dtype=np.int64)
    inv = np.argsort(perm)
    pairs = np.stack([perm[g.edges.src], perm[g.edges.dst]], axis=1)
    return Graph.from_edges(g.features[inv], g.labels[inv], pairs, num_classes=g.num_classes, name=g.name)
