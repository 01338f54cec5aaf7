"""Differentiable operations on :class:`Tensor`.

Dense ops cover everything the layer zoo needs (matmul, elementwise maps,
row-wise log-softmax, NLL).  Edge ops (gather / segment softmax / segment
weighted sum) express message passing over a COO edge list; their scatter
steps go through scipy CSR products so reductions have a fixed order.
"""

from __future__ import annotations

from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from ..errors import ShapeError
from .tensor import Tensor, active_tape


def _emit(values: np.ndarray, inputs, backward_fn, op: str) -> Tensor:
    needs = any(t.requires_grad for t in inputs)
    out = Tensor._wrap(values, needs)
    tape = active_tape()
    if needs and tape is not None:
        tape.record(out, inputs, backward_fn, op)
    return out


def _check_same(x: Tensor, y: Tensor, op: str) -> None:
    if x.shape != y.shape:
        raise ShapeError(f"{op}: shape mismatch {x.shape} vs {y.shape}")


def _as_index(idx, upper: int, what: str) -> np.ndarray:
    idx = np.asarray(idx)
    if idx.ndim != 1:
        raise ShapeError(f"{what} must be a 1-D integer array")
    if idx.size and not np.issubdtype(idx.dtype, np.integer):
        raise TypeError(f"{what} must hold integers, got {idx.dtype}")
    idx = idx.astype(np.int64, copy=False)
    if idx.size and (idx.min() < 0 or idx.max() >= upper):
        raise IndexError(f"{what} out of range [0, {upper})")
    return idx


def _scatter_matrix(seg: np.ndarray, n_segments: int, weights: Optional[np.ndarray] = None) -> sp.csr_matrix:
    """CSR matrix S (n_segments x E) with S[seg[k], k] = weights[k]."""
    e = seg.shape[0]
    data = np.ones(e) if weights is None else weights
    return sp.csr_matrix((data, (seg, np.arange(e))), shape=(n_segments, e))


# ---------------------------------------------------------------- dense ops

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    av, bv = a.values, b.values

    def backward(g):
        return (g @ bv.T if a.requires_grad else None,
                av.T @ g if b.requires_grad else None)

    return _emit(av @ bv, (a, b), backward, "matmul")


def add(x: Tensor, y: Tensor) -> Tensor:
    _check_same(x, y, "add")
    return _emit(x.values + y.values, (x, y), lambda g: (g, g), "add")


def sub(x: Tensor, y: Tensor) -> Tensor:
    _check_same(x, y, "sub")
    return _emit(x.values - y.values, (x, y), lambda g: (g, -g), "sub")


def mul(x: Tensor, y: Tensor) -> Tensor:
    _check_same(x, y, "mul")
    xv, yv = x.values, y.values
    return _emit(xv * yv, (x, y), lambda g: (g * yv, g * xv), "mul")


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return _emit(x.values * c, (x,), lambda g: (g * c,), "scale")


def add_row(x: Tensor, bias: Tensor) -> Tensor:
    """x + bias broadcast over rows; bias has shape (1, cols)."""
    if bias.shape != (1, x.cols):
        raise ShapeError(f"add_row: bias shape {bias.shape} incompatible with {x.shape}")
    return _emit(x.values + bias.values, (x, bias),
                 lambda g: (g, g.sum(axis=0, keepdims=True)), "add_row")


def relu(x: Tensor) -> Tensor:
    mask = x.values > 0
    return _emit(np.where(mask, x.values, 0.0), (x,), lambda g: (g * mask,), "relu")


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    mask = x.values > 0
    factor = np.where(mask, 1.0, slope)
    return _emit(x.values * factor, (x,), lambda g: (g * factor,), "leaky_relu")


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.values)
    return _emit(out, (x,), lambda g: (g * out,), "exp")


def dropout(x: Tensor, p: float, training: bool, rng: Union[np.random.Generator, int, None] = None) -> Tensor:
    """Inverted dropout: zero each entry with probability p, scale survivors by 1/(1-p).

    Identity when ``training`` is false or ``p == 0``.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return _emit(x.values * keep, (x,), lambda g: (g * keep,), "dropout")


def sum_all(x: Tensor) -> Tensor:
    ones = np.ones_like(x.values)
    return _emit(np.array([[x.values.sum()]]), (x,), lambda g: (ones * g[0, 0],), "sum_all")


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    if not 0 <= start <= stop <= x.rows:
        raise ShapeError(f"slice_rows: [{start}:{stop}] invalid for {x.rows} rows")
    shape = x.shape

    def backward(g):
        full = np.zeros(shape)
        full[start:stop] = g
        return (full,)

    return _emit(x.values[start:stop].copy(), (x,), backward, "slice_rows")


def concat_cols(x: Tensor, y: Tensor) -> Tensor:
    if x.rows != y.rows:
        raise ShapeError(f"concat_cols: row counts differ, {x.shape} vs {y.shape}")
    k = x.cols
    return _emit(np.hstack([x.values, y.values]), (x, y),
                 lambda g: (g[:, :k], g[:, k:]), "concat_cols")


def log_softmax_rows(x: Tensor) -> Tensor:
    if x.cols < 1:
        raise ShapeError("log_softmax_rows needs at least one column")
    shifted = x.values - x.values.max(axis=1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    probs = np.exp(out)

    def backward(g):
        return (g - probs * g.sum(axis=1, keepdims=True),)

    return _emit(out, (x,), backward, "log_softmax_rows")


def nll_loss(log_probs: Tensor, labels, mask) -> Tensor:
    """Mean over ``mask`` nodes of ``-log_probs[node, labels[node]]``."""
    mask = _as_index(mask, log_probs.rows, "mask")
    if mask.size == 0:
        raise ValueError("nll_loss: empty mask")
    labels = np.asarray(labels)
    picked = labels[mask].astype(np.int64)
    if picked.min() < 0 or picked.max() >= log_probs.cols:
        raise IndexError(f"nll_loss: labels outside [0, {log_probs.cols})")
    m = mask.size
    loss = -log_probs.values[mask, picked].sum() / m
    shape = log_probs.shape

    def backward(g):
        full = np.zeros(shape)
        np.add.at(full, (mask, picked), -g[0, 0] / m)
        return (full,)

    return _emit(np.array([[loss]]), (log_probs,), backward, "nll_loss")


def spmm(matrix: sp.spmatrix, x: Tensor) -> Tensor:
    """Constant sparse matrix times tensor; only ``x`` is differentiable."""
    if matrix.shape[1] != x.rows:
        raise ShapeError(f"spmm: {matrix.shape} @ {x.shape}")
    m = sp.csr_matrix(matrix)
    mt = m.T.tocsr()
    return _emit(np.asarray(m @ x.values), (x,), lambda g: (np.asarray(mt @ g),), "spmm")


# ---------------------------------------------------------------- edge ops

def gather_rows(x: Tensor, idx) -> Tensor:
    """Row k of the result is row ``idx[k]`` of ``x``; backward scatter-adds."""
    idx = _as_index(idx, x.rows, "gather index")
    n = x.rows

    def backward(g):
        return (np.asarray(_scatter_matrix(idx, n) @ g),)

    return _emit(x.values[idx], (x,), backward, "gather_rows")


def _check_segments(seg, n_segments: int, e: int) -> np.ndarray:
    seg = _as_index(seg, n_segments, "segment id")
    if seg.shape[0] != e:
        raise ShapeError(f"segment ids have length {seg.shape[0]}, expected {e}")
    return seg


def segment_softmax(scores: Tensor, seg, n_segments: int) -> Tensor:
    """Softmax of an (E x 1) score column within groups sharing a segment id."""
    if scores.rows == 0:
        raise ValueError("segment_softmax: empty input")
    if scores.cols != 1:
        raise ShapeError(f"segment_softmax expects an E x 1 column, got {scores.shape}")
    seg = _check_segments(seg, n_segments, scores.rows)
    s = scores.values[:, 0]
    seg_max = np.full(n_segments, -np.inf)
    np.maximum.at(seg_max, seg, s)
    z = np.exp(s - seg_max[seg])
    S = _scatter_matrix(seg, n_segments)
    denom = S @ z
    y = z / denom[seg]

    def backward(g):
        gy = g[:, 0] * y
        return ((gy - y * (S @ gy)[seg])[:, None],)

    return _emit(y[:, None], (scores,), backward, "segment_softmax")


def segment_weighted_sum(weights: Tensor, values: Tensor, seg, n_segments: int) -> Tensor:
    """Row s of the result is the sum of ``weights[k] * values[k]`` over ``seg[k] == s``."""
    if weights.cols != 1 or weights.rows != values.rows:
        raise ShapeError(f"segment_weighted_sum: weights {weights.shape} vs values {values.shape}")
    seg = _check_segments(seg, n_segments, values.rows)
    w = weights.values[:, 0]
    v = values.values
    out = np.asarray(_scatter_matrix(seg, n_segments, w) @ v)

    def backward(g):
        g_edge = g[seg]
        gw = np.einsum("ij,ij->i", g_edge, v)[:, None] if weights.requires_grad else None
        gv = g_edge * w[:, None] if values.requires_grad else None
        return gw, gv

    return _emit(out, (weights, values), backward, "segment_weighted_sum")
