"""Graph layers: GCN, GCNII (shared and split identity-mapped weights),
GAT / GATv2 edge scoring, edge-softmax aggregation and the FDGATII layer.

Row-vector convention throughout: node features are rows, a projection is
``H @ W``.  Edges are directed ``src -> dst``; the destination node is the
query ``i`` and the source is the neighbour ``j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from . import tensor_engine as te
from .errors import ShapeError
from .graph_data import EdgeIndex, NormalizedAdjacency
from .tensor_engine import Tensor

Activation = Optional[Callable[[Tensor], Tensor]]


class Variant(str, Enum):
    """How initial residual + identity mapping is applied after aggregation."""

    NONE = "NONE"
    EQ3 = "EQ3"    # one weight shared by the smoothed and initial terms
    EQ10 = "EQ10"  # separate weights for the smoothed and initial terms

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown variant {value!r}; expected one of NONE, EQ3, EQ10") from None


@dataclass
class AttentionParams:
    """Edge-scoring parameters.

    GAT: ``W`` is (d_in x d_out), ``a`` is (2*d_out x 1).
    GATv2: ``W`` is (2*d_in x d_out) acting on ``[h_i || h_j]``, ``a`` is (d_out x 1).
    """

    W: Tensor
    a: Tensor
    leaky_slope: float = 0.2


@dataclass
class IILayerParams:
    alpha: float
    beta: float
    attention: Optional[AttentionParams] = None
    W: Optional[Tensor] = None
    W2: Optional[Tensor] = None

    def tensors(self) -> dict[str, Tensor]:
        out = {}
        if self.attention is not None:
            out["att_W"] = self.attention.W
            out["att_a"] = self.attention.a
        if self.W is not None:
            out["W"] = self.W
        if self.W2 is not None:
            out["W2"] = self.W2
        return out


def beta_schedule(lam: float, layer: int) -> float:
    """Identity-mapping strength ``ln(lam / layer + 1)`` for a 1-based layer index."""
    if layer < 1:
        raise ValueError(f"layer index is 1-based, got {layer}")
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return math.log(lam / layer + 1.0)


def _act(x: Tensor, activation: Activation) -> Tensor:
    return x if activation is None else activation(x)


def propagate(adj: NormalizedAdjacency, h: Tensor) -> Tensor:
    """Sparse ``P @ H``."""
    if h.rows != adj.n:
        raise ShapeError(f"features have {h.rows} rows, adjacency has {adj.n} nodes")
    return te.spmm(_csr(adj), h)


def _csr(adj: NormalizedAdjacency):
    cached = getattr(adj, "_csr_cache", None)
    if cached is None:
        cached = adj.to_scipy()
        object.__setattr__(adj, "_csr_cache", cached)
    return cached


def gcn_layer(adj: NormalizedAdjacency, h: Tensor, W: Tensor, activation: Activation = te.relu) -> Tensor:
    if h.cols != W.rows:
        raise ShapeError(f"gcn_layer: features {h.shape} vs weight {W.shape}")
    return _act(te.matmul(propagate(adj, h), W), activation)


def gat_score(h: Tensor, edges: EdgeIndex, p: AttentionParams) -> Tensor:
    """Static attention ``LeakyReLU(a . [W h_i || W h_j])`` for every edge (E x 1)."""
    d_out = p.W.cols
    if h.cols != p.W.rows or p.a.shape != (2 * d_out, 1):
        raise ShapeError(f"gat_score: h {h.shape}, W {p.W.shape}, a {p.a.shape}")
    z = te.matmul(h, p.W)
    # a . [z_i || z_j] = z_i . a_dst + z_j . a_src, evaluated per node then gathered
    s_dst = te.matmul(z, te.slice_rows(p.a, 0, d_out))
    s_src = te.matmul(z, te.slice_rows(p.a, d_out, 2 * d_out))
    e = te.add(te.gather_rows(s_dst, edges.dst), te.gather_rows(s_src, edges.src))
    return te.leaky_relu(e, p.leaky_slope)


def _gatv2_halves(h: Tensor, p: AttentionParams) -> tuple[Tensor, Tensor]:
    d_in = h.cols
    if p.W.rows != 2 * d_in or p.a.shape != (p.W.cols, 1):
        raise ShapeError(f"gatv2: h {h.shape}, W {p.W.shape}, a {p.a.shape}")
    z_dst = te.matmul(h, te.slice_rows(p.W, 0, d_in))
    z_src = te.matmul(h, te.slice_rows(p.W, d_in, 2 * d_in))
    return z_dst, z_src


def gatv2_score(h: Tensor, edges: EdgeIndex, p: AttentionParams) -> Tensor:
    """Dynamic attention ``a . LeakyReLU(W [h_i || h_j])`` for every edge (E x 1)."""
    z_dst, z_src = _gatv2_halves(h, p)
    return _gatv2_from_halves(z_dst, z_src, edges, p)


def _gatv2_from_halves(z_dst: Tensor, z_src: Tensor, edges: EdgeIndex, p: AttentionParams) -> Tensor:
    pre = te.add(te.gather_rows(z_dst, edges.dst), te.gather_rows(z_src, edges.src))
    return te.matmul(te.leaky_relu(pre, p.leaky_slope), p.a)


def attention_aggregate(scores: Tensor, h_proj: Tensor, edges: EdgeIndex) -> Tensor:
    """Softmax scores over each destination's incoming edges, then sum weighted source rows."""
    n = h_proj.rows
    if scores.shape != (len(edges), 1):
        raise ShapeError(f"attention_aggregate: scores {scores.shape} for {len(edges)} edges")
    if np.bincount(edges.dst, minlength=n).min(initial=1) == 0:
        raise ValueError("attention_aggregate: a node has no incoming edge (add self-loops)")
    alpha = te.segment_softmax(scores, edges.dst, n)
    return te.segment_weighted_sum(alpha, te.gather_rows(h_proj, edges.src), edges.dst, n)


def attention_weights(scores: Tensor, edges: EdgeIndex, n: int) -> np.ndarray:
    with te.no_tape():
        return te.segment_softmax(scores, edges.dst, n).values[:, 0]


def _identity_mapped(x: Tensor, W: Tensor, beta: float) -> Tensor:
    """``x @ ((1 - beta) I + beta W)`` without materializing the identity."""
    if W.shape != (x.cols, x.cols):
        raise ShapeError(f"identity mapping needs a {x.cols}x{x.cols} weight, got {W.shape}")
    if beta == 0.0:
        return x
    return te.add(te.scale(x, 1.0 - beta), te.scale(te.matmul(x, W), beta))


def initial_residual_identity(smoothed: Tensor, h0: Tensor, params: IILayerParams, variant: Variant) -> Tensor:
    """Combine a smoothed representation with the initial one (pre-activation)."""
    variant = Variant.parse(variant)
    if smoothed.shape != h0.shape:
        raise ShapeError(f"smoothed {smoothed.shape} and initial {h0.shape} representations differ")
    a, b = params.alpha, params.beta
    if variant is Variant.NONE:
        return smoothed
    if variant is Variant.EQ3:
        mixed = te.add(te.scale(smoothed, 1.0 - a), te.scale(h0, a))
        return _identity_mapped(mixed, params.W, b)
    if params.W2 is None:
        raise ValueError("EQ10 needs a second weight W2")
    return te.add(te.scale(_identity_mapped(smoothed, params.W, b), 1.0 - a),
                  te.scale(_identity_mapped(h0, params.W2, b), a))


def fdgatii_layer(h: Tensor, h0: Tensor, params: IILayerParams, edges: EdgeIndex,
                  variant: Variant = Variant.EQ3, activation: Activation = te.relu) -> Tensor:
    """GATv2 aggregation over ``edges`` (with self-loops) in place of ``P @ H``,
    followed by initial residual and identity mapping."""
    if h.shape != h0.shape:
        raise ShapeError(f"fdgatii_layer: H {h.shape} and H0 {h0.shape} differ")
    p = params.attention
    z_dst, z_src = _gatv2_halves(h, p)
    scores = _gatv2_from_halves(z_dst, z_src, edges, p)
    smoothed = attention_aggregate(scores, z_src, edges)
    return _act(initial_residual_identity(smoothed, h0, params, variant), activation)


def gcnii_layer(h: Tensor, h0: Tensor, adj: NormalizedAdjacency, params: IILayerParams,
                variant: Variant = Variant.EQ3, activation: Activation = te.relu) -> Tensor:
    if h.shape != h0.shape:
        raise ShapeError(f"gcnii_layer: H {h.shape} and H0 {h0.shape} differ")
    variant = Variant.parse(variant)
    if variant is Variant.NONE:
        return gcn_layer(adj, h, params.W, activation)
    return _act(initial_residual_identity(propagate(adj, h), h0, params, variant), activation)
