"""Random layer instances evaluated both through the package and the dense oracles."""

import numpy as np

import oracles
from fdgatii import tensor_engine as te
from fdgatii.graph_data import Graph, add_self_loops, normalized_adjacency
from fdgatii.layers import (AttentionParams, IILayerParams, Variant, attention_aggregate, fdgatii_layer,
                            gatv2_score, gcn_layer, gcnii_layer)
from fdgatii.tensor_engine import Tensor

LAYER_KINDS = ("attention_aggregate", "gcn", "gcnii_EQ3", "gcnii_EQ10", "fdgatii_NONE", "fdgatii_EQ3", "fdgatii_EQ10")


def random_graph(rng, n, p):
    pairs = np.argwhere(np.triu(rng.random((n, n)) < p, k=1))
    return Graph.from_edges(np.zeros((n, 1)), np.zeros(n, dtype=int), pairs, num_classes=1)


class LayerCase:
    """One layer op with random parameters on a random graph."""

    def __init__(self, kind, rng, n=None, d=3, p=None):
        self.kind = kind
        n = n or int(rng.integers(2, 31))
        p = float(rng.uniform(0.05, 0.5)) if p is None else p
        self.graph = random_graph(rng, n, p)
        view = add_self_loops(self.graph)
        self.edges = view.edges_with_loops
        self.adj = normalized_adjacency(view)
        self.a_loops = oracles.dense_adj_with_loops(n, self.graph.undirected_pairs())
        self.d = d
        self.h = Tensor(rng.normal(size=(n, d)), requires_grad=True)
        self.h0 = Tensor(rng.normal(size=(n, d)), requires_grad=True)
        self.alpha = float(rng.uniform(0.05, 0.95))
        self.beta = float(rng.uniform(0.05, 0.95))
        self.att_W = Tensor(rng.normal(size=(2 * d, d)), requires_grad=True)
        self.att_a = Tensor(rng.normal(size=(d, 1)), requires_grad=True)
        self.W = Tensor(rng.normal(size=(d, d)), requires_grad=True)
        self.W2 = Tensor(rng.normal(size=(d, d)), requires_grad=True)
        self.R = rng.normal(size=(n, d))

    @property
    def variant(self):
        return Variant(self.kind.split("_")[1]) if "_" in self.kind and self.kind != "attention_aggregate" else None

    def params(self):
        return IILayerParams(self.alpha, self.beta, AttentionParams(self.att_W, self.att_a, 0.2), self.W,
                             self.W2 if self.variant is Variant.EQ10 else None)

    def tensors(self):
        return [self.h, self.h0, self.att_W, self.att_a, self.W, self.W2]

    def run(self):
        k = self.kind
        if k == "attention_aggregate":
            p = AttentionParams(self.att_W, self.att_a)
            scores = gatv2_score(self.h, self.edges, p)
            return attention_aggregate(scores, te.matmul(self.h, self.W), self.edges)
        if k == "gcn":
            return gcn_layer(self.adj, self.h, self.W, te.relu)
        if k.startswith("gcnii"):
            return gcnii_layer(self.h, self.h0, self.adj, self.params(), self.variant)
        return fdgatii_layer(self.h, self.h0, self.params(), self.edges, self.variant)

    def oracle(self):
        k = self.kind
        h, h0 = self.h.values, self.h0.values
        if k == "attention_aggregate":
            s = oracles.gatv2_scores(self.a_loops, h, self.att_W.values, self.att_a.values)
            return oracles.attention_aggregate(s, h @ self.W.values)
        if k == "gcn":
            return oracles.gcn(self.a_loops, h, self.W.values)
        if k.startswith("gcnii"):
            return oracles.gcnii(self.a_loops, h, h0, self.alpha, self.beta, self.variant.value,
                                 self.W.values, self.W2.values)
        return oracles.fdgatii(self.a_loops, h, h0, self.att_W.values, self.att_a.values, self.alpha, self.beta,
                               self.variant.value, self.W.values, self.W2.values)

    def loss(self):
        return te.sum_all(te.mul(self.run(), Tensor(self.R)))
