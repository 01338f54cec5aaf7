"""FDGATII: dynamic graph attention with initial residual and identity mapping,
on a small numpy reverse-mode engine."""

from .graph_data import Graph, SplitSet, add_self_loops, homophily, load_dataset, load_graph, normalized_adjacency
from .layers import Variant, beta_schedule, fdgatii_layer, gcnii_layer
from .model import ModelConfig, Network, build_from_table, parameter_count
from .training import evaluate_dataset, train_one

__version__ = "0.1.0"
