"""End-to-end networks: fc0 -> stacked graph layers -> fc_out -> log-softmax.

The same plumbing builds FDGATII (attention aggregation) and the GCNII / GCN
baselines (fixed normalized-adjacency aggregation); only the layer op differs.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import tensor_engine as te
from .errors import ConfigError, ShapeError
from .graph_data import Graph, add_self_loops, normalized_adjacency, row_normalize
from .layers import AttentionParams, IILayerParams, Variant, beta_schedule, fdgatii_layer, gcnii_layer
from .tensor_engine import ParamGroup, Tensor

ARCHS = ("fdgatii", "gcnii")


@dataclass
class ModelConfig:
    arch: str = "fdgatii"
    variant: Variant = Variant.EQ3
    num_layers: int = 2
    hidden_dim: int = 64
    lam: float = 0.5
    alpha: float = 0.1
    dropout: float = 0.5
    lr: float = 0.01
    weight_decay: tuple[float, float] = (5e-4, 5e-4)  # (graph layers, dense fc layers)
    leaky_slope: float = 0.2
    seed: int = 42
    patience: int = 100
    max_epochs: int = 1500
    normalize_features: bool = True
    bias: bool = True

    def __post_init__(self):
        try:
            self.variant = Variant.parse(self.variant)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.weight_decay = tuple(float(w) for w in self.weight_decay)
        self.validate()

    def validate(self) -> None:
        problems = []
        if self.arch not in ARCHS:
            problems.append(f"arch must be one of {ARCHS}, got {self.arch!r}")
        if int(self.num_layers) < 1:
            problems.append(f"num_layers must be >= 1, got {self.num_layers}")
        if int(self.hidden_dim) < 1:
            problems.append(f"hidden_dim must be >= 1, got {self.hidden_dim}")
        if not self.lam > 0:
            problems.append(f"lam must be > 0, got {self.lam}")
        if not 0.0 <= self.alpha <= 1.0:
            problems.append(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.dropout < 1.0:
            problems.append(f"dropout must be in [0, 1), got {self.dropout}")
        if not self.lr > 0:
            problems.append(f"lr must be > 0, got {self.lr}")
        if len(self.weight_decay) != 2 or min(self.weight_decay) < 0:
            problems.append(f"weight_decay must be two non-negative values, got {self.weight_decay}")
        if self.patience < 0:
            problems.append(f"patience must be >= 0, got {self.patience}")
        if self.max_epochs < 1:
            problems.append(f"max_epochs must be >= 1, got {self.max_epochs}")
        if problems:
            raise ConfigError("; ".join(problems))

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["variant"] = self.variant.value
        d["weight_decay"] = list(self.weight_decay)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


# Layer layout per dataset for the reported results.
PRESET_TABLE = {
    "cora": (Variant.EQ3, 64, 2),
    "citeseer": (Variant.EQ10, 128, 1),
    "pubmed": (Variant.EQ3, 64, 2),
    "chameleon": (Variant.NONE, 64, 1),
    "cornell": (Variant.EQ10, 128, 1),
    "texas": (Variant.EQ10, 64, 2),
    "wisconsin": (Variant.EQ10, 128, 1),
}

# Per-dataset alpha / lambda / weight decay of the GCNII full-supervised benchmark runs.
BENCHMARK_SETTINGS = {
    "cora": dict(alpha=0.2, lam=0.5, weight_decay=1e-4),
    "citeseer": dict(alpha=0.5, lam=0.5, weight_decay=5e-6),
    "pubmed": dict(alpha=0.1, lam=0.5, weight_decay=5e-6),
    "chameleon": dict(alpha=0.2, lam=1.5, weight_decay=5e-4),
    "cornell": dict(alpha=0.5, lam=1.0, weight_decay=1e-3),
    "texas": dict(alpha=0.5, lam=1.5, weight_decay=1e-4),
    "wisconsin": dict(alpha=0.5, lam=1.0, weight_decay=5e-4),
}


def build_from_table(dataset_name: str, **overrides) -> ModelConfig:
    key = dataset_name.strip().lower()
    if key not in PRESET_TABLE:
        raise ConfigError(f"no preset for dataset {dataset_name!r}; known: {sorted(PRESET_TABLE)}")
    variant, dim, layers = PRESET_TABLE[key]
    bench = BENCHMARK_SETTINGS[key]
    wd = bench["weight_decay"]
    cfg = dict(arch="fdgatii", variant=variant, hidden_dim=dim, num_layers=layers,
               alpha=bench["alpha"], lam=bench["lam"], weight_decay=(wd, wd))
    cfg.update(overrides)
    return ModelConfig(**cfg)


# ------------------------------------------------------------------ inputs

@dataclass(eq=False)
class GraphInputs:
    """Graph-derived tensors reused by every forward pass."""

    graph: Graph
    features: Tensor
    edges: "object"
    adj: "object"

    @classmethod
    def from_graph(cls, g: Graph, normalize_features: bool = True) -> "GraphInputs":
        view = add_self_loops(g)
        feats = row_normalize(g.features) if normalize_features else np.array(g.features)
        return cls(g, Tensor(feats), view.edges_with_loops, normalized_adjacency(view))

    @property
    def n(self) -> int:
        return self.graph.n


# ------------------------------------------------------------------ network

def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None, name=None) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    shape = shape or (fan_in, fan_out)
    return Tensor(rng.uniform(-limit, limit, size=shape), requires_grad=True, name=name)


class Network:
    def __init__(self, config: ModelConfig, num_features: int, num_classes: int):
        config.validate()
        self.config = config
        self.num_features = num_features
        self.num_classes = num_classes
        rng = np.random.default_rng(config.seed)
        h = config.hidden_dim
        self.fc0_W = _glorot(rng, num_features, h, name="fc0.W")
        self.fc0_b = Tensor(np.zeros((1, h)), requires_grad=True, name="fc0.b") if config.bias else None
        self.layers: list[IILayerParams] = []
        for idx in range(1, config.num_layers + 1):
            p = IILayerParams(alpha=config.alpha, beta=beta_schedule(config.lam, idx))
            if config.arch == "fdgatii":
                p.attention = AttentionParams(
                    W=_glorot(rng, 2 * h, h, name=f"layers.{idx}.att_W"),
                    a=_glorot(rng, h, 1, name=f"layers.{idx}.att_a"),
                    leaky_slope=config.leaky_slope)
            if config.variant is not Variant.NONE or config.arch == "gcnii":
                p.W = _glorot(rng, h, h, name=f"layers.{idx}.W")
            if config.variant is Variant.EQ10:
                p.W2 = _glorot(rng, h, h, name=f"layers.{idx}.W2")
            self.layers.append(p)
        self.fc_out_W = _glorot(rng, h, num_classes, name="fc_out.W")
        self.fc_out_b = Tensor(np.zeros((1, num_classes)), requires_grad=True, name="fc_out.b") if config.bias else None

    # parameters ---------------------------------------------------------
    def dense_parameters(self) -> dict[str, Tensor]:
        out = {"fc0.W": self.fc0_W, "fc_out.W": self.fc_out_W}
        if self.fc0_b is not None:
            out["fc0.b"] = self.fc0_b
            out["fc_out.b"] = self.fc_out_b
        return out

    def layer_parameters(self) -> dict[str, Tensor]:
        out = {}
        for idx, p in enumerate(self.layers, 1):
            for k, t in p.tensors().items():
                out[f"layers.{idx}.{k}"] = t
        return out

    def named_parameters(self) -> dict[str, Tensor]:
        out = self.dense_parameters()
        out.update(self.layer_parameters())
        return dict(sorted(out.items()))

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def param_groups(self) -> list[ParamGroup]:
        wd_layers, wd_dense = self.config.weight_decay
        return [ParamGroup(list(self.layer_parameters().values()), wd_layers, "layers"),
                ParamGroup(list(self.dense_parameters().values()), wd_dense, "dense")]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: t.values.copy() for k, t in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        if set(state) != set(params):
            raise KeyError(f"state keys {sorted(set(state) ^ set(params))} do not match model")
        for k, t in params.items():
            if state[k].shape != t.values.shape:
                raise ShapeError(f"{k}: stored shape {state[k].shape} != {t.values.shape}")
            t.values = np.array(state[k], dtype=np.float64)

    # forward ------------------------------------------------------------
    def _dense(self, x: Tensor, W: Tensor, b: Optional[Tensor]) -> Tensor:
        y = te.matmul(x, W)
        return te.add_row(y, b) if b is not None else y

    def embed(self, inputs: GraphInputs, training: bool = False,
              rng: Optional[np.random.Generator] = None) -> Tensor:
        """Hidden representation after the last graph layer."""
        if inputs.features.cols != self.num_features:
            raise ShapeError(f"graph has {inputs.features.cols} features, model expects {self.num_features}")
        cfg = self.config
        p = cfg.dropout
        x = te.dropout(inputs.features, p, training, rng)
        h0 = te.relu(self._dense(x, self.fc0_W, self.fc0_b))
        h = h0
        for params in self.layers:
            h = te.dropout(h, p, training, rng)
            if cfg.arch == "fdgatii":
                h = fdgatii_layer(h, h0, params, inputs.edges, cfg.variant)
            else:
                h = gcnii_layer(h, h0, inputs.adj, params, cfg.variant)
        return h

    def forward(self, inputs: GraphInputs, training: bool = False,
                rng: Optional[np.random.Generator] = None) -> Tensor:
        h = self.embed(inputs, training, rng)
        h = te.dropout(h, self.config.dropout, training, rng)
        return te.log_softmax_rows(self._dense(h, self.fc_out_W, self.fc_out_b))

    __call__ = forward


def forward(model: Network, graph, mode: str = "eval", rng=None) -> Tensor:
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    inputs = graph if isinstance(graph, GraphInputs) else GraphInputs.from_graph(graph, model.config.normalize_features)
    if mode == "eval":
        with te.no_tape():
            return model.forward(inputs, False)
    return model.forward(inputs, True, rng)


def parameter_count(model: Network) -> int:
    return int(sum(t.values.size for t in model.parameters()))


# -------------------------------------------------------------- checkpoint

CHECKPOINT_FORMAT = "fdgatii-checkpoint/1"


def save_checkpoint(model: Network, path) -> None:
    meta = {"format": CHECKPOINT_FORMAT, "config": model.config.to_dict(),
            "num_features": model.num_features, "num_classes": model.num_classes}
    arrays = {f"param/{k}": v for k, v in model.state_dict().items()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)


def load_checkpoint(path) -> Network:
    with np.load(Path(path), allow_pickle=False) as z:
        meta = json.loads(str(z["__meta__"]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {meta.get('format')!r}")
        model = Network(ModelConfig.from_dict(meta["config"]), meta["num_features"], meta["num_classes"])
        model.load_state_dict({k[len("param/"):]: z[k] for k in z.files if k.startswith("param/")})
    return model
