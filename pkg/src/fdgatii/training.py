"""Full-supervised training, 10-split evaluation, ablation / depth sweeps and timing."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import tensor_engine as te
from .errors import NumericError
from .graph_data import Graph, Split, SplitSet, check_split
from .layers import Variant
from .model import GraphInputs, ModelConfig, Network

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TIMING_FIELDS = ("wall_train_ms", "mean_inference_ms", "mean_train_ms")


@dataclass
class RunResult:
    dataset: str
    split_id: int
    best_val_accuracy: float
    test_accuracy: float
    best_epoch: int
    epochs_run: int
    wall_train_ms: float
    mean_inference_ms: float
    seed: int
    config: dict
    final_train_loss: float = float("nan")

    def row(self) -> dict:
        d = dataclasses.asdict(self)
        d["config"] = json.dumps(self.config, sort_keys=True)
        d["schema_version"] = SCHEMA_VERSION
        return d


@dataclass
class ExperimentReport:
    dataset: str
    config: dict
    runs: list[RunResult] = field(default_factory=list)

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([r.test_accuracy for r in self.runs])

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))

    def summary(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "dataset": self.dataset, "config": self.config,
                "splits": len(self.runs), "mean_test_accuracy": self.mean,
                "std_test_accuracy": self.std,
                "per_split_test_accuracy": [r.test_accuracy for r in self.runs],
                "mean_epochs": float(np.mean([r.epochs_run for r in self.runs])),
                "mean_train_ms": float(np.mean([r.wall_train_ms for r in self.runs]))}


class SealedTestSet:
    """Holds test labels away from the training loop; opened exactly once."""

    def __init__(self, labels: np.ndarray, test_idx: np.ndarray):
        self.__labels = np.asarray(labels)[test_idx].copy()
        self.__idx = np.asarray(test_idx).copy()
        self.opened = False

    def __len__(self) -> int:
        return self.__idx.size

    def evaluate(self, model: Network, inputs: GraphInputs) -> float:
        if self.opened:
            raise RuntimeError("sealed test set already evaluated")
        self.opened = True
        with te.no_tape():
            pred = model.forward(inputs, training=False).values.argmax(axis=1)
        return float(np.mean(pred[self.__idx] == self.__labels))


def visible_labels(labels: np.ndarray, split: Split) -> np.ndarray:
    """Labels with every test node masked to -1."""
    out = np.array(labels, copy=True)
    out[split.test] = -1
    return out


def accuracy(log_probs: te.Tensor, labels: np.ndarray, idx: np.ndarray) -> float:
    return float(np.mean(log_probs.values[idx].argmax(axis=1) == labels[idx]))


@dataclass
class FitResult:
    model: Network
    best_val_accuracy: float
    best_epoch: int
    epochs_run: int
    losses: list[float]


def fit(model: Network, inputs: GraphInputs, labels: np.ndarray, train_idx: np.ndarray,
        val_idx: np.ndarray, config: ModelConfig) -> FitResult:
    """Adam + early stopping on validation accuracy; restores the best-validation parameters.

    ``labels`` must already have test nodes masked; only train and val
    entries are read.
    """
    if labels[train_idx].min() < 0 or labels[val_idx].min() < 0:
        raise ValueError("train/val labels must be visible")
    opt = te.Adam(model.param_groups(), lr=config.lr)
    rng = np.random.default_rng(config.seed)
    best_acc, best_loss, best_epoch = -1.0, np.inf, -1
    best_state = model.state_dict()
    bad = 0
    losses = []
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        opt.zero_grad()
        with te.GradTape() as tape:
            out = model.forward(inputs, training=True, rng=rng)
            loss = te.nll_loss(out, labels, train_idx)
        loss_value = loss.item()
        if not np.isfinite(loss_value):
            raise NumericError(f"training loss became {loss_value} at epoch {epoch} "
                               f"(lr={config.lr}, layers={config.num_layers})")
        tape.backward(loss)
        for name, t in model.named_parameters().items():
            if t.grad is not None and not np.all(np.isfinite(t.grad)):
                raise NumericError(f"non-finite gradient for {name} at epoch {epoch} (loss {loss_value:.6g})")
        opt.step()
        losses.append(loss_value)

        with te.no_tape():
            out = model.forward(inputs, training=False)
            val_loss = te.nll_loss(out, labels, val_idx).item()
        val_acc = accuracy(out, labels, val_idx)
        if val_acc > best_acc or (val_acc == best_acc and val_loss < best_loss):
            best_acc, best_loss, best_epoch = val_acc, val_loss, epoch
            best_state = model.state_dict()
            bad = 0
        else:
            bad += 1
            if bad > config.patience:
                break
    model.load_state_dict(best_state)
    return FitResult(model, best_acc, best_epoch, epoch, losses)


def measure_inference(model: Network, inputs: GraphInputs, n_inference: int = 1000,
                      warmup: bool = True, n_warmup: int = 10) -> np.ndarray:
    """Per-call eval-mode forward times in milliseconds (monotonic clock)."""
    with te.no_tape():
        if warmup:
            for _ in range(n_warmup):
                model.forward(inputs, training=False)
        times = np.empty(n_inference)
        for k in range(n_inference):
            t0 = time.perf_counter_ns()
            model.forward(inputs, training=False)
            times[k] = (time.perf_counter_ns() - t0) / 1e6
    return times


def train_one(graph: Graph, split: Split, config: ModelConfig, split_id: int = 0,
              n_inference: int = 20, inputs: Optional[GraphInputs] = None,
              return_model: bool = False):
    """Train on one split and report test accuracy at the best-validation epoch."""
    check_split(split, graph.n)
    inputs = inputs or GraphInputs.from_graph(graph, config.normalize_features)
    sealed = SealedTestSet(graph.labels, split.test)
    labels = visible_labels(graph.labels, split)

    t0 = time.perf_counter_ns()
    model = Network(config, graph.num_features, graph.num_classes)
    fitted = fit(model, inputs, labels, split.train, split.val, config)
    train_ms = (time.perf_counter_ns() - t0) / 1e6

    infer = measure_inference(model, inputs, n_inference, warmup=True) if n_inference else np.array([np.nan])
    result = RunResult(
        dataset=graph.name, split_id=split_id, best_val_accuracy=fitted.best_val_accuracy,
        test_accuracy=sealed.evaluate(model, inputs), best_epoch=fitted.best_epoch,
        epochs_run=fitted.epochs_run, wall_train_ms=train_ms, mean_inference_ms=float(infer.mean()),
        seed=config.seed, config=config.to_dict(), final_train_loss=fitted.losses[-1])
    return (result, model) if return_model else result


def _train_job(args):
    graph, split, config, split_id = args
    return train_one(graph, split, config, split_id)


def evaluate_dataset(graph: Graph, splits: SplitSet, config: ModelConfig,
                     parallel_splits: int = 1, split_ids: Optional[Sequence[int]] = None) -> ExperimentReport:
    ids = list(range(len(splits))) if split_ids is None else list(split_ids)
    jobs = [(graph, splits[i], config, i) for i in ids]
    if parallel_splits > 1:
        with ProcessPoolExecutor(max_workers=parallel_splits) as pool:
            runs = list(pool.map(_train_job, jobs))
    else:
        runs = []
        for job in jobs:
            runs.append(_train_job(job))
            log.info("%s split %d: test acc %.4f (%d epochs)", graph.name, job[3],
                     runs[-1].test_accuracy, runs[-1].epochs_run)
    return ExperimentReport(graph.name, config.to_dict(), runs)


ABLATION_ARMS = [(Variant.NONE, 1), (Variant.NONE, 2), (Variant.EQ3, 1), (Variant.EQ3, 2),
                 (Variant.EQ10, 1), (Variant.EQ10, 2)]


def ablation_suite(graph: Graph, splits: SplitSet, base: ModelConfig, parallel_splits: int = 1,
                   split_ids=None) -> dict[tuple[str, int], ExperimentReport]:
    """Every {NONE, EQ3, EQ10} x {1, 2 layers} arm on the same splits and seed."""
    out = {}
    for variant, layers in ABLATION_ARMS:
        cfg = base.replace(variant=variant, num_layers=layers)
        out[(variant.value, layers)] = evaluate_dataset(graph, splits, cfg, parallel_splits, split_ids)
    return out


DEFAULT_DEPTHS = (1, 2, 4, 8, 16, 32)


def depth_sweep(graph: Graph, splits: SplitSet, base: ModelConfig, depths: Sequence[int] = DEFAULT_DEPTHS,
                parallel_splits: int = 1, split_ids=None) -> dict[int, ExperimentReport]:
    """EQ3 variant at hidden width 64 for each depth."""
    return {d: evaluate_dataset(graph, splits, base.replace(variant=Variant.EQ3, hidden_dim=64, num_layers=d),
                                parallel_splits, split_ids)
            for d in depths}


@dataclass
class TimingReport:
    train_ms: float
    mean_infer_ms: float
    std_infer_ms: float
    n_inference: int
    warmup: bool
    samples_ms: np.ndarray = field(repr=False, default=None)

    @property
    def relative_std(self) -> float:
        return self.std_infer_ms / self.mean_infer_ms


def timing_harness(graph: Graph, split: Split, config: ModelConfig, n_inference: int = 1000,
                   warmup: bool = True, model: Optional[Network] = None) -> TimingReport:
    """Time a full ``train_one`` and then ``n_inference`` eval-mode forwards.

    With ``model`` given, training is skipped (train_ms reported as nan) and
    the supplied model is timed as is.
    """
    inputs = GraphInputs.from_graph(graph, config.normalize_features)
    if model is None:
        t0 = time.perf_counter_ns()
        _, model = train_one(graph, split, config, inputs=inputs, n_inference=0, return_model=True)
        train_ms = (time.perf_counter_ns() - t0) / 1e6
    else:
        train_ms = float("nan")
    samples = measure_inference(model, inputs, n_inference, warmup)
    return TimingReport(train_ms, float(samples.mean()), float(samples.std()), n_inference, warmup, samples)


def embedding_variance(model: Network, inputs: GraphInputs) -> float:
    """Mean squared pairwise distance between final node embeddings (0 means total collapse)."""
    with te.no_tape():
        h = model.embed(inputs, training=False).values
    # mean_{i,j} |h_i - h_j|^2 = 2 * sum of per-dimension variances
    return float(2.0 * h.var(axis=0).sum())


# --------------------------------------------------------------- results IO

def write_results(report: ExperimentReport, out_dir, stem: str = "results") -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    json_path = out_dir / f"{stem}.json"
    rows = [r.row() for r in report.runs]
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["schema_version"])
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    json_path.write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return csv_path, json_path


def read_results_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
