import time

import numpy as np
import pytest

from fdgatii.errors import NumericError
from fdgatii.graph_data import Graph, Split, SplitSet, generate_splits, make_synthetic
from fdgatii.layers import Variant
from fdgatii.model import GraphInputs, ModelConfig, Network
from fdgatii.training import (ABLATION_ARMS, TIMING_FIELDS, ExperimentReport, RunResult, SealedTestSet,
                              ablation_suite, depth_sweep, embedding_variance, evaluate_dataset, fit,
                              measure_inference, read_results_csv, timing_harness, train_one, visible_labels,
                              write_results)


def separable_graph():
    # two classes of five nodes; features carry the class, edges stay inside a class
    labels = np.array([0] * 5 + [1] * 5)
    rng = np.random.default_rng(0)
    x = np.eye(2)[labels] + 0.05 * rng.normal(size=(10, 2))
    pairs = [(i, i + 1) for i in range(4)] + [(i, i + 1) for i in range(5, 9)]
    return Graph.from_edges(x, labels, pairs, name="separable")


SEPARABLE_SPLIT = Split(train=[0, 1, 2, 5, 6, 7], val=[3, 8], test=[4, 9])


def quick(**kw):
    base = dict(hidden_dim=16, num_layers=2, max_epochs=200, patience=50, seed=0, normalize_features=False)
    base.update(kw)
    return ModelConfig(**base)


@pytest.fixture(scope="module")
def synth():
    g = make_synthetic(n=60, num_features=8, num_classes=3, edge_homophily=0.3, seed=7, name="synth")
    return g, generate_splits(g, seed=0, n_splits=3)


def test_separable_graph_perfect_accuracy():
    for v in Variant:
        r = train_one(separable_graph(), SEPARABLE_SPLIT, quick(variant=v))
        assert r.test_accuracy == 1.0 and r.epochs_run <= 200


def test_patience_zero_stops_one_epoch_after_best():
    r = train_one(separable_graph(), SEPARABLE_SPLIT, quick(patience=0))
    assert r.epochs_run == r.best_epoch + 1


def test_training_is_deterministic(synth):
    g, splits = synth
    a = train_one(g, splits[0], quick(max_epochs=60))
    b = train_one(g, splits[0], quick(max_epochs=60))
    for field in ("test_accuracy", "best_val_accuracy", "best_epoch", "epochs_run", "final_train_loss"):
        assert getattr(a, field) == getattr(b, field)


def test_divergent_loss_raises(synth):
    g, splits = synth
    with pytest.raises(NumericError, match="epoch"), np.errstate(all="ignore"):
        train_one(g, splits[0], quick(lr=1e200))


def test_result_fields(synth):
    g, splits = synth
    r = train_one(g, splits[1], quick(max_epochs=20), split_id=1)
    assert 0.0 <= r.test_accuracy <= 1.0 and 0.0 <= r.best_val_accuracy <= 1.0
    assert r.wall_train_ms > 0 and r.mean_inference_ms > 0
    assert r.split_id == 1 and r.seed == 0 and r.config["max_epochs"] == 20


# ----------------------------------------------------------- sealed test

def test_visible_labels_masks_test():
    labels = visible_labels(np.arange(10) % 2, SEPARABLE_SPLIT)
    assert np.all(labels[SEPARABLE_SPLIT.test] == -1)
    assert np.all(labels[SEPARABLE_SPLIT.train] >= 0)


def test_fit_never_reads_test_labels():
    g = separable_graph()
    labels = visible_labels(g.labels, SEPARABLE_SPLIT)
    scrambled = labels.copy()
    # anything hidden behind the mask must not influence training
    r1 = fit(Network(quick(), 2, 2), GraphInputs.from_graph(g, False), labels,
             SEPARABLE_SPLIT.train, SEPARABLE_SPLIT.val, quick())
    scrambled[SEPARABLE_SPLIT.test] = -1
    r2 = fit(Network(quick(), 2, 2), GraphInputs.from_graph(g, False), scrambled,
             SEPARABLE_SPLIT.train, SEPARABLE_SPLIT.val, quick())
    assert r1.losses == r2.losses
    with pytest.raises(ValueError):
        fit(Network(quick(), 2, 2), GraphInputs.from_graph(g, False), labels,
            SEPARABLE_SPLIT.test, SEPARABLE_SPLIT.val, quick())


def test_sealed_test_set_opens_once():
    g = separable_graph()
    model = Network(quick(), 2, 2)
    sealed = SealedTestSet(g.labels, SEPARABLE_SPLIT.test)
    inputs = GraphInputs.from_graph(g, False)
    assert 0.0 <= sealed.evaluate(model, inputs) <= 1.0
    with pytest.raises(RuntimeError):
        sealed.evaluate(model, inputs)


# ------------------------------------------------------------- reporting

def _run(acc, split_id=0):
    return RunResult("d", split_id, 0.5, acc, 1, 2, 1.0, 1.0, 0, {})


def test_report_mean_is_exact():
    accs = [0.1, 0.7, 0.3333333333333333, 0.9]
    report = ExperimentReport("d", {}, [_run(a, i) for i, a in enumerate(accs)])
    assert report.mean == float(np.mean(accs))
    assert report.summary()["per_split_test_accuracy"] == accs


def test_report_std_zero_for_identical():
    report = ExperimentReport("d", {}, [_run(0.8125, i) for i in range(10)])
    assert report.std == 0.0 and report.mean == 0.8125


def test_evaluate_dataset_and_results_io(synth, tmp_path):
    g, splits = synth
    report = evaluate_dataset(g, splits, quick(max_epochs=20))
    assert len(report.runs) == 3 and [r.split_id for r in report.runs] == [0, 1, 2]
    csv_path, json_path = write_results(report, tmp_path)
    rows = read_results_csv(csv_path)
    assert len(rows) == 3 and rows[0]["schema_version"] == "1"
    assert float(rows[2]["test_accuracy"]) == report.runs[2].test_accuracy
    assert '"hidden_dim": 16' in rows[0]["config"]
    assert set(TIMING_FIELDS) & set(rows[0])


def test_parallel_splits_match_serial(synth):
    g, splits = synth
    serial = evaluate_dataset(g, splits, quick(max_epochs=15), split_ids=[0, 2])
    parallel = evaluate_dataset(g, splits, quick(max_epochs=15), parallel_splits=2, split_ids=[0, 2])
    assert [r.test_accuracy for r in serial.runs] == [r.test_accuracy for r in parallel.runs]
    assert [r.split_id for r in parallel.runs] == [0, 2]


def test_ablation_arms_share_splits_and_seed(synth):
    g, splits = synth
    out = ablation_suite(g, SplitSet(splits.splits[:1]), quick(max_epochs=10))
    assert list(out) == [(v.value, n) for v, n in ABLATION_ARMS]
    seeds = {r.seed for rep in out.values() for r in rep.runs}
    assert seeds == {0}
    assert {(rep.config["variant"], rep.config["num_layers"]) for rep in out.values()} == set(out)


def test_depth_sweep_forces_eq3(synth):
    g, splits = synth
    out = depth_sweep(g, SplitSet(splits.splits[:1]), quick(max_epochs=5, variant="EQ10", hidden_dim=8),
                      depths=(1, 4))
    for depth, rep in out.items():
        assert rep.config["variant"] == "EQ3" and rep.config["hidden_dim"] == 64
        assert rep.config["num_layers"] == depth
        assert np.isfinite(rep.runs[0].final_train_loss)


# ---------------------------------------------------------------- timing

def test_timing_means_are_stable(synth):
    g, splits = synth
    model = Network(quick(), 8, 3)
    inputs = GraphInputs.from_graph(g, False)
    means = [measure_inference(model, inputs, 200).mean() for _ in range(5)]
    assert np.std(means) / np.mean(means) < 0.2


def test_timing_harness_report(synth):
    g, splits = synth
    rep = timing_harness(g, splits[0], quick(max_epochs=5), n_inference=50)
    assert rep.train_ms > 0 and rep.mean_infer_ms > 0 and rep.samples_ms.shape == (50,)
    cold = timing_harness(g, splits[0], quick(), n_inference=5, warmup=False, model=Network(quick(), 8, 3))
    assert np.isnan(cold.train_ms) and not cold.warmup


def test_cornell_sized_training_under_a_minute():
    g = make_synthetic(n=183, num_features=1703, num_classes=5, avg_degree=3.4, edge_homophily=0.3,
                       binary=True, seed=1)
    split = generate_splits(g, 0, n_splits=1)[0]
    cfg = ModelConfig(variant="EQ10", hidden_dim=128, num_layers=1, patience=100, max_epochs=1500)
    t0 = time.perf_counter()
    train_one(g, split, cfg)
    assert time.perf_counter() - t0 < 60


def test_deep_model_embeddings_do_not_collapse():
    g = make_synthetic(n=120, num_features=20, num_classes=5, edge_homophily=0.2, seed=4)
    split = generate_splits(g, 0, n_splits=1)[0]
    cfg = ModelConfig(variant="EQ3", num_layers=16, hidden_dim=32, alpha=0.5, max_epochs=100, patience=20)
    _, model = train_one(g, split, cfg, return_model=True)
    assert embedding_variance(model, GraphInputs.from_graph(g)) > 1e-6
