"""Harness tests: splits, drivers, leakage canary, aggregation, determinism."""

import numpy as np
import pytest

from taction.config import ForestConfig, ModelConfig, ProtocolConfig
from taction.harness import (evaluate_dataset, features_to_dataset,
                             rating_targets, run_model1, run_model2,
                             run_model3, split)
from taction.models import Dataset, predict_class, train

FAST = ModelConfig(forest=ForestConfig(n_trees=40))


def _classification_dataset(rng, n_per=10, n_classes=10):
    X = []
    y = []
    for c in range(n_classes):
        X.append(rng.normal(0, 1, (n_per, 4)) + 6.0 * c)
        y += [f"m{c}"] * n_per
    return Dataset(X=np.vstack(X), y=np.array(y, dtype=object),
                   feature_names=("f0", "f1", "f2", "f3"),
                   task="classification")


# ---------------------------------------------------------------------------
# split
# ---------------------------------------------------------------------------


def test_split_sizes_80_20(rng):
    data = Dataset(X=rng.normal(size=(100, 3)), y=rng.uniform(0, 1, 100),
                   feature_names=("a", "b", "c"), task="regression")
    proto = ProtocolConfig(repeats=1, base_seed=0, stratified=False)
    train_idx, test_idx = split(data, proto, 0)
    assert train_idx.size == 80 and test_idx.size == 20
    assert np.intersect1d(train_idx, test_idx).size == 0
    assert np.union1d(train_idx, test_idx).size == 100


def test_split_deterministic(rng):
    data = _classification_dataset(rng)
    proto = ProtocolConfig(repeats=1, base_seed=42)
    a = split(data, proto, 3)
    b = split(data, proto, 3)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    c = split(data, proto, 4)
    assert not np.array_equal(a[1], c[1])


def test_split_stratified_counts(rng):
    data = _classification_dataset(rng, n_per=10, n_classes=10)
    proto = ProtocolConfig(repeats=1, base_seed=7, stratified=True)
    train_idx, test_idx = split(data, proto, 0)
    labels = data.y
    for label in set(labels):
        n_train = np.sum(labels[train_idx] == label)
        n_test = np.sum(labels[test_idx] == label)
        assert (n_train, n_test) == (8, 2)


def test_split_surface_holdout_never_spans(features):
    dataset = features_to_dataset(features)
    proto = ProtocolConfig(repeats=1, base_seed=5, surface_holdout=True)
    train_idx, test_idx = split(dataset, proto, 0)
    train_surfaces = set(dataset.sample_groups[train_idx].tolist())
    test_surfaces = set(dataset.sample_groups[test_idx].tolist())
    assert not train_surfaces & test_surfaces
    assert train_surfaces | test_surfaces == set(range(1, 51))
    # stratified holdout: one of each class's five surfaces held out
    assert len(test_surfaces) == 10
    labels = {}
    for i, sid in enumerate(dataset.sample_groups):
        labels.setdefault(dataset.y[i], set()).add(int(sid))
    for label, sids in labels.items():
        assert len(sids & test_surfaces) == 1, label


def test_split_single_sample_class_rejected(rng):
    X = rng.normal(size=(11, 2))
    y = np.array(["a"] * 10 + ["b"], dtype=object)
    data = Dataset(X=X, y=y, feature_names=("f0", "f1"),
                   task="classification")
    with pytest.raises(ValueError, match="single sample"):
        split(data, ProtocolConfig(stratified=True), 0)


# ---------------------------------------------------------------------------
# aggregation and reports
# ---------------------------------------------------------------------------


def test_aggregate_mean_matches_per_repeat(rng):
    data = _classification_dataset(rng)
    proto = ProtocolConfig(repeats=7, base_seed=1)
    report = evaluate_dataset(data, proto, "rf_classifier", config=FAST)
    per = np.array([r["accuracy"] for r in report.per_repeat])
    assert per.size == 7
    assert report.aggregate["accuracy"]["mean"] == pytest.approx(
        float(np.mean(per)), abs=1e-12)


def test_reports_identical_across_runs(rng):
    data = _classification_dataset(rng)
    proto = ProtocolConfig(repeats=5, base_seed=11)
    a = evaluate_dataset(data, proto, "rf_classifier", config=FAST)
    b = evaluate_dataset(data, proto, "rf_classifier", config=FAST)
    assert a.to_dict() == b.to_dict()


# ---------------------------------------------------------------------------
# leakage canary
# ---------------------------------------------------------------------------


def test_leakage_canary_stays_at_chance(rng):
    """A feature equal to the label code on test rows only must not help.

    If any stage fit on test data (standardizer or model), the canary
    column would be perfectly predictive and accuracy would leave chance.
    """
    n_per, n_classes = 12, 5
    labels = np.repeat([f"c{i}" for i in range(n_classes)], n_per)
    codes = np.repeat(np.arange(n_classes, dtype=float), n_per)
    proto = ProtocolConfig(repeats=20, base_seed=3)
    accs = []
    rng_local = np.random.default_rng(0)
    for rep in range(proto.repeats):
        X = rng_local.normal(size=(n_per * n_classes, 6))
        data = Dataset(X=X, y=np.array(labels, dtype=object),
                       feature_names=tuple(f"f{i}" for i in range(6)),
                       task="classification")
        train_idx, test_idx = split(data, proto, rep)
        X_canary = X.copy()
        X_canary[test_idx, 0] = codes[test_idx] * 10.0
        canary = Dataset(X=X_canary, y=data.y,
                         feature_names=data.feature_names,
                         task="classification")
        model = train("rf_classifier", canary.subset(rows=train_idx),
                      seed=rep, config=FAST)
        pred = predict_class(model, X_canary[test_idx])
        accs.append(np.mean(pred == labels[test_idx]))
    assert np.mean(accs) == pytest.approx(1.0 / n_classes, abs=0.1)


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------


def test_model1_linear_target_recovered(features, rating_matrix):
    proto = ProtocolConfig(repeats=5, base_seed=2)
    results = run_model1(features, rating_matrix, proto, config=FAST)
    assert set(results) == set(rating_matrix.pairs)
    for pair, by_kind in results.items():
        agg = by_kind["rf_regressor"].aggregate
        null = by_kind["null"].aggregate
        assert agg["mse"]["mean"] < null["mse"]["mean"], pair
        assert agg["r_squared"]["mean"] > 0.8, pair


def test_model1_null_baseline_near_analytic(features, rating_matrix):
    proto = ProtocolConfig(repeats=30, base_seed=4)
    results = run_model1(features, rating_matrix, proto,
                         feature_group="pressing", config=FAST)
    # null MSE vs targets spread over [0,1]: bounded near the uniform value
    for pair, by_kind in results.items():
        null_mse = by_kind["null"].aggregate["mse"]["mean"]
        assert 0.05 < null_mse < 0.4, pair


def test_model1_permuted_targets_lose_signal(features, rating_matrix, rng):
    X = np.array([[fv.values[n] for n in fv.values] for fv in features])
    y = rating_targets(features, rating_matrix, "hard_soft")
    y_perm = y[rng.permutation(y.size)]
    names = tuple(features[0].values)
    data = Dataset(X=X, y=y_perm, feature_names=names, task="regression")
    proto_reg = ProtocolConfig(repeats=5, base_seed=6, stratified=False)
    report = evaluate_dataset(data, proto_reg, "rf_regressor", config=FAST)
    assert report.aggregate["r_squared"]["mean"] <= 0.1


def test_model2_separated_and_shuffled(rng):
    from taction.dataio import ADJECTIVE_PAIRS, MATERIAL_CLASSES
    from taction.dataio import RatingMatrix
    # constructed ratings: each material's surfaces share a distinct profile
    sids = tuple(range(1, 51))
    profiles = rng.uniform(0.1, 0.9, (10, 5))
    averaged = np.vstack([np.tile(profiles[c], (5, 1))
                          for c in range(10)])
    averaged += rng.normal(0, 0.01, averaged.shape)
    ratings = RatingMatrix(surface_ids=sids, pairs=ADJECTIVE_PAIRS,
                           per_participant={}, averaged=averaged)
    materials = {sid: MATERIAL_CLASSES[(sid - 1) // 5] for sid in sids}
    proto = ProtocolConfig(repeats=10, base_seed=8)
    results = run_model2(ratings, materials, proto, kinds=("rf_classifier",),
                         config=FAST)
    assert results["rf_classifier"].aggregate["accuracy"]["mean"] == 1.0

    shuffled = {sid: materials[s] for sid, s in
                zip(sids, rng.permutation(sids))}
    chance = run_model2(ratings, shuffled, proto, kinds=("rf_classifier",),
                        config=FAST)
    assert chance["rf_classifier"].aggregate["accuracy"]["mean"] < 0.35


def test_model3_groups_and_kinds(features):
    proto = ProtocolConfig(repeats=3, base_seed=9)
    results = run_model3(features, proto, kinds=("rf_classifier", "knn"),
                         groups=("thermal", "all"), config=FAST)
    assert set(results) == {("rf_classifier", "thermal"),
                            ("rf_classifier", "all"),
                            ("knn", "thermal"), ("knn", "all")}
    for report in results.values():
        assert report.aggregate["accuracy"]["mean"] > 0.5


def test_rating_targets_join_failure(features, rating_matrix):
    import dataclasses
    broken = dataclasses.replace(
        rating_matrix,
        surface_ids=tuple(s for s in rating_matrix.surface_ids if s != 1),
        averaged=rating_matrix.averaged[1:])
    with pytest.raises(ValueError, match="no rating"):
        rating_targets(features, broken, "hard_soft")
