"""Analysis tests: PCA, MDS, distances, Spearman, null model, top-k, ablation."""

import numpy as np
import pytest

from taction.analysis import (classical_mds, null_model, participant_distance,
                              pca, spearman_matrix, topk_curve, ablation)
from taction.config import ForestConfig, ModelConfig, ProtocolConfig
from taction.models import Dataset, rf_feature_importance, train

FAST = ModelConfig(forest=ForestConfig(n_trees=40))
PROTO = ProtocolConfig(repeats=8, base_seed=3)


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------


def test_pca_rank_one_data():
    t = np.linspace(-2, 2, 40)
    X = np.column_stack([3 * t, -1.5 * t])
    res = pca(X, k=2, standardize=False)
    assert res.explained_variance_ratio[0] == pytest.approx(1.0, abs=1e-12)
    assert res.explained_variance_ratio[1] == pytest.approx(0.0, abs=1e-12)


def test_pca_isotropic_gaussian(rng):
    X = rng.normal(size=(4000, 2))
    res = pca(X, k=2, standardize=False)
    assert res.explained_variance_ratio[0] == pytest.approx(0.5, abs=0.05)
    assert res.explained_variance_ratio[1] == pytest.approx(0.5, abs=0.05)


def test_pca_full_rank_reconstruction(rng):
    X = rng.normal(size=(30, 5)) @ rng.normal(size=(5, 5)) + rng.normal(size=5)
    res = pca(X, k=5, standardize=False)
    recon = res.scores @ res.components + res.mean
    assert np.allclose(recon, X, atol=1e-9)


def test_pca_components_orthonormal(rng):
    X = rng.normal(size=(50, 8))
    res = pca(X, k=4)
    gram = res.components @ res.components.T
    assert np.allclose(gram, np.eye(4), atol=1e-9)
    assert np.all(np.diff(res.explained_variance_ratio) <= 1e-12)


def test_pca_sample_order_invariance(rng):
    X = rng.normal(size=(60, 5))
    base = pca(X, k=3).explained_variance_ratio
    rolled = pca(X[rng.permutation(60)], k=3).explained_variance_ratio
    assert np.allclose(base, rolled, atol=1e-12)


def test_pca_sign_convention(rng):
    X = rng.normal(size=(40, 6))
    res = pca(X, k=3)
    for row in res.components:
        assert row[np.argmax(np.abs(row))] > 0


# ---------------------------------------------------------------------------
# classical MDS
# ---------------------------------------------------------------------------


def test_mds_three_colinear_points():
    D = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]])
    res = classical_mds(D, k=2)
    got = np.sqrt(((res.coords[:, None] - res.coords[None]) ** 2).sum(-1))
    assert np.allclose(got, D, atol=1e-9)
    assert np.allclose(res.coords.mean(axis=0), 0.0, atol=1e-9)


def test_mds_zero_matrix():
    res = classical_mds(np.zeros((4, 4)), k=2)
    assert np.allclose(res.coords, 0.0)


def test_mds_roundtrip_random_2d(rng):
    pts = rng.normal(size=(12, 2))
    D = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    res = classical_mds(D, k=2)
    got = np.sqrt(((res.coords[:, None] - res.coords[None]) ** 2).sum(-1))
    assert np.allclose(got, D, atol=1e-6)


def test_mds_rejects_bad_input():
    with pytest.raises(ValueError):
        classical_mds(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ValueError):
        classical_mds(-np.ones((3, 3)))


# ---------------------------------------------------------------------------
# participant distances
# ---------------------------------------------------------------------------


def test_participant_distance_identical_and_unit():
    v = np.arange(50.0) / 50.0
    ids, D = participant_distance({"a": v, "b": v.copy()})
    assert D[0, 1] == 0.0
    w = v.copy()
    w[7] += 1.0
    ids, D = participant_distance({"a": v, "b": w})
    assert D[0, 1] == pytest.approx(1.0)


def test_participant_distance_bruteforce(rng):
    vecs = {f"p{i}": rng.normal(size=50) for i in range(6)}
    ids, D = participant_distance(vecs)
    for i, a in enumerate(ids):
        for j, b in enumerate(ids):
            expected = np.sqrt(np.sum((vecs[a] - vecs[b]) ** 2))
            assert D[i, j] == pytest.approx(expected, abs=1e-12)


# ---------------------------------------------------------------------------
# Spearman
# ---------------------------------------------------------------------------


def test_spearman_self_and_reverse(rng):
    col = rng.normal(size=50)
    m = spearman_matrix(np.column_stack([col, col, col[::-1] * 0 - col]))
    assert m[0, 1] == pytest.approx(1.0)
    assert m[0, 2] == pytest.approx(-1.0)
    assert np.allclose(np.diag(m), 1.0)


def test_spearman_matches_scipy_oracle(rng):
    from scipy.stats import spearmanr
    X = rng.normal(size=(50, 5))
    X[rng.random(size=X.shape) < 0.2] = 0.5        # inject ties
    ours = spearman_matrix(X)
    oracle = spearmanr(X).statistic
    assert np.allclose(ours, oracle, atol=1e-12)
    assert np.all(np.abs(ours) <= 1.0 + 1e-12)
    assert np.allclose(ours, ours.T, atol=0)


def test_spearman_constant_column_flagged():
    X = np.column_stack([np.ones(10), np.arange(10.0)])
    with pytest.warns(UserWarning, match="constant"):
        m = spearman_matrix(X)
    assert m[0, 1] == 0.0
    assert m[0, 0] == 1.0


# ---------------------------------------------------------------------------
# null model
# ---------------------------------------------------------------------------


def test_null_model_mse_against_constant_half():
    draws = null_model(100_000, seed=1)
    mse = np.mean((draws - 0.5) ** 2)
    assert mse == pytest.approx(1.0 / 12.0, abs=0.005)


def test_null_model_mse_against_uniform_targets():
    draws = null_model(100_000, seed=2)
    targets = np.random.default_rng(99).uniform(0, 1, 100_000)
    mse = np.mean((draws - targets) ** 2)
    assert mse == pytest.approx(1.0 / 6.0, abs=0.005)


def test_null_model_seeded_reproducible():
    assert np.array_equal(null_model(1000, seed=7), null_model(1000, seed=7))


# ---------------------------------------------------------------------------
# top-k and ablation
# ---------------------------------------------------------------------------


def _informative_dataset(rng, n=120, p=20, informative=(0, 3, 7)):
    X = rng.normal(size=(n, p))
    score = sum(X[:, i] for i in informative)
    y = np.where(score > 0, "pos", "neg").astype(object)
    return Dataset(X=X, y=y, feature_names=tuple(f"f{i}" for i in range(p)),
                   task="classification")


def test_topk_full_k_equals_full_accuracy(rng):
    data = _informative_dataset(rng)
    model = train("rf_classifier", data, seed=1, config=FAST)
    ranking = rf_feature_importance(model)
    from taction.harness import evaluate_dataset
    full = evaluate_dataset(data, PROTO, "rf_classifier", config=FAST)
    curve = topk_curve(data, ranking, [data.X.shape[1]], PROTO, config=FAST)
    assert curve[data.X.shape[1]] == full.aggregate["accuracy"]["mean"]


def test_topk_informative_features_suffice(rng):
    data = _informative_dataset(rng)
    model = train("rf_classifier", data, seed=1, config=FAST)
    ranking = rf_feature_importance(model)
    curve = topk_curve(data, ranking, [3, 20], PROTO, config=FAST)
    assert curve[3] >= curve[20] - 0.02


def test_topk_single_feature_beats_chance(rng):
    data = _informative_dataset(rng, informative=(2,))
    model = train("rf_classifier", data, seed=1, config=FAST)
    ranking = rf_feature_importance(model)
    curve = topk_curve(data, ranking, [1], PROTO, config=FAST)
    assert curve[1] > 0.6        # binary chance is 0.5


def test_topk_rejects_empty_or_bad_ks(rng):
    data = _informative_dataset(rng)
    model = train("rf_classifier", data, seed=1, config=FAST)
    ranking = rf_feature_importance(model)
    with pytest.raises(ValueError):
        topk_curve(data, ranking, [], PROTO)
    with pytest.raises(ValueError):
        topk_curve(data, ranking, [999], PROTO)


def test_ablation_groups_and_all(features):
    from taction.harness import features_to_dataset
    dataset = features_to_dataset(features)
    proto = ProtocolConfig(repeats=3, base_seed=5)
    reports = ablation(("pressing", "thermal", "all"), dataset, proto,
                       config=FAST)
    assert set(reports) == {"pressing", "thermal", "all"}
    from taction.harness import evaluate_dataset
    direct = evaluate_dataset(dataset, proto, "rf_classifier", config=FAST,
                              group="all")
    assert reports["all"].aggregate["accuracy"]["mean"] == \
        direct.aggregate["accuracy"]["mean"]


def test_ablation_unknown_group_rejected(features):
    from taction.harness import features_to_dataset
    dataset = features_to_dataset(features)
    with pytest.raises(ValueError, match="unknown feature group"):
        ablation(("nonsense",), dataset, PROTO)
