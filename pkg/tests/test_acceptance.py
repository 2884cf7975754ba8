"""Acceptance suite: one test per criterion, each printing PASS on success.

Criterion 7 is conditional on real recording + rating data; point
TACTION_REAL_DATA_DIR at a corpus root (with ratings.json) to enable it.
Run with ``pytest tests/test_acceptance.py -v -s`` for the per-criterion
lines.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest

from taction import dsp, synth
from taction.analysis import classical_mds, null_model, pca, spearman_matrix
from taction.cli import main as cli_main
from taction.config import ForestConfig, ModelConfig, ProtocolConfig
from taction.curvefit import fit
from taction.harness import features_to_dataset, run_model3, split
from taction.models import Dataset, predict_class, train
from taction.registry import FEATURE_GROUPS

from _grids import RECOVERY_GRID, relative_errors
from test_dsp import _reference_mfcc


def _announce(criterion: str, detail: str):
    print(f"\nACCEPTANCE {criterion}: PASS ({detail})")


def test_criterion_1_curvefit_recovery_grid():
    t0 = time.perf_counter()
    worst_err = 0.0
    worst_r2 = 1.0
    n_fits = 0
    for kind, rows in RECOVERY_GRID.items():
        assert len(rows) >= 25
        for i, (params, x_lo, x_hi) in enumerate(rows):
            x, y = synth.curve_samples(kind, params, 100, x_lo, x_hi)
            res = fit(kind, x, y)
            n_fits += 1
            errs = relative_errors(res.params, params)
            assert max(errs) <= 1e-3, (kind, params, errs)
            assert res.r_squared >= 0.9999, (kind, params, res.r_squared)
            worst_err = max(worst_err, max(errs))
            worst_r2 = min(worst_r2, res.r_squared)
            xn, yn = synth.curve_samples(kind, params, 100, x_lo, x_hi,
                                         noise=0.01, seed=4000 + i)
            noisy = fit(kind, xn, yn)
            n_fits += 1
            assert noisy.r_squared >= 0.99, (kind, params, noisy.r_squared)
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0, f"recovery grid took {elapsed:.2f} s"
    _announce("1", f"{n_fits} fits, worst rel err {worst_err:.2e}, "
                   f"worst R2 {worst_r2:.6f}, {elapsed:.2f} s")


def test_criterion_2_dsp_oracles(rng):
    fs = 10_000.0
    t = np.arange(int(fs)) / fs
    sine = np.sin(2 * np.pi * 50 * t)
    d = dsp.time_descriptors(sine).values
    assert d["s3"] == pytest.approx(1 / np.sqrt(2), abs=1e-3)
    assert d["s9"] == pytest.approx(np.sqrt(2), abs=1e-2)

    t2 = np.arange(4000) / 2000.0
    spec = dsp.power_spectrum(np.sin(2 * np.pi * 100 * t2), 2000.0)
    bin_width = spec.freqs_hz[1] - spec.freqs_hz[0]
    assert abs(spec.freqs_hz[np.argmax(spec.power)] - 100.0) <= bin_width

    flat = dsp.Spectrum(freqs_hz=np.linspace(0, 500, 128),
                        power=np.full(128, 3.0), source_rate_hz=1000.0)
    assert dsp.spectral_descriptors(flat).values["s18"] == \
        pytest.approx(1.0, abs=1e-6)

    x = rng.normal(size=5000) * 2.0
    ours = dsp.mfcc(x, 8000.0)
    ref = _reference_mfcc(x, 8000.0)
    worst = float(np.max(np.abs(ours - ref)))
    assert worst <= 1e-6
    _announce("2", f"RMS/crest/peak/flatness exact, MFCC vs reference "
                   f"max diff {worst:.2e}")


def test_criterion_3_feature_registry_closure(features):
    assert len(features) == 100
    for fv in features:
        vals = fv.values
        assert len(vals) == 98
        assert all(np.isfinite(v) for v in vals.values())
    groups = {g: len(names) for g, names in FEATURE_GROUPS.items()}
    assert groups == {"pressing": 6, "thermal": 15, "sliding": 77}
    assert sum(groups.values()) == 98
    _announce("3", f"{len(features)} samples x 98 finite features, "
                   f"partition 6/15/77")


def test_criterion_4_statistical_oracles(rng):
    from scipy.stats import spearmanr
    X = rng.normal(size=(50, 5))
    X[rng.random(size=X.shape) < 0.15] = 1.0
    ours = spearman_matrix(X)
    oracle = spearmanr(X).statistic
    assert np.allclose(ours, oracle, atol=1e-12)

    pts = rng.normal(size=(15, 2))
    D = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    coords = classical_mds(D, k=2).coords
    got = np.sqrt(((coords[:, None] - coords[None]) ** 2).sum(-1))
    assert np.allclose(got, D, atol=1e-6)

    line = np.column_stack([np.linspace(-3, 3, 60),
                            2.0 * np.linspace(-3, 3, 60)])
    ratios = pca(line, k=2, standardize=False).explained_variance_ratio
    assert ratios[0] == pytest.approx(1.0, abs=1e-12)
    assert ratios[1] == pytest.approx(0.0, abs=1e-12)

    draws = null_model(100_000, seed=21)
    targets = np.random.default_rng(77).uniform(0, 1, 100_000)
    mse = float(np.mean((draws - targets) ** 2))
    assert mse == pytest.approx(1.0 / 6.0, abs=0.005)
    _announce("4", f"spearman<=1e-12, MDS<=1e-6, PCA [1,0], "
                   f"null MSE {mse:.4f} vs 1/6")


def test_criterion_5_pipeline_property_suite(features, rng):
    t0 = time.perf_counter()
    proto = ProtocolConfig(repeats=100, base_seed=17)
    config = ModelConfig()     # the full 300-tree default

    results = run_model3(features, proto, kinds=("rf_classifier",),
                         groups=("all",), config=config)
    acc = results[("rf_classifier", "all")].aggregate["accuracy"]["mean"]
    assert acc >= 0.95, f"combined rf accuracy {acc:.3f}"

    dataset = features_to_dataset(features)
    y_shuffled = dataset.y[rng.permutation(dataset.y.size)]
    shuffled = Dataset(X=dataset.X, y=y_shuffled,
                       feature_names=dataset.feature_names,
                       task="classification")
    from taction.harness import evaluate_dataset
    chance = evaluate_dataset(shuffled, proto, "rf_classifier",
                              config=config)
    acc_chance = chance.aggregate["accuracy"]["mean"]
    assert abs(acc_chance - 0.10) <= 0.05, f"shuffled accuracy {acc_chance:.3f}"

    # leakage canary: label leaked into test rows only must not help
    fast = ModelConfig(forest=ForestConfig(n_trees=60))
    labels = np.repeat([f"c{i}" for i in range(10)], 10)
    codes = np.repeat(np.arange(10, dtype=float), 10)
    canary_proto = ProtocolConfig(repeats=25, base_seed=19)
    accs = []
    rng2 = np.random.default_rng(23)
    for rep in range(canary_proto.repeats):
        X = rng2.normal(size=(100, 8))
        data = Dataset(X=X, y=np.array(labels, dtype=object),
                       feature_names=tuple(f"f{i}" for i in range(8)),
                       task="classification")
        train_idx, test_idx = split(data, canary_proto, rep)
        X[test_idx, 0] = codes[test_idx] * 5.0
        model = train("rf_classifier", data.subset(rows=train_idx),
                      seed=rep, config=fast)
        accs.append(np.mean(predict_class(model, X[test_idx])
                            == labels[test_idx]))
    canary_acc = float(np.mean(accs))
    assert abs(canary_acc - 0.10) <= 0.08, f"canary accuracy {canary_acc:.3f}"

    elapsed = time.perf_counter() - t0
    assert elapsed < 120.0, f"pipeline property suite took {elapsed:.1f} s"
    _announce("5", f"rf accuracy {acc:.3f}, shuffled {acc_chance:.3f}, "
                   f"canary {canary_acc:.3f}, {elapsed:.1f} s")


def test_criterion_6_determinism_full_pipeline(tmp_path):
    outputs = {}
    for tag, workers in (("a", "1"), ("b", "4")):
        root = tmp_path / tag
        corpus = root / "corpus"
        feats = root / "feats"
        m3 = root / "m3"
        assert cli_main(["synth", "--out", str(corpus), "--seed", "33",
                         "--raters", "4"]) == 0
        assert cli_main(["extract", "--corpus", str(corpus),
                         "--ratings", str(corpus / "ratings.json"),
                         "--out", str(feats), "--workers", workers]) == 0
        assert cli_main(["model3", "--features", str(feats / "features.csv"),
                         "--out", str(m3), "--groups", "all",
                         "--kinds", "rf_classifier", "--repeats", "3",
                         "--seed", "33", "--workers", workers]) == 0
        assert cli_main(["report", "--inputs", str(m3),
                         "--out", str(root / "report.csv")]) == 0
        outputs[tag] = root

    compared = 0
    for rel in ["corpus/manifest.json", "corpus/ratings.json",
                "corpus/truth_table.csv", "feats/features.csv",
                "feats/features_flags.json", "report.csv"]:
        a = (outputs["a"] / rel).read_bytes()
        b = (outputs["b"] / rel).read_bytes()
        assert a == b, f"{rel} differs between runs"
        compared += 1
    for path_a in sorted((outputs["a"] / "m3").iterdir()):
        path_b = outputs["b"] / "m3" / path_a.name
        assert path_a.read_bytes() == path_b.read_bytes(), path_a.name
        compared += 1
    _announce("6", f"{compared} artifacts byte-identical across runs "
                   f"with worker counts 1 and 4")


REAL_DATA_ENV = "TACTION_REAL_DATA_DIR"


@pytest.mark.skipif(REAL_DATA_ENV not in os.environ,
                    reason="criterion 7 is conditional on real recording and "
                           "rating data; set TACTION_REAL_DATA_DIR to enable")
def test_criterion_7_real_data_reproduction():
    from taction.dataio import load_corpus, load_ratings, normalize_ratings
    from taction.extract import assemble_features
    from taction.harness import run_model2
    from taction.models import rf_feature_importance
    from taction.analysis import topk_curve

    root = Path(os.environ[REAL_DATA_ENV])
    manifest = load_corpus(root)
    ratings = normalize_ratings(load_ratings(root / "ratings.json"))
    features = assemble_features(manifest, workers=os.cpu_count() or 1)
    proto = ProtocolConfig(repeats=100, base_seed=0)
    config = ModelConfig()

    results = run_model3(features, proto, kinds=("rf_classifier",),
                         groups=("all",), config=config)
    acc = results[("rf_classifier", "all")].aggregate["accuracy"]["mean"]
    assert 0.89 <= acc <= 0.99, f"combined accuracy {acc:.3f} outside 94±5"

    dataset = features_to_dataset(features)
    model = train("rf_classifier", dataset, seed=0, config=config)
    ranking = rf_feature_importance(model)
    ks = [1, 3, 5, 10, 15, 20, 25, 30, 40, 60, 98]
    curve = topk_curve(dataset, ranking, ks, proto, config=config)
    best_k = max(curve, key=curve.get)
    assert 15 <= best_k <= 40 and curve[best_k] >= 0.90
    assert curve[5] >= 0.75
    top5_groups = {FEATURE_GROUPS_LOOKUP[n] for n in ranking.top(5)}
    assert top5_groups == {"thermal"}

    materials = {sid: manifest.material_of(sid) for sid in manifest.surfaces}
    m2 = run_model2(ratings, materials, proto, config=config)
    best = max(r.aggregate["accuracy"]["mean"] for r in m2.values())
    assert best >= 0.65

    sens = pca(ratings.averaged, k=2, standardize=True)
    assert sens.explained_variance_ratio[:2].sum() >= 0.75
    feats_pca = pca(dataset.X, k=2, standardize=True)
    assert 0.30 <= feats_pca.explained_variance_ratio[:2].sum() <= 0.55
    _announce("7", f"real-data bands met (accuracy {acc:.3f})")


FEATURE_GROUPS_LOOKUP = {name: group
                         for group, names in FEATURE_GROUPS.items()
                         for name in names}
