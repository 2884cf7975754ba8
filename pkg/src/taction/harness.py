"""Evaluation protocol: repeated seeded 80/20 splits and the three model
experiment drivers.

Every repeat derives its RNG from hash(base_seed, repeat_index), so results
are identical regardless of scheduling or worker count; aggregation is an
ordered reduce over the repeat index.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from ._kernels import mix_seed
from .analysis import null_model
from .config import ModelConfig, ProtocolConfig
from .curvefit import r_squared
from .dataio import ADJECTIVE_PAIRS, RatingMatrix
from .extract import FeatureVector
from .models import Dataset, predict, predict_class, train
from .registry import GROUP_OF, group_mask


@dataclass
class EvalReport:
    task: str
    model_kind: str
    group: str
    metrics: tuple[str, ...]
    per_repeat: list[dict]
    aggregate: dict[str, dict[str, float]]
    seeds: list[int]
    protocol: dict
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"task": self.task, "model_kind": self.model_kind,
                "group": self.group, "metrics": list(self.metrics),
                "per_repeat": self.per_repeat, "aggregate": self.aggregate,
                "seeds": self.seeds, "protocol": self.protocol,
                "meta": self.meta}


def _aggregate(per_repeat: list[dict], metrics) -> dict:
    out = {}
    for metric in metrics:
        values = np.array([r[metric] for r in per_repeat])
        out[metric] = {"mean": float(np.mean(values)),
                       "std": float(np.std(values))}
    return out


def split(dataset: Dataset, protocol: ProtocolConfig,
          repeat_index: int) -> tuple[np.ndarray, np.ndarray]:
    """One seeded shuffle split; stratified by label for classification.

    With ``protocol.surface_holdout`` and a dataset carrying per-row
    sample groups (surface ids), whole groups go to one side, so a surface
    never spans train and test. Returns (train_indices, test_indices),
    each sorted ascending; the two are disjoint and cover the dataset.
    """
    n = dataset.X.shape[0]
    if n < 10:
        raise ValueError(f"dataset too small to split: {n} < 10")
    seed = mix_seed(protocol.base_seed, repeat_index)
    rng = np.random.default_rng(seed)
    test_frac = 1.0 - protocol.train_fraction

    if protocol.surface_holdout and dataset.sample_groups is not None:
        groups = dataset.sample_groups
        uniq = sorted(set(groups.tolist()))
        if dataset.task == "classification" and protocol.stratified:
            label_of = {}
            labels = np.array([str(v) for v in dataset.y])
            for g in uniq:
                label_of[g] = labels[groups == g][0]
            held = []
            for label in sorted(set(label_of.values())):
                members = [g for g in uniq if label_of[g] == label]
                if len(members) < 2:
                    raise ValueError(f"class {label!r} has a single surface; "
                                     "cannot stratify the holdout")
                k = int(round(test_frac * len(members)))
                k = min(max(k, 1), len(members) - 1)
                perm = rng.permutation(len(members))
                held += [members[i] for i in perm[:k]]
        else:
            k = int(round(test_frac * len(uniq)))
            k = min(max(k, 1), len(uniq) - 1)
            perm = rng.permutation(len(uniq))
            held = [uniq[i] for i in perm[:k]]
        held_set = set(held)
        test = np.sort(np.nonzero([g in held_set for g in groups])[0])
    elif protocol.stratified and dataset.task == "classification":
        labels = np.array([str(v) for v in dataset.y])
        test_parts = []
        for label in sorted(set(labels)):
            members = np.nonzero(labels == label)[0]
            if members.size < 2:
                raise ValueError(f"class {label!r} has a single sample; "
                                 "cannot stratify")
            k = int(round(test_frac * members.size))
            k = min(max(k, 1), members.size - 1)
            perm = rng.permutation(members.size)
            test_parts.append(members[perm[:k]])
        test = np.sort(np.concatenate(test_parts))
    else:
        k = int(round(test_frac * n))
        k = min(max(k, 1), n - 1)
        perm = rng.permutation(n)
        test = np.sort(perm[:k])
    mask = np.ones(n, dtype=bool)
    mask[test] = False
    train_idx = np.nonzero(mask)[0]
    return train_idx, test

def evaluate_dataset(dataset: Dataset, protocol: ProtocolConfig,
                     kind: str, config: ModelConfig | None = None,
                     group: str = "all", task_id: str | None = None) -> EvalReport:
    """Repeated-holdout evaluation of one model kind on one dataset."""
    config = config or ModelConfig()
    dataset.validate()
    classification = dataset.task == "classification"
    metrics = ("accuracy",) if classification else ("mse", "r_squared")
    per_repeat = []
    seeds = []
    for rep in range(protocol.repeats):
        train_idx, test_idx = split(dataset, protocol, rep)
        model_seed = mix_seed(mix_seed(protocol.base_seed, rep), 1)
        seeds.append(model_seed)
        model = train(kind, dataset.subset(rows=train_idx), seed=model_seed,
                      config=config)
        X_test = dataset.X[test_idx]
        y_test = dataset.y[test_idx]
        if classification:
            pred = predict_class(model, X_test)
            acc = float(np.mean(pred == np.array([str(v) for v in y_test])))
            per_repeat.append({"repeat": rep, "accuracy": acc})
        else:
            pred = predict(model, X_test)
            mse = float(np.mean((pred - y_test) ** 2))
            r2 = r_squared(y_test, pred) if np.ptp(y_test) > 0 else 0.0
            per_repeat.append({"repeat": rep, "mse": mse, "r_squared": r2})
    return EvalReport(
        task=task_id or ("classification" if classification else "regression"),
        model_kind=kind, group=group, metrics=metrics,
        per_repeat=per_repeat, aggregate=_aggregate(per_repeat, metrics),
        seeds=seeds, protocol=_protocol_dict(protocol))


def _protocol_dict(protocol: ProtocolConfig) -> dict:
    return {"train_fraction": protocol.train_fraction,
            "repeats": protocol.repeats,
            "stratified": protocol.stratified,
            "base_seed": protocol.base_seed,
            "surface_holdout": protocol.surface_holdout}


# ---------------------------------------------------------------------------
# Dataset construction from extracted features and ratings
# ---------------------------------------------------------------------------


def features_to_dataset(features: list[FeatureVector],
                        group: str = "all") -> Dataset:
    """Material-classification dataset from assembled feature vectors."""
    if not features:
        raise ValueError("no feature vectors")
    names = group_mask(group)
    X = np.array([[fv.values[n] for n in names] for fv in features])
    y = np.array([fv.material_class for fv in features], dtype=object)
    surfaces = np.array([fv.surface_id for fv in features])
    return Dataset(X=X, y=y, feature_names=names, task="classification",
                   group_tags={n: GROUP_OF[n] for n in names},
                   sample_groups=surfaces)


def rating_targets(features: list[FeatureVector], ratings: RatingMatrix,
                   pair: str) -> np.ndarray:
    """Averaged rating of each sample's surface (the Model 1 target)."""
    if pair not in ratings.pairs:
        raise ValueError(f"unknown adjective pair {pair!r}")
    col = ratings.pairs.index(pair)
    by_surface = {sid: float(ratings.averaged[i, col])
                  for i, sid in enumerate(ratings.surface_ids)}
    out = np.empty(len(features))
    for i, fv in enumerate(features):
        if fv.surface_id not in by_surface:
            raise ValueError(f"surface {fv.surface_id} has no rating; "
                             "cannot join features with ratings")
        out[i] = by_surface[fv.surface_id]
    return out


# ---------------------------------------------------------------------------
# The three model drivers
# ---------------------------------------------------------------------------


def run_model1(features: list[FeatureVector], ratings: RatingMatrix,
               protocol: ProtocolConfig, feature_group: str = "all",
               config: ModelConfig | None = None) -> dict[str, dict[str, EvalReport]]:
    """Sensation-rating regression per adjective pair, plus the null baseline.

    One rf_regressor per pair per repeat; the null row draws uniform(0, 1)
    predictions with a per-repeat derived seed.
    """
    config = config or ModelConfig()
    names = group_mask(feature_group)
    X = np.array([[fv.values[n] for n in names] for fv in features])
    reg_protocol = protocol if not protocol.stratified else \
        ProtocolConfig(train_fraction=protocol.train_fraction,
                       repeats=protocol.repeats, stratified=False,
                       base_seed=protocol.base_seed,
                       surface_holdout=protocol.surface_holdout)
    surfaces = np.array([fv.surface_id for fv in features])
    out: dict[str, dict[str, EvalReport]] = {}
    for pair in ADJECTIVE_PAIRS:
        y = rating_targets(features, ratings, pair)
        dataset = Dataset(X=X, y=y, feature_names=names, task="regression",
                          group_tags={n: GROUP_OF[n] for n in names},
                          sample_groups=surfaces)
        report = evaluate_dataset(dataset, reg_protocol, "rf_regressor",
                                  config=config, group=feature_group,
                                  task_id=f"model1:{pair}")
        null_rows = []
        for rep in range(reg_protocol.repeats):
            _, test_idx = split(dataset, reg_protocol, rep)
            null_seed = mix_seed(mix_seed(reg_protocol.base_seed, rep), 2)
            pred = null_model(test_idx.size, seed=null_seed)
            y_test = y[test_idx]
            mse = float(np.mean((pred - y_test) ** 2))
            r2 = r_squared(y_test, pred) if np.ptp(y_test) > 0 else 0.0
            null_rows.append({"repeat": rep, "mse": mse, "r_squared": r2})
        null_report = EvalReport(
            task=f"model1:{pair}", model_kind="null", group=feature_group,
            metrics=("mse", "r_squared"), per_repeat=null_rows,
            aggregate=_aggregate(null_rows, ("mse", "r_squared")),
            seeds=[mix_seed(mix_seed(reg_protocol.base_seed, rep), 2)
                   for rep in range(reg_protocol.repeats)],
            protocol=_protocol_dict(reg_protocol))
        out[pair] = {"rf_regressor": report, "null": null_report}
    return out


def run_model2(ratings: RatingMatrix, surface_materials: dict[int, str],
               protocol: ProtocolConfig, kinds=("rf_classifier", "knn",
                                                "gaussian_nb", "logistic"),
               config: ModelConfig | None = None,
               sample_surfaces: list[int] | None = None) -> dict[str, EvalReport]:
    """Material classification from the five averaged sensation ratings.

    By default samples are the surfaces themselves (n = 50); passing
    ``sample_surfaces`` (one surface id per sample) switches to per-trial
    samples with each sample inheriting its surface's rating row.
    """
    config = config or ModelConfig()
    rows = {sid: ratings.averaged[i]
            for i, sid in enumerate(ratings.surface_ids)}
    sids = sample_surfaces if sample_surfaces is not None \
        else list(ratings.surface_ids)
    missing = [s for s in sids if s not in rows]
    if missing:
        raise ValueError(f"no rating row for surfaces {missing[:5]}")
    X = np.array([rows[s] for s in sids])
    y = np.array([surface_materials[s] for s in sids], dtype=object)
    names = tuple(f"rating_{p}" for p in ratings.pairs)
    dataset = Dataset(X=X, y=y, feature_names=names, task="classification")
    return {kind: evaluate_dataset(dataset, protocol, kind, config=config,
                                   group="ratings", task_id="model2")
            for kind in kinds}


def run_model3(features: list[FeatureVector], protocol: ProtocolConfig,
               kinds=("rf_classifier", "knn", "gaussian_nb", "logistic"),
               groups=("pressing", "thermal", "sliding", "all"),
               config: ModelConfig | None = None) -> dict[tuple[str, str], EvalReport]:
    """Material classification from tactile features, per kind and group."""
    config = config or ModelConfig()
    out: dict[tuple[str, str], EvalReport] = {}
    for group in groups:
        dataset = features_to_dataset(features, group)
        for kind in kinds:
            out[(kind, group)] = evaluate_dataset(
                dataset, protocol, kind, config=config, group=group,
                task_id="model3")
    return out


# ---------------------------------------------------------------------------
# Report output
# ---------------------------------------------------------------------------


def save_report_json(report: EvalReport, path, config_hash: str,
                     config: dict | None = None) -> None:
    doc = report.to_dict()
    doc["config_hash"] = config_hash
    if config is not None:
        doc["config"] = config
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def write_reports_csv(reports: list[EvalReport], path) -> None:
    """Flat CSV: one row per repeat x task x model x metric."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["task", "model_kind", "group", "repeat",
                         "metric", "value"])
        for report in reports:
            for row in report.per_repeat:
                for metric in report.metrics:
                    writer.writerow([report.task, report.model_kind,
                                     report.group, row["repeat"], metric,
                                     repr(row[metric])])
