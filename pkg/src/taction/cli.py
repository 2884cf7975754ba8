"""Command-line front end.

Subcommands: validate, synth, extract, model1, model2, model3, ablate,
topk, pca, mds, spearman, report. Exit codes: 0 success, 1 validation or
usage error, 2 unexpected runtime error. Outputs are CSV + JSON only and
every file embeds the run's config hash and seed, never wall-clock time, so
identical configurations produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, harness, synth
from .config import ConfigError, ProtocolConfig, RunConfig, load_config
from .curvefit import FitDomainError
from .dataio import (ADJECTIVE_PAIRS, DataError, load_corpus, load_ratings,
                     normalize_ratings)
from .extract import (ExtractError, assemble_features, read_features_csv,
                      write_features_csv, write_flags_json)
from .models import rf_feature_importance, train
from .registry import FEATURE_NAMES

USER_ERRORS = (DataError, ConfigError, ExtractError, FitDomainError, ValueError)


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common(sub):
    sub.add_argument("--config", help="JSON config file")
    sub.add_argument("--seed", type=int, help="base seed (overrides config)")
    sub.add_argument("--workers", type=int,
                     help="worker count (default: all processors)")


def _add_protocol(sub):
    sub.add_argument("--repeats", type=int, help="protocol repeats")
    sub.add_argument("--train-fraction", type=float)
    sub.add_argument("--no-stratify", action="store_true")


def _effective_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    proto = cfg.protocol
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["base_seed"] = args.seed
    if getattr(args, "repeats", None) is not None:
        changes["repeats"] = args.repeats
    if getattr(args, "train_fraction", None) is not None:
        changes["train_fraction"] = args.train_fraction
    if getattr(args, "no_stratify", False):
        changes["stratified"] = False
    if changes:
        base = {"train_fraction": proto.train_fraction,
                "repeats": proto.repeats, "stratified": proto.stratified,
                "base_seed": proto.base_seed,
                "surface_holdout": proto.surface_holdout}
        base.update(changes)
        proto = ProtocolConfig(**base)
    workers = args.workers if getattr(args, "workers", None) is not None \
        else cfg.workers
    return RunConfig(fit=cfg.fit, extract=cfg.extract, models=cfg.models,
                     protocol=proto, workers=workers)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _save_reports(reports: dict, out: Path, stem: str, cfg: RunConfig) -> None:
    chash = cfg.config_hash()
    cdict = cfg.semantic_dict()
    flat = []
    for key, report in reports.items():
        name = key if isinstance(key, str) else "_".join(str(k) for k in key)
        harness.save_report_json(report, out / f"{stem}_{name}.json", chash,
                                 config=cdict)
        flat.append(report)
    harness.write_reports_csv(flat, out / f"{stem}_per_repeat.csv")


def _write_json(path, payload: dict, cfg: RunConfig, seed: int) -> None:
    payload = {"config_hash": cfg.config_hash(), "seed": seed,
               "config": cfg.semantic_dict(), **payload}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _write_matrix_csv(path, matrix: np.ndarray, row_labels, col_labels,
                      corner: str = "") -> None:
    from .dataio import float_repr
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([corner] + list(col_labels))
        for label, row in zip(row_labels, matrix):
            writer.writerow([label] + [float_repr(v) for v in row])


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    manifest = load_corpus(args.corpus, deep=not args.shallow)
    counts = manifest.counts()
    print(f"corpus OK: {counts['surfaces']} surfaces, "
          f"{counts['trials']} trials, {counts['participants']} participants")
    for proc, n in sorted(counts["per_procedure"].items()):
        print(f"  {proc}: {n}")
    return 0


def cmd_synth(args) -> int:
    cfg = _effective_config(args)
    seed = cfg.protocol.base_seed
    out = _out_dir(args)
    participants = tuple(f"p{i + 1:02d}" for i in range(args.participants))
    manifest, truth = synth.gen_corpus(
        out, seed=seed, participants=participants, trials=args.trials,
        noise=args.noise, n_raters=args.raters)
    print(f"wrote synthetic corpus: {len(manifest.trials)} trials, "
          f"{len(truth)} surfaces -> {out}")
    return 0


def cmd_extract(args) -> int:
    cfg = _effective_config(args)
    manifest = load_corpus(args.corpus)
    ratings = None
    if args.ratings:
        ratings = normalize_ratings(load_ratings(args.ratings))
    workers = cfg.workers or os.cpu_count() or 1
    features = assemble_features(manifest, cfg.extract, cfg.fit,
                                 workers=workers)
    out = _out_dir(args)
    write_features_csv(features, out / "features.csv", ratings)
    write_flags_json(features, out / "features_flags.json",
                     cfg.config_hash(), cfg.protocol.base_seed)
    print(f"extracted {len(features)} samples x {len(FEATURE_NAMES)} "
          f"features -> {out / 'features.csv'}")
    return 0


def cmd_model1(args) -> int:
    cfg = _effective_config(args)
    features = read_features_csv(args.features)
    ratings = normalize_ratings(load_ratings(args.ratings))
    results = harness.run_model1(features, ratings, cfg.protocol,
                                 feature_group=args.group, config=cfg.models)
    out = _out_dir(args)
    reports = {f"{pair}_{kind}": rep
               for pair, by_kind in results.items()
               for kind, rep in by_kind.items()}
    _save_reports(reports, out, "model1", cfg)
    for pair, by_kind in results.items():
        agg = by_kind["rf_regressor"].aggregate
        null = by_kind["null"].aggregate
        print(f"model1 {pair}: mse={agg['mse']['mean']:.4f} "
              f"r2={agg['r_squared']['mean']:.3f} "
              f"(null mse={null['mse']['mean']:.4f})")
    return 0


def cmd_model2(args) -> int:
    cfg = _effective_config(args)
    manifest = load_corpus(args.corpus)
    ratings = normalize_ratings(load_ratings(args.ratings))
    materials = {sid: manifest.material_of(sid)
                 for sid in manifest.surfaces}
    kinds = args.kinds.split(",") if args.kinds else (
        "rf_classifier", "knn", "gaussian_nb", "logistic")
    results = harness.run_model2(ratings, materials, cfg.protocol,
                                 kinds=kinds, config=cfg.models)
    out = _out_dir(args)
    _save_reports(results, out, "model2", cfg)
    for kind, rep in results.items():
        print(f"model2 {kind}: accuracy="
              f"{rep.aggregate['accuracy']['mean']:.3f}")
    return 0


def cmd_model3(args) -> int:
    cfg = _effective_config(args)
    features = read_features_csv(args.features)
    kinds = args.kinds.split(",") if args.kinds else ("rf_classifier",)
    groups = args.groups.split(",") if args.groups else (
        "pressing", "thermal", "sliding", "all")
    results = harness.run_model3(features, cfg.protocol, kinds=kinds,
                                 groups=groups, config=cfg.models)
    out = _out_dir(args)
    _save_reports(results, out, "model3", cfg)
    for (kind, group), rep in results.items():
        print(f"model3 {kind} [{group}]: accuracy="
              f"{rep.aggregate['accuracy']['mean']:.3f}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _effective_config(args)
    features = read_features_csv(args.features)
    groups = args.groups.split(",") if args.groups else (
        "pressing", "thermal", "sliding", "all")
    if args.task == "model3":
        dataset = harness.features_to_dataset(features)
        results = analysis.ablation(groups, dataset, cfg.protocol,
                                    config=cfg.models)
    else:
        if not args.ratings:
            raise ConfigError("--ratings is required for --task model1")
        ratings = normalize_ratings(load_ratings(args.ratings))
        results = {}
        for group in groups:
            by_pair = harness.run_model1(features, ratings, cfg.protocol,
                                         feature_group=group,
                                         config=cfg.models)
            for pair, by_kind in by_pair.items():
                results[f"{group}_{pair}"] = by_kind["rf_regressor"]
    out = _out_dir(args)
    _save_reports(results, out, f"ablate_{args.task}", cfg)
    for name, rep in results.items():
        metric = "accuracy" if "accuracy" in rep.aggregate else "mse"
        print(f"ablate {name}: {metric}="
              f"{rep.aggregate[metric]['mean']:.4f}")
    return 0


def cmd_topk(args) -> int:
    cfg = _effective_config(args)
    features = read_features_csv(args.features)
    dataset = harness.features_to_dataset(features)
    seed = cfg.protocol.base_seed
    model = train("rf_classifier", dataset, seed=seed, config=cfg.models)
    ranking = rf_feature_importance(model)
    ks = [int(k) for k in args.ks.split(",")] if args.ks else \
        [1, 2, 3, 5, 8, 12, 15, 20, 25, 30, 40, 60, 80, 98]
    ks = [k for k in ks if k <= dataset.X.shape[1]]
    curve = analysis.topk_curve(dataset, ranking, ks, cfg.protocol,
                                config=cfg.models)
    out = _out_dir(args)
    _write_json(out / "topk.json",
                {"curve": {str(k): v for k, v in curve.items()},
                 "ranking": [[n, v] for n, v in ranking.entries]},
                cfg, seed)
    with open(out / "topk.csv", "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "accuracy_mean"])
        for k in ks:
            writer.writerow([k, repr(curve[k])])
    for k in ks:
        print(f"top-{k}: accuracy={curve[k]:.3f}")
    return 0


def cmd_pca(args) -> int:
    cfg = _effective_config(args)
    if args.features:
        features = read_features_csv(args.features)
        dataset = harness.features_to_dataset(features)
        X = dataset.X
        labels = [fv.sample_id for fv in features]
        source = "features"
    else:
        ratings = normalize_ratings(load_ratings(args.ratings))
        X = ratings.averaged
        labels = [f"surface{sid}" for sid in ratings.surface_ids]
        source = "ratings"
    result = analysis.pca(X, k=args.k, standardize=True)
    out = _out_dir(args)
    _write_matrix_csv(out / f"pca_{source}_scores.csv", result.scores,
                      labels, [f"pc{i + 1}" for i in range(args.k)], "sample")
    _write_json(out / f"pca_{source}.json",
                {"explained_variance_ratio":
                     result.explained_variance_ratio.tolist(),
                 "standardized": result.standardized, "source": source},
                cfg, cfg.protocol.base_seed)
    ratios = result.explained_variance_ratio
    print(f"pca [{source}]: " + " ".join(
        f"pc{i + 1}={r:.3f}" for i, r in enumerate(ratios)))
    return 0


def cmd_mds(args) -> int:
    cfg = _effective_config(args)
    ratings = normalize_ratings(load_ratings(args.ratings))
    out = _out_dir(args)
    summary = {}
    for j, pair in enumerate(ratings.pairs):
        vectors = {pid: mat[:, j]
                   for pid, mat in ratings.per_participant.items()}
        ids, dist = analysis.participant_distance(vectors)
        result = analysis.classical_mds(dist, k=2)
        _write_matrix_csv(out / f"mds_{pair}.csv", result.coords, ids,
                          ["dim1", "dim2"], "participant")
        summary[pair] = {"eigenvalues": result.eigenvalues[:4].tolist()}
    _write_json(out / "mds.json", {"pairs": summary}, cfg,
                cfg.protocol.base_seed)
    print(f"mds: wrote {len(ratings.pairs)} participant maps -> {out}")
    return 0


def cmd_spearman(args) -> int:
    cfg = _effective_config(args)
    ratings = normalize_ratings(load_ratings(args.ratings))
    matrix = analysis.spearman_matrix(ratings.averaged)
    out = _out_dir(args)
    _write_matrix_csv(out / "spearman.csv", matrix, ADJECTIVE_PAIRS,
                      ADJECTIVE_PAIRS, "pair")
    _write_json(out / "spearman.json", {"matrix": matrix.tolist()},
                cfg, cfg.protocol.base_seed)
    print("spearman matrix written")
    return 0


def cmd_report(args) -> int:
    paths = []
    for item in args.inputs:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.json")))
        else:
            paths.append(p)
    rows = []
    hashes = set()
    for path in paths:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if "aggregate" not in doc:
            continue
        hashes.add(doc.get("config_hash", ""))
        for metric, stats in sorted(doc["aggregate"].items()):
            rows.append([doc.get("task", ""), doc.get("model_kind", ""),
                         doc.get("group", ""), metric,
                         repr(stats["mean"]), repr(stats["std"]),
                         doc.get("config_hash", "")])
    if not rows:
        raise DataError("no evaluation reports found in inputs")
    if len(hashes) > 1 and not args.force:
        raise DataError(f"refusing to merge reports with {len(hashes)} "
                        "different config hashes (use --force)")
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["task", "model_kind", "group", "metric",
                         "mean", "std", "config_hash"])
        writer.writerows(rows)
    print(f"report: {len(rows)} rows -> {out_path}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="taction",
                     description="Tactile material-perception pipeline")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("validate", help="validate a corpus layout")
    p.add_argument("--corpus", required=True)
    p.add_argument("--shallow", action="store_true",
                   help="skip parsing every trial file")
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = subs.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--participants", type=int, default=2)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--raters", type=int, default=20)
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("extract", help="extract the 98-feature table")
    p.add_argument("--corpus", required=True)
    p.add_argument("--ratings")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_extract)

    p = subs.add_parser("model1", help="sensation-rating regression")
    p.add_argument("--features", required=True)
    p.add_argument("--ratings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--group", default="all")
    _add_common(p)
    _add_protocol(p)
    p.set_defaults(func=cmd_model1)

    p = subs.add_parser("model2", help="material classification from ratings")
    p.add_argument("--ratings", required=True)
    p.add_argument("--corpus", required=True,
                   help="corpus root (for the surface-material table)")
    p.add_argument("--out", required=True)
    p.add_argument("--kinds")
    _add_common(p)
    _add_protocol(p)
    p.set_defaults(func=cmd_model2)

    p = subs.add_parser("model3", help="material classification from features")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kinds")
    p.add_argument("--groups")
    _add_common(p)
    _add_protocol(p)
    p.set_defaults(func=cmd_model3)

    p = subs.add_parser("ablate", help="feature-group ablation study")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--task", choices=("model1", "model3"), default="model3")
    p.add_argument("--ratings")
    p.add_argument("--groups")
    _add_common(p)
    _add_protocol(p)
    p.set_defaults(func=cmd_ablate)

    p = subs.add_parser("topk", help="accuracy vs number of top features")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ks")
    _add_common(p)
    _add_protocol(p)
    p.set_defaults(func=cmd_topk)

    p = subs.add_parser("pca", help="principal component analysis")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--features")
    group.add_argument("--ratings")
    p.add_argument("--out", required=True)
    p.add_argument("-k", type=int, default=2)
    _add_common(p)
    p.set_defaults(func=cmd_pca)

    p = subs.add_parser("mds", help="participant maps per adjective pair")
    p.add_argument("--ratings", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_mds)

    p = subs.add_parser("spearman", help="rating-pair correlation matrix")
    p.add_argument("--ratings", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_spearman)

    p = subs.add_parser("report", help="merge evaluation JSONs into one CSV")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures exit 2
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
