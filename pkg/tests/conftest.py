"""Shared fixtures: one session-scoped synthetic corpus and its artifacts."""

import csv

import numpy as np
import pytest

from taction.dataio import load_corpus, load_ratings, normalize_ratings
from taction.extract import assemble_features
from taction.synth import gen_corpus

SESSION_SEED = 11


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    gen_corpus(root, seed=SESSION_SEED, participants=("p01", "p02"),
               trials=1, n_raters=12)
    return root


@pytest.fixture(scope="session")
def corpus(corpus_dir):
    return load_corpus(corpus_dir)


@pytest.fixture(scope="session")
def features(corpus):
    return assemble_features(corpus, workers=2)


@pytest.fixture(scope="session")
def rating_matrix(corpus_dir):
    return normalize_ratings(load_ratings(corpus_dir / "ratings.json"))


@pytest.fixture(scope="session")
def truth_rows(corpus_dir):
    with open(corpus_dir / "truth_table.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for key, value in row.items():
            if key not in ("material_class",):
                row[key] = float(value)
    return rows


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
