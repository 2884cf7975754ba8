"""Corpus loading, rating normalization, and serialization round trips."""

import json

import numpy as np
import pytest

from taction.dataio import (DataError, RawRatings, Recording, load_corpus,
                            load_ratings, normalize_ratings, read_trial_csv,
                            write_trial_csv, ADJECTIVE_PAIRS)


def _raw(pid, values_by_surface):
    ratings = {}
    for sid, row in values_by_surface.items():
        for pair, v in zip(ADJECTIVE_PAIRS, row):
            ratings[(sid, pair)] = v
    return RawRatings(participant_id=pid, ratings=ratings)


def test_minmax_normalization_three_surfaces():
    raw = _raw("p1", {1: [1, 1, 1, 1, 1], 2: [8, 8, 8, 8, 8],
                      3: [15, 15, 15, 15, 15]})
    mat = normalize_ratings([raw])
    assert np.allclose(mat.per_participant["p1"][:, 0], [0.0, 0.5, 1.0])
    assert np.allclose(mat.averaged, mat.per_participant["p1"])


def test_identical_participants_average_to_either():
    table = {s: [float(s), 3.0 + s % 3, 7.0 - s % 2, 1.0 + s, 15.0 - s]
             for s in range(1, 6)}
    mat = normalize_ratings([_raw("a", table), _raw("b", table)])
    assert np.allclose(mat.averaged, mat.per_participant["a"])


def test_twenty_random_participants_against_bruteforce(rng):
    raws = []
    expect = {}
    for i in range(20):
        table = {s: list(rng.uniform(1, 15, 5)) for s in range(1, 51)}
        raws.append(_raw(f"p{i:02d}", table))
        expect[f"p{i:02d}"] = table
    mat = normalize_ratings(raws)
    assert mat.averaged.min() >= 0.0 and mat.averaged.max() <= 1.0
    # spreadsheet-style recompute: per participant, per pair column
    acc = np.zeros((50, 5))
    for pid, table in expect.items():
        cols = np.array([table[s] for s in range(1, 51)])
        lo, hi = cols.min(axis=0), cols.max(axis=0)
        acc += (cols - lo) / (hi - lo)
    assert np.allclose(mat.averaged, acc / 20, atol=1e-12)


def test_normalization_idempotent():
    table = {s: [1 + (s % 14), 2.0 + s % 3, 3.0 + s % 5, 9.0 - s % 4,
                 1 + (s * 3) % 15]
             for s in range(1, 11)}
    mat = normalize_ratings([_raw("p", table)])
    # re-normalizing the normalized values (shifted onto the scale) is a no-op
    renorm = {}
    for i, s in enumerate(sorted(table)):
        renorm[s] = [1 + 14 * v for v in mat.per_participant["p"][i]]
    mat2 = normalize_ratings([_raw("p", renorm)])
    assert np.allclose(mat.per_participant["p"], mat2.per_participant["p"])


def test_participant_order_invariance(rng):
    tables = [{s: list(rng.uniform(1, 15, 5)) for s in range(1, 8)}
              for _ in range(4)]
    raws = [_raw(f"p{i}", t) for i, t in enumerate(tables)]
    fwd = normalize_ratings(raws)
    rev = normalize_ratings(list(reversed(raws)))
    assert np.allclose(fwd.averaged, rev.averaged)


def test_constant_column_maps_to_half_with_warning():
    table = {s: [5.0, 1.0 + s, 2.0, 3.0, 4.0 + s] for s in range(1, 6)}
    with pytest.warns(UserWarning, match="constant"):
        mat = normalize_ratings([_raw("p", table)])
    assert np.allclose(mat.per_participant["p"][:, 0], 0.5)


def test_missing_cell_rejected():
    raw = _raw("p", {1: [1, 2, 3, 4, 5], 2: [2, 3, 4, 5, 6]})
    broken = dict(raw.ratings)
    del broken[(2, "wet_dry")]
    with pytest.raises(DataError, match="missing rating"):
        normalize_ratings([RawRatings("p", broken)])


def test_rating_scale_bounds_enforced_at_load(tmp_path):
    doc = {"schema_version": "1.0",
           "participants": {"p": {"1": {p: 16.0 for p in ADJECTIVE_PAIRS}}}}
    path = tmp_path / "r.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(DataError, match="outside"):
        load_ratings(path)


def test_recording_roundtrip_bit_identical(tmp_path, rng):
    t = np.cumsum(rng.uniform(0.0009, 0.0011, 300))
    channels = {"normal_force_N": rng.normal(1.0, 0.3, 300),
                "indentation_mm": rng.normal(0.5, 0.1, 300)}
    path = tmp_path / "trial.csv"
    write_trial_csv(path, t, channels)
    t2, ch2 = read_trial_csv(path)
    assert np.array_equal(t, t2)
    for name in channels:
        assert np.array_equal(channels[name], ch2[name])


def test_recording_channel_length_mismatch_names_channel():
    with pytest.raises(DataError, match="indentation_mm"):
        Recording(trial_id="t", participant_id="p", surface_id=1,
                  material_class="metal", procedure="pressing",
                  sample_rate_hz=100.0, timestamps=np.arange(5.0),
                  channels={"normal_force_N": np.zeros(5),
                            "indentation_mm": np.zeros(4)})


def test_recording_requires_procedure_channels():
    with pytest.raises(DataError, match="requires channel"):
        Recording(trial_id="t", participant_id="p", surface_id=1,
                  material_class="metal", procedure="sliding",
                  sample_rate_hz=100.0, timestamps=np.arange(5.0),
                  channels={"normal_force_N": np.zeros(5)})


def test_empty_directory_is_manifest_not_found(tmp_path):
    with pytest.raises(DataError, match="manifest not found"):
        load_corpus(tmp_path)


def test_malformed_trial_file_names_missing_channel(tmp_path):
    from taction.dataio import MATERIAL_CLASSES, TrialRef, write_manifest
    root = tmp_path / "broken"
    (root / "trials").mkdir(parents=True)
    surfaces = {sid: {"material_class": MATERIAL_CLASSES[(sid - 1) // 5],
                      "description": ""} for sid in range(1, 51)}
    ref = TrialRef(trial_id="t0", participant_id="p01", surface_id=1,
                   procedure="sliding", sample_rate_hz=4000.0,
                   path="trials/t0.csv")
    header = "time_s,normal_force_N,lateral_force_N,accel_x_ms2,accel_y_ms2,accel_z_ms2"
    rows = ["0.0,1.0,0.5,0.0,0.0,0.0",
            "0.001,1.0,0.5,0.0",          # accel_y and accel_z missing
            "0.002,1.0,0.5,0.0,0.0,0.0"]
    (root / "trials/t0.csv").write_text(header + "\n" + "\n".join(rows) + "\n")
    write_manifest(root, surfaces, [ref])
    with pytest.raises(DataError, match="accel_y_ms2"):
        load_corpus(root, deep=True)


def test_session_corpus_counts(corpus):
    counts = corpus.counts()
    assert counts["surfaces"] == 50
    assert counts["trials"] == 300          # 50 x 3 procedures x 2 participants
    assert counts["participants"] == 2
    assert all(n == 100 for n in counts["per_procedure"].values())


def test_loaded_recordings_are_immutable(corpus):
    rec = corpus.load_recording(corpus.trials[0])
    with pytest.raises(ValueError):
        rec.timestamps[0] = 99.0
    first = next(iter(rec.channels.values()))
    with pytest.raises(ValueError):
        first[0] = 99.0
