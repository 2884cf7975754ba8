"""Corpus ingestion and validation: recordings, manifests, rating tables.

On-disk layout: one JSON manifest per corpus root, one CSV per trial
(header row = time_s + channel names, one row per sample), and one JSON
ratings file keyed by participant id. Floats are written with ``repr`` so a
serialize/load round trip is bit-identical.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1.0"

MATERIAL_CLASSES = ("metal", "wood", "fabric", "paper", "rubber",
                    "plastic", "sandpaper", "leather", "foam", "vinyl")
PROCEDURES = ("pressing", "static_contact", "sliding")
ADJECTIVE_PAIRS = ("rough_smooth", "sticky_slippery", "hot_cold",
                   "hard_soft", "wet_dry")

CHANNEL_NAMES = ("normal_force_N", "lateral_force_N", "accel_x_ms2",
                 "accel_y_ms2", "accel_z_ms2", "heat_flux_Wm2",
                 "skin_temp_C", "indentation_mm")

REQUIRED_CHANNELS = {
    "pressing": ("normal_force_N", "indentation_mm"),
    "static_contact": ("heat_flux_Wm2", "skin_temp_C"),
    "sliding": ("normal_force_N", "lateral_force_N",
                "accel_x_ms2", "accel_y_ms2", "accel_z_ms2"),
}

RATING_SCALE = (1.0, 15.0)

N_SURFACES = 50
N_CLASSES = 10
SURFACES_PER_CLASS = 5


class DataError(ValueError):
    """Schema or content violation in corpus files."""


@dataclass(frozen=True)
class Recording:
    """One trial's multichannel time series plus identifying metadata."""

    trial_id: str
    participant_id: str
    surface_id: int
    material_class: str
    procedure: str
    sample_rate_hz: float
    timestamps: np.ndarray
    channels: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.procedure not in PROCEDURES:
            raise DataError(f"trial {self.trial_id}: unknown procedure "
                            f"{self.procedure!r}")
        if self.material_class not in MATERIAL_CLASSES:
            raise DataError(f"trial {self.trial_id}: unknown material_class "
                            f"{self.material_class!r}")
        if not 1 <= int(self.surface_id) <= N_SURFACES:
            raise DataError(f"trial {self.trial_id}: surface_id "
                            f"{self.surface_id} outside 1..{N_SURFACES}")
        if not self.sample_rate_hz > 0:
            raise DataError(f"trial {self.trial_id}: sample_rate_hz must be "
                            f"positive, got {self.sample_rate_hz}")
        ts = np.asarray(self.timestamps, dtype=np.float64)
        if np.any(np.diff(ts) < 0):
            raise DataError(f"trial {self.trial_id}: timestamps not "
                            "monotone nondecreasing")
        object.__setattr__(self, "timestamps", ts)
        chans = {}
        for name, values in self.channels.items():
            if name not in CHANNEL_NAMES:
                raise DataError(f"trial {self.trial_id}: unknown channel "
                                f"{name!r}")
            arr = np.asarray(values, dtype=np.float64)
            if arr.size != ts.size:
                raise DataError(
                    f"trial {self.trial_id}: channel {name!r} has "
                    f"{arr.size} samples, timestamps have {ts.size}")
            arr.flags.writeable = False
            chans[name] = arr
        for name in REQUIRED_CHANNELS[self.procedure]:
            if name not in chans:
                raise DataError(f"trial {self.trial_id}: procedure "
                                f"{self.procedure} requires channel {name!r}")
        ts.flags.writeable = False
        object.__setattr__(self, "channels", chans)

    @property
    def duration_s(self) -> float:
        return float(self.timestamps[-1] - self.timestamps[0]) if self.timestamps.size else 0.0


@dataclass(frozen=True)
class TrialRef:
    trial_id: str
    participant_id: str
    surface_id: int
    procedure: str
    sample_rate_hz: float
    path: str
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CorpusManifest:
    root: Path
    schema_version: str
    surfaces: dict[int, dict]          # surface_id -> {material_class, description}
    trials: tuple[TrialRef, ...]

    def material_of(self, surface_id: int) -> str:
        return self.surfaces[surface_id]["material_class"]

    def load_recording(self, ref: TrialRef) -> Recording:
        timestamps, channels = read_trial_csv(self.root / ref.path,
                                              trial_id=ref.trial_id)
        return Recording(
            trial_id=ref.trial_id,
            participant_id=ref.participant_id,
            surface_id=ref.surface_id,
            material_class=self.material_of(ref.surface_id),
            procedure=ref.procedure,
            sample_rate_hz=ref.sample_rate_hz,
            timestamps=timestamps,
            channels=channels,
            meta=dict(ref.meta),
        )

    def counts(self) -> dict:
        per_proc: dict[str, int] = {p: 0 for p in PROCEDURES}
        participants = set()
        for t in self.trials:
            per_proc[t.procedure] += 1
            participants.add(t.participant_id)
        return {
            "surfaces": len(self.surfaces),
            "trials": len(self.trials),
            "participants": len(participants),
            "per_procedure": per_proc,
        }


@dataclass(frozen=True)
class RawRatings:
    """One participant's raw ratings on the experiment's 15-point scale."""

    participant_id: str
    ratings: dict[tuple[int, str], float]


@dataclass(frozen=True)
class RatingMatrix:
    surface_ids: tuple[int, ...]
    pairs: tuple[str, ...]
    per_participant: dict[str, np.ndarray]   # each (n_surfaces, n_pairs) in [0,1]
    averaged: np.ndarray


def float_repr(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# Trial CSV
# ---------------------------------------------------------------------------


def write_trial_csv(path, timestamps, channels: dict[str, np.ndarray]) -> None:
    path = Path(path)
    names = list(channels)
    cols = [np.asarray(timestamps, dtype=np.float64)]
    cols += [np.asarray(channels[n], dtype=np.float64) for n in names]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["time_s"] + names) + "\n")
        for row in zip(*cols):
            fh.write(",".join(float_repr(v) for v in row) + "\n")


def read_trial_csv(path, trial_id: str = "?") -> tuple[np.ndarray, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"trial {trial_id}: data file not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"trial {trial_id}: empty data file {path}") from None
        if not header or header[0] != "time_s":
            raise DataError(f"trial {trial_id}: first column must be time_s")
        names = header[1:]
        for name in names:
            if name not in CHANNEL_NAMES:
                raise DataError(f"trial {trial_id}: unknown channel {name!r}")
        data: list[list[float]] = [[] for _ in header]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                short = header[len(row)] if len(row) < len(header) else None
                detail = (f"channel {short!r} missing a value" if short
                          else "extra values")
                raise DataError(
                    f"trial {trial_id}: line {lineno} of {path.name} has "
                    f"{len(row)} values, expected {len(header)} ({detail})")
            for col, text in zip(data, row):
                try:
                    col.append(float(text))
                except ValueError:
                    raise DataError(
                        f"trial {trial_id}: non-numeric value {text!r} on "
                        f"line {lineno} of {path.name}") from None
    timestamps = np.array(data[0], dtype=np.float64)
    channels = {name: np.array(col, dtype=np.float64)
                for name, col in zip(names, data[1:])}
    return timestamps, channels


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


def write_manifest(root, surfaces: dict[int, dict], trials) -> None:
    root = Path(root)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "surfaces": [
            {"surface_id": sid,
             "material_class": info["material_class"],
             "description": info.get("description", "")}
            for sid, info in sorted(surfaces.items())
        ],
        "trials": [
            {"trial_id": t.trial_id,
             "participant_id": t.participant_id,
             "surface_id": t.surface_id,
             "procedure": t.procedure,
             "sample_rate_hz": t.sample_rate_hz,
             "path": t.path,
             "meta": t.meta}
            for t in trials
        ],
    }
    with open(root / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_corpus(root, deep: bool = False) -> CorpusManifest:
    """Load and validate a corpus manifest.

    With ``deep=True`` every referenced trial file is parsed (full schema
    validation); otherwise only existence is checked and recordings load
    lazily through ``CorpusManifest.load_recording``.
    """
    root = Path(root)
    mpath = root / "manifest.json"
    if not mpath.is_file():
        raise DataError(f"manifest not found: {mpath}")
    try:
        with open(mpath, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest is not valid JSON: {exc}") from exc
    for key in ("schema_version", "surfaces", "trials"):
        if key not in doc:
            raise DataError(f"manifest missing field {key!r}")

    surfaces: dict[int, dict] = {}
    class_counts: dict[str, int] = {}
    for entry in doc["surfaces"]:
        sid = int(entry["surface_id"])
        mat = entry["material_class"]
        if mat not in MATERIAL_CLASSES:
            raise DataError(f"surface {sid}: unknown material_class {mat!r}")
        if sid in surfaces:
            raise DataError(f"surface {sid} listed twice")
        surfaces[sid] = {"material_class": mat,
                         "description": entry.get("description", "")}
        class_counts[mat] = class_counts.get(mat, 0) + 1
    if len(surfaces) != N_SURFACES:
        raise DataError(f"expected {N_SURFACES} surfaces, found {len(surfaces)}")
    if len(class_counts) != N_CLASSES:
        raise DataError(f"expected {N_CLASSES} material classes, found "
                        f"{len(class_counts)}")
    for mat, count in sorted(class_counts.items()):
        if count != SURFACES_PER_CLASS:
            raise DataError(f"material {mat!r} has {count} surfaces, expected "
                            f"{SURFACES_PER_CLASS}")

    trials = []
    seen_ids = set()
    for entry in doc["trials"]:
        try:
            ref = TrialRef(
                trial_id=entry["trial_id"],
                participant_id=entry["participant_id"],
                surface_id=int(entry["surface_id"]),
                procedure=entry["procedure"],
                sample_rate_hz=float(entry["sample_rate_hz"]),
                path=entry["path"],
                meta=entry.get("meta", {}),
            )
        except KeyError as exc:
            raise DataError(f"trial entry missing field {exc}") from exc
        if ref.trial_id in seen_ids:
            raise DataError(f"trial {ref.trial_id}: duplicate trial_id")
        seen_ids.add(ref.trial_id)
        if ref.procedure not in PROCEDURES:
            raise DataError(f"trial {ref.trial_id}: unknown procedure "
                            f"{ref.procedure!r}")
        if ref.surface_id not in surfaces:
            raise DataError(f"trial {ref.trial_id}: unknown surface_id "
                            f"{ref.surface_id}")
        if not (root / ref.path).is_file():
            raise DataError(f"trial {ref.trial_id}: missing file {ref.path}")
        trials.append(ref)

    manifest = CorpusManifest(root=root,
                              schema_version=str(doc["schema_version"]),
                              surfaces=surfaces, trials=tuple(trials))
    if deep:
        for ref in trials:
            manifest.load_recording(ref)
    return manifest


# ---------------------------------------------------------------------------
# Ratings
# ---------------------------------------------------------------------------


def write_ratings(path, raws) -> None:
    doc: dict = {"schema_version": SCHEMA_VERSION, "participants": {}}
    for raw in sorted(raws, key=lambda r: r.participant_id):
        per: dict[str, dict[str, float]] = {}
        for (sid, pair), value in raw.ratings.items():
            per.setdefault(str(sid), {})[pair] = value
        doc["participants"][raw.participant_id] = per
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_ratings(path) -> list[RawRatings]:
    """Load the ratings JSON; enforces the [1, 15] scale at load time."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"ratings file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "participants" not in doc:
        raise DataError("ratings file missing 'participants'")
    lo, hi = RATING_SCALE
    out = []
    for pid in sorted(doc["participants"]):
        table = doc["participants"][pid]
        ratings: dict[tuple[int, str], float] = {}
        for sid_text, per_pair in table.items():
            sid = int(sid_text)
            for pair, value in per_pair.items():
                if pair not in ADJECTIVE_PAIRS:
                    raise DataError(f"participant {pid}: unknown adjective "
                                    f"pair {pair!r}")
                v = float(value)
                if not lo <= v <= hi:
                    raise DataError(
                        f"participant {pid}: rating {v} for surface {sid} "
                        f"pair {pair} outside [{lo:g}, {hi:g}]")
                key = (sid, pair)
                if key in ratings:
                    raise DataError(f"participant {pid}: duplicate cell "
                                    f"surface {sid} / {pair}")
                ratings[key] = v
        out.append(RawRatings(participant_id=pid, ratings=ratings))
    return out


def normalize_ratings(raws, expected_surfaces: int | None = None) -> RatingMatrix:
    """Per-participant min-max normalization, then the participant average.

    Normalization is applied independently per adjective pair across each
    participant's surfaces. A constant column maps to 0.5 with a warning.
    """
    raws = sorted(raws, key=lambda r: r.participant_id)
    if not raws:
        raise DataError("need at least one participant")
    surface_ids = tuple(sorted({sid for (sid, _) in raws[0].ratings}))
    if expected_surfaces is not None and len(surface_ids) != expected_surfaces:
        raise DataError(f"expected {expected_surfaces} surfaces, found "
                        f"{len(surface_ids)}")
    pairs = ADJECTIVE_PAIRS
    per_participant: dict[str, np.ndarray] = {}
    for raw in raws:
        mat = np.empty((len(surface_ids), len(pairs)), dtype=np.float64)
        for i, sid in enumerate(surface_ids):
            for j, pair in enumerate(pairs):
                try:
                    mat[i, j] = raw.ratings[(sid, pair)]
                except KeyError:
                    raise DataError(
                        f"participant {raw.participant_id}: missing rating "
                        f"for surface {sid} pair {pair}") from None
        extra = len(raw.ratings) - mat.size
        if extra:
            raise DataError(f"participant {raw.participant_id}: "
                            f"{extra} ratings outside the common surface set")
        lo = mat.min(axis=0)
        hi = mat.max(axis=0)
        span = hi - lo
        norm = np.empty_like(mat)
        for j in range(len(pairs)):
            if span[j] == 0.0:
                warnings.warn(
                    f"participant {raw.participant_id}: constant ratings for "
                    f"{pairs[j]}; normalizing to 0.5", stacklevel=2)
                norm[:, j] = 0.5
            else:
                norm[:, j] = (mat[:, j] - lo[j]) / span[j]
        norm.flags.writeable = False
        per_participant[raw.participant_id] = norm
    averaged = np.mean(np.stack(list(per_participant.values())), axis=0)
    averaged.flags.writeable = False
    return RatingMatrix(surface_ids=surface_ids, pairs=pairs,
                        per_participant=per_participant, averaged=averaged)
