"""Per-procedure feature extractors and the 98-feature assembler.

Pressing: exponential compliance fits of indentation vs force for the press
and lift phases plus the hysteresis gap. Static contact: logistic /
power-law heat-flux fits, a four-parameter logistic skin-temperature fit,
representative temperature values and the moving-MAD peak. Sliding: the
friction coefficient plus time/spectral/MFCC descriptors of the band-passed
lateral force and acceleration magnitude.

Smoothed signals are used only to locate segment boundaries; all curve fits
run on the raw samples within those boundaries.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dsp
from .config import ExtractConfig, FitConfig
from .curvefit import ModelKind, fit
from .dataio import CorpusManifest, Recording, TrialRef
from .registry import (ACCEL_SOURCE_KEYS, FEATURE_NAMES, MFCC_ACCEL_FEATURES,
                       MFCC_FORCE_FEATURES, SLIDING_ACCEL_FEATURES,
                       SLIDING_FEATURES)

SEGMENT_LABELS = ("press_phase", "lift_phase", "flux_drop", "flux_stabilize",
                  "temp_drop")


class ExtractError(ValueError):
    """Raised when a recording cannot be segmented or featurized."""


@dataclass(frozen=True)
class SegmentBounds:
    start: int
    end: int            # exclusive
    label: str

    def __post_init__(self):
        if self.label not in SEGMENT_LABELS:
            raise ValueError(f"unknown segment label {self.label!r}")
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid segment [{self.start}, {self.end})")

    def slice(self) -> slice:
        return slice(self.start, self.end)


@dataclass
class FeatureVector:
    """The named 98-feature vector for one (participant, surface, rep) sample."""

    participant_id: str
    surface_id: int
    rep: int
    material_class: str
    trial_ids: dict[str, str]
    values: dict[str, float]
    quality_flags: dict[str, list[str]] = field(default_factory=dict)
    diagnostics: dict[str, dict] = field(default_factory=dict)

    @property
    def sample_id(self) -> str:
        return f"{self.participant_id}-s{self.surface_id:02d}-r{self.rep}"

    def as_array(self) -> np.ndarray:
        return np.array([self.values[n] for n in FEATURE_NAMES])


class _Flags:
    def __init__(self):
        self.data: dict[str, list[str]] = {}

    def add(self, names, reason: str):
        if isinstance(names, str):
            names = (names,)
        for name in names:
            self.data.setdefault(name, []).append(reason)


def _smooth_window(fs: float, n: int, window_s: float) -> int:
    w = int(round(window_s * fs))
    if w % 2 == 0:
        w += 1
    w = max(w, 1)
    if w > n:
        w = n if n % 2 == 1 else n - 1
    return max(w, 1)


def _sustained_run_start(condition: np.ndarray, run: int) -> int:
    """First index where ``condition`` holds for ``run`` consecutive samples."""
    if condition.size < run or run <= 0:
        return -1
    windows = np.lib.stride_tricks.sliding_window_view(condition, run)
    hits = np.nonzero(windows.all(axis=1))[0]
    return int(hits[0]) if hits.size else -1


# ---------------------------------------------------------------------------
# Pressing
# ---------------------------------------------------------------------------


def segment_pressing(rec: Recording,
                     cfg: ExtractConfig = ExtractConfig()) -> tuple[SegmentBounds, SegmentBounds]:
    """Locate press and lift phases of a pressing trial.

    Press runs from first sustained contact (force above the threshold for
    the debounce time) to entry into the hold plateau; lift runs from
    plateau exit back to within the threshold of the pre-contact baseline.
    The hold plateau itself belongs to neither phase.
    """
    if rec.procedure != "pressing":
        raise ExtractError(f"trial {rec.trial_id}: not a pressing trial")
    force = rec.channels["normal_force_N"]
    fs = rec.sample_rate_hz
    debounce = max(1, int(round(cfg.contact_debounce_s * fs)))
    crossing = _sustained_run_start(force >= cfg.contact_threshold_n, debounce)
    if crossing < 0:
        raise ExtractError(f"trial {rec.trial_id}: no contact detected "
                           f"(force never holds {cfg.contact_threshold_n} N "
                           f"for {cfg.contact_debounce_s} s)")
    # anchor contact on the last sample before the sustained crossing, where
    # force (and hence indentation) is still at baseline
    contact = max(crossing - 1, 0)
    fmax = float(np.max(force))
    plateau = cfg.plateau_fraction * fmax
    at_plateau = np.nonzero(force >= plateau)[0]
    press_end = int(at_plateau[0])
    lift_start = int(at_plateau[-1])
    if press_end < contact:
        raise ExtractError(f"trial {rec.trial_id}: force maximum precedes "
                           "contact; cannot identify press phase")
    baseline = float(np.median(force[:contact])) if contact > 0 else 0.0
    after = np.nonzero(force[lift_start:] <= baseline + cfg.contact_threshold_n)[0]
    lift_end = lift_start + int(after[0]) if after.size else force.size - 1
    press = SegmentBounds(contact, press_end + 1, "press_phase")
    lift = SegmentBounds(lift_start, lift_end + 1, "lift_phase")
    return press, lift


def extract_pressing(rec: Recording, cfg: ExtractConfig = ExtractConfig(),
                     fit_cfg: FitConfig = FitConfig()):
    """Pressing features {aP1, bP1, aP2, bP2, cP2, deltaP}."""
    press, lift = segment_pressing(rec, cfg)
    force = rec.channels["normal_force_N"]
    depth = rec.channels["indentation_mm"] - rec.channels["indentation_mm"][press.start]

    flags = _Flags()
    diagnostics: dict[str, dict] = {}

    f_press = force[press.slice()]
    d_press = depth[press.slice()]
    f_lift = force[lift.slice()]
    d_lift = depth[lift.slice()]

    low_signal = float(np.ptp(depth)) < 1e-9
    if low_signal:
        flags.add(("aP1", "bP1", "aP2", "bP2", "cP2", "deltaP"), "low_signal")

    press_fit = fit(ModelKind.EXPONENTIAL, f_press, d_press,
                    fixed={"c": 0.0}, config=fit_cfg)
    diagnostics["pressing_press"] = press_fit.to_dict()
    if not press_fit.converged:
        flags.add(("aP1", "bP1"), "fit_not_converged")

    lift_fit = fit(ModelKind.EXPONENTIAL, f_lift, d_lift, config=fit_cfg)
    diagnostics["pressing_lift"] = lift_fit.to_dict()
    if not lift_fit.converged:
        flags.add(("aP2", "bP2", "cP2"), "fit_not_converged")

    lo = max(float(np.min(f_press)), float(np.min(f_lift)))
    hi = min(float(np.max(f_press)), float(np.max(f_lift)))
    if hi > lo:
        grid = np.linspace(lo, hi, cfg.hysteresis_grid)
        op = np.argsort(f_press, kind="mergesort")
        ol = np.argsort(f_lift, kind="mergesort")
        gap = (np.interp(grid, f_lift[ol], d_lift[ol])
               - np.interp(grid, f_press[op], d_press[op]))
        delta = float(np.mean(gap))
    else:
        delta = 0.0
        flags.add("deltaP", "no_force_overlap")

    values = {
        "aP1": float(press_fit.params[0]),
        "bP1": float(press_fit.params[1]),
        "aP2": float(lift_fit.params[0]),
        "bP2": float(lift_fit.params[1]),
        "cP2": float(lift_fit.params[2]),
        "deltaP": delta,
    }
    return values, flags.data, diagnostics


# ---------------------------------------------------------------------------
# Static contact: heat flux
# ---------------------------------------------------------------------------


def _detect_flux_onset(smoothed: np.ndarray, fs: float,
                       cfg: ExtractConfig) -> int:
    """Last sample before the smoothed derivative stays negative >= 0.5 s."""
    deriv = np.diff(smoothed)
    run = max(1, int(round(cfg.onset_run_s * fs)))
    start = _sustained_run_start(deriv < 0.0, run)
    return start


def extract_heatflux(rec: Recording, cfg: ExtractConfig = ExtractConfig(),
                     fit_cfg: FitConfig = FitConfig()):
    """Heat-flux features {aH1, bH1, cH1, aH2, bH2, cH2}.

    Segment 1 (onset -> minimum) is fitted with the logistic in absolute
    trial time; segment 2 (minimum -> onset + 30 s) with the power law on a
    time axis re-origined to the minimum and shifted one sample period so
    x > 0.
    """
    if rec.procedure != "static_contact":
        raise ExtractError(f"trial {rec.trial_id}: not a static-contact trial")
    flux = rec.channels["heat_flux_Wm2"]
    t = rec.timestamps
    fs = rec.sample_rate_hz
    n = flux.size
    flags = _Flags()
    diagnostics: dict[str, dict] = {}

    w = _smooth_window(fs, n, cfg.smooth_window_s)
    sm = dsp.moving_average(flux, w)
    onset = _detect_flux_onset(sm, fs, cfg)
    if onset < 0:
        raise ExtractError(f"trial {rec.trial_id}: no onset detected in "
                           "heat flux (no sustained decrease)")
    min_idx = onset + int(np.argmin(sm[onset:]))
    values = dict.fromkeys(("aH1", "bH1", "cH1", "aH2", "bH2", "cH2"), 0.0)

    if min_idx - onset >= 4:
        seg1 = fit(ModelKind.LOGISTIC, t[onset:min_idx + 1],
                   flux[onset:min_idx + 1], config=fit_cfg)
        diagnostics["flux_drop"] = seg1.to_dict()
        values["aH1"], values["bH1"], values["cH1"] = map(float, seg1.params)
        if not seg1.converged:
            flags.add(("aH1", "bH1", "cH1"), "fit_not_converged")
    else:
        flags.add(("aH1", "bH1", "cH1"), "segment_too_short")

    origin_t = t[onset] if cfg.recovery_origin == "onset" else t[0]
    end_idx = int(np.searchsorted(t, origin_t + cfg.recovery_window_s, "right"))
    end_idx = min(end_idx, n)
    dt = 1.0 / fs
    x2 = t[min_idx:end_idx] - t[min_idx] + dt
    y2 = flux[min_idx:end_idx]
    if x2.size and (x2[-1] - x2[0]) < cfg.recovery_min_s:
        flags.add(("aH2", "bH2", "cH2"), "recovery_short")
    if x2.size >= 4:
        seg2 = fit(ModelKind.POWER_LAW, x2, y2, config=fit_cfg)
        diagnostics["flux_stabilize"] = seg2.to_dict()
        values["aH2"], values["bH2"], values["cH2"] = map(float, seg2.params)
        if not seg2.converged:
            flags.add(("aH2", "bH2", "cH2"), "fit_not_converged")
    else:
        flags.add(("aH2", "bH2", "cH2"), "segment_too_short")
    return values, flags.data, diagnostics


# ---------------------------------------------------------------------------
# Static contact: temperature
# ---------------------------------------------------------------------------


def extract_temperature(rec: Recording, cfg: ExtractConfig = ExtractConfig(),
                        fit_cfg: FitConfig = FitConfig()):
    """Temperature features {aT..dT, aT0..dT0, madPeak}.

    The sharp-drop interval runs from the last point where the smoothed
    trace was still (weakly) rising before the steepest negative derivative,
    to the first point after it where the trace stops falling. The 4PL fit
    uses that interval, re-origined to its start plus one sample period.
    Representative values and the MAD peak come from the raw series.
    """
    if rec.procedure != "static_contact":
        raise ExtractError(f"trial {rec.trial_id}: not a static-contact trial")
    temp = rec.channels["skin_temp_C"]
    t = rec.timestamps
    fs = rec.sample_rate_hz
    n = temp.size
    flags = _Flags()
    diagnostics: dict[str, dict] = {}
    values: dict[str, float] = {}

    k = min(cfg.mad_window, n)
    values["madPeak"] = float(np.max(dsp.moving_mad(temp, k)))

    w = _smooth_window(fs, n, cfg.smooth_window_s)
    sm = dsp.moving_average(temp, w)
    deriv = np.diff(sm)
    steep = int(np.argmin(deriv)) if deriv.size else 0

    drop_found = deriv.size > 0 and deriv[steep] < 0.0
    if not drop_found:
        flags.add(("aT", "bT", "cT", "dT"), "no_drop_detected")
        for key in ("aT", "bT", "cT", "dT"):
            values[key] = 0.0
        values["aT0"] = float(np.max(temp))
        values["bT0"] = float(np.min(temp))
        values["cT0"] = float(np.max(temp[int(np.argmin(temp)):]))
        values["dT0"] = float(temp[-1])
        return values, flags.data, diagnostics

    rising = np.nonzero(deriv[:steep + 1] >= 0.0)[0]
    drop_start = int(rising[-1]) + 1 if rising.size else 0
    after = np.nonzero(deriv[steep:] >= 0.0)[0]
    drop_end = steep + int(after[0]) if after.size else n - 1
    if not after.size:
        flags.add(("aT", "bT", "cT", "dT"), "no_local_minimum")

    dt = 1.0 / fs
    x = t[drop_start:drop_end + 1] - t[drop_start] + dt
    y = temp[drop_start:drop_end + 1]
    if x.size >= 5:
        seg = fit(ModelKind.FOUR_PL, x, y, config=fit_cfg)
        diagnostics["temp_drop"] = seg.to_dict()
        values["aT"], values["bT"], values["cT"], values["dT"] = map(float, seg.params)
        if not seg.converged:
            flags.add(("aT", "bT", "cT", "dT"), "fit_not_converged")
    else:
        for key in ("aT", "bT", "cT", "dT"):
            values[key] = 0.0
        flags.add(("aT", "bT", "cT", "dT"), "segment_too_short")

    values["aT0"] = float(np.max(temp[:drop_start + 1]))
    min_rel = int(np.argmin(temp[drop_start:drop_end + 1]))
    min_idx = drop_start + min_rel
    values["bT0"] = float(temp[min_idx])
    values["cT0"] = float(np.max(temp[min_idx:]))
    values["dT0"] = float(temp[-1])
    return values, flags.data, diagnostics


# ---------------------------------------------------------------------------
# Sliding
# ---------------------------------------------------------------------------


def _longest_true_run(mask: np.ndarray) -> tuple[int, int]:
    """(start, end) of the longest contiguous True run; (0, 0) if none."""
    if not mask.any():
        return 0, 0
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    starts, ends = edges[::2], edges[1::2]
    i = int(np.argmax(ends - starts))
    return int(starts[i]), int(ends[i])


def extract_sliding(rec: Recording, cfg: ExtractConfig = ExtractConfig()):
    """The 77 sliding features: s1..s25, sAcc1..sAcc24, mfccF1..14, mfccA1..14."""
    if rec.procedure != "sliding":
        raise ExtractError(f"trial {rec.trial_id}: not a sliding trial")
    fs = rec.sample_rate_hz
    normal = rec.channels["normal_force_N"]
    lateral = rec.channels["lateral_force_N"]
    flags = _Flags()
    values: dict[str, float] = {}

    contact = normal > cfg.min_normal_force_n
    span_start, span_end = _longest_true_run(contact)
    span_ok = span_end - span_start > 0
    if span_ok and span_end - span_start >= dsp.MFCC_FRAME:
        sl = slice(span_start, span_end)
    else:
        sl = slice(0, normal.size)
        if span_ok:
            flags.add("s13", "short_contact_span")

    if span_ok:
        seg = slice(span_start, span_end)
        values["s13"] = float(np.mean(np.abs(lateral[seg]) / normal[seg]))
    else:
        values["s13"] = 0.0
        flags.add("s13", "friction_undefined")

    hi = cfg.band_hi_hz
    if hi >= 0.5 * fs:
        hi = 0.45 * fs
        flags.add(SLIDING_FEATURES, "bandpass_truncated")
    bp_lat = dsp.bandpass(lateral[sl], fs, cfg.band_lo_hz, hi)
    axes = [dsp.bandpass(rec.channels[f"accel_{ax}_ms2"][sl], fs,
                         cfg.band_lo_hz, hi) for ax in ("x", "y", "z")]
    accel_mag = np.sqrt(axes[0] ** 2 + axes[1] ** 2 + axes[2] ** 2)

    force_time = dsp.time_descriptors(bp_lat)
    force_spec = dsp.spectral_descriptors(dsp.power_spectrum(bp_lat, fs))
    for src in (force_time, force_spec):
        values.update(src.values)
        for key, reasons in src.flags.items():
            for reason in reasons:
                flags.add(key, reason)

    acc_time = dsp.time_descriptors(accel_mag)
    acc_spec = dsp.spectral_descriptors(dsp.power_spectrum(accel_mag, fs))
    acc_values = {**acc_time.values, **acc_spec.values}
    acc_flags = {**acc_time.flags, **acc_spec.flags}
    for out_name, src_key in zip(SLIDING_ACCEL_FEATURES, ACCEL_SOURCE_KEYS):
        values[out_name] = acc_values[src_key]
        for reason in acc_flags.get(src_key, ()):
            flags.add(out_name, reason)

    try:
        mf = dsp.mfcc(bp_lat, fs)
        ma = dsp.mfcc(accel_mag, fs)
    except ValueError as exc:
        raise ExtractError(f"trial {rec.trial_id}: {exc}") from exc
    for name, v in zip(MFCC_FORCE_FEATURES, mf):
        values[name] = float(v)
    for name, v in zip(MFCC_ACCEL_FEATURES, ma):
        values[name] = float(v)
    return values, flags.data, {}


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


def extract_trial(rec: Recording, cfg: ExtractConfig = ExtractConfig(),
                  fit_cfg: FitConfig = FitConfig()):
    """All features available from a single recording."""
    if rec.procedure == "pressing":
        return extract_pressing(rec, cfg, fit_cfg)
    if rec.procedure == "sliding":
        return extract_sliding(rec, cfg)
    hv, hf, hd = extract_heatflux(rec, cfg, fit_cfg)
    tv, tf, td = extract_temperature(rec, cfg, fit_cfg)
    hv.update(tv)
    for key, reasons in tf.items():
        hf.setdefault(key, []).extend(reasons)
    hd.update(td)
    return hv, hf, hd


def assemble_features(manifest: CorpusManifest,
                      cfg: ExtractConfig = ExtractConfig(),
                      fit_cfg: FitConfig = FitConfig(),
                      workers: int = 0) -> list[FeatureVector]:
    """One 98-feature vector per (participant, surface, repetition tuple).

    Trials are grouped per (participant, surface), sorted by trial id within
    each procedure, and paired by repetition index. Sample keys missing any
    procedure are dropped with a warning, never imputed.
    """
    groups: dict[tuple[str, int], dict[str, list[TrialRef]]] = {}
    for ref in manifest.trials:
        key = (ref.participant_id, ref.surface_id)
        groups.setdefault(key, {}).setdefault(ref.procedure, []).append(ref)

    tasks: list[tuple[str, int, int, dict[str, TrialRef]]] = []
    for (pid, sid) in sorted(groups):
        procs = groups[(pid, sid)]
        missing = [p for p in ("pressing", "static_contact", "sliding")
                   if p not in procs]
        if missing:
            warnings.warn(f"sample ({pid}, surface {sid}) dropped: missing "
                          f"{', '.join(missing)} trial(s)", stacklevel=2)
            continue
        for proc in procs:
            procs[proc].sort(key=lambda r: r.trial_id)
        counts = {p: len(procs[p]) for p in procs}
        n_rep = min(counts.values())
        if len(set(counts.values())) > 1:
            warnings.warn(f"sample ({pid}, surface {sid}): unequal trial "
                          f"counts {counts}; using first {n_rep} of each",
                          stacklevel=2)
        for rep in range(n_rep):
            tasks.append((pid, sid, rep, {p: procs[p][rep] for p in procs}))

    def run(task):
        pid, sid, rep, refs = task
        values: dict[str, float] = {}
        flags: dict[str, list[str]] = {}
        diagnostics: dict[str, dict] = {}
        for proc in ("pressing", "static_contact", "sliding"):
            rec = manifest.load_recording(refs[proc])
            v, f, d = extract_trial(rec, cfg, fit_cfg)
            values.update(v)
            for key, reasons in f.items():
                flags.setdefault(key, []).extend(reasons)
            diagnostics.update(d)
        for name in FEATURE_NAMES:
            if name not in values:
                raise ExtractError(f"sample ({pid}, {sid}, {rep}): extractor "
                                   f"produced no value for {name}")
            if not np.isfinite(values[name]):
                values[name] = 0.0
                flags.setdefault(name, []).append("nonfinite_replaced")
        return FeatureVector(
            participant_id=pid, surface_id=sid, rep=rep,
            material_class=manifest.material_of(sid),
            trial_ids={p: refs[p].trial_id for p in refs},
            values={n: values[n] for n in FEATURE_NAMES},
            quality_flags=flags, diagnostics=diagnostics)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    results.sort(key=lambda fv: (fv.participant_id, fv.surface_id, fv.rep))
    return results


# ---------------------------------------------------------------------------
# Feature table I/O
# ---------------------------------------------------------------------------


def write_features_csv(features: list[FeatureVector], path,
                       ratings=None) -> None:
    """Sample rows: keys, material label, the 98 features, and (when a
    RatingMatrix is supplied) the surface's averaged rating columns."""
    from .dataio import float_repr
    rating_cols = []
    rating_rows = {}
    if ratings is not None:
        rating_cols = [f"rating_{p}" for p in ratings.pairs]
        rating_rows = {sid: ratings.averaged[i]
                       for i, sid in enumerate(ratings.surface_ids)}
    header = (["participant_id", "surface_id", "rep", "material_class"]
              + list(FEATURE_NAMES) + rating_cols)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for fv in features:
            row = [fv.participant_id, str(fv.surface_id), str(fv.rep),
                   fv.material_class]
            row += [float_repr(fv.values[n]) for n in FEATURE_NAMES]
            if ratings is not None:
                if fv.surface_id not in rating_rows:
                    raise ExtractError(f"surface {fv.surface_id} has no "
                                       "rating row")
                row += [float_repr(v) for v in rating_rows[fv.surface_id]]
            fh.write(",".join(row) + "\n")


def read_features_csv(path) -> list[FeatureVector]:
    """Load a feature table written by ``write_features_csv``."""
    import csv as _csv
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = _csv.DictReader(fh)
        missing = [n for n in FEATURE_NAMES
                   if n not in (reader.fieldnames or ())]
        if missing:
            raise ExtractError(f"feature table missing columns: "
                               f"{missing[:4]}{'...' if len(missing) > 4 else ''}")
        for row in reader:
            out.append(FeatureVector(
                participant_id=row["participant_id"],
                surface_id=int(row["surface_id"]),
                rep=int(row["rep"]),
                material_class=row["material_class"],
                trial_ids={},
                values={n: float(row[n]) for n in FEATURE_NAMES}))
    if not out:
        raise ExtractError(f"feature table {path} is empty")
    return out


def write_flags_json(features: list[FeatureVector], path, config_hash: str,
                     seed: int) -> None:
    """Quality-flag and fit-diagnostic sidecar for a feature table."""
    import json
    doc = {"config_hash": config_hash, "seed": seed, "samples": {}}
    for fv in features:
        doc["samples"][fv.sample_id] = {
            "trials": fv.trial_ids,
            "flags": fv.quality_flags,
            "diagnostics": fv.diagnostics,
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")
