"""Ground-truth synthetic corpus generator.

Signals are phenomenological: each generator embeds the same parametric
curve families the extractors fit, with boundary slopes arranged so the
segmentation heuristics land on the true boundaries. That makes generation
followed by extraction approximately the identity on the generating
parameters at zero noise, which is what the closed-loop tests check.

Every generator is deterministic under its seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ._kernels import mix_seed
from .curvefit import ModelKind, eval_model
from .dataio import (ADJECTIVE_PAIRS, MATERIAL_CLASSES, CorpusManifest,
                     RawRatings, Recording, TrialRef, float_repr, load_corpus,
                     write_manifest, write_ratings, write_trial_csv)

PRESS_FS = 500.0
THERMAL_FS = 100.0
SLIDING_FS = 10_000.0
THERMAL_DURATION_S = 36.0
SLIDING_DURATION_S = 1.0

CONTACT_TIME_S = 2.0
PEAK_FORCE_N = 3.0
FORCE_JUMP_N = 0.12        # initial contact step, keeps detection at t=contact
HOLD_S = 2.0
RAMP_S = 1.5

TEMP_RISE_S = 1.5
TEMP_DRIFT_AFTER_S = 16.0
TEMP_DRIFT_FRACTION = 0.25   # regained fraction of the drop once saturated
TEMP_DRIFT_TAU_S = 6.0       # regeneration time scale; keeps its slope well
                             # below the contact drop's so the MAD peak stays
                             # at contact


@dataclass(frozen=True)
class SurfaceSpec:
    """Generating parameters for one synthetic surface."""

    material_class: str
    # pressing: indentation depth vs force, press and lift branches
    press_a: float
    press_b: float
    lift_a: float
    lift_b: float
    # heat flux: logistic drop (c relative to contact) then power-law recovery
    flux_a: float
    flux_b: float
    flux_c: float
    flux_pow_b: float
    drop_s: float              # drop duration: logistic runs this long
    # skin temperature: 4PL drop from peak, plus slow regeneration drift
    temp_peak: float
    temp_drop: float
    temp_b: float
    temp_c: float
    # sliding
    friction_mu: float
    vib_freqs: tuple
    vib_amps: tuple
    accel_scale: float
    normal_force: float = 1.5
    noise: float = 1.0         # master noise multiplier; 0 = noiseless
    seed: int = 0

    def __post_init__(self):
        if self.press_a <= 0 or self.press_b <= 0:
            raise ValueError("pressing params must be positive")
        if self.flux_a >= 0:
            raise ValueError("flux_a must be negative (heat leaves the skin)")
        if self.temp_drop <= 0:
            raise ValueError("temp_drop must be positive (aT0 > dT)")
        if self.friction_mu < 0:
            raise ValueError("friction_mu must be nonnegative")
        if len(self.vib_freqs) != len(self.vib_amps):
            raise ValueError("vibration freqs/amps length mismatch")

    @property
    def lift_c(self) -> float:
        """Lift-branch offset making press and lift meet at peak force."""
        press_peak = self.press_a * (1.0 - np.exp(-self.press_b * PEAK_FORCE_N))
        lift_peak = self.lift_a * (1.0 - np.exp(-self.lift_b * PEAK_FORCE_N))
        return float(press_peak - lift_peak)


def curve_samples(kind: ModelKind, params, n: int, x_lo: float, x_hi: float,
                  noise: float = 0.0, seed: int = 0):
    """Sample one model curve on a uniform grid, optional relative noise."""
    x = np.linspace(x_lo, x_hi, n)
    y = eval_model(kind, params, x)
    if noise > 0.0:
        rng = np.random.default_rng(seed)
        scale = float(np.ptp(y))
        if scale == 0.0:
            scale = max(abs(float(np.mean(y))), 1.0)
        y = y + rng.normal(0.0, noise * scale, size=n)
    return x, y


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.PCG64(seed))


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def gen_pressing(spec: SurfaceSpec, fs: float = PRESS_FS, seed: int = 0,
                 trial_id: str = "synt-press", participant_id: str = "p01",
                 surface_id: int = 1) -> tuple[Recording, dict]:
    """Pressing trial: force trapezoid 0 -> 3 N -> 2 s hold -> 0.

    Force steps to a small jump at contact so threshold detection lands on
    the true contact sample; indentation follows the press branch up to the
    hold and the lift branch afterwards, meeting at peak force.
    """
    rng = _rng(seed)
    pre = CONTACT_TIME_S
    total = pre + RAMP_S + HOLD_S + RAMP_S + 0.5
    n = int(round(total * fs)) + 1
    t = np.arange(n) / fs

    force = np.zeros(n)
    up = (t >= pre) & (t < pre + RAMP_S)
    force[up] = FORCE_JUMP_N + (PEAK_FORCE_N - FORCE_JUMP_N) * (t[up] - pre) / RAMP_S
    hold = (t >= pre + RAMP_S) & (t < pre + RAMP_S + HOLD_S)
    force[hold] = PEAK_FORCE_N
    down_t0 = pre + RAMP_S + HOLD_S
    down = (t >= down_t0) & (t < down_t0 + RAMP_S)
    force[down] = PEAK_FORCE_N * (1.0 - (t[down] - down_t0) / RAMP_S)

    depth = np.zeros(n)
    press_part = t < down_t0
    depth[press_part] = spec.press_a * (1.0 - np.exp(-spec.press_b * force[press_part]))
    lift_part = ~press_part
    depth[lift_part] = (spec.lift_a * (1.0 - np.exp(-spec.lift_b * force[lift_part]))
                        + spec.lift_c)

    if spec.noise > 0.0:
        force = force + rng.normal(0.0, 0.004 * spec.noise, n)
        depth = depth + rng.normal(0.0, 0.0015 * spec.press_a * spec.noise, n)

    rec = Recording(
        trial_id=trial_id, participant_id=participant_id,
        surface_id=surface_id, material_class=spec.material_class,
        procedure="pressing", sample_rate_hz=fs, timestamps=t,
        channels={"normal_force_N": force, "indentation_mm": depth},
        meta={"contact_time_s": pre})
    truth = {"press_a": spec.press_a, "press_b": spec.press_b,
             "lift_a": spec.lift_a, "lift_b": spec.lift_b,
             "lift_c": spec.lift_c}
    return rec, truth


def _fourpl(x, a, b, c, d):
    return d + (a - d) / (1.0 + (x / c) ** b)


def gen_thermal(spec: SurfaceSpec, fs: float = THERMAL_FS,
                duration: float = THERMAL_DURATION_S, seed: int = 0,
                trial_id: str = "synt-thermal", participant_id: str = "p01",
                surface_id: int = 1) -> tuple[Recording, dict]:
    """Static-contact trial: heat flux and skin temperature.

    Flux: exact plateau, then the logistic itself from contact to the drop
    end, then a slope-matched power-law recovery, continuous at the minimum.
    Temperature: a gentle rise whose slope matches the 4PL's initial fall
    (so the smoothed peak pins the drop start), the 4PL drop, and a slow
    quadratic regeneration that creates the post-drop local minimum.
    """
    if duration < CONTACT_TIME_S + 31.0:
        raise ValueError("duration must cover contact + 30 s recovery window")
    rng = _rng(seed)
    n = int(round(duration * fs)) + 1
    t = np.arange(n) / fs
    dt = 1.0 / fs
    t_c = round(CONTACT_TIME_S * fs) / fs
    t_min = round((CONTACT_TIME_S + spec.drop_s) * fs) / fs
    c_abs = t_c + spec.flux_c

    def logistic(tv):
        return spec.flux_a / (1.0 + np.exp(-spec.flux_b * (tv - c_abs)))

    flux = np.empty(n)
    pre = t < t_c
    flux[pre] = logistic(t_c)
    drop = (t >= t_c) & (t <= t_min)
    flux[drop] = logistic(t[drop])
    # slope-matched recovery: mean power-law slope over the first half
    # smoothing window equals the logistic's end slope
    p_end = 1.0 / (1.0 + np.exp(-spec.flux_b * (t_min - c_abs)))
    slope_end = abs(spec.flux_a) * spec.flux_b * p_end * (1.0 - p_end)
    half_win = 0.25
    pow_b = spec.flux_pow_b
    pow_a = slope_end * half_win ** (1.0 - pow_b)
    pow_c = float(logistic(t_min)) - pow_a * dt ** pow_b
    rec_part = t > t_min
    flux[rec_part] = pow_a * (t[rec_part] - t_min + dt) ** pow_b + pow_c

    a4 = spec.temp_peak
    d4 = spec.temp_peak - spec.temp_drop
    b4 = spec.temp_b
    c4 = spec.temp_c
    temp = np.empty(n)
    post = t >= t_c
    x4 = t[post] - t_c + dt
    temp[post] = _fourpl(x4, a4, b4, c4, d4)
    peak_val = _fourpl(dt, a4, b4, c4, d4)
    rise_slope = (peak_val - _fourpl(dt + half_win, a4, b4, c4, d4)) / half_win
    # linear rise into the peak at the 4PL's early fall slope; flat before it
    rise = np.minimum(t_c - t[~post], TEMP_RISE_S)
    temp[~post] = peak_val - rise_slope * rise
    drift_t = np.maximum(t - (t_c + TEMP_DRIFT_AFTER_S), 0.0)
    drift_amp = TEMP_DRIFT_FRACTION * spec.temp_drop
    temp = temp + drift_amp * (1.0 - np.exp(-(drift_t / TEMP_DRIFT_TAU_S) ** 2))

    if spec.noise > 0.0:
        flux = flux + rng.normal(0.0, 0.006 * abs(spec.flux_a) * spec.noise, n)
        temp = temp + rng.normal(0.0, 0.01 * spec.noise, n)

    rec = Recording(
        trial_id=trial_id, participant_id=participant_id,
        surface_id=surface_id, material_class=spec.material_class,
        procedure="static_contact", sample_rate_hz=fs, timestamps=t,
        channels={"heat_flux_Wm2": flux, "skin_temp_C": temp},
        meta={"contact_time_s": t_c})
    truth = {"flux_a": spec.flux_a, "flux_b": spec.flux_b,
             "flux_c_abs": c_abs, "pow_a": pow_a, "pow_b": pow_b,
             "pow_c": pow_c, "t_min_abs": t_min,
             "temp_a": a4, "temp_b": b4, "temp_c": c4, "temp_d": d4,
             "temp_peak_value": float(peak_val)}
    return rec, truth


def gen_sliding(spec: SurfaceSpec, fs: float = SLIDING_FS,
                duration: float = SLIDING_DURATION_S, seed: int = 0,
                trial_id: str = "synt-slide", participant_id: str = "p01",
                surface_id: int = 1) -> tuple[Recording, dict]:
    """Sliding trial: constant normal load, friction plus tonal vibration."""
    if fs < 2000.0:
        raise ValueError("sliding generation needs fs >= 2 kHz")
    rng = _rng(seed)
    n = int(round(duration * fs))
    t = np.arange(n) / fs

    vib = np.zeros(n)
    phases = rng.uniform(0.0, 2.0 * np.pi, len(spec.vib_freqs)) if spec.noise > 0 \
        else np.zeros(len(spec.vib_freqs))
    for f, amp, ph in zip(spec.vib_freqs, spec.vib_amps, phases):
        vib += amp * np.sin(2.0 * np.pi * f * t + ph)

    normal = np.full(n, spec.normal_force)
    lateral = spec.friction_mu * spec.normal_force + vib
    gains = (0.5, 0.3, 0.8)
    accel = [spec.accel_scale * g * vib for g in gains]
    if spec.noise > 0.0:
        normal = normal + rng.normal(0.0, 0.003 * spec.noise, n)
        lateral = lateral + rng.normal(0.0, 0.004 * spec.noise, n)
        accel = [a + rng.normal(0.0, 0.02 * spec.accel_scale * spec.noise, n)
                 for a in accel]

    rec = Recording(
        trial_id=trial_id, participant_id=participant_id,
        surface_id=surface_id, material_class=spec.material_class,
        procedure="sliding", sample_rate_hz=fs, timestamps=t,
        channels={"normal_force_N": normal, "lateral_force_N": lateral,
                  "accel_x_ms2": accel[0], "accel_y_ms2": accel[1],
                  "accel_z_ms2": accel[2]},
        meta={})
    truth = {"friction_mu": spec.friction_mu,
             "vib_freqs": list(spec.vib_freqs),
             "vib_amps": list(spec.vib_amps),
             "vib_energy": float(np.sum(np.square(spec.vib_amps))),
             "accel_scale": spec.accel_scale}
    return rec, truth


# ---------------------------------------------------------------------------
# Class profiles and corpus assembly
# ---------------------------------------------------------------------------

# (press_a mm, press_b 1/N, flux_a W/m2, temp_drop degC, mu,
#  vib (freq Hz, amp N) pairs, accel scale)
_CLASS_TABLE = {
    "metal":     (0.06, 1.4, -80.0, 5.5, 0.25, ((180, 0.010), (520, 0.006)), 6.0),
    "wood":      (0.12, 1.2, -35.0, 2.0, 0.45, ((140, 0.030), (300, 0.015)), 9.0),
    "fabric":    (1.60, 0.7, -18.0, 1.2, 0.70, ((90, 0.050), (210, 0.020)), 12.0),
    "paper":     (0.30, 1.0, -28.0, 1.8, 0.50, ((260, 0.020),), 7.0),
    "rubber":    (1.20, 0.8, -40.0, 2.8, 1.10, ((60, 0.020), (350, 0.010)), 5.0),
    "plastic":   (0.20, 1.3, -45.0, 3.2, 0.35, ((310, 0.015), (800, 0.010)), 8.0),
    "sandpaper": (0.25, 1.1, -50.0, 2.6, 1.30, ((120, 0.090), (450, 0.060), (900, 0.030)), 20.0),
    "leather":   (0.80, 0.9, -30.0, 1.6, 0.80, ((75, 0.030), (190, 0.012)), 6.5),
    "foam":      (2.60, 0.6, -12.0, 0.8, 0.95, ((45, 0.040),), 10.0),
    "vinyl":     (0.50, 1.0, -55.0, 3.8, 0.60, ((220, 0.020), (640, 0.012)), 7.5),
}


def class_profile(material: str, seed: int = 0) -> SurfaceSpec:
    """The base SurfaceSpec template for one material class."""
    press_a, press_b, flux_a, temp_drop, mu, vib, acc = _CLASS_TABLE[material]
    return SurfaceSpec(
        material_class=material,
        press_a=press_a, press_b=press_b,
        lift_a=press_a * 1.15, lift_b=press_b * 0.8,
        flux_a=flux_a, flux_b=2.5, flux_c=1.8, flux_pow_b=0.85, drop_s=4.0,
        temp_peak=30.5, temp_drop=temp_drop, temp_b=1.4, temp_c=3.5,
        friction_mu=mu,
        vib_freqs=tuple(f for f, _ in vib),
        vib_amps=tuple(a for _, a in vib),
        accel_scale=acc, seed=seed)


def default_class_profiles(seed: int = 0) -> dict[str, SurfaceSpec]:
    return {m: class_profile(m, seed) for m in MATERIAL_CLASSES}


_JITTERED = ("press_a", "press_b", "lift_a", "lift_b", "temp_drop",
             "friction_mu", "accel_scale")


def jitter_spec(base: SurfaceSpec, seed: int, rel: float = 0.10) -> SurfaceSpec:
    """Per-surface variation: relative lognormal jitter on positive params."""
    rng = _rng(seed)
    changes = {}
    for name in _JITTERED:
        changes[name] = getattr(base, name) * float(rng.lognormal(0.0, rel))
    changes["flux_a"] = base.flux_a * float(rng.lognormal(0.0, rel))
    changes["vib_amps"] = tuple(
        a * float(rng.lognormal(0.0, rel)) for a in base.vib_amps)
    changes["temp_c"] = base.temp_c * float(rng.lognormal(0.0, rel / 2))
    changes["seed"] = seed
    return replace(base, **changes)


def surface_specs(seed: int = 0, profiles: dict[str, SurfaceSpec] | None = None,
                  noise: float = 1.0) -> dict[int, SurfaceSpec]:
    """The 50 jittered surface specs, 5 per material class."""
    profiles = profiles or default_class_profiles(seed)
    if len(profiles) != len(MATERIAL_CLASSES):
        raise ValueError(f"need {len(MATERIAL_CLASSES)} class profiles")
    specs = {}
    for ci, material in enumerate(MATERIAL_CLASSES):
        base = replace(profiles[material], noise=noise)
        for j in range(5):
            sid = ci * 5 + j + 1
            specs[sid] = jitter_spec(base, mix_seed(seed, sid))
    return specs


_RATING_DRIVERS = {
    "rough_smooth": lambda s: float(np.sum(np.square(s.vib_amps))),
    "sticky_slippery": lambda s: s.friction_mu,
    "hot_cold": lambda s: abs(s.flux_a),
    "hard_soft": lambda s: s.press_a,
    "wet_dry": lambda s: s.temp_drop,
}


def gen_ratings(specs: dict[int, SurfaceSpec], n_raters: int = 20,
                seed: int = 0, noise: float = 1.0) -> list[RawRatings]:
    """Synthetic 15-point ratings as squashed functions of surface params."""
    sids = sorted(specs)
    raws = []
    for r in range(n_raters):
        rng = _rng(mix_seed(seed, 7000 + r))
        ratings = {}
        for pair in ADJECTIVE_PAIRS:
            driver = np.array([_RATING_DRIVERS[pair](specs[s]) for s in sids])
            z = (driver - driver.mean()) / (driver.std() or 1.0)
            base = 1.0 / (1.0 + np.exp(-1.5 * z))
            jittered = np.clip(base + rng.normal(0.0, 0.08 * noise, len(sids)), 0.0, 1.0)
            for sid, q in zip(sids, jittered):
                ratings[(sid, pair)] = float(1.0 + 14.0 * q)
        raws.append(RawRatings(participant_id=f"rater{r + 1:02d}", ratings=ratings))
    return raws


def gen_corpus(out_dir, seed: int = 0, participants: tuple[str, ...] = ("p01", "p02"),
               trials: int = 1, noise: float = 1.0, n_raters: int = 20,
               profiles: dict[str, SurfaceSpec] | None = None,
               write_rating_file: bool = True) -> tuple[CorpusManifest, list[dict]]:
    """Write a complete loadable corpus plus its ground-truth table.

    Produces 50 surfaces x len(participants) x trials recordings per
    procedure, a manifest, truth_table.csv, and (optionally) ratings.json.
    Returns the loaded manifest and the truth rows.
    """
    out = Path(out_dir)
    (out / "trials").mkdir(parents=True, exist_ok=True)
    specs = surface_specs(seed, profiles, noise)

    surfaces = {sid: {"material_class": spec.material_class,
                      "description": f"synthetic {spec.material_class} surface {sid}"}
                for sid, spec in specs.items()}

    generators = {"pressing": gen_pressing, "static_contact": gen_thermal,
                  "sliding": gen_sliding}
    refs = []
    truth_rows = []
    for sid in sorted(specs):
        spec = specs[sid]
        row = {"surface_id": sid, "material_class": spec.material_class,
               "press_a": spec.press_a, "press_b": spec.press_b,
               "lift_a": spec.lift_a, "lift_b": spec.lift_b,
               "lift_c": spec.lift_c, "flux_a": spec.flux_a,
               "flux_b": spec.flux_b, "flux_c_abs": CONTACT_TIME_S + spec.flux_c,
               "temp_a": spec.temp_peak, "temp_b": spec.temp_b,
               "temp_c": spec.temp_c, "temp_d": spec.temp_peak - spec.temp_drop,
               "friction_mu": spec.friction_mu,
               "vib_energy": float(np.sum(np.square(spec.vib_amps)))}
        truth_rows.append(row)
        for pi, pid in enumerate(participants):
            for rep in range(trials):
                for gi, (proc, gen) in enumerate(generators.items()):
                    trial_id = f"{pid}-s{sid:02d}-{proc}-r{rep}"
                    tseed = mix_seed(seed, sid * 1009 + pi * 101 + rep * 11 + gi)
                    rec, _ = gen(spec, seed=tseed, trial_id=trial_id,
                                 participant_id=pid, surface_id=sid)
                    path = f"trials/{trial_id}.csv"
                    write_trial_csv(out / path, rec.timestamps, rec.channels)
                    refs.append(TrialRef(
                        trial_id=trial_id, participant_id=pid, surface_id=sid,
                        procedure=proc, sample_rate_hz=rec.sample_rate_hz,
                        path=path, meta=rec.meta))
    write_manifest(out, surfaces, refs)

    with open(out / "truth_table.csv", "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        cols = list(truth_rows[0])
        writer.writerow(cols)
        for row in truth_rows:
            writer.writerow([row["surface_id"], row["material_class"]]
                            + [float_repr(row[c]) for c in cols[2:]])

    if write_rating_file and n_raters > 0:
        write_ratings(out / "ratings.json",
                      gen_ratings(specs, n_raters, seed, noise))
    return load_corpus(out), truth_rows
