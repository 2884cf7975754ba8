"""Signal-processing primitives shared by the three feature extractors.

Descriptor key names ("s1".."s25") are a stable public contract; the mapping
from key to quantity is documented in the feature-registry table in the
README. All functions are pure and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps
from scipy.fft import dct

from ._kernels import sliding_mad

# band edges in Hz for s21..s25: [0,100], (100,500], (500,1000], (1000,2000], (2000,5000]
BAND_EDGES_HZ = (0.0, 100.0, 500.0, 1000.0, 2000.0, 5000.0)

ROLLOFF_FRACTION = 0.95
BANDWIDTH_FLOOR_DB = -20.0
FLATNESS_EPS = 1e-20
MFCC_FRAME = 1024
MFCC_HOP = 512
MFCC_N_MELS = 40
MFCC_LOG_EPS = 1e-10

TIME_KEYS = ("s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10",
             "s11", "s12", "s14")
SPECTRAL_KEYS = ("s15", "s16", "s17", "s18", "s19", "s20",
                 "s21", "s22", "s23", "s24", "s25")


@dataclass(frozen=True)
class Spectrum:
    """One-sided averaged periodogram (Welch, Hann, 50% overlap).

    ``power`` uses "spectrum" scaling: a bin-centered tone's peak bin reads
    its mean-square power, and for broadband input the bin sum equals the
    signal's mean square times the Hann window's noise bandwidth (~1.5).
    """

    freqs_hz: np.ndarray
    power: np.ndarray
    source_rate_hz: float


@dataclass
class DescriptorSet:
    """Named feature-id -> value mapping plus per-key quality flags."""

    values: dict[str, float]
    flags: dict[str, list[str]] = field(default_factory=dict)

    def flag(self, key: str, reason: str) -> None:
        self.flags.setdefault(key, []).append(reason)


def _as_float_array(x, name="x") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


def moving_average(x, window: int) -> np.ndarray:
    """Centered moving average; edges use shrinking windows.

    ``window`` must be odd, positive, and no longer than the signal.
    """
    arr = _as_float_array(x)
    n = arr.size
    if window <= 0 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    if window > n:
        raise ValueError(f"window {window} exceeds signal length {n}")
    half = (window - 1) // 2
    csum = np.concatenate(([0.0], np.cumsum(arr)))
    idx = np.arange(n)
    start = np.maximum(idx - half, 0)
    end = np.minimum(idx + half + 1, n)
    return (csum[end] - csum[start]) / (end - start)


def moving_mad(x, k: int) -> np.ndarray:
    """Sliding k-point median absolute deviation, centered, shrinking edges."""
    arr = _as_float_array(x)
    if k <= 0:
        raise ValueError("k must be a positive integer")
    if k > arr.size:
        raise ValueError(f"k {k} exceeds signal length {arr.size}")
    return sliding_mad(arr, int(k))


def bandpass(x, fs: float, lo: float, hi: float, order: int = 4) -> np.ndarray:
    """Zero-phase Butterworth band-pass (forward-backward), same length."""
    arr = _as_float_array(x)
    nyq = fs / 2.0
    if not 0.0 < lo < hi < nyq:
        raise ValueError(
            f"band edges must satisfy 0 < lo < hi < fs/2, got lo={lo}, hi={hi}, fs={fs}")
    sos = sps.butter(order, [lo, hi], btype="bandpass", fs=fs, output="sos")
    return sps.sosfiltfilt(sos, arr)


def power_spectrum(x, fs: float) -> Spectrum:
    """Welch averaged periodogram: Hann window, 50% overlap.

    Segment length is min(4096, len(x)) rounded down to a power of two.
    """
    arr = _as_float_array(x)
    n = arr.size
    if n < 8:
        raise ValueError(f"signal too short for a spectrum: {n} < 8 samples")
    nper = 1 << int(np.log2(min(4096, n)))
    freqs, power = sps.welch(arr, fs=fs, window="hann", nperseg=nper,
                             noverlap=nper // 2, detrend=False,
                             scaling="spectrum")
    return Spectrum(freqs_hz=freqs, power=power, source_rate_hz=float(fs))


def spectral_descriptors(spec: Spectrum) -> DescriptorSet:
    """Frequency-domain descriptors s15..s25 of a power spectrum.

    s15 centroid, s16 spread, s17 95% roll-off, s18 flatness, s19 -20 dB
    bandwidth, s20 peak frequency, s21..s25 band energies over
    [0,100], (100,500], (500,1000], (1000,2000], (2000,5000] Hz.
    """
    f = spec.freqs_hz
    p = spec.power
    out = DescriptorSet(values={})
    total = float(np.sum(p))
    nyquist = spec.source_rate_hz / 2.0

    if total <= 0.0:
        for key in SPECTRAL_KEYS:
            out.values[key] = 0.0
            out.flag(key, "zero_spectrum")
        return out

    centroid = float(np.sum(f * p) / total)
    spread = float(np.sqrt(np.sum((f - centroid) ** 2 * p) / total))
    cum = np.cumsum(p)
    roll_idx = int(np.searchsorted(cum, ROLLOFF_FRACTION * total))
    rolloff = float(f[min(roll_idx, f.size - 1)])
    p_floor = np.maximum(p, FLATNESS_EPS)
    flatness = float(np.exp(np.mean(np.log(p_floor))) / np.mean(p_floor))
    peak_idx = int(np.argmax(p))
    peak_power = p[peak_idx]
    above = np.nonzero(p >= peak_power * 10.0 ** (BANDWIDTH_FLOOR_DB / 10.0))[0]
    bandwidth = float(f[above[-1]] - f[above[0]])

    out.values.update({
        "s15": centroid,
        "s16": spread,
        "s17": rolloff,
        "s18": flatness,
        "s19": bandwidth,
        "s20": float(f[peak_idx]),
    })
    for i in range(5):
        lo, hi = BAND_EDGES_HZ[i], BAND_EDGES_HZ[i + 1]
        key = f"s{21 + i}"
        if i == 0:
            mask = f <= hi
        else:
            mask = (f > lo) & (f <= hi)
        out.values[key] = float(np.sum(p[mask]))
        if lo >= nyquist:
            out.flag(key, "band_above_nyquist")
        elif hi > nyquist:
            out.flag(key, "band_truncated_at_nyquist")
    return out


def _harmonic_power(power: np.ndarray, center: int, halfwidth: int = 2) -> float:
    lo = max(center - halfwidth, 0)
    hi = min(center + halfwidth + 1, power.size)
    return float(np.sum(power[lo:hi]))


def time_descriptors(x) -> DescriptorSet:
    """Time-domain descriptors s1..s12 and s14 of a signal.

    s1 mean, s2 std (population), s3 RMS, s4 max |x|, s5 skewness,
    s6 kurtosis (non-excess), s7 shape factor, s8 impulse factor,
    s9 crest factor, s10 clearance factor, s11 THD, s12 SINAD,
    s14 average power. Ratio descriptors of a degenerate (all-zero)
    signal are reported 0 and flagged.
    """
    arr = _as_float_array(x)
    n = arr.size
    if n < 4:
        raise ValueError(f"need at least 4 samples, got {n}")
    out = DescriptorSet(values={})

    mean = float(np.mean(arr))
    centered = arr - mean
    m2 = float(np.mean(centered ** 2))
    std = float(np.sqrt(m2))
    rms = float(np.sqrt(np.mean(arr ** 2)))
    abs_x = np.abs(arr)
    peak = float(np.max(abs_x))
    mean_abs = float(np.mean(abs_x))
    mean_sqrt_abs = float(np.mean(np.sqrt(abs_x)))

    out.values["s1"] = mean
    out.values["s2"] = std
    out.values["s3"] = rms
    out.values["s4"] = peak
    out.values["s14"] = float(np.mean(arr ** 2))

    if m2 > 0.0:
        out.values["s5"] = float(np.mean(centered ** 3) / m2 ** 1.5)
        out.values["s6"] = float(np.mean(centered ** 4) / m2 ** 2)
    else:
        out.values["s5"] = 0.0
        out.values["s6"] = 0.0
        out.flag("s5", "zero_variance")
        out.flag("s6", "zero_variance")

    for key, num, den in (("s7", rms, mean_abs),
                          ("s8", peak, mean_abs),
                          ("s9", peak, rms),
                          ("s10", peak, mean_sqrt_abs ** 2)):
        if den > 0.0:
            out.values[key] = num / den
        else:
            out.values[key] = 0.0
            out.flag(key, "zero_signal")

    # THD/SINAD from a Hann-windowed full-length periodogram. The
    # fundamental is the largest non-DC bin; harmonics 2..6 are summed in
    # +/-2-bin windows so off-grid tones keep consistent leakage.
    win = np.hanning(n)
    spec = np.abs(np.fft.rfft(arr * win)) ** 2
    if spec.size > 1 and np.any(spec[1:] > 0.0):
        k0 = int(np.argmax(spec[1:])) + 1
        p_fund = _harmonic_power(spec, k0)
        p_harm = 0.0
        for h in range(2, 7):
            kh = h * k0
            if kh >= spec.size:
                break
            p_harm += _harmonic_power(spec, kh)
        p_total = float(np.sum(spec[1:]))
        if p_fund > 0.0:
            out.values["s11"] = p_harm / p_fund
        else:
            out.values["s11"] = 0.0
            out.flag("s11", "no_fundamental")
        residual = p_total - p_fund
        if residual > 0.0 and p_fund > 0.0:
            out.values["s12"] = p_fund / residual
        else:
            out.values["s12"] = 0.0
            out.flag("s12", "no_residual")
    else:
        out.values["s11"] = 0.0
        out.values["s12"] = 0.0
        out.flag("s11", "zero_signal")
        out.flag("s12", "zero_signal")
    return out


def mel_filterbank(fs: float, n_fft: int = MFCC_FRAME,
                   n_mels: int = MFCC_N_MELS) -> np.ndarray:
    """Triangular mel filterbank spanning 0..Nyquist, sampled at bin centers."""
    nyq = fs / 2.0
    mel_max = 2595.0 * np.log10(1.0 + nyq / 700.0)
    mel_pts = np.linspace(0.0, mel_max, n_mels + 2)
    edges_hz = 700.0 * (10.0 ** (mel_pts / 2595.0) - 1.0)
    bin_freqs = np.arange(n_fft // 2 + 1) * fs / n_fft
    bank = np.zeros((n_mels, bin_freqs.size))
    for m in range(n_mels):
        left, center, right = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        rising = (bin_freqs - left) / (center - left)
        falling = (right - bin_freqs) / (right - center)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def mfcc(x, fs: float, n_coeffs: int = 14) -> np.ndarray:
    """Mel-frequency cepstral coefficients averaged over frames.

    Frame 1024 / hop 512 / Hann window / 40 mel bands spanning 0..Nyquist /
    log floor 1e-10 / orthonormal DCT-II; the per-frame coefficient vectors
    are averaged into a single length-``n_coeffs`` vector.
    """
    arr = _as_float_array(x)
    n = arr.size
    if n < MFCC_FRAME:
        raise ValueError(
            f"signal shorter than one MFCC frame ({n} < {MFCC_FRAME})")
    n_frames = 1 + (n - MFCC_FRAME) // MFCC_HOP
    starts = np.arange(n_frames) * MFCC_HOP
    frames = np.lib.stride_tricks.as_strided(
        arr, shape=(n_frames, MFCC_FRAME),
        strides=(arr.strides[0] * MFCC_HOP, arr.strides[0])).copy()
    window = np.hanning(MFCC_FRAME)
    del starts
    spec = np.abs(np.fft.rfft(frames * window, axis=1)) ** 2
    bank = mel_filterbank(fs)
    energies = spec @ bank.T
    log_e = np.log(np.maximum(energies, MFCC_LOG_EPS))
    coeffs = dct(log_e, type=2, norm="ortho", axis=1)[:, :n_coeffs]
    return np.mean(coeffs, axis=0)
