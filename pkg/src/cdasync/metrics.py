"""Virtual-oscilloscope measurements of a two-channel beamforming capture."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.signal import hilbert

from .toa import qls_fraction

MIN_PHASE_SAMPLES = 8
PHASE_THRESHOLD = 0.9


class MetricError(ValueError):
    pass


@dataclass
class ScopeCapture:
    """Two channels on a common ideal timebase.

    Real channels are converted to analytic form where a phase is needed.
    The first ``n_noise`` samples are assumed pulse-free and feed the SNR.
    """

    ch0: np.ndarray
    ch1: np.ndarray
    fs_scope: float = 20e9
    t_start: float = 0.0
    n_noise: int = 0

    def __post_init__(self):
        self.ch0 = np.asarray(self.ch0)
        self.ch1 = np.asarray(self.ch1)
        if self.ch0.shape != self.ch1.shape:
            raise ValueError("channels must have equal length")
        if self.fs_scope <= 0:
            raise ValueError("fs_scope must be positive")


@dataclass
class PulseMetrics:
    coherent_gain: float = float("nan")
    dt: float = float("nan")
    dphi: float = float("nan")
    dfreq: float = float("nan")
    snr: float = float("nan")


def _analytic(x: np.ndarray) -> np.ndarray:
    return x if np.iscomplexobj(x) else hilbert(x)


def coherent_gain(cap: ScopeCapture) -> float:
    """Summed-power ratio over the samples after the leading noise block."""
    s0, s1 = cap.ch0[cap.n_noise:], cap.ch1[cap.n_noise:]
    den = 2.0 * (np.sum(np.abs(s0) ** 2) + np.sum(np.abs(s1) ** 2))
    if den == 0:
        raise MetricError("empty capture")
    return float(np.sum(np.abs(s0 + s1) ** 2) / den)


def interarrival_time(cap: ScopeCapture, floor_ratio: float = 4.0) -> float:
    """Arrival of ch1 minus arrival of ch0 from the cross-correlation peak."""
    a0, a1 = _analytic(cap.ch0), _analytic(cap.ch1)
    n = a0.size
    nfft = 1 << int(np.ceil(np.log2(2 * n - 1)))
    c = np.fft.ifft(np.fft.fft(a1, nfft) * np.conj(np.fft.fft(a0, nfft)))
    xc = np.abs(np.concatenate([c[nfft - (n - 1):], c[:n]]))
    i = int(np.argmax(xc))
    if xc[i] <= floor_ratio * np.median(xc) or not 0 < i < xc.size - 1:
        raise MetricError("no correlation peak above the noise floor")
    frac, _ = qls_fraction(xc[i - 1], xc[i], xc[i + 1])
    return (i - (n - 1) + frac) / cap.fs_scope


def interarrival_phase(cap: ScopeCapture, threshold: float = PHASE_THRESHOLD) -> float:
    """Phase of ch1 relative to ch0, averaged as unit phasors over strong samples."""
    a0, a1 = _analytic(cap.ch0), _analytic(cap.ch1)
    m0, m1 = np.abs(a0), np.abs(a1)
    sel = (m0 > threshold * m0.max()) & (m1 > threshold * m1.max())
    if np.count_nonzero(sel) < MIN_PHASE_SAMPLES:
        raise MetricError("fewer than 8 samples above the magnitude threshold")
    z = a1[sel] * np.conj(a0[sel])
    return float(np.angle(np.mean(z / np.abs(z))))


def kay_weights(n: int) -> np.ndarray:
    t = np.arange(n - 1)
    return 1.5 * n / (n * n - 1.0) * (1.0 - ((t - (n / 2.0 - 1.0)) / (n / 2.0)) ** 2)


def kay_frequency(z: np.ndarray, fs: float) -> float:
    """Weighted phase-increment frequency estimate of a single complex tone."""
    z = np.asarray(z)
    if z.size < 3:
        raise MetricError("need at least 3 samples")
    inc = np.angle(z[1:] * np.conj(z[:-1]))
    return float(fs / (2.0 * np.pi) * np.sum(kay_weights(z.size) * inc))


def kay_crlb(n: int, snr_linear: float, fs: float) -> float:
    """Frequency variance bound (Hz^2) for a complex tone in white noise."""
    return 6.0 * fs * fs / ((2.0 * np.pi) ** 2 * snr_linear * n * (n * n - 1.0))


def freq_difference_kay(cap: ScopeCapture, trim: float = 1e-6) -> float:
    """Frequency of ch0 minus ch1 (Hz) from a CW capture, ends trimmed."""
    k = int(round(trim * cap.fs_scope))
    a0, a1 = _analytic(cap.ch0), _analytic(cap.ch1)
    if a0.size - 2 * k < 16:
        raise MetricError("capture too short after trimming")
    z = (a0 * np.conj(a1))[k:a0.size - k]
    f = kay_frequency(z, cap.fs_scope)
    # increments pinned near +-pi mean the difference tone aliases
    if abs(f) >= 0.45 * cap.fs_scope:
        raise MetricError("frequency difference wraps around")
    return f


def capture_snr(cap: ScopeCapture) -> float:
    """Per-sample SNR (dB) of the weaker channel, using the leading noise samples."""
    if cap.n_noise < 8:
        return float("nan")
    out = []
    for ch in (cap.ch0, cap.ch1):
        pn = np.mean(np.abs(ch[: cap.n_noise]) ** 2)
        body = np.abs(ch[cap.n_noise:]) ** 2
        strong = body[body > 0.25 * body.max()]
        ps = np.mean(strong) - pn
        out.append(10 * np.log10(ps / pn) if pn > 0 and ps > 0 else np.inf)
    return float(min(out))


def measure_pulse(cap: ScopeCapture) -> PulseMetrics:
    return PulseMetrics(coherent_gain=coherent_gain(cap), dt=interarrival_time(cap),
                        dphi=interarrival_phase(cap), snr=capture_snr(cap))


class TrimmedStats(NamedTuple):
    mean: float
    std: float
    n_removed: int

    @property
    def degenerate(self) -> bool:
        return not np.isfinite(self.mean)


def trimmed_stats(xs, x_sigma: float) -> TrimmedStats:
    """Drop points beyond ``x_sigma`` standard deviations until nothing changes.

    Non-finite entries are discarded first and count as removed.
    """
    x = np.asarray(xs, dtype=float).ravel()
    n0 = x.size
    x = x[np.isfinite(x)]
    while x.size >= 2:
        mu, sd = x.mean(), x.std(ddof=1)
        keep = np.abs(x - mu) <= x_sigma * sd
        if keep.all():
            break
        x = x[keep]
    if x.size == 0:
        return TrimmedStats(float("nan"), float("nan"), n0)
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return TrimmedStats(float(x.mean()), sd, n0 - x.size)
