"""Baseband waveforms: pulsed two-tone (PTT) and CW synthesis, moments, and
transmit/receive sampling under a drifting timebase."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .resample import evaluate
from .timebase import TimebaseState

GUARD = 0.1


@dataclass
class BasebandWaveform:
    """Complex samples on a uniform grid: ``samples[i]`` sits at ``t_start + i / fs``.

    ``source`` optionally maps absolute time (same frame as ``t_start``) to the
    exact continuous-time value, so downstream delays and time maps can be
    evaluated without interpolation error.
    """

    samples: np.ndarray
    fs: float
    t_start: float = 0.0
    source: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.fs <= 0:
            raise ValueError("fs must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    def __len__(self):
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t_start + np.arange(self.samples.size) / self.fs

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2))


@dataclass(frozen=True)
class PttSpec:
    beta_ptt: float = 20e6
    tau_pd: float = 1.5e-6
    rise_fall: float = 50e-9
    fs: float = 200e6
    f_if: float = 0.0

    def __post_init__(self):
        if self.fs <= 0 or self.tau_pd <= 0:
            raise ValueError("fs and tau_pd must be positive")
        if self.beta_ptt < 0:
            raise ValueError("tone separation must be non-negative")
        if self.beta_ptt + 2 * abs(self.f_if) >= self.fs * (1.0 - GUARD):
            raise ValueError("tones exceed the usable band")
        if self.tau_pd * self.fs < 16:
            raise ValueError("pulse must span at least 16 samples")
        if not 0 <= self.rise_fall <= self.tau_pd / 2:
            raise ValueError("rise_fall must lie in [0, tau_pd/2]")

    @property
    def n_samples(self) -> int:
        return int(round(self.tau_pd * self.fs))

    def fingerprint(self) -> str:
        return (f"ptt-b{self.beta_ptt!r}-t{self.tau_pd!r}-r{self.rise_fall!r}"
                f"-fs{self.fs!r}-if{self.f_if!r}")


@dataclass
class WaveformMoments:
    """Energy-normalized moments; frequencies and times carry the 2*pi factor.

    ``ms_bandwidth`` is the mean of (2 pi f)^2 over the energy spectrum and
    ``mean_freq`` the mean of 2 pi f, so the PTT has ``sqrt(ms_bandwidth)``
    close to ``pi * beta``. Time moments use the waveform center as origin.
    """

    energy: float
    mean_freq: float
    ms_bandwidth: float
    mean_time: float
    ms_duration: float

    def __post_init__(self):
        if self.energy <= 0:
            raise ValueError("energy must be positive")


def taper(t: np.ndarray, tau_pd: float, rise_fall: float) -> np.ndarray:
    """Raised-cosine edged gate on [0, tau_pd]."""
    t = np.asarray(t, dtype=float)
    w = ((t >= 0) & (t <= tau_pd)).astype(float)
    if rise_fall > 0:
        up = (t >= 0) & (t < rise_fall)
        w[up] = 0.5 * (1.0 - np.cos(np.pi * t[up] / rise_fall))
        dn = (t > tau_pd - rise_fall) & (t <= tau_pd)
        w[dn] = 0.5 * (1.0 - np.cos(np.pi * (tau_pd - t[dn]) / rise_fall))
    return w


def ptt_value(spec: PttSpec, t) -> np.ndarray:
    """Continuous-time PTT with the pulse starting at t = 0.

    Both tones have zero phase at the pulse center, so with no IF the pulse is
    real and even about its center.
    """
    t = np.asarray(t, dtype=float)
    u = t - 0.5 * spec.tau_pd
    env = taper(t, spec.tau_pd, spec.rise_fall)
    val = env * 2.0 * np.cos(np.pi * spec.beta_ptt * u)
    if spec.f_if:
        val = val * np.exp(2j * np.pi * spec.f_if * u)
    return val.astype(complex)


def synth_ptt(spec: PttSpec, t0: float = 0.0) -> BasebandWaveform:
    """Sample a PTT pulse that starts at time ``t0``.

    Samples sit at the centers of the ``n_samples`` sample periods covering the
    pulse, which keeps the sampled pulse symmetric about its center.
    """
    n = spec.n_samples
    t_first = t0 + 0.5 / spec.fs
    tt = t_first + np.arange(n) / spec.fs
    return BasebandWaveform(ptt_value(spec, tt - t0), spec.fs, t_first,
                            source=lambda t: ptt_value(spec, np.asarray(t) - t0))


def synth_cw(duration: float, fs: float, freq: float = 0.0, t0: float = 0.0,
             rise_fall: float = 0.0) -> BasebandWaveform:
    """Unit-amplitude tone gated to ``[t0, t0 + duration]``."""

    def src(t):
        t = np.asarray(t, dtype=float)
        return taper(t - t0, duration, rise_fall) * np.exp(2j * np.pi * freq * (t - t0))

    n = int(round(duration * fs))
    t_first = t0 + 0.5 / fs
    tt = t_first + np.arange(n) / fs
    return BasebandWaveform(src(tt), fs, t_first, source=src)


def compute_moments(w: BasebandWaveform, nfft: int | None = None) -> WaveformMoments:
    x = w.samples
    es = np.sum(np.abs(x) ** 2) / w.fs
    if es <= 0:
        raise ValueError("waveform has zero energy")
    nfft = nfft or int(2 ** np.ceil(np.log2(8 * x.size)))
    spec = np.fft.fft(x, nfft)
    f = np.fft.fftfreq(nfft, 1.0 / w.fs)
    p = np.abs(spec) ** 2
    p = p / p.sum()
    om = 2.0 * np.pi * f
    tt = np.arange(x.size) / w.fs
    tc = tt - 0.5 * (tt[0] + tt[-1])
    q = np.abs(x) ** 2 / np.sum(np.abs(x) ** 2)
    return WaveformMoments(
        energy=float(es),
        mean_freq=float(np.sum(om * p)),
        ms_bandwidth=float(np.sum(om**2 * p)),
        mean_time=float(np.sum(2 * np.pi * tc * q)),
        ms_duration=float(np.sum((2 * np.pi * tc) ** 2 * q)),
    )


def transmit_model(w: BasebandWaveform, tb: TimebaseState, f0_lo: float) -> BasebandWaveform:
    """Baseband equivalent of what a node radiates, expressed in true time.

    ``w`` lives on the node's local clock. The output at true time t is
    ``w(T(t))`` times the LO error phasor ``exp(j(2 pi f0_lo e(t) + phi0))``.
    Output samples are laid on a true-time grid starting where the local
    buffer starts.
    """

    def src(t):
        t = np.asarray(t, dtype=float)
        e = tb.clock_error(t)
        return evaluate(w, t + e) * np.exp(1j * (2 * np.pi * f0_lo * e + tb.params.phi0))

    t_first = float(tb.to_true(w.t_start))
    tt = t_first + np.arange(len(w)) / w.fs
    return BasebandWaveform(src(tt), w.fs, t_first, source=src)


def receive_model(rf: BasebandWaveform, tb: TimebaseState, f0_lo: float,
                  t_start_local: float | None = None, n: int | None = None,
                  fs: float | None = None) -> BasebandWaveform:
    """Sample a true-time baseband signal with a node's ADC and LO.

    Sample ``j`` is taken when the local clock reads ``t_start_local + j/fs``
    and is mixed with the conjugate LO error phasor.
    """
    fs = fs or rf.fs
    n = len(rf) if n is None else n
    if t_start_local is None:
        t_start_local = float(rf.t_start + tb.clock_error(rf.t_start))
    local = t_start_local + np.arange(n) / fs
    t = tb.to_true(local)
    e = local - t
    y = evaluate(rf, t) * np.exp(-1j * (2 * np.pi * f0_lo * e + tb.params.phi0))
    return BasebandWaveform(y, fs, t_start_local)


def ambiguity_function(spec: PttSpec, t, fd) -> np.ndarray:
    """Closed-form ambiguity magnitude of the rectangular-gated PTT, unit peak.

    The overlap of the two gated copies has length ``tau_pd - |t|``; each of
    the four tone pairs contributes a sinc over that overlap.
    """
    t = np.asarray(t, dtype=float)
    fd = np.asarray(fd, dtype=float)
    tau, beta = spec.tau_pd, spec.beta_ptt
    overlap = np.clip(tau - np.abs(t), 0.0, None)
    inner = (2.0 * np.cos(np.pi * beta * t) * np.sinc(fd * overlap)
             + np.sinc((fd + beta) * overlap) + np.sinc((fd - beta) * overlap))
    peak = 2.0 + 2.0 * np.sinc(beta * tau)
    return np.abs(overlap * inner) / (tau * peak)


def ambiguity_numeric(w: BasebandWaveform, lags: np.ndarray, fd: float) -> np.ndarray:
    """Brute-force |sum s*(u - lag) s(u) exp(j 2 pi fd u)| on the sample grid, unit peak."""
    x = w.samples
    n = x.size
    u = np.arange(n) / w.fs
    shifted = x * np.exp(2j * np.pi * fd * u)
    out = np.empty(len(lags))
    for i, k in enumerate(lags):
        if k >= 0:
            out[i] = abs(np.vdot(x[: n - k], shifted[k:]))
        else:
            out[i] = abs(np.vdot(x[-k:], shifted[: n + k]))
    return out / np.sum(np.abs(x) ** 2)
