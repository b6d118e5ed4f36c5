"""Fast-time TOA pipeline: matched filter, three-point parabola refinement,
lookup-table bias removal and SNR estimation."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .waveform import BasebandWaveform, PttSpec, ptt_value, synth_ptt

SNR_CEILING_DB = 60.0
MIN_SNR_DB = -3.0
LUT_FORMAT = 1


class FrameCaptureError(RuntimeError):
    """The pulse is not fully inside the receive frame."""


@dataclass
class ToaEstimate:
    tau_hat: float
    snr_db: float
    peak_index: int
    refined_correction: float
    degenerate: bool = False
    low_snr: bool = False
    snr_clamped: bool = False


@dataclass
class QlsLut:
    """QLS residual bias (seconds) versus true fractional delay (samples)."""

    grid: np.ndarray
    bias: np.ndarray
    fs: float
    fingerprint: str

    def correction(self, frac: np.ndarray | float) -> np.ndarray:
        """Correction (s) to add for a measured QLS fraction in samples."""
        g, b = self.grid, self.bias
        est = g + b * self.fs
        # one period of wrap on each side so fractions near +-0.5 interpolate
        est_x = np.concatenate([est - 1.0, est, est + 1.0])
        corr = np.concatenate([-b, -b, -b])
        return np.interp(frac, est_x, corr)


def matched_filter(rx: BasebandWaveform | np.ndarray, ref: BasebandWaveform | np.ndarray) -> np.ndarray:
    """|cross-correlation| of rx against ref, all linear lags.

    Index ``i`` holds lag ``i - (len(ref) - 1)``, where lag k means rx[j + k]
    lines up with ref[j].
    """
    x = rx.samples if isinstance(rx, BasebandWaveform) else np.asarray(rx)
    h = ref.samples if isinstance(ref, BasebandWaveform) else np.asarray(ref)
    if x.size == 0 or h.size == 0:
        raise ValueError("empty input")
    if h.size > x.size:
        raise ValueError("reference longer than received frame")
    n_out = x.size + h.size - 1
    nfft = 1 << int(np.ceil(np.log2(n_out)))
    c = np.fft.ifft(np.fft.fft(x, nfft) * np.conj(np.fft.fft(h, nfft)))
    return np.abs(np.concatenate([c[nfft - (h.size - 1):], c[: x.size]]))


def qls_fraction(y_m1: float, y0: float, y_p1: float) -> tuple[float, bool]:
    """Vertex of the parabola through three equally spaced points, in samples."""
    den = y_m1 - 2.0 * y0 + y_p1
    if den == 0.0:
        return 0.0, True
    return 0.5 * (y_m1 - y_p1) / den, False


def qls_refine(mf: np.ndarray, i_max: int, fs: float) -> tuple[float, bool]:
    """Sub-sample peak offset in seconds, plus a degenerate-peak flag."""
    if not 0 < i_max < len(mf) - 1:
        raise ValueError("peak must have a neighbour on each side")
    frac, degenerate = qls_fraction(mf[i_max - 1], mf[i_max], mf[i_max + 1])
    return frac / fs, degenerate


@lru_cache(maxsize=32)
def ptt_template(spec: PttSpec) -> BasebandWaveform:
    return synth_ptt(spec)


def _qls_residual(spec: PttSpec, fracs: np.ndarray) -> np.ndarray:
    """Noise-free QLS error (s) for pulses delayed by whole + fractional samples."""
    ref = ptt_template(spec)
    n = len(ref)
    fs = spec.fs
    margin = n // 2 + 8
    out = np.empty(len(fracs))
    tt = np.arange(n + 2 * margin) / fs
    for i, d in enumerate(fracs):
        lag = margin + d
        t0 = lag / fs - ref.t_start
        rx = ptt_value(spec, tt - t0)
        mf = matched_filter(rx, ref.samples)
        k = int(np.argmax(mf))
        frac, _ = qls_fraction(mf[k - 1], mf[k], mf[k + 1])
        out[i] = (k - (n - 1) + frac - lag) / fs
    return out


def build_qls_lut(spec: PttSpec, n_grid: int = 1024) -> QlsLut:
    """Tabulate QLS bias over one sample period of true fractional delay."""
    if n_grid < 64:
        raise ValueError("n_grid must be at least 64")
    grid = np.arange(n_grid) / n_grid - 0.5
    bias = _qls_residual(spec, grid)
    bias[n_grid // 2] = 0.0
    return QlsLut(grid=grid, bias=bias, fs=spec.fs, fingerprint=spec.fingerprint())


@lru_cache(maxsize=32)
def cached_lut(spec: PttSpec, n_grid: int = 1024) -> QlsLut:
    return build_qls_lut(spec, n_grid)


def save_lut(lut: QlsLut, path: str | Path) -> None:
    np.savez(path, format=np.array(LUT_FORMAT), grid=lut.grid, bias=lut.bias,
             fs=np.array(lut.fs), fingerprint=np.array(lut.fingerprint))


def load_lut(path: str | Path, spec: PttSpec | None = None) -> QlsLut:
    with np.load(path, allow_pickle=False) as z:
        if int(z["format"]) != LUT_FORMAT:
            raise ValueError("unsupported LUT file version")
        lut = QlsLut(grid=z["grid"].copy(), bias=z["bias"].copy(), fs=float(z["fs"]),
                     fingerprint=str(z["fingerprint"]))
    if spec is not None and lut.fingerprint != spec.fingerprint():
        raise ValueError("LUT was built for a different waveform")
    return lut


def estimate_snr(mf: np.ndarray, noise_window: np.ndarray, ref_energy: float = 1.0,
                 pulse_len: int = 1) -> tuple[float, bool]:
    """Per-sample SNR in dB from the matched-filter peak and a noise-only window.

    The peak of |xcorr| squared over the reference energy is the received
    pulse energy; dividing by ``pulse_len`` gives mean signal power per
    sample. Returns (dB, clamped) where clamped flags the 60 dB ceiling.
    """
    noise = np.asarray(noise_window)
    if noise.size == 0:
        raise ValueError("empty noise window")
    p_sig = float(np.max(mf)) ** 2 / ref_energy / pulse_len
    p_noise = float(np.mean(np.abs(noise) ** 2))
    if p_noise <= 0 or p_sig / p_noise >= 10 ** (SNR_CEILING_DB / 10):
        return SNR_CEILING_DB, True
    return 10.0 * np.log10(p_sig / p_noise), False


def estimate_toa(rx: BasebandWaveform, spec: PttSpec | BasebandWaveform,
                 lut: QlsLut | None = None, guard: int = 8) -> ToaEstimate:
    """Arrival time of the reference's time origin, in the rx frame's clock.

    For a PTT spec the origin is the pulse start. Raises FrameCaptureError
    when the peak lag puts any part of the pulse outside the frame.
    """
    ref = ptt_template(spec) if isinstance(spec, PttSpec) else spec
    n_ref = len(ref)
    mf = matched_filter(rx, ref)
    i_max = int(np.argmax(mf))
    lag_int = i_max - (n_ref - 1)
    if lag_int < 1 or lag_int + n_ref > len(rx) - 1:
        raise FrameCaptureError(f"peak lag {lag_int} outside frame of {len(rx)}")
    frac, degenerate = qls_fraction(mf[i_max - 1], mf[i_max], mf[i_max + 1])
    corr = 0.0
    if lut is not None:
        corr = float(lut.correction(frac))
    tau = rx.t_start + (lag_int + frac) / rx.fs + corr - ref.t_start

    after = rx.samples[lag_int + n_ref + guard:]
    before = rx.samples[: max(lag_int - guard, 0)]
    noise = after if after.size >= 32 else np.concatenate([before, after])
    if noise.size == 0:
        raise FrameCaptureError("no noise samples around the pulse")
    snr, clamped = estimate_snr(mf, noise, ref.energy, n_ref)
    return ToaEstimate(tau_hat=tau, snr_db=snr, peak_index=i_max,
                       refined_correction=frac / rx.fs + corr, degenerate=degenerate,
                       low_snr=snr < MIN_SNR_DB, snr_clamped=clamped)


def monte_carlo_toa(spec: PttSpec, snr_db: float, n_trials: int, rng: np.random.Generator,
                    lut: QlsLut | None = None, margin: int = 64) -> np.ndarray:
    """One-way TOA errors (s) for pulses at random sub-sample delays in white noise.

    ``snr_db`` is the per-sample SNR over the pulse, the same quantity
    ``estimate_snr`` reports.
    """
    ref = ptt_template(spec)
    n = len(ref)
    fs = spec.fs
    n_frame = n + 2 * margin
    tt = np.arange(n_frame) / fs
    p_sig = np.mean(np.abs(ref.samples) ** 2)
    sigma = np.sqrt(p_sig / 10 ** (snr_db / 10) / 2)
    errs = np.empty(n_trials)
    for i in range(n_trials):
        tau = (margin + rng.uniform(-0.5, 0.5)) / fs
        x = ptt_value(spec, tt - tau)
        x = x + sigma * (rng.standard_normal(n_frame) + 1j * rng.standard_normal(n_frame))
        est = estimate_toa(BasebandWaveform(x, fs, 0.0), spec, lut)
        errs[i] = est.tau_hat - tau
    return errs
