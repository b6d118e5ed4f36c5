"""Reciprocal multipath channel with Doppler and additive white noise."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .resample import evaluate
from .timebase import C_LIGHT, MotionProfile
from .waveform import BasebandWaveform

# synthetic reflector set standing in for the unmeasured lab multipath
SYNTHETIC_MULTIPATH = ((5e-9, -6.0), (12e-9, -10.0))


@dataclass(frozen=True)
class ChannelPath:
    delay: float
    gain: complex = 1.0

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError("path delay must be non-negative")
        if abs(self.gain) > 1.0 + 1e-12:
            raise ValueError("|gain| must not exceed 1")


@dataclass(frozen=True)
class ChannelState:
    """Path set plus noise level.

    ``noise_psd`` is the complex-baseband noise density, so a receiver
    sampling at ``fs`` sees per-sample noise variance ``noise_psd * fs``.
    With ``motion`` set, every path delay moves with the range change
    ``(R(t) - motion.r0) / c``. ``reverse_paths`` only matters when
    ``reciprocal`` is False.
    """

    paths: tuple[ChannelPath, ...] = (ChannelPath(1.0 / C_LIGHT),)
    noise_psd: float = 0.0
    reciprocal: bool = True
    motion: MotionProfile | None = None
    f_rf: float = 2.1e9
    reverse_paths: tuple[ChannelPath, ...] | None = field(default=None)

    def __post_init__(self):
        if len(self.paths) == 0:
            raise ValueError("channel needs at least one path")
        if self.noise_psd < 0:
            raise ValueError("noise_psd must be non-negative")


def los_channel(range_m: float, **kw) -> ChannelState:
    return ChannelState(paths=(ChannelPath(range_m / C_LIGHT),), **kw)


def with_multipath(ch: ChannelState, extra=SYNTHETIC_MULTIPATH) -> ChannelState:
    """Add reflections given as (excess delay s, relative power dB) to the LOS path."""
    los = ch.paths[0]
    more = tuple(ChannelPath(los.delay + d, los.gain * 10 ** (p / 20.0)) for d, p in extra)
    return replace(ch, paths=ch.paths + more)


def frozen_paths(ch: ChannelState, t_epoch: float, direction: str = "nm"):
    """Per-path (delay at t_epoch, delay rate, gain) for one epoch."""
    paths = ch.paths
    if not ch.reciprocal and direction == "mn" and ch.reverse_paths is not None:
        paths = ch.reverse_paths
    shift, rate = 0.0, 0.0
    if ch.motion is not None:
        shift = float(ch.motion.range_at(t_epoch) - ch.motion.r0) / C_LIGHT
        rate = float(ch.motion.range_rate(t_epoch)) / C_LIGHT
    return [(p.delay + shift, rate, p.gain) for p in paths]


def propagate(w: BasebandWaveform, ch: ChannelState, t_epoch: float, direction: str = "nm",
              rng: np.random.Generator | None = None, n_out: int | None = None) -> BasebandWaveform:
    """Pass a true-time baseband waveform through the channel.

    Envelopes use the delays frozen at ``t_epoch``; each path also gets the
    carrier phase ``-2 pi f_rf tau(t)`` with tau advancing at the current range
    rate, which is how Doppler enters. The returned ``source`` is the
    noise-free field; noise (when ``rng`` is given) is added to ``samples``
    only.
    """
    frozen = frozen_paths(ch, t_epoch, direction)
    f_rf = ch.f_rf

    def src(t):
        t = np.asarray(t, dtype=float)
        acc = np.zeros(t.shape, dtype=complex)
        for d0, rate, g in frozen:
            tau = d0 + rate * (t - t_epoch)
            acc += g * np.exp(-2j * np.pi * f_rf * tau) * evaluate(w, t - d0)
        return acc

    if n_out is None:
        n_out = len(w) + int(np.ceil(max(d for d, _, _ in frozen) * w.fs)) + 1
    tt = w.t_start + np.arange(n_out) / w.fs
    out = BasebandWaveform(src(tt), w.fs, w.t_start, source=src)
    if rng is not None:
        out = add_noise(out, ch.noise_psd, rng)
        out.source = src
    return out


def add_noise(w: BasebandWaveform, noise_psd: float, rng: np.random.Generator) -> BasebandWaveform:
    sigma2 = noise_psd * w.fs
    n = np.sqrt(sigma2 / 2.0) * (rng.standard_normal(len(w)) + 1j * rng.standard_normal(len(w)))
    return BasebandWaveform(w.samples + n, w.fs, w.t_start)


def noise_psd_for_snr(template: BasebandWaveform, snr_db: float, gain: float = 1.0) -> float:
    """Noise density giving per-sample SNR ``snr_db`` over the received pulse.

    Signal power is the mean |sample|^2 across the pulse, scaled by the LOS
    power gain, which is the quantity the TOA-side SNR estimator measures.
    """
    p_sig = abs(gain) ** 2 * np.mean(np.abs(template.samples) ** 2)
    return float(p_sig / 10 ** (snr_db / 10.0) / template.fs)
