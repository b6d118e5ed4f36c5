"""Per-node clock model: fractional frequency error, initial offset and phase noise.

Local time of a node is ``T(t) = t + e(t)`` where the clock error
``e(t) = int(delta_f) + t0_offset + nu(t) / (2 pi f0_sys)``. The LO shares the
same fractional error and noise (scaled to the LO frequency), plus a static
PLL phase ``phi0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

C_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class PhaseNoiseSpec:
    """White plus flicker phase noise on the system clock (rad at f0_sys).

    white_pm_level is a one-sided PSD in rad^2/Hz. flicker_pm_level is the
    1/f coefficient, i.e. the PSD value at a 1 Hz offset. The path is drawn on
    a uniform grid of ``grid_step`` seconds and linearly interpolated.
    """

    white_pm_level: float = 0.0
    flicker_pm_level: float = 0.0
    seed: int = 0
    grid_step: float = 10e-6

    def __post_init__(self):
        if self.white_pm_level < 0 or self.flicker_pm_level < 0:
            raise ValueError("phase-noise levels must be non-negative")
        if self.grid_step <= 0:
            raise ValueError("grid_step must be positive")

    @property
    def silent(self) -> bool:
        return self.white_pm_level == 0 and self.flicker_pm_level == 0


@dataclass(frozen=True)
class TimebaseParams:
    f0_osc: float = 10e6
    delta_f: float = 0.0
    t0_offset: float = 0.0
    phase_noise: PhaseNoiseSpec = field(default_factory=PhaseNoiseSpec)
    kappa_sys: float = 20.0
    kappa_lo: float = 100.0
    phi0: float = 0.0
    # optional piecewise-linear (time, delta_f) knots; overrides delta_f when set
    drift_schedule: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.f0_osc <= 0:
            raise ValueError("f0_osc must be positive")
        if abs(self.delta_f) >= 1e-3:
            raise ValueError("|delta_f| must be below 1e-3")
        if self.kappa_sys <= 0 or self.kappa_lo <= 0:
            raise ValueError("PLL ratios must be positive")
        if self.drift_schedule is not None:
            ts = [k[0] for k in self.drift_schedule]
            if len(ts) < 2 or np.any(np.diff(ts) <= 0):
                raise ValueError("drift_schedule needs >= 2 increasing knots")
            if max(abs(k[1]) for k in self.drift_schedule) >= 1e-3:
                raise ValueError("|delta_f| must be below 1e-3")

    @property
    def f0_sys(self) -> float:
        return self.f0_osc * self.kappa_sys


class _NoisePath:
    """Lazily generated phase-noise grid, filled block by block.

    White noise is independent per block. The flicker part is a sum of
    first-order Gauss-Markov processes with log-spaced corners (two per
    decade), which needs the filter state of the previous block, so blocks
    are always generated in order from zero.
    """

    BLOCK = 8192
    PER_DECADE = 2

    def __init__(self, spec: PhaseNoiseSpec):
        self.spec = spec
        self.grid = np.zeros(0)
        dt = spec.grid_step
        self.white_sigma = np.sqrt(spec.white_pm_level / (2.0 * dt))
        self._ar = []
        if spec.flicker_pm_level > 0:
            f_hi = 1.0 / (2.0 * dt)
            f_lo = 1e-3
            ratio = 10.0 ** (1.0 / self.PER_DECADE)
            n = int(np.ceil(np.log(f_hi / f_lo) / np.log(ratio)))
            var = spec.flicker_pm_level * np.log(ratio)
            for i in range(n + 1):
                fc = f_lo * ratio**i
                a = np.exp(-2.0 * np.pi * fc * dt)
                self._ar.append((a, np.sqrt(var)))
        self._state = None

    def _grow(self, n_blocks: int):
        spec = self.spec
        new = []
        while self.grid.size // self.BLOCK + len(new) < n_blocks:
            b = self.grid.size // self.BLOCK + len(new)
            rng = np.random.default_rng([spec.seed, b])
            blk = self.white_sigma * rng.standard_normal(self.BLOCK)
            if self._ar:
                if self._state is None:
                    self._state = [sig * rng.standard_normal() for _, sig in self._ar]
                for j, (a, sig) in enumerate(self._ar):
                    drive = sig * np.sqrt(1.0 - a * a) * rng.standard_normal(self.BLOCK)
                    y, _ = lfilter([1.0], [1.0, -a], drive, zi=[a * self._state[j]])
                    blk = blk + y
                    self._state[j] = y[-1]
            new.append(blk)
        if new:
            self.grid = np.concatenate([self.grid, *new])

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.spec.silent:
            return np.zeros_like(t)
        if np.any(t < 0):
            raise ValueError("phase noise is defined for t >= 0 only")
        x = t / self.spec.grid_step
        i0 = np.floor(x).astype(np.int64)
        frac = x - i0
        self._grow(int(i0.max()) // self.BLOCK + 2 if i0.size else 0)
        v0 = self.grid[i0]
        return v0 + frac * (self.grid[i0 + 1] - v0)


class TimebaseState:
    """Ground-truth clock of one node. Deterministic for a given seed."""

    def __init__(self, params: TimebaseParams):
        self.params = params
        self.noise_cache = _NoisePath(params.phase_noise)

    def phase_noise(self, t) -> np.ndarray:
        """Phase noise nu(t) in radians at the system clock frequency."""
        return self.noise_cache(t)

    def freq_error(self, t) -> np.ndarray:
        p = self.params
        t = np.asarray(t, dtype=float)
        if p.drift_schedule is None:
            return np.full_like(t, p.delta_f)
        kt, kv = np.array(p.drift_schedule).T
        return np.interp(t, kt, kv)

    def _drift(self, t: np.ndarray) -> np.ndarray:
        p = self.params
        if p.drift_schedule is None:
            return p.delta_f * t
        return self._sched_integral(t) - self._sched_integral(np.zeros(1))[0]

    def _sched_integral(self, t: np.ndarray) -> np.ndarray:
        # integral of the schedule from its first knot, held flat outside the knots
        kt, kv = np.array(self.params.drift_schedule).T
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (kv[1:] + kv[:-1]) * np.diff(kt))])
        tc = np.clip(t, kt[0], kt[-1])
        j = np.clip(np.searchsorted(kt, tc, side="right") - 1, 0, len(kt) - 2)
        inner = cum[j] + 0.5 * (kv[j] + np.interp(tc, kt, kv)) * (tc - kt[j])
        return inner + kv[0] * np.minimum(t - kt[0], 0.0) + kv[-1] * np.maximum(t - kt[-1], 0.0)

    def clock_error(self, t) -> np.ndarray:
        """Local minus true time, e(t)."""
        t = np.asarray(t, dtype=float)
        p = self.params
        err = self._drift(t) + p.t0_offset
        if not p.phase_noise.silent:
            err = err + self.phase_noise(t) / (2.0 * np.pi * p.f0_sys)
        return err

    def to_true(self, local) -> np.ndarray:
        """Invert the clock: true time at which the local clock reads ``local``."""
        local = np.asarray(local, dtype=float)
        t = local - self.params.t0_offset
        for _ in range(6):
            t = local - self.clock_error(t)
        return t


def clock_time(tb: TimebaseState, t) -> np.ndarray:
    """Local clock reading at true time ``t``."""
    t = np.asarray(t, dtype=float)
    return t + tb.clock_error(t)


def internode_time_offset(a: TimebaseState, b: TimebaseState, t) -> np.ndarray:
    """Clock of ``b`` minus clock of ``a`` at true time ``t``."""
    return b.clock_error(t) - a.clock_error(t)


def lo_phase(tb: TimebaseState, t, f0_lo: float) -> np.ndarray:
    """LO phase error of one node relative to an ideal LO at ``f0_lo``."""
    return 2.0 * np.pi * f0_lo * tb.clock_error(t) + tb.params.phi0


def internode_lo_phase(a: TimebaseState, b: TimebaseState, t, f0_lo: float) -> np.ndarray:
    return lo_phase(b, t, f0_lo) - lo_phase(a, t, f0_lo)


def apparent_doppler(delta_f_n: float, delta_f_m: float, v_r: float, f0_rf: float) -> float:
    """Frequency shift seen by node m for a carrier sent by node n.

    ``v_r`` is the closing speed (positive when the nodes approach).
    """
    beta = v_r / C_LIGHT
    # ratio minus one, written without the cancelling "- 1"
    return f0_rf * (delta_f_n - delta_f_m + beta + delta_f_n * beta) / (1.0 + delta_f_m)


@dataclass(frozen=True)
class MotionProfile:
    """Internode range driven by piecewise-constant radial velocity.

    The range reflects off ``bounds`` like a linear actuator reversing at the
    ends of its track.
    """

    r0: float = 1.0
    velocity_steps: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    bounds: tuple[float, float] | None = None

    def __post_init__(self):
        if self.bounds is not None:
            lo, hi = self.bounds
            if not lo < hi or not lo <= self.r0 <= hi:
                raise ValueError("r0 must lie inside bounds")
        starts = [s[0] for s in self.velocity_steps]
        if np.any(np.diff(starts) <= 0):
            raise ValueError("velocity steps must have increasing start times")

    def _unfolded(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        starts = np.array([s[0] for s in self.velocity_steps])
        vels = np.array([s[1] for s in self.velocity_steps])
        x = np.full_like(t, self.r0)
        v = np.zeros_like(t)
        for i, (s, vel) in enumerate(zip(starts, vels)):
            end = starts[i + 1] if i + 1 < len(starts) else np.inf
            dur = np.clip(t, s, end) - s
            x = x + vel * np.maximum(dur, 0.0)
            v = np.where((t >= s) & (t < end), vel, v)
        return x, v

    def range_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        x, _ = self._unfolded(t)
        if self.bounds is None:
            return x
        lo, hi = self.bounds
        span = hi - lo
        y = np.mod(x - lo, 2.0 * span)
        return lo + np.where(y <= span, y, 2.0 * span - y)

    def range_rate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        x, v = self._unfolded(t)
        if self.bounds is None:
            return v
        lo, hi = self.bounds
        span = hi - lo
        y = np.mod(x - lo, 2.0 * span)
        return np.where(y <= span, v, -v)
