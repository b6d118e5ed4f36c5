"""Digital time/frequency/phase correction of transmit and receive streams."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .resample import evaluate, sinc_interp
from .waveform import BasebandWaveform

SFO_THRESHOLD = 1e-3  # cycles


@dataclass(frozen=True)
class CompensationState:
    """Linear estimate of this node's clock minus the reference clock.

    The offset at local time t is ``T_off + df * (t - t_ref)``. ``phi0`` is the
    static LO phase calibration (node minus reference) and ``updated_at`` the
    epoch the estimate came from.
    """

    T_off: float = 0.0
    df: float = 0.0
    t_ref: float = 0.0
    f0_lo: float = 1e9
    phi0: float = 0.0
    updated_at: int = -1

    def __post_init__(self):
        vals = (self.T_off, self.df, self.t_ref, self.f0_lo, self.phi0)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("compensation fields must be finite")
        if abs(self.df) >= 1e-3:
            raise ValueError("|df| must be below 1e-3")

    def offset(self, t) -> np.ndarray:
        return self.T_off + self.df * (np.asarray(t, dtype=float) - self.t_ref)

    def phase(self, t) -> np.ndarray:
        return 2.0 * np.pi * self.f0_lo * self.offset(t) + self.phi0


def compensate_tx(w: BasebandWaveform, comp: CompensationState) -> BasebandWaveform:
    """Pre-distort a buffer so it leaves the node aligned with the reference.

    ``w`` is laid out on the reference timeline. The output at local time t
    is ``w(t - offset(t))`` with the LO error removed by ``exp(-j phase(t))``.
    Waveforms with a generator are re-evaluated exactly.
    """

    def src(t):
        t = np.asarray(t, dtype=float)
        return evaluate(w, t - comp.offset(t)) * np.exp(-1j * comp.phase(t))

    tt = w.times
    return BasebandWaveform(src(tt), w.fs, w.t_start, source=src)


def sfo_phase_error(df: float, tbp: float) -> float:
    """Worst-case phase error in cycles from leaving a pulse unresampled."""
    return abs(df) * tbp


def resample_arbitrary(w: BasebandWaveform, time_map: np.ndarray | Callable) -> tuple[BasebandWaveform, np.ndarray]:
    """Evaluate ``w`` at arbitrary increasing times with the shared sinc kernel.

    ``time_map`` is either the target times or a callable applied to
    ``w.times``. Returns the waveform on the original grid plus a mask of
    samples whose stencil ran off the input.
    """
    tt = time_map(w.times) if callable(time_map) else np.asarray(time_map, dtype=float)
    if tt.size > 1 and np.any(np.diff(tt) <= 0):
        raise ValueError("time_map must be strictly increasing")
    vals, edge = sinc_interp(w.samples, (tt - w.t_start) * w.fs)
    return BasebandWaveform(vals, w.fs, w.t_start), edge


def compensate_rx(w: BasebandWaveform, comp: CompensationState, tbp: float | None = None,
                  threshold: float = SFO_THRESHOLD, force_resample: bool = False) -> BasebandWaveform:
    """Undo this node's LO error on received samples.

    The sample-clock error is only corrected when the pulse's time-bandwidth
    product makes it matter (``sfo_phase_error > threshold``) or when forced.
    """
    y = w.samples * np.exp(1j * comp.phase(w.times))
    out = BasebandWaveform(y, w.fs, w.t_start)
    need = force_resample or (tbp is not None and sfo_phase_error(comp.df, tbp) > threshold)
    if need:
        # sample j was taken at local time times[j]; we want reference-time spacing
        out, _ = resample_arbitrary(out, lambda r: r + comp.df * (r - comp.t_ref))
    return out
