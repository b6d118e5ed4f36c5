"""Kaiser-windowed sinc interpolation shared by the channel and compensation code."""

from __future__ import annotations

import numpy as np

N_TAPS = 32
KAISER_BETA = 9.0
_HALF = N_TAPS // 2


def _kernel(offsets: np.ndarray) -> np.ndarray:
    u = np.clip(offsets / (_HALF + 0.5), -1.0, 1.0)
    win = np.i0(KAISER_BETA * np.sqrt(1.0 - u * u)) / np.i0(KAISER_BETA)
    return np.sinc(offsets) * win


def sinc_interp(samples: np.ndarray, positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate a sampled sequence at fractional sample positions.

    Parameters
    ----------
    samples : array_like
        Uniformly spaced input samples (real or complex).
    positions : array_like
        Fractional indices into ``samples`` at which to evaluate.

    Returns
    -------
    values : np.ndarray
        Interpolated values. Taps that fall outside the input count as zero.
    edge : np.ndarray of bool
        True where the 32-tap stencil was truncated by the ends of the input.
    """
    x = np.asarray(samples)
    pos = np.atleast_1d(np.asarray(positions, dtype=float))
    n = x.shape[0]
    base = np.floor(pos).astype(np.int64)
    taps = np.arange(-_HALF + 1, _HALF + 1)
    out = np.zeros(pos.shape, dtype=np.result_type(x.dtype, np.float64))
    edge = (base - _HALF + 1 < 0) | (base + _HALF > n - 1)
    # chunk to keep the (len, 32) stencil matrix small
    step = 16384
    for lo in range(0, pos.size, step):
        b = base[lo:lo + step, None] + taps[None, :]
        h = _kernel(pos[lo:lo + step, None] - b)
        inside = (b >= 0) & (b < n)
        vals = np.where(inside, x[np.clip(b, 0, n - 1)], 0.0)
        out[lo:lo + step] = np.sum(h * vals, axis=1)
    return out, edge


def evaluate(w, t: np.ndarray) -> np.ndarray:
    """Value of waveform ``w`` at absolute times ``t`` in its own time frame.

    Synthesized waveforms carry an exact generator and are re-evaluated
    directly; plain sample buffers go through the windowed-sinc kernel.
    """
    t = np.asarray(t, dtype=float)
    if w.source is not None:
        return w.source(t)
    vals, _ = sinc_interp(w.samples, (t - w.t_start) * w.fs)
    return vals
