"""Two-way time transfer: TDMA exchange, offset/TOF/frequency estimators,
staged startup refinement and the associated lower bounds."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelState, frozen_paths, propagate
from .timebase import C_LIGHT, TimebaseState
from .toa import FrameCaptureError, cached_lut, estimate_toa, ptt_template
from .waveform import BasebandWaveform, PttSpec, WaveformMoments, ptt_value, receive_model, transmit_model

SLOT_GUARD = 0.25e-6


@dataclass(frozen=True)
class RefinementStage:
    fs: float
    beta_ptt: float
    tdma_window: float
    tau_pd: float
    rise_fall: float

    def ptt(self) -> PttSpec:
        return PttSpec(beta_ptt=self.beta_ptt, tau_pd=self.tau_pd, rise_fall=self.rise_fall, fs=self.fs)


# Startup ladder. Pulse lengths for the 10 MSa/s rungs are our choice (100 samples).
REFINEMENT_STAGES = (
    RefinementStage(10e6, 1e6, 10e-3, 10e-6, 0.5e-6),
    RefinementStage(10e6, 1e6, 1.11e-3, 10e-6, 0.5e-6),
    RefinementStage(200e6, 20e6, 122.47e-6, 1.5e-6, 50e-9),
    RefinementStage(200e6, 20e6, 13.55e-6, 1.5e-6, 50e-9),
    RefinementStage(200e6, 20e6, 1.5e-6, 1.5e-6, 50e-9),
)


@dataclass
class SyncSchedule:
    """TDMA layout of one epoch.

    ``window`` is the capture half-width around each expected arrival and
    ``tau_tdma`` the spacing between consecutive slots.
    """

    ptt: PttSpec
    window: float
    tau_tdma: float
    slot_order: tuple[int, ...]
    tau_twtt_nominal: float = 44e-3
    sync_idx: int = len(REFINEMENT_STAGES) - 1

    def __post_init__(self):
        if self.tau_tdma < self.ptt.tau_pd + 2 * self.window:
            raise ValueError("slots would overlap: tau_tdma < tau_pd + 2*window")

    @property
    def tau_e(self) -> float:
        return self.tau_tdma * len(self.slot_order)


def make_schedule(stage: RefinementStage | int, n_nodes: int, ptt: PttSpec | None = None,
                  tau_e: float | None = None, tau_twtt_nominal: float = 44e-3) -> SyncSchedule:
    idx = stage if isinstance(stage, int) else REFINEMENT_STAGES.index(stage)
    st = REFINEMENT_STAGES[idx]
    spec = ptt if (ptt is not None and idx == len(REFINEMENT_STAGES) - 1) else st.ptt()
    slot = spec.tau_pd + 2 * st.tdma_window + SLOT_GUARD
    if tau_e is not None:
        slot = max(slot, tau_e / n_nodes)
    return SyncSchedule(ptt=spec, window=st.tdma_window, tau_tdma=slot,
                        slot_order=tuple(range(n_nodes)), tau_twtt_nominal=tau_twtt_nominal,
                        sync_idx=idx)


@dataclass
class TwttExchange:
    """Apparent TOFs of one reference/secondary pair in one epoch.

    Timestamps refer to pulse centers on each node's own clock. ``truth``
    carries simulator-only values (true transmit times) for verification.
    """

    k: int
    t_tx_n: float
    t_tx_m: float
    tof_bar_nm: float
    tof_bar_mn: float
    snrs: tuple[float, float]
    truth: dict = field(default_factory=dict, repr=False)


@dataclass
class TwttEstimate:
    T_hat: float
    tof_hat: float
    range_hat: float
    df_hat: float = float("nan")
    valid: bool = True


@dataclass
class NodeRadio:
    """One radio as the sync loop sees it.

    ``T_hat``/``df_hat``/``t_ref`` hold the current estimate of this node's
    clock minus the reference clock, as a linear function of reference time.
    """

    idx: int
    tb: TimebaseState
    T_hat: float = 0.0
    df_hat: float = 0.0
    t_ref: float = 0.0
    tof_prior: float = 0.0

    def predicted_offset(self, t_ref_local: float) -> float:
        return self.T_hat + self.df_hat * (t_ref_local - self.t_ref)


class EpochMissed(RuntimeError):
    pass


def _edge(t: float, fs: float) -> float:
    return np.round(t * fs) / fs


def _one_way(tx: NodeRadio, rx: NodeRadio, t_center_local: float, expect_center_local: float,
             sched: SyncSchedule, ch: ChannelState, f0: float, t_epoch: float, direction: str,
             rng: np.random.Generator | None, lut):
    spec = sched.ptt
    fs = spec.fs
    start_local = t_center_local - 0.5 * spec.tau_pd
    buf = BasebandWaveform(ptt_value(spec, np.zeros(1)), fs, start_local,
                           source=lambda u: ptt_value(spec, np.asarray(u) - start_local))
    field_tx = transmit_model(buf, tx.tb, f0)
    frozen = frozen_paths(ch, t_epoch, direction)
    field_rx = propagate(field_tx, ch, t_epoch, direction, n_out=1)
    frame0 = _edge(expect_center_local - 0.5 * spec.tau_pd - sched.window, fs)
    n = int(np.ceil((spec.tau_pd + 2 * sched.window) * fs)) + 1
    rxw = receive_model(field_rx, rx.tb, f0, frame0, n, fs)
    if rng is not None and ch.noise_psd > 0:
        s2 = ch.noise_psd * fs
        rxw.samples = rxw.samples + np.sqrt(s2 / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    est = estimate_toa(rxw, spec, lut)
    rx_center = est.tau_hat + 0.5 * spec.tau_pd
    t_true_tx = float(tx.tb.to_true(t_center_local))
    return rx_center - t_center_local, est.snr_db, t_true_tx, frozen[0][0]


def run_epoch(nodes: list[NodeRadio], schedule: SyncSchedule, channels: dict[int, ChannelState],
              k: int, t_epoch_ref: float, f0: float = 2.1e9,
              rng: np.random.Generator | None = None) -> dict[int, TwttExchange]:
    """One TDMA epoch on the star around node 0.

    Node ``s`` transmits at reference time ``t_epoch_ref + s * tau_tdma``,
    which each secondary converts to its own clock with its current
    prediction. Receivers open frames around the predicted arrival. Returns
    one exchange per secondary node.
    """
    spec = schedule.ptt
    lut = cached_lut(spec)
    ref = nodes[0]
    half = 0.5 * spec.tau_pd
    t_true_epoch = float(ref.tb.to_true(t_epoch_ref))
    out: dict[int, dict] = {nd.idx: {} for nd in nodes[1:]}
    tx_centers = {}
    for slot, s in enumerate(schedule.slot_order):
        t_slot = t_epoch_ref + slot * schedule.tau_tdma + half
        tx = nodes[s]
        # clock-edge aligned pulse center on the transmitter's own clock
        tx_centers[s] = _edge(t_slot + tx.predicted_offset(t_slot) - half, spec.fs) + half
        receivers = [nd for nd in nodes[1:]] if s == ref.idx else [ref]
        for rx in receivers:
            m = rx.idx if s == ref.idx else s
            secondary = nodes[m]
            expect = t_slot + rx.predicted_offset(t_slot) + secondary.tof_prior
            direction = "nm" if s == ref.idx else "mn"
            try:
                tof, snr, t_true, los = _one_way(tx, rx, tx_centers[s], expect, schedule, channels[m],
                                                 f0, t_true_epoch, direction, rng, lut)
            except FrameCaptureError as err:
                raise EpochMissed(str(err)) from err
            out[m][direction] = (tof, snr, t_true, los)
    res = {}
    for m, d in out.items():
        nm, mn = d["nm"], d["mn"]
        res[m] = TwttExchange(k=k, t_tx_n=tx_centers[ref.idx], t_tx_m=tx_centers[m],
                              tof_bar_nm=nm[0], tof_bar_mn=mn[0], snrs=(nm[1], mn[1]),
                              truth={"t_n": nm[2], "t_m": mn[2], "tof": nm[3]})
    return res


def estimate_time_offset(x: TwttExchange) -> float:
    return 0.5 * (x.tof_bar_nm - x.tof_bar_mn)


def estimate_tof(x: TwttExchange) -> float:
    return 0.5 * (x.tof_bar_nm + x.tof_bar_mn)


def estimate_range(x: TwttExchange) -> float:
    return C_LIGHT * estimate_tof(x)


def estimate_freq_offset(T_hat_k: float, T_hat_km1: float | None, tau_twtt_k: float) -> float:
    """Fractional frequency offset from two consecutive offset estimates; NaN without a predecessor."""
    if T_hat_km1 is None or not np.isfinite(T_hat_km1) or not np.isfinite(T_hat_k):
        return float("nan")
    if tau_twtt_k <= 0:
        raise ValueError("tau_twtt must be positive")
    return (T_hat_k - T_hat_km1) / tau_twtt_k


def to_estimate(x: TwttExchange) -> TwttEstimate:
    tof = estimate_tof(x)
    return TwttEstimate(T_hat=estimate_time_offset(x), tof_hat=tof, range_hat=C_LIGHT * tof)


# noise-free closed forms; integer constants keep exact rational inputs exact
def apparent_tof(tof, df_tx, df_rx, t0_tx, t0_rx, t_tx):
    """Apparent one-way TOF for linear clocks: rx clock at arrival minus tx clock at departure."""
    return tof * (1 + df_rx) + (t0_rx - t0_tx) + (df_rx - df_tx) * t_tx


def offset_closed_form(tof, df_n, df_m, t0_n, t0_m, t_n, t_m):
    dfnm = df_m - df_n
    return dfnm * (tof + t_n + t_m) / 2 + (t0_m - t0_n)


def offset_tdma_form(tof, df_n, df_m, t0_n, t0_m, t_n, t_m):
    dfnm = df_m - df_n
    return (t0_m - t0_n) + dfnm * t_n + dfnm * (tof + (t_m - t_n)) / 2


def tof_closed_form(tof, df_n, df_m, t_n, t_m):
    return tof + tof * (df_n + df_m) / 2 - (df_m - df_n) * (t_m - t_n) / 2


def offset_residual(tof, df_n, df_m, t_n, t_m):
    """What the half-difference adds on top of the true offset at the reference transmit time."""
    return (df_m - df_n) * (tof + (t_m - t_n)) / 2


# lower bounds
def crlb_toa(moments: WaveformMoments, snr_linear: float) -> float:
    """TOA variance bound (s^2); ``snr_linear`` is the post-integration |a|^2 Es / N0."""
    if snr_linear <= 0:
        raise ValueError("snr must be positive")
    return 1.0 / (2.0 * snr_linear * (moments.ms_bandwidth - moments.mean_freq**2))


def crlb_freq(moments: WaveformMoments, snr_linear: float) -> float:
    """Doppler variance bound (Hz^2) from the mean-square duration."""
    if snr_linear <= 0:
        raise ValueError("snr must be positive")
    return 1.0 / (2.0 * snr_linear * (moments.ms_duration - moments.mean_time**2))


def crlb_twtt(var_nm: float, var_mn: float) -> float:
    return 0.5 * (var_nm + var_mn)


def crlb_freq_from_twtt(var_k: float, var_km1: float, tau_twtt: float) -> float:
    """Variance bound on the two-point fractional frequency estimate.

    Uses (var_k + var_km1) / tau^2, the variance of a difference of two
    independent offset estimates divided by the interval.
    """
    if tau_twtt <= 0:
        raise ValueError("tau_twtt must be positive")
    return (var_k + var_km1) / tau_twtt**2


def post_integration_snr(snr_db_per_sample: float, spec: PttSpec) -> float:
    """|a|^2 Es / N0 for a PTT received at the given per-sample SNR."""
    ref = ptt_template(spec)
    return 10 ** (snr_db_per_sample / 10) * ref.energy / np.mean(np.abs(ref.samples) ** 2)


@dataclass
class StartupLog:
    stages: list[int] = field(default_factory=list)
    offsets: list[float] = field(default_factory=list)
    repeats: int = 0


class ConvergenceError(RuntimeError):
    pass


def staged_startup(nodes: list[NodeRadio], channels: dict[int, ChannelState], t0_ref: float,
                   final_ptt: PttSpec | None = None, tau_e: float | None = None,
                   tau_twtt: float = 44e-3, f0: float = 2.1e9, rng: np.random.Generator | None = None,
                   max_repeats: int = 3, stages=None) -> tuple[SyncSchedule, StartupLog, float, dict]:
    """Walk the refinement ladder, one exchange per stage, repeating on a miss.

    Node estimates are updated in place. Returns the terminal schedule, a
    log, the reference time of the last exchange and the last exchanges.
    """
    stages = range(len(REFINEMENT_STAGES)) if stages is None else stages
    log = StartupLog()
    t = t0_ref
    last = {}
    prev: dict[int, tuple[float, float]] = {}
    sched = None
    for idx in stages:
        sched = make_schedule(idx, len(nodes), final_ptt, tau_e, tau_twtt)
        for attempt in range(max_repeats + 1):
            try:
                ex = run_epoch(nodes, sched, channels, -len(REFINEMENT_STAGES) + idx, t, f0, rng)
                break
            except EpochMissed:
                log.repeats += 1
                t += tau_twtt
        else:
            raise ConvergenceError(f"stage {idx} missed {max_repeats + 1} times")
        for m, x in ex.items():
            nd = nodes[m]
            T_hat = estimate_time_offset(x)
            if m in prev:
                nd.df_hat = estimate_freq_offset(T_hat, prev[m][0], t - prev[m][1])
            nd.T_hat, nd.t_ref = T_hat, t
            nd.tof_prior = estimate_tof(x)
            prev[m] = (T_hat, t)
        log.stages.append(idx)
        log.offsets.append(float(np.mean([nodes[m].T_hat for m in ex])))
        last = ex
        t += tau_twtt
    return sched, log, t - tau_twtt, last
