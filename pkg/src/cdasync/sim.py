"""Scenario runner: startup, then alternating TWTT / beamforming cycles
measured by a virtual two-channel scope, plus CSV reporting."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .channel import SYNTHETIC_MULTIPATH, ChannelState, los_channel, noise_psd_for_snr, with_multipath
from .compensation import CompensationState, compensate_tx
from .metrics import (MetricError, PulseMetrics, ScopeCapture, capture_snr, coherent_gain,
                      freq_difference_kay, interarrival_phase, interarrival_time, trimmed_stats)
from .timebase import MotionProfile, PhaseNoiseSpec, TimebaseParams, TimebaseState
from .toa import ptt_template
from .twtt import (REFINEMENT_STAGES, EpochMissed, NodeRadio, estimate_freq_offset,
                   estimate_time_offset, estimate_tof, make_schedule, run_epoch, staged_startup)
from .waveform import BasebandWaveform, PttSpec, ptt_value, synth_cw, transmit_model

LATENCY_NOTE = "latency model is synthetic (fixed + uniform jitter + deadline misses)"
FREE_RUNNING_DF = (0.0, -182e-9, 95e-9, -60e-9)
REF_OSC_HZ = 10e6
T_START = 1.0


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    """Declarative description of one run. JSON-compatible via ``to_dict``/``from_dict``."""

    name: str = "custom"
    n_nodes: int = 2
    snr_db: float = 27.0
    tau_pd: float = 1.5e-6
    beta_ptt: float = 20e6
    tau_e: float = 10.5e-6
    tau_twtt: float = 44e-3
    n_epochs: int = 200
    seed: int = 0
    f_twtt: float = 2.1e9
    f_bf: float = 1e9
    bf_tau_pd: float = 2e-6
    bf_beta: float = 50e6
    cw_duration: float = 100e-6
    measure_cw: bool = True
    scope_rate: float = 20e9
    cw_rate: float = 20e6
    scope_snr_db: float = 30.0
    scope_skew: float = 0.0
    freq_ref: str = "internal"
    ref_offset_hz: float = 0.0
    delta_f: list[float] | None = None
    coarse_error: float = 10e-3
    range_m: float = 1.0
    velocity: float = 0.0
    track: tuple[float, float] = (0.37, 1.34)
    multipath: bool = False
    latency_fixed: float = 20e-3
    latency_jitter: float = 10e-3
    deadline_miss: float = 0.007
    retry_limit: int = 3
    white_pm: float = 0.0
    flicker_pm: float = 1e-9

    def __post_init__(self):
        if not 2 <= self.n_nodes <= 4:
            raise ConfigError("n_nodes must be between 2 and 4")
        if self.n_epochs < 2:
            raise ConfigError("n_epochs must be at least 2")
        if self.freq_ref not in ("internal", "cabled"):
            raise ConfigError("freq_ref must be 'internal' or 'cabled'")
        if self.delta_f is not None and len(self.delta_f) != self.n_nodes:
            raise ConfigError("delta_f needs one entry per node")
        if not 0 <= self.deadline_miss < 1:
            raise ConfigError("deadline_miss must be in [0, 1)")
        if self.tau_twtt <= self.latency_fixed + self.latency_jitter:
            raise ConfigError("tau_twtt must exceed the worst-case processing latency")
        if self.scope_rate < 10 * self.f_bf:
            raise ConfigError("scope rate must be at least 10x the beamforming carrier")
        self.track = tuple(self.track)
        try:
            self.ptt_spec()
            self.bf_spec()
        except ValueError as err:
            raise ConfigError(str(err)) from err

    def ptt_spec(self) -> PttSpec:
        return PttSpec(beta_ptt=self.beta_ptt, tau_pd=self.tau_pd)

    def bf_spec(self) -> PttSpec:
        return PttSpec(beta_ptt=self.bf_beta, tau_pd=self.bf_tau_pd)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["track"] = list(self.track)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        bad = set(d) - known
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "ScenarioConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class EpochRecord:
    k: int
    stage: int
    T_hat: float
    tof_hat: float
    df_hat: float
    snr_nm: float
    snr_mn: float
    retries: int
    valid: bool
    tau_twtt: float
    Gc: float
    dt: float
    dphi: float
    dfreq: float
    snr: float
    T_true: float
    df_true: float
    time_err: float
    phase_err: float


EPOCH_COLUMNS = [f.name for f in fields(EpochRecord)]
METRIC_COLUMNS = ["k", "Gc", "dt", "dphi", "dfreq", "snr", "df_hat"]


def _wrap(x: float) -> float:
    return float((x + np.pi) % (2 * np.pi) - np.pi)


class Scenario:
    """Holds the ground-truth world and the nodes' view of it for one run."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        rng = self.rng
        n = cfg.n_nodes
        offsets = [0.0] + list(rng.uniform(-cfg.coarse_error, cfg.coarse_error, n - 1))
        phis = rng.uniform(-np.pi, np.pi, n)
        tbs = []
        for i in range(n):
            if cfg.freq_ref == "cabled":
                # shared reference: one noise process, injected offset on the secondaries
                df = 0.0 if i == 0 else cfg.ref_offset_hz / REF_OSC_HZ
                pn_seed = cfg.seed * 8
            else:
                df = (cfg.delta_f or FREE_RUNNING_DF)[i]
                pn_seed = cfg.seed * 8 + i
            pn = PhaseNoiseSpec(cfg.white_pm, cfg.flicker_pm, seed=pn_seed)
            tbs.append(TimebaseState(TimebaseParams(delta_f=df, t0_offset=offsets[i],
                                                    phase_noise=pn, phi0=float(phis[i]))))
        self.tbs = tbs
        self.nodes = [NodeRadio(i, tb) for i, tb in enumerate(tbs)]
        spec = cfg.ptt_spec()
        psd = noise_psd_for_snr(ptt_template(spec), cfg.snr_db)
        self.channels: dict[int, ChannelState] = {}
        for m in range(1, n):
            motion = None
            r0 = cfg.range_m
            if cfg.velocity:
                lo, hi = cfg.track
                r0 = 0.5 * (lo + hi)
                motion = MotionProfile(r0=r0, velocity_steps=((0.0, cfg.velocity),), bounds=cfg.track)
            ch = los_channel(r0, noise_psd=psd, motion=motion, f_rf=cfg.f_twtt)
            if cfg.multipath:
                ch = with_multipath(ch, SYNTHETIC_MULTIPATH)
            self.channels[m] = ch
        self.observed = n - 1
        self.comp: dict[int, CompensationState] = {}

    # compensation derived from a node's linear estimate, re-expressed on its own clock
    def update_compensation(self, k: int):
        cfg = self.cfg
        for nd in self.nodes[1:]:
            u_ref = nd.t_ref + nd.T_hat
            df = nd.df_hat if np.isfinite(nd.df_hat) else 0.0
            cal = self.tbs[nd.idx].params.phi0 - self.tbs[0].params.phi0
            self.comp[nd.idx] = CompensationState(T_off=nd.T_hat, df=df / (1.0 + df), t_ref=u_ref,
                                                  f0_lo=cfg.f_bf, phi0=cal, updated_at=k)

    def _emit(self, node: int, w: BasebandWaveform) -> BasebandWaveform:
        comp = self.comp.get(node)
        out = w if comp is None or node == 0 else compensate_tx(w, comp)
        return transmit_model(out, self.tbs[node], self.cfg.f_bf)

    def _channels(self, t_local: float, wave_src, duration: float, fs: float, carrier: bool,
                  lead: float, snr_db: float, noise_bw_scale: float):
        cfg = self.cfg
        pair = (0, self.observed)
        t0_true = float(self.tbs[0].to_true(t_local))
        n_lead = int(round(lead * fs))
        n = n_lead + int(round((duration + lead) * fs))
        tt = t0_true - lead + np.arange(n) / fs
        chans = []
        for c, node in enumerate(pair):
            w = BasebandWaveform(np.zeros(1), 200e6, t_local, source=wave_src)
            fld = self._emit(node, w)
            t_eval = tt - (cfg.scope_skew if c == 1 else 0.0)
            s = fld.source(t_eval)
            if carrier:
                s = s * np.exp(2j * np.pi * cfg.f_bf * (tt - tt[0]))
            chans.append(s)
        p_sig = np.mean(np.abs(chans[0][n_lead:]) ** 2)
        var = p_sig / 10 ** (snr_db / 10) * noise_bw_scale
        for c in range(2):
            chans[c] = chans[c] + np.sqrt(var / 2) * (self.rng.standard_normal(n) + 1j * self.rng.standard_normal(n))
        return ScopeCapture(chans[0], chans[1], fs, tt[0], n_noise=n_lead), t0_true

    def beamform(self, t_local: float) -> PulseMetrics:
        cfg = self.cfg
        spec = cfg.bf_spec()
        src = lambda t: ptt_value(spec, np.asarray(t) - t_local)
        cap, _ = self._channels(t_local, src, spec.tau_pd, cfg.scope_rate, True, 0.25e-6,
                                cfg.scope_snr_db, 1.0)
        pm = PulseMetrics()
        try:
            pm.coherent_gain = coherent_gain(cap)
            pm.dt = interarrival_time(cap)
            pm.dphi = interarrival_phase(cap)
            pm.snr = capture_snr(cap)
        except MetricError:
            pass
        if cfg.measure_cw:
            t_cw = t_local + spec.tau_pd + 10e-6
            cw = synth_cw(cfg.cw_duration, 200e6, 0.0, t_cw, rise_fall=50e-9)
            # ideal downconversion to baseband at a reduced rate; noise density held fixed
            cap_cw, _ = self._channels(t_cw, cw.source, cfg.cw_duration, cfg.cw_rate, False, 0.0,
                                       cfg.scope_snr_db, cfg.cw_rate / cfg.scope_rate)
            try:
                pm.dfreq = freq_difference_kay(cap_cw)
            except MetricError:
                pass
        return pm

    def truth_alignment(self, t_local: float) -> tuple[float, float]:
        """True emission-time and carrier-phase misalignment of the observed node."""
        cfg = self.cfg
        m = self.observed
        comp = self.comp[m]
        u = t_local
        for _ in range(3):
            u = t_local + float(comp.offset(u))
        t0 = float(self.tbs[0].to_true(t_local))
        tm = float(self.tbs[m].to_true(u))
        tc = t0 + 0.5 * cfg.bf_tau_pd
        e0 = float(self.tbs[0].clock_error(tc))
        em = float(self.tbs[m].clock_error(tc))
        ph = (2 * np.pi * cfg.f_bf * (em - float(comp.offset(tc + em)) - e0)
              + self.tbs[m].params.phi0 - self.tbs[0].params.phi0 - comp.phi0)
        return tm - t0, _wrap(ph)


def run_scenario(cfg: ScenarioConfig, progress=None) -> list[EpochRecord]:
    sc = Scenario(cfg)
    rng = sc.rng
    m = sc.observed
    sched, _, t_last, _ = staged_startup(sc.nodes, sc.channels, T_START, cfg.ptt_spec(), cfg.tau_e,
                                         cfg.tau_twtt, cfg.f_twtt, rng, cfg.retry_limit)
    sc.update_compensation(-1)
    spec = cfg.ptt_spec()
    stage = len(REFINEMENT_STAGES) - 1
    sched = make_schedule(stage, cfg.n_nodes, spec, cfg.tau_e, cfg.tau_twtt)
    mean_lat = cfg.latency_fixed + 0.5 * cfg.latency_jitter
    prev = {nd.idx: (nd.T_hat, nd.t_ref) for nd in sc.nodes[1:]}
    t = t_last + cfg.tau_twtt
    records = []
    for k in range(cfg.n_epochs):
        retries = 0
        ex = None
        while True:
            missed = rng.random() < cfg.deadline_miss
            if not missed:
                try:
                    ex = run_epoch(sc.nodes, sched, sc.channels, k, t, cfg.f_twtt, rng)
                except EpochMissed:
                    ex = None
            if ex is not None:
                break
            if retries == cfg.retry_limit:
                break
            retries += 1
            t += cfg.latency_fixed + rng.uniform(0, cfg.latency_jitter)
        valid = ex is not None
        T_hat = tof = df_hat = snr_nm = snr_mn = math.nan
        T_true = df_true = math.nan
        tau = t - prev[m][1]
        if valid:
            for mm, x in ex.items():
                nd = sc.nodes[mm]
                Th = estimate_time_offset(x)
                nd.df_hat = estimate_freq_offset(Th, prev[mm][0], t - prev[mm][1])
                nd.T_hat, nd.t_ref = Th, t
                nd.tof_prior = estimate_tof(x)
                prev[mm] = (Th, t)
            x = ex[m]
            T_hat, tof, df_hat = sc.nodes[m].T_hat, estimate_tof(x), sc.nodes[m].df_hat
            snr_nm, snr_mn = x.snrs
            tn = x.truth["t_n"]
            T_true = float(sc.tbs[m].clock_error(tn) - sc.tbs[0].clock_error(tn))
            df_true = float(sc.tbs[m].freq_error(tn) - sc.tbs[0].freq_error(tn))
            sc.update_compensation(k)
        lat = cfg.latency_fixed + rng.uniform(0, cfg.latency_jitter)
        t_bf = t + lat
        pm = sc.beamform(t_bf)
        terr, perr = sc.truth_alignment(t_bf)
        records.append(EpochRecord(k=k, stage=stage, T_hat=T_hat, tof_hat=tof, df_hat=df_hat,
                                   snr_nm=snr_nm, snr_mn=snr_mn, retries=retries, valid=valid,
                                   tau_twtt=tau, Gc=pm.coherent_gain, dt=pm.dt, dphi=pm.dphi,
                                   dfreq=pm.dfreq, snr=pm.snr, T_true=T_true, df_true=df_true,
                                   time_err=terr, phase_err=perr))
        if progress:
            progress(k)
        # cycle length averages the nominal period; jitter in the latency perturbs it
        t = t + lat + (cfg.tau_twtt - mean_lat)
    return records


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_epochs(records: list[EpochRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {LATENCY_NOTE}\n")
        w = csv.writer(fh)
        w.writerow(EPOCH_COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in EPOCH_COLUMNS])


def read_epochs(path: str | Path) -> list[EpochRecord]:
    types = {f.name: f.type for f in fields(EpochRecord)}
    out = []
    with open(path, newline="") as fh:
        rows = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(rows)
        for row in rows:
            kw = {}
            for name, val in zip(header, row):
                t = types[name]
                kw[name] = bool(int(val)) if t == "bool" else int(val) if t == "int" else float(val)
            out.append(EpochRecord(**kw))
    return out


SUMMARY_SPECS = (("Gc", 6), ("dt", 6), ("dphi", 6), ("dfreq", 4), ("df_hat", 4), ("time_err", 6),
                 ("phase_err", 6), ("snr_nm", 6), ("snr_mn", 6))


def summarize(records: list[EpochRecord]) -> list[dict]:
    rows = []
    for name, xs in SUMMARY_SPECS:
        vals = np.array([getattr(r, name) for r in records], dtype=float)
        st = trimmed_stats(vals, xs)
        fin = vals[np.isfinite(vals)]
        med = float(np.median(fin)) if fin.size else math.nan
        rows.append({"metric": name, "x_sigma": xs, "mean": st.mean, "std": st.std,
                     "n_removed": st.n_removed, "median": med, "n": int(vals.size)})
    return rows


def emit_report(records: list[EpochRecord], out_dir: str | Path, cfg: ScenarioConfig | None = None,
                echo=print) -> list[dict]:
    if not records:
        raise ValueError("no records to report")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_epochs(records, out / "epochs.csv")
        with open(out / "metrics.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(METRIC_COLUMNS)
            for r in records:
                w.writerow([_fmt(getattr(r, c)) for c in METRIC_COLUMNS])
        summary = summarize(records)
        with open(out / "summary.csv", "w", newline="") as fh:
            fh.write(f"# {LATENCY_NOTE}\n")
            w = csv.DictWriter(fh, fieldnames=list(summary[0]))
            w.writeheader()
            for row in summary:
                w.writerow({k: _fmt(v) if not isinstance(v, str) else v for k, v in row.items()})
        if cfg is not None:
            with open(out / "config.json", "w") as fh:
                json.dump(cfg.to_dict(), fh, indent=2)
    except OSError as err:
        raise OSError(f"cannot write report to {out}: {err}") from err
    if echo:
        title = cfg.name if cfg else "scenario"
        n_bad = sum(not r.valid for r in records)
        echo(f"{title}: {len(records)} epochs, {n_bad} invalid  [{LATENCY_NOTE}]")
        echo(f"{'metric':<10}{'median':>14}{'trim mean':>14}{'trim std':>14}{'removed':>9}")
        for row in summary:
            echo(f"{row['metric']:<10}{row['median']:>14.6g}{row['mean']:>14.6g}"
                 f"{row['std']:>14.6g}{row['n_removed']:>9d}")
    return summary
