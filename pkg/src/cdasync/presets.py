"""Named scenarios: SNR, pulse-length, epoch-length, node-count and reference-offset grids."""

from __future__ import annotations

from .sim import ScenarioConfig

SNR_SWEEP = (6, 9, 12, 15, 18, 21, 24, 27, 30, 33)
OFFSET_SWEEP_HZ = (0.0, 0.01, 0.1, 1.0, 10.0, 100.0)


def _table() -> dict[str, dict]:
    t: dict[str, dict] = {}
    for i, snr in enumerate(SNR_SWEEP, 1):
        t[f"exp1.{i}"] = dict(snr_db=snr, measure_cw=False)
        t[f"exp21.{i}"] = dict(snr_db=snr)
    for i, (pd, te) in enumerate([(1.5e-6, 10.5e-6), (2e-6, 11.5e-6), (3e-6, 13.5e-6),
                                  (6e-6, 19.5e-6), (12e-6, 31.5e-6)], 1):
        t[f"exp2.{i}"] = dict(snr_db=30, tau_pd=pd, tau_e=te, measure_cw=False)
    for i, te in enumerate([10.5e-6, 13.5e-6, 19.5e-6, 31.5e-6], 1):
        t[f"exp3.{i}"] = dict(snr_db=30, tau_e=te, measure_cw=False)
        t[f"exp3.{i + 4}"] = dict(snr_db=30, tau_e=te, velocity=0.3, multipath=True, measure_cw=False)
    for i, per in enumerate([44e-3, 45e-3, 46e-3, 47e-3, 48e-3, 50e-3], 1):
        t[f"exp4.{i}"] = dict(snr_db=30, tau_twtt=per, measure_cw=False)
    for i, (n, per) in enumerate([(2, 44e-3), (3, 50e-3), (4, 55e-3)], 1):
        t[f"exp5.{i}"] = dict(snr_db=30, n_nodes=n, tau_twtt=per, measure_cw=False)
        t[f"exp5.{i + 3}"] = dict(snr_db=30, n_nodes=n, tau_twtt=per, velocity=0.3, multipath=True,
                                  measure_cw=False)
    for base, cw in ((6, False), (26, True)):
        for i, hz in enumerate(OFFSET_SWEEP_HZ, 1):
            common = dict(snr_db=30, freq_ref="cabled", ref_offset_hz=hz, bf_tau_pd=1e-6, measure_cw=cw)
            t[f"exp{base}.{i}"] = dict(common)
            t[f"exp{base}.{i + 7}"] = dict(common, velocity=0.3, multipath=True)
        t[f"exp{base}.7"] = dict(snr_db=30, bf_tau_pd=1e-6, measure_cw=cw)
        t[f"exp{base}.14"] = dict(snr_db=30, bf_tau_pd=1e-6, velocity=0.3, multipath=True, measure_cw=cw)
    # only the digital-only rows of the configuration with the analog link
    for i, v in zip((5, 6, 7, 8), (0.0, 0.3, 0.03, 0.003)):
        t[f"exp8.{i}"] = dict(snr_db=30, f_twtt=700e6, bf_tau_pd=1e-6, velocity=v,
                              multipath=v > 0, measure_cw=False)
    return t


PRESETS = _table()


def preset_names() -> list[str]:
    def key(n):
        a, b = n[3:].split(".")
        return int(a), int(b)
    return sorted(PRESETS, key=key)


def preset(name: str, **overrides) -> ScenarioConfig:
    try:
        kw = dict(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}") from None
    kw.update(overrides)
    return ScenarioConfig(name=name, **kw)
