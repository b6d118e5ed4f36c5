"""Monte Carlo one-way TOA error against the delay bound across per-sample SNR.

    python3 scripts/crlb_sweep.py --trials 500 --out crlb_sweep.csv
"""

import argparse
import csv

import numpy as np

from cdasync.presets import SNR_SWEEP
from cdasync.toa import cached_lut, monte_carlo_toa
from cdasync.twtt import crlb_toa, post_integration_snr
from cdasync.waveform import PttSpec, compute_moments, synth_ptt


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--no-lut", action="store_true")
    ap.add_argument("--out")
    args = ap.parse_args()

    spec = PttSpec()
    lut = None if args.no_lut else cached_lut(spec)
    mom = compute_moments(synth_ptt(spec))
    rng = np.random.default_rng(args.seed)
    rows = []
    print(f"{'snr_db':>7} {'rmse_ps':>10} {'bound_ps':>10} {'ratio':>7}")
    for snr in SNR_SWEEP:
        e = monte_carlo_toa(spec, snr, args.trials, rng, lut)
        rmse = float(np.sqrt(np.mean(e**2)))
        bound = float(np.sqrt(crlb_toa(mom, post_integration_snr(snr, spec))))
        rows.append(dict(snr_db=snr, rmse=rmse, bound=bound, ratio=rmse / bound))
        print(f"{snr:>7} {rmse * 1e12:>10.2f} {bound * 1e12:>10.2f} {rmse / bound:>7.3f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
