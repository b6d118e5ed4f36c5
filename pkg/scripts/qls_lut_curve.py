"""Tabulate the parabola-fit bias curve and optionally save the lookup table.

    python3 scripts/qls_lut_curve.py --beta 20e6 --tau 1.5e-6 --save lut.npz
"""

import argparse

import numpy as np

from cdasync.toa import build_qls_lut, save_lut
from cdasync.waveform import PttSpec


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--beta", type=float, default=20e6)
    ap.add_argument("--tau", type=float, default=1.5e-6)
    ap.add_argument("--fs", type=float, default=200e6)
    ap.add_argument("--rise-fall", type=float, default=50e-9)
    ap.add_argument("--grid", type=int, default=1024)
    ap.add_argument("--save")
    args = ap.parse_args()

    spec = PttSpec(beta_ptt=args.beta, tau_pd=args.tau, fs=args.fs, rise_fall=args.rise_fall)
    lut = build_qls_lut(spec, args.grid)
    print(f"max |bias| = {np.max(np.abs(lut.bias)) * 1e12:.3f} ps over {args.grid} points")
    for g, b in zip(lut.grid[:: args.grid // 16], lut.bias[:: args.grid // 16]):
        print(f"{g:+.4f} samples  {b * 1e12:+9.3f} ps")
    if args.save:
        save_lut(lut, args.save)


if __name__ == "__main__":
    main()
