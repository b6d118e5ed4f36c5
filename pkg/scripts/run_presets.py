"""Run a family of presets and collect one summary line per scenario.

    python3 scripts/run_presets.py --prefix exp1. --epochs 50 --out results/
"""

import argparse
import csv
from pathlib import Path

from cdasync.presets import preset, preset_names
from cdasync.sim import emit_report, run_scenario


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--prefix", default="exp1.")
    ap.add_argument("--epochs", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    over = {k: v for k, v in (("n_epochs", args.epochs), ("seed", args.seed)) if v is not None}
    names = [n for n in preset_names() if n.startswith(args.prefix)]
    if not names:
        raise SystemExit(f"no presets start with {args.prefix!r}")
    out = Path(args.out)
    table = []
    for name in names:
        cfg = preset(name, **over)
        summary = emit_report(run_scenario(cfg), out / name, cfg, echo=None)
        row = {"preset": name}
        row.update({r["metric"]: r["median"] for r in summary})
        table.append(row)
        print(name, " ".join(f"{k}={v:.4g}" for k, v in row.items() if k != "preset"))
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(table[0]))
        w.writeheader()
        w.writerows(table)


if __name__ == "__main__":
    main()
