"""Command line entry: ``cdasync run --preset exp1.8 --out results/``."""

from __future__ import annotations

import argparse
import sys

from .presets import preset, preset_names
from .sim import ConfigError, ScenarioConfig, emit_report, run_scenario
from .twtt import ConvergenceError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cdasync", description="Distributed-array time/frequency/phase sync simulator")
    sub = p.add_subparsers(dest="cmd")
    r = sub.add_parser("run", help="run one scenario and write CSV reports")
    src = r.add_mutually_exclusive_group()
    src.add_argument("--preset", help="named scenario, see --list-presets")
    src.add_argument("--config", help="JSON scenario file")
    r.add_argument("--epochs", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", default="results")
    r.add_argument("--scope-rate", type=float, dest="scope_rate")
    r.add_argument("--list-presets", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd != "run":
        build_parser().print_help()
        return 2
    if args.list_presets:
        print("\n".join(preset_names()))
        return 0
    over = {k: v for k, v in (("n_epochs", args.epochs), ("seed", args.seed),
                              ("scope_rate", args.scope_rate)) if v is not None}
    try:
        if args.config:
            d = ScenarioConfig.from_json(args.config).to_dict()
            d.update(over)
            cfg = ScenarioConfig.from_dict(d)
        else:
            cfg = preset(args.preset or "exp1.8", **over)
        records = run_scenario(cfg)
        emit_report(records, args.out, cfg)
    except (ConfigError, KeyError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except ConvergenceError as err:
        print(f"startup did not converge: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
