"""Command line interface: simulate, sweep, dp-solve, dp-compare, threshold."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from .config import ConfigError, ConfigParseError, ExperimentConfig, load_config, parse_values, validate_config
from .dp import BudgetExceededError, DpGrid, save, solve
from .experiments import dp_initial_value, run_dp_compare, run_sweep, write_results
from .policies import POLICY_NAMES
from .threshold import find_q_threshold

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_BUDGET = 4

log = logging.getLogger("helperoffload")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment file (defaults to the reference scenario)")
    common.add_argument("--policy", action="append", choices=POLICY_NAMES, help="policy name; repeatable")
    common.add_argument("--episodes", type=int, help="Monte Carlo episodes per cell")
    common.add_argument("--seed", type=int, help="base seed")
    common.add_argument("--out", help="output path")
    common.add_argument("--axis", choices=("D", "K", "P11", "Q"), help="sweep axis")
    common.add_argument("--values", help="sweep values: a,b,c or start:stop:step")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="helperoffload", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="evaluate policies at one parameter point")
    sub.add_parser("sweep", parents=[common], help="evaluate policies along a parameter axis")
    p = sub.add_parser("dp-solve", parents=[common], help="solve the exact DP and save the table (.npz)")
    p.add_argument("--step", type=int, default=1, help="bit granularity")
    p = sub.add_parser("dp-compare", parents=[common], help="compare policies with the exact DP optimum")
    p.add_argument("--step", type=int, default=1, help="bit granularity")
    p = sub.add_parser("threshold", parents=[common], help="bisection search for the BACS threshold")
    p.add_argument("--eps", type=float, help="absolute stopping tolerance in joules")
    p.add_argument("--max-iter", type=int, default=30)
    return ap


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.policy:
        changes["policies"] = list(dict.fromkeys(args.policy))
    if args.episodes is not None:
        changes["episodes"] = args.episodes
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out:
        changes["out"] = args.out
    if args.axis:
        changes["axis"] = args.axis
    if args.values:
        changes["values"] = parse_values(args.values)
    cfg = replace(cfg, **changes)  # re-validates in __post_init__
    validate_config(cfg)
    return cfg


def _command_line(argv) -> str:
    return " ".join(["helperoffload", *argv])


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _resolve(args)
        if args.command in ("simulate", "sweep"):
            if args.command == "sweep" and not cfg.axis:
                raise ConfigError("sweep needs an axis (--axis or sweep.axis in the config)")
            if args.command == "simulate":
                cfg = replace(cfg, axis=None, values=[])
            rows = run_sweep(cfg)
            out, meta = write_results(rows, cfg, cfg.out, _command_line(argv))
            print(f"wrote {out} ({len(rows)} rows) and {meta}")
        elif args.command == "dp-solve":
            sol = solve(cfg.params, DpGrid(step=args.step))
            out = Path(args.out or "dp_solution.npz")
            save(sol, out)
            for c, cn in ((0, "busy"), (1, "idle")):
                for h, hn in ((0, "good"), (1, "bad")):
                    print(f"J1({cn}, {hn}) = {sol.initial_value(c, h)!r}")
            print(f"expected (stationary start) = {dp_initial_value(sol, cfg.params)!r}")
            print(f"wrote {out}")
        elif args.command == "dp-compare":
            rows = run_dp_compare(cfg, DpGrid(step=args.step))
            out, meta = write_results(rows, cfg, cfg.out, _command_line(argv))
            for r in rows:
                print(f"{r['policy']:>10}  value={r['mean_energy_J']!r}  gap={r['rel_gap']!r}  {r['error']}")
            print(f"wrote {out} and {meta}")
        elif args.command == "threshold":
            res = find_q_threshold(cfg.params, cfg.episodes, args.eps, args.max_iter, cfg.seed, rounding=cfg.rounding)
            text = yaml.safe_dump(res.to_dict(), sort_keys=True)
            if args.out:
                Path(args.out).write_text(text)
                print(f"wrote {args.out}")
            else:
                print(text, end="")
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
