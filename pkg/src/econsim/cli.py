"""Command-line entry points: run, sweep, validate, presets, serve."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .core import config_replace
from .scenario import (
    ScenarioError,
    list_presets,
    load_grid,
    resolve_scenario,
    run_episode,
    run_sweep,
)
from .serve import serve_loop


def _out_dir(arg: str | None, default: str) -> Path:
    if arg:
        return Path(arg)
    env = os.environ.get("ECONSIM_OUT")
    return Path(env) / default if env else Path(default)


def _apply_overrides(spec, overrides: list[str]):
    import dataclasses
    cfg = spec.economy
    for item in overrides:
        if "=" not in item:
            raise ScenarioError(f"--set expects path=value, got {item!r}")
        path, value = item.split("=", 1)
        cfg = config_replace(cfg, path.strip(), value.strip())
    return dataclasses.replace(spec, economy=cfg)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="econsim",
        description="Deterministic multi-agent economic simulation engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario episode")
    p_run.add_argument("scenario", help="scenario file or bundled preset name")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--format", choices=("csv", "jsonl"), default=None)
    p_run.add_argument("--panel", action="store_true",
                       help="also write the per-household panel (O(N*T) rows)")
    p_run.add_argument("--set", action="append", default=[], metavar="PATH=VALUE",
                       help="override a config value, e.g. population.size=100")
    p_run.add_argument("--record-actions", default=None, metavar="FILE",
                       help="record every agent's actions to a JSONL file")
    p_run.add_argument("--max-steps", type=int, default=None)
    p_run.add_argument("--quiet", action="store_true")

    p_sweep = sub.add_parser("sweep", help="run a config-grid sweep")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument("--grid", required=True, help="YAML file: config path -> values")
    p_sweep.add_argument("--seeds", type=int, default=1, help="number of seeds (0..K-1)")
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--set", action="append", default=[], metavar="PATH=VALUE")
    p_sweep.add_argument("--max-steps", type=int, default=None)

    p_val = sub.add_parser("validate", help="check a scenario file")
    p_val.add_argument("scenario")

    p_presets = sub.add_parser("presets", help="preset catalog")
    p_presets.add_argument("action", choices=("list",))

    p_serve = sub.add_parser("serve", help="JSON-lines environment server on stdio")
    p_serve.add_argument("scenario")
    p_serve.add_argument("--seed", type=int, default=0)
    p_serve.add_argument("--external", default="",
                         help="comma-separated roles driven by the client")
    p_serve.add_argument("--set", action="append", default=[], metavar="PATH=VALUE")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        # Client hung up mid-stream (e.g. serve piped into head); not an error.
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return 0
    except OSError as exc:
        print(f"error: {exc.strerror or exc}: {getattr(exc, 'filename', '')}",
              file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "presets":
        for name in list_presets():
            print(name)
        return 0

    spec = resolve_scenario(args.scenario)
    for w in spec.warnings:
        print(f"warning: {w}", file=sys.stderr)

    if args.command == "validate":
        print(f"{spec.name}: ok "
              f"({spec.economy.individual}, governments={list(spec.economy.governments)}, "
              f"bank={spec.economy.bank}, firms={spec.economy.firms})")
        return 0

    if getattr(args, "set", None):
        spec = _apply_overrides(spec, args.set)

    if args.command == "run":
        seeds = [args.seed] if args.seed is not None else spec.seeds
        out = _out_dir(args.out, f"out-{spec.name}")
        for seed in seeds:
            summary, _ = run_episode(
                spec, seed, out_dir=out,
                fmt=args.format, panel=args.panel or None,
                record_actions=Path(args.record_actions) if args.record_actions else None,
                max_steps=args.max_steps)
            if not args.quiet:
                print(json.dumps({k: v for k, v in summary.as_dict().items()},
                                 default=str))
        return 0

    if args.command == "sweep":
        grid = load_grid(args.grid)
        seeds = list(range(args.seeds))
        out = _out_dir(args.out, f"sweep-{spec.name}")
        rows = run_sweep(spec, grid, seeds, out_dir=out, max_steps=args.max_steps)
        failures = [r for r in rows if "error" in r]
        print(f"sweep: {len(rows)} rows -> {out/'sweep.csv'}"
              + (f" ({len(failures)} failed cells)" if failures else ""))
        return 0

    if args.command == "serve":
        external = frozenset(r.strip() for r in args.external.split(",") if r.strip())
        return serve_loop(spec, args.seed, external)

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
