"""Command-line entry point: ``rmdo {run,sweep,support,nodes-to-target,plot,enumerate}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import load_run_config, load_sweep_config
from .core import ConfigError, ContractError, StructuralError
from .games import REGISTRY, GameConfig, build_game
from . import runner

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_NOT_REACHED = 3


def _params(items: list[str]) -> dict[str, int]:
    out = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"game parameter {item!r} must look like key=value")
        try:
            out[key.strip()] = int(val)
        except ValueError:
            raise ConfigError(f"game parameter {key!r} must be an integer, got {val!r}") from None
    return out


def _print_summary(directory: Path, summary: dict) -> None:
    e = summary["final_exploitability_las"]
    print(f"{directory}: {summary['stop_reason']} after {summary['iterations']} iterations, "
          f"{summary['nodes']['reported']} nodes, exploitability "
          f"{'n/a' if e is None else format(e, '.6g')}, windows {summary['windows']}")


def cmd_run(args) -> int:
    if args.resume:
        # a config given alongside --resume replaces the stored one (e.g. a larger budget)
        cfg = load_run_config(args.config) if args.config else None
        directory, summary = runner.resume_run(args.resume, cfg)
    else:
        cfg = load_run_config(args.config)
        directory, summary = runner.execute_run(cfg, args.output_root)
    _print_summary(directory, summary)
    if summary["target_reached"] is False:
        print("target exploitability not reached", file=sys.stderr)
        return EXIT_NOT_REACHED
    return EXIT_OK


def cmd_sweep(args) -> int:
    sweep = load_sweep_config(args.config)
    if args.workers:
        sweep = type(sweep)(sweep.base, sweep.axes, sweep.name, sweep.max_runs, args.workers)
    results = runner.execute_sweep(sweep, args.output_root)
    missed = 0
    for directory, summary in results:
        _print_summary(Path(directory), summary)
        missed += summary["target_reached"] is False
    return EXIT_NOT_REACHED if missed else EXIT_OK


def cmd_support(args) -> int:
    out = runner.run_support(args.run_dir, args.target, args.threshold)
    if not out.reached:
        e = "n/a" if out.exploitability is None else format(out.exploitability, ".6g")
        print(f"not reached: final exploitability {e} > target {args.target:g}")
        return EXIT_NOT_REACHED
    r = out.report
    if args.json:
        print(json.dumps({"exploitability": out.exploitability, "min_pct": r.min_pct, "avg_pct": r.avg_pct,
                          "mean_ratio": r.mean_ratio, "degenerate": r.degenerate}, indent=2))
    else:
        print(f"exploitability {out.exploitability:.6g}")
        print(f"min support {100 * r.min_pct:.1f}%")
        print(f"avg support {100 * r.avg_pct:.1f}%")
        if r.degenerate:
            print("warning: some information states have empty support")
    return EXIT_OK


def cmd_nodes_to_target(args) -> int:
    table = runner.nodes_to_target(args.run_dirs, args.targets)
    if not table:
        print("no runs found", file=sys.stderr)
        return EXIT_ERROR
    print(runner.format_target_table(table, args.targets, args.scale), end="")
    return EXIT_OK


def cmd_plot(args) -> int:
    for path in runner.plot_runs(args.run_dirs, args.out, args.points, args.svg, args.title):
        print(path)
    return EXIT_OK


def cmd_enumerate(args) -> int:
    if args.config:
        game = build_game(load_run_config(args.config).game)
    else:
        if not args.game:
            raise ConfigError("give a game name or --config")
        game = build_game(GameConfig(args.game, _params(args.param)))
    stats = runner.enumerate_game(game)
    if args.json:
        print(json.dumps(stats, indent=2))
    else:
        for k, v in stats.items():
            print(f"{k}: {v}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rmdo", description="Regret-minimizing double oracle experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", help="execute one run from a config file")
    s.add_argument("config", nargs="?", help="run config (TOML)")
    s.add_argument("--output-root", help=f"directory for run outputs (default ${runner.OUTPUT_ENV} or ./runs)")
    s.add_argument("--resume", metavar="RUN_DIR", help="continue a run from its snapshot (with a config: under its stop condition)")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="execute the grid of a sweep config")
    s.add_argument("config")
    s.add_argument("--output-root")
    s.add_argument("--workers", type=int, help="override the number of worker processes")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("support", help="support percentages of a run's final average strategy")
    s.add_argument("run_dir")
    s.add_argument("--target", type=float, default=1e-3, help="required exploitability (default 1e-3)")
    s.add_argument("--threshold", type=float, default=1e-9, help="probability counted as support")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_support)

    s = sub.add_parser("nodes-to-target", help="reported nodes needed to reach exploitability targets")
    s.add_argument("run_dirs", nargs="+", help="run directories or parents of run directories")
    s.add_argument("--targets", type=float, nargs="+", required=True)
    s.add_argument("--scale", type=float, default=1e6, help="divide node counts by this (default 1e6)")
    s.set_defaults(func=cmd_nodes_to_target)

    s = sub.add_parser("plot", help="exploitability versus visited-node series")
    s.add_argument("run_dirs", nargs="+")
    s.add_argument("--out", required=True, help="output path stem (.csv/.json/.svg are appended)")
    s.add_argument("--points", type=int, default=200)
    s.add_argument("--svg", action="store_true", help="also render an SVG figure")
    s.add_argument("--title")
    s.set_defaults(func=cmd_plot)

    s = sub.add_parser("enumerate", help="size statistics of a game")
    s.add_argument("game", nargs="?", choices=sorted(REGISTRY))
    s.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    s.add_argument("--config", help="take the game from a run config")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_enumerate)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run" and not (args.config or args.resume):
        parser.error("run needs a config file or --resume")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ContractError, StructuralError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
