"""Command-line driver.

Subcommands:
    run <config.json>     execute a scenario config
    builtin <name>        execute a built-in scenario
    analyze <graph.json>  edge selection probabilities + bound report
    fixed-point <delta>   root of p = (1-p)^(2*delta)

Exit codes: 0 success, 1 config error, 2 engine error, 3 invariant
violation detected.
"""

from __future__ import annotations

import argparse
import json
import sys

from .graph import GraphFormatError, parse_graph
from .oracle import solve_fixed_point
from .protocol import InvariantViolation, ProtocolError
from .registers import EngineError
from .scenarios import (
    BUILTIN_SCENARIOS,
    ConfigError,
    builtin_scenario,
    load_config,
    render_report,
    run_scenario,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ENGINE = 2
EXIT_INVARIANT = 3


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--samples", type=int, default=None,
                        help="override the classical sampling count")

    parser = argparse.ArgumentParser(
        prog="diffwalk",
        description="Multi-walker token diffusion on graphs: quantum engine, "
        "classical oracle, and edge-selection analysis.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[common], help="run a scenario config file")
    p_run.add_argument("config", help="path to a scenario JSON file")

    p_builtin = sub.add_parser("builtin", parents=[common], help="run a built-in scenario")
    p_builtin.add_argument("name", choices=BUILTIN_SCENARIOS)

    p_analyze = sub.add_parser("analyze", parents=[common],
                               help="edge probabilities and bound report for a graph")
    p_analyze.add_argument("graph", help="path to a graph JSON file")

    p_fp = sub.add_parser("fixed-point", parents=[common],
                          help="solve p = (1-p)^(2*delta)")
    p_fp.add_argument("delta", type=int)
    return parser


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg.seed = args.seed
    if args.samples is not None:
        cfg.samples = args.samples
    return cfg


def _dispatch(args) -> str:
    if args.command == "run":
        cfg = _apply_overrides(load_config(args.config), args)
        return render_report(run_scenario(cfg), args.format)
    if args.command == "builtin":
        cfg = _apply_overrides(builtin_scenario(args.name), args)
        return render_report(run_scenario(cfg), args.format)
    if args.command == "analyze":
        try:
            text = open(args.graph).read()
        except OSError as exc:
            raise ConfigError("graph", f"cannot read graph file: {exc}") from None
        graph = parse_graph(text)
        from .scenarios import _analysis_sections

        edge_probs, bound = _analysis_sections(graph)
        doc = {"edge_probabilities": edge_probs, "bound_check": bound}
        return json.dumps(doc, indent=2, sort_keys=True)
    if args.command == "fixed-point":
        if args.delta < 0:
            raise ConfigError("delta", "must be >= 0")
        p = solve_fixed_point(args.delta)
        doc = {
            "delta": args.delta,
            "p": f"{p:.12g}",
            "residual": f"{abs(p - (1 - p) ** (2 * args.delta)):.3g}",
        }
        return json.dumps(doc, indent=2, sort_keys=True)
    raise ConfigError("command", f"unknown command {args.command!r}")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; that code means engine error here
        return EXIT_OK if not exc.code else EXIT_CONFIG
    try:
        print(_dispatch(args))
        return EXIT_OK
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (EngineError, ProtocolError) as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    except (ConfigError, GraphFormatError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
