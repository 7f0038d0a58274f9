"""``stab`` command line entry point."""
from __future__ import annotations

import argparse
import sys

from . import runner
from .errors import ConfigError, StabError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stab", description="POD reduced-order Riccati feedback experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (("run", "closed-loop sweep over (n, eps)"), ("lemmas", "POD convergence and block-system suites")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config")
        p.add_argument("--out", help="override output_dir from the config")
    p = sub.add_parser("plot", help="line plot of a numeric CSV as SVG")
    p.add_argument("csv")
    p.add_argument("svg")
    p.add_argument("--logy", action="store_true")
    p = sub.add_parser("model", help="print spectrum, split and Kalman ranks")
    p.add_argument("config")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "plot":
            runner.cmd_plot(args.csv, args.svg, args.logy)
            return EXIT_OK
        cfg = runner.load_config(args.config)
        if args.command == "model":
            sys.stdout.write(runner.cmd_model(cfg))
            return EXIT_OK
        cmd = runner.cmd_stabilize if args.command == "run" else runner.cmd_lemmas
        manifest = cmd(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StabError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for r in manifest.runs:
        if r.get("status") == "error":
            print(f"solver error: {r['error']}: {r['message']}", file=sys.stderr)
        elif "verdict" in r:
            print(f"n={r['n']} eps={r['eps']:g}: {r['verdict']}")
        elif "section" in r:
            state = {True: "pass", False: "FAIL"}.get(r["pass"], "reported")
            print(f"{r['section']}: {state}")
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
