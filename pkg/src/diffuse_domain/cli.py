"""``dd`` command line: run, sweep, verify, oracle."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .harness import run_oracle, run_single, run_sweep, verify_lemmas, write_report


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dd", description="Diffuse domain solver and convergence harness.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "solve for the first epsilon of the config"),
                        ("sweep", "solve for every epsilon and fit rates"),
                        ("verify", "profile assumptions and delta-functional battery"),
                        ("oracle", "sharp-interface reference on the disc")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="TOML or JSON configuration file")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads (default: 1)")
        sp.add_argument("--seed", type=int, default=None, help="seed for randomized probes (u64)")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    overrides = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
            return 2
        overrides["seed"] = args.seed
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc), "key": exc.key, "line": exc.line}),
              file=sys.stderr)
        return 2
    out = Path(args.out)
    try:
        if args.command == "run":
            report = run_single(cfg, threads=args.threads)
            paths = write_report(report, out)
            print(f"wrote {paths['json']}")
        elif args.command == "sweep":
            report = run_sweep(cfg, threads=args.threads)
            paths = write_report(report, out)
            for key, fit in report["slopes"].items():
                print(f"{key}: slope {fit['slope']:.3f} +/- {fit['ci95']:.3f}")
            print(f"wrote {paths['csv']}")
        elif args.command == "verify":
            result = verify_lemmas(cfg)
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "lemmas.json", "w") as fh:
                json.dump(result, fh, indent=2)
                fh.write("\n")
            for name, prop in result["properties"].items():
                print(f"{'PASS' if prop['passed'] else 'FAIL'} {name}")
            return 0 if result["passed"] else 1
        elif args.command == "oracle":
            summary = run_oracle(cfg, out)
            print(json.dumps(summary, indent=2))
    except Exception as exc:  # reported as structured error with nonzero exit
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
