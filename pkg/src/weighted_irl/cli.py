"""Command-line driver: ``weighted-irl {gen,train,eval,all,render} CONFIG``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiment as ex
from .envs import EnvBundle, render_highway, render_objectworld

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weighted-irl",
        description="Weighted maximum-entropy IRL experiment sweeps.",
        epilog=f"Worker count is read from ${ex.WORKERS_ENV} (default 1).",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("gen", "generate environments and demonstrations"),
        ("train", "train every (algorithm, seed, n_demos) cell"),
        ("eval", "evaluate models; write results.csv, summary.json, figures"),
        ("all", "gen, train and eval in sequence"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="experiment JSON config")
        p.add_argument("-o", "--output", help="output directory (overrides config)")
    p = sub.add_parser("render", help="print a text rendering of an environment file")
    p.add_argument("env_file", help="EnvBundle JSON file")
    return parser


def _render(path: str) -> int:
    with open(path) as fh:
        env = EnvBundle.from_dict(json.load(fh))
    print(render_objectworld(env) if env.kind == "objectworld" else render_highway(env))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "render":
        return _render(args.env_file)
    try:
        cfg = ex.load_config(args.config, args.output)
    except (OSError, ex.ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "gen":
        paths = ex.cmd_gen(cfg)
        print(f"wrote {len(paths)} files under {cfg.output}")
        return EXIT_OK
    if args.command == "train":
        failures = ex.cmd_train(cfg)
        for alg, k, n, msg in failures:
            print(f"FAILED {alg} seed={k} n={n}: {msg}", file=sys.stderr)
        return EXIT_PARTIAL if failures else EXIT_OK
    if args.command == "eval":
        rows, problems = ex.cmd_eval(cfg)
        for msg in problems:
            print(f"FAILED {msg}", file=sys.stderr)
        print(f"wrote {len(rows)} rows to {cfg.output}/results.csv")
        return EXIT_PARTIAL if problems else EXIT_OK
    code = ex.cmd_all(cfg)
    print(f"sweep finished under {cfg.output} (exit {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
