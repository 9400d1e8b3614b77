"""Command-line entry point: one subcommand per experiment plus summarize."""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import DprelabError
from .config import COMMANDS, OUTPUT_ENV, build_config, load_config_file
from .runner import run, write_records
from .summarize import summarize

# (flag, type, nargs, help)
FLAGS = {
    "family": (str, None, "disorder family"),
    "params": (float, "*", "family parameters"),
    "beta": (float, None, "inverse temperature"),
    "betas": (float, "+", "list of inverse temperatures"),
    "N": (int, None, "lattice time horizon"),
    "N_grid": (int, "+", "list of lattice horizons"),
    "N_multiplier": (float, None, "N = ceil(multiplier * beta^-4) when no N_grid is given"),
    "min_multiplier": (float, None, "reject N below this multiple of beta^-4"),
    "T": (float, None, "macroscopic time"),
    "Ts": (float, "+", "list of macroscopic times"),
    "n": (int, None, "scaling parameter (block scale or intermediate-disorder n)"),
    "r": (float, None, "coupling multiplier"),
    "theta": (float, None, "fractional exponent"),
    "k_max": (int, None, "series truncation"),
    "c": (float, None, "tail index set constant"),
    "kind": (str, None, "point-to-line or point-to-point"),
    "draws": (int, None, "random draws per identity"),
    "tol": (float, None, "equality tolerance"),
    "replicas": (int, None, "number of replicas"),
    "seed": (int, None, "master seed"),
    "workers": (int, None, "worker processes"),
    "output": (str, None, f"records path ('-' for stdout; default under ${OUTPUT_ENV} or .)"),
}

COMMON = ("family", "params", "seed", "workers", "output")
PER_COMMAND = {
    "estimate-free-energy": ("beta", "N", "replicas"),
    "sweep-beta": ("betas", "N_grid", "N_multiplier", "min_multiplier", "replicas"),
    "fractional-upper": ("beta", "theta", "T", "n", "replicas"),
    "variance-profile": ("beta", "N_grid", "replicas"),
    "intermediate-disorder": ("T", "n", "r", "kind", "replicas"),
    "continuum-free-energy": ("T", "Ts", "n", "r", "kind", "replicas", "doubling"),
    "ck-check": ("beta", "N", "replicas"),
    "scaling-check": ("T", "n", "r", "replicas"),
    "second-moment-series": ("beta", "T", "k_max"),
    "verify-identities": ("draws", "tol"),
    "coarse-grain-tail": ("theta", "T", "Ts", "n", "c", "beta", "replicas"),
}


def _add_flags(p, names):
    for name in names:
        if name == "doubling":
            p.add_argument("--no-doubling", dest="doubling", action="store_const", const=False, default=None,
                           help="skip the n-doubling bias run")
            continue
        typ, nargs, hlp = FLAGS[name]
        flag = "--" + name.replace("_", "-")
        kw = {"type": typ, "default": None, "help": hlp, "dest": name}
        if nargs:
            kw["nargs"] = nargs
        p.add_argument(flag, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dprelab", description="Directed polymer experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        p.add_argument("--config", help="YAML or JSON config file; flags override it")
        _add_flags(p, PER_COMMAND[cmd] + COMMON)
    p = sub.add_parser("summarize")
    p.add_argument("records", help="JSON Lines records file")
    p.add_argument("--csv", help="write plot data here")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "summarize":
            text = summarize(args.records, args.csv)
            if text:
                print(text)
            return 0
        file_values = load_config_file(args.config) if args.config else {}
        overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
        cfg = build_config(args.command, file_values, overrides)
        out = cfg.output or cfg.default_output()
        n = write_records(run(cfg), out)
        if out != "-":
            print(f"wrote {n} records to {out}", file=sys.stderr)
        return 0
    except DprelabError as exc:
        field = getattr(exc, "field", None)
        where = f" [{field}]" if field else ""
        print(f"error{where}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
