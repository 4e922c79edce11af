"""Command-line interface: ``flagcalc <command> [options]``.

Commands
--------
terms   LaTeX right-hand-side terms of a tree, one per line
check   exponent constraints (exit 2 if any fails)
eval    evaluate a tree or symbol on seeded random inputs
verify  LHS/RHS ratio experiment (``--experiment leibniz|scaling|smoothing``)
decay   Fourier coefficients of a localized symbol
lemma   empirical constants of the fixed-scale bilinear bounds
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import (EXIT_CONFIG, ConfigError, execute, load_config)
from .dsl import (DSLError, DSLStructureError, DSLSyntaxError, parse_forest, parse_tree,
                  print_tree, tree_from_json, tree_to_json)

COMMANDS = ("terms", "check", "eval", "verify", "decay", "lemma")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected M[,M...], got {text!r}") from None


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _exponents(text: str):
    rows = [r for r in text.split(";") if r.strip()]
    parsed = [[x.strip() for x in r.split(",")] for r in rows]
    if len(parsed) == 1 and len(parsed[0]) == 1:
        return parsed[0][0]
    return parsed


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=_u64, help="base seed (u64)")
    common.add_argument("--grid", type=_ints, help="grid sizes M[,M...]")
    common.add_argument("--out", help="output directory for reports")
    common.add_argument("--latex", action="store_true", help="render constraints in LaTeX")
    common.add_argument("-N", "--parameters", type=int, help="number of parameters")
    common.add_argument("--exponents", type=_exponents,
                        help="p for all inputs, or per input 'p1,p2;q1,q2;...'")

    p = argparse.ArgumentParser(prog="flagcalc", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("terms", "check", "eval", "verify"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("expr", nargs="?", help="tree expression, e.g. 'D[1](f1*f2)'")
        if name in ("eval", "verify"):
            s.add_argument("--trials", type=int)
            s.add_argument("--sigma", type=float)
            s.add_argument("--profile", choices=("band", "block", "sparse"))
        if name == "verify":
            s.add_argument("--experiment", choices=("leibniz", "scaling", "smoothing"))
            s.add_argument("--smoothing", type=float, nargs="+")
    d = sub.add_parser("decay", parents=[common])
    d.add_argument("--symbol", choices=("diagonal", "commutator"))
    d.add_argument("--alpha", type=float)
    d.add_argument("--ell", type=int)
    d.add_argument("--truncation", type=int)
    d.add_argument("--method", choices=("gauss", "trapezoid"))
    l = sub.add_parser("lemma", parents=[common])
    l.add_argument("--alpha", type=float)
    l.add_argument("--p1")
    l.add_argument("--p2")
    l.add_argument("--trials", type=int)
    return p


def _config_from_args(args) -> tuple[dict, str]:
    cfg = load_config(args.config) if args.config else {}
    exp = cfg.get("experiment") or {}
    exp = {"name": exp} if isinstance(exp, str) else dict(exp)
    if getattr(args, "expr", None):
        for k in ("tree", "forest", "symbol"):
            cfg.pop(k, None)
        cfg["tree"] = args.expr
    if args.parameters is not None:
        cfg["N"] = args.parameters
    if args.exponents is not None:
        cfg["exponents"] = args.exponents
    for key in ("trials", "sigma", "profile", "smoothing", "symbol", "alpha", "ell",
                "truncation", "method", "p1", "p2"):
        v = getattr(args, key, None)
        if v is not None:
            exp[key] = v
    if args.command == "lemma" and args.grid is not None:
        exp["grid"] = args.grid
    name = args.command
    if name == "verify":
        name = getattr(args, "experiment", None) or exp.get("name")
        if name not in ("leibniz", "scaling", "smoothing", "verify"):
            name = "leibniz"
    cfg["experiment"] = exp
    return cfg, name


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg, name = _config_from_args(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out
    if out is None and args.config and "out" not in cfg:
        out = Path(args.config).with_suffix("").as_posix() + "-out"
    grid = args.grid if args.command != "lemma" else None
    return execute(cfg, name, out, args.latex, sys.stdout, args.seed, grid)


__all__ = ["main", "parse_tree", "parse_forest", "print_tree", "tree_to_json", "tree_from_json",
           "DSLError", "DSLSyntaxError", "DSLStructureError", "COMMANDS"]
