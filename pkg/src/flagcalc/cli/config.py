"""JSON experiment configs: loading, execution and report files.

A config is a JSON object with some of the keys

``tree`` | ``forest`` | ``symbol``
    the operator: an expression string (or its JSON form), a list of
    one-parameter expressions, or ``{"name": ..., <params>}``.
``N``
    number of parameters (inferred from the operator if omitted).
``grid``
    ``M`` or ``[M_1, ..., M_N]``.
``exponents``
    one exponent (all inputs, all parameters), one per input, or a list of
    per-input lists; ``"inf"`` is accepted.
``experiment``
    ``{"name": ..., <options>}`` with name one of ``EXPERIMENTS``.
``out``
    output directory for the report files.

Exit codes: 0 success, 1 unreadable or malformed config, 2 exponent
constraints fail, 3 budget exceeded.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import sys
from pathlib import Path

from ..decompose import commutator_localized_symbol, diagonal_symbol, symbol_fourier_expand
from ..flagop import builtin_symbols, eval_operator
from ..flagtree import (ExponentTuple, FlagForest, FlagTree, check_exponents,
                        check_forest_exponents, check_symbol_exponents, rhs_terms)
from ..norms import mixed_norm
from ..spectral import BudgetExceeded, GridSpec, dump_grid
from ..verify import (ConstraintFailure, Experiment, ExponentWindowError, lemma_bounds_sweep,
                      leibniz_ratio, scaling_probe)
from .dsl import DSLError, parse_forest, parse_tree, tree_from_json

EXIT_OK, EXIT_CONFIG, EXIT_CONSTRAINT, EXIT_BUDGET = 0, 1, 2, 3

EXPERIMENTS = ("terms", "check", "eval", "leibniz", "scaling", "smoothing", "lemma", "decay")
_ALIASES = {"verify": "leibniz"}


class ConfigError(ValueError):
    pass


def config_hash(cfg: dict) -> str:
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON in {path}: {e.msg} (line {e.lineno}, column {e.colno})") from None
    if not isinstance(cfg, dict):
        raise ConfigError("a config must be a JSON object")
    return cfg


# ---------------------------------------------------------------------------
# config pieces

def build_operator(cfg: dict):
    keys = [k for k in ("tree", "forest", "symbol") if k in cfg]
    if len(keys) > 1:
        raise ConfigError(f"give only one of tree/forest/symbol, got {keys}")
    if not keys:
        return None
    N = cfg.get("N")
    if "tree" in cfg:
        t = cfg["tree"]
        tree = parse_tree(t, N) if isinstance(t, str) else tree_from_json(t)
        if N is not None and tree.parameters != N:
            raise ConfigError(f"tree has {tree.parameters} parameters, N = {N}")
        return tree
    if "forest" in cfg:
        if not isinstance(cfg["forest"], list):
            raise ConfigError("forest must be a list of expressions")
        return parse_forest(cfg["forest"])
    sym = cfg["symbol"]
    if isinstance(sym, str):
        sym = {"name": sym}
    params = {k: v for k, v in sym.items() if k != "name"}
    if "tree" in params:
        params["tree"] = parse_tree(params["tree"], N)
    try:
        return builtin_symbols(sym["name"], **params)
    except KeyError as e:
        raise ConfigError(f"symbol parameter missing: {e}") from None


def _parameters(op, cfg) -> int:
    if op is not None:
        return op.parameters
    return int(cfg.get("N", 1))


def build_grid(cfg: dict, N: int, override=None) -> GridSpec:
    g = override if override is not None else cfg.get("grid", 16)
    sizes = [g] * N if isinstance(g, int) else list(g)
    if len(sizes) == 1 and N > 1:
        sizes = sizes * N
    if len(sizes) != N:
        raise ConfigError(f"grid has {len(sizes)} sizes, operator has {N} parameters")
    budget = cfg.get("budget")
    return GridSpec(tuple(sizes), **({"budget": int(budget)} if budget else {}))


def build_exponents(cfg: dict, n: int, N: int) -> ExponentTuple | None:
    e = cfg.get("exponents")
    if e is None:
        return None
    r = None
    if isinstance(e, dict):
        r = e.get("r")
        e = e["p"]
    if not isinstance(e, list):
        e = [e] * n
    rows = [row if isinstance(row, list) else [row] * N for row in e]
    try:
        return ExponentTuple(rows, N, r)
    except ValueError as err:
        raise ConfigError(str(err)) from None


def run_check(op, exps, smoothing=None):
    if isinstance(op, FlagTree):
        return check_exponents(op, exps)
    if isinstance(op, FlagForest):
        return check_forest_exponents(op, exps)
    return check_symbol_exponents(op.n, exps, smoothing)


# ---------------------------------------------------------------------------
# report writers

def _csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _num(x) -> str:
    return repr(float(x))


def constraint_latex(c) -> str:
    left = " + ".join(f"\\frac{{1}}{{p_{{{l}}}^{{{c.parameter}}}}}" for l in c.leaves)
    parts = [f"1 + s_{{{g}}}" if c.label == "s" else f"1 + \\beta^{{({c.vertex})}}_{{{g}}}"
             for g in c.governing]
    right = parts[0] if len(parts) == 1 else "\\min(" + ", ".join(parts) + ")"
    return f"{left} < {right}"


# ---------------------------------------------------------------------------
# execution

class _Run:
    def __init__(self, cfg: dict, out, latex: bool, stream):
        self.cfg = cfg
        self.out = Path(out) if out is not None else None
        self.latex = latex
        self.stream = stream
        self.hash = config_hash(cfg)

    def say(self, line: str = "") -> None:
        print(line, file=self.stream)

    def outdir(self) -> Path | None:
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)
        return self.out


def execute(cfg: dict, name: str | None = None, out=None, latex: bool = False,
            stream=None, seed=None, grid=None) -> int:
    """Run the experiment of an already-loaded config; see the module docstring."""
    stream = stream or sys.stdout
    try:
        return _execute(cfg, name, out, latex, stream, seed, grid)
    except ConstraintFailure as e:
        print(f"constraint check FAILED: {e}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except BudgetExceeded as e:
        print(f"budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, DSLError, ExponentWindowError, KeyError, TypeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


def _execute(cfg, name, out, latex, stream, seed, grid) -> int:
    raw = cfg.get("experiment") or {}
    exp_cfg = {"name": raw} if isinstance(raw, str) else dict(raw)
    name = name or exp_cfg.get("name") or "check"
    name = _ALIASES.get(name, name)
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; expected one of {EXPERIMENTS}")
    if seed is not None:
        exp_cfg["seed"] = seed
    run_cfg = dict(cfg, experiment={**exp_cfg, "name": name})
    if grid is not None:
        run_cfg["grid"] = grid
    run = _Run(run_cfg, out if out is not None else cfg.get("out"), latex, stream)

    if name == "lemma":
        return _lemma(run, exp_cfg)
    if name == "decay":
        return _decay(run, exp_cfg)

    op = build_operator(run_cfg)
    if op is None:
        raise ConfigError("config needs a tree, forest or symbol")
    N = _parameters(op, run_cfg)
    exps = build_exponents(run_cfg, op.n, N)
    smoothing = exp_cfg.get("smoothing")
    if smoothing is not None and not isinstance(smoothing, list):
        smoothing = [smoothing] * N

    if exps is not None:
        res = run_check(op, exps, smoothing)
        _report_check(run, res)
        if not res.passed:
            return EXIT_CONSTRAINT
    elif name not in ("terms", "eval"):
        raise ConfigError(f"experiment {name!r} needs exponents")

    if name == "check":
        return EXIT_OK
    if name == "terms":
        return _terms(run, op, exps)
    spec = build_grid(run_cfg, N)
    if name == "eval":
        return _eval(run, op, spec, exp_cfg)
    exp = Experiment(
        op, exps, spec, trials=int(exp_cfg.get("trials", 100)), seed=int(exp_cfg.get("seed", 0)),
        sigma=float(exp_cfg.get("sigma", 3.0)), profile=exp_cfg.get("profile", "band"),
        scales=tuple(exp_cfg["scales"]) if "scales" in exp_cfg else None,
        modes=int(exp_cfg.get("modes", 4)),
        zero_mean=bool(exp_cfg.get("zero_mean", name == "smoothing")),
        real=bool(exp_cfg.get("real", True)),
        smoothing=tuple(float(s) for s in smoothing) if smoothing is not None else None,
        dilations=tuple(exp_cfg.get("dilations", (1,))),
        budget=int(exp_cfg.get("budget", 10 ** 8)))
    if name == "scaling":
        return _scaling(run, exp)
    return _leibniz(run, exp)


def _report_check(run: _Run, res) -> None:
    for c in res.constraints:
        mark = "ok  " if c.holds else "FAIL"
        text = constraint_latex(c) if run.latex else c.render()
        run.say(f"{mark} {text}   [{c.lhs} vs {c.bound}]")
    for v in res.violations:
        if v.kind != "vertex":
            run.say(f"FAIL {v}")
    run.say("PASS" if res.passed else "FAIL")
    d = run.outdir()
    if d is not None:
        _json(d / "check.json", {
            "passed": res.passed,
            "constraints": [{"vertex": c.vertex, "parameter": c.parameter, "text": c.render(),
                             "lhs": str(c.lhs), "bound": str(c.bound), "holds": c.holds}
                            for c in res.constraints],
            "violations": [str(v) for v in res.violations],
            "config_hash": run.hash})


def _terms(run: _Run, op, exps) -> int:
    if not isinstance(op, (FlagTree, FlagForest)):
        raise ConfigError("terms needs a tree or a forest")
    terms = rhs_terms(op, exps)
    for t in terms:
        run.say(t.latex())
    d = run.outdir()
    if d is not None:
        _csv(d / "terms.csv", ["index", "term", "latex"],
             [[i, t.text(), t.latex()] for i, t in enumerate(terms, start=1)])
        _json(d / "summary.json", {"terms": len(terms), "config_hash": run.hash})
    return EXIT_OK


def _eval(run: _Run, op, spec, exp_cfg) -> int:
    exp = Experiment(op, ExponentTuple.uniform(op.n, spec.N, 2), spec, trials=1,
                     seed=int(exp_cfg.get("seed", 0)), sigma=float(exp_cfg.get("sigma", 3.0)),
                     profile=exp_cfg.get("profile", "band"),
                     scales=tuple(exp_cfg["scales"]) if "scales" in exp_cfg else None,
                     modes=int(exp_cfg.get("modes", 4)),
                     zero_mean=bool(exp_cfg.get("zero_mean", False)),
                     budget=int(exp_cfg.get("budget", 10 ** 8)))
    out = eval_operator(op, exp.inputs(0), exp.budget)
    norm = mixed_norm(out, [2.0] * spec.N)
    run.say(f"L2 norm of output on {'x'.join(map(str, out.spec.sizes))} grid: {norm!r}")
    d = run.outdir()
    if d is not None:
        dump_grid(out, d / "output.bin")
        _json(d / "summary.json", {"l2": norm, "grid": list(out.spec.sizes),
                                   "config_hash": run.hash})
    return EXIT_OK


def _leibniz(run: _Run, exp: Experiment) -> int:
    rep = leibniz_ratio(exp)
    summary = {**rep.summary(), "config_hash": run.hash, "experiment_hash": rep.config_hash}
    run.say(json.dumps(summary, sort_keys=True))
    d = run.outdir()
    if d is not None:
        (d / "ratios.csv").write_text(rep.csv_text(), encoding="utf-8", newline="")
        _json(d / "summary.json", summary)
    return EXIT_OK


def _scaling(run: _Run, exp: Experiment) -> int:
    reps = scaling_probe(exp)
    rows = [[r.m, _num(r.lhs_factor), _num(r.lhs_expected), _num(r.ratio_before),
             _num(r.ratio_after), _num(r.ratio_change), _num(r.max_factor_error)] for r in reps]
    for r in reps:
        run.say(f"m={r.m}: ratio change {r.ratio_change:.3e}, factor error {r.max_factor_error:.3e}")
    d = run.outdir()
    if d is not None:
        _csv(d / "scaling.csv", ["m", "lhs_factor", "lhs_expected", "ratio_before", "ratio_after",
                                 "ratio_change", "max_factor_error"], rows)
        _json(d / "summary.json", {"max_ratio_change": max(r.ratio_change for r in reps),
                                   "config_hash": run.hash})
    return EXIT_OK


def _lemma(run: _Run, exp_cfg: dict) -> int:
    grid = exp_cfg.get("grid", run.cfg.get("grid", [32, 64]))
    p1 = _exp_value(exp_cfg.get("p1", 2))
    p2 = _exp_value(exp_cfg.get("p2", 2))
    rep = lemma_bounds_sweep(float(exp_cfg.get("alpha", 0.5)), p1, p2, grid,
                             int(exp_cfg.get("trials", 4)), int(exp_cfg.get("seed", 0)))
    rows = []
    for M, consts in rep.constants.items():
        for b, v in consts.items():
            k, l = rep.worst[M][b] or (None, None)
            rows.append([M, b, _num(v), "" if k is None else k, "" if l is None else l])
            run.say(f"M={M} {b}: {v:.6g}")
    d = run.outdir()
    if d is not None:
        _csv(d / "lemma.csv", ["M", "bound", "constant", "k", "l"], rows)
        _json(d / "summary.json", {
            "finite": rep.finite(),
            "trend": {b: rep.trend(b) for b in next(iter(rep.constants.values()))},
            "config_hash": run.hash})
    return EXIT_OK


def _exp_value(p) -> float:
    if isinstance(p, str) and p.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(p)


def _decay(run: _Run, exp_cfg: dict) -> int:
    kind = exp_cfg.get("symbol", "diagonal")
    alpha = float(exp_cfg.get("alpha", 0.5))
    ell = int(exp_cfg.get("ell", 0))
    if kind == "diagonal":
        sym = diagonal_symbol(alpha, ell)
        method = exp_cfg.get("method", "gauss")
    elif kind == "commutator":
        sym = commutator_localized_symbol(alpha, ell)
        method = exp_cfg.get("method", "trapezoid")
    else:
        raise ConfigError(f"unknown decay symbol {kind!r}; use diagonal or commutator")
    T = int(exp_cfg.get("truncation", 512 if kind == "diagonal" else 256))
    ex = symbol_fourier_expand(sym, truncation=T, method=method)
    inner, outer = ex.weighted_decay()
    summary = {"symbol": ex.name, "truncation": T, "residual": ex.residual,
               "decay_exponent": ex.decay_exponent, "weighted_inner": inner,
               "weighted_outer": outer, "config_hash": run.hash}
    run.say(json.dumps(summary, sort_keys=True))
    d = run.outdir()
    if d is not None:
        with open(d / "coefficients.csv", "w", newline="", encoding="utf-8") as fh:
            ex.to_csv(fh)
        _json(d / "summary.json", summary)
    return EXIT_OK


def run_config(path, name: str | None = None, out=None, latex: bool = False, stream=None,
               seed=None, grid=None) -> int:
    """Load a JSON config and run its experiment; returns the exit code."""
    try:
        cfg = load_config(path)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if out is None and "out" not in cfg:
        out = Path(path).with_suffix("").as_posix() + "-out"
    return execute(cfg, name, out, latex, stream, seed, grid)
