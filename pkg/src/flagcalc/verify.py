"""Numerical harnesses for Leibniz-type inequalities.

Every harness measures a left-hand side (a mixed norm of an operator output)
against a right-hand side built from norms of the inputs, and reports the
ratio.  No constants are asserted; the reports record what was measured.

All norms are taken on the dealiased grid ``spec.padded(n)`` where the
operator output lives, so inputs and outputs are sampled at the same points.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decompose import commutator_apply
from .flagop import SymbolFn, eval_operator
from .flagtree import (ExponentCheck, ExponentTuple, FlagForest, FlagTree, RHSTerm,
                       check_exponents, check_forest_exponents, check_symbol_exponents,
                       depth_one_terms, format_exponent, format_tree, rhs_terms)
from .norms import lebesgue_norm, mixed_norm
from .spectral import (GridFunction, GridSpec, band_project, dilate, fractional_derivative,
                       lp_project, random_band_limited, random_block, random_sparse)


class ConstraintFailure(ValueError):
    """The exponents of an experiment fail the operator's admissibility check."""

    def __init__(self, check: ExponentCheck):
        self.check = check
        super().__init__("; ".join(str(v) for v in check.violations))


class ExponentWindowError(ValueError):
    pass


PROFILES = ("band", "block", "sparse")


@dataclass
class Experiment:
    """One Leibniz-ratio experiment.

    Parameters
    ----------
    operator : FlagTree, FlagForest or SymbolFn
    exponents : ExponentTuple
        Input exponents p_l^j; the output is measured in L^r with r from Hölder.
    grid : GridSpec
    trials, seed : int
        Trial ``t`` draws input ``l`` from the stream ``SeedSequence([seed, t, l])``.
    sigma : float
        Gaussian frequency profile width for ``profile="band"``.
    profile : str
        ``"band"`` (smooth random), ``"block"`` (one dyadic block at ``scales``)
        or ``"sparse"`` (``modes`` random frequencies).
    smoothing : tuple, optional
        Orders s_j applied to the output of a negative-order symbol; the RHS
        then carries orders s_j - nu_j.
    dilations : tuple
        Exponents m for the spectral dilation probe (factor 2^m per axis).
    """
    operator: object
    exponents: ExponentTuple
    grid: GridSpec
    trials: int = 100
    seed: int = 0
    sigma: float = 3.0
    profile: str = "band"
    scales: tuple | None = None
    modes: int = 4
    zero_mean: bool = False
    real: bool = True
    smoothing: tuple | None = None
    dilations: tuple = (1,)
    budget: int = 10 ** 8
    workers: int = 1
    terms: list | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"profile must be one of {PROFILES}")
        if self.trials < 1:
            raise ValueError("need at least one trial")

    @property
    def n(self) -> int:
        return self.operator.n

    def check(self) -> ExponentCheck:
        op = self.operator
        if isinstance(op, FlagTree):
            return check_exponents(op, self.exponents)
        if isinstance(op, FlagForest):
            return check_forest_exponents(op, self.exponents)
        if isinstance(op, SymbolFn):
            return check_symbol_exponents(op.n, self.exponents, self.smoothing)
        raise TypeError(f"cannot build an experiment for {type(op).__name__}")

    def validate(self) -> None:
        res = self.check()
        if not res.passed:
            raise ConstraintFailure(res)

    def rhs(self) -> list[RHSTerm]:
        if self.terms is not None:
            return list(self.terms)
        op = self.operator
        if isinstance(op, (FlagTree, FlagForest)):
            return rhs_terms(op, self.exponents)
        if self.smoothing is not None:
            # op.orders holds -nu_j for a negative-order symbol
            orders = [s + b for s, b in zip(self.smoothing, op.orders)]
        else:
            orders = list(op.orders)
        return depth_one_terms(op.n, orders, self.exponents)

    def inputs(self, trial: int) -> list[GridFunction]:
        out = []
        for l in range(1, self.n + 1):
            ss = np.random.SeedSequence([self.seed, trial, l])
            if self.profile == "band":
                f = random_band_limited(self.grid, ss, self.sigma, self.real, self.zero_mean)
            elif self.profile == "block":
                scales = self.scales or (1,) * self.grid.N
                f = random_block(self.grid, ss, scales, self.real)
            else:
                f = random_sparse(self.grid, ss, self.modes, real=self.real,
                                  zero_mean=self.zero_mean)
            out.append(f)
        return out

    def describe(self) -> dict:
        """A JSON-ready description; its hash identifies the experiment."""
        op = self.operator
        if isinstance(op, FlagTree):
            opd = {"tree": format_tree(op), "N": op.parameters}
        elif isinstance(op, FlagForest):
            opd = {"forest": [format_tree(t) for t in op.trees]}
        else:
            opd = {"symbol": op.name, "n": op.n,
                   "params": {k: list(v) if isinstance(v, tuple) else v
                              for k, v in op.meta.items() if k != "tree"}}
        ps = [[format_exponent(self.exponents.p(l, j)) for j in range(1, self.exponents.parameters + 1)]
              for l in range(1, self.exponents.n + 1)]
        return {
            "operator": opd, "exponents": ps, "grid": list(self.grid.sizes),
            "trials": self.trials, "seed": self.seed, "sigma": self.sigma,
            "profile": self.profile, "scales": list(self.scales) if self.scales else None,
            "modes": self.modes, "zero_mean": self.zero_mean, "real": self.real,
            "smoothing": list(self.smoothing) if self.smoothing is not None else None,
            "extra_terms": None if self.terms is None else len(self.terms),
        }

    def config_hash(self) -> str:
        text = json.dumps(self.describe(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# one evaluation

def _output_orders(exp: Experiment) -> tuple | None:
    if exp.smoothing is None or not any(exp.smoothing):
        return None
    return tuple(exp.smoothing)


def measure(exp: Experiment, fs: Sequence[GridFunction], terms=None) -> tuple[float, float]:
    """(LHS, RHS) for one set of inputs."""
    out = eval_operator(exp.operator, fs, exp.budget)
    s = _output_orders(exp)
    if s is not None:
        out = fractional_derivative(out, s)
    lhs = mixed_norm(out, exp.exponents.r_vector())
    work = out.spec
    lifted = [f.resample(work) for f in fs]
    cache = {}
    rhs = 0.0
    for term in terms if terms is not None else exp.rhs():
        prod = 1.0
        for fac in term.factors:
            key = (fac.leaf, fac.orders, fac.operator)
            if key not in cache:
                g = lifted[fac.leaf - 1]
                if any(b != 0 for b in fac.orders):
                    g = fractional_derivative(g, [float(b) for b in fac.orders], fac.operator)
                cache[key] = mixed_norm(g, exp.exponents.p_vector(fac.leaf))
            prod *= cache[key]
        rhs += prod
    return lhs, rhs


# ---------------------------------------------------------------------------
# Leibniz ratio

@dataclass
class RatioReport:
    rows: list
    skipped: list
    config: dict
    config_hash: str

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r[4] for r in self.rows])

    @property
    def max(self) -> float:
        return float(self.ratios.max()) if self.rows else math.nan

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.ratios, q)) if self.rows else math.nan

    def running_max(self) -> np.ndarray:
        return np.maximum.accumulate(self.ratios)

    def summary(self) -> dict:
        return {"max": self.max, "p50": self.quantile(0.5), "p95": self.quantile(0.95),
                "trials": len(self.rows), "skipped": len(self.skipped),
                "config_hash": self.config_hash}

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "seed", "lhs", "rhs", "ratio"])
        for t, seed, lhs, rhs, ratio in self.rows:
            w.writerow([t, seed, repr(lhs), repr(rhs), repr(ratio)])

    def csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def leibniz_ratio(exp: Experiment) -> RatioReport:
    """LHS / RHS over seeded random trials.

    Trials whose RHS vanishes (all inputs zero) are skipped.  A positive LHS
    with a zero RHS raises, since no constant could bound it.
    """
    exp.validate()
    terms = exp.rhs()

    def one(t):
        lhs, rhs = measure(exp, exp.inputs(t), terms)
        return t, lhs, rhs

    if exp.workers > 1:
        with ThreadPoolExecutor(exp.workers) as pool:
            results = list(pool.map(one, range(exp.trials)))
    else:
        results = [one(t) for t in range(exp.trials)]
    rows, skipped = [], []
    for t, lhs, rhs in results:
        if rhs == 0:
            if lhs > 0:
                raise ArithmeticError(f"trial {t}: LHS {lhs} with vanishing RHS")
            skipped.append(t)
            continue
        ratio = lhs / rhs
        if not math.isfinite(ratio):
            raise ArithmeticError(f"trial {t}: non-finite ratio {ratio}")
        rows.append((t, exp.seed, lhs, rhs, ratio))
    return RatioReport(rows, skipped, exp.describe(), exp.config_hash())


# ---------------------------------------------------------------------------
# dilation probe

@dataclass
class ScalingReport:
    m: int
    lhs_factor: float
    lhs_expected: float
    term_factors: list
    term_expected: list
    ratio_before: float
    ratio_after: float

    @property
    def ratio_change(self) -> float:
        return abs(self.ratio_after - self.ratio_before) / self.ratio_before

    @property
    def max_factor_error(self) -> float:
        errs = [abs(self.lhs_factor / self.lhs_expected - 1)]
        errs += [abs(a / b - 1) for a, b in zip(self.term_factors, self.term_expected) if b]
        return max(errs)


def _term_values(exp, fs, terms):
    work = fs[0].spec.padded(exp.n)
    lifted = [f.resample(work) for f in fs]
    vals = []
    for term in terms:
        prod = 1.0
        for fac in term.factors:
            g = lifted[fac.leaf - 1]
            if any(b != 0 for b in fac.orders):
                g = fractional_derivative(g, [float(b) for b in fac.orders], fac.operator)
            prod *= mixed_norm(g, exp.exponents.p_vector(fac.leaf))
        vals.append(prod)
    return vals


def scaling_probe(exp: Experiment, trial: int = 0) -> list[ScalingReport]:
    """Dilate the inputs of one trial by 2^m and compare every factor.

    Input ``f`` becomes ``f(2^m x)`` on a grid refined by 2^m, whose samples
    tile those of ``f``.  A homogeneous operator of total order beta^j then
    scales by 2^(m sum_j beta^j) and each RHS term by 2^(m sum over leaves,
    parameters of its orders), so the ratio is unchanged.
    """
    op = exp.operator
    if isinstance(op, (FlagTree, FlagForest)):
        if op.derivative_kind != "homogeneous":
            raise ValueError("the dilation probe needs a homogeneous operator")
        if isinstance(op, FlagTree):
            total = [float(op.total_order(j)) for j in range(1, op.parameters + 1)]
        else:
            total = [float(t.total_order(1)) for t in op.trees]
    else:
        if exp.smoothing is not None:
            total = [s + b for s, b in zip(exp.smoothing, op.orders)]
        else:
            total = [float(b) for b in op.orders]
        if op.name == "mikhlin_test":
            raise ValueError("the phase of mikhlin_test is not dilation invariant")
    exp.validate()
    terms = exp.rhs()
    fs = exp.inputs(trial)
    lhs0, rhs0 = measure(exp, fs, terms)
    vals0 = _term_values(exp, fs, terms)
    out = []
    for m in exp.dilations:
        factor = 2 ** int(m)
        gs = [dilate(f, [factor] * f.N) for f in fs]
        sub = Experiment(**{**exp.__dict__, "grid": gs[0].spec})
        lhs1, rhs1 = measure(sub, gs, terms)
        vals1 = _term_values(sub, gs, terms)
        expected = [2.0 ** (m * sum(float(b) for fac in t.factors for b in fac.orders))
                    for t in terms]
        out.append(ScalingReport(
            int(m), lhs1 / lhs0 if lhs0 else math.nan, 2.0 ** (m * sum(total)),
            [b / a if a else math.nan for a, b in zip(vals0, vals1)], expected,
            lhs0 / rhs0, lhs1 / rhs1))
    return out


# ---------------------------------------------------------------------------
# fixed-scale bilinear bounds

LEMMA_BOUNDS = ("local_product", "commutator", "whitney", "diagonal")


def _holder_p(p1: float, p2: float) -> float:
    q = (0 if p1 == math.inf else 1 / p1) + (0 if p2 == math.inf else 1 / p2)
    return math.inf if q == 0 else 1 / q


def check_lemma_window(alpha: float, p1: float, p2: float) -> bool:
    """Raise unless 1 <= p1, p2 <= inf and alpha >= 0.

    Returns whether the diagonal bound, which also needs p > 1/(alpha+1),
    applies.
    """
    if alpha < 0:
        raise ExponentWindowError("alpha must be nonnegative")
    for p in (p1, p2):
        if not 1 <= p <= math.inf:
            raise ExponentWindowError(f"need 1 <= p1, p2 <= inf, got {p}")
    return _holder_p(p1, p2) > 1 / (alpha + 1)


def _bilinear_bounds(alpha, a, b, k, l, p1, p2, work):
    """Measured / stated for the four bounds at one scale pair (None if not applicable)."""
    p = _holder_p(p1, p2)
    out = {}
    fa = lp_project(a, 0, k).resample(work)
    gl = lp_project(b, 0, l).resample(work)
    na = lebesgue_norm(fa.samples, [p1])
    ng = lebesgue_norm(gl.samples, [p2])
    scale = 2.0 ** (l * alpha)
    if na and ng:
        dg = fractional_derivative(gl, [alpha])
        out["local_product"] = lebesgue_norm(fa.samples * dg.samples, [p]) / (scale * na * ng)
        if k == l:
            prod = GridFunction.from_samples(work, fa.samples * gl.samples)
            out["diagonal"] = (lebesgue_norm(fractional_derivative(prod, [alpha]).samples, [p])
                               / (scale * na * ng))
    return out, na, ng


def _whitney(alpha, a, b, l, p1, p2, work):
    p = _holder_p(p1, p2)
    sa = band_project(a, 0, -1, l - 3).resample(work)
    gl = lp_project(b, 0, l).resample(work)
    ns = lebesgue_norm(sa.samples, [p1])
    ng = lebesgue_norm(gl.samples, [p2])
    if not (ns and ng):
        return None
    prod = GridFunction.from_samples(work, sa.samples * gl.samples)
    return (lebesgue_norm(fractional_derivative(prod, [alpha]).samples, [p])
            / (2.0 ** (l * alpha) * ns * ng))


@dataclass
class LemmaReport:
    alpha: float
    p1: float
    p2: float
    trials: int
    constants: dict          # M -> {bound: sup ratio}; diagonal absent outside its window
    worst: dict              # M -> {bound: (k, l)}

    def trend(self, bound: str) -> float:
        """Ratio of the constant on the largest grid to that on the smallest."""
        Ms = sorted(self.constants)
        lo, hi = self.constants[Ms[0]][bound], self.constants[Ms[-1]][bound]
        return hi / lo if lo else (1.0 if hi == 0 else math.inf)

    def finite(self) -> bool:
        return all(math.isfinite(v) for c in self.constants.values() for v in c.values())


def lemma_bounds_sweep(alpha: float, p1: float, p2: float, grid, trials: int = 4,
                       seed: int = 0) -> LemmaReport:
    """Empirical constants of the four fixed-scale bilinear bounds.

    ``grid`` is one size M or a sequence of sizes.  For every size, ``trials``
    pairs of smooth random functions (width M/4) are drawn and each bound's
    measured/stated ratio is maximized over all admissible scale pairs.
    The diagonal bound is left out when p <= 1/(alpha+1).
    """
    diagonal_ok = check_lemma_window(alpha, p1, p2)
    sizes = [grid] if np.isscalar(grid) else list(grid)
    consts, worst = {}, {}
    for M in sizes:
        spec = GridSpec((int(M),))
        work = spec.padded(2)
        best = {name: 0.0 for name in LEMMA_BOUNDS}
        where = {name: None for name in LEMMA_BOUNDS}

        def bump(name, val, kl):
            if val is not None and val > best[name]:
                best[name] = val
                where[name] = kl

        for t in range(trials):
            a = random_band_limited(spec, np.random.SeedSequence([seed, t, 1]), M / 4)
            b = random_band_limited(spec, np.random.SeedSequence([seed, t, 2]), M / 4)
            ks = list(spec.scale_range(0))
            for l in ks:
                if l < 0:
                    continue
                bump("whitney", _whitney(alpha, a, b, l, p1, p2, work), (None, l))
                for k in ks:
                    vals, na, ng = _bilinear_bounds(alpha, a, b, k, l, p1, p2, work)
                    for name, v in vals.items():
                        bump(name, v, (k, l))
                    if k <= l - 3 and na and ng:
                        res = commutator_apply(alpha, a, b, k, l, p1, p2)
                        bump("commutator", res.ratio, (k, l))
        if not diagonal_ok:
            del best["diagonal"], where["diagonal"]
        consts[int(M)] = best
        worst[int(M)] = where
    return LemmaReport(alpha, p1, p2, trials, consts, worst)


def local_product_equality(alpha: float, p1: float, p2: float, M: int = 32,
                           k: int = 1, l: int = 3) -> float:
    """The local product bound on single modes at 2^k and 2^l, where it is sharp.

    Both Littlewood-Paley windows equal 1 there and |2^l|^alpha = 2^(l alpha),
    so the ratio is 1 for every admissible p1, p2.
    """
    check_lemma_window(alpha, p1, p2)
    spec = GridSpec((M,))
    f = GridFunction.from_modes(spec, {(2 ** k,): 1.0})
    g = GridFunction.from_modes(spec, {(2 ** l,): 1.0})
    vals, _, _ = _bilinear_bounds(alpha, f, g, k, l, p1, p2, spec.padded(2))
    return vals["local_product"]


# ---------------------------------------------------------------------------
# smoothing

def smoothing_experiment(nu: Sequence[float], s: Sequence[float], n: int, exponents: ExponentTuple,
                         grid: GridSpec, **kw) -> Experiment:
    """Experiment for D^s applied to an n-linear fractional integral of order nu.

    Inputs default to zero mean so that negative leaf orders s - nu and the
    singular point of the symbol are never met.
    """
    from .flagop import fractional_integral_symbol
    kw.setdefault("zero_mean", True)
    return Experiment(fractional_integral_symbol(nu, n), exponents, grid,
                      smoothing=tuple(float(x) for x in s), **kw)


def single_mode_ratio(beta: float, a: int, b: int, M: int = 32, p=2) -> float:
    """Depth-one bilinear ratio |a+b|^beta / (|a|^beta + |b|^beta) on single modes."""
    from .flagtree import Leaf, Vertex
    tree = FlagTree(Vertex((beta,), (Leaf(1), Leaf(2))))
    spec = GridSpec((M,))
    fs = [GridFunction.from_modes(spec, {(a,): 1.0}), GridFunction.from_modes(spec, {(b,): 1.0})]
    exp = Experiment(tree, ExponentTuple([p, p]), spec, trials=1)
    lhs, rhs = measure(exp, fs)
    return lhs / rhs if rhs else math.nan


__all__ = [
    "ConstraintFailure", "ExponentWindowError", "Experiment", "measure", "RatioReport",
    "leibniz_ratio", "ScalingReport", "scaling_probe", "LEMMA_BOUNDS", "LemmaReport",
    "lemma_bounds_sweep", "local_product_equality", "check_lemma_window",
    "smoothing_experiment", "single_mode_ratio",
]
