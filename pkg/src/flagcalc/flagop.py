"""Evaluation of flag operators and multilinear Fourier multipliers.

Two independent evaluation paths:

* ``eval_flag_recursive`` walks the tree bottom-up, forming pointwise
  products with FFTs and applying one multiplier per vertex.
* ``eval_direct_oracle`` sums ``m(xi_1..xi_n) prod_l c_l(xi_l)`` over every
  combination of active input modes and deposits the result at the output
  frequency ``xi_1 + ... + xi_n``.

Both return the exact trigonometric polynomial on a grid large enough to hold
the full product (``GridSpec.padded(n)``), so they can be compared to
round-off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .flagtree import HOMOGENEOUS, FlagForest, FlagTree, Leaf
from .spectral import (BudgetExceeded, GridFunction, GridSpec, abs_power, fractional_derivative,
                       same_grid)

DEFAULT_ORACLE_BUDGET = 10 ** 8
_CHUNK = 1 << 18


class SingularModeError(ValueError):
    """A symbol was evaluated on its singular set."""


@dataclass(frozen=True)
class SymbolFn:
    """A multilinear symbol on the joint frequency lattice.

    ``fn`` maps a real array of shape (..., n, N) to complex values of shape
    (...).  ``singular`` names the set where the symbol may blow up:
    ``"none"``, ``"origin"`` or ``"hyperplanes"`` (all xi^j_l = 0 for some j).
    """
    fn: Callable
    n: int
    parameters: int
    orders: tuple
    singular: str = "none"
    name: str = "symbol"
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-2:] != (self.n, self.parameters):
            raise ValueError(f"symbol expects frequencies of shape (..., {self.n}, "
                             f"{self.parameters}), got {xi.shape}")
        return np.asarray(self.fn(xi), dtype=np.complex128)


def _vertex_factors(tree: FlagTree, slot_to_axis: dict):
    """(leaf columns, axis, order, kind) for every nonzero vertex order."""
    out = []
    for vid, v in enumerate(tree.vertices):
        cols = sorted(l - 1 for l in tree._leaves_under[vid])
        for slot, axis in slot_to_axis.items():
            b = float(v.orders[slot])
            if b != 0:
                out.append((cols, axis, b, v.kind))
    return out


def _flag_value(factors, xi: np.ndarray) -> np.ndarray:
    val = np.ones(xi.shape[:-2])
    for cols, axis, b, kind in factors:
        s = xi[..., cols, axis].sum(axis=-1)
        if kind == HOMOGENEOUS:
            val = val * abs_power(s, b)
        else:
            val = val * (1.0 + s * s) ** (b / 2)
    return val


def flag_symbol(tree: FlagTree) -> SymbolFn:
    """prod_v prod_j |sum_{i in L(v)} xi_i^j|^{beta_j^v} (or the J analogue)."""
    factors = _vertex_factors(tree, {j: j for j in range(tree.parameters)})
    totals = tuple(float(tree.total_order(j)) for j in range(1, tree.parameters + 1))
    return SymbolFn(lambda xi: _flag_value(factors, xi), tree.n, tree.parameters, totals,
                    "none", "flag", {"tree": tree})


def forest_symbol(forest: FlagForest) -> SymbolFn:
    """Tensor product of the single-parameter flag symbols of a forest."""
    factors = []
    for j, t in enumerate(forest.trees):
        factors.extend(_vertex_factors(t, {0: j}))
    totals = tuple(float(t.total_order(1)) for t in forest.trees)
    return SymbolFn(lambda xi: _flag_value(factors, xi), forest.n, forest.parameters,
                    totals, "none", "forest", {"forest": forest})


def fractional_integral_symbol(nu: Sequence, n: int) -> SymbolFn:
    nu = tuple(float(x) for x in nu)
    for x in nu:
        if not 0 <= x < n:
            raise ValueError(f"fractional integral order {x} outside [0, {n})")

    def fn(xi):
        val = np.ones(xi.shape[:-2])
        for j, a in enumerate(nu):
            if a == 0:
                continue
            r2 = (xi[..., :, j] ** 2).sum(axis=-1)
            with np.errstate(divide="ignore"):
                val = val * r2 ** (-a / 2)
        return val

    return SymbolFn(fn, n, len(nu), tuple(-x for x in nu),
                    "hyperplanes" if any(nu) else "none", "fractional_integral", {"nu": nu})


def mikhlin_test_symbol(beta: Sequence, n: int) -> SymbolFn:
    """prod_j |xi^j|^{beta_j} exp(i theta_j), a smooth member of the order-beta class.

    ``|xi^j|`` is the Euclidean norm of all parameter-j frequencies and the
    phase theta_j = (sum_l xi_l^j) / sqrt(1 + |xi^j|^2) is bounded with
    derivatives decaying one order per differentiation.
    """
    beta = tuple(float(b) for b in beta)
    for b in beta:
        if b < 0:
            raise ValueError("mikhlin_test needs nonnegative orders")

    def fn(xi):
        val = np.ones(xi.shape[:-2], dtype=np.complex128)
        for j, b in enumerate(beta):
            r2 = (xi[..., :, j] ** 2).sum(axis=-1)
            phase = xi[..., :, j].sum(axis=-1) / np.sqrt(1.0 + r2)
            val = val * abs_power(np.sqrt(r2), b) * np.exp(1j * phase)
        return val

    return SymbolFn(fn, n, len(beta), beta, "none", "mikhlin_test", {"beta": beta})


def builtin_symbols(name: str, **params) -> SymbolFn:
    """Named symbols: ``fractional_integral(nu, n)``, ``flag(tree)``, ``mikhlin_test(beta, n)``."""
    if name == "fractional_integral":
        return fractional_integral_symbol(params["nu"], params.get("n", 2))
    if name == "flag":
        return flag_symbol(params["tree"])
    if name == "mikhlin_test":
        return mikhlin_test_symbol(params["beta"], params.get("n", 2))
    raise ValueError(f"unknown symbol {name!r}")


# ---------------------------------------------------------------------------
# evaluation

def _check_inputs(n: int, fs: Sequence[GridFunction]) -> GridSpec:
    if len(fs) != n:
        raise ValueError(f"operator takes {n} functions, got {len(fs)}")
    return same_grid(fs)


def eval_flag_recursive(tree: FlagTree, fs: Sequence[GridFunction],
                        dealias: bool = True) -> GridFunction:
    """Evaluate T_G(f_1, ..., f_n) by recursion over the tree.

    With ``dealias`` (default) the inputs are lifted to ``spec.padded(n)`` so
    every intermediate product is exact.  Without it all products are taken on
    the input grid, i.e. frequencies wrap around modulo M.
    """
    spec = _check_inputs(tree.n, fs)
    if tree.parameters != spec.N:
        raise ValueError(f"tree has {tree.parameters} parameters, grid has {spec.N} axes")
    work = spec.padded(tree.n) if dealias else spec
    lifted = [f.resample(work) for f in fs]

    def ev(v) -> np.ndarray:
        acc = None
        for c in v.children:
            val = lifted[c.index - 1].samples if isinstance(c, Leaf) else ev(c)
            acc = val if acc is None else acc * val
        g = GridFunction.from_samples(work, acc)
        if any(b != 0 for b in v.orders):
            g = fractional_derivative(g, v.orders, v.kind)
        return g.samples

    return GridFunction.from_samples(work, ev(tree.root))


def eval_direct_oracle(symbol: SymbolFn, fs: Sequence[GridFunction],
                       out_spec: GridSpec | None = None,
                       budget: int = DEFAULT_ORACLE_BUDGET,
                       tol: float = 0.0) -> GridFunction:
    """Direct lattice sum over all combinations of active input modes.

    Raises ``BudgetExceeded`` when the number of multiply-adds
    (combinations times n) exceeds ``budget``.
    """
    spec = _check_inputs(symbol.n, fs)
    n = symbol.n
    out_spec = out_spec or spec.padded(n)
    modes = [f.active_modes(tol) for f in fs]
    counts = [m[0].shape[0] for m in modes]
    total = math.prod(counts)
    if total * n > budget:
        raise BudgetExceeded(f"oracle needs {total * n:.3g} multiply-adds, budget {budget:.3g}")
    out = np.zeros(out_spec.sizes, dtype=np.complex128)
    if total == 0:
        return GridFunction.from_spectrum(out_spec, out)
    for j in range(spec.N):
        lo = sum(int(m[0][:, j].min()) for m in modes)
        hi = sum(int(m[0][:, j].max()) for m in modes)
        P = out_spec.sizes[j]
        if lo < -(P // 2) or hi > P // 2 - 1:
            raise ValueError(f"output grid too small on axis {j}: frequencies span [{lo}, {hi}]")
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(total, start + _CHUNK))
        idx = np.unravel_index(flat, counts)
        xi = np.stack([modes[l][0][idx[l]] for l in range(n)], axis=1)
        coef = np.ones(flat.size, dtype=np.complex128)
        for l in range(n):
            coef = coef * modes[l][1][idx[l]]
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            m = symbol(xi)
        if not np.all(np.isfinite(m)):
            bad = xi[~np.isfinite(m)][0]
            raise SingularModeError(f"{symbol.name} is singular at {bad.tolist()}")
        eta = xi.sum(axis=1)
        pos = tuple(eta[:, j] % out_spec.sizes[j] for j in range(spec.N))
        np.add.at(out, pos, m * coef)
    return GridFunction.from_spectrum(out_spec, out)


def eval_asymmetric(forest: FlagForest, fs: Sequence[GridFunction],
                    budget: int = DEFAULT_ORACLE_BUDGET) -> GridFunction:
    """Evaluate the tensor product of per-parameter flags by direct summation."""
    return eval_direct_oracle(forest_symbol(forest), fs, budget=budget)


def eval_operator(op, fs: Sequence[GridFunction], budget: int = DEFAULT_ORACLE_BUDGET) -> GridFunction:
    """Dispatch: trees recurse, forests and symbols go through the lattice sum."""
    if isinstance(op, FlagTree):
        return eval_flag_recursive(op, fs)
    if isinstance(op, FlagForest):
        return eval_asymmetric(op, fs, budget)
    if isinstance(op, SymbolFn):
        return eval_direct_oracle(op, fs, budget=budget)
    raise TypeError(f"cannot evaluate {type(op).__name__}")


# ---------------------------------------------------------------------------
# symbol-class probe

def _multi_indices(nvars: int, order: int):
    if order == 0:
        yield ()
        return
    for first in range(nvars):
        for rest in _multi_indices(nvars, order - 1):
            if not rest or first <= rest[0]:
                yield (first,) + rest


def mikhlin_probe(symbol: SymbolFn, points, max_order: int = 2,
                  step: float = 1e-3) -> dict:
    """Largest ratio |d^gamma m| / prod_j (sum_l |xi_l^j|)^(beta_j - |gamma^j|).

    Derivatives come from central differences with step ``step`` times the
    point's size.  Returns ``{order: max ratio}`` for orders 0..max_order.
    """
    pts = np.asarray(points, dtype=float)
    n, N = symbol.n, symbol.parameters
    nvars = n * N
    beta = np.asarray(symbol.orders, dtype=float)
    out = {}
    for order in range(max_order + 1):
        best = 0.0
        for gamma in _multi_indices(nvars, order):
            per_param = np.zeros(N)
            for g in gamma:
                per_param[g % N] += 1
            for x in pts:
                size = np.abs(x).sum(axis=0)
                h = step * max(1.0, float(np.abs(x).sum()))
                deriv = _central_difference(symbol, x, gamma, h, n, N)
                bound = float(np.prod(size ** (beta - per_param)))
                best = max(best, abs(deriv) / bound)
        out[order] = best
    return out


def _central_difference(symbol, x, gamma, h, n, N):
    if not gamma:
        return complex(symbol(x[None])[0])
    g, rest = gamma[0], gamma[1:]
    l, j = divmod(g, N)
    e = np.zeros((n, N))
    e[l, j] = h
    return (_central_difference(symbol, x + e, rest, h, n, N)
            - _central_difference(symbol, x - e, rest, h, n, N)) / (2 * h)
