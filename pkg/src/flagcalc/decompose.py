"""Paraproduct and cone decompositions, commutator symbols, symbol Fourier series.

Scale bookkeeping follows ``spectral``: Delta_k for k >= 0 are the dyadic
annuli, Delta_{-1} is the mean, and ``band(lo, hi)`` is the sum of the blocks
lo..hi.  With this convention every decomposition below is an exact
partition of the joint frequency lattice, so the pieces re-sum to the whole
operator up to round-off.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .flagop import eval_flag_recursive
from .flagtree import FlagTree
from .norms import lebesgue_norm
from .spectral import (SEPARATION, GridFunction, band_project, fractional_derivative,
                       lp_project, phi, same_grid)


class DomainError(ValueError):
    pass


# ---------------------------------------------------------------------------
# paraproducts

@dataclass(frozen=True)
class Paraproduct:
    """f*g split by the relative scales of the factors along one axis.

    ``low_high`` collects frequency pairs where f is at least SEPARATION
    scales below g, ``high_low`` the mirror image, ``diagonal`` the rest.
    """
    low_high: GridFunction
    high_low: GridFunction
    diagonal: GridFunction

    def total(self) -> GridFunction:
        return self.low_high + self.high_low + self.diagonal

    def __iter__(self):
        return iter((self.low_high, self.high_low, self.diagonal))


def _lifted_product(a: GridFunction, b: GridFunction, work) -> np.ndarray:
    return a.resample(work).samples * b.resample(work).samples


def paraproduct_split(f: GridFunction, g: GridFunction, j: int = 0) -> Paraproduct:
    """Split f*g into sum_l S_l f Delta_l g, sum_k Delta_k f S_k g and the diagonal.

    All pieces live on ``spec.padded(2)``, where the products are exact.
    """
    spec = same_grid([f, g])
    work = spec.padded(2)
    sep = SEPARATION
    acc = [np.zeros(work.sizes, dtype=np.complex128) for _ in range(3)]
    for k in spec.scale_range(j):
        dg = band_project(g, j, k, k)
        df = band_project(f, j, k, k)
        acc[0] += _lifted_product(band_project(f, j, -1, k - sep), dg, work)
        acc[1] += _lifted_product(df, band_project(g, j, -1, k - sep), work)
        acc[2] += _lifted_product(df, band_project(g, j, k - sep + 1, k + sep - 1), work)
    return Paraproduct(*(GridFunction.from_samples(work, a) for a in acc))


# ---------------------------------------------------------------------------
# commutator

_GL64 = np.polynomial.legendre.leggauss(64)


def commutator_symbol(alpha: float, xi_hi, xi_lo):
    """Both forms of (|xi_lo + xi_hi|^a - |xi_hi|^a) / xi_lo.

    Returns ``(quotient, quadrature)``: the difference quotient (evaluated as
    |xi_hi|^a expm1(a log1p(r)) / xi_lo with r = xi_lo / xi_hi, which avoids
    cancellation) and 64-node Gauss-Legendre quadrature of
    a * int_0^1 |xi_hi + t xi_lo|^(a-2) (xi_hi + t xi_lo) dt.
    """
    hi = np.asarray(xi_hi, dtype=float)
    lo = np.asarray(xi_lo, dtype=float)
    hi, lo = np.broadcast_arrays(hi, lo)
    if np.any(hi == 0) or np.any(lo == 0):
        raise DomainError("commutator symbol needs xi_hi != 0 and xi_lo != 0")
    if np.any(np.abs(lo) > np.abs(hi) / 2):
        raise DomainError("commutator symbol needs |xi_lo| <= |xi_hi| / 2")
    r = lo / hi
    quotient = np.abs(hi) ** alpha * np.expm1(alpha * np.log1p(r)) / lo
    x, w = _GL64
    t = (x + 1) / 2
    path = hi[..., None] + t * lo[..., None]
    integrand = np.sign(path) * np.abs(path) ** (alpha - 1)
    quadrature = alpha * (integrand * (w / 2)).sum(axis=-1)
    return quotient, quadrature


def _commutator_multiplier(alpha: float, xi_hi, xi_lo) -> np.ndarray:
    """Stable quotient form, extended continuously to xi_lo = 0."""
    hi = np.asarray(xi_hi, dtype=float)
    lo = np.asarray(xi_lo, dtype=float)
    hi, lo = np.broadcast_arrays(hi, lo)
    out = np.zeros(hi.shape)
    ok = hi != 0
    h, l = hi[ok], lo[ok]
    nz = l != 0
    val = np.empty(h.shape)
    val[nz] = np.abs(h[nz]) ** alpha * np.expm1(alpha * np.log1p(l[nz] / h[nz])) / l[nz]
    val[~nz] = alpha * np.sign(h[~nz]) * np.abs(h[~nz]) ** (alpha - 1)
    out[ok] = val
    return out


def _holder(p1, p2, N: int) -> list:
    def vec(p):
        return list(p) if isinstance(p, (list, tuple)) else [p] * N
    out = []
    for a, b in zip(vec(p1), vec(p2)):
        q = (0 if a == math.inf else 1 / a) + (0 if b == math.inf else 1 / b)
        out.append(math.inf if q == 0 else 1 / q)
    return out


def _vec(p, N):
    return list(p) if isinstance(p, (list, tuple)) else [p] * N


@dataclass(frozen=True)
class CommutatorResult:
    field: GridFunction
    norm: float
    bound: float

    @property
    def ratio(self) -> float:
        return 0.0 if self.bound == 0 else self.norm / self.bound


def commutator_apply(alpha: float, f: GridFunction, g: GridFunction, k: int, l: int,
                     p1=2.0, p2=2.0, j: int = 0) -> CommutatorResult:
    """D^a(Delta_k f Delta_l g) - Delta_k f D^a Delta_l g, with its measured ratio.

    The ratio compares the mixed norm of the commutator against
    2^((a-1) l) 2^k |Delta_k f|_{p1} |Delta_l g|_{p2}.
    """
    if k > l - SEPARATION:
        raise DomainError(f"commutator needs k <= l - {SEPARATION}, got k={k}, l={l}")
    spec = same_grid([f, g])
    work = spec.padded(2)
    orders = [0.0] * spec.N
    orders[j] = alpha
    a = lp_project(f, j, k).resample(work)
    b = lp_project(g, j, l).resample(work)
    prod = GridFunction.from_samples(work, a.samples * b.samples)
    c = fractional_derivative(prod, orders) - a * fractional_derivative(b, orders)
    p = _holder(p1, p2, spec.N)
    norm = lebesgue_norm(c.samples, p)
    bound = (2.0 ** ((alpha - 1) * l + k) * lebesgue_norm(a.samples, _vec(p1, spec.N))
             * lebesgue_norm(b.samples, _vec(p2, spec.N)))
    return CommutatorResult(c, norm, bound)


# ---------------------------------------------------------------------------
# Fourier series of localized symbols

@dataclass(frozen=True)
class LocalizedSymbol:
    fn: Callable
    box: tuple
    prefactor: float = 1.0
    kinks: tuple = ()
    name: str = "symbol"


def diagonal_symbol(alpha: float, ell: int = 0) -> LocalizedSymbol:
    """|z|^a phi(2^-l z / 4) on [-2^(l+3), 2^(l+3)]; renormalized by 2^(l a)."""
    scale = 2.0 ** ell

    def fn(z):
        z = np.asarray(z, dtype=float)
        return np.abs(z) ** alpha * phi(z / (4 * scale))

    half = 8 * scale
    return LocalizedSymbol(fn, ((-half, half),), 2.0 ** (ell * alpha), (0.0,),
                           f"diagonal(alpha={alpha}, ell={ell})")


def commutator_localized_symbol(alpha: float, ell: int = 0) -> LocalizedSymbol:
    """Commutator symbol cut to |xi_lo| <= 2^(l-3) and 2^(l-2) <= xi_hi <= 2^(l+2).

    Axis 0 is xi_lo on [-2^(l-3), 2^(l-3)], axis 1 is xi_hi on [0, 2^(l+2)].
    The low cutoff is 1 on |xi_lo| <= 2^(l-4); the high one is 1 on
    [2^(l-1), 2^(l+1)], the support of psi_l on the positive side.
    Renormalized by 2^(l (a - 1)).
    """
    s = 2.0 ** ell

    def fn(lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        cut = phi(lo / (s / 16)) * (phi(hi / (2 * s)) - phi(hi / (s / 4))) * (hi > 0)
        out = np.zeros(np.broadcast(lo, hi).shape)
        live = cut > 0
        lo_b, hi_b = np.broadcast_arrays(lo, hi)
        out[live] = _commutator_multiplier(alpha, hi_b[live], lo_b[live]) * cut[live]
        return out

    return LocalizedSymbol(fn, ((-s / 8, s / 8), (0.0, 4 * s)), 2.0 ** (ell * (alpha - 1)),
                           (), f"commutator(alpha={alpha}, ell={ell})")


def _quadrature(a: float, b: float, panels: int, nodes: int, kinks: Sequence[float],
                grading: int = 12):
    """Composite Gauss-Legendre rule with geometric refinement toward kinks."""
    pts = set(np.linspace(a, b, panels + 1).tolist())
    h = (b - a) / panels
    for c in kinks:
        if a <= c <= b:
            pts.add(c)
            for m in range(1, grading + 1):
                for s in (-1, 1):
                    x = c + s * h * 4.0 ** (-m)
                    if a < x < b:
                        pts.add(x)
    edges = np.array(sorted(pts))
    x, w = np.polynomial.legendre.leggauss(nodes)
    lo, hi = edges[:-1, None], edges[1:, None]
    xs = ((hi - lo) / 2 * x + (hi + lo) / 2).ravel()
    ws = ((hi - lo) / 2 * w).ravel()
    return xs, ws


@dataclass
class SymbolExpansion:
    """Truncated Fourier series sum_L C_L exp(2 pi i L.z / T) of a localized symbol.

    ``coefficients`` are renormalized: the raw coefficient is ``prefactor``
    times the stored one.  Index ``L`` sits at position ``L + truncation``
    along each axis.
    """
    box: tuple
    truncation: int
    coefficients: np.ndarray
    prefactor: float
    residual: float = math.nan
    decay_exponent: float = math.nan
    fit_window: tuple = (3, 0)
    name: str = "symbol"
    periods: tuple = field(init=False)

    def __post_init__(self):
        self.periods = tuple(b - a for a, b in self.box)

    @property
    def dim(self) -> int:
        return len(self.box)

    def indices(self) -> np.ndarray:
        return np.arange(-self.truncation, self.truncation + 1)

    def coefficient(self, *L) -> complex:
        return complex(self.coefficients[tuple(l + self.truncation for l in L)])

    def reconstruct(self, *axes) -> np.ndarray:
        """Evaluate the truncated series on the tensor grid ``axes`` (raw scale)."""
        L = self.indices()
        out = self.coefficients
        for d in range(self.dim):
            z = np.asarray(axes[d], dtype=float)
            E = np.exp(2j * np.pi * np.outer(z, L) / self.periods[d])
            out = np.moveaxis(np.tensordot(E, out, axes=([1], [d])), 0, d)
        return self.prefactor * out

    def rows(self):
        L = self.indices()
        for idx in itertools.product(range(L.size), repeat=self.dim):
            c = complex(self.coefficients[idx])
            yield tuple(int(L[i]) for i in idx), c

    def to_csv(self, fh) -> None:
        """Write L-index columns, real and imaginary parts, and modulus."""
        w = csv.writer(fh, lineterminator="\n")
        head = ["L"] if self.dim == 1 else [f"L{d + 1}" for d in range(self.dim)]
        w.writerow(head + ["coefficient_re", "coefficient_im", "modulus"])
        for L, c in self.rows():
            w.writerow(list(L) + [repr(c.real), repr(c.imag), repr(abs(c))])

    def weighted_decay(self, power: float = 6.0):
        """(max over the inner half, max over the outer ring) of |C_L| (1 + |L|_1)^power."""
        L = self.indices()
        grids = np.meshgrid(*([L] * self.dim), indexing="ij")
        l1 = sum(np.abs(g) for g in grids)
        linf = np.maximum.reduce([np.abs(g) for g in grids]) if self.dim > 1 else np.abs(grids[0])
        weighted = np.abs(self.coefficients) * (1.0 + l1) ** power
        inner = linf <= self.truncation // 2
        return float(weighted[inner].max()), float(weighted[~inner].max())


def _fit_decay(exp: SymbolExpansion, lo: int = 3) -> float:
    L = exp.indices()
    T = exp.truncation
    mags = np.abs(exp.coefficients)
    if exp.dim == 1:
        r = np.abs(L)
        mask = (r >= lo) & (r <= T) & (mags > 0)
        x, y = r[mask], mags[mask]
    else:
        grids = np.meshgrid(*([L] * exp.dim), indexing="ij")
        l1 = sum(np.abs(g) for g in grids)
        xs, ys = [], []
        for rr in range(lo, T + 1):
            ring = mags[l1 == rr]
            if ring.size and ring.max() > 0:
                xs.append(rr)
                ys.append(ring.max())
        x, y = np.array(xs, dtype=float), np.array(ys)
    if x.size < 2:
        return math.nan
    slope = np.polyfit(np.log(x), np.log(y), 1)[0]
    return float(-slope)


def _finite(vals, name):
    vals = np.asarray(vals, dtype=np.complex128)
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"{name} has non-finite values on its box")
    return vals


def _gauss_coefficients(fn, box, L, panels, nodes, kinks, name):
    dim = len(box)
    rules = []
    for a, b in box:
        P = panels if panels is not None else max(8, int(L[-1]))
        ks = [c for c in kinks if a <= c <= b] if dim == 1 else []
        rules.append(_quadrature(a, b, P, nodes, ks))
    coef = _finite(fn(*np.meshgrid(*[r[0] for r in rules], indexing="ij")), name)
    for d, ((a, b), (xs, ws)) in enumerate(zip(box, rules)):
        period = b - a
        E = np.exp(-2j * np.pi * np.outer(L, xs) / period) * ws / period
        coef = np.moveaxis(np.tensordot(E, coef, axes=([1], [d])), 0, d)
    return coef


def _trapezoid_coefficients(fn, box, T, name):
    dim = len(box)
    Q = 1 << math.ceil(math.log2(4 * T + 2))
    axes = [a + (b - a) * np.arange(Q) / Q for a, b in box]
    vals = _finite(fn(*np.meshgrid(*axes, indexing="ij")), name)
    c = np.fft.fftn(vals) / Q ** dim
    # the FFT phase origin is the box corner; move it to z = 0
    L = np.arange(-T, T + 1)
    c = c[np.ix_(*([L % Q] * dim))]
    for d, (a, b) in enumerate(box):
        shape = [1] * dim
        shape[d] = L.size
        c = c * np.exp(-2j * np.pi * L * a / (b - a)).reshape(shape)
    return c


def symbol_fourier_expand(symbol, box=None, truncation: int = 64, prefactor: float | None = None,
                          kinks: Sequence[float] | None = None, nodes: int = 16,
                          panels: int | None = None, check_points: int | None = None,
                          fit_from: int = 3, method: str = "gauss") -> SymbolExpansion:
    """Fourier coefficients of a symbol on a box by tensor Gauss-Legendre quadrature.

    ``symbol`` is a ``LocalizedSymbol`` or a callable of one argument per
    axis.  Each axis uses ``panels`` equal panels (default: one per
    oscillation of the highest retained mode, at least 8) of ``nodes``
    points, split and geometrically refined at ``kinks``.

    ``method="trapezoid"`` instead samples 4 * truncation equispaced points
    per axis and uses the FFT; this is spectrally accurate only for symbols
    that extend smoothly and periodically past the box edges.

    The reconstruction residual is the sup of |series - symbol| over a
    uniform check grid; the decay exponent is a log-log least-squares fit of
    |C_L| over fit_from <= |L| <= truncation (ring maxima in 2-D).
    """
    if isinstance(symbol, LocalizedSymbol):
        fn = symbol.fn
        box = symbol.box if box is None else box
        prefactor = symbol.prefactor if prefactor is None else prefactor
        kinks = symbol.kinks if kinks is None else kinks
        name = symbol.name
    else:
        fn = symbol
        name = getattr(symbol, "__name__", "symbol")
    if box is None:
        raise ValueError("a box is required")
    if np.isscalar(box[0]):
        box = (tuple(box),)
    box = tuple((float(a), float(b)) for a, b in box)
    prefactor = 1.0 if prefactor is None else float(prefactor)
    kinks = tuple(kinks or ())
    dim = len(box)
    T = int(truncation)
    L = np.arange(-T, T + 1)
    if method == "gauss":
        coef = _gauss_coefficients(fn, box, L, panels, nodes, kinks, name)
    elif method == "trapezoid":
        coef = _trapezoid_coefficients(fn, box, T, name)
    else:
        raise ValueError(f"unknown quadrature method {method!r}")
    exp = SymbolExpansion(box, T, coef / prefactor, prefactor, name=name,
                          fit_window=(fit_from, T))
    npts = check_points or (4097 if dim == 1 else 257)
    axes = [np.linspace(a, b, npts) for a, b in box]
    exact = np.asarray(fn(*np.meshgrid(*axes, indexing="ij")), dtype=np.complex128)
    exp.residual = float(np.abs(exp.reconstruct(*axes) - exact).max())
    exp.decay_exponent = _fit_decay(exp, fit_from)
    return exp


# ---------------------------------------------------------------------------
# cone decomposition

@dataclass(frozen=True)
class Region:
    """A single dominant leaf (``dominant``) or a diagonal pair of leaves."""
    kind: str
    leaves: tuple

    def __str__(self):
        if self.kind == "dominant":
            return f"R[{self.leaves[0]}]"
        return f"R~[{self.leaves[0]},{self.leaves[1]}]"


def cone_regions(n: int) -> list[Region]:
    out = [Region("dominant", (l,)) for l in range(1, n + 1)]
    out += [Region("diagonal", (a, b)) for a, b in itertools.combinations(range(1, n + 1), 2)]
    return out


def _ordered_pair_bands(n: int, l1: int, l2: int, k: int) -> tuple:
    """Per-leaf (lo, hi) bands for tuples whose first maximal leaf is l1 and
    whose first other leaf within SEPARATION - 1 scales of the maximum is l2."""
    sep = SEPARATION
    bands = []
    for l in range(1, n + 1):
        if l == l1:
            bands.append((k, k))
        elif l == l2:
            bands.append((k - sep + 1, k - 1 if l2 < l1 else k))
        elif l < l2:
            bands.append((-1, k - sep))
        else:
            bands.append((-1, k - 1 if l < l1 else k))
    return tuple(bands)


def region_bands(region: Region, n: int, k: int) -> list[tuple]:
    """The terms of a region at maximal scale ``k``, each a tuple of per-leaf bands."""
    if region.kind == "dominant":
        (l0,) = region.leaves
        return [tuple((k, k) if l == l0 else (-1, k - SEPARATION) for l in range(1, n + 1))]
    a, b = region.leaves
    return [_ordered_pair_bands(n, a, b, k), _ordered_pair_bands(n, b, a, k)]


@dataclass(frozen=True)
class ConePiece:
    """A cone region per parameter, with its major and minor leaf sets.

    ``major`` leaves carry the maximal scale; ``minor`` leaves are low-pass
    projected.  For multi-parameter trees ``regions`` holds one region per
    parameter and the projections act axis by axis.
    """
    tree: FlagTree
    regions: tuple
    major: tuple
    minor: tuple

    def terms(self, scales: Sequence[int]) -> list:
        """Per-leaf, per-axis bands for every term at the given maximal scales."""
        per_param = [region_bands(r, self.tree.n, k) for r, k in zip(self.regions, scales)]
        out = []
        for combo in itertools.product(*per_param):
            out.append(tuple(tuple(combo[j][l] for j in range(len(combo)))
                             for l in range(self.tree.n)))
        return out

    def evaluate(self, fs: Sequence[GridFunction], scales) -> GridFunction:
        """The localized operator at one tuple of maximal scales."""
        if np.isscalar(scales):
            scales = (scales,)
        acc = None
        for term in self.terms(scales):
            proj = []
            for f, bands in zip(fs, term):
                g = f
                for j, (lo, hi) in enumerate(bands):
                    g = band_project(g, j, lo, hi)
                proj.append(g)
            val = eval_flag_recursive(self.tree, proj)
            acc = val if acc is None else acc + val
        return acc

    def evaluate_all(self, fs: Sequence[GridFunction]) -> GridFunction:
        spec = same_grid(fs)
        ranges = [spec.scale_range(j) for j in range(spec.N)]
        acc = None
        for scales in itertools.product(*ranges):
            val = self.evaluate(fs, scales)
            acc = val if acc is None else acc + val
        return acc


def cone_localize(tree: FlagTree, region) -> ConePiece:
    """Bind a region (or one region per parameter) to a tree."""
    regions = (region,) if isinstance(region, Region) else tuple(region)
    if len(regions) != tree.parameters:
        raise ValueError(f"need one region per parameter ({tree.parameters})")
    for r in regions:
        if max(r.leaves) > tree.n or min(r.leaves) < 1:
            raise ValueError(f"region {r} does not fit a tree with {tree.n} leaves")
    major = tuple(tuple(sorted(r.leaves)) for r in regions)
    minor = tuple(tuple(l for l in range(1, tree.n + 1) if l not in r.leaves) for r in regions)
    return ConePiece(tree, regions, major if len(major) > 1 else major[0],
                     minor if len(minor) > 1 else minor[0])


def cone_reassemble(tree: FlagTree, fs: Sequence[GridFunction]):
    """Sum of every cone piece; also returns each region's contribution."""
    per_param = [cone_regions(tree.n)] * tree.parameters
    total = None
    parts = {}
    for regions in itertools.product(*per_param):
        piece = cone_localize(tree, regions).evaluate_all(fs)
        parts[regions if len(regions) > 1 else regions[0]] = piece
        total = piece if total is None else total + piece
    return total, parts


__all__ = [
    "DomainError", "Paraproduct", "paraproduct_split", "commutator_symbol", "commutator_apply",
    "CommutatorResult", "LocalizedSymbol", "diagonal_symbol", "commutator_localized_symbol",
    "SymbolExpansion", "symbol_fourier_expand", "Region", "cone_regions", "region_bands",
    "ConePiece", "cone_localize", "cone_reassemble",
]
