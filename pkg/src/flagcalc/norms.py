"""Mixed Lebesgue and Besov (quasi)norms of grid functions.

Axis 0 is the outermost variable: ``L^{p_1}_{x_1} ... L^{p_N}_{x_N}`` is
evaluated by integrating the last axis first.  Integrals use the rectangle
rule with cell measure 1/M_j, which is exact for trigonometric polynomials of
degree below M_j and spectrally accurate for smooth integrands.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .spectral import GridFunction, GridSpec, band_window, lp_project, window


@dataclass(frozen=True)
class Lebesgue:
    p: float

    def __post_init__(self):
        object.__setattr__(self, "p", _exponent(self.p))


@dataclass(frozen=True)
class Besov:
    """Homogeneous Besov axis with smoothness ``s`` and integrability ``p`` (q = inf)."""
    s: float
    p: float

    def __post_init__(self):
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "p", _exponent(self.p))


Descriptor = Union[Lebesgue, Besov]


def _exponent(p) -> float:
    if isinstance(p, str):
        p = math.inf if p.strip().lower() in ("inf", "infinity", "oo", "∞") else float(p)
    p = float(p)
    if not p > 0:
        raise ValueError(f"exponent must be positive, got {p}")
    return p


def norm_spec(spec) -> tuple:
    """Normalize a sequence of exponents and/or descriptors into descriptors."""
    if isinstance(spec, (Lebesgue, Besov)) or np.isscalar(spec) or isinstance(spec, str):
        spec = [spec]
    out = []
    for d in spec:
        out.append(d if isinstance(d, (Lebesgue, Besov)) else Lebesgue(d))
    return tuple(out)


def _reduce(a: np.ndarray, ps: Sequence[float]) -> float:
    for p in reversed(ps):
        if p == math.inf:
            a = a.max(axis=-1)
        else:
            a = np.mean(a ** p, axis=-1) ** (1.0 / p)
    return float(a)


def lebesgue_norm(samples: np.ndarray, ps: Sequence[float]) -> float:
    """Mixed norm of a sample array; ``ps[0]`` is the outermost axis."""
    a = np.abs(np.asarray(samples))
    if a.ndim != len(ps):
        raise ValueError(f"{len(ps)} exponents for a {a.ndim}-axis array")
    return _reduce(a, [float(p) for p in ps])


def _besov_sup(f: GridFunction, desc: tuple) -> float:
    besov_axes = [j for j, d in enumerate(desc) if isinstance(d, Besov)]
    ps = [d.p for d in desc]
    if not besov_axes:
        return lebesgue_norm(f.samples, ps)
    # homogeneous norms: the mean block carries no dyadic scale
    ranges = [[k for k in f.spec.scale_range(j) if k >= 0] for j in besov_axes]
    freqs = [f.spec.frequency_grid(j) for j in besov_axes]
    best = 0.0
    for ks in itertools.product(*ranges):
        m = 1.0
        weight = 1.0
        for j, k, fr in zip(besov_axes, ks, freqs):
            m = m * window(fr, k, "delta")
            weight *= 2.0 ** (k * desc[j].s)
        c = f.spectrum * m
        if not np.any(c):
            continue
        g = np.fft.ifftn(c) * f.spec.points
        best = max(best, weight * lebesgue_norm(g, ps))
    return best


def mixed_norm(f: GridFunction, spec) -> float:
    """Mixed Lebesgue, Besov or Besov-Lebesgue (quasi)norm.

    ``spec`` holds one entry per axis: a number (Lebesgue exponent),
    ``Lebesgue(p)`` or ``Besov(s, p)``.  With Besov axes the supremum over
    their dyadic scales is taken outside the whole mixed Lebesgue norm.
    """
    desc = norm_spec(spec)
    if len(desc) != f.N:
        raise ValueError(f"norm spec has {len(desc)} axes, function has {f.N}")
    return _besov_sup(f, desc)


def besov_norm(f: GridFunction, j: int, s: float, p: float,
               companions: Sequence | None = None) -> float:
    """Besov norm in axis ``j`` (0-based); other axes use ``companions``.

    ``companions`` lists the descriptors of the remaining axes in order; it
    defaults to L^2.  Companions may themselves be Besov, giving the
    multi-parameter norm by iterated projections.
    """
    others = list(companions) if companions is not None else [2.0] * (f.N - 1)
    if len(others) != f.N - 1:
        raise ValueError(f"need {f.N - 1} companion descriptors")
    desc = others[:j] + [Besov(s, p)] + others[j:]
    return mixed_norm(f, desc)


def besov_embedding_constant(spec: GridSpec, j: int, s: float) -> float:
    """Largest kernel L1 norm of 2^{ks} psi_k(xi) / |xi|^s over the grid scales.

    This multiplier turns D^s f into 2^{ks} Delta_k f, so the Besov norm with
    smoothness s is at most this constant times the L^p norm of D^s f (p >= 1).
    """
    freqs = spec.frequencies(j)
    a = np.abs(freqs).astype(float)
    best = 0.0
    for k in spec.scale_range(j):
        if k < 0:
            continue
        w = band_window(freqs, k, k)
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.where(a > 0, 2.0 ** (k * s) * w / a ** s, 0.0)
        best = max(best, float(np.abs(np.fft.ifft(m)).sum()))
    return best


@dataclass(frozen=True)
class InterpolationReport:
    lhs: float
    rhs: float
    ratio: float
    theta: float

    @property
    def holds(self) -> bool:
        return self.ratio <= 1 + 1e-12


def interpolation_check(f: GridFunction, j: int, s0: float, s: float, s1: float,
                        theta: float | None = None, p: float = 2.0,
                        companions: Sequence | None = None) -> InterpolationReport:
    """Compare B^s with (B^{s0})^theta (B^{s1})^(1-theta) in axis ``j``.

    ``theta`` defaults to the value with s = theta s0 + (1 - theta) s1.  A zero
    function gives ratio 0.
    """
    if not s0 <= s <= s1:
        raise ValueError("need s0 <= s <= s1")
    if theta is None:
        theta = 1.0 if s1 == s0 else (s1 - s) / (s1 - s0)
    if abs(theta * s0 + (1 - theta) * s1 - s) > 1e-12 * max(1.0, abs(s)):
        raise ValueError("theta does not interpolate s between s0 and s1")
    lhs = besov_norm(f, j, s, p, companions)
    b0 = besov_norm(f, j, s0, p, companions)
    b1 = besov_norm(f, j, s1, p, companions)
    rhs = b0 ** theta * b1 ** (1 - theta)
    ratio = 0.0 if lhs == 0 else lhs / rhs
    return InterpolationReport(lhs, rhs, ratio, theta)


def projected_norms(f: GridFunction, j: int, ps) -> dict:
    """Mixed norms of every Delta_k f in axis ``j``, keyed by scale."""
    return {k: mixed_norm(lp_project(f, j, k), ps) for k in f.spec.scale_range(j)}
