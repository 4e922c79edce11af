"""Periodic tensor grids, Fourier multipliers and Littlewood-Paley projections.

Functions live on the torus [0,1)^N sampled on a uniform grid with M_j points
per axis.  A grid function is the trigonometric polynomial

    f(x) = sum_k c_k exp(2 pi i k.x),   k_j in {-M_j/2, ..., M_j/2 - 1},

and ``spectrum`` holds the coefficients c_k in numpy FFT order, so
``spectrum = fftn(samples) / prod(M)``.

Littlewood-Paley scales.  On the integer lattice the windows
``psi_k(xi) = phi(xi / 2^k) - phi(xi / 2^(k-1))`` are nonzero only for
``0 <= k <= log2(M) - 1``.  The zero mode is treated as its own block at scale
``-1``, so that ``sum_{k >= -1} Delta_k = Id`` exactly.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

SEPARATION = 3
DEFAULT_POINT_BUDGET = 1 << 22


class NegativeOrderOnNonzeroMeanMode(ValueError):
    """A homogeneous negative-order multiplier met mass on a zero hyperplane."""


class GridMismatch(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    """A grid or a direct sum would exceed its work budget."""


def _is_power_of_two(m: int) -> bool:
    return m > 0 and (m & (m - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Grid sizes per parameter axis."""
    sizes: tuple
    budget: int = DEFAULT_POINT_BUDGET

    def __post_init__(self):
        sizes = tuple(int(m) for m in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if not sizes:
            raise ValueError("a grid needs at least one axis")
        for m in sizes:
            if m < 8 or not _is_power_of_two(m):
                raise ValueError(f"grid sizes must be powers of two >= 8, got {m}")
        if math.prod(sizes) > self.budget:
            raise BudgetExceeded(f"grid with {math.prod(sizes)} points exceeds budget {self.budget}")

    @classmethod
    def uniform(cls, N: int, M: int, **kw) -> "GridSpec":
        return cls((M,) * N, **kw)

    @property
    def N(self) -> int:
        return len(self.sizes)

    @property
    def points(self) -> int:
        return math.prod(self.sizes)

    def frequencies(self, j: int) -> np.ndarray:
        """Integer frequencies of axis ``j`` (0-based) in FFT order."""
        M = self.sizes[j]
        return np.fft.fftfreq(M, 1.0 / M).round().astype(np.int64)

    def frequency_grid(self, j: int) -> np.ndarray:
        """Axis-``j`` frequencies broadcast to the full spectrum shape."""
        shape = [1] * self.N
        shape[j] = self.sizes[j]
        return self.frequencies(j).reshape(shape)

    def scale_range(self, j: int) -> range:
        """Dyadic scales with nonempty windows, the mean block -1 included."""
        return range(-1, int(math.log2(self.sizes[j])))

    def padded(self, factor: int) -> "GridSpec":
        """Smallest power-of-two grid holding an exact ``factor``-fold product.

        The point budget carries over, so an oversized product raises
        ``BudgetExceeded``.
        """
        sizes = tuple(1 << math.ceil(math.log2(factor * m)) for m in self.sizes)
        return GridSpec(sizes, budget=self.budget)

    def coordinates(self, j: int) -> np.ndarray:
        return np.arange(self.sizes[j]) / self.sizes[j]


class GridFunction:
    """Samples of a trigonometric polynomial on a grid, with its spectrum.

    Instances are immutable; both arrays are read-only.
    """

    __slots__ = ("spec", "_samples", "_spectrum")

    def __init__(self, spec: GridSpec, samples: np.ndarray, spectrum: np.ndarray):
        if samples.shape != spec.sizes or spectrum.shape != spec.sizes:
            raise GridMismatch(f"array shape {samples.shape} does not match grid {spec.sizes}")
        samples.flags.writeable = False
        spectrum.flags.writeable = False
        self.spec = spec
        self._samples = samples
        self._spectrum = spectrum

    @classmethod
    def from_samples(cls, spec: GridSpec, samples) -> "GridFunction":
        s = np.array(samples, dtype=np.complex128)
        return cls(spec, s, np.fft.fftn(s) / spec.points)

    @classmethod
    def from_spectrum(cls, spec: GridSpec, spectrum) -> "GridFunction":
        c = np.array(spectrum, dtype=np.complex128)
        return cls(spec, np.fft.ifftn(c) * spec.points, c)

    @classmethod
    def from_modes(cls, spec: GridSpec, modes: dict) -> "GridFunction":
        """Build from ``{(k_1, ..., k_N): coefficient}``."""
        c = np.zeros(spec.sizes, dtype=np.complex128)
        for k, a in modes.items():
            k = (k,) if np.isscalar(k) else tuple(k)
            c[tuple(int(kj) % m for kj, m in zip(k, spec.sizes))] += a
        return cls.from_spectrum(spec, c)

    @classmethod
    def constant(cls, spec: GridSpec, value) -> "GridFunction":
        return cls.from_samples(spec, np.full(spec.sizes, value, dtype=np.complex128))

    @property
    def samples(self) -> np.ndarray:
        return self._samples

    @property
    def spectrum(self) -> np.ndarray:
        return self._spectrum

    @property
    def N(self) -> int:
        return self.spec.N

    def is_real(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.abs(self._samples).max(initial=0.0)))
        return float(np.abs(self._samples.imag).max(initial=0.0)) <= tol * scale

    def with_spectrum(self, spectrum) -> "GridFunction":
        return GridFunction.from_spectrum(self.spec, spectrum)

    def __add__(self, other):
        _same_grid(self, other)
        return GridFunction.from_spectrum(self.spec, self._spectrum + other._spectrum)

    def __sub__(self, other):
        _same_grid(self, other)
        return GridFunction.from_spectrum(self.spec, self._spectrum - other._spectrum)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            _same_grid(self, other)
            return GridFunction.from_samples(self.spec, self._samples * other._samples)
        return GridFunction.from_spectrum(self.spec, self._spectrum * other)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction.from_spectrum(self.spec, -self._spectrum)

    def active_modes(self, tol: float = 0.0):
        """Nonzero coefficients as (frequencies array (m, N), coefficients (m,))."""
        idx = np.nonzero(np.abs(self._spectrum) > tol)
        freqs = np.stack([self.spec.frequencies(j)[idx[j]] for j in range(self.N)], axis=-1)
        return freqs, self._spectrum[idx]

    def resample(self, spec: GridSpec) -> "GridFunction":
        """Same trigonometric polynomial on a grid at least as fine."""
        if spec == self.spec:
            return self
        if spec.N != self.N or any(a < b for a, b in zip(spec.sizes, self.spec.sizes)):
            raise GridMismatch("can only resample onto a grid that is at least as fine")
        freqs, coefs = self.active_modes()
        c = np.zeros(spec.sizes, dtype=np.complex128)
        idx = tuple(freqs[:, j] % spec.sizes[j] for j in range(self.N))
        np.add.at(c, idx, coefs)
        return GridFunction.from_spectrum(spec, c)


def _same_grid(*fs: GridFunction):
    specs = {f.spec.sizes for f in fs}
    if len(specs) != 1:
        raise GridMismatch(f"functions live on different grids: {sorted(specs)}")


def same_grid(fs: Sequence[GridFunction]) -> GridSpec:
    _same_grid(*fs)
    return fs[0].spec


def product(fs: Sequence[GridFunction]) -> GridFunction:
    _same_grid(*fs)
    out = np.ones(fs[0].spec.sizes, dtype=np.complex128)
    for f in fs:
        out = out * f.samples
    return GridFunction.from_samples(fs[0].spec, out)


# ---------------------------------------------------------------------------
# multipliers

def abs_power(x: np.ndarray, beta: float) -> np.ndarray:
    """|x|^beta with 0^beta = 0 for beta > 0 and 0^0 = 1."""
    a = np.abs(np.asarray(x, dtype=float))
    if beta == 0:
        return np.ones_like(a)
    with np.errstate(divide="ignore"):
        out = a ** beta
    if beta > 0:
        out[a == 0] = 0.0
    return out


def _zero_plane_mass(f: GridFunction, j: int) -> float:
    sl = [slice(None)] * f.N
    sl[j] = 0
    return float(np.abs(f.spectrum[tuple(sl)]).max(initial=0.0))


def fractional_derivative(f: GridFunction, orders, kind: str = "D",
                          mean_tol: float = 1e-12) -> GridFunction:
    """Apply prod_j |k_j|^{b_j} (kind ``"D"``) or prod_j (1+k_j^2)^{b_j/2} (``"J"``).

    Negative homogeneous orders need a vanishing spectrum on ``k_j = 0``; mass
    up to ``mean_tol`` times the largest coefficient is treated as round-off
    and discarded.
    """
    orders = [float(b) for b in orders]
    if len(orders) != f.N:
        raise ValueError(f"expected {f.N} orders, got {len(orders)}")
    if kind not in ("D", "J", "homogeneous", "inhomogeneous"):
        raise ValueError(f"unknown derivative kind {kind!r}")
    homogeneous = kind in ("D", "homogeneous")
    if all(b == 0 for b in orders):
        return f
    c = f.spectrum.copy()
    scale = float(np.abs(c).max(initial=0.0))
    for j, b in enumerate(orders):
        if b == 0:
            continue
        k = f.spec.frequency_grid(j)
        if homogeneous:
            if b < 0 and _zero_plane_mass(f, j) > mean_tol * scale:
                raise NegativeOrderOnNonzeroMeanMode(
                    f"order {b} on axis {j} needs zero spectrum on k_{j + 1} = 0")
            m = abs_power(k, b)
            if b < 0:
                m[k == 0] = 0.0
        else:
            m = (1.0 + k.astype(float) ** 2) ** (b / 2)
        c = c * m
    return GridFunction.from_spectrum(f.spec, c)


# ---------------------------------------------------------------------------
# Littlewood-Paley windows

def _theta(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def phi(xi) -> np.ndarray:
    """Smooth low-pass profile: 1 on |xi| <= 1, 0 on |xi| >= 2."""
    a = np.abs(np.asarray(xi, dtype=float))
    out = np.where(a <= 1.0, 1.0, 0.0)
    mid = (a > 1.0) & (a < 2.0)
    if np.any(mid):
        t1 = _theta(2.0 - a[mid])
        t2 = _theta(a[mid] - 1.0)
        out[mid] = t1 / (t1 + t2)
    return out


def psi(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    return phi(xi) - phi(2.0 * xi)


def lowpass_window(k: np.ndarray, m) -> np.ndarray:
    """Sum of the blocks Delta_l, -1 <= l <= m, as a multiplier on integers ``k``."""
    k = np.asarray(k)
    if m == math.inf:
        return np.ones(k.shape)
    if m < -1:
        return np.zeros(k.shape)
    return phi(k / 2.0 ** m)


def band_window(k: np.ndarray, lo, hi) -> np.ndarray:
    """Sum of the blocks Delta_l for lo <= l <= hi (``hi`` may be ``inf``)."""
    if hi < lo:
        return np.zeros(np.shape(k))
    return lowpass_window(k, hi) - lowpass_window(k, lo - 1)


MODES = ("delta", "S", "succ", "plus", "minus", "le")
_MODE_ALIASES = {"Δ": "delta", "Delta": "delta", "S": "S", "Δ_≻": "succ", "≻": "succ",
                 "Δ_+": "plus", "+": "plus", "Δ_-": "minus", "Δ_−": "minus", "-": "minus",
                 "Δ_≤": "le", "≤": "le"}


def _mode(mode: str) -> str:
    mode = _MODE_ALIASES.get(mode, mode)
    if mode not in MODES:
        raise ValueError(f"unknown projection mode {mode!r}")
    return mode


def window(k: np.ndarray, scale: int, mode: str = "delta") -> np.ndarray:
    """Multiplier of a Littlewood-Paley projection at ``scale``, on integer ``k``.

    ``delta`` is the annulus |k| ~ 2^scale (scale -1 is the mean), ``S`` the
    sum of blocks at least ``SEPARATION`` scales below, ``succ`` its
    complement, ``plus``/``minus`` the halves of ``delta`` on k >= 0 / k < 0,
    and ``le`` all blocks up to ``scale``.
    """
    mode = _mode(mode)
    k = np.asarray(k)
    if mode == "delta":
        return band_window(k, scale, scale)
    if mode == "S":
        return band_window(k, -1, scale - SEPARATION)
    if mode == "succ":
        return band_window(k, scale - SEPARATION + 1, math.inf)
    if mode == "le":
        return band_window(k, -1, scale)
    w = band_window(k, scale, scale)
    return w * (k >= 0) if mode == "plus" else w * (k < 0)


def _axis_multiply(f: GridFunction, j: int, m: np.ndarray) -> GridFunction:
    shape = [1] * f.N
    shape[j] = f.spec.sizes[j]
    return GridFunction.from_spectrum(f.spec, f.spectrum * m.reshape(shape))


def lp_project(f: GridFunction, j: int, k: int, mode: str = "delta") -> GridFunction:
    """Littlewood-Paley projection in axis ``j`` (0-based).

    Any integer scale is accepted; windows outside ``spec.scale_range(j)``
    are exactly the ones the formula gives on the lattice (empty for
    ``delta`` above the top scale or below -1).
    """
    return _axis_multiply(f, j, window(f.spec.frequencies(j), k, mode))


def band_project(f: GridFunction, j: int, lo, hi) -> GridFunction:
    return _axis_multiply(f, j, band_window(f.spec.frequencies(j), lo, hi))


def modulated_project(f: GridFunction, j: int, k: int, a: float,
                      mode: str = "delta") -> GridFunction:
    """Projection followed by the translation x_j -> x_j + a / 2^k."""
    freqs = f.spec.frequencies(j)
    m = window(freqs, k, mode) * np.exp(2j * np.pi * a * freqs / 2.0 ** k)
    return _axis_multiply(f, j, m)


def young_constant(spec: GridSpec, j: int, mode: str = "delta",
                   scales: Sequence[int] | None = None) -> dict:
    """Discrete L1 norm of each projection kernel, keyed by scale.

    Convolution with the kernel reproduces the projection on grid samples,
    so every grid L^p norm (p >= 1) grows at most by this factor.
    """
    freqs = spec.frequencies(j)
    scales = spec.scale_range(j) if scales is None else scales
    out = {}
    for k in scales:
        kern = np.fft.ifft(window(freqs, k, mode))
        out[k] = float(np.abs(kern).sum())
    return out


# ---------------------------------------------------------------------------
# test functions

def _box_draw(rng: np.random.Generator, N: int, B: int) -> np.ndarray:
    shape = (2 * B + 1,) * N
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _place(spec: GridSpec, box: np.ndarray, B: int, real: bool) -> GridFunction:
    """Embed coefficients indexed by (-B..B)^N into the grid spectrum."""
    N = spec.N
    c = np.zeros(spec.sizes, dtype=np.complex128)
    ks = np.arange(-B, B + 1)
    keep = []
    for j in range(N):
        lim = spec.sizes[j] // 2
        ok = (ks > -lim) & (ks < lim) if real else (ks >= -lim) & (ks < lim)
        keep.append(ok)
    sub = box[np.ix_(*keep)]
    idx = np.ix_(*[ks[keep[j]] % spec.sizes[j] for j in range(N)])
    c[idx] = sub
    return GridFunction.from_spectrum(spec, c)


def _hermitian(box: np.ndarray) -> np.ndarray:
    flipped = box[(slice(None, None, -1),) * box.ndim]
    return 0.5 * (box + np.conj(flipped))


def random_band_limited(spec: GridSpec, seed, sigma: float, real: bool = True,
                        zero_mean: bool = False, box: int | None = None) -> GridFunction:
    """Gaussian random coefficients damped by exp(-|k|^2 / sigma^2).

    Coefficients are drawn on the frequency box |k_j| <= ``box`` (default
    ceil(6 sigma)), independently of the grid, so the same seed produces the
    same function on every grid that resolves it.  ``zero_mean`` clears every
    hyperplane k_j = 0.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    B = box if box is not None else max(1, math.ceil(6 * sigma))
    rng = np.random.default_rng(seed)
    c = _box_draw(rng, spec.N, B)
    ks = np.arange(-B, B + 1, dtype=float)
    r2 = sum(np.meshgrid(*([ks ** 2] * spec.N), indexing="ij"))
    c = c * np.exp(-r2 / sigma ** 2)
    if zero_mean:
        for j in range(spec.N):
            sl = [slice(None)] * spec.N
            sl[j] = B
            c[tuple(sl)] = 0.0
    if real:
        c = _hermitian(c)
    return _place(spec, c, B, real)


def random_sparse(spec: GridSpec, seed, modes: int, max_frequency: int | None = None,
                  real: bool = False, zero_mean: bool = False) -> GridFunction:
    """A function with ``modes`` random frequencies and Gaussian coefficients."""
    rng = np.random.default_rng(seed)
    lims = [max_frequency if max_frequency is not None else m // 2 - 1 for m in spec.sizes]
    chosen = {}
    while len(chosen) < modes:
        k = tuple(int(rng.integers(-L, L + 1)) for L in lims)
        if zero_mean and any(kj == 0 for kj in k):
            continue
        if k not in chosen:
            chosen[k] = complex(rng.standard_normal(), rng.standard_normal())
    if real:
        sym = {}
        for k, a in chosen.items():
            mk = tuple(-kj for kj in k)
            sym[k] = sym.get(k, 0) + a / 2
            sym[mk] = sym.get(mk, 0) + np.conj(a) / 2
        chosen = sym
    return GridFunction.from_modes(spec, chosen)


def random_block(spec: GridSpec, seed, scales: Sequence[int], real: bool = True) -> GridFunction:
    """Random coefficients on the dyadic block 2^(k_j - 1) < |k_j| < 2^(k_j + 1).

    The coefficients are weighted by the window of that block, so the result
    is a single Littlewood-Paley block in every axis.
    """
    rng = np.random.default_rng(seed)
    B = max(1 << (k + 1) for k in scales)
    c = _box_draw(rng, spec.N, B)
    ks = np.arange(-B, B + 1)
    w = 1.0
    for j, k in enumerate(scales):
        shape = [1] * spec.N
        shape[j] = ks.size
        w = w * window(ks, k, "delta").reshape(shape)
    c = c * w
    if real:
        c = _hermitian(c)
    return _place(spec, c, B, real)


def dilate(f: GridFunction, factors: Sequence[int]) -> GridFunction:
    """Send mode k to (m_1 k_1, ..., m_N k_N) on a grid refined by the same factors.

    The result is f(m_1 x_1, ..., m_N x_N); its samples tile those of f.
    """
    factors = [int(m) for m in factors]
    spec = GridSpec(tuple(m * M for m, M in zip(factors, f.spec.sizes)),
                    budget=max(f.spec.budget, f.spec.points * math.prod(factors)))
    freqs, coefs = f.active_modes()
    c = np.zeros(spec.sizes, dtype=np.complex128)
    idx = tuple((freqs[:, j] * factors[j]) % spec.sizes[j] for j in range(f.N))
    np.add.at(c, idx, coefs)
    return GridFunction.from_spectrum(spec, c)


# ---------------------------------------------------------------------------
# binary dump

def dump_grid(f: GridFunction, path) -> None:
    """Little-endian header (N, M_1..M_N as uint32) then complex64 samples, row-major."""
    header = struct.pack("<I", f.N) + struct.pack(f"<{f.N}I", *f.spec.sizes)
    data = np.ascontiguousarray(f.samples, dtype="<c8").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data)


def load_grid(path) -> GridFunction:
    with open(path, "rb") as fh:
        raw = fh.read()
    (N,) = struct.unpack_from("<I", raw, 0)
    sizes = struct.unpack_from(f"<{N}I", raw, 4)
    off = 4 + 4 * N
    samples = np.frombuffer(raw, dtype="<c8", offset=off).reshape(sizes).astype(np.complex128)
    spec = GridSpec(sizes, budget=max(DEFAULT_POINT_BUDGET, math.prod(sizes)))
    return GridFunction.from_samples(spec, samples)
