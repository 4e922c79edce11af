"""The ten acceptance criteria, each at its stated tolerance and time limit.

Run directly (``python tests/test_acceptance.py``) or through pytest; the
terminal summary prints one PASS/FAIL line per criterion.
"""
import math
import time
from contextlib import contextmanager
from decimal import Decimal

import numpy as np
import pytest

from flagcalc.decompose import (commutator_localized_symbol, commutator_symbol, cone_reassemble,
                                diagonal_symbol, paraproduct_split, symbol_fourier_expand)
from flagcalc.flagop import eval_direct_oracle, eval_flag_recursive, flag_symbol
from flagcalc.flagtree import ExponentTuple, check_exponents, enumerate_delta_maps, single_parameter_maps
from flagcalc.norms import interpolation_check, mixed_norm
from flagcalc.spectral import (GridFunction, GridSpec, lp_project, random_band_limited,
                               random_sparse)
from flagcalc.verify import (Experiment, leibniz_ratio, lemma_bounds_sweep,
                             local_product_equality, scaling_probe, smoothing_experiment)

from helpers import brute_force_maps, build, five_linear, leaf_count, shapes

acceptance = pytest.mark.acceptance


@contextmanager
def within(seconds):
    t0 = time.perf_counter()
    yield
    elapsed = time.perf_counter() - t0
    assert elapsed < seconds, f"took {elapsed:.1f} s, limit {seconds} s"


def rel_l2(a, b):
    return float(np.linalg.norm(a.spectrum - b.spectrum) / np.linalg.norm(b.spectrum))


def _random_orders(N, seed):
    rng = np.random.default_rng(seed)
    return lambda vid: tuple(float(x) for x in np.round(rng.uniform(0, 2, N), 2))


@acceptance(1, "derivative-map enumeration")
def test_delta_enumeration():
    with within(1):
        tree = five_linear()
        assert len(single_parameter_maps(tree)) == 12
        assert len(enumerate_delta_maps(tree)) == 144
        count = 0
        for shape, _ in shapes(8):
            t = build(shape, lambda vid: (Decimal(vid + 1) / 10,))
            assert set(single_parameter_maps(t)) == brute_force_maps(t)
            count += 1
        assert count == 62


@acceptance(2, "constraint reproduction")
def test_constraint_families():
    with within(1):
        res = check_exponents(five_linear(), ExponentTuple.uniform(5, 2, 5))
        assert res.passed
        families = {(c.leaves, c.parameter, c.governing) for c in res.constraints}
        assert len(res.constraints) == 6
        assert families == {
            ((1, 2, 3, 4, 5), 1, (1, 2)), ((1, 2), 1, (1, 2)), ((4, 5), 1, (1, 2)),
            ((1, 2, 3, 4, 5), 2, (2,)), ((1, 2), 2, (2,)), ((4, 5), 2, (2,)),
        }
        all_two = check_exponents(five_linear((2, 2), (2, 2), (2, 2)), ExponentTuple.uniform(5, 2, 1))
        assert all_two.passed and all_two.constraints == ()


@acceptance(3, "recursive evaluator matches the lattice-sum oracle")
def test_oracle_equivalence():
    with within(30):
        worst = 0.0
        for N in (1, 2):
            spec = GridSpec((16,) * N)
            for i, (shape, _) in enumerate(shapes(5)):
                n = leaf_count(shape)
                if n > 3:
                    continue
                tree = build(shape, _random_orders(N, i))
                if N == 1:
                    fs = [random_band_limited(spec, 100 * i + l, 2.5) for l in range(n)]
                else:
                    fs = [random_sparse(spec, 100 * i + l, 40, real=True) for l in range(n)]
                worst = max(worst, rel_l2(eval_flag_recursive(tree, fs),
                                          eval_direct_oracle(flag_symbol(tree), fs)))
        for N, orders in ((1, ((0.5,), (0.3,), (0.7,))), (2, ((0.5, 1.0), (0.3, 0.2), (0.7, 0.1)))):
            spec = GridSpec((8,) * N)
            tree = five_linear(*orders)
            fs = [random_sparse(spec, 10 + l, 4) for l in range(5)]
            worst = max(worst, rel_l2(eval_flag_recursive(tree, fs),
                                      eval_direct_oracle(flag_symbol(tree), fs)))
        assert worst <= 1e-10


@acceptance(4, "commutator symbol identity")
def test_commutator_identity():
    with within(5):
        for alpha in (0.3, 0.5, 1.0, 1.5, 2.0):
            rng = np.random.default_rng(int(alpha * 100))
            hi = rng.uniform(0.01, 1e3, 10_000) * rng.choice([-1, 1], 10_000)
            lo = hi * rng.uniform(-0.5, 0.5, 10_000)
            lo = np.where(lo == 0, 1e-3 * hi, lo)
            q, g = commutator_symbol(alpha, hi, lo)
            assert np.all(np.abs(q - g) <= 1e-8 * np.abs(q))
            if alpha == 1.0:
                q, g = commutator_symbol(1.0, np.abs(hi), lo)
                assert np.abs(q - 1).max() <= 1e-12 and np.abs(g - 1).max() <= 1e-12
            if alpha == 2.0:
                exact = lo + 2 * hi
                assert np.all(np.abs(q - exact) <= 1e-12 * np.abs(exact))
                assert np.all(np.abs(g - exact) <= 1e-12 * np.abs(exact))


@acceptance(5, "Fourier coefficient decay of localized symbols")
def test_coefficient_decay():
    with within(60):
        for alpha in (0.5, 1.5):
            exp = symbol_fourier_expand(diagonal_symbol(alpha, 0), truncation=512)
            assert 1 + alpha - 0.15 <= exp.decay_exponent <= 1 + alpha + 0.3, exp.decay_exponent
        fast = symbol_fourier_expand(commutator_localized_symbol(0.5, 0), truncation=512,
                                     method="trapezoid")
        L = fast.indices()
        l1 = np.abs(L)[:, None] + np.abs(L)[None, :]
        weighted = np.abs(fast.coefficients) * (1.0 + l1) ** 6
        inner = np.maximum(np.abs(L)[:, None], np.abs(L)[None, :]) <= 256
        C = weighted[inner].max()
        assert np.all(weighted <= C)


@acceptance(6, "cone and paraproduct reassembly")
def test_reassembly():
    with within(30):
        spec = GridSpec((16,))
        checked = 0
        for i, (shape, _) in enumerate(shapes(7)):
            n = leaf_count(shape)
            if n > 4:
                continue
            tree = build(shape, _random_orders(1, i))
            fs = [random_band_limited(spec, 10 * i + l, 3.0) for l in range(n)]
            total, _ = cone_reassemble(tree, fs)
            assert rel_l2(total, eval_flag_recursive(tree, fs)) <= 1e-11
            checked += 1
        assert checked == 15
        for sizes in ((64,), (32, 16)):
            sp = GridSpec(sizes)
            f, g = random_band_limited(sp, 1, 8.0), random_band_limited(sp, 2, 8.0)
            pp = paraproduct_split(f, g)
            prod = f.resample(pp.diagonal.spec) * g.resample(pp.diagonal.spec)
            assert np.abs((pp.total() - prod).samples).max() <= 1e-12 * np.abs(prod.samples).max()


@acceptance(7, "fixed-scale bilinear bound sweeps")
def test_lemma_sweeps():
    with within(120):
        rep = lemma_bounds_sweep(0.5, 2, 2, [32, 64], trials=4)
        assert rep.finite()
        assert all(len(c) == 4 for c in rep.constants.values())
        assert abs(local_product_equality(0.5, 2, 2) - 1) <= 1e-9
        assert abs(rep.trend("commutator") - 1) <= 0.25


@pytest.mark.parametrize("label", ["one-parameter", "bi-parameter"])
@acceptance(8, "Leibniz ratio stability")
def test_leibniz_stability(label):
    with within(300):
        if label == "one-parameter":
            tree, ex, sizes = five_linear((0.5,), (0.3,), (0.7,)), ExponentTuple.uniform(5, 1, 5), (16,)
        else:
            tree, ex, sizes = five_linear(), ExponentTuple.uniform(5, 2, 5), (16, 16)
        small = leibniz_ratio(Experiment(tree, ex, GridSpec(sizes), trials=100, sigma=3.0))
        big = leibniz_ratio(Experiment(tree, ex, GridSpec(tuple(2 * m for m in sizes)),
                                       trials=100, sigma=3.0))
        assert math.isfinite(small.max) and math.isfinite(big.max)
        assert abs(big.max - small.max) <= 0.15 * small.max
        block = Experiment(tree, ex, GridSpec((8,) * len(sizes)), trials=1, profile="block",
                           scales=(1,) * len(sizes), dilations=(1, 2))
        for r in scaling_probe(block):
            assert r.ratio_change <= 1e-9


@acceptance(9, "smoothing probe")
def test_smoothing_probe():
    with within(60):
        ex = ExponentTuple([2, 2])
        for s in (0.25, 0.75, 0.5):
            rep = leibniz_ratio(smoothing_experiment([0.5], [s], 2, ex, GridSpec((16,)),
                                                     trials=100))
            assert len(rep.rows) == 100
            assert np.all(np.isfinite(rep.ratios))


@acceptance(10, "norm layer identities")
def test_norm_layer():
    with within(10):
        rng = np.random.default_rng(10)
        worst = 0.0
        for i in range(1000):
            f = random_band_limited(GridSpec((32,)), i, float(rng.uniform(1, 8)))
            s0 = float(rng.uniform(-1, 1))
            s1 = s0 + float(rng.uniform(0, 2))
            s = s0 + float(rng.uniform(0, 1)) * (s1 - s0)
            p = float(rng.choice([1.0, 2.0, 4.0, math.inf]))
            worst = max(worst, interpolation_check(f, 0, s0, s, s1, p=p, companions=[]).ratio)
        assert worst <= 1 + 1e-12
        # the mixed-norm axis order: sup first vs. mean first on g(x - y)
        t = np.arange(16) / 16
        fx = GridFunction.from_samples(GridSpec((16, 16)),
                                       ((1 + np.cos(2 * np.pi * (t[:, None] - t[None, :]))) / 2) ** 4)
        assert abs(mixed_norm(fx, [1, math.inf]) - 1.0) <= 1e-14
        assert abs(mixed_norm(fx, [math.inf, 1]) - 70 / 256) <= 1e-14
        spec = GridSpec((32, 16))
        f = random_band_limited(spec, 3, 6.0, real=False)
        parseval = np.sum(np.abs(f.samples) ** 2) / spec.points
        assert abs(parseval - np.sum(np.abs(f.spectrum) ** 2)) <= 1e-12 * parseval
        scale = np.abs(f.samples).max()
        for j in range(2):
            acc = sum((lp_project(f, j, k) for k in spec.scale_range(j)),
                      GridFunction.constant(spec, 0))
            assert np.abs((acc - f).samples).max() <= 1e-12 * scale
            for k in range(-1, 6):
                both = lp_project(f, j, k, "S") + lp_project(f, j, k, "succ")
                assert np.abs((both - f).samples).max() <= 1e-12 * scale


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
