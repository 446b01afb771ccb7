import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_genlaguerre

from ion_nlcs.errors import DomainError, SingularPointError
from ion_nlcs.laguerre import (
    ROOT_TOL,
    asymptotic_ratio_factors,
    laguerre_asymptotic_ratio_factor,
    laguerre_eval,
    laguerre_roots,
    laguerre_row,
    laguerre_rows,
    root_chain,
)


def explicit_sum(n, alpha, x):
    """L_n^(alpha)(x) = sum_m (-1)^m C(n+alpha, n-m) x^m / m!, in exact rationals via mpmath."""
    mpmath.mp.dps = 50
    x = mpmath.mpf(x)
    return float(sum((-1) ** m * mpmath.binomial(n + alpha, n - m) * x**m / mpmath.factorial(m) for m in range(n + 1)))


class TestEval:
    def test_degree_zero(self):
        assert laguerre_eval(0, 0, 3.7) == 1.0

    def test_linear_alpha1(self):
        assert laguerre_eval(1, 1, 2.0) == 0.0

    def test_quadratic_root(self):
        assert abs(laguerre_eval(2, 0, 2 - math.sqrt(2))) <= 1e-14

    def test_cubic_at_one(self):
        # 1 - 3 + 3/2 - 1/6
        assert laguerre_eval(3, 0, 1.0) == pytest.approx(-2 / 3, abs=1e-15)

    def test_rows_at_origin(self):
        np.testing.assert_array_equal(laguerre_row(2, 0, 0.0).values, [1, 1, 1])
        np.testing.assert_array_equal(laguerre_row(2, 1, 0.0).values, [1, 2, 3])

    def test_row_at_one(self):
        np.testing.assert_allclose(laguerre_row(2, 0, 1.0).values, [1, 0, -0.5], atol=1e-15)

    def test_binomial_at_origin(self):
        for alpha in range(4):
            vals = laguerre_row(30, alpha, 0.0).values
            expect = [math.comb(n + alpha, n) for n in range(31)]
            np.testing.assert_allclose(vals, expect, rtol=1e-14)

    @pytest.mark.parametrize("alpha", [0, 1, 2, 3, 5])
    @pytest.mark.parametrize("x", [0.05, 0.7, 2.0, 4.9, 11.3])
    def test_matches_explicit_sum(self, alpha, x):
        row = laguerre_row(40, alpha, x).values
        for n in (0, 1, 2, 7, 19, 40):
            ref = explicit_sum(n, alpha, x)
            scale = max(1.0, abs(ref))
            assert abs(row[n] - ref) <= 1e-11 * scale

    def test_matches_scipy(self):
        xs = np.linspace(0.01, 30, 37)
        for alpha in (0, 1, 2):
            rows = laguerre_rows(60, alpha, xs)
            for n in (5, 30, 60):
                ref = eval_genlaguerre(n, alpha, xs)
                np.testing.assert_allclose(rows[n], ref, rtol=1e-9, atol=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(0, 120), alpha=st.integers(0, 6), x=st.floats(0, 50))
    def test_eval_bit_identical_to_row(self, n, alpha, x):
        assert laguerre_eval(n, alpha, x) == laguerre_row(n, alpha, x).values[n]

    def test_row_is_read_only(self):
        row = laguerre_row(3, 0, 1.0)
        with pytest.raises(ValueError):
            row.values[0] = 2.0
        assert row.degree_max == 3

    @pytest.mark.parametrize("args", [(-1, 0, 1.0), (2, -1, 1.0), (2, 0, math.nan), (2, 0, -0.1),
                                      (2, 0, math.inf), (1.5, 0, 1.0), (True, 0, 1.0)])
    def test_domain_errors(self, args):
        with pytest.raises(DomainError):
            laguerre_eval(*args)


class TestIdentities:
    def test_three_term_recurrence(self):
        xs = np.linspace(0, 50, 101)
        for alpha in (0, 1, 2, 3):
            L = laguerre_rows(200, alpha, xs)
            for n in range(1, 200):
                lhs = (n + 1) * L[n + 1]
                t1 = (2 * n + 1 + alpha - xs) * L[n]
                t2 = (n + alpha) * L[n - 1]
                scale = np.maximum.reduce([np.abs(lhs), np.abs(t1), np.abs(t2), np.ones_like(xs)])
                assert np.max(np.abs(lhs - t1 + t2) / scale) <= 1e-12

    def test_contiguous_parameter(self):
        xs = np.linspace(0, 50, 101)
        L0 = laguerre_rows(100, 0, xs)
        L1 = laguerre_rows(100, 1, xs)
        partial = np.cumsum(L0, axis=0)
        scale = np.maximum(1.0, np.cumsum(np.abs(L0), axis=0))
        assert np.max(np.abs(L1 - partial) / scale) <= 1e-11


class TestRoots:
    def test_linear(self):
        (r,) = laguerre_roots(1, 0, (0, 5))
        assert r.root == pytest.approx(1.0, abs=1e-13)
        (r,) = laguerre_roots(1, 1, (0, 5))
        assert r.root == pytest.approx(2.0, abs=1e-13)

    def test_quadratic(self):
        got = [r.root for r in laguerre_roots(2, 0, (0, 5))]
        np.testing.assert_allclose(got, [2 - math.sqrt(2), 2 + math.sqrt(2)], atol=1e-13)
        got = [r.root for r in laguerre_roots(2, 1, (0, 10))]
        np.testing.assert_allclose(got, [3 - math.sqrt(3), 3 + math.sqrt(3)], atol=1e-13)

    def test_cubic_in_range(self):
        got = [r.root for r in laguerre_roots(3, 0, (0, 5))]
        assert len(got) == 2
        np.testing.assert_allclose(got, [0.415774556783479, 2.294280360279042], atol=1e-12)

    @pytest.mark.parametrize("n", [3, 8, 20, 40])
    def test_alpha0_against_numpy(self, n):
        ref = np.sort(np.polynomial.laguerre.lagroots([0] * n + [1]))
        got = np.array([r.root for r in laguerre_roots(n, 0, (0, 1e3))])
        np.testing.assert_allclose(got, ref, rtol=1e-9)

    def test_half_open_interval(self):
        (rec,) = laguerre_roots(1, 0, (0.5, 2.0))
        assert [r.root for r in laguerre_roots(1, 0, (0.5, rec.root))] == [rec.root]
        assert laguerre_roots(1, 0, (rec.root, 2.0)) == []

    def test_empty_is_fine(self):
        assert laguerre_roots(2, 0, (0, 0.3)) == []

    @pytest.mark.parametrize("bad", [(5, 1), (-1, 2), (0, math.inf), (1, 1)])
    def test_bad_range(self, bad):
        with pytest.raises(DomainError):
            laguerre_roots(2, 0, bad)

    def test_degree_zero_rejected(self):
        with pytest.raises(DomainError):
            laguerre_roots(0, 0, (0, 1))

    @pytest.mark.parametrize("alpha", [0, 1, 2])
    def test_count_and_interlacing(self, alpha):
        chain = root_chain(30, alpha)
        for j, (roots, _) in enumerate(chain, start=1):
            assert len(roots) == j
            assert np.all(np.diff(roots) > 0) and roots[0] > 0
            if j > 1:
                prev = chain[j - 2][0]
                # x_1^(j) < x_1^(j-1) < x_2^(j) < ... < x_{j-1}^(j-1) < x_j^(j)
                assert np.all(roots[:-1] < prev) and np.all(prev < roots[1:])

    def test_residuals_small_on_atlas_range(self):
        for alpha in (0, 1):
            for n, (roots, res) in enumerate(root_chain(60, alpha), start=1):
                inside = roots <= 10
                assert np.all(res[inside] <= ROOT_TOL)
                for r in roots[inside]:
                    assert abs(laguerre_eval(n, alpha, r)) <= ROOT_TOL

    @pytest.mark.parametrize("n,alpha", [(5, 0), (12, 1), (25, 2)])
    def test_roots_against_mpmath(self, n, alpha):
        mpmath.mp.dps = 40
        for rec in laguerre_roots(n, alpha, (0, 1e3)):
            ref = mpmath.findroot(lambda x: mpmath.laguerre(n, alpha, x), rec.root)
            assert abs(rec.root - float(ref)) <= 1e-12 * max(1.0, rec.root)


class TestAsymptoticFactor:
    def test_tan_one(self):
        # 2 sqrt(mu+j) - pi/4 = 5 pi/4 with eta_bar = 1; the pi/4 branch needs mu+j < 1
        j = (3 * math.pi / 4) ** 2 - 2
        assert laguerre_asymptotic_ratio_factor(2, j, 1.0) == pytest.approx(1.0, rel=1e-12)

    def test_direct_scalar(self):
        eb = math.sqrt(2)
        expect = 2 / math.tan(2 * math.sqrt(200) - math.pi / 4) ** 2
        assert laguerre_asymptotic_ratio_factor(2, 98, eb) == pytest.approx(expect, rel=1e-12)

    def test_pole_raises_with_argument(self):
        # 2 sqrt(mu+j) - pi/4 = pi/2 with eta_bar = 1
        j = (3 * math.pi / 8) ** 2 - 2
        with pytest.raises(SingularPointError) as info:
            laguerre_asymptotic_ratio_factor(2, j, 1.0)
        assert info.value.argument == pytest.approx(math.pi / 2)

    def test_preconditions(self):
        with pytest.raises(DomainError):
            laguerre_asymptotic_ratio_factor(0, 0, 1.0)
        with pytest.raises(DomainError):
            laguerre_asymptotic_ratio_factor(2, 3, 0.0)

    def test_array_form_marks_poles(self):
        j_pole = (3 * math.pi / 8) ** 2 - 2
        out = asymptotic_ratio_factors(2, [0.0, j_pole, 98.0], 1.0)
        assert math.isnan(out[1])
        assert out[0] == pytest.approx(laguerre_asymptotic_ratio_factor(2, 0, 1.0))
        assert out[2] == pytest.approx(laguerre_asymptotic_ratio_factor(2, 98, 1.0))

    def test_tracks_exact_ratio_in_bulk(self):
        # pointwise agreement drifts; the geometric means over a long run stay close
        mu, x = 2, 0.3
        js = np.arange(2000, 4000)
        L0 = laguerre_rows(mu + 4000, 0, x)[mu + js]
        L1 = laguerre_rows(mu + 4000, 1, x)[mu + js]
        exact = (mu + js + 1) * (L0 / L1) ** 2
        asym = asymptotic_ratio_factors(mu, js, math.sqrt(x))
        ok = np.isfinite(asym) & (exact > 0) & (asym > 0)
        diff = np.median(np.log(exact[ok])) - np.median(np.log(asym[ok]))
        assert abs(diff) < 0.5
