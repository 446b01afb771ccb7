import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ion_nlcs.errors import DomainError, PreconditionError
from ion_nlcs.fock_ops import Flag, nonlinearity_profile
from ion_nlcs.laguerre import laguerre_eval, laguerre_rows
from ion_nlcs.singularity import (
    build_atlas,
    classify_eta2,
    nearest_root,
    pole_ratio_sequence,
    require_root,
    window_oscillation,
    window_starts,
)

THREE_ZEROS = [0.415774556783479, 2 - math.sqrt(2), 1.0, 2.294280360279042, 2 + math.sqrt(2)]


class TestAtlas:
    def test_degree_one(self):
        atlas = build_atlas(1, (0, 5))
        got = [(e.eta2_root, e.degree, e.alpha, e.kind, e.first_affected_index) for e in atlas.entries]
        assert len(got) == 2
        assert got[0][0] == pytest.approx(1.0) and got[0][1:] == (1, 0, "Zero", 2)
        assert got[1][0] == pytest.approx(2.0) and got[1][1:] == (1, 1, "Pole", 2)

    def test_degree_three_zeros(self):
        zeros = sorted(e.eta2_root for e in build_atlas(3, (0, 5)).zeros())
        np.testing.assert_allclose(zeros, sorted(THREE_ZEROS), atol=1e-12)

    def test_degree_three_poles(self):
        poles = sorted(e.eta2_root for e in build_atlas(3, (0, 5)).poles())
        # L_1^(1): 2; L_2^(1): 3 -+ sqrt(3); L_3^(1): three roots, two inside (0, 5]
        assert len(poles) == 5
        for r in (2.0, 3 - math.sqrt(3), 3 + math.sqrt(3)):
            assert min(abs(np.array(poles) - r)) < 1e-12

    def test_empty(self):
        assert build_atlas(2, (0, 0.3)).entries == ()

    def test_sorted_and_unique(self):
        atlas = build_atlas(12, (0, 10))
        roots = np.array(atlas.roots)
        assert np.all(np.diff(roots) >= 0)
        for a in (0, 1):
            r = np.array([e.eta2_root for e in atlas.entries if e.alpha == a])
            assert np.all(np.diff(r) > 1e-12)

    @pytest.mark.parametrize("J", [1, 4, 9])
    def test_completeness(self, J):
        atlas = build_atlas(J, (0, 1e3))
        assert len(atlas.zeros()) == J * (J + 1) // 2
        assert len(atlas.poles()) == J * (J + 1) // 2

    def test_roots_reevaluate(self):
        for e in build_atlas(60, (0, 10)).entries:
            assert abs(laguerre_eval(e.degree, e.alpha, e.eta2_root)) <= 1e-11

    def test_json(self):
        js = build_atlas(1, (0, 5)).to_json()
        assert js["degree_max"] == 1 and js["range"] == [0.0, 5.0]
        assert js["entries"][0]["kind"] == "Zero"
        assert js["entries"][1]["first_affected_index"] == 2

    def test_bad_inputs(self):
        with pytest.raises(DomainError):
            build_atlas(0, (0, 5))
        with pytest.raises(DomainError):
            build_atlas(2, (5, 1))


class TestClassify:
    atlas = build_atlas(3, (0, 5))

    def test_safe(self):
        c = classify_eta2(self.atlas, 0.05, 1e-6)
        assert c.kind == "Safe"
        assert c.distance == pytest.approx(0.415774556783479 - 0.05, abs=1e-12)
        assert str(c).startswith("Safe(0.3657")

    def test_at_zero(self):
        c = classify_eta2(self.atlas, 1.0000000001, 1e-6)
        assert (c.kind, c.index, str(c)) == ("AtZero", 2, "AtZero(2)")

    def test_at_pole(self):
        c = classify_eta2(self.atlas, 2.0, 1e-6)
        assert (c.kind, c.index) == ("AtPole", 2)

    def test_out_of_range(self):
        with pytest.raises(DomainError):
            classify_eta2(self.atlas, 6.0)
        with pytest.raises(DomainError):
            classify_eta2(self.atlas, 0.0)

    def test_consistent_with_profile_flags(self):
        atlas = build_atlas(8, (0, 10))
        for e in atlas.entries:
            c = classify_eta2(atlas, e.eta2_root)
            prof = nonlinearity_profile(1, e.eta2_root, e.degree + 1)
            flag = prof.flags[c.index - 1]
            if c.kind == "AtZero":
                assert flag is Flag.INFINITE
            else:
                assert c.kind == "AtPole" and flag is Flag.ZERO

    @settings(max_examples=50, deadline=None)
    @given(x=st.floats(0.001, 5.0))
    def test_distance_matches_atlas(self, x):
        c = classify_eta2(self.atlas, x, 1e-6)
        assert c.distance == pytest.approx(self.atlas.distance(x), abs=1e-15)
        assert (c.kind == "Safe") == (c.distance > 1e-6)


class TestRootChecks:
    def test_nearest(self):
        assert nearest_root(2, 0, 3.0) == pytest.approx(2 + math.sqrt(2))
        assert nearest_root(0, 0, 3.0) is None

    def test_require_names_nearest(self):
        with pytest.raises(PreconditionError, match="nearest root is 2.0"):
            require_root(1, 1, 1.9, 1e-9)
        with pytest.raises(PreconditionError, match="no roots"):
            require_root(0, 0, 1.0, 1e-9)


@pytest.fixture(scope="module")
def diag():
    return pole_ratio_sequence(2, 2.0, 0.1, 10_000)


class TestPoleDiagnostics:
    def test_verdict(self, diag):
        assert diag.verdict == "NonCauchy"
        assert [w["J"] for w in diag.windows] == window_starts(10_000)
        assert all(w["oscillation"] > 0.1 for w in diag.windows)

    def test_ratios_non_negative(self, diag):
        assert np.all(diag.exact_ratios >= 0)

    def test_ratio_formula(self, diag):
        j = np.arange(0, 10_001, 997)
        L0 = laguerre_rows(10_002, 0, 2.0)
        L1 = laguerre_rows(10_002, 1, 2.0)
        expect = 0.01 * (2 + j + 1) * (L0[2 + j] / L1[2 + j]) ** 2
        np.testing.assert_allclose(diag.exact_ratios[j], expect, rtol=1e-12)

    def test_partial_sums(self, diag):
        # first term s_0 = |xi|^(2 mu) / mu!, then s_{j+1} = s_j * ratio_j
        assert diag.partial_log_sums[0] == pytest.approx(math.log(1e-4 / 2))
        s = np.exp(math.log(1e-4 / 2) + np.concatenate([[0.0], np.cumsum(np.log(diag.exact_ratios[:20]))]))
        np.testing.assert_allclose(np.exp(diag.partial_log_sums[:21]), np.cumsum(s), rtol=1e-12)

    def test_oscillation_shared_with_surrogate(self, diag):
        for J in (1024, 2048, 4096):
            win = slice(J, 2 * J + 1)
            for seq in (diag.exact_ratios[win], diag.asymptotic_ratios[win]):
                v = seq[np.isfinite(seq)]
                med = np.median(v)
                assert v.max() > 2 * med and v.min() < 0.5 * med

    @pytest.mark.parametrize("scale", [0.01, 3.0])
    def test_verdict_scale_free(self, scale):
        a = pole_ratio_sequence(2, 2.0, 0.1, 2048)
        b = pole_ratio_sequence(2, 2.0, 0.1 * scale, 2048)
        assert a.verdict == b.verdict
        for wa, wb in zip(a.windows, b.windows):
            assert wa["oscillation"] == pytest.approx(wb["oscillation"], rel=1e-10)

    def test_other_pole(self):
        r = 3 - math.sqrt(3)
        d = pole_ratio_sequence(3, r, 0.2, 4096)
        assert d.verdict == "NonCauchy"

    def test_csv_rows(self, diag):
        rows = list(diag.csv_rows())
        assert len(rows) == 10_001 and rows[0][0] == 0
        assert diag.summary()["verdict"] == "NonCauchy"

    @pytest.mark.parametrize("args", [(1, 2.0, 0.1, 256), (2, 2.5, 0.1, 256), (2, 2.0, 0.0, 256),
                                      (2, 2.0, 0.1, 100)])
    def test_preconditions(self, args):
        with pytest.raises(DomainError):
            pole_ratio_sequence(*args)


def test_window_oscillation():
    assert window_oscillation(np.array([1.0, 1.0, 1.0])) == 0.0
    assert window_oscillation(np.array([1.0, 2.0, 3.0])) == pytest.approx(1.0)
    assert window_oscillation(np.array([np.inf, 1.0, 3.0])) == pytest.approx(1.0)
