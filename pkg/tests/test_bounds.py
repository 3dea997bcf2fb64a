"""Interval-width formulas against independently computed values.

Expected constants were evaluated with mpmath at 30 significant digits
and frozen here; tests assert to 1e-6 absolute.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamtrees import bounds


class TestHoeffdingInterval:
    def test_frozen_value(self):
        assert bounds.hoeffding_interval(200, 0.05, 1.0) == pytest.approx(0.086540919130, abs=1e-9)

    def test_limit_behaviour(self):
        assert bounds.hoeffding_interval(10**8, 0.05, 1.0) < 2e-4

    def test_exact_cancellation(self):
        # ln(e^2) / 2 = 1
        assert bounds.hoeffding_interval(1, math.exp(-2), 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_range_scales_linearly(self):
        one = bounds.hoeffding_interval(50, 0.1, 1.0)
        assert bounds.hoeffding_interval(50, 0.1, 3.0) == pytest.approx(3 * one)

    @pytest.mark.parametrize("m,delta,rng", [(0, 0.05, 1.0), (10, 0.0, 1.0), (10, 1.0, 1.0), (10, 0.05, 0.0)])
    def test_domain_errors(self, m, delta, rng):
        with pytest.raises(ValueError):
            bounds.hoeffding_interval(m, delta, rng)


class TestMcDiarmidEntropyInterval:
    def test_frozen_value(self):
        # C(2, 1000) = 85.107046...; the full width at delta = 0.05
        assert bounds.mcdiarmid_entropy_interval(1000, 0.05, 2) == pytest.approx(
            3.293836357656, abs=1e-9
        )

    def test_halving_ratio_below_one(self):
        for m in [1, 2, 5, 17, 100, 1111, 10**5, 10**6]:
            ratio = bounds.mcdiarmid_entropy_interval(2 * m, 0.05) / bounds.mcdiarmid_entropy_interval(m, 0.05)
            assert ratio < 1.0

    def test_conservative_at_small_m(self):
        # far above the scaled-entropy gain range, so no split can fire
        assert bounds.mcdiarmid_entropy_interval(100, 0.05, 2) == pytest.approx(
            7.976653440263, abs=1e-9
        )
        assert bounds.mcdiarmid_entropy_interval(100, 0.05, 2) > 1.0

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            bounds.mcdiarmid_entropy_interval(0, 0.05)
        with pytest.raises(ValueError):
            bounds.mcdiarmid_entropy_interval(10, 0.05, num_classes=1)


class TestEntropyInterval:
    def test_frozen_values(self):
        assert bounds.entropy_interval(100, 0.05) == pytest.approx(1.383321201609, abs=1e-9)
        assert bounds.entropy_interval(2, 0.05) == pytest.approx(2.450985149372, abs=1e-9)

    def test_decreasing_beyond_eight(self):
        values = [bounds.entropy_interval(m, 0.05) for m in range(8, 10**6, 997)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_requires_two_examples(self):
        with pytest.raises(ValueError):
            bounds.entropy_interval(1, 0.05)


class TestGiniInterval:
    def test_frozen_value(self):
        assert bounds.gini_interval(1000, 0.1) == pytest.approx(0.281300208815, abs=1e-9)

    def test_exact_cancellation(self):
        # ln(2 / (2/e)) = 1, so the width is sqrt(8) + 4
        assert bounds.gini_interval(1, 2.0 / math.e) == pytest.approx(math.sqrt(8.0) + 4.0, abs=1e-12)

    @given(st.integers(min_value=1, max_value=10**7))
    def test_quadrupling_halves(self, m):
        # both terms scale as 1/sqrt(m)
        assert bounds.gini_interval(4 * m, 0.05) == pytest.approx(
            bounds.gini_interval(m, 0.05) / 2.0
        )
        assert bounds.gini_interval(4 * m, 0.05) < bounds.gini_interval(m, 0.05) / 1.9


class TestKmInterval:
    def test_frozen_value(self):
        assert bounds.km_interval(400, 0.05) == pytest.approx(0.450562928579, abs=1e-9)

    def test_exact_cancellation(self):
        delta = 0.05
        m = int(16 * math.log(8 / delta))
        # continuous m would give exactly 1; integral m sits within rounding
        assert bounds.km_interval(m, delta) == pytest.approx(
            4 * math.sqrt(math.log(8 / delta) / m), abs=1e-12
        )
        assert 0.95 < bounds.km_interval(m, delta) < 1.05

    @given(st.integers(min_value=1, max_value=10**7), st.floats(min_value=1e-6, max_value=0.999))
    def test_quadrupling_halves_exactly(self, m, delta):
        assert bounds.km_interval(4 * m, delta) == pytest.approx(bounds.km_interval(m, delta) / 2.0)


class TestSplitConfidence:
    def test_frozen_value_gini(self):
        # composed delta = 0.05 / (2*3*1000*5*100) = 1.6667e-8
        assert bounds.split_confidence(100, 1000, 5, 1, 0.05, "gini") == pytest.approx(
            1.619934499906, abs=1e-9
        )

    def test_depth_widens(self):
        shallow = bounds.split_confidence(100, 1000, 5, 0, 0.05, "gini")
        deep = bounds.split_confidence(100, 1000, 5, 5, 0.05, "gini")
        assert deep > shallow

    def test_product_symmetry(self):
        a = bounds.split_confidence(100, 1000, 5, 1, 0.05, "km")
        b = bounds.split_confidence(100, 5, 1000, 1, 0.05, "km")
        assert a == pytest.approx(b, abs=1e-15)

    @pytest.mark.parametrize("kind", bounds.BOUND_KINDS)
    def test_wider_than_base_interval(self, kind):
        base = {
            "entropy": bounds.entropy_interval,
            "gini": bounds.gini_interval,
            "km": bounds.km_interval,
            "hoeffding": lambda m, d: bounds.hoeffding_interval(m, d, 1.0),
        }[kind]
        for m, t, d, h in [(10, 2, 1, 0), (100, 1000, 5, 1), (5000, 10**6, 50, 7)]:
            assert bounds.split_confidence(m, t, d, h, 0.05, kind) > base(m, 0.05)

    def test_underflow_substitution(self):
        bounds.reset_delta_underflow_count()
        # denominator ~ 1e19 times a tiny delta underflows double precision
        width = bounds.split_confidence(10**6, 10**6, 10**6, 50, 5e-324 * 1e15, "gini")
        assert math.isfinite(width) and width > 0
        assert bounds.delta_underflow_count() >= 1
        bounds.reset_delta_underflow_count()

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            bounds.split_confidence(10, 10, 2, 0, 0.05, "bogus")


class TestHeuristicInterval:
    def test_frozen_values(self):
        assert bounds.heuristic_interval(100, 1000, 5, 2, 1.0) == pytest.approx(
            0.437193640445, abs=1e-9
        )
        assert bounds.heuristic_interval(10**6, 10**6, 1, 1, 1.0) == pytest.approx(
            0.006437898079, abs=1e-9
        )

    def test_linear_in_c(self):
        one = bounds.heuristic_interval(500, 900, 3, 2, 0.7)
        assert bounds.heuristic_interval(500, 900, 3, 2, 1.4) == pytest.approx(2 * one)

    def test_depth_zero_clamped_to_one(self):
        assert bounds.heuristic_interval(50, 100, 4, 0, 1.0) == bounds.heuristic_interval(
            50, 100, 4, 1, 1.0
        )

    def test_log_argument_guard(self):
        with pytest.raises(ValueError):
            bounds.heuristic_interval(1, 1, 1, 1, 1.0)


class TestLeafConsistencyInterval:
    def test_frozen_value(self):
        assert bounds.leaf_consistency_interval(50, 1000, 0.05) == pytest.approx(
            0.325524726144, abs=1e-9
        )

    def test_grows_with_time(self):
        values = [bounds.leaf_consistency_interval(50, t, 0.05) for t in (10, 100, 10**4, 10**8)]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_exact_cancellation(self):
        # m = 2 * ln(2t/delta) makes the width exactly 1/2
        t, delta = 1000, 0.05
        m = 2.0 * math.log(2 * t / delta)
        width = math.sqrt(math.log(2 * t / delta) / (2 * m))
        assert width == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=200)
@given(
    m=st.integers(min_value=2, max_value=10**7),
    delta=st.floats(min_value=1e-9, max_value=0.999999),
)
def test_all_intervals_positive_finite_monotone(m, delta):
    """Each width is positive, finite, and non-increasing as delta grows."""
    larger = min(0.9999995, delta * 1.5)
    for fn in (
        lambda mm, dd: bounds.hoeffding_interval(mm, dd, 1.0),
        bounds.mcdiarmid_entropy_interval,
        bounds.entropy_interval,
        bounds.gini_interval,
        bounds.km_interval,
        lambda mm, dd: bounds.leaf_consistency_interval(mm, 10, dd),
    ):
        width = fn(m, delta)
        assert math.isfinite(width) and width > 0.0
        assert fn(m, larger) <= width + 1e-15


def _empirical_conditional(kind, counts):
    from streamtrees import criteria

    return criteria.conditional_estimate_arrays(
        kind, counts[:, 0], counts[:, 1], counts[:, 2], counts[:, 3]
    )


@pytest.mark.parametrize(
    "family,kind_name",
    [("entropy", "SCALED_ENTROPY"), ("gini", "GINI"), ("km", "KEARNS_MANSOUR")],
)
def test_monte_carlo_coverage_smoke(family, kind_name):
    """Deviation widths cover the truth far more often than 1 - delta.

    Small-trial smoke version of the acceptance coverage suite.
    """
    from streamtrees import criteria
    from streamtrees.evaluation import coverage_violation_rate

    rng = np.random.default_rng(7)
    rate = coverage_violation_rate(family, (0.4, 0.1, 0.2, 0.3), 200, 0.05, 2000, rng)
    assert rate <= 0.05
