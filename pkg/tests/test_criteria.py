"""Criterion functions against brute-force definitions.

The independent oracle throughout is the direct weighted-conditional
impurity sum_k Pr(F=k) * phi(Pr(Y=1 | F=k)); the module's closed forms
must reproduce it exactly for all joint count tables.
"""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamtrees.criteria import (
    CriterionKind,
    SplitStats,
    conditional_estimate,
    conditional_estimate_arrays,
    conditional_impurity,
    gain,
    impurity,
)

CONCAVE = [CriterionKind.SCALED_ENTROPY, CriterionKind.GINI, CriterionKind.KEARNS_MANSOUR]
ALL_KINDS = list(CriterionKind)


def weighted_conditional(kind: CriterionKind, stats: SplitStats) -> float:
    """Brute-force conditional impurity: split the sample by F and weight
    each side's impurity by its frequency."""
    m = stats.m
    side1 = stats.n11 + stats.n01
    side0 = stats.n10 + stats.n00
    total = 0.0
    if side1 > 0:
        total += (side1 / m) * impurity(kind, stats.n11 / side1)
    if side0 > 0:
        total += (side0 / m) * impurity(kind, stats.n10 / side0)
    return total


class TestImpurity:
    def test_maxima_at_half(self):
        assert impurity(CriterionKind.SCALED_ENTROPY, 0.5) == pytest.approx(math.log(2) / 2)
        assert impurity(CriterionKind.GINI, 0.5) == 0.5
        assert impurity(CriterionKind.KEARNS_MANSOUR, 0.5) == 0.5
        assert impurity(CriterionKind.CLASSIFICATION_ERROR, 0.5) == 0.5

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_zero_at_pure(self, kind):
        assert impurity(kind, 0.0) == 0.0
        assert impurity(kind, 1.0) == 0.0

    @pytest.mark.parametrize("kind", ALL_KINDS)
    @given(p=st.floats(min_value=0.0, max_value=1.0))
    def test_symmetric(self, kind, p):
        # sqrt amplifies the rounding of 1-p to ~sqrt(eps) near the endpoints
        assert impurity(kind, p) == pytest.approx(impurity(kind, 1.0 - p), abs=2e-8)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_domain_error(self, kind):
        with pytest.raises(ValueError):
            impurity(kind, -0.01)
        with pytest.raises(ValueError):
            impurity(kind, 1.01)


class TestConditionalEstimate:
    """Frozen examples computed by hand from the 30/20/10/40 table."""

    STATS = SplitStats(n11=30, n01=20, n10=10, n00=40)

    def test_gini_value(self):
        assert conditional_estimate(CriterionKind.GINI, self.STATS) == pytest.approx(0.40)

    def test_km_value(self):
        assert conditional_estimate(CriterionKind.KEARNS_MANSOUR, self.STATS) == pytest.approx(
            math.sqrt(0.06) + math.sqrt(0.04)
        )

    def test_entropy_value(self):
        # H_half(Y,F) - H_half(F) = 0.639927112917 - 0.346573590280
        assert conditional_estimate(CriterionKind.SCALED_ENTROPY, self.STATS) == pytest.approx(
            0.293353522637, abs=1e-9
        )

    def test_error_value(self):
        assert conditional_estimate(CriterionKind.CLASSIFICATION_ERROR, self.STATS) == pytest.approx(0.3)

    def test_empty_table_rejected(self):
        with pytest.raises(ValueError):
            conditional_estimate(CriterionKind.GINI, SplitStats(0, 0, 0, 0))

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            SplitStats(-1, 1, 1, 1)


@pytest.mark.parametrize("kind", CONCAVE)
def test_decomposition_identity_exhaustive(kind):
    """Closed forms equal the weighted-conditional definition within 1e-12
    on every 4-cell table with cells in 0..8 (6561 tables)."""
    for n11, n01, n10, n00 in itertools.product(range(9), repeat=4):
        if n11 + n01 + n10 + n00 == 0:
            continue
        stats = SplitStats(n11, n01, n10, n00)
        assert abs(conditional_estimate(kind, stats) - weighted_conditional(kind, stats)) < 1e-12


def test_classification_error_identity_exhaustive():
    for n11, n01, n10, n00 in itertools.product(range(9), repeat=4):
        if n11 + n01 + n10 + n00 == 0:
            continue
        stats = SplitStats(n11, n01, n10, n00)
        assert abs(
            conditional_estimate(CriterionKind.CLASSIFICATION_ERROR, stats)
            - weighted_conditional(CriterionKind.CLASSIFICATION_ERROR, stats)
        ) < 1e-12


@pytest.mark.parametrize("kind", CONCAVE)
@settings(max_examples=300)
@given(counts=st.tuples(*[st.integers(min_value=0, max_value=10**6)] * 4))
def test_concavity_random_tables(kind, counts):
    """Conditioning can only reduce impurity for concave criteria."""
    if sum(counts) == 0:
        return
    stats = SplitStats(*counts)
    marginal = (stats.n11 + stats.n10) / stats.m
    assert conditional_estimate(kind, stats) <= impurity(kind, marginal) + 1e-12


def test_error_gain_zero_when_majorities_agree():
    """The min criterion credits a split only when the two sides disagree
    on the majority label."""
    rng = np.random.default_rng(5)
    seen_nonzero_for_disagreeing = 0
    for _ in range(500):
        counts = rng.integers(0, 30, size=4)
        if counts.sum() == 0:
            continue
        stats = SplitStats(*[int(v) for v in counts])
        side1_majority = stats.n11 >= stats.n01
        side0_majority = stats.n10 >= stats.n00
        marginal = (stats.n11 + stats.n10) / stats.m
        g = gain(CriterionKind.CLASSIFICATION_ERROR, marginal, stats)
        if side1_majority == side0_majority:
            assert g <= 1e-12
        elif g > 1e-12:
            seen_nonzero_for_disagreeing += 1
    assert seen_nonzero_for_disagreeing > 0


class TestGain:
    def test_perfect_split(self):
        stats = SplitStats(n11=50, n01=0, n10=0, n00=50)
        assert gain(CriterionKind.GINI, 0.5, stats) == pytest.approx(0.5)

    def test_independent_split(self):
        stats = SplitStats(n11=25, n01=25, n10=25, n00=25)
        assert gain(CriterionKind.GINI, 0.5, stats) == pytest.approx(0.0, abs=1e-12)

    def test_composed_value(self):
        stats = SplitStats(n11=30, n01=20, n10=10, n00=40)
        assert gain(CriterionKind.GINI, 0.4, stats) == pytest.approx(2 * 0.4 * 0.6 - 0.40)


def test_vectorized_matches_scalar():
    rng = np.random.default_rng(11)
    tables = rng.integers(0, 50, size=(200, 4))
    tables[tables.sum(axis=1) == 0] = 1
    for kind in ALL_KINDS:
        vec = conditional_estimate_arrays(
            kind,
            tables[:, 0].astype(float),
            tables[:, 1].astype(float),
            tables[:, 2].astype(float),
            tables[:, 3].astype(float),
        )
        for i in range(len(tables)):
            scalar = conditional_estimate(kind, SplitStats(*[int(v) for v in tables[i]]))
            assert vec[i] == pytest.approx(scalar, abs=1e-12)


def test_conditional_impurity_probability_form():
    """The probability-valued form agrees with the count form."""
    stats = SplitStats(3, 14, 15, 9)
    p1, q1, p0, q0 = stats.joint_probabilities()
    for kind in ALL_KINDS:
        assert conditional_impurity(kind, p1, q1, p0, q0) == pytest.approx(
            conditional_estimate(kind, stats), abs=1e-15
        )
