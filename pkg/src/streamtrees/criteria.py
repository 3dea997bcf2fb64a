"""Impurity criteria, their conditional plug-in estimators, and split gain.

Joint label/split-side probabilities are written ``p_k = Pr(Y=1, F=k)``
and ``q_k = Pr(Y=0, F=k)`` for side ``k`` of a binary split ``F``, so
``p1 + q1 + p0 + q0 = 1``.  Every conditional form below equals the
weighted conditional impurity ``sum_k Pr(F=k) * phi(Pr(Y=1 | F=k))``; the
closed forms are what make single-pass evaluation over thousands of
candidate thresholds cheap.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class CriterionKind(enum.Enum):
    SCALED_ENTROPY = "scaled-entropy"
    GINI = "gini"
    KEARNS_MANSOUR = "kearns-mansour"
    CLASSIFICATION_ERROR = "classification-error"


@dataclass(frozen=True)
class SplitStats:
    """Joint counts of (label, split side) at one leaf for one candidate.

    ``n11`` counts (Y=1, F=1), ``n01`` counts (Y=0, F=1), ``n10`` counts
    (Y=1, F=0) and ``n00`` counts (Y=0, F=0).
    """

    n11: int
    n01: int
    n10: int
    n00: int

    def __post_init__(self):
        if min(self.n11, self.n01, self.n10, self.n00) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def m(self) -> int:
        return self.n11 + self.n01 + self.n10 + self.n00

    def joint_probabilities(self) -> tuple[float, float, float, float]:
        """(p1, q1, p0, q0) of the empirical joint distribution."""
        m = self.m
        if m == 0:
            raise ValueError("empty SplitStats has no distribution")
        return self.n11 / m, self.n01 / m, self.n10 / m, self.n00 / m


def _plogp(p: float) -> float:
    # 0*ln(0) := 0, by an explicit branch rather than float conventions.
    return p * math.log(p) if p > 0.0 else 0.0


def impurity(kind: CriterionKind, p: float) -> float:
    """Impurity of a Bernoulli(p) label; symmetric in p <-> 1-p, zero at
    the endpoints, maximal at 1/2."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if kind is CriterionKind.SCALED_ENTROPY:
        return -0.5 * (_plogp(p) + _plogp(1.0 - p))
    if kind is CriterionKind.GINI:
        return 2.0 * p * (1.0 - p)
    if kind is CriterionKind.KEARNS_MANSOUR:
        return math.sqrt(p * (1.0 - p))
    if kind is CriterionKind.CLASSIFICATION_ERROR:
        return min(p, 1.0 - p)
    raise ValueError(f"unknown criterion {kind!r}")


def _harmonic_mean(p: float, q: float) -> float:
    # hm(0, 0) := 0 by an explicit branch.
    s = p + q
    return 2.0 * p * q / s if s > 0.0 else 0.0


def conditional_impurity(
    kind: CriterionKind, p1: float, q1: float, p0: float, q0: float
) -> float:
    """Conditional impurity of Y given F from joint probabilities.

    Closed forms: scaled entropy = H_half(Y,F) - H_half(F); Gini = sum of
    harmonic means hm(p_k, q_k); Kearns-Mansour = sum of sqrt(p_k * q_k);
    classification error = sum of min(p_k, q_k).
    """
    if kind is CriterionKind.SCALED_ENTROPY:
        joint = -0.5 * (_plogp(p1) + _plogp(q1) + _plogp(p0) + _plogp(q0))
        marginal = -0.5 * (_plogp(p1 + q1) + _plogp(p0 + q0))
        return joint - marginal
    if kind is CriterionKind.GINI:
        return _harmonic_mean(p1, q1) + _harmonic_mean(p0, q0)
    if kind is CriterionKind.KEARNS_MANSOUR:
        return math.sqrt(p1 * q1) + math.sqrt(p0 * q0)
    if kind is CriterionKind.CLASSIFICATION_ERROR:
        return min(p1, q1) + min(p0, q0)
    raise ValueError(f"unknown criterion {kind!r}")


def conditional_estimate(kind: CriterionKind, stats: SplitStats) -> float:
    """Plug-in estimate of the conditional impurity from joint counts."""
    return conditional_impurity(kind, *stats.joint_probabilities())


def gain(kind: CriterionKind, leaf_class_p: float, stats: SplitStats) -> float:
    """Impurity reduction of a split: ``impurity(p) - conditional``.

    May be negative for empirical estimates.  Ranking candidates at one
    leaf must not depend on ``leaf_class_p`` (it is shared by them all),
    so callers rank on :func:`conditional_estimate` directly.
    """
    return impurity(kind, leaf_class_p) - conditional_estimate(kind, stats)


def _plogp_arr(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    mask = p > 0.0
    out[mask] = p[mask] * np.log(p[mask])
    return out


def conditional_estimate_arrays(
    kind: CriterionKind,
    n11: np.ndarray,
    n01: np.ndarray,
    n10: np.ndarray,
    n00: np.ndarray,
) -> np.ndarray:
    """Vectorized :func:`conditional_estimate` over parallel count arrays.

    Used by the candidate scan in the learner's split evaluation and by
    the Monte-Carlo coverage harness; row totals may differ.
    """
    m = (n11 + n01 + n10 + n00).astype(np.float64)
    if np.any(m <= 0):
        raise ValueError("every count row must have m >= 1")
    p1 = n11 / m
    q1 = n01 / m
    p0 = n10 / m
    q0 = n00 / m
    if kind is CriterionKind.SCALED_ENTROPY:
        joint = -0.5 * (_plogp_arr(p1) + _plogp_arr(q1) + _plogp_arr(p0) + _plogp_arr(q0))
        marginal = -0.5 * (_plogp_arr(p1 + q1) + _plogp_arr(p0 + q0))
        return joint - marginal
    if kind is CriterionKind.GINI:
        s1 = p1 + q1
        s0 = p0 + q0
        with np.errstate(divide="ignore", invalid="ignore"):
            h1 = np.where(s1 > 0.0, 2.0 * p1 * q1 / np.where(s1 > 0.0, s1, 1.0), 0.0)
            h0 = np.where(s0 > 0.0, 2.0 * p0 * q0 / np.where(s0 > 0.0, s0, 1.0), 0.0)
        return h1 + h0
    if kind is CriterionKind.KEARNS_MANSOUR:
        return np.sqrt(p1 * q1) + np.sqrt(p0 * q0)
    if kind is CriterionKind.CLASSIFICATION_ERROR:
        return np.minimum(p1, q1) + np.minimum(p0, q0)
    raise ValueError(f"unknown criterion {kind!r}")
