"""Budgeted label-query strategies and drift detection.

A strategy looks at the leaf an unlabeled instance reached and decides
whether its label is worth buying.  The harness consults a strategy only
when the budget gate allows one more query; strategies therefore never
see gate-blocked instances.  Strategy state is single-writer, serialized
with the learner it accompanies.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import bounds
from .tree import LeafState


@dataclass
class BudgetState:
    """Query accounting for one run: ``queried`` of ``seen`` instances,
    capped at rate ``budget``."""

    budget: float
    queried: int = 0
    seen: int = 0

    def __post_init__(self):
        if not 0.0 <= self.budget <= 1.0:
            raise ValueError("budget must be in [0, 1]")

    @property
    def query_rate(self) -> float:
        return self.queried / self.seen if self.seen else 0.0


def budget_allows(state: BudgetState) -> bool:
    """True iff one more query keeps the rate within budget.

    ``seen`` must already count the current instance; the gate admits a
    query iff (queried + 1) / seen <= budget, so the realized rate never
    exceeds the budget after any query.
    """
    if state.seen <= 0:
        return False
    return (state.queried + 1) / state.seen <= state.budget


class Decision(NamedTuple):
    query: bool
    #: True when the decision came from a stream-splitting random branch,
    #: whose labeled outcomes are the only ones fed to drift detection.
    ddm_branch: bool = False


class DDMStatus(enum.Enum):
    IN_CONTROL = "in-control"
    WARNING = "warning"
    DRIFT = "drift"


class DDM:
    """Drift detection on the online error rate (standard warning/drift
    levels at 2 and 3 standard deviations above the running minimum)."""

    MIN_INSTANCES = 30

    def __init__(self):
        self.reset()

    def reset(self) -> None:
        self.n = 1
        self.p = 1.0
        self.s = 0.0
        self.p_min = math.inf
        self.s_min = math.inf
        self.status = DDMStatus.IN_CONTROL

    def update(self, prediction_correct: bool) -> DDMStatus:
        error = 0.0 if prediction_correct else 1.0
        self.p += (error - self.p) / self.n
        self.s = math.sqrt(self.p * (1.0 - self.p) / self.n)
        self.n += 1
        if self.n < self.MIN_INSTANCES:
            self.status = DDMStatus.IN_CONTROL
            return self.status
        level = self.p + self.s
        if level <= self.p_min + self.s_min:
            self.p_min = self.p
            self.s_min = self.s
        if level > self.p_min + 3.0 * self.s_min:
            self.status = DDMStatus.DRIFT
        elif level > self.p_min + 2.0 * self.s_min:
            self.status = DDMStatus.WARNING
        else:
            self.status = DDMStatus.IN_CONTROL
        return self.status


class RandomStrategy:
    """Query every instance independently with probability equal to the
    budget, ignoring the instance itself."""

    name = "random"

    def __init__(self, budget: float, rng: np.random.Generator):
        self.budget = budget
        self.rng = rng

    def decide(self, leaf: LeafState, t: int) -> Decision:
        return Decision(query=bool(self.rng.random() <= self.budget))


class VariableUncertaintyStrategy:
    """Query when the leaf posterior's confidence falls below an adaptive
    threshold; the threshold contracts by a factor (1 - step) on queries
    and expands by (1 + step) otherwise."""

    name = "var-uncertainty"

    def __init__(self, step: float = 0.01, theta: float = 1.0):
        if not 0.0 < step <= 1.0:
            raise ValueError("step must be in (0, 1]")
        self.step = step
        self.theta = theta

    def _posterior(self, leaf: LeafState) -> float:
        rate = leaf.positive_rate()
        return 0.5 if rate is None else rate

    def decide(self, leaf: LeafState, t: int) -> Decision:
        confidence = max(self._posterior(leaf), 1.0 - self._posterior(leaf))
        if confidence < self.theta:
            self.theta *= 1.0 - self.step
            return Decision(query=True)
        self.theta *= 1.0 + self.step
        return Decision(query=False)


class RandomizedUncertaintyStrategy(VariableUncertaintyStrategy):
    """Variable-uncertainty with the threshold multiplied per instance by
    a Normal(1, 1) draw, so occasional far-from-boundary instances are
    still labeled; the draw can be negative and is never clamped."""

    name = "rand-uncertainty"

    def __init__(self, rng: np.random.Generator, step: float = 0.01, theta: float = 1.0):
        super().__init__(step=step, theta=theta)
        self.rng = rng

    def decide(self, leaf: LeafState, t: int) -> Decision:
        confidence = max(self._posterior(leaf), 1.0 - self._posterior(leaf))
        noisy = self.theta * self.rng.normal(1.0, 1.0)
        if confidence < noisy:
            self.theta *= 1.0 - self.step
            return Decision(query=True)
        self.theta *= 1.0 + self.step
        return Decision(query=False)


class SelectiveSamplingStrategy:
    """Query with probability budget / (budget + margin), where margin is
    the leaf posterior's distance from 1/2."""

    name = "sel-sampling"

    def __init__(self, budget: float, rng: np.random.Generator):
        self.budget = budget
        self.rng = rng

    def query_probability(self, posterior: float) -> float:
        margin = abs(posterior - 0.5)
        if self.budget == 0.0:
            return 0.0
        return self.budget / (self.budget + margin)

    def decide(self, leaf: LeafState, t: int) -> Decision:
        rate = leaf.positive_rate()
        posterior = 0.5 if rate is None else rate
        return Decision(query=bool(self.rng.random() <= self.query_probability(posterior)))


class LeafConsistencyStrategy:
    """Query every instance reaching a leaf whose class estimate is not
    yet confidently on one side of 1/2; on confident leaves, keep
    exploring at a rate that rises with the budget and the residual
    uncertainty and falls with the class margin.

    ``delta`` fixes the consistency confidence; None uses 1/t, which makes
    mistakes at confident leaves logarithmic over the stream.
    """

    name = "consistency"

    def __init__(self, budget: float, rng: np.random.Generator, delta: Optional[float] = None):
        self.budget = budget
        self.rng = rng
        self.delta = delta

    def _delta_at(self, t: int) -> float:
        return self.delta if self.delta is not None else 1.0 / t

    def leaf_consistent(self, leaf: LeafState, t: int) -> tuple[bool, float, float]:
        """(consistent, interval, margin) for a leaf at stream time t."""
        m = leaf.m
        if m == 0:
            return False, math.inf, 0.0
        delta = self._delta_at(t)
        cache = leaf.consistency_cache
        if cache is not None and cache[0] == m and cache[1] == t:
            consistent = cache[2]
            interval = bounds.leaf_consistency_interval(m, t, delta)
        else:
            interval = bounds.leaf_consistency_interval(m, t, delta)
            consistent = abs(leaf.n1 / m - 0.5) > interval
            leaf.consistency_cache = (m, t, consistent)
        return consistent, interval, abs(leaf.n1 / m - 0.5)

    def query_probability(self, interval: float, margin: float) -> float:
        return (self.budget + interval) / (self.budget + interval + margin)

    def decide(self, leaf: LeafState, t: int) -> Decision:
        consistent, interval, margin = self.leaf_consistent(leaf, t)
        if not consistent:
            return Decision(query=True)
        return Decision(query=bool(self.rng.random() <= self.query_probability(interval, margin)))


class SplitStrategy:
    """Split the stream at random: a ``nu`` fraction is labeled purely at
    random (and, once labeled, feeds drift detection), the rest follows
    the inner strategy.  Keeps the drift detector's sample unbiased by
    the inner strategy's selection."""

    name = "split"

    def __init__(self, inner, budget: float, rng: np.random.Generator, nu: float = 0.2):
        if not 0.0 <= nu <= 1.0:
            raise ValueError("nu must be in [0, 1]")
        self.inner = inner
        self.budget = budget
        self.rng = rng
        self.nu = nu
        self.ddm = DDM()

    def decide(self, leaf: LeafState, t: int) -> Decision:
        if self.rng.random() <= self.nu:
            return Decision(query=bool(self.rng.random() <= self.budget), ddm_branch=True)
        return Decision(query=self.inner.decide(leaf, t).query)


STRATEGY_NAMES = (
    "random",
    "var-uncertainty",
    "rand-uncertainty",
    "sel-sampling",
    "split",
    "consistency",
    "split-consistency",
)


def make_strategy(
    name: str,
    budget: float,
    rng: np.random.Generator,
    step: float = 0.01,
    nu: float = 0.2,
    delta: Optional[float] = None,
):
    """Construct a strategy by CLI name, sharing one seeded generator."""
    if name == "random":
        return RandomStrategy(budget, rng)
    if name == "var-uncertainty":
        return VariableUncertaintyStrategy(step=step)
    if name == "rand-uncertainty":
        return RandomizedUncertaintyStrategy(rng, step=step)
    if name == "sel-sampling":
        return SelectiveSamplingStrategy(budget, rng)
    if name == "split":
        return SplitStrategy(VariableUncertaintyStrategy(step=step), budget, rng, nu=nu)
    if name == "consistency":
        return LeafConsistencyStrategy(budget, rng, delta=delta)
    if name == "split-consistency":
        return SplitStrategy(LeafConsistencyStrategy(budget, rng, delta=delta), budget, rng, nu=nu)
    raise ValueError(f"unknown strategy {name!r}; choose from {STRATEGY_NAMES}")
