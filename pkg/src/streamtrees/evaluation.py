"""Online stream validation protocols and streaming metrics.

Both protocols are interleaved test-then-train: every instance is first
predicted with the current tree, the running accuracy is updated, and
only then may the instance be used for training.  One run is strictly
sequential; independent runs may execute in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import bounds, criteria
from .active import BudgetState, Decision, DDMStatus, budget_allows
from .tree import Example, TreeLearner, predict as leaf_predict


@dataclass
class RunRecord:
    """Per-instance log of one protocol run plus its configuration echo."""

    config: dict
    seed: Optional[int]
    n: int
    predicted: np.ndarray = field(init=False)
    true_label: np.ndarray = field(init=False)
    queried: np.ndarray = field(init=False)
    leaf_counts: np.ndarray = field(init=False)
    metric: np.ndarray = field(init=False)
    drift_resets: int = 0
    budget: Optional[BudgetState] = None

    def __post_init__(self):
        self.predicted = np.zeros(self.n, dtype=np.int8)
        self.true_label = np.zeros(self.n, dtype=np.int8)
        self.queried = np.zeros(self.n, dtype=bool)
        self.leaf_counts = np.zeros(self.n, dtype=np.int64)
        self.metric = np.zeros(self.n, dtype=np.float64)

    @property
    def final_metric(self) -> float:
        return float(self.metric[-1]) if self.n else 0.0

    @property
    def final_leaf_count(self) -> int:
        return int(self.leaf_counts[-1]) if self.n else 1

    @property
    def query_rate(self) -> float:
        return self.budget.query_rate if self.budget is not None else 1.0

    def accuracy(self) -> float:
        return float(np.mean(self.predicted == self.true_label)) if self.n else 0.0

    def fmeasure(self, positive_class: int) -> float:
        """F1 of the online predictions for one class, from the cumulative
        confusion counts; 0/0 ratios collapse to 0."""
        pred_pos = self.predicted == positive_class
        true_pos = self.true_label == positive_class
        tp = int(np.sum(pred_pos & true_pos))
        fp = int(np.sum(pred_pos & ~true_pos))
        fn = int(np.sum(~pred_pos & true_pos))
        if tp == 0:
            return 0.0
        precision = tp / (tp + fp)
        recall = tp / (tp + fn)
        return 2.0 * precision * recall / (precision + recall)

    def smallest_class(self) -> int:
        return 1 if int(self.true_label.sum()) * 2 <= self.n else 0

    def metric_value(self, metric_name: str) -> float:
        if metric_name == "accuracy":
            return self.final_metric
        if metric_name == "f-smallest-class":
            return self.fmeasure(self.smallest_class())
        raise ValueError(f"unknown metric {metric_name!r}")

    def instance_lines(self):
        """Row-oriented text form, one instance per line."""
        yield "t\tpredicted\ttrue\tqueried\tleaves\tmetric"
        for i in range(self.n):
            yield (
                f"{i + 1}\t{self.predicted[i]}\t{self.true_label[i]}\t"
                f"{int(self.queried[i])}\t{self.leaf_counts[i]}\t{self.metric[i]!r}"
            )

    def summary(self) -> dict:
        out = {
            "n": self.n,
            "seed": self.seed,
            "final_metric": self.final_metric,
            "online_accuracy": self.final_metric,
            "final_leaves": self.final_leaf_count,
            "drift_resets": self.drift_resets,
        }
        if self.budget is not None:
            out["budget"] = self.budget.budget
            out["queried"] = self.budget.queried
            out["seen"] = self.budget.seen
            out["query_rate"] = self.query_rate
        out["config"] = self.config
        return out


def _update_metric(previous: float, t: int, correct: bool) -> float:
    return (1.0 - 1.0 / t) * previous + (1.0 / t) * (1.0 if correct else 0.0)


def run_full(
    learner: TreeLearner, stream: Sequence[Example], seed: Optional[int] = None
) -> RunRecord:
    """Test-then-train over a fully labeled stream."""
    record = RunRecord(config={"mode": "full"}, seed=seed, n=len(stream))
    metric = 0.0
    for i, example in enumerate(stream):
        t = i + 1
        prediction = leaf_predict(learner.route(example.features).leaf)
        correct = prediction == example.label
        metric = _update_metric(metric, t, correct)
        record.predicted[i] = prediction
        record.true_label[i] = example.label
        record.queried[i] = True
        record.metric[i] = metric
        learner.observe(example.features, example.label, t)
        record.leaf_counts[i] = learner.leaf_count
    return record


def run_active(
    learner: TreeLearner,
    strategy,
    budget: float,
    stream: Sequence[Example],
    seed: Optional[int] = None,
) -> RunRecord:
    """Test-then-train where labels are revealed only when the budget gate
    admits a query and the strategy asks for one; unlabeled instances
    never update the model.  A drift signal from a stream-splitting
    strategy resets the learner to a single leaf (budget accounting is a
    property of the whole run and is never reset)."""
    record = RunRecord(config={"mode": "active", "budget": budget}, seed=seed, n=len(stream))
    state = BudgetState(budget=budget)
    record.budget = state
    detector = getattr(strategy, "ddm", None)
    metric = 0.0
    for i, example in enumerate(stream):
        t = i + 1
        state.seen += 1
        node = learner.route(example.features)
        prediction = leaf_predict(node.leaf)
        correct = prediction == example.label
        metric = _update_metric(metric, t, correct)
        record.predicted[i] = prediction
        record.true_label[i] = example.label
        record.metric[i] = metric
        if budget_allows(state):
            decision: Decision = strategy.decide(node.leaf, t)
            if decision.query:
                state.queried += 1
                record.queried[i] = True
                learner.observe(example.features, example.label, t)
                if decision.ddm_branch and detector is not None:
                    if detector.update(correct) is DDMStatus.DRIFT:
                        learner.reset()
                        detector.reset()
                        record.drift_resets += 1
        record.leaf_counts[i] = learner.leaf_count
    return record


def fmeasure(record: RunRecord, positive_class: int) -> float:
    return record.fmeasure(positive_class)


def curve_extract(records: Sequence[RunRecord], x: str = "leaves") -> list[tuple[float, float]]:
    """Project one summary point per run: (final leaf count, final metric)
    sorted by leaf count, or (budget, final metric) sorted by budget."""
    if x == "leaves":
        rows = [(float(r.final_leaf_count), r.final_metric) for r in records]
    elif x == "budget":
        rows = [(float(r.config.get("budget", 1.0)), r.final_metric) for r in records]
    else:
        raise ValueError(f"unknown curve axis {x!r}")
    return sorted(rows)


# -- confidence-bound coverage ------------------------------------------------

#: (estimator criterion, interval function) pairs checked by the coverage
#: harness, keyed by the interval family name.
COVERAGE_PAIRS = {
    "entropy": (criteria.CriterionKind.SCALED_ENTROPY, bounds.entropy_interval),
    "gini": (criteria.CriterionKind.GINI, bounds.gini_interval),
    "km": (criteria.CriterionKind.KEARNS_MANSOUR, bounds.km_interval),
}

#: Joint (Y, F) cell probabilities (p11, p01, p10, p00) used as default
#: coverage scenarios: balanced, skewed, near-pure, anti-correlated, mixed.
DEFAULT_COVERAGE_JOINTS = (
    (0.25, 0.25, 0.25, 0.25),
    (0.40, 0.10, 0.20, 0.30),
    (0.70, 0.10, 0.10, 0.10),
    (0.05, 0.45, 0.45, 0.05),
    (0.50, 0.20, 0.20, 0.10),
)


def coverage_violation_rate(
    family: str,
    joint: tuple[float, float, float, float],
    m: int,
    delta: float,
    trials: int,
    rng: np.random.Generator,
) -> float:
    """Fraction of Monte-Carlo samples of size ``m`` from ``joint`` whose
    plug-in conditional estimate misses the truth by more than the
    family's interval width.  Should not exceed ``delta``."""
    kind, interval_fn = COVERAGE_PAIRS[family]
    truth = criteria.conditional_impurity(kind, *joint)
    width = interval_fn(m, delta)
    counts = rng.multinomial(m, joint, size=trials).astype(np.float64)
    estimates = criteria.conditional_estimate_arrays(
        kind, counts[:, 0], counts[:, 1], counts[:, 2], counts[:, 3]
    )
    return float(np.mean(np.abs(estimates - truth) > width))


def coverage_table(
    families: Sequence[str] = ("entropy", "gini", "km"),
    ms: Sequence[int] = (100, 1000),
    deltas: Sequence[float] = (0.05, 0.1),
    joints: Sequence[tuple] = DEFAULT_COVERAGE_JOINTS,
    trials: int = 10000,
    seed: int = 0,
) -> list[dict]:
    """Violation-rate rows for every (family, joint, m, delta) cell."""
    rows = []
    for fi, family in enumerate(families):
        for j, joint in enumerate(joints):
            for m in ms:
                for delta in deltas:
                    rng = np.random.default_rng([seed, fi, j, m, int(delta * 10000)])
                    rate = coverage_violation_rate(family, joint, m, delta, trials, rng)
                    rows.append(
                        {
                            "family": family,
                            "joint": joint,
                            "m": m,
                            "delta": delta,
                            "trials": trials,
                            "violation_rate": rate,
                            "ok": rate <= delta,
                        }
                    )
    return rows
