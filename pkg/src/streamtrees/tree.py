"""Incremental binary decision tree with confidence-gated splits.

One learner instance is single-writer: ``observe`` mutates state and must
be externally serialized; routing and prediction are read-only and may run
concurrently with each other, but not with writes.
"""

from __future__ import annotations

import itertools
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

import numpy as np

from . import bounds
from .criteria import (
    CriterionKind,
    SplitStats,
    conditional_estimate_arrays,
    conditional_impurity,
    impurity,
)

_leaf_uid = itertools.count()


@dataclass
class Example:
    """One stream item: a dense feature vector and an optional binary label."""

    features: np.ndarray
    label: Optional[int] = None


@dataclass(frozen=True)
class CTreeHeuristic:
    """Tunable split-test width c * sqrt(ln(m^2 h^2 t d) / m)."""

    c: float = 1.0


@dataclass(frozen=True)
class CTreeExact:
    """Criterion-matched theorem interval at the composed failure probability."""

    delta: float = 0.05


@dataclass(frozen=True)
class HoeffdingBound:
    """Classical range-based width; the VFDT-style baseline gate."""

    delta: float = 1e-7
    value_range: float = 1.0


@dataclass(frozen=True)
class McDiarmidBound:
    """K=2 entropy-gain width; conservative enough to freeze growth."""

    delta: float = 0.05


BoundConfig = Union[CTreeHeuristic, CTreeExact, HoeffdingBound, McDiarmidBound]

#: Theorem interval matched to each criterion under ``CTreeExact``.
_EXACT_KIND = {
    CriterionKind.SCALED_ENTROPY: "entropy",
    CriterionKind.GINI: "gini",
    CriterionKind.KEARNS_MANSOUR: "km",
    CriterionKind.CLASSIFICATION_ERROR: "hoeffding",
}


def default_hoeffding_range(criterion: CriterionKind) -> float:
    """Range bound R for the Hoeffding gate: ln(2) for scaled entropy
    (impurity range [0, ln(2)/2] on each of two sides), 1 otherwise."""
    if criterion is CriterionKind.SCALED_ENTROPY:
        return float(np.log(2.0))
    return 1.0


@dataclass(frozen=True)
class LearnerConfig:
    criterion: CriterionKind = CriterionKind.GINI
    bound: BoundConfig = CTreeHeuristic(1.0)
    grace_period: int = 100
    tau: float = 0.0  # 0 disables the tie-break
    delta_mode: str = "fixed"  # or "one_over_t": delta becomes 1/t
    max_values_per_attribute: int = 1000

    def __post_init__(self):
        if self.grace_period < 1:
            raise ValueError("grace_period must be >= 1")
        if self.tau < 0.0:
            raise ValueError("tau must be >= 0")
        if self.delta_mode not in ("fixed", "one_over_t"):
            raise ValueError(f"unknown delta_mode {self.delta_mode!r}")


class AttributeObserver:
    """Bounded store of distinct observed values with per-value class counts.

    At most ``cap`` distinct values are kept; once full, a new value is
    counted under the nearest stored value (ties toward the smaller one).
    Exact for features with small cardinality, e.g. binary codings.
    Values and counts live in parallel sorted lists so the split scan can
    hand contiguous arrays to numpy.
    """

    __slots__ = ("cap", "values", "count0", "count1")

    def __init__(self, cap: int):
        self.cap = cap
        self.values: list[float] = []  # kept sorted
        self.count0: list[int] = []
        self.count1: list[int] = []

    def add(self, value: float, label: int) -> None:
        values = self.values
        i = bisect_left(values, value)
        if i < len(values) and values[i] == value:
            pass
        elif len(values) >= self.cap:
            if i == 0:
                pass
            elif i == len(values) or value - values[i - 1] <= values[i] - value:
                i -= 1
        else:
            values.insert(i, value)
            self.count0.insert(i, 0)
            self.count1.insert(i, 0)
        if label:
            self.count1[i] += 1
        else:
            self.count0[i] += 1

    def split_arrays(self):
        """(thresholds, below0, below1, tot0, tot1) for every midpoint
        threshold between consecutive stored values, or None if fewer than
        two distinct values were seen."""
        if len(self.values) < 2:
            return None
        c0 = np.asarray(self.count0, dtype=np.float64)
        c1 = np.asarray(self.count1, dtype=np.float64)
        va = np.asarray(self.values)
        thresholds = 0.5 * (va[:-1] + va[1:])
        return thresholds, np.cumsum(c0)[:-1], np.cumsum(c1)[:-1], c0.sum(), c1.sum()


@dataclass
class LeafState:
    """Mutable statistics of one leaf."""

    depth: int
    fallback: int  # prediction before any label arrives: parent majority
    num_attributes: int
    value_cap: int
    uid: int = field(default_factory=lambda: next(_leaf_uid))
    n0: int = 0
    n1: int = 0
    since_last_eval: int = 0
    observers: list[AttributeObserver] = field(default_factory=list)
    # (m, t, consistent) of the most recent consistency check
    consistency_cache: Optional[tuple[int, int, bool]] = None

    def __post_init__(self):
        if not self.observers:
            self.observers = [AttributeObserver(self.value_cap) for _ in range(self.num_attributes)]

    @property
    def m(self) -> int:
        return self.n0 + self.n1

    def is_pure(self) -> bool:
        return self.n0 == 0 or self.n1 == 0

    def positive_rate(self) -> Optional[float]:
        m = self.m
        return self.n1 / m if m > 0 else None


def predict(leaf: LeafState) -> int:
    """Majority label of the leaf; empirical ties go to label 1 (the
    rate >= 1/2 rule) and an empty leaf falls back to the majority its
    parent had when it was split off (0 at the root)."""
    if leaf.n0 == 0 and leaf.n1 == 0:
        return leaf.fallback
    return 1 if leaf.n1 >= leaf.n0 else 0


class Node:
    """Tree node: a leaf (``leaf`` set) or an internal split.

    Routing sends x right iff ``x[attribute] > threshold``; the left child
    is the F=0 side.
    """

    __slots__ = ("attribute", "threshold", "left", "right", "leaf")

    def __init__(self, leaf: Optional[LeafState] = None):
        self.attribute: Optional[int] = None
        self.threshold: Optional[float] = None
        self.left: Optional[Node] = None
        self.right: Optional[Node] = None
        self.leaf = leaf

    def is_leaf(self) -> bool:
        return self.leaf is not None


@dataclass(frozen=True)
class SplitEvent:
    """Emitted by ``observe`` when a leaf was expanded."""

    attribute: int
    threshold: float
    depth: int
    t: int


def enumerate_candidates(leaf: LeafState) -> list[tuple[int, float, SplitStats]]:
    """All candidate splits of a leaf: per attribute, the midpoints between
    consecutive stored distinct values, each with its exact joint counts.
    At most d*m candidates."""
    out = []
    for attr, obs in enumerate(leaf.observers):
        arrays = obs.split_arrays()
        if arrays is None:
            continue
        thresholds, below0, below1, tot0, tot1 = arrays
        for i in range(len(thresholds)):
            stats = SplitStats(
                n11=int(tot1 - below1[i]),
                n01=int(tot0 - below0[i]),
                n10=int(below1[i]),
                n00=int(below0[i]),
            )
            out.append((attr, float(thresholds[i]), stats))
    return out


@dataclass(frozen=True)
class SplitDecision:
    split: bool
    attribute: int = -1
    threshold: float = 0.0
    epsilon: float = 0.0
    best_estimate: float = 0.0
    second_estimate: float = 0.0


class TreeLearner:
    """Streaming learner over d numeric attributes.

    ``observe`` routes a labeled example to its leaf, updates the leaf
    statistics, and re-evaluates the split decision each time the leaf has
    accumulated ``grace_period`` new labels since the last evaluation.
    """

    def __init__(self, config: LearnerConfig, num_attributes: int):
        if num_attributes < 1:
            raise ValueError("num_attributes must be >= 1")
        self.config = config
        self.num_attributes = num_attributes
        self.root = Node(self._fresh_leaf(depth=0, fallback=0))
        self.split_count = 0

    def _fresh_leaf(self, depth: int, fallback: int) -> LeafState:
        return LeafState(
            depth=depth,
            fallback=fallback,
            num_attributes=self.num_attributes,
            value_cap=self.config.max_values_per_attribute,
        )

    def reset(self) -> None:
        """Discard the tree and restart from a single empty leaf."""
        self.root = Node(self._fresh_leaf(depth=0, fallback=0))
        self.split_count = 0

    @property
    def leaf_count(self) -> int:
        return self.split_count + 1

    def route(self, features) -> Node:
        """Leaf node reached by the deterministic threshold tests."""
        x = features.tolist() if isinstance(features, np.ndarray) else features
        node = self.root
        while node.leaf is None:
            node = node.right if x[node.attribute] > node.threshold else node.left
        return node

    def predict(self, features) -> int:
        return predict(self.route(features).leaf)

    def observe(self, features, label: int, t: int) -> Optional[SplitEvent]:
        """Consume one labeled example observed at stream position ``t``."""
        if label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {label}")
        x = features.tolist() if isinstance(features, np.ndarray) else list(features)
        if len(x) != self.num_attributes:
            raise ValueError(f"expected {self.num_attributes} features, got {len(x)}")
        node = self.root
        while node.leaf is None:
            node = node.right if x[node.attribute] > node.threshold else node.left
        leaf = node.leaf
        if label:
            leaf.n1 += 1
        else:
            leaf.n0 += 1
        for obs, value in zip(leaf.observers, x):
            obs.add(value, label)
        leaf.since_last_eval += 1
        if leaf.since_last_eval >= self.config.grace_period and not leaf.is_pure():
            leaf.since_last_eval = 0
            decision = self.attempt_split(leaf, t)
            if decision.split:
                self._apply_split(node, decision.attribute, decision.threshold)
                return SplitEvent(decision.attribute, decision.threshold, leaf.depth, t)
        return None

    def _apply_split(self, node: Node, attribute: int, threshold: float) -> None:
        leaf = node.leaf
        majority = predict(leaf)
        node.attribute = attribute
        node.threshold = threshold
        node.leaf = None
        node.left = Node(self._fresh_leaf(leaf.depth + 1, majority))
        node.right = Node(self._fresh_leaf(leaf.depth + 1, majority))
        self.split_count += 1

    def _epsilon(self, m: int, t: int, depth: int) -> float:
        cfg = self.config
        bound = cfg.bound
        if isinstance(bound, CTreeHeuristic):
            return bounds.heuristic_interval(m, t, self.num_attributes, depth, bound.c)
        delta = 1.0 / t if cfg.delta_mode == "one_over_t" else bound.delta
        if isinstance(bound, CTreeExact):
            return bounds.split_confidence(
                m,
                t,
                self.num_attributes,
                depth,
                delta,
                _EXACT_KIND[cfg.criterion],
                default_hoeffding_range(cfg.criterion),
            )
        if isinstance(bound, HoeffdingBound):
            return bounds.hoeffding_interval(m, delta, bound.value_range)
        if isinstance(bound, McDiarmidBound):
            return bounds.mcdiarmid_entropy_interval(m, delta, num_classes=2)
        raise TypeError(f"unknown bound config {bound!r}")

    def attempt_split(self, leaf: LeafState, t: int) -> SplitDecision:
        """Evaluate the confidence-gated split test at a leaf.

        Each attribute contributes its lowest-conditional-impurity
        threshold; the winner is compared against the runner-up from a
        different attribute.  The leaf is split when the runner-up's
        estimate exceeds the winner's by more than twice the interval
        width, or when the width has shrunk below the tie-break tau.
        """
        m = leaf.m
        if m < 2:
            return SplitDecision(split=False)
        per_attr: list[tuple[float, int, float]] = []  # (estimate, attr, threshold)
        kind = self.config.criterion
        for attr, obs in enumerate(leaf.observers):
            arrays = obs.split_arrays()
            if arrays is None:
                continue
            thresholds, below0, below1, tot0, tot1 = arrays
            est = conditional_estimate_arrays(
                kind, tot1 - below1, tot0 - below0, below1, below0
            )
            best = int(np.argmin(est))
            per_attr.append((float(est[best]), attr, float(thresholds[best])))
        if len(per_attr) < 2:
            return SplitDecision(split=False)
        per_attr.sort()
        best_est, best_attr, best_thr = per_attr[0]
        second_est = per_attr[1][0]
        eps = self._epsilon(m, t, leaf.depth)
        should = second_est - best_est > 2.0 * eps or (
            self.config.tau > 0.0 and eps <= self.config.tau
        )
        return SplitDecision(
            split=should,
            attribute=best_attr,
            threshold=best_thr,
            epsilon=eps,
            best_estimate=best_est,
            second_estimate=second_est,
        )

    def nodes(self) -> Iterator[Node]:
        """Breadth-first iteration over all nodes."""
        queue = [self.root]
        while queue:
            node = queue.pop(0)
            yield node
            if node.leaf is None:
                queue.append(node.left)
                queue.append(node.right)

    def leaves(self) -> Iterator[LeafState]:
        for node in self.nodes():
            if node.leaf is not None:
                yield node.leaf

    def node_regions(self, lo=None, hi=None) -> Iterator[tuple[Node, np.ndarray, np.ndarray]]:
        """Depth-first (node, lower, upper) boxes, root box defaulting to
        the unit cube.  A node's box contains exactly the points routed
        through it."""
        d = self.num_attributes
        lo = np.zeros(d) if lo is None else np.asarray(lo, dtype=float)
        hi = np.ones(d) if hi is None else np.asarray(hi, dtype=float)
        stack = [(self.root, lo, hi)]
        while stack:
            node, nlo, nhi = stack.pop()
            yield node, nlo, nhi
            if node.leaf is None:
                left_hi = nhi.copy()
                left_hi[node.attribute] = min(node.threshold, nhi[node.attribute])
                right_lo = nlo.copy()
                right_lo[node.attribute] = max(node.threshold, nlo[node.attribute])
                stack.append((node.right, right_lo, nhi))
                stack.append((node.left, nlo, left_hi))

    # -- snapshot ---------------------------------------------------------

    SNAPSHOT_HEADER = "streamtree-model v1"

    def snapshot(self) -> str:
        """Deterministic text serialization of structure, thresholds and
        leaf counts (observer state is not captured; a restored tree
        predicts identically but cannot resume training)."""
        lines = [self.SNAPSHOT_HEADER, f"attributes {self.num_attributes}"]
        ids: dict[int, int] = {}
        order = list(self.nodes())
        for i, node in enumerate(order):
            ids[id(node)] = i
        lines.append(f"nodes {len(order)}")
        for i, node in enumerate(order):
            if node.leaf is None:
                lines.append(
                    f"I {i} attr={node.attribute} thr={float(node.threshold)!r} "
                    f"left={ids[id(node.left)]} right={ids[id(node.right)]}"
                )
            else:
                lf = node.leaf
                lines.append(
                    f"L {i} depth={lf.depth} n0={lf.n0} n1={lf.n1} fallback={lf.fallback}"
                )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_snapshot(cls, text: str, config: Optional[LearnerConfig] = None) -> "TreeLearner":
        lines = text.strip().split("\n")
        if lines[0] != cls.SNAPSHOT_HEADER:
            raise ValueError(f"unsupported snapshot header {lines[0]!r}")
        num_attributes = int(lines[1].split()[1])
        count = int(lines[2].split()[1])
        learner = cls(config or LearnerConfig(), num_attributes)
        records = {}
        for line in lines[3 : 3 + count]:
            parts = line.split()
            idx = int(parts[1])
            fields = dict(p.split("=", 1) for p in parts[2:])
            records[idx] = (parts[0], fields)
        nodes: dict[int, Node] = {i: Node() for i in records}
        split_count = 0
        for idx, (tag, fields) in records.items():
            node = nodes[idx]
            if tag == "I":
                node.attribute = int(fields["attr"])
                node.threshold = float(fields["thr"])
                node.left = nodes[int(fields["left"])]
                node.right = nodes[int(fields["right"])]
                split_count += 1
            else:
                leaf = learner._fresh_leaf(int(fields["depth"]), int(fields["fallback"]))
                leaf.n0 = int(fields["n0"])
                leaf.n1 = int(fields["n1"])
                node.leaf = leaf
        learner.root = nodes[0]
        learner.split_count = split_count
        return learner


def suboptimal_split_rate(
    generator,
    learner: TreeLearner,
    tau: float,
    rng: np.random.Generator,
    n_eval: int = 20000,
    criterion: Optional[CriterionKind] = None,
    points_per_segment: int = 24,
) -> float:
    """Monte-Carlo probability that a generator draw is routed through a
    split whose true gain is more than ``tau`` below the best gain
    available at that node.

    Node and best-available gains are computed exactly against the
    generator's piecewise-constant truth (volume integration over a
    threshold grid refined between the generator's own cut points); the
    routing probability is then estimated over ``n_eval`` fresh draws.
    Only meaningful for synthetic streams where the generator is known.
    """
    kind = criterion or learner.config.criterion
    flagged = []
    for node, lo, hi in learner.node_regions():
        if node.leaf is not None:
            continue
        vol = float(np.prod(hi - lo))
        if vol <= 0.0:
            continue
        node_gain = generator.split_gain(kind, lo, hi, node.attribute, node.threshold)
        best_gain = generator.best_split_gain(kind, lo, hi, points_per_segment)
        if node_gain + tau < best_gain:
            flagged.append((node.attribute, node.threshold, lo, hi))
    if not flagged:
        return 0.0
    points = generator.sample_points(n_eval, rng)
    hit = np.zeros(n_eval, dtype=bool)
    for attribute, threshold, lo, hi in flagged:
        inside = np.all((points >= lo) & (points <= hi), axis=1)
        hit |= inside
    return float(hit.mean())


def gain_from_probabilities(
    kind: CriterionKind, p1: float, q1: float, p0: float, q0: float
) -> float:
    """True gain of a split from its joint (label, side) probabilities."""
    return impurity(kind, p1 + p0) - conditional_impurity(kind, p1, q1, p0, q0)
