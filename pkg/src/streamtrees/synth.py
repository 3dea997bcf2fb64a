"""Random ground-truth trees over the unit cube and stream sampling.

A generated tree partitions [0, 1]^d into axis-aligned boxes; each leaf
labels its box 1 with a fixed probability (q on the left side of its
parent, 1-q on the right).  Streams drawn from such a tree have a known
Bayes accuracy of max(q, 1-q), and any box's positive-label mass can be
integrated exactly, which the evaluation oracles rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .criteria import CriterionKind, conditional_impurity, impurity
from .tree import Example


@dataclass
class GTNode:
    lo: np.ndarray
    hi: np.ndarray
    attribute: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["GTNode"] = None
    right: Optional["GTNode"] = None
    class1_prob: Optional[float] = None

    def is_leaf(self) -> bool:
        return self.class1_prob is not None


@dataclass
class GroundTruthTree:
    root: GTNode
    num_attributes: int
    leaves: list[GTNode] = field(default_factory=list)

    def __post_init__(self):
        if not self.leaves:
            self.leaves = [n for n in self.nodes() if n.is_leaf()]

    def nodes(self) -> Iterator[GTNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf():
                stack.append(node.right)
                stack.append(node.left)

    def route(self, x) -> GTNode:
        node = self.root
        while not node.is_leaf():
            node = node.right if x[node.attribute] > node.threshold else node.left
        return node

    def positive_probability(self, x) -> float:
        return self.route(x).class1_prob

    # -- exact integration over boxes --------------------------------------
    #
    # Streams draw equal example counts from every leaf, so the example
    # law is the leaf-uniform mixture: pick a leaf uniformly, then a point
    # uniformly inside its box.  All truth integrals below use that law.

    def box_mass(self, lo, hi) -> tuple[float, float]:
        """(example mass, positive-label mass) of an axis-aligned box under
        the leaf-uniform mixture, computed exactly."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        weight = 1.0 / len(self.leaves)
        mass = 0.0
        positive = 0.0
        for leaf in self.leaves:
            edges = np.minimum(hi, leaf.hi) - np.maximum(lo, leaf.lo)
            if np.all(edges > 0.0):
                fraction = float(np.prod(edges / (leaf.hi - leaf.lo)))
                mass += weight * fraction
                positive += weight * fraction * leaf.class1_prob
        return mass, positive

    def bayes_label(self, lo, hi) -> int:
        """Optimal label of a box: 1 iff its mean positive rate >= 1/2."""
        mass, positive = self.box_mass(lo, hi)
        if mass <= 0.0:
            raise ValueError("box carries no example mass")
        return 1 if positive >= 0.5 * mass else 0

    def split_gain(self, kind: CriterionKind, lo, hi, attribute: int, threshold: float) -> float:
        """True impurity gain of splitting a box at (attribute, threshold)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        mass, positive = self.box_mass(lo, hi)
        if mass <= 0.0:
            raise ValueError("box carries no example mass")
        left_hi = hi.copy()
        left_hi[attribute] = min(threshold, hi[attribute])
        if left_hi[attribute] <= lo[attribute]:
            return 0.0
        right_lo = lo.copy()
        right_lo[attribute] = max(threshold, lo[attribute])
        if right_lo[attribute] >= hi[attribute]:
            return 0.0
        mass_l, pos_l = self.box_mass(lo, left_hi)
        mass_r = mass - mass_l
        pos_r = positive - pos_l
        p1 = pos_r / mass
        q1 = (mass_r - pos_r) / mass
        p0 = pos_l / mass
        q0 = (mass_l - pos_l) / mass
        return impurity(kind, positive / mass) - conditional_impurity(kind, p1, q1, p0, q0)

    def best_split_gain(self, kind: CriterionKind, lo, hi, points_per_segment: int = 24) -> float:
        """Best true gain over all axis-aligned thresholds inside a box.

        The truth is piecewise uniform, so the gain is smooth between the
        generator's own cut coordinates; a grid of interior points per
        smooth segment (plus the cuts themselves) localizes the maximum.
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        best = 0.0
        for attribute in range(self.num_attributes):
            cuts = {lo[attribute], hi[attribute]}
            for node in self.nodes():
                if node.is_leaf() or node.attribute != attribute:
                    continue
                if lo[attribute] < node.threshold < hi[attribute] and np.all(
                    np.minimum(hi, node.hi) - np.maximum(lo, node.lo) > 0.0
                ):
                    cuts.add(node.threshold)
            grid = sorted(cuts)
            for a, b in zip(grid[:-1], grid[1:]):
                interior = np.linspace(a, b, points_per_segment + 2)[1:-1]
                for thr in list(interior) + ([b] if b < hi[attribute] else []):
                    g = self.split_gain(kind, lo, hi, attribute, float(thr))
                    if g > best:
                        best = g
        return best

    def sample_points(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` feature vectors from the example law (uniform leaf
        choice, uniform point within the leaf's box)."""
        choices = rng.integers(len(self.leaves), size=n)
        points = np.empty((n, self.num_attributes))
        for idx, leaf in enumerate(self.leaves):
            mask = choices == idx
            count = int(mask.sum())
            if count:
                points[mask] = leaf.lo + rng.random((count, self.num_attributes)) * (
                    leaf.hi - leaf.lo
                )
        return points

    # -- snapshot -----------------------------------------------------------

    SNAPSHOT_HEADER = "streamtree-generator v1"

    def snapshot(self) -> str:
        lines = [self.SNAPSHOT_HEADER, f"attributes {self.num_attributes}"]
        order = []
        ids = {}
        queue = [self.root]
        while queue:
            node = queue.pop(0)
            ids[id(node)] = len(order)
            order.append(node)
            if not node.is_leaf():
                queue.append(node.left)
                queue.append(node.right)
        lines.append(f"nodes {len(order)}")
        for i, node in enumerate(order):
            box = "lo=" + ",".join(repr(float(v)) for v in node.lo) + " hi=" + ",".join(
                repr(float(v)) for v in node.hi
            )
            if node.is_leaf():
                lines.append(f"G {i} prob={float(node.class1_prob)!r} {box}")
            else:
                lines.append(
                    f"I {i} attr={node.attribute} thr={float(node.threshold)!r} "
                    f"left={ids[id(node.left)]} right={ids[id(node.right)]} {box}"
                )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_snapshot(cls, text: str) -> "GroundTruthTree":
        lines = text.strip().split("\n")
        if lines[0] != cls.SNAPSHOT_HEADER:
            raise ValueError(f"unsupported snapshot header {lines[0]!r}")
        d = int(lines[1].split()[1])
        count = int(lines[2].split()[1])
        raw = {}
        for line in lines[3 : 3 + count]:
            parts = line.split()
            fields = dict(p.split("=", 1) for p in parts[2:])
            raw[int(parts[1])] = (parts[0], fields)
        nodes = {}
        for idx, (tag, fields) in raw.items():
            lo = np.array([float(v) for v in fields["lo"].split(",")])
            hi = np.array([float(v) for v in fields["hi"].split(",")])
            nodes[idx] = GTNode(lo=lo, hi=hi)
        for idx, (tag, fields) in raw.items():
            node = nodes[idx]
            if tag == "G":
                node.class1_prob = float(fields["prob"])
            else:
                node.attribute = int(fields["attr"])
                node.threshold = float(fields["thr"])
                node.left = nodes[int(fields["left"])]
                node.right = nodes[int(fields["right"])]
        return cls(root=nodes[0], num_attributes=d)


def rand_cbt(
    num_leaves: int, num_attributes: int, q: float, rng: np.random.Generator
) -> GroundTruthTree:
    """Recursive random complete binary tree with ``num_leaves`` leaves.

    At every internal node the leaf budget is divided by a uniform draw
    (left gets max(1, floor(budget * x)), capped so the right subtree
    keeps at least one leaf), the split attribute is uniform over the
    ``num_attributes`` dimensions and the threshold uniform within the
    node's box extent.  Left leaves get class-1 probability ``q``, right
    leaves ``1 - q``.
    """
    if num_leaves < 1:
        raise ValueError("num_leaves must be >= 1")
    if num_attributes < 1:
        raise ValueError("num_attributes must be >= 1")
    if not 0.0 < q < 1.0:
        raise ValueError("q must be in (0, 1)")

    def build(budget: int, lo: np.ndarray, hi: np.ndarray, is_left: bool) -> GTNode:
        node = GTNode(lo=lo, hi=hi)
        if budget == 1:
            node.class1_prob = q if is_left else 1.0 - q
            return node
        x = rng.random()
        left_budget = max(1, int(np.floor(budget * x)))
        left_budget = min(left_budget, budget - 1)
        right_budget = budget - left_budget
        attribute = int(rng.integers(num_attributes))
        threshold = float(lo[attribute] + rng.random() * (hi[attribute] - lo[attribute]))
        node.attribute = attribute
        node.threshold = threshold
        left_hi = hi.copy()
        left_hi[attribute] = threshold
        right_lo = lo.copy()
        right_lo[attribute] = threshold
        node.left = build(left_budget, lo.copy(), left_hi, True)
        node.right = build(right_budget, right_lo, hi.copy(), False)
        return node

    root = build(num_leaves, np.zeros(num_attributes), np.ones(num_attributes), True)
    return GroundTruthTree(root=root, num_attributes=num_attributes)


def sample_stream(
    tree: GroundTruthTree,
    examples_per_leaf: int,
    rng: np.random.Generator,
    shuffle: bool = True,
) -> list[Example]:
    """Draw ``examples_per_leaf`` uniform points from every leaf box,
    label each 1 with the leaf's class probability, and pool them in a
    globally shuffled order (pass ``shuffle=False`` for leaf-block order)."""
    if examples_per_leaf < 1:
        raise ValueError("examples_per_leaf must be >= 1")
    d = tree.num_attributes
    blocks = []
    labels = []
    for leaf in tree.leaves:
        pts = leaf.lo + rng.random((examples_per_leaf, d)) * (leaf.hi - leaf.lo)
        ys = (rng.random(examples_per_leaf) < leaf.class1_prob).astype(np.int8)
        blocks.append(pts)
        labels.append(ys)
    features = np.vstack(blocks)
    ys = np.concatenate(labels)
    if shuffle:
        order = rng.permutation(len(ys))
        features = features[order]
        ys = ys[order]
    return [Example(features[i], int(ys[i])) for i in range(len(ys))]
