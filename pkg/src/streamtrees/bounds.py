"""Confidence-interval widths used by the split and query-rate decisions.

Every function here is pure and stateless.  All logarithms are natural,
with one exception: the K-class entropy-gain constant ``C(K, m)`` inside
:func:`mcdiarmid_entropy_interval` is defined with base-2 logs, matching
the constant as published.  Widths are returned raw, never clipped to the
range of the criterion they will be compared against.
"""

from __future__ import annotations

import math
import sys

#: Interval families selectable in :func:`split_confidence`.
BOUND_KINDS = ("entropy", "gini", "km", "hoeffding")

# Composed failure probabilities can underflow for huge t*d*m products; we
# substitute the smallest positive normal float and count the event.
_delta_underflow_count = 0


def delta_underflow_count() -> int:
    """Number of times a composed delta underflowed to zero so far."""
    return _delta_underflow_count


def reset_delta_underflow_count() -> None:
    global _delta_underflow_count
    _delta_underflow_count = 0


def _check_count(name: str, value: int, least: int = 1) -> None:
    if value < least:
        raise ValueError(f"{name} must be >= {least}, got {value}")


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")


def hoeffding_interval(m: int, delta: float, value_range: float = 1.0) -> float:
    """Two-sided deviation width for the mean of ``m`` i.i.d. observations
    taking values in an interval of size ``value_range``."""
    _check_count("m", m)
    _check_delta(delta)
    if value_range <= 0.0:
        raise ValueError(f"value_range must be positive, got {value_range}")
    return value_range * math.sqrt(math.log(1.0 / delta) / (2.0 * m))


def mcdiarmid_entropy_interval(m: int, delta: float, num_classes: int = 2) -> float:
    """Width of the K-class entropy-gain interval,
    ``C(K, m) * sqrt(ln(1/delta) / (2m))`` with
    ``C(K, m) = 6*(K*log2(e) + log2(2m)) + 2*log2(K)``.

    Deliberately conservative: at practical ``m`` the width exceeds the
    entropy-gain range, so a learner gated by it never splits.
    """
    _check_count("m", m)
    _check_count("num_classes", num_classes, least=2)
    _check_delta(delta)
    c = 6.0 * (num_classes * math.log2(math.e) + math.log2(2.0 * m)) + 2.0 * math.log2(num_classes)
    return c * math.sqrt(math.log(1.0 / delta) / (2.0 * m))


def entropy_interval(m: int, delta: float) -> float:
    """Deviation width of the plug-in conditional scaled-entropy estimate:
    ``ln(m) * sqrt((2/m) * ln(4/delta)) + 2/m``.  Requires ``m >= 2``."""
    _check_count("m", m, least=2)
    _check_delta(delta)
    return math.log(m) * math.sqrt(2.0 / m * math.log(4.0 / delta)) + 2.0 / m


def gini_interval(m: int, delta: float) -> float:
    """Deviation width of the harmonic-mean conditional Gini estimate:
    ``sqrt((8/m) * ln(2/delta)) + 4/sqrt(m)``."""
    _check_count("m", m)
    _check_delta(delta)
    return math.sqrt(8.0 / m * math.log(2.0 / delta)) + 4.0 / math.sqrt(m)


def km_interval(m: int, delta: float) -> float:
    """Deviation width of the sqrt-index conditional estimate:
    ``4 * sqrt(ln(8/delta) / m)``."""
    _check_count("m", m)
    _check_delta(delta)
    return 4.0 * math.sqrt(math.log(8.0 / delta) / m)


def split_confidence(
    m: int,
    t: int,
    d: int,
    h: int,
    delta: float,
    bound_kind: str,
    value_range: float = 1.0,
) -> float:
    """Split-test width at a leaf with ``m`` labeled examples, depth ``h``,
    after ``t`` stream items over ``d`` attributes.

    The base interval of ``bound_kind`` is evaluated at the composed
    failure probability ``delta / ((h+1)(h+2) * t * d * m)``, which union-
    bounds over candidate splits, leaf depth, and time.  ``value_range``
    only affects the ``hoeffding`` kind.
    """
    _check_count("m", m)
    _check_count("t", t)
    _check_count("d", d)
    _check_count("h", h, least=0)
    _check_delta(delta)
    if bound_kind not in BOUND_KINDS:
        raise ValueError(f"bound_kind must be one of {BOUND_KINDS}, got {bound_kind!r}")
    composed = delta / ((h + 1) * (h + 2) * t * d * m)
    if composed <= 0.0:
        global _delta_underflow_count
        _delta_underflow_count += 1
        composed = sys.float_info.min
    if composed >= 1.0:
        raise ValueError(f"composed delta {composed} not in (0, 1)")
    if bound_kind == "entropy":
        return entropy_interval(m, composed)
    if bound_kind == "gini":
        return gini_interval(m, composed)
    if bound_kind == "km":
        return km_interval(m, composed)
    return hoeffding_interval(m, composed, value_range)


def heuristic_interval(m: int, t: int, d: int, h: int, c: float) -> float:
    """Tunable split-test width ``c * sqrt(ln(m^2 h^2 t d) / m)``.

    ``h`` is clamped to ``max(h, 1)`` so a depth-0 root cannot zero the log
    argument; ``c`` trades split eagerness against caution.
    """
    _check_count("m", m)
    _check_count("t", t)
    _check_count("d", d)
    _check_count("h", h, least=0)
    if c <= 0.0:
        raise ValueError(f"c must be positive, got {c}")
    h = max(h, 1)
    arg = float(m) * m * h * h * t * d
    if arg <= 1.0:
        raise ValueError(f"log argument m^2*h^2*t*d = {arg} must exceed 1")
    return c * math.sqrt(math.log(arg) / m)


def leaf_consistency_interval(m: int, t: int, delta: float) -> float:
    """Width ``sqrt(ln(2t/delta) / (2m))`` around a leaf's empirical
    positive rate; a leaf whose margin from 1/2 exceeds it predicts the
    region-optimal label with probability at least ``1 - delta``."""
    _check_count("m", m)
    _check_count("t", t)
    _check_delta(delta)
    return math.sqrt(math.log(2.0 * t / delta) / (2.0 * m))
