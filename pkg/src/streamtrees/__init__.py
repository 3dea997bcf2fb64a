"""Streaming binary decision trees with confidence-gated splits and
budgeted label-query strategies, plus a synthetic stream generator and an
online evaluation harness."""

__version__ = "0.1.0"
