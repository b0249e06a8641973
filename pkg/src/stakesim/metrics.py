"""Concentration metrics over stake vectors."""

from __future__ import annotations

import logging

import numpy as np

from .errors import ParameterError

logger = logging.getLogger(__name__)


def gini(x) -> float:
    """Sample Gini coefficient of a non-negative vector.

    Equivalent to sum_ij |x_i - x_j| / (2 n^2 mean), computed via the
    sorted O(n log n) identity.  A zero-sum vector is degenerate and maps
    to 0 (logged).
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ParameterError("gini expects a non-empty 1-d vector")
    if np.any(arr < 0):
        raise ParameterError("gini expects non-negative entries")
    total = arr.sum()
    if total <= 0:
        logger.debug("gini of zero-sum vector defined as 0")
        return 0.0
    n = arr.size
    ordered = np.sort(arr)
    ranks = np.arange(1, n + 1, dtype=float)
    return float((2.0 * np.dot(ranks, ordered) - (n + 1) * total) / (n * total))


def norm_ratio(x) -> float:
    """L2/L1 norm ratio: 1 for a dictator, 1/sqrt(n) for a uniform vector."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ParameterError("norm_ratio expects a non-empty 1-d vector")
    if np.any(arr < 0):
        raise ParameterError("norm_ratio expects non-negative entries")
    l1 = arr.sum()
    if l1 <= 0:
        logger.debug("norm_ratio of zero vector defined as 0")
        return 0.0
    return float(np.sqrt(np.dot(arr, arr)) / l1)
