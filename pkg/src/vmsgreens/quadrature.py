"""Gauss-Lobatto quadrature on [-1, 1] and on mapped intervals."""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .polybasis import gll_nodes, legendre

# Error norms and projection data are over-integrated with this degree of precision.
ERROR_NORM_PRECISION = 25


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray
    degree_of_precision: int

    def __len__(self) -> int:
        return len(self.points)


@lru_cache(maxsize=None)
def gauss_lobatto_rule(n_points: int) -> QuadRule:
    """Gauss-Lobatto rule with ``n_points`` points, exact up to degree ``2n - 3``."""
    if int(n_points) != n_points or n_points < 2:
        raise ValueError(f"a Gauss-Lobatto rule needs at least 2 points, got {n_points!r}")
    n = int(n_points)
    x = gll_nodes(n - 1).nodes.copy()
    w = 2.0 / (n * (n - 1) * legendre(n - 1, x) ** 2)
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadRule(x, w, 2 * n - 3)


def rule_for_precision(dop: int) -> QuadRule:
    """Smallest Gauss-Lobatto rule integrating polynomials of degree ``dop`` exactly."""
    if int(dop) != dop or dop < 1:
        raise ValueError(f"degree of precision must be an integer >= 1, got {dop!r}")
    return gauss_lobatto_rule(max(2, math.ceil((dop + 3) / 2)))


def integrate(rule: QuadRule, f: Callable[[np.ndarray], np.ndarray], interval: tuple[float, float]) -> float:
    a, b = interval
    if not a < b:
        raise ValueError(f"degenerate interval [{a}, {b}]")
    x = 0.5 * (b - a) * (rule.points + 1.0) + a
    fx = np.broadcast_to(np.asarray(f(x), dtype=np.float64), x.shape)
    return float(np.dot(rule.weights, fx) * 0.5 * (b - a))
