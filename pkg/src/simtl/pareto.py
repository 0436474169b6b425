"""Pareto dominance and brute-force front enumeration.

All comparisons are exact; no tolerance is applied, so monotone transforms of
tie-free inputs must leave the front unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from simtl.errors import DimensionError, DomainError


@dataclass(frozen=True)
class ObjectivePoint:
    losses: tuple[float, ...]
    candidate_index: int

    def __post_init__(self):
        object.__setattr__(self, "losses", tuple(float(v) for v in self.losses))


def dominates(a: ObjectivePoint, b: ObjectivePoint) -> bool:
    """True iff ``a`` is no worse than ``b`` everywhere and differs somewhere."""
    if len(a.losses) != len(b.losses):
        raise DimensionError("points have different numbers of objectives")
    return all(x <= y for x, y in zip(a.losses, b.losses)) and a.losses != b.losses


def _as_matrix(points) -> np.ndarray:
    if not points:
        raise ValueError("need at least one point")
    T = len(points[0].losses)
    if any(len(p.losses) != T for p in points):
        raise DimensionError("points have different numbers of objectives")
    return np.array([p.losses for p in points], dtype=np.float64)


def front_mask(L: np.ndarray) -> np.ndarray:
    """Boolean mask of non-dominated rows of an ``(n, T)`` loss matrix."""
    L = np.asarray(L, dtype=np.float64)
    n = L.shape[0]
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        le = np.all(L <= L[i], axis=1)
        ne = np.any(L != L[i], axis=1)
        if np.any(le & ne):
            keep[i] = False
    return keep


def pareto_front(points) -> set[int]:
    """Candidate indices of the points no other point dominates."""
    L = _as_matrix(points)
    mask = front_mask(L)
    return {p.candidate_index for p, m in zip(points, mask) if m}


def check_log_front_invariance(points) -> bool:
    """Compare the fronts of the raw losses and of their elementwise logarithm."""
    L = _as_matrix(points)
    if not np.all(L > 0):
        raise DomainError("log front check needs strictly positive losses")
    return check_front_invariance(points, np.log)


def check_front_invariance(points, transform) -> bool:
    """Same comparison for any elementwise map ``transform``."""
    L = _as_matrix(points)
    raw = front_mask(L)
    mapped = front_mask(transform(L))
    return bool(np.array_equal(raw, mapped))


def points_from_matrix(L) -> list[ObjectivePoint]:
    return [ObjectivePoint(tuple(row), i) for i, row in enumerate(np.asarray(L))]


def quadratic_grid_1d():
    """401-point grid on [-2, 2] for ``(x - 1)^2 + 0.1`` and ``(x + 1)^2 + 0.1``."""
    theta = (np.arange(401) - 200) / 100.0
    L = np.stack([(theta - 1.0) ** 2 + 0.1, (theta + 1.0) ** 2 + 0.1], axis=1)
    return theta, points_from_matrix(L)


def quadratic_grid_2d(n: int = 20):
    """``n x n`` grid on [-2, 2]^2 for three quadratics centred on a triangle."""
    centers = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.5]])
    axis = np.linspace(-2.0, 2.0, n)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    grid = np.stack([xx.ravel(), yy.ravel()], axis=1)
    L = np.stack([np.sum((grid - c) ** 2, axis=1) + 0.1 for c in centers], axis=1)
    return grid, points_from_matrix(L)
