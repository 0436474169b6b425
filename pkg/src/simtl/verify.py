"""Numerical checks behind ``simtl verify``.

Each checker returns a list of ``Check`` results; a suite passes when every
check does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from simtl.metrics import load_tables, recompute_reported, rounding_bound
from simtl.pareto import (
    check_log_front_invariance,
    front_mask,
    points_from_matrix,
    quadratic_grid_1d,
    quadratic_grid_2d,
)
from simtl.transforms import imtl_l_inner_min

PROP2_POINTS = (1e-2, 1e-1, 0.5, 1.0, 2.0, math.e, 10.0, 1e2)
PROP2_VALUE_TOL = 1e-8
PROP2_ARGMIN_TOL = 1e-6
TABLE_TOL = 0.05


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}" + (f": {self.detail}" if self.detail else "")


def random_clouds(n_clouds=100, seed=20240101, max_points=200):
    """Tie-free positive point clouds with T in {2, 3, 5}."""
    rng = np.random.default_rng(seed)
    for i in range(n_clouds):
        T = (2, 3, 5)[i % 3]
        n = int(rng.integers(2, max_points + 1))
        yield T, rng.uniform(0.01, 10.0, (n, T))


def check_prop1() -> list[Check]:
    checks = []
    theta, pts = quadratic_grid_1d()
    mask = front_mask(np.array([p.losses for p in pts]))
    expected = (theta >= -1.0) & (theta <= 1.0)
    checks.append(Check("1-D quadratic grid front is theta in [-1, 1]", bool(np.array_equal(mask, expected)),
                        f"{int(mask.sum())} of {len(pts)} points"))
    checks.append(Check("1-D quadratic grid log-front invariance", check_log_front_invariance(pts)))
    _, pts2 = quadratic_grid_2d(20)
    checks.append(Check("20x20 three-task grid log-front invariance", check_log_front_invariance(pts2)))
    failures = 0
    count = 0
    for _, L in random_clouds():
        count += 1
        if not check_log_front_invariance(points_from_matrix(L)):
            failures += 1
    checks.append(Check(f"{count} random clouds log-front invariance", failures == 0, f"{failures} failures"))
    return checks


def check_prop2() -> list[Check]:
    checks = []
    for x in PROP2_POINTS:
        s_star, value = imtl_l_inner_min(x)
        err_v = abs(value - math.log(x))
        err_s = abs(s_star + math.log(x))
        ok = err_v <= PROP2_VALUE_TOL and err_s <= PROP2_ARGMIN_TOL
        checks.append(Check(f"inner min at x={x:g}", ok, f"|value - ln x| = {err_v:.2e}, |s + ln x| = {err_s:.2e}"))
    return checks


def check_tables(path=None, tol=TABLE_TOL) -> list[Check]:
    """Recompute the overall improvement of every row that reports one.

    The detail names the first-order printing-precision bound, and the looser
    bound obtained when a trailing printed zero is read as padding.
    """
    data = load_tables(path)
    checks = []
    for dataset in data:
        for method, recomputed, reported in recompute_reported(data, dataset):
            diff = abs(recomputed - reported)
            detail = (
                f"recomputed {recomputed:+.4f}, reported {reported:+.2f}, |diff| {diff:.4f}"
                f" (printing bound {rounding_bound(data, dataset, method):.3f},"
                f" trailing-zero bound {rounding_bound(data, dataset, method, True):.3f})"
            )
            checks.append(Check(f"{dataset}/{method} delta_p", diff <= tol, detail))
    return checks


SUITES = {"prop1": check_prop1, "prop2": check_prop2, "tables": check_tables}
