"""Flat float64 vector helpers and a central-difference gradient oracle.

Vectors are plain 1-D ``numpy`` arrays of dtype float64. Every helper
rejects non-finite entries instead of propagating them.
"""

import numpy as np

from simtl.errors import DimensionError, EvaluationError


def vector(values) -> np.ndarray:
    """Return ``values`` as a fresh finite 1-D float64 array."""
    v = np.array(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise EvaluationError("vector has non-finite entries")
    return v


def zeros(n: int) -> np.ndarray:
    return np.zeros(n, dtype=np.float64)


def check_same_length(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise DimensionError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")


def norm2(v: np.ndarray) -> float:
    """Euclidean norm."""
    return float(np.linalg.norm(v))


def dot(x: np.ndarray, y: np.ndarray) -> float:
    check_same_length(x, y)
    return float(np.dot(x, y))


def scaled_add(a: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Return ``a * x + y`` as a new array."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    check_same_length(x, y)
    with np.errstate(over="ignore", invalid="ignore"):
        out = a * x + y
    if not np.all(np.isfinite(out)):
        raise EvaluationError("scaled_add produced non-finite entries")
    return out


def finite_diff_grad(f, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x``.

    Coordinate ``i`` is ``(f(x + h e_i) - f(x - h e_i)) / (2 h)``.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    x = vector(x)
    grad = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fp = float(f(xp))
        fm = float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise EvaluationError(f"non-finite evaluation at coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad
