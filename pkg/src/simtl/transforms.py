"""Loss transforms and the closed-form-free checks built on them."""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

from simtl.errors import DimensionError, DomainError

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class TransformKind(str, Enum):
    IDENTITY = "identity"
    LOG = "log"


def _require_positive(ell: float) -> None:
    if not ell > 0:
        raise DomainError(f"log transform needs a positive loss, got {ell!r}", value=ell)


def transform_loss(kind: TransformKind, ell: float) -> float:
    kind = TransformKind(kind)
    if kind is TransformKind.IDENTITY:
        return float(ell)
    _require_positive(ell)
    return math.log(ell)


def transform_grad(kind: TransformKind, ell: float, g: np.ndarray) -> np.ndarray:
    """Gradient of the transformed loss given the loss value and its raw gradient."""
    kind = TransformKind(kind)
    if kind is TransformKind.IDENTITY:
        return g
    _require_positive(ell)
    return g / ell


def imtl_l_inner_min(x: float, tol: float = 1e-10, max_iter: int = 500) -> tuple[float, float]:
    """Minimize ``f(s) = exp(s) * x - s - 1`` over ``s`` by golden-section search.

    The bracket is grown from ``[-1, 1]`` by function comparisons alone, so
    the search never uses the analytic minimizer. Returns ``(s_star, f(s_star))``.
    """
    if not x > 0:
        raise DomainError(f"x must be positive, got {x!r}", value=x)

    def f(s):
        return math.exp(s) * x - s - 1.0

    lo, hi = -1.0, 1.0
    step = 1.0
    # f is strictly convex: walk downhill until the interval brackets the minimum
    while f(lo) < f(lo + 0.5 * step):
        lo -= step
        step *= 2.0
    step = 1.0
    while f(hi) < f(hi - 0.5 * step):
        hi += step
        step *= 2.0

    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    s_star = 0.5 * (a + b)
    return s_star, f(s_star)


def gls_combined_gradient(losses, grads) -> np.ndarray:
    """Gradient of the geometric mean ``(prod ell_t) ** (1/T)``."""
    if len(losses) != len(grads) or not losses:
        raise DimensionError("need one gradient per loss and at least one task")
    for ell in losses:
        _require_positive(ell)
    if len(losses) == 1:
        return np.array(grads[0], dtype=np.float64)
    shape = np.shape(grads[0])
    if any(np.shape(g) != shape for g in grads):
        raise DimensionError("gradients must share one length")
    T = len(losses)
    geo = math.exp(sum(math.log(ell) for ell in losses) / T)
    acc = np.zeros(shape)
    for ell, g in zip(losses, grads):
        acc += g / ell
    return (geo / T) * acc
