"""Gradient-combination strategies for the shared parameters.

Each balancer maps the per-task shared-parameter gradients of one step to a
single update direction. SI-G keeps an exponential moving average of every
task gradient, rescales each average to unit norm, and multiplies their sum by
a common magnitude ``alpha`` chosen from the averaged gradient norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from simtl.errors import DimensionError
from simtl.transforms import gls_combined_gradient

NORM_EPS = 1e-12
_BETA_MAX = math.nextafter(1.0, 0.0)


class AlphaStrategy(str, Enum):
    MAX = "max"
    MIN = "min"
    MEAN = "mean"
    MEDIAN = "median"
    CONSTANT_INV_T = "constant_inv_T"


class BalancerKind(str, Enum):
    SI_G = "si_g"
    EW = "ew"
    RLW = "rlw"
    PCGRAD = "pcgrad"
    GLS = "gls"


@dataclass(frozen=True)
class BetaSchedule:
    """EMA decay per step: ``constant`` (beta_k = c) or ``inv_sqrt`` (beta_k = c / sqrt(k + 1)).

    ``k`` is the 0-based step index, so ``inv_sqrt`` starts at ``c``.
    """

    kind: str = "constant"
    c: float = 0.9

    def __post_init__(self):
        if self.kind == "constant":
            if not 0.0 <= self.c < 1.0:
                raise ValueError(f"constant beta must lie in [0, 1), got {self.c}")
        elif self.kind == "inv_sqrt":
            if not self.c > 0:
                raise ValueError(f"inv_sqrt beta needs c > 0, got {self.c}")
        else:
            raise ValueError(f"unknown beta schedule {self.kind!r}")

    def beta(self, k: int) -> float:
        if self.kind == "constant":
            return self.c
        return min(self.c / math.sqrt(k + 1.0), _BETA_MAX)

    def __str__(self):
        return f"{self.kind}:{self.c!r}"

    @classmethod
    def parse(cls, value) -> "BetaSchedule":
        """Accept a float (constant), ``"constant:0.9"`` or ``"inv_sqrt:0.1"``."""
        if isinstance(value, BetaSchedule):
            return value
        if isinstance(value, bool):
            raise ValueError("beta must be a number or 'kind:c' string")
        if isinstance(value, (int, float)):
            return cls("constant", float(value))
        if isinstance(value, str):
            kind, sep, c = value.partition(":")
            if not sep:
                return cls("constant", float(value))
            return cls(kind.strip(), float(c))
        raise ValueError("beta must be a number or 'kind:c' string")


# Three constants and the same three as c / sqrt(k + 1)
BETA_GRID = tuple(
    [BetaSchedule("constant", c) for c in (0.1, 0.5, 0.9)]
    + [BetaSchedule("inv_sqrt", c) for c in (0.1, 0.5, 0.9)]
)


@dataclass
class BalancerState:
    ema: list[np.ndarray]
    beta_schedule: BetaSchedule = field(default_factory=BetaSchedule)
    kind: BalancerKind = BalancerKind.SI_G
    step: int = 0

    @classmethod
    def create(cls, num_tasks, dim, beta_schedule=None, kind=BalancerKind.SI_G):
        return cls(
            [np.zeros(dim) for _ in range(num_tasks)],
            beta_schedule or BetaSchedule(),
            BalancerKind(kind),
        )


def _check_grads(g_list, dim=None):
    if not g_list:
        raise DimensionError("need at least one gradient")
    dim = g_list[0].shape if dim is None else (dim,)
    for g in g_list:
        if np.shape(g) != dim:
            raise DimensionError(f"gradient shape {np.shape(g)} does not match {dim}")


def ema_update(state: BalancerState, g_list) -> list[np.ndarray]:
    """Blend ``g_list`` into the running averages and advance the step counter.

    Step 0 stores ``(1 - beta) * g`` with no bias correction.
    """
    if len(g_list) != len(state.ema):
        raise DimensionError(f"expected {len(state.ema)} gradients, got {len(g_list)}")
    _check_grads(g_list, state.ema[0].size)
    beta = state.beta_schedule.beta(state.step)
    if state.step == 0:
        new = [(1.0 - beta) * g for g in g_list]
    else:
        new = [beta * m + (1.0 - beta) * g for m, g in zip(state.ema, g_list)]
    state.ema = new
    state.step += 1
    return new


def alpha_value(norms, strategy: AlphaStrategy, T: int | None = None) -> float:
    if len(norms) == 0:
        raise ValueError("alpha needs at least one norm")
    strategy = AlphaStrategy(strategy)
    if strategy is AlphaStrategy.CONSTANT_INV_T:
        return 1.0 / (T if T is not None else len(norms))
    arr = np.asarray(norms, dtype=np.float64)
    if strategy is AlphaStrategy.MAX:
        return float(arr.max())
    if strategy is AlphaStrategy.MIN:
        return float(arr.min())
    if strategy is AlphaStrategy.MEAN:
        return float(arr.mean())
    # even counts take the midpoint of the two central order statistics
    return float(np.median(arr))


def si_g_aggregate(ema_grads, strategy: AlphaStrategy = AlphaStrategy.MAX):
    """Return ``(direction, alpha)`` for ``alpha * sum_t g_t / ||g_t||``.

    Tasks whose norm is below ``NORM_EPS`` contribute nothing and are left
    out of ``alpha``; if every task is below it the direction is zero.
    """
    _check_grads(ema_grads)
    T = len(ema_grads)
    norms = [float(np.linalg.norm(g)) for g in ema_grads]
    live = [i for i, n in enumerate(norms) if n >= NORM_EPS]
    out = np.zeros_like(ema_grads[0], dtype=np.float64)
    if not live:
        return out, 0.0
    for i in live:
        out += ema_grads[i] / norms[i]
    alpha = alpha_value([norms[i] for i in live], strategy, T)
    return alpha * out, alpha


def ew_aggregate(g_list, weights=None) -> np.ndarray:
    """Weighted sum of gradients; unit weights give equal weighting."""
    _check_grads(g_list)
    if weights is None:
        weights = [1.0] * len(g_list)
    if len(weights) != len(g_list):
        raise DimensionError("one weight per gradient required")
    out = np.zeros_like(g_list[0], dtype=np.float64)
    for w, g in zip(weights, g_list):
        out += w * g
    return out


def rlw_weights(rng: np.random.Generator, T: int) -> np.ndarray:
    """Softmax of a standard normal draw; resampled at every call."""
    if T < 1:
        raise ValueError("T must be >= 1")
    z = rng.standard_normal(T)
    e = np.exp(z - z.max())
    return e / e.sum()


def pcgrad_aggregate(g_list, rng: np.random.Generator | None = None) -> np.ndarray:
    """Project conflicting gradients onto each other's normal planes, then sum.

    For each task the other tasks are visited in an order shuffled by ``rng``
    (index order when ``rng`` is None); projections use the other tasks'
    original gradients.
    """
    _check_grads(g_list)
    T = len(g_list)
    sq = [float(g @ g) for g in g_list]
    out = np.zeros_like(g_list[0], dtype=np.float64)
    for i in range(T):
        others = [j for j in range(T) if j != i]
        if rng is not None:
            others = [others[k] for k in rng.permutation(len(others))]
        gi = np.array(g_list[i], dtype=np.float64)
        for j in others:
            d = float(gi @ g_list[j])
            if d < 0.0 and sq[j] > 0.0:
                gi = gi - (d / sq[j]) * g_list[j]
        out += gi
    return out


def aggregate(
    state: BalancerState, grads, losses=None, *, alpha=AlphaStrategy.MAX, rng=None, weights=None
):
    """Dispatch one step of ``state.kind``; returns ``(direction, alpha_or_None, per_task_norms)``.

    Only SI-G reads or writes the EMA buffers. ``per_task_norms`` are the
    norms of whatever per-task vectors the balancer combined. RLW uses
    ``weights`` when given and draws them from ``rng`` otherwise.
    """
    kind = state.kind
    if kind is BalancerKind.SI_G:
        ema = ema_update(state, grads)
        direction, a = si_g_aggregate(ema, alpha)
        return direction, a, [float(np.linalg.norm(g)) for g in ema]
    norms = [float(np.linalg.norm(g)) for g in grads]
    if kind is BalancerKind.EW:
        direction = ew_aggregate(grads)
    elif kind is BalancerKind.RLW:
        if weights is None:
            weights = rlw_weights(rng, len(grads))
        direction = ew_aggregate(grads, weights)
    elif kind is BalancerKind.PCGRAD:
        direction = pcgrad_aggregate(grads, rng)
    elif kind is BalancerKind.GLS:
        direction = gls_combined_gradient(losses, grads)
    else:  # pragma: no cover - enum is exhaustive
        raise ValueError(kind)
    state.step += 1
    return direction, None, norms
