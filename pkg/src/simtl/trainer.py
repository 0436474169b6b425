"""Plain-gradient multi-task training loop.

One run consumes a single ``numpy`` Generator seeded from ``config.seed`` in a
fixed order: parameter init (shared, then heads in task order), then per step
one mini-batch per task in task order, then balancer randomness (RLW weights,
PCGrad visiting orders).
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from simtl.balancers import (
    AlphaStrategy,
    BalancerKind,
    BalancerState,
    BetaSchedule,
    aggregate,
    rlw_weights,
)
from simtl.errors import DivergenceError, EvaluationError
from simtl.tasks import ModelParams, TaskSet
from simtl.transforms import TransformKind, transform_grad


class Method(str, Enum):
    EW = "ew"
    LW = "lw"
    RLW = "rlw"
    GLS = "gls"
    PCGRAD = "pcgrad"
    SI_G = "si_g"
    SI_MTL = "si_mtl"


# method -> (loss transform, shared-gradient balancer)
METHOD_TABLE = {
    Method.EW: (TransformKind.IDENTITY, BalancerKind.EW),
    Method.LW: (TransformKind.LOG, BalancerKind.EW),
    Method.RLW: (TransformKind.IDENTITY, BalancerKind.RLW),
    Method.GLS: (TransformKind.IDENTITY, BalancerKind.GLS),
    Method.PCGRAD: (TransformKind.IDENTITY, BalancerKind.PCGRAD),
    Method.SI_G: (TransformKind.IDENTITY, BalancerKind.SI_G),
    Method.SI_MTL: (TransformKind.LOG, BalancerKind.SI_G),
}


@dataclass(frozen=True)
class TrainConfig:
    method: Method = Method.SI_MTL
    alpha: AlphaStrategy = AlphaStrategy.MAX
    beta: BetaSchedule = field(default_factory=BetaSchedule)
    lr: float = 0.01
    lr_halve_at: int | None = None
    steps: int = 1000
    batch_size: int = 16
    seed: int = 0
    init_scale: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "alpha", AlphaStrategy(self.alpha))
        object.__setattr__(self, "beta", BetaSchedule.parse(self.beta))
        if not self.lr > 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")
        if not self.init_scale > 0:
            raise ValueError(f"init_scale must be positive, got {self.init_scale}")
        if self.lr_halve_at is not None and self.lr_halve_at < 0:
            raise ValueError("lr_halve_at must be a nonnegative step index")

    @property
    def transform(self) -> TransformKind:
        return METHOD_TABLE[self.method][0]

    @property
    def balancer(self) -> BalancerKind:
        return METHOD_TABLE[self.method][1]

    def as_dict(self) -> dict:
        d = asdict(self)
        d["method"] = self.method.value
        d["alpha"] = self.alpha.value
        d["beta"] = str(self.beta)
        return d


@dataclass(frozen=True, eq=False)
class StepRecord:
    step: int
    losses: tuple[float, ...]
    grad_norms: tuple[float, ...]
    alpha: float | None
    agg_norm: float
    lr: float

    def __eq__(self, other):
        return (
            isinstance(other, StepRecord)
            and self.step == other.step
            and self.losses == other.losses
            and self.grad_norms == other.grad_norms
            and self.alpha == other.alpha
            and self.agg_norm == other.agg_norm
            and self.lr == other.lr
        )


@dataclass(eq=False)
class RunTrace:
    """Per-step record of one seeded run.

    ``grad_norms`` holds the EMA gradient norms for SI-G style methods and the
    (transformed) per-task gradient norms otherwise. Equality ignores wall time.
    """

    config: TrainConfig
    steps: list[StepRecord]
    final_params: ModelParams
    final_losses: tuple[float, ...]
    wall_time: float = 0.0

    def __eq__(self, other):
        return (
            isinstance(other, RunTrace)
            and self.config == other.config
            and self.steps == other.steps
            and self.final_params.equals(other.final_params)
            and self.final_losses == other.final_losses
        )


def _psi_gradient(config, t, losses, raw_psi, weights):
    """Exact gradient of the method's objective with respect to head ``t``."""
    method = config.method
    ell = losses[t]
    if method in (Method.LW, Method.SI_MTL):
        return raw_psi / ell
    if method is Method.RLW:
        return weights[t] * raw_psi
    if method is Method.GLS:
        T = len(losses)
        geo = float(np.exp(np.mean(np.log(losses))))
        return (geo / T) * raw_psi / ell
    return raw_psi


def train(
    config: TrainConfig,
    task_set: TaskSet,
    init: ModelParams | None = None,
    observer=None,
) -> RunTrace:
    """Run ``config.steps`` steps of multi-task gradient descent.

    ``init`` overrides the random initialization (the init draw is still
    consumed so the batch stream does not depend on it). ``observer``, if
    given, is called as ``observer(step, t, loss, raw_grad, fed_grad)`` for
    every task gradient before aggregation. A ``DivergenceError`` carries the
    records of the completed steps in ``records``.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    T = task_set.num_tasks
    params = task_set.init_params(rng, config.init_scale)
    if init is not None:
        params = init.copy()
    state = BalancerState.create(T, task_set.shared_dim, config.beta, config.balancer)
    lr = config.lr
    records = []

    try:
        for k in range(config.steps):
            if config.lr_halve_at is not None and k == config.lr_halve_at:
                lr *= 0.5
            records.append(_step(k, lr, config, task_set, rng, params, state, observer))
        final = []
        for t in range(T):
            try:
                final.append(task_set.full_loss(t, params))
            except EvaluationError as exc:
                raise DivergenceError(config.steps, t, str(exc), seed=config.seed) from exc
    except DivergenceError as exc:
        exc.records = records
        raise
    return RunTrace(config, records, params, tuple(final), time.perf_counter() - start)


def _step(k, lr, config, task_set, rng, params, state, observer) -> StepRecord:
    """One iteration; updates ``params`` and ``state`` in place."""
    T = task_set.num_tasks
    losses, shared_grads, psi_grads = [], [], []
    for t in range(T):
        batch = task_set.sample_batch(t, rng, config.batch_size)
        try:
            ell, g_theta, g_psi = task_set.loss_and_grads(t, params, batch)
        except EvaluationError as exc:
            raise DivergenceError(k, t, str(exc), seed=config.seed) from exc
        fed = transform_grad(config.transform, ell, g_theta)
        if observer is not None:
            observer(k, t, ell, g_theta, fed)
        losses.append(ell)
        shared_grads.append(fed)
        psi_grads.append(g_psi)

    weights = rlw_weights(rng, T) if config.method is Method.RLW else None
    with np.errstate(over="ignore", invalid="ignore"):
        direction, alpha, norms = aggregate(
            state, shared_grads, losses, alpha=config.alpha, rng=rng, weights=weights
        )
    agg_norm = float(np.linalg.norm(direction))
    if not np.isfinite(agg_norm) or (alpha is not None and not np.isfinite(alpha)):
        raise DivergenceError(k, None, "non-finite aggregated gradient", seed=config.seed)

    with np.errstate(over="ignore", invalid="ignore"):
        params.shared = params.shared - lr * direction
        for t in range(T):
            params.task_specific[t] = params.task_specific[t] - lr * _psi_gradient(
                config, t, losses, psi_grads[t], weights
            )
    if not np.all(np.isfinite(params.shared)) or not all(
        np.all(np.isfinite(p)) for p in params.task_specific
    ):
        raise DivergenceError(k, None, "non-finite parameters", seed=config.seed)
    return StepRecord(k, tuple(losses), tuple(norms), alpha, agg_norm, lr)


def run_many(config: TrainConfig, task_set: TaskSet, seeds) -> list[RunTrace]:
    """One independent run per seed, in the order given."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("run_many needs at least one seed")
    return [train(replace(config, seed=seed), task_set) for seed in seeds]
