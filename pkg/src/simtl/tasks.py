"""Differentiable multi-task suites.

Two families are provided:

* scaled quadratics, ``loss_t(theta) = s_t * (||theta - a_t||^2 + offset)``,
  with no task-specific parameters and closed-form single-task optima;
* a one-hidden-layer tanh regression network whose first layer is shared
  and whose linear heads are task-specific, trained on data drawn from a
  per-task random teacher network.

Every loss is strictly positive, so logarithmic transforms are always defined.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from simtl.errors import DimensionError, EvaluationError
from simtl.vecmath import vector

MLP_LOSS_OFFSET = 1e-3
# quadratic center perturbations are clipped to this fraction of the offset
# (in squared norm), which keeps every sample loss >= 0.1 * s * offset
NOISE_ENERGY_FRACTION = 0.9


@dataclass
class ModelParams:
    shared: np.ndarray
    task_specific: list[np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(self.shared.copy(), [p.copy() for p in self.task_specific])

    def equals(self, other: "ModelParams") -> bool:
        """Bitwise equality of all parameter arrays."""
        return (
            np.array_equal(self.shared, other.shared)
            and len(self.task_specific) == len(other.task_specific)
            and all(np.array_equal(a, b) for a, b in zip(self.task_specific, other.task_specific))
        )


@dataclass(frozen=True, eq=False)
class Batch:
    inputs: np.ndarray
    targets: np.ndarray
    task_index: int


@dataclass(frozen=True)
class StlBudget:
    """Single-task training budget: plain gradient steps on one task's log-loss."""

    steps: int = 500
    lr: float = 0.01
    batch_size: int = 16
    seed: int = 0
    init_scale: float = 0.1
    lr_halve_at: int | None = None


@dataclass(frozen=True, eq=False)
class StlReference:
    loss: float
    shared: np.ndarray | None = None
    task_specific: np.ndarray | None = None


class TaskSet:
    """Base class; subclasses define the model and data of each task."""

    kind: str = ""
    num_tasks: int
    shared_dim: int
    task_dims: tuple[int, ...]
    scales: tuple[float, ...]

    def loss_and_grads(self, t: int, params: ModelParams, batch: Batch):
        """Return ``(loss, grad_shared, grad_task_specific)`` on ``batch``."""
        raise NotImplementedError

    def sample_batch(self, t: int, rng: np.random.Generator, batch_size: int) -> Batch:
        raise NotImplementedError

    def full_batch(self, t: int) -> Batch:
        raise NotImplementedError

    def stl_reference(self, t: int, budget: StlBudget | None = None) -> StlReference:
        raise NotImplementedError

    def subset(self, tasks: list[int]) -> "TaskSet":
        raise NotImplementedError

    def loss(self, t: int, params: ModelParams, batch: Batch) -> float:
        return self.loss_and_grads(t, params, batch)[0]

    def grad_shared(self, t: int, params: ModelParams, batch: Batch) -> np.ndarray:
        return self.loss_and_grads(t, params, batch)[1]

    def grad_task_specific(self, t: int, params: ModelParams, batch: Batch) -> np.ndarray:
        return self.loss_and_grads(t, params, batch)[2]

    def full_loss(self, t: int, params: ModelParams) -> float:
        return self.loss(t, params, self.full_batch(t))

    def init_params(self, rng: np.random.Generator, init_scale: float) -> ModelParams:
        """Draw shared then task-specific parameters from N(0, init_scale^2)."""
        shared = rng.normal(0.0, init_scale, self.shared_dim)
        psi = [rng.normal(0.0, init_scale, d) for d in self.task_dims]
        return ModelParams(shared, psi)

    def _check(self, t: int, params: ModelParams, batch: Batch) -> None:
        if not 0 <= t < self.num_tasks:
            raise IndexError(f"task index {t} out of range for {self.num_tasks} tasks")
        if batch.task_index != t:
            raise ValueError(f"batch belongs to task {batch.task_index}, not {t}")
        if params.shared.shape != (self.shared_dim,):
            raise DimensionError(
                f"shared params have length {params.shared.size}, expected {self.shared_dim}"
            )
        if len(params.task_specific) != self.num_tasks:
            raise DimensionError("task-specific parameter count does not match task count")
        if params.task_specific[t].shape != (self.task_dims[t],):
            raise DimensionError(f"task-specific params of task {t} have wrong length")

    @staticmethod
    def _finite(t, value, *arrays):
        if not np.isfinite(value) or not all(np.all(np.isfinite(a)) for a in arrays):
            raise EvaluationError(f"non-finite loss or gradient on task {t}", task=t)


def _positive(name, values):
    for v in values:
        if not (np.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be positive, got {v}")


@dataclass(frozen=True, eq=False)
class QuadraticTaskSet(TaskSet):
    """Tasks ``s_t * (||theta - a_t||^2 + offset)`` sharing one parameter vector.

    A batch holds one center perturbation ``xi`` per row. A sample's loss is
    ``s * (||theta - a - xi||^2 - ||xi||^2 + offset)``: its gradient sees a
    perturbed center, while its mean over ``xi`` equals the noise-free loss.
    """

    centers: tuple[np.ndarray, ...]
    scales: tuple[float, ...]
    offset: float = 0.1
    noise_std: float = 0.1
    kind: str = field(default="quadratic", init=False)

    def __post_init__(self):
        centers = tuple(vector(c) for c in self.centers)
        if not centers:
            raise ValueError("need at least one task")
        dim = centers[0].size
        if dim < 1 or any(c.size != dim for c in centers):
            raise DimensionError("all centers must share one positive dimension")
        if len(self.scales) != len(centers):
            raise DimensionError("one scale per center required")
        _positive("scale", self.scales)
        _positive("offset", [self.offset])
        if not (np.isfinite(self.noise_std) and self.noise_std >= 0):
            raise ValueError(f"noise_std must be nonnegative, got {self.noise_std}")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))

    @property
    def num_tasks(self) -> int:
        return len(self.centers)

    @property
    def dim(self) -> int:
        return self.centers[0].size

    @property
    def shared_dim(self) -> int:
        return self.dim

    @property
    def task_dims(self) -> tuple[int, ...]:
        return (0,) * self.num_tasks

    def loss_and_grads(self, t, params, batch):
        self._check(t, params, batch)
        s = self.scales[t]
        u = params.shared - self.centers[t]
        xi_bar = batch.inputs.mean(axis=0)
        with np.errstate(over="ignore", invalid="ignore"):
            value = s * (float(u @ u) - 2.0 * float(u @ xi_bar) + self.offset)
            grad = 2.0 * s * (u - xi_bar)
        self._finite(t, value, grad)
        return value, grad, np.zeros(0)

    def sample_batch(self, t, rng, batch_size):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        xi = rng.normal(0.0, 1.0, (batch_size, self.dim)) * self.noise_std
        radius = np.sqrt(NOISE_ENERGY_FRACTION * self.offset)
        norms = np.linalg.norm(xi, axis=1, keepdims=True)
        shrink = np.minimum(1.0, radius / np.maximum(norms, np.finfo(float).tiny))
        return Batch(xi * shrink, np.zeros((batch_size, 0)), t)

    def full_batch(self, t):
        return Batch(np.zeros((1, self.dim)), np.zeros((1, 0)), t)

    def stl_reference(self, t, budget=None):
        return StlReference(self.scales[t] * self.offset, self.centers[t].copy(), np.zeros(0))

    def subset(self, tasks):
        return QuadraticTaskSet(
            tuple(self.centers[t] for t in tasks),
            tuple(self.scales[t] for t in tasks),
            self.offset,
            self.noise_std,
        )

    def with_scales(self, scales) -> "QuadraticTaskSet":
        return QuadraticTaskSet(self.centers, tuple(scales), self.offset, self.noise_std)


def make_scaled_quadratics(centers, scales, offset: float = 0.1, noise_std: float = 0.1):
    return QuadraticTaskSet(tuple(centers), tuple(scales), offset, noise_std)


def make_scaled_quadratic_pair(dim, centers, scales, offset=0.1, noise_std=0.1):
    """Two scaled quadratics in ``dim`` dimensions."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if len(centers) != 2 or len(scales) != 2:
        raise ValueError("a pair needs exactly two centers and two scales")
    ts = make_scaled_quadratics(centers, scales, offset, noise_std)
    if ts.dim != dim:
        raise DimensionError(f"centers have dimension {ts.dim}, expected {dim}")
    return ts


@dataclass(frozen=True, eq=False)
class MlpTaskSet(TaskSet):
    """Shared ``tanh`` hidden layer with one linear head per task.

    Shared parameters are ``[W.ravel(), b]`` with ``W`` of shape
    ``(hidden, input_dim)``; task ``t``'s head is ``[v, c]`` with prediction
    ``v @ tanh(W x + b) + c``. Loss is ``s_t * (MSE + 1e-3)``.
    """

    inputs: tuple[np.ndarray, ...]
    targets: tuple[np.ndarray, ...]
    hidden: int
    scales: tuple[float, ...]
    offset: float = MLP_LOSS_OFFSET
    kind: str = field(default="mlp", init=False)

    def __post_init__(self):
        if len(self.inputs) != len(self.targets) or len(self.inputs) != len(self.scales):
            raise DimensionError("inputs, targets and scales need one entry per task")
        if not self.inputs or self.hidden < 1:
            raise ValueError("need at least one task and one hidden unit")
        in_dim = self.inputs[0].shape[1]
        for x, y in zip(self.inputs, self.targets):
            if x.ndim != 2 or x.shape[1] != in_dim or x.shape[0] < 1:
                raise DimensionError("task inputs must be (n, input_dim) with n >= 1")
            if y.shape != (x.shape[0],):
                raise DimensionError("targets must be a vector matching the inputs")
        _positive("scale", self.scales)
        _positive("offset", [self.offset])
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))

    @property
    def num_tasks(self):
        return len(self.inputs)

    @property
    def input_dim(self):
        return self.inputs[0].shape[1]

    @property
    def shared_dim(self):
        return self.hidden * (self.input_dim + 1)

    @property
    def task_dims(self):
        return (self.hidden + 1,) * self.num_tasks

    def _unpack(self, theta):
        h, d = self.hidden, self.input_dim
        return theta[: h * d].reshape(h, d), theta[h * d :]

    def loss_and_grads(self, t, params, batch):
        self._check(t, params, batch)
        s = self.scales[t]
        W, b = self._unpack(params.shared)
        psi = params.task_specific[t]
        v, c = psi[:-1], psi[-1]
        x, y = batch.inputs, batch.targets
        n = x.shape[0]
        with np.errstate(over="ignore", invalid="ignore"):
            h = np.tanh(x @ W.T + b)
            r = h @ v + c - y
            value = s * (float(r @ r) / n + self.offset)
            dr = (2.0 * s / n) * r
            g_psi = np.concatenate([h.T @ dr, [dr.sum()]])
            dz = np.outer(dr, v) * (1.0 - h * h)
            g_theta = np.concatenate([(dz.T @ x).ravel(), dz.sum(axis=0)])
        self._finite(t, value, g_theta, g_psi)
        return value, g_theta, g_psi

    def sample_batch(self, t, rng, batch_size):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        idx = rng.integers(0, self.inputs[t].shape[0], batch_size)
        return Batch(self.inputs[t][idx], self.targets[t][idx], t)

    def full_batch(self, t):
        return Batch(self.inputs[t], self.targets[t], t)

    def subset(self, tasks):
        return MlpTaskSet(
            tuple(self.inputs[t] for t in tasks),
            tuple(self.targets[t] for t in tasks),
            self.hidden,
            tuple(self.scales[t] for t in tasks),
            self.offset,
        )

    def stl_reference(self, t, budget=None):
        """Train task ``t`` alone with plain gradient steps on its log-loss."""
        from simtl.trainer import TrainConfig, train

        budget = budget or StlBudget()
        config = TrainConfig(
            method="lw",
            lr=budget.lr,
            steps=budget.steps,
            batch_size=budget.batch_size,
            seed=budget.seed,
            init_scale=budget.init_scale,
            lr_halve_at=budget.lr_halve_at,
        )
        trace = train(config, self.subset([t]))
        return StlReference(
            trace.final_losses[0],
            trace.final_params.shared.copy(),
            trace.final_params.task_specific[0].copy(),
        )


def make_mlp_regression(
    T: int,
    input_dim: int,
    hidden: int,
    samples_per_task: int,
    scales,
    seed: int,
    teacher_hidden: int | None = None,
) -> MlpTaskSet:
    """Regression tasks labelled by independent random teacher networks.

    Each task draws its own inputs ``x ~ N(0, I)`` and teacher
    ``y = v . tanh(W x + b)``; targets are standardized to zero mean and
    unit variance per task so that unscaled losses start comparable.
    """
    if min(T, input_dim, hidden, samples_per_task) < 1:
        raise ValueError("all dimensions must be >= 1")
    if len(scales) != T:
        raise DimensionError(f"expected {T} scales, got {len(scales)}")
    teacher_hidden = teacher_hidden or hidden
    rng = np.random.default_rng(seed)
    inputs, targets = [], []
    for _ in range(T):
        x = rng.normal(size=(samples_per_task, input_dim))
        W = rng.normal(size=(teacher_hidden, input_dim)) / np.sqrt(input_dim)
        b = rng.normal(size=teacher_hidden) * 0.5
        v = rng.normal(size=teacher_hidden)
        y = np.tanh(x @ W.T + b) @ v
        std = y.std()
        y = (y - y.mean()) / (std if std > 0 else 1.0)
        inputs.append(x)
        targets.append(y)
    return MlpTaskSet(tuple(inputs), tuple(targets), hidden, tuple(float(s) for s in scales))


def replace_task_data(task_set: MlpTaskSet, t: int, inputs=None, targets=None) -> MlpTaskSet:
    """Copy of ``task_set`` with task ``t``'s data swapped out."""
    xs = list(task_set.inputs)
    ys = list(task_set.targets)
    if inputs is not None:
        xs[t] = inputs
    if targets is not None:
        ys[t] = targets
    return dataclasses.replace(task_set, inputs=tuple(xs), targets=tuple(ys))
