"""Experiment configuration: a TOML document with ``[task]``, ``[train]`` and ``[sweep]`` tables.

Every key has a default and unknown keys are rejected. Example::

    seeds = [0, 1, 2]
    out = "runs/quadratic"

    [task]
    kind = "quadratic"
    dim = 10
    scales = [1.0, 1000.0]

    [train]
    method = "si_mtl"
    beta = "constant:0.9"

    [sweep]
    alpha = ["max", "min", "mean", "median"]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from simtl.balancers import AlphaStrategy, BetaSchedule
from simtl.errors import ConfigError
from simtl.tasks import StlBudget, TaskSet, make_mlp_regression, make_scaled_quadratics
from simtl.trainer import Method, TrainConfig

QUADRATIC_KEYS = {"kind", "dim", "centers", "scales", "offset", "noise_std"}
MLP_KEYS = {"kind", "num_tasks", "input_dim", "hidden", "samples_per_task", "scales", "data_seed"}


def default_centers(num_tasks: int, dim: int) -> tuple[tuple[float, ...], ...]:
    """Evenly spread unit-distance centers: a circle in the first two coordinates."""
    if dim == 1:
        pts = np.linspace(-1.0, 1.0, num_tasks) if num_tasks > 1 else np.zeros(1)
        return tuple((float(p),) for p in pts)
    out = []
    for t in range(num_tasks):
        c = [0.0] * dim
        angle = 2.0 * math.pi * t / num_tasks
        c[0], c[1] = round(math.cos(angle), 15) + 0.0, round(math.sin(angle), 15) + 0.0
        out.append(tuple(c))
    return tuple(out)


@dataclass(frozen=True)
class TaskSpec:
    kind: str = "quadratic"
    scales: tuple[float, ...] = (1.0, 1000.0)
    # quadratic
    dim: int = 10
    centers: tuple[tuple[float, ...], ...] | None = None
    offset: float = 0.1
    noise_std: float = 0.1
    # mlp
    num_tasks: int = 2
    input_dim: int = 4
    hidden: int = 8
    samples_per_task: int = 256
    data_seed: int = 7

    def build(self) -> TaskSet:
        if self.kind == "quadratic":
            centers = self.centers or default_centers(len(self.scales), self.dim)
            return make_scaled_quadratics(centers, self.scales, self.offset, self.noise_std)
        return make_mlp_regression(
            self.num_tasks, self.input_dim, self.hidden, self.samples_per_task, self.scales, self.data_seed
        )

    def keys(self) -> set[str]:
        return QUADRATIC_KEYS if self.kind == "quadratic" else MLP_KEYS


@dataclass(frozen=True)
class SweepSpec:
    method: tuple[Method, ...] = ()
    alpha: tuple[AlphaStrategy, ...] = ()
    beta: tuple[BetaSchedule, ...] = ()

    def __bool__(self):
        return bool(self.method or self.alpha or self.beta)


@dataclass(frozen=True)
class ExperimentConfig:
    task: TaskSpec = field(default_factory=TaskSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    seeds: tuple[int, ...] = (0, 1, 2)
    out: str = "runs"
    sweep: SweepSpec = field(default_factory=SweepSpec)

    def stl_budget(self, seed: int) -> StlBudget:
        """Same optimizer, step count, batch size and init as the multi-task runs."""
        t = self.train
        return StlBudget(t.steps, t.lr, t.batch_size, seed, t.init_scale, t.lr_halve_at)


# --- parsing ----------------------------------------------------------------


def _int(path, v, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {v}")
    return v


def _real(path, v, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a real number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(path, f"must be finite, got {v}")
    if positive and not v > 0:
        raise ConfigError(path, f"must be > 0, got {v}")
    if nonneg and v < 0:
        raise ConfigError(path, f"must be >= 0, got {v}")
    return v


def _list(path, v):
    if not isinstance(v, list):
        raise ConfigError(path, f"expected a list, got {v!r}")
    return v


def _choice(path, enum, v):
    try:
        return enum(v)
    except ValueError:
        choices = ", ".join(e.value for e in enum)
        raise ConfigError(path, f"expected one of {choices}, got {v!r}")


def _beta(path, v):
    try:
        return BetaSchedule.parse(v)
    except ValueError as exc:
        raise ConfigError(path, str(exc))


def _check_keys(path, table, allowed):
    if not isinstance(table, dict):
        raise ConfigError(path, "expected a table")
    for key in table:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ConfigError(where, "unknown key")


def _parse_task(raw) -> TaskSpec:
    _check_keys("task", raw, QUADRATIC_KEYS | MLP_KEYS)
    kind = raw.get("kind", "quadratic")
    if kind not in ("quadratic", "mlp"):
        raise ConfigError("task.kind", f"expected 'quadratic' or 'mlp', got {kind!r}")
    base = TaskSpec(kind=kind)
    _check_keys("task", raw, base.keys())
    kw = {"kind": kind}
    if "scales" in raw:
        kw["scales"] = tuple(
            _real(f"task.scales[{i}]", s, positive=True) for i, s in enumerate(_list("task.scales", raw["scales"]))
        )
        if not kw["scales"]:
            raise ConfigError("task.scales", "need at least one task")
    if kind == "quadratic":
        if "dim" in raw:
            kw["dim"] = _int("task.dim", raw["dim"], 1)
        if "offset" in raw:
            kw["offset"] = _real("task.offset", raw["offset"], positive=True)
        if "noise_std" in raw:
            kw["noise_std"] = _real("task.noise_std", raw["noise_std"], nonneg=True)
        if "centers" in raw:
            centers = []
            for i, c in enumerate(_list("task.centers", raw["centers"])):
                row = _list(f"task.centers[{i}]", c)
                centers.append(tuple(_real(f"task.centers[{i}][{j}]", x) for j, x in enumerate(row)))
            kw["centers"] = tuple(centers)
        spec = replace(base, **kw)
        if spec.centers is not None:
            if len(spec.centers) != len(spec.scales):
                raise ConfigError("task.centers", "need one center per scale")
            if any(len(c) != spec.dim for c in spec.centers):
                raise ConfigError("task.centers", f"every center needs {spec.dim} coordinates")
        return spec
    for key, minimum in (("num_tasks", 1), ("input_dim", 1), ("hidden", 1), ("samples_per_task", 1), ("data_seed", 0)):
        if key in raw:
            kw[key] = _int(f"task.{key}", raw[key], minimum)
    if "scales" not in kw:
        kw["scales"] = (1.0,) * kw.get("num_tasks", base.num_tasks)
    spec = replace(base, **kw)
    if len(spec.scales) != spec.num_tasks:
        raise ConfigError("task.scales", f"expected {spec.num_tasks} scales, got {len(spec.scales)}")
    return spec


TRAIN_KEYS = {f.name for f in fields(TrainConfig)} - {"seed"}


def _parse_train(raw) -> TrainConfig:
    _check_keys("train", raw, TRAIN_KEYS)
    kw = {}
    if "method" in raw:
        kw["method"] = _choice("train.method", Method, raw["method"])
    if "alpha" in raw:
        kw["alpha"] = _choice("train.alpha", AlphaStrategy, raw["alpha"])
    if "beta" in raw:
        kw["beta"] = _beta("train.beta", raw["beta"])
    if "lr" in raw:
        kw["lr"] = _real("train.lr", raw["lr"], positive=True)
    if "init_scale" in raw:
        kw["init_scale"] = _real("train.init_scale", raw["init_scale"], positive=True)
    if "steps" in raw:
        kw["steps"] = _int("train.steps", raw["steps"], 1)
    if "batch_size" in raw:
        kw["batch_size"] = _int("train.batch_size", raw["batch_size"], 1)
    if "lr_halve_at" in raw:
        kw["lr_halve_at"] = _int("train.lr_halve_at", raw["lr_halve_at"], 0)
    return TrainConfig(**kw)


def _parse_sweep(raw) -> SweepSpec:
    _check_keys("sweep", raw, {"method", "alpha", "beta"})
    kw = {}
    if "method" in raw:
        kw["method"] = tuple(
            _choice(f"sweep.method[{i}]", Method, v) for i, v in enumerate(_list("sweep.method", raw["method"]))
        )
    if "alpha" in raw:
        kw["alpha"] = tuple(
            _choice(f"sweep.alpha[{i}]", AlphaStrategy, v) for i, v in enumerate(_list("sweep.alpha", raw["alpha"]))
        )
    if "beta" in raw:
        kw["beta"] = tuple(_beta(f"sweep.beta[{i}]", v) for i, v in enumerate(_list("sweep.beta", raw["beta"])))
    for key, values in kw.items():
        if not values:
            raise ConfigError(f"sweep.{key}", "sweep axis must not be empty")
    return SweepSpec(**kw)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a TOML experiment config, applying defaults."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("", f"invalid TOML: {exc}")
    _check_keys("", raw, {"seeds", "out", "task", "train", "sweep"})
    kw = {}
    if "task" in raw:
        kw["task"] = _parse_task(raw["task"])
    if "train" in raw:
        kw["train"] = _parse_train(raw["train"])
    if "sweep" in raw:
        kw["sweep"] = _parse_sweep(raw["sweep"])
    if "seeds" in raw:
        seeds = tuple(_int(f"seeds[{i}]", s, 0) for i, s in enumerate(_list("seeds", raw["seeds"])))
        if not seeds:
            raise ConfigError("seeds", "need at least one seed")
        kw["seeds"] = seeds
    if "out" in raw:
        if not isinstance(raw["out"], str) or not raw["out"]:
            raise ConfigError("out", "expected a non-empty path string")
        kw["out"] = raw["out"]
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def render_config(config: ExperimentConfig) -> str:
    """Render ``config`` as TOML with every field explicit."""
    task = config.task
    t = {"kind": task.kind, "scales": list(task.scales)}
    if task.kind == "quadratic":
        t.update(dim=task.dim, offset=task.offset, noise_std=task.noise_std)
        if task.centers is not None:
            t["centers"] = [list(c) for c in task.centers]
    else:
        t.update(
            num_tasks=task.num_tasks,
            input_dim=task.input_dim,
            hidden=task.hidden,
            samples_per_task=task.samples_per_task,
            data_seed=task.data_seed,
        )
    tr = config.train.as_dict()
    tr.pop("seed")
    if tr["lr_halve_at"] is None:
        tr.pop("lr_halve_at")
    doc = {"seeds": list(config.seeds), "out": config.out, "task": t, "train": tr}
    sweep = {}
    if config.sweep.method:
        sweep["method"] = [m.value for m in config.sweep.method]
    if config.sweep.alpha:
        sweep["alpha"] = [a.value for a in config.sweep.alpha]
    if config.sweep.beta:
        sweep["beta"] = [str(b) for b in config.sweep.beta]
    if sweep:
        doc["sweep"] = sweep
    return tomli_w.dumps(doc)
