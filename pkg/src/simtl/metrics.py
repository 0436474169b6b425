"""Relative-improvement metric over single-task baselines, and seed summaries."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from simtl.errors import ConfigError, DimensionError, DomainError


@dataclass(frozen=True)
class Metric:
    name: str
    value: float
    higher_is_better: bool


@dataclass(frozen=True)
class TaskMetrics:
    name: str
    metrics: tuple[Metric, ...]

    def __post_init__(self):
        names = [m.name for m in self.metrics]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate metric names in task {self.name!r}")
        object.__setattr__(self, "metrics", tuple(self.metrics))


@dataclass(frozen=True)
class MetricTable:
    tasks: tuple[TaskMetrics, ...]

    def __post_init__(self):
        names = [t.name for t in self.tasks]
        if len(set(names)) != len(names):
            raise ValueError("duplicate task names")
        object.__setattr__(self, "tasks", tuple(self.tasks))


@dataclass(frozen=True)
class DeltaPResult:
    per_task: dict[str, float]
    overall: float


def delta_p_task(stl: TaskMetrics, method: TaskMetrics) -> float:
    """Mean signed relative change of ``method`` over ``stl``, in percent.

    Metrics are matched by name; lower-is-better metrics flip sign so that
    positive always means an improvement.
    """
    ref = {m.name: m for m in stl.metrics}
    if set(ref) != {m.name for m in method.metrics} or not ref:
        raise DimensionError(f"metric names differ for task {stl.name!r}")
    total = 0.0
    for m in method.metrics:
        r = ref[m.name]
        if r.higher_is_better != m.higher_is_better:
            raise DimensionError(f"metric {m.name!r} has inconsistent direction")
        if r.value == 0:
            raise DomainError(f"STL value of {stl.name}/{m.name} is zero", value=r.value)
        change = (m.value - r.value) / r.value
        total += change if m.higher_is_better else -change
    return 100.0 * total / len(ref)


def delta_p(stl: MetricTable, method: MetricTable) -> DeltaPResult:
    ref = {t.name: t for t in stl.tasks}
    if set(ref) != {t.name for t in method.tasks} or not ref:
        raise DimensionError("task names differ between tables")
    per_task = {t.name: delta_p_task(ref[t.name], t) for t in method.tasks}
    overall = math.fsum(per_task.values()) / len(per_task)
    return DeltaPResult(per_task, overall)


def summarize_runs(values) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)."""
    values = [float(v) for v in values]
    if not values:
        raise ValueError("summarize_runs needs at least one value")
    n = len(values)
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def single_metric_table(names, values, higher_is_better=False, metric="loss") -> MetricTable:
    """One metric per task, e.g. final losses of a synthetic suite."""
    return MetricTable(
        tuple(TaskMetrics(n, (Metric(metric, float(v), higher_is_better),)) for n, v in zip(names, values))
    )


# --- published table fixtures -------------------------------------------------


def default_tables_path() -> Path:
    return Path(str(resources.files("simtl") / "data" / "published_tables.json"))


def load_tables(path=None) -> dict:
    path = Path(path) if path is not None else default_tables_path()
    if not path.exists():
        raise ConfigError("tables", f"fixture file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("tables", f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}")


def _printed_value(key, raw) -> float:
    if isinstance(raw, bool):
        raise ConfigError(key, f"metric value must be a finite number, got {raw!r}")
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ConfigError(key, f"metric value must be a finite number, got {raw!r}")
    if not math.isfinite(value):
        raise ConfigError(key, f"metric value must be a finite number, got {raw!r}")
    return value


def _half_unit(raw, trailing_zero_ambiguous: bool) -> float:
    """Half a unit in the last printed place of ``raw``; 0 for values stored as JSON numbers."""
    if not isinstance(raw, str) or "." not in raw:
        return 0.0 if not isinstance(raw, str) else 0.5
    decimals = len(raw.split(".")[1])
    if trailing_zero_ambiguous and raw.endswith("0"):
        decimals -= 1
    return 0.5 * 10.0 ** (-decimals)


def table_row(data: dict, dataset: str, method: str) -> MetricTable:
    """Build the MetricTable of one method row of a dataset fixture."""
    try:
        spec = data[dataset]["tasks"]
        row = data[dataset]["rows"][method]
    except KeyError as exc:
        raise ConfigError(f"{dataset}.{method}", f"missing fixture entry {exc}")
    tasks = []
    for task, metrics in spec.items():
        entries = []
        for m in metrics:
            key = f"{dataset}.{method}.{task}.{m['metric']}"
            try:
                raw = row[task][m["metric"]]
            except KeyError:
                raise ConfigError(key, "missing metric value")
            entries.append(Metric(m["metric"], _printed_value(key, raw), bool(m["higher_is_better"])))
        tasks.append(TaskMetrics(task, tuple(entries)))
    return MetricTable(tuple(tasks))


def rounding_bound(data: dict, dataset: str, method: str, trailing_zero_ambiguous=False) -> float:
    """First-order bound on how far the recomputed value can move when every
    printed metric is perturbed within its printing precision, plus the
    rounding of the printed overall value itself.

    With ``trailing_zero_ambiguous`` a final printed ``0`` is treated as
    padding, i.e. one decimal fewer is taken as significant.
    """
    spec = data[dataset]["tasks"]
    stl_row = data[dataset]["rows"]["STL"]
    row = data[dataset]["rows"][method]
    T = len(spec)
    bound = 0.0
    for task, metrics in spec.items():
        n = len(metrics)
        for m in metrics:
            name = m["metric"]
            a_raw, s_raw = row[task][name], stl_row[task][name]
            a, s = float(a_raw), float(s_raw)
            da = _half_unit(a_raw, trailing_zero_ambiguous)
            ds = _half_unit(s_raw, trailing_zero_ambiguous)
            bound += 100.0 / (T * n) * (da / abs(s) + abs(a) * ds / (s * s))
    reported = data[dataset]["reported_delta_p"][method]
    return bound + _half_unit(reported, False)


def recompute_reported(data: dict, dataset: str):
    """Yield ``(method, recomputed, reported)`` for every row with a reported value."""
    stl = table_row(data, dataset, "STL")
    for method, reported in data[dataset]["reported_delta_p"].items():
        key = f"{dataset}.{method}.delta_p"
        yield method, delta_p(stl, table_row(data, dataset, method)).overall, _printed_value(key, reported)
