"""Sweep cells x seeds -> trace CSVs, per-cell summary JSON, error manifest.

Layout under the output directory::

    <cell>/trace_seed<seed>.csv
    <cell>/summary.json
    errors.json            # only when some run diverged

Trace CSV columns are ``step,task,loss,ema_grad_norm,alpha,agg_grad_norm``.
Each step writes one row per task (``alpha`` and ``agg_grad_norm`` empty) and
then one aggregate row with ``task = all`` (``loss`` and ``ema_grad_norm``
empty; ``alpha`` also empty for methods without SI-G scaling). Reals use 17
significant digits.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from simtl.config import ExperimentConfig
from simtl.errors import DivergenceError
from simtl.metrics import delta_p, single_metric_table, summarize_runs
from simtl.trainer import TrainConfig, train

log = logging.getLogger(__name__)

TRACE_HEADER = ["step", "task", "loss", "ema_grad_norm", "alpha", "agg_grad_norm"]
THREADS_ENV = "MTL_BALANCE_THREADS"

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def fmt(x) -> str:
    return "" if x is None else format(float(x), ".17g")


def trace_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for r in records:
        for t, (loss, norm) in enumerate(zip(r.losses, r.grad_norms)):
            w.writerow([r.step, t, fmt(loss), fmt(norm), "", ""])
        w.writerow([r.step, "all", "", "", fmt(r.alpha), fmt(r.agg_norm)])
    return buf.getvalue()


def cell_name(train: TrainConfig) -> str:
    beta = f"{train.beta.kind}-{train.beta.c!r}"
    return f"{train.method.value}__{train.alpha.value}__{beta}"


def sweep_cells(config: ExperimentConfig) -> list[TrainConfig]:
    base = config.train
    methods = config.sweep.method or (base.method,)
    alphas = config.sweep.alpha or (base.alpha,)
    betas = config.sweep.beta or (base.beta,)
    return [replace(base, method=m, alpha=a, beta=b) for m, a, b in itertools.product(methods, alphas, betas)]


def max_workers() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
    return os.cpu_count() or 1


@dataclass
class CellResult:
    name: str
    train: TrainConfig
    final_losses: dict[int, tuple[float, ...]]
    errors: list[dict]


def stl_losses(config: ExperimentConfig, seed: int) -> tuple[float, ...]:
    task_set = config.task.build()
    budget = config.stl_budget(seed)
    return tuple(task_set.stl_reference(t, budget).loss for t in range(task_set.num_tasks))


def _run_cell(config: ExperimentConfig, train_cfg: TrainConfig, out: str) -> CellResult:
    name = cell_name(train_cfg)
    cell_dir = Path(out) / name
    cell_dir.mkdir(parents=True, exist_ok=True)
    task_set = config.task.build()
    finals, errors = {}, []
    for seed in config.seeds:
        cfg = replace(train_cfg, seed=seed)
        path = cell_dir / f"trace_seed{seed}.csv"
        try:
            trace = train(cfg, task_set)
        except DivergenceError as exc:
            path.write_text(trace_csv(exc.records), encoding="utf-8")
            errors.append({"cell": name, "seed": seed, "step": exc.step, "task": exc.task, "message": str(exc)})
            continue
        path.write_text(trace_csv(trace.steps), encoding="utf-8")
        finals[seed] = trace.final_losses
    return CellResult(name, train_cfg, finals, errors)


def summarize_cell(config: ExperimentConfig, cell: CellResult, stl: dict[int, tuple[float, ...]]) -> dict:
    names = [f"task{t}" for t in range(len(next(iter(stl.values()))))]
    per_seed = []
    for seed in config.seeds:
        if seed not in cell.final_losses:
            continue
        losses = cell.final_losses[seed]
        dp = delta_p(single_metric_table(names, stl[seed]), single_metric_table(names, losses))
        per_seed.append({"seed": seed, "final_losses": list(losses), "stl_losses": list(stl[seed]),
                         "delta_p": dp.overall, "delta_p_per_task": [dp.per_task[n] for n in names]})
    summary = {
        "cell": cell.name,
        "train": {k: v for k, v in cell.train.as_dict().items() if k != "seed"},
        "task": asdict(config.task),
        "seeds": list(config.seeds),
        "failed_seeds": [e["seed"] for e in cell.errors],
        "runs": per_seed,
    }
    if per_seed:
        mean, std = summarize_runs([r["delta_p"] for r in per_seed])
        summary["delta_p"] = {"mean": mean, "std": std}
        summary["final_losses"] = [
            dict(zip(("mean", "std"), summarize_runs([r["final_losses"][t] for r in per_seed])))
            for t in range(len(names))
        ]
    return summary


def run_experiment(config: ExperimentConfig, out=None, quiet=False) -> int:
    """Run every sweep cell for every seed; returns a process exit code."""
    out = Path(out or config.out)
    out.mkdir(parents=True, exist_ok=True)
    cells = sweep_cells(config)
    stl = {seed: stl_losses(config, seed) for seed in config.seeds}
    workers = min(max_workers(), len(cells))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, config, c, str(out)) for c in cells]
            results = [f.result() for f in futures]
    else:
        results = [_run_cell(config, c, str(out)) for c in cells]

    errors = []
    for cell in results:
        errors.extend(cell.errors)
        summary = summarize_cell(config, cell, stl)
        (out / cell.name / "summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        if not quiet:
            dp = summary.get("delta_p")
            status = f"delta_p {dp['mean']:+.3f} +/- {dp['std']:.3f}" if dp else "all seeds diverged"
            print(f"{cell.name}: {status}")
    manifest = out / "errors.json"
    if errors:
        manifest.write_text(json.dumps(errors, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        if not quiet:
            for e in errors:
                print(f"DIVERGED {e['message']} (cell {e['cell']})")
        return EXIT_DIVERGED
    if manifest.exists():
        manifest.unlink()
    return EXIT_OK
