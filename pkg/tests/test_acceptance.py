"""Acceptance criteria, one test each.

A PASS/FAIL line per criterion is printed at the end of the pytest run (see
conftest.py). Criteria 1 and 6 are known to fail; the analysis is in the
README under "Known failures".
"""

import math
import time

import numpy as np
import pytest

from simtl.balancers import AlphaStrategy, BalancerState, BetaSchedule, alpha_value, ema_update, si_g_aggregate
from simtl.cli import main
from simtl.metrics import load_tables, recompute_reported
from simtl.tasks import ModelParams, make_mlp_regression, make_scaled_quadratic_pair
from simtl.trainer import TrainConfig, train
from simtl.errors import DivergenceError
from simtl.transforms import transform_grad
from simtl.vecmath import finite_diff_grad
from simtl.verify import check_prop1, check_prop2, check_tables

pytestmark = pytest.mark.acceptance


def timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


def test_criterion_1_delta_p_tables():
    def run():
        data = load_tables()
        ew = {ds: {m: (r, p) for m, r, p in recompute_reported(data, ds)}["EW"] for ds in ("cityscapes", "nyuv2")}
        return ew, check_tables()

    (ew, checks), elapsed = timed(run)
    assert elapsed < 1.0
    assert ew["cityscapes"][1] == -2.05 and abs(ew["cityscapes"][0] - -2.05) <= 0.05
    assert ew["nyuv2"][1] == -1.78 and abs(ew["nyuv2"][0] - -1.78) <= 0.05
    city = [c for c in checks if c.name.startswith("cityscapes/")]
    assert len(city) == 20
    failing = [c.line() for c in city if not c.passed]
    assert not failing, "\n".join(failing)


def test_criterion_2_pareto_invariance():
    checks, elapsed = timed(check_prop1)
    assert elapsed < 10.0
    assert all(c.passed for c in checks), [c.line() for c in checks if not c.passed]


def test_criterion_3_inner_minimization():
    checks, elapsed = timed(check_prop2)
    assert elapsed < 1.0
    assert len(checks) == 8
    assert all(c.passed for c in checks), [c.line() for c in checks if not c.passed]


def test_criterion_4_scale_invariance():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        ell = float(rng.uniform(1e-3, 1e3))
        g = rng.normal(size=int(rng.integers(1, 8))) * 10.0 ** rng.uniform(-3, 3)
        c = float(10.0 ** rng.uniform(-3, 3))
        ref = transform_grad("log", ell, g)
        np.testing.assert_allclose(transform_grad("log", c * ell, c * g), ref, rtol=1e-12, atol=0)

        T = int(rng.integers(2, 6))
        gs = [rng.normal(size=5) for _ in range(T)]
        cs = 10.0 ** rng.uniform(-3, 3, T)
        d0, _ = si_g_aggregate(gs, AlphaStrategy.MAX)
        d1, _ = si_g_aggregate([ci * gi for ci, gi in zip(cs, gs)], AlphaStrategy.MAX)
        np.testing.assert_allclose(d1 / np.linalg.norm(d1), d0 / np.linalg.norm(d0), atol=1e-9, rtol=0)


def test_criterion_5_alpha_strategies(tmp_path):
    rng = np.random.default_rng(5)
    for _ in range(200):
        T = int(rng.integers(2, 6))
        gs = [rng.normal(size=6) * 10.0 ** rng.uniform(-2, 2) for _ in range(T)]
        norms = [np.linalg.norm(g) for g in gs]
        dirs = {s: si_g_aggregate(gs, s)[0] for s in AlphaStrategy}
        base = dirs[AlphaStrategy.MAX]
        for s, d in dirs.items():
            cos = float(base @ d) / (np.linalg.norm(base) * np.linalg.norm(d))
            assert abs(cos - 1.0) <= 1e-12, s
        mx, mn = alpha_value(norms, "max"), alpha_value(norms, "min")
        assert mx >= alpha_value(norms, "mean") >= mn
        assert mx >= alpha_value(norms, "median") >= mn

    cfg = tmp_path / "alpha.toml"
    cfg.write_text(
        'seeds = [0]\n[task]\ndim = 2\ncenters = [[1.0, 0.0], [-2.0, 0.0], [0.0, 3.0]]\nscales = [1.0, 10.0, 100.0]\n'
        '[train]\nsteps = 200\n[sweep]\nalpha = ["max", "min", "mean", "median", "constant_inv_T"]\n'
    )
    out = tmp_path / "out"
    assert main(["sweep", str(cfg), "--out", str(out), "--quiet"]) == 0
    summaries = list(out.rglob("summary.json"))
    assert len(summaries) == 5
    assert all('"final_losses"' in p.read_text() for p in summaries)


def normalized_gaps(method, seed):
    ts = make_scaled_quadratic_pair(10, [np.eye(10)[0], -np.eye(10)[0]], [1.0, 1000.0], offset=0.1)
    trace = train(TrainConfig(method=method, steps=2000, lr=0.01, seed=seed), ts)
    stars = [ts.stl_reference(t).loss for t in range(2)]
    return [(l - s) / s for l, s in zip(trace.final_losses, stars)]


def test_criterion_6_scale_imbalance():
    start = time.perf_counter()
    problems = []
    for seed in range(3):
        si = normalized_gaps("si_mtl", seed)
        if not max(si) < 2.0 * min(si):
            problems.append(f"seed {seed}: SI-MTL gaps {si} differ by 2x or more")
        try:
            ew = normalized_gaps("ew", seed)
        except DivergenceError as exc:
            problems.append(f"seed {seed}: EW has no final gap ({exc})")
            continue
        if not ew[0] > 10.0 * si[0]:
            problems.append(f"seed {seed}: EW gap {ew[0]:.3g} <= 10 x SI-MTL gap {si[0]:.3g}")
    assert time.perf_counter() - start < 30.0
    assert not problems, "\n".join(problems)


@pytest.mark.parametrize("beta", [0.1, 0.5, 0.9])
def test_criterion_7_ema(beta):
    g = np.array([0.7, -1.3, 2.9])
    state = BalancerState.create(1, 3, BetaSchedule("constant", beta))
    first = ema_update(state, [g])[0]
    assert np.array_equal(first, (1.0 - beta) * g)
    for k in range(1, 101):
        m = ema_update(state, [g])[0]
        np.testing.assert_allclose(m, (1.0 - beta ** (k + 1)) * g, atol=1e-10, rtol=0)


def test_criterion_8_gradients():
    suites = {
        "quadratic": make_scaled_quadratic_pair(4, [[1, 0, 0, 0], [0, -1, 2, 0]], [1.0, 1000.0]),
        "mlp": make_mlp_regression(2, 3, 5, 64, (1.0, 100.0), seed=11),
    }
    rng = np.random.default_rng(8)
    for kind, ts in suites.items():
        for _ in range(10):
            p = ts.init_params(rng, 0.7)
            for t in range(ts.num_tasks):
                batch = ts.sample_batch(t, rng, 8)
                _, g_theta, g_psi = ts.loss_and_grads(t, p, batch)
                fd = finite_diff_grad(lambda x: ts.loss(t, ModelParams(x, p.task_specific), batch), p.shared)
                assert np.linalg.norm(g_theta - fd) <= 1e-4 * np.linalg.norm(fd), kind
                if g_psi.size:
                    def f(x):
                        psi = list(p.task_specific)
                        psi[t] = x
                        return ts.loss(t, ModelParams(p.shared, psi), batch)

                    fd = finite_diff_grad(f, p.task_specific[t])
                    assert np.linalg.norm(g_psi - fd) <= 1e-4 * np.linalg.norm(fd), kind


def test_criterion_9_determinism(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('seeds = [3]\n[task]\nkind = "mlp"\nscales = [1.0, 100.0]\n[train]\nmethod = "si_mtl"\nsteps = 200\n')
    for d in ("a", "b"):
        assert main(["run", str(cfg), "--out", str(tmp_path / d), "--quiet"]) == 0
    (a,) = (tmp_path / "a").rglob("*.csv")
    (b,) = (tmp_path / "b").rglob("*.csv")
    assert a.read_bytes() == b.read_bytes()
