import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from simtl.balancers import (
    BETA_GRID,
    NORM_EPS,
    AlphaStrategy,
    BalancerKind,
    BalancerState,
    BetaSchedule,
    aggregate,
    alpha_value,
    ema_update,
    ew_aggregate,
    pcgrad_aggregate,
    rlw_weights,
    si_g_aggregate,
)
from simtl.errors import DimensionError

elems = st.floats(-100, 100, allow_nan=False)


def grad_lists(min_T=1, max_T=5, dim=4):
    return st.lists(arrays(np.float64, dim, elements=elems), min_size=min_T, max_size=max_T)


def cosine(a, b):
    return float(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))


# --- beta schedules ----------------------------------------------------------


def test_beta_parse_and_str_round_trip():
    for b in BETA_GRID:
        assert BetaSchedule.parse(str(b)) == b
    assert BetaSchedule.parse(0.5) == BetaSchedule("constant", 0.5)
    assert BetaSchedule.parse("0.25") == BetaSchedule("constant", 0.25)


def test_inv_sqrt_indexing():
    b = BetaSchedule("inv_sqrt", 0.9)
    assert b.beta(0) == 0.9
    assert b.beta(3) == pytest.approx(0.45)
    assert BetaSchedule("inv_sqrt", 5.0).beta(0) < 1.0


@pytest.mark.parametrize("bad", [("constant", 1.0), ("constant", -0.1), ("inv_sqrt", 0.0), ("cosine", 0.5)])
def test_beta_rejects(bad):
    with pytest.raises(ValueError):
        BetaSchedule(*bad)


# --- EMA ---------------------------------------------------------------------


@pytest.mark.parametrize("beta", [0.1, 0.5, 0.9])
def test_ema_first_step_exact(beta):
    g = np.array([0.3, -7.0, 1e-3])
    state = BalancerState.create(1, 3, BetaSchedule("constant", beta))
    out = ema_update(state, [g])
    np.testing.assert_array_equal(out[0], (1.0 - beta) * g)
    assert state.step == 1


@pytest.mark.parametrize("beta", [0.1, 0.5, 0.9])
def test_ema_constant_gradient_closed_form(beta):
    g = np.array([1.5, -2.0])
    state = BalancerState.create(1, 2, BetaSchedule("constant", beta))
    for k in range(101):
        m = ema_update(state, [g])[0]
        np.testing.assert_allclose(m, (1.0 - beta ** (k + 1)) * g, atol=1e-10, rtol=0)


def test_ema_shape_checks():
    state = BalancerState.create(2, 3)
    with pytest.raises(DimensionError):
        ema_update(state, [np.zeros(3)])
    with pytest.raises(DimensionError):
        ema_update(state, [np.zeros(3), np.zeros(2)])


# --- alpha -------------------------------------------------------------------


def test_alpha_hand_values():
    norms = [1.0, 4.0, 2.0, 3.0]
    assert alpha_value(norms, "max") == 4.0
    assert alpha_value(norms, "min") == 1.0
    assert alpha_value(norms, "mean") == 2.5
    assert alpha_value(norms, "median") == 2.5
    assert alpha_value(norms, "constant_inv_T") == 0.25
    assert alpha_value([1.0, 5.0, 2.0], "median") == 2.0


@given(st.lists(st.floats(1e-6, 1e6), min_size=1, max_size=9))
def test_alpha_ordering(norms):
    mx, mn = alpha_value(norms, "max"), alpha_value(norms, "min")
    for s in ("mean", "median"):
        v = alpha_value(norms, s)
        assert mn * (1 - 1e-12) <= v <= mx * (1 + 1e-12)


# --- SI-G --------------------------------------------------------------------


def test_si_g_hand_example():
    g = [np.array([3.0, 0.0]), np.array([0.0, 0.5])]
    d, a = si_g_aggregate(g, "max")
    assert a == 3.0
    np.testing.assert_array_equal(d, [3.0, 3.0])


def test_si_g_drops_vanishing_tasks():
    g = [np.array([2.0, 0.0]), np.zeros(2), np.array([0.0, 1e-13])]
    d, a = si_g_aggregate(g, "min")
    assert a == 2.0
    np.testing.assert_array_equal(d, [2.0, 0.0])
    d, a = si_g_aggregate([np.zeros(2)] * 2, "max")
    assert a == 0.0 and not d.any()


def test_si_g_counts_all_tasks_for_inv_T():
    _, a = si_g_aggregate([np.ones(2), np.zeros(2)], "constant_inv_T")
    assert a == 0.5


@given(grad_lists(), st.lists(st.floats(1e-3, 1e3), min_size=5, max_size=5))
def test_si_g_direction_ignores_per_task_rescaling(gs, cs):
    if any(np.linalg.norm(g) < 1e-6 for g in gs):
        return
    d0, _ = si_g_aggregate(gs, "max")
    d1, _ = si_g_aggregate([c * g for c, g in zip(cs, gs)], "max")
    n0, n1 = np.linalg.norm(d0), np.linalg.norm(d1)
    if n0 < 1e-6 * max(np.linalg.norm(g) for g in gs):
        return  # unit vectors cancel; direction is ill-conditioned
    np.testing.assert_allclose(d0 / n0, d1 / n1, atol=1e-9)


@given(grad_lists(min_T=2))
def test_alpha_strategies_share_one_direction(gs):
    if any(np.linalg.norm(g) < 1e-6 for g in gs):
        return
    dirs = [si_g_aggregate(gs, s)[0] for s in AlphaStrategy]
    if np.linalg.norm(dirs[0]) < 1e-6 * dirs[0].size:
        return
    for d in dirs[1:]:
        assert cosine(dirs[0], d) == pytest.approx(1.0, abs=1e-12)


# --- EW / RLW / PCGrad ------------------------------------------------------


def test_ew_hand_example():
    np.testing.assert_array_equal(ew_aggregate([np.array([1.0, 2.0]), np.array([-1.0, 0.5])]), [0.0, 2.5])
    np.testing.assert_array_equal(ew_aggregate([np.ones(2), np.ones(2)], [0.25, 0.5]), [0.75, 0.75])


def test_rlw_weights_are_a_fresh_softmax():
    rng = np.random.default_rng(0)
    w1, w2 = rlw_weights(rng, 4), rlw_weights(rng, 4)
    assert w1.sum() == pytest.approx(1.0) and np.all(w1 > 0)
    assert not np.array_equal(w1, w2)
    z = np.random.default_rng(0).standard_normal(4)
    np.testing.assert_allclose(w1, np.exp(z) / np.exp(z).sum(), rtol=1e-12)


def test_pcgrad_hand_example():
    g1, g2 = np.array([1.0, 0.0]), np.array([-1.0, 1.0])
    # g1 . g2 = -1: g1 -> g1 + g2/2, g2 -> g2 + g1
    np.testing.assert_allclose(pcgrad_aggregate([g1, g2]), [0.5, 0.5] + np.array([0.0, 1.0]))


def test_pcgrad_leaves_agreeing_gradients_alone():
    gs = [np.array([1.0, 0.5]), np.array([2.0, 0.1])]
    np.testing.assert_array_equal(pcgrad_aggregate(gs), ew_aggregate(gs))


@given(grad_lists(min_T=2, max_T=4))
def test_pcgrad_two_task_output_does_not_conflict(gs):
    gs = gs[:2]
    out = pcgrad_aggregate(gs, np.random.default_rng(1))
    for g in gs:
        assert out @ g >= -1e-8 * (1 + np.linalg.norm(out) * np.linalg.norm(g))


# --- dispatch ----------------------------------------------------------------


@pytest.mark.parametrize("kind", [k for k in BalancerKind if k is not BalancerKind.SI_G])
def test_only_si_g_touches_the_ema(kind):
    state = BalancerState.create(2, 2, kind=kind)
    before = [m.copy() for m in state.ema]
    aggregate(state, [np.ones(2), -np.ones(2)], [1.0, 2.0], rng=np.random.default_rng(0))
    assert state.step == 1
    for a, b in zip(before, state.ema):
        np.testing.assert_array_equal(a, b)


def test_aggregate_si_g_reports_ema_norms():
    state = BalancerState.create(2, 2, BetaSchedule("constant", 0.5))
    d, a, norms = aggregate(state, [np.array([2.0, 0.0]), np.array([0.0, 4.0])])
    assert norms == [1.0, 2.0] and a == 2.0
    np.testing.assert_array_equal(d, [2.0, 2.0])


def test_norm_eps_is_tiny():
    assert NORM_EPS == 1e-12 and math.isfinite(NORM_EPS)
