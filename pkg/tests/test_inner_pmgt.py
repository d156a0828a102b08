import math

import numpy as np
import pytest

import dcatalyst as dc
from dcatalyst.inner_pmgt import (PmgtLsvrg, lsvrg_estimator, pmgt_delta_policy,
                                  pmgt_n_fm, sampling_weights)
from dcatalyst.network import Graph, Topology, metropolis_weights
from dcatalyst.outer import build_subproblem

from conftest import finite_sum_linreg_problem, make_k3, make_path3


def complete_topology(m):
    edges = {(i, i) for i in range(m)} | {(i, j) for i in range(m) for j in range(i + 1, m)}
    g = Graph(m, frozenset(edges))
    W = metropolis_weights(g)
    return Topology(m, g, W, dc.spectral_gap(W))


def test_single_component_estimator_is_exact_gradient():
    prob = finite_sum_linreg_problem(m=2, n=1, d=3, gamma=0.1, seed=0)
    topo = complete_topology(2)
    inner = PmgtLsvrg(master_seed=5, n_fm=1)
    state, _ = inner.init_state(prob, topo, np.zeros((2, 3)))
    # deterministic analog: gradient tracking with exact gradients
    x_ref, y_ref = state.x.copy(), state.y.copy()
    g_ref = prob.grad_matrix(x_ref)
    for _ in range(30):
        state, _ = inner.step(state, prob, topo)
        x_half = np.stack([prob.regularizer.prox(x_ref[i] - state.eta * y_ref[i], state.eta)
                           for i in range(2)])
        x_ref = dc.fastmix(x_half, 1, topo.W, topo.rho)
        g_new = prob.grad_matrix(x_ref)
        y_ref = dc.fastmix(y_ref + g_new - g_ref, 1, topo.W, topo.rho)
        g_ref = g_new
        assert np.abs(state.x - x_ref).max() < 1e-12
        assert np.abs(state.y - y_ref).max() < 1e-12


def test_estimator_unbiased_by_enumeration():
    prob = finite_sum_linreg_problem(m=3, n=5, d=3, gamma=0.2, seed=1)
    sub = build_subproblem(prob, np.random.default_rng(2).standard_normal((3, 3)), 0.4)
    rng = np.random.default_rng(3)
    for i, loss in enumerate(sub.agents):
        p = sampling_weights(loss)
        assert np.sum(p) == pytest.approx(1.0, abs=1e-15)
        x_pt, v_pt = rng.standard_normal(3), rng.standard_normal(3)
        gtilde = loss.grad(v_pt)
        mean = sum(p[j] * lsvrg_estimator(loss, j, p[j], x_pt, v_pt, gtilde)
                   for j in range(loss.n))
        assert np.abs(mean - loss.grad(x_pt)).max() <= 1e-12


def test_complete_graph_single_round_reaches_consensus():
    prob = finite_sum_linreg_problem(m=4, n=3, d=2, gamma=0.1, seed=2)
    topo = complete_topology(4)
    inner = PmgtLsvrg(master_seed=0, n_fm=1)
    state, _ = inner.init_state(prob, topo, np.random.default_rng(1).standard_normal((4, 2)))
    state, _ = inner.step(state, prob, topo)
    assert np.abs(state.x - state.x.mean(axis=0, keepdims=True)).max() < 1e-12


def test_warm_start_identities():
    prob = finite_sum_linreg_problem(m=3, n=4, d=2, gamma=0.1, seed=3)
    topo = make_path3()
    inner = PmgtLsvrg(master_seed=1)
    state, _ = inner.init_state(prob, topo, np.zeros((3, 2)))
    z = np.random.default_rng(0).standard_normal((3, 2))
    same = inner.warm_start(state, z_new=z, z_old=z, delta=0.9)
    assert np.array_equal(same.y, state.y)
    zero = inner.warm_start(state, z_new=z + 2.0, z_old=z, delta=0.0)
    assert np.array_equal(zero.g, state.g)


def test_warm_start_preserves_anchor_gradient_consistency():
    prob = finite_sum_linreg_problem(m=3, n=4, d=3, gamma=0.1, seed=4)
    topo = make_path3()
    inner = PmgtLsvrg(master_seed=2)
    delta = 0.6
    rng = np.random.default_rng(5)
    z_old = rng.standard_normal((3, 3))
    z_new = rng.standard_normal((3, 3))
    sub_old = build_subproblem(prob, z_old, delta)
    sub_new = build_subproblem(prob, z_new, delta)
    state, _ = inner.init_state(sub_old, topo, rng.standard_normal((3, 3)))
    for _ in range(10):
        state, _ = inner.step(state, sub_old, topo)
    # anchor gradients are consistent for the old subproblem
    for i, loss in enumerate(sub_old.agents):
        assert np.abs(state.gtilde[i] - loss.grad(state.v[i])).max() < 1e-12
    warm = inner.warm_start(state, z_new=z_new, z_old=z_old, delta=delta)
    for i, loss in enumerate(sub_new.agents):
        assert np.abs(warm.gtilde[i] - loss.grad(warm.v[i])).max() < 1e-12
    # tracking identity carries over
    assert np.abs(warm.y.mean(0) - warm.g.mean(0)).max() < 1e-12


def test_delta_policy_values():
    consts = dc.ProblemConstants(L=4.0, mu=1.0, L_max=4.0, mu_min=1.0, L_bar_max=16.0)
    assert pmgt_delta_policy(consts, 4) == pytest.approx(3.0)
    consts2 = dc.ProblemConstants(L=4.0, mu=1.0, L_max=4.0, mu_min=1.0, L_bar_max=4.0)
    assert pmgt_delta_policy(consts2, 4) == 0.0
    consts3 = dc.ProblemConstants(L=4.0, mu=0.0, L_max=4.0, mu_min=0.0, L_bar_max=8.0)
    assert pmgt_delta_policy(consts3, 4) == pytest.approx(2.0)


def test_mixing_rule_satisfies_merit_condition(path3):
    prob = finite_sum_linreg_problem(m=3, n=8, d=3, gamma=0.02, seed=0)
    n_fm = pmgt_n_fm(prob, path3)
    r_pm = max(12.0 * prob.constants.kappa_s, 16.0)
    rho_pm = (1 - math.sqrt(1 - path3.rho)) ** n_fm
    assert 40.0 * r_pm * rho_pm ** 2 < 1.0


def test_merit_zero_at_solution(path3):
    prob = finite_sum_linreg_problem(m=3, n=4, d=2, gamma=0.1, seed=6)
    inner = PmgtLsvrg(master_seed=0)
    ref = inner.merit_reference(prob, path3)
    x_star = ref[0]
    state, _ = inner.init_state(prob, path3, np.tile(x_star, (3, 1)))
    # consensual state anchored at the solution with consensual tracking
    gbar = prob.grad_matrix(state.x).mean(axis=0)
    from dataclasses import replace
    state = replace(state, v=np.tile(x_star, (3, 1)),
                    y=np.tile(gbar, (3, 1)), g=np.tile(gbar, (3, 1)))
    assert inner.merit(state, prob, ref) == pytest.approx(0.0, abs=1e-18)


def test_merit_undermixing_signals(path3):
    prob = finite_sum_linreg_problem(m=3, n=8, d=3, gamma=0.001, seed=0)
    inner = PmgtLsvrg(master_seed=0, n_fm=1)  # far too few rounds for kappa_s
    ref = inner.merit_reference(prob, path3)
    state, _ = inner.init_state(prob, path3, np.zeros((3, 3)))
    with pytest.raises(ValueError, match="under-mixing"):
        inner.merit(state, prob, ref)


def test_tracking_identity_pathwise(path3):
    prob = finite_sum_linreg_problem(m=3, n=6, d=3, gamma=0.05, seed=7)
    inner = PmgtLsvrg(master_seed=9)
    state, _ = inner.init_state(prob, path3, np.zeros((3, 3)))
    for _ in range(300):
        state, _ = inner.step(state, prob, path3)
        assert np.abs(state.y.mean(0) - state.g.mean(0)).max() < 1e-10


def test_expected_component_cost_is_four_per_step():
    prob = finite_sum_linreg_problem(m=2, n=5, d=2, gamma=0.1, seed=8)
    topo = complete_topology(2)
    inner = PmgtLsvrg(master_seed=3, n_fm=1)
    state, init_counters = inner.init_state(prob, topo, np.zeros((2, 2)))
    total = 0
    steps = 10000
    for _ in range(steps):
        state, c = inner.step(state, prob, topo)
        total += c.grad_components
    per_agent_step = total / (steps * 2)
    assert abs(per_agent_step - 4.0) <= 0.2  # 2 + 2n * (1/n), within 5%


def test_rng_streams_deterministic(path3):
    prob = finite_sum_linreg_problem(m=3, n=6, d=2, gamma=0.1, seed=9)
    outs = []
    for _ in range(2):
        inner = PmgtLsvrg(master_seed=42)
        state, _ = inner.init_state(prob, path3, np.zeros((3, 2)))
        for _ in range(50):
            state, _ = inner.step(state, prob, path3)
        outs.append(state.x.copy())
    assert np.array_equal(outs[0], outs[1])


def test_monte_carlo_merit_contraction(path3):
    prob = finite_sum_linreg_problem(m=3, n=8, d=3, gamma=0.05, seed=0)
    inner = PmgtLsvrg(master_seed=11)
    report = dc.check_assumption4(inner, prob, path3, steps=400, seeds=range(5))
    assert report.passed
