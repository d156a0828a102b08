import numpy as np
import pytest

import dcatalyst as dc
from dcatalyst.inner_puda import Puda, PudaState, puda_delta_policy
from dcatalyst.network import PudaMatrices, prox_ed_triple
from dcatalyst.outer import build_subproblem

from conftest import make_path3, quadratic_problem, random_quadratic_agents


def single_node_matrices():
    return prox_ed_triple(np.array([[1.0]]))


def test_single_node_reduces_to_proximal_gradient():
    prob = quadratic_problem(1, 2, seed=0, reg=dc.Regularizer.l1(0.1))
    from dcatalyst.network import Graph, Topology, metropolis_weights
    g = Graph(1, frozenset({(0, 0)}))
    topo = Topology(1, g, metropolis_weights(g), 0.0)
    inner = Puda(single_node_matrices())
    state, _ = inner.init_state(prob, topo, np.ones((1, 2)))
    eta = state.eta
    assert eta == pytest.approx(1.0 / prob.constants.L_max)
    x_manual = np.ones(2)
    for _ in range(25):
        state, _ = inner.step(state, prob, topo)
        grad = prob.agents[0].grad(x_manual)
        x_manual = prob.regularizer.prox(x_manual - eta * grad, eta)
        assert np.abs(state.x[0] - x_manual).max() < 1e-12
        assert np.abs(state.yhat).max() == 0.0


def test_scalar_quadratic_is_plain_gradient_descent():
    prob = dc.CompositeProblem([dc.QuadraticLoss(np.array([[1.0]]))])
    from dcatalyst.network import Graph, Topology, metropolis_weights
    g = Graph(1, frozenset({(0, 0)}))
    topo = Topology(1, g, metropolis_weights(g), 0.0)
    inner = Puda(single_node_matrices())
    state, _ = inner.init_state(prob, topo, np.array([[3.0]]))
    eta = state.eta
    state, _ = inner.step(state, prob, topo)
    assert state.x[0, 0] == pytest.approx(3.0 - eta * 3.0)


def test_fixed_point_is_stationary(path3):
    prob = dc.CompositeProblem(random_quadratic_agents(3, 2, seed=4, mu_floor=0.05),
                               dc.Regularizer.l1(0.02))
    inner = Puda(prox_ed_triple(path3.W))
    delta = inner.delta_policy(prob)
    sub = build_subproblem(prob, np.random.default_rng(0).standard_normal((3, 2)), delta)
    x_star, yhat_star = inner.merit_reference(sub, path3)
    state = PudaState(x=np.tile(x_star, (3, 1)), yhat=yhat_star.copy(),
                      eta=inner._eta(sub))
    new, _ = inner.step(state, sub, path3)
    assert np.abs(new.x - state.x).max() < 1e-10
    assert np.abs(new.yhat - state.yhat).max() < 1e-10


def test_linear_convergence_within_certified_rate(path3):
    prob = dc.CompositeProblem(random_quadratic_agents(3, 2, seed=4, mu_floor=0.05),
                               dc.Regularizer.l1(0.02))
    inner = Puda(prox_ed_triple(path3.W))
    delta = inner.delta_policy(prob)
    sub = build_subproblem(prob, np.random.default_rng(0).standard_normal((3, 2)), delta)
    ref = inner.merit_reference(sub, path3)
    r = inner.rate(sub)
    rng = np.random.default_rng(1)
    state, _ = inner.init_state(sub, path3, ref[0][None, :] + rng.standard_normal((3, 2)))
    dist = [np.linalg.norm(state.x - ref[0][None, :])]
    for _ in range(200):
        state, _ = inner.step(state, sub, path3)
        dist.append(np.linalg.norm(state.x - ref[0][None, :]))
    dist = np.array(dist)
    tail = 200
    while dist[tail] < dist[0] * 1e-13:
        tail -= 1
    slope = (dist[tail] / dist[0]) ** (1.0 / tail)
    assert slope <= (1 - 1 / r) ** 0.5 + 0.02  # distance decays at sqrt of merit rate


def test_dual_stays_orthogonal_to_consensus(path3):
    prob = dc.CompositeProblem(random_quadratic_agents(3, 2, seed=4, mu_floor=0.05))
    inner = Puda(prox_ed_triple(path3.W))
    state, _ = inner.init_state(prob, path3, np.random.default_rng(2).standard_normal((3, 2)))
    for _ in range(100):
        state, _ = inner.step(state, prob, path3)
        assert np.abs(state.yhat.sum(axis=0)).max() < 1e-10


def test_warm_start_is_identity_on_all_fields():
    prob = quadratic_problem(3, 2, seed=1)
    topo = make_path3()
    inner = Puda(prox_ed_triple(topo.W))
    state, _ = inner.init_state(prob, topo, np.random.default_rng(0).standard_normal((3, 2)))
    for _ in range(3):
        state, _ = inner.step(state, prob, topo)
    z = np.random.default_rng(1).standard_normal((3, 2))
    warm = inner.warm_start(state, z_new=z, z_old=z * 2, delta=0.8)
    assert np.array_equal(warm.x, state.x)
    assert np.array_equal(warm.yhat, state.yhat)
    assert warm.eta == state.eta


def test_delta_policy_arithmetic():
    mats = PudaMatrices(W=np.eye(2), Hsq=np.eye(2), C=np.zeros((2, 2)),
                        sigma_max_C=0.0, sigma_min_plus_Hsq=1 / 6, sigma_max_Hsq=0.5)
    consts = dc.ProblemConstants(L=10.0, mu=1.0, L_max=10.0, mu_min=1.0)
    assert puda_delta_policy(mats, consts) == pytest.approx(0.8)


def test_delta_policy_clamps_at_zero():
    mats = PudaMatrices(W=np.eye(2), Hsq=np.eye(2), C=np.zeros((2, 2)),
                        sigma_max_C=0.0, sigma_min_plus_Hsq=1 / 6, sigma_max_Hsq=0.5)
    consts = dc.ProblemConstants(L=2.0, mu=2.0, L_max=2.0, mu_min=2.0)
    assert puda_delta_policy(mats, consts) == 0.0


def test_delta_policy_guard_on_vanishing_gap():
    # sigma_min_plus -> (2 - sigma_max_C)^2 / 4 from below: delta diverges
    mats = PudaMatrices(W=np.eye(2), Hsq=np.eye(2), C=np.zeros((2, 2)),
                        sigma_max_C=0.0, sigma_min_plus_Hsq=1.0 - 1e-9,
                        sigma_max_Hsq=1.0)
    consts = dc.ProblemConstants(L=10.0, mu=1.0, L_max=10.0, mu_min=1.0)
    with pytest.raises(ValueError, match="well-connected"):
        puda_delta_policy(mats, consts)


def test_merit_values(path3):
    prob = dc.CompositeProblem(random_quadratic_agents(3, 2, seed=4, mu_floor=0.05))
    inner = Puda(prox_ed_triple(path3.W))
    ref = inner.merit_reference(prob, path3)
    x_star, yhat_star = ref
    at_fix = PudaState(x=np.tile(x_star, (3, 1)), yhat=yhat_star.copy(), eta=0.1)
    assert inner.merit(at_fix, prob, ref) == pytest.approx(0.0, abs=1e-20)
    dx = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    perturbed = PudaState(x=np.tile(x_star, (3, 1)) + dx, yhat=yhat_star.copy(), eta=0.1)
    assert inner.merit(perturbed, prob, ref) == pytest.approx(np.sum(dx * dx) / 3)


def test_merit_contraction_with_certified_rate(path3):
    prob = dc.CompositeProblem(random_quadratic_agents(3, 2, seed=4, mu_floor=0.05),
                               dc.Regularizer.l1(0.02))
    inner = Puda(prox_ed_triple(path3.W))
    delta = inner.delta_policy(prob)
    sub = build_subproblem(prob, np.random.default_rng(0).standard_normal((3, 2)), delta)
    report = dc.check_assumption4(inner, sub, path3, steps=150, seeds=range(5))
    assert report.passed
    assert report.domination_margin <= 1.0 + 1e-9
