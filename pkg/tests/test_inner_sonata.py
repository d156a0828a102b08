import numpy as np
import pytest

import dcatalyst as dc
from dcatalyst.inner_sonata import Sonata, SonataState, sonata_rho_bound
from dcatalyst.network import Graph, Topology, metropolis_weights, spectral_gap
from dcatalyst.outer import build_subproblem

from conftest import (conditioned_quadratics, make_path3, quadratic_problem,
                      random_quadratic_agents)


def single_node_topology():
    g = Graph(1, frozenset({(0, 0)}))
    W = metropolis_weights(g)
    return Topology(m=1, graph=g, W=W, rho=spectral_gap(W))


def tracking_error(state, problem):
    return np.abs(state.y.mean(axis=0) - problem.grad_matrix(state.x).mean(axis=0)).max()


def test_single_agent_unit_weight_step_lands_at_target():
    c = np.array([2.0, -1.0])
    prob = dc.CompositeProblem([dc.QuadraticLoss(np.eye(2), b=c)])
    topo = single_node_topology()
    inner = Sonata(variant="L", weight=1.0)
    state, _ = inner.init_state(prob, topo, np.zeros((1, 2)))
    state, _ = inner.step(state, prob, topo)
    assert np.allclose(state.x[0], c, atol=1e-15)


def test_tracking_identity_from_consensus_start(path3):
    H = np.diag([2.0, 0.5])
    prob = dc.CompositeProblem([dc.QuadraticLoss(H, b=np.array([1.0, 0.0])),
                                dc.QuadraticLoss(H, b=np.array([0.0, 1.0])),
                                dc.QuadraticLoss(H, b=np.array([-1.0, 0.5]))])
    inner = Sonata(variant="L")
    state, _ = inner.init_state(prob, path3, np.ones((3, 2)))
    for _ in range(50):
        state, _ = inner.step(state, prob, path3)
        assert tracking_error(state, prob) < 1e-12


def test_variant_f_equals_variant_l_on_isotropic_quadratics(path3):
    L = 1.7
    rng = np.random.default_rng(8)
    agents = [dc.QuadraticLoss(L * np.eye(2), b=rng.standard_normal(2))
              for _ in range(3)]
    consts = dc.ProblemConstants(L=L, mu=L, L_max=L, mu_min=L, beta=L)
    prob = dc.CompositeProblem(agents, constants=consts)
    x0 = rng.standard_normal((3, 2))
    inner_f = Sonata(variant="F")
    inner_l = Sonata(variant="L", weight=2 * L)  # full model weight L + beta
    sf, _ = inner_f.init_state(prob, path3, x0)
    sl, _ = inner_l.init_state(prob, path3, x0)
    for _ in range(10):
        sf, _ = inner_f.step(sf, prob, path3)
        sl, _ = inner_l.step(sl, prob, path3)
        assert np.abs(sf.x - sl.x).max() < 1e-10


def test_warm_start_identity_cases():
    prob = quadratic_problem(3, 2, seed=1)
    topo = make_path3()
    inner = Sonata(variant="L")
    state, _ = inner.init_state(prob, topo, np.zeros((3, 2)))
    z = np.random.default_rng(0).standard_normal((3, 2))
    same = inner.warm_start(state, z_new=z, z_old=z, delta=0.7)
    assert np.array_equal(same.y, state.y)
    zero = inner.warm_start(state, z_new=z + 1.0, z_old=z, delta=0.0)
    assert np.array_equal(zero.y, state.y)


def test_warm_start_restores_tracking_identity(path3):
    prob = quadratic_problem(3, 4, seed=5)
    inner = Sonata(variant="L")
    delta = inner.delta_policy(prob)
    rng = np.random.default_rng(2)
    z_old = rng.standard_normal((3, 4))
    z_new = rng.standard_normal((3, 4))
    sub_old = build_subproblem(prob, z_old, delta)
    sub_new = build_subproblem(prob, z_new, delta)
    state, _ = inner.init_state(sub_old, path3, rng.standard_normal((3, 4)))
    for _ in range(5):
        state, _ = inner.step(state, sub_old, path3)
    assert tracking_error(state, sub_old) < 1e-12
    warm = inner.warm_start(state, z_new=z_new, z_old=z_old, delta=delta)
    assert tracking_error(warm, sub_new) < 1e-12


def test_warm_start_shape_mismatch():
    prob = quadratic_problem(2, 2, seed=0)
    topo = make_path3()
    inner = Sonata(variant="L")
    state, _ = inner.init_state(prob, topo, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        inner.warm_start(state, z_new=np.zeros((3, 2)), z_old=np.zeros((2, 2)), delta=1.0)


def test_rate_values():
    mu, L, beta = 0.5, 4.0, 2.0
    consts = dc.ProblemConstants(L=L, mu=mu, L_max=L, mu_min=mu, beta=beta)
    prob = dc.CompositeProblem([dc.QuadraticLoss(np.eye(2))], constants=consts)
    # F with delta = beta - mu: 2 + 32 beta / (mu + delta) = 34
    sub = dc.CompositeProblem([dc.QuadraticLoss(np.eye(2))],
                              constants=consts.shifted(beta - mu))
    assert Sonata(variant="F").rate(sub) == pytest.approx(34.0)
    # L with delta = L - mu: 2 + 8 (2L - mu)/L <= 18
    sub_l = dc.CompositeProblem([dc.QuadraticLoss(np.eye(2))],
                                constants=consts.shifted(L - mu))
    rl = Sonata(variant="L").rate(sub_l)
    assert rl == pytest.approx(2 + 8 * (2 * L - mu) / L)
    assert rl <= 18.0
    # L with mu = L, delta = 0: 10
    consts_eq = dc.ProblemConstants(L=L, mu=L, L_max=L, mu_min=L)
    sub_eq = dc.CompositeProblem([dc.QuadraticLoss(np.eye(2))], constants=consts_eq)
    assert Sonata(variant="L").rate(sub_eq) == pytest.approx(10.0)


def test_merit_zero_at_solution(path3):
    prob = quadratic_problem(3, 2, seed=7, reg=dc.Regularizer.l1(0.05))
    inner = Sonata(variant="L")
    x_star, u_star = inner.merit_reference(prob, path3)
    gbar = prob.grad_matrix(np.tile(x_star, (3, 1))).mean(axis=0)
    state = SonataState(x=np.tile(x_star, (3, 1)), y=np.tile(gbar, (3, 1)),
                        grads=prob.grad_matrix(np.tile(x_star, (3, 1))),
                        weight=prob.L)
    assert abs(inner.merit(state, prob, (x_star, u_star))) < 1e-10


def test_merit_dominates_mean_square_distance(path3):
    prob = quadratic_problem(3, 2, seed=9)
    inner = Sonata(variant="L")
    ref = inner.merit_reference(prob, path3)
    x_star = ref[0]
    # zero-mean consensus perturbation around the solution
    pattern = np.array([[1.0, -0.5], [-1.0, 0.0], [0.0, 0.5]])
    X = x_star[None, :] + pattern
    state = SonataState(x=X, y=prob.grad_matrix(X), grads=prob.grad_matrix(X),
                        weight=prob.L)
    merit = inner.merit(state, prob, ref)
    msd = float(np.sum((X - x_star) ** 2) / 3)
    assert merit >= msd


def test_merit_single_agent_reduces_to_value_gap():
    prob = quadratic_problem(1, 3, seed=3)
    topo = single_node_topology()
    inner = Sonata(variant="L")
    x_star, u_star = inner.merit_reference(prob, topo)
    x = x_star + np.array([0.3, -0.2, 0.1])
    state = SonataState(x=x[None, :], y=prob.grad_matrix(x[None, :]),
                        grads=prob.grad_matrix(x[None, :]), weight=prob.L)
    merit = inner.merit(state, prob, (x_star, u_star))
    expected = 2.0 / prob.mu * (prob.value(x) - u_star)
    assert merit == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("variant", ["L", "F"])
def test_merit_envelope_under_certified_mixing(path3, variant):
    agents = random_quadratic_agents(3, 2, seed=2, mu_floor=0.05)
    prob = dc.CompositeProblem(agents, dc.Regularizer.l1(0.02))
    inner = Sonata(variant=variant, mixing_rounds="auto")
    delta = inner.delta_policy(prob)
    sub = build_subproblem(prob, np.random.default_rng(0).standard_normal((3, 2)), delta)
    ref = inner.merit_reference(sub, path3)
    r = inner.rate(sub)
    rng = np.random.default_rng(1)
    state, _ = inner.init_state(sub, path3, ref[0][None, :] + rng.standard_normal((3, 2)))
    m0 = inner.merit(state, sub, ref)
    for t in range(1, 201):
        state, _ = inner.step(state, sub, path3)
        mt = inner.merit(state, sub, ref)
        if mt < 1e-25 * m0:
            break
        assert mt <= m0 * (1 - 1 / r) ** t * (1 + 1e-9)


def test_rho_bound_values_frozen():
    # recomputed longhand from the contraction-condition expressions
    consts_l = dc.ProblemConstants(L=2.0, mu=1.0, L_max=3.0, mu_min=1.0)
    prob_l = dc.CompositeProblem([dc.QuadraticLoss(np.eye(2))], constants=consts_l)
    assert sonata_rho_bound(prob_l, "L") == pytest.approx(0.002875273163926476, rel=1e-12)
    consts_f = dc.ProblemConstants(L=2.0, mu=1.0, L_max=3.0, mu_min=1.0, beta=1.5)
    prob_f = dc.CompositeProblem([dc.QuadraticLoss(np.eye(2))], constants=consts_f)
    assert sonata_rho_bound(prob_f, "F") == pytest.approx(0.0006814268257515653, rel=1e-12)


def test_auto_mixing_meets_rho_bound(path3):
    agents = random_quadratic_agents(3, 2, seed=2, mu_floor=0.05)
    prob = dc.CompositeProblem(agents)
    inner = Sonata(variant="L", mixing_rounds="auto")
    sub = build_subproblem(prob, np.zeros((3, 2)), inner.delta_policy(prob))
    from dcatalyst.network import chebyshev_contraction
    rounds = inner._rounds(sub, path3)
    assert chebyshev_contraction(path3.rho, rounds) <= sonata_rho_bound(sub, "L")


def test_local_solver_iterations_independent_of_global_conditioning(path3):
    # vary kappa_g through mu with L and beta fixed: the full-model
    # subproblems keep an O(1) condition number, so the local accelerated
    # solver's iteration count must not grow with kappa_g
    counts = []
    for kappa in (10, 40, 160):
        agents = conditioned_quadratics(3, 3, mu0=1.0 / kappa, L0=1.0,
                                        beta_target=0.5, seed=6)
        prob = dc.CompositeProblem(agents, dc.Regularizer.l1(0.01))
        inner = Sonata(variant="F")
        delta = inner.delta_policy(prob)
        sub = build_subproblem(prob, np.zeros((3, 3)), delta)
        state, _ = inner.init_state(sub, path3, np.ones((3, 3)))
        from dcatalyst.inner_base import Counters
        steps_cost = []
        for _ in range(5):
            before = Counters()
            state, dcount = inner.step(state, sub, path3)
            steps_cost.append(dcount.prox_calls)
        counts.append(np.mean(steps_cost))
    assert max(counts) <= 1.5 * min(counts) + 5


def test_nonconverged_local_solve_raises(path3):
    agents = random_quadratic_agents(3, 2, seed=2)
    prob = dc.CompositeProblem(agents, dc.Regularizer.l1(0.05))
    inner = Sonata(variant="F", local_max_iter=1, local_tol=1e-14)
    state, _ = inner.init_state(prob, path3, np.ones((3, 2)) * 10)
    with pytest.raises(RuntimeError, match="residual"):
        inner.step(state, prob, path3)
