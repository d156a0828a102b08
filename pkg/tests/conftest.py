import numpy as np
import pytest

import dcatalyst as dc
from dcatalyst.network import Graph, metropolis_weights, spectral_gap, Topology


def make_path3():
    graph = Graph(3, frozenset({(0, 0), (1, 1), (2, 2), (0, 1), (1, 2)}))
    W = metropolis_weights(graph)
    return Topology(m=3, graph=graph, W=W, rho=spectral_gap(W))


def make_k3():
    graph = Graph(3, frozenset({(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)}))
    W = metropolis_weights(graph)
    return Topology(m=3, graph=graph, W=W, rho=spectral_gap(W))


@pytest.fixture
def path3():
    return make_path3()


@pytest.fixture
def k3():
    return make_k3()


def random_quadratic_agents(m, d, seed, mu_floor=0.1, b_scale=1.0):
    rng = np.random.default_rng(seed)
    agents = []
    for _ in range(m):
        M = rng.standard_normal((d + 2, d))
        H = M.T @ M / (d + 2) + mu_floor * np.eye(d)
        agents.append(dc.QuadraticLoss(H, b=b_scale * rng.standard_normal(d)))
    return agents


def quadratic_problem(m, d, seed, reg=None, mu_floor=0.1):
    return dc.CompositeProblem(random_quadratic_agents(m, d, seed, mu_floor),
                               reg if reg is not None else dc.Regularizer.zero())


def conditioned_quadratics(m, d, mu0, L0, beta_target, seed, linear_scale=1.0):
    """Agents with exact mean spectrum [mu0, L0] and exact similarity beta.

    The mean Hessian has eigenvalues linspace(mu0, L0); perturbations of
    norm beta_target act on the top eigendirection with signs summing to
    zero, so the mean (hence L, mu, kappa_g) is exact and beta equals
    beta_target. Needs beta_target <= L0 to keep every agent convex.
    """
    if beta_target > L0:
        raise ValueError("beta_target > L0 would break agent convexity")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    spec = np.linspace(mu0, L0, d)
    Hbar = Q @ np.diag(spec) @ Q.T
    top = Q[:, -1]
    P = np.outer(top, top)
    signs = np.array([1 if i % 2 == 0 else -1 for i in range(m)], dtype=float)
    if m % 2 == 1:
        signs[-1] = 0.0
    agents = []
    for i in range(m):
        H = Hbar + signs[i] * beta_target * P
        agents.append(dc.QuadraticLoss(H, b=linear_scale * rng.standard_normal(d)))
    return agents


def finite_difference_grad(fun, x, h=1e-6):
    """Central differences; the independent oracle for every gradient test."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * h)
    return g


def finite_sum_linreg_problem(m, n, d, gamma, seed, reg=None, row_scale=None):
    rng = np.random.default_rng(seed)
    agents = []
    for i in range(m):
        A = rng.standard_normal((n, d)) / np.sqrt(d)
        if row_scale is not None:
            A = A * row_scale(rng, n)[:, None]
        y = A @ rng.standard_normal(d) + 0.1 * rng.standard_normal(n)
        agents.append(dc.LinearRegressionLoss(A, y, gamma=gamma))
    return dc.CompositeProblem(agents, reg if reg is not None else dc.Regularizer.zero())


def logistic_problem(m, n, d, gamma, seed, lam=0.0):
    rng = np.random.default_rng(seed)
    agents = []
    w_true = rng.standard_normal(d)
    for i in range(m):
        A = rng.standard_normal((n, d)) / np.sqrt(d)
        y = np.sign(A @ w_true + 0.3 * rng.standard_normal(n))
        y[y == 0] = 1.0
        agents.append(dc.LogisticLoss(A, y, gamma=gamma))
    reg = dc.Regularizer.l1(lam) if lam > 0 else dc.Regularizer.zero()
    return dc.CompositeProblem(agents, reg)
