"""Primal-dual inner family driven by a (W, H^2, C) matrix triple.

Covers exact-diffusion and EXTRA-style methods. The dual variable is kept
in transformed form yhat = H y so only the graph-structured H^2 is ever
multiplied; yhat starts at zero and stays orthogonal to the consensus
direction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .inner_base import Counters, InnerAlgorithm


@dataclass(frozen=True)
class PudaState:
    x: np.ndarray      # m x d decisions
    yhat: np.ndarray   # m x d transformed duals
    eta: float         # stepsize, tied to the subproblem's L_max


def puda_delta_policy(matrices, constants, guard_ratio=1e6):
    """Proximal weight balancing the primal and dual contraction rates.

    delta = 4 s (L_max - mu_min) / ((2 - sigma_max(C))^2 - 4 s) - mu_min,
    s = sigma_min^+(H^2), clamped below at zero. Fails when the denominator
    closes (network mixing so strong that no balancing point exists).
    """
    s = matrices.sigma_min_plus_Hsq
    gap = (2.0 - matrices.sigma_max_C) ** 2 - 4.0 * s
    if gap <= 0 or (4.0 * s) / gap > guard_ratio:
        raise ValueError(
            "network too well-connected to need delta; use delta = 0")
    delta = 4.0 * s * (constants.L_max - constants.mu_min) / gap - constants.mu_min
    return max(delta, 0.0)


class Puda(InnerAlgorithm):
    """Proximal unified-decentralized update over a fixed matrix triple."""

    def __init__(self, matrices):
        self.matrices = matrices

    name = "puda"

    def delta_policy(self, problem):
        return puda_delta_policy(self.matrices, problem.constants)

    def _eta(self, problem):
        return (2.0 - self.matrices.sigma_max_C) / (2.0 * problem.constants.L_max)

    def init_state(self, problem, topology, x0):
        x0 = np.asarray(x0, dtype=float)
        state = PudaState(x=x0.copy(), yhat=np.zeros_like(x0), eta=self._eta(problem))
        return state, Counters()

    def step(self, state, problem, topology):
        mats = self.matrices
        counters = Counters(comm_rounds=mats.comm_cost_per_step(),
                            grad_components=sum(a.grad_cost for a in problem.agents),
                            prox_calls=problem.m)
        g = problem.grad_matrix(state.x)
        v = state.x - state.eta * g - state.yhat
        if not mats.c_is_zero:
            v -= mats.C @ state.x
        yhat_new = state.yhat + (mats.Hsq @ v if not mats.hsq_is_zero else 0.0)
        wv = mats.W @ v
        x_new = np.stack([problem.regularizer.prox(wv[i], state.eta)
                          for i in range(problem.m)])
        return replace(state, x=x_new, yhat=yhat_new), counters

    def warm_start(self, state, z_new, z_old, delta):
        """Carry both blocks unchanged; the dual needs no shift here."""
        return replace(state, x=state.x.copy(), yhat=state.yhat.copy())

    def rate(self, problem):
        c = problem.constants
        mats = self.matrices
        primal = 4.0 * c.L_max / ((2.0 - mats.sigma_max_C) ** 2 * c.mu_min)
        dual = 1.0 / mats.sigma_min_plus_Hsq if mats.sigma_min_plus_Hsq > 0 else 1.0
        return max(primal, dual)

    def merit(self, state, problem, reference):
        x_star, yhat_star = reference
        m = problem.m
        dx = state.x - x_star[None, :]
        dy = state.yhat - yhat_star
        return float(np.sum(dx * dx) + np.sum(dy * dy)) / m

    def merit_reference(self, problem, topology, tol=1e-12, max_iter=10000):
        """Fixed point (x*, yhat*) via a long pre-run from consensus at x*."""
        from .oracle import fista_solve
        ref = fista_solve(problem, tol=tol)
        x_rows = np.tile(ref.x_star, (problem.m, 1))
        state, _ = self.init_state(problem, topology, x_rows)
        for _ in range(max_iter):
            new_state, _ = self.step(state, problem, topology)
            move = max(float(np.max(np.abs(new_state.x - state.x))),
                       float(np.max(np.abs(new_state.yhat - state.yhat))))
            state = new_state
            if move <= tol:
                break
        return ref.x_star, state.yhat

    def warm_start_constants(self, problem, delta):
        mats = self.matrices
        eta = self._eta(problem)
        s = mats.sigma_min_plus_Hsq
        d_m = 2.0 + mats.sigma_max_Hsq * (9.0 + 9.0 * delta * delta * eta * eta) / s
        return 2.0, d_m
