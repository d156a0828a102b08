"""Contract shared by the inner decentralized algorithms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Counters:
    """Resource tally: communication rounds, gradient components, prox calls."""

    comm_rounds: int = 0
    grad_components: int = 0
    prox_calls: int = 0

    def __iadd__(self, other):
        self.comm_rounds += other.comm_rounds
        self.grad_components += other.grad_components
        self.prox_calls += other.prox_calls
        return self

    def copy(self):
        return Counters(self.comm_rounds, self.grad_components, self.prox_calls)


def consensus_parts(X):
    """Split X into its row mean and the disagreement component."""
    xbar = np.mean(X, axis=0)
    return xbar, X - xbar[None, :]


class InnerAlgorithm:
    """One decentralized solver usable inside the accelerated outer loop.

    Implementations provide a state constructor, one synchronous iteration,
    the warm-start shift applied between consecutive proximal subproblems,
    the theoretical contraction rate of their merit function, and the merit
    function itself (used by the runtime certificates, never by the
    algorithm).
    """

    name = "abstract"

    def delta_policy(self, problem):
        """Recommended proximal weight delta for this algorithm on `problem`."""
        raise NotImplementedError

    def init_state(self, problem, topology, x0):
        """Fresh state for minimizing `problem` from the m x d start x0."""
        raise NotImplementedError

    def step(self, state, problem, topology):
        """One iteration; returns (new_state, Counters of this step)."""
        raise NotImplementedError

    def warm_start(self, state, z_new, z_old, delta):
        """Shift the terminal state of one subproblem into the next one's start."""
        raise NotImplementedError

    def rate(self, problem):
        """r such that the merit contracts like (1 - 1/r) per step on `problem`."""
        raise NotImplementedError

    def merit(self, state, problem, reference):
        raise NotImplementedError

    def merit_reference(self, problem, topology, tol=1e-12):
        """Oracle data the merit function needs (solution of `problem`, etc.)."""
        raise NotImplementedError

    def warm_start_constants(self, problem, delta):
        """(c, d) bounding merit inflation across a warm start."""
        raise NotImplementedError
