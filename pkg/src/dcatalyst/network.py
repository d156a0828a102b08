"""Mesh-network simulation: graphs, gossip matrices, consensus accelerators.

Agent variables are stacked row-wise into m x d matrices; one application of
a gossip matrix W is one communication round.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Graph:
    m: int
    edges: frozenset  # undirected pairs (i, j) with i <= j, self-loops included

    def neighbors(self, i):
        out = []
        for (a, b) in self.edges:
            if a == i and b != i:
                out.append(b)
            elif b == i and a != i:
                out.append(a)
        return sorted(out)

    def degree(self, i):
        """Degree excluding the self-loop."""
        return len(self.neighbors(i))


def _connected(m, edges):
    adj = {i: set() for i in range(m)}
    for (a, b) in edges:
        if a != b:
            adj[a].add(b)
            adj[b].add(a)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == m


def _components(m, edges):
    adj = {i: set() for i in range(m)}
    for (a, b) in edges:
        if a != b:
            adj[a].add(b)
            adj[b].add(a)
    comps, seen = [], set()
    for s in range(m):
        if s in seen:
            continue
        comp, stack = {s}, [s]
        seen.add(s)
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    comp.add(v)
                    stack.append(v)
        comps.append(sorted(comp))
    return comps


def erdos_renyi(m, p, seed):
    """Connected Erdos-Renyi graph with self-loops.

    Disconnected samples are redrawn with an incremented seed up to 100
    times; after that the remaining components are chained together by the
    lexicographically smallest cross edges, keeping the result deterministic.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not (0 < p <= 1):
        raise ValueError("p must be in (0, 1]")
    edges = set()
    for attempt in range(100):
        rng = np.random.default_rng(seed + attempt)
        edges = {(i, i) for i in range(m)}
        for i in range(m):
            for j in range(i + 1, m):
                if rng.random() < p:
                    edges.add((i, j))
        if _connected(m, edges):
            return Graph(m, frozenset(edges))
    comps = _components(m, edges)
    for a, b in zip(comps[:-1], comps[1:]):
        edges.add((min(a[0], b[0]), max(a[0], b[0])))
    return Graph(m, frozenset(edges))


def metropolis_weights(graph):
    """Metropolis weights: w_ij = 1/(1 + max(d_i, d_j)), diagonal fills the slack."""
    m = graph.m
    W = np.zeros((m, m))
    deg = [graph.degree(i) for i in range(m)]
    for (i, j) in graph.edges:
        if i != j:
            w = 1.0 / (1.0 + max(deg[i], deg[j]))
            W[i, j] = w
            W[j, i] = w
    for i in range(m):
        W[i, i] = 1.0 - np.sum(W[i]) + W[i, i]
    return W


def spectral_gap(W):
    """rho = ||W - (1/m) 11'||_2; in [0, 1) iff the gossip matrix mixes."""
    m = W.shape[0]
    dev = W - np.ones((m, m)) / m
    rho = float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (dev + dev.T)))))
    if rho >= 1.0 - 1e-12:
        raise ValueError(f"gossip matrix does not mix (rho = {rho:.6f})")
    return 0.0 if rho < 1e-12 else rho


@dataclass
class Topology:
    m: int
    graph: Graph
    W: np.ndarray
    rho: float

    @staticmethod
    def build(m, p, seed, weight_rule="metropolis"):
        graph = erdos_renyi(m, p, seed)
        if weight_rule != "metropolis":
            raise ValueError(f"unknown weight rule: {weight_rule}")
        W = metropolis_weights(graph)
        return Topology(m=m, graph=graph, W=W, rho=spectral_gap(W))

    def disagreement(self, X):
        """Frobenius norm of X minus its row-consensus projection."""
        xbar = np.mean(X, axis=0)
        return float(np.linalg.norm(X - xbar[None, :]))


def fastmix(X, n_fm, W, rho):
    """Accelerated gossip x^{t+1} = (1+eta) W x^t - eta x^{t-1}.

    Momentum eta = (1 - sqrt(1-rho^2)) / (1 + sqrt(1-rho^2)), x^{-1} = x^0.
    Column means are preserved; n_fm = 0 returns the input.
    """
    if n_fm < 0:
        raise ValueError("n_fm must be >= 0")
    X = np.asarray(X, dtype=float)
    if n_fm == 0:
        return X.copy()
    root = np.sqrt(max(1.0 - rho * rho, 0.0))
    eta = (1.0 - root) / (1.0 + root)
    prev = X
    cur = X
    for _ in range(n_fm):
        nxt = (1.0 + eta) * (W @ cur) - eta * prev
        prev, cur = cur, nxt
    return cur


def _cheb_ratios(rho, K):
    # b_t = T_{t-1}(1/rho) / T_t(1/rho); ratios stay in (0, 1) for any K
    b = np.empty(K + 1)
    b[0] = np.nan
    if K >= 1:
        b[1] = rho
    for t in range(1, K):
        b[t + 1] = 1.0 / (2.0 / rho - b[t])
    return b


def chebyshev_rounds(X, K, W, rho=None):
    """Chebyshev-filtered gossip: applies T_K(W/rho) / T_K(1/rho) to X.

    Mean-preserving; the disagreement contracts by 1/T_K(1/rho), of order
    2 (1 - sqrt(1-rho))^K. K = 0 is the identity, K = 1 a single W round.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    X = np.asarray(X, dtype=float)
    if K == 0:
        return X.copy()
    if rho is None:
        rho = spectral_gap(W)
    if rho == 0.0:
        return W @ X
    b = _cheb_ratios(rho, K)
    z_prev = X
    z_cur = W @ X
    for t in range(1, K):
        z_nxt = (2.0 * b[t + 1] / rho) * (W @ z_cur) - (b[t] * b[t + 1]) * z_prev
        z_prev, z_cur = z_cur, z_nxt
    return z_cur


def chebyshev_contraction(rho, K):
    """1/T_K(1/rho): the disagreement contraction of K filtered rounds."""
    if K == 0:
        return 1.0
    if rho == 0.0:
        return 0.0
    return float(np.prod(_cheb_ratios(rho, K)[1:]))


def chebyshev_operator(W, K, rho=None):
    """The filtered gossip matrix itself plus its contraction factor."""
    m = W.shape[0]
    if rho is None:
        rho = spectral_gap(W)
    W_eff = chebyshev_rounds(np.eye(m), K, W, rho)
    return W_eff, chebyshev_contraction(rho, K)


def chebyshev_rounds_for_target(rho, rho_target, cap=500):
    """Smallest K with 1/T_K(1/rho) <= rho_target (capped)."""
    if rho == 0.0:
        return 1
    contraction = 1.0
    b = rho
    K = 0
    while contraction > rho_target and K < cap:
        b = rho if K == 0 else 1.0 / (2.0 / rho - b)
        contraction *= b
        K += 1
    return max(K, 1)


@dataclass
class PudaMatrices:
    """Matrix triple (W, H^2, C) driving the primal-dual inner family.

    The dual is handled in transformed form yhat = H y, so only H^2 (which
    is graph-structured) is ever applied.
    """

    W: np.ndarray
    Hsq: np.ndarray
    C: np.ndarray
    sigma_max_C: float = field(default=0.0)
    sigma_min_plus_Hsq: float = field(default=0.0)
    sigma_max_Hsq: float = field(default=0.0)

    @property
    def m(self):
        return self.W.shape[0]

    @property
    def c_is_zero(self):
        return not np.any(self.C)

    @property
    def hsq_is_zero(self):
        return not np.any(self.Hsq)

    def comm_cost_per_step(self):
        """Graph-structured multiplications per iteration (zero matrices are free)."""
        cost = 0 if _is_identity(self.W) else 1
        cost += 0 if self.hsq_is_zero else 1
        cost += 0 if self.c_is_zero else 1
        return cost


def _is_identity(M):
    return M.shape[0] == M.shape[1] and np.allclose(M, np.eye(M.shape[0]), atol=1e-15)


def _sigma_stats(M):
    eig = np.linalg.eigvalsh(0.5 * (M + M.T))
    smax = float(np.max(eig)) if eig.size else 0.0
    pos = eig[eig > 1e-12]
    smin_plus = float(np.min(pos)) if pos.size else 0.0
    return smax, smin_plus


def validate_puda(mats, tol=1e-10):
    """Check the admissibility conditions of the matrix triple numerically."""
    W, Hsq, C = mats.W, mats.Hsq, mats.C
    m = W.shape[0]
    ones = np.ones(m)
    if not np.allclose(W, W.T, atol=tol):
        raise ValueError("W must be symmetric")
    if not (np.allclose(W @ ones, ones, atol=tol) and np.allclose(ones @ W, ones, atol=tol)):
        raise ValueError("W must be doubly stochastic")
    for name, M in (("H^2", Hsq), ("C", C)):
        if not np.allclose(M, M.T, atol=tol):
            raise ValueError(f"{name} must be symmetric")
        if np.linalg.norm(M @ ones) > tol * m:
            raise ValueError(f"{name} must annihilate the consensus direction")
    if m > 1 and not mats.hsq_is_zero:
        # null(H^2) = span(1): second-smallest eigenvalue must be positive
        eig = np.linalg.eigvalsh(0.5 * (Hsq + Hsq.T))
        if eig[1] <= tol:
            raise ValueError("null space of H^2 is larger than span(1)")
    eig_gap = np.linalg.eigvalsh(np.eye(m) - Hsq - W @ W)
    if np.min(eig_gap) < -tol:
        raise ValueError("W^2 <= I - H^2 violated")
    eig_c = np.linalg.eigvalsh(0.5 * (C + C.T))
    if eig_c.size and (np.min(eig_c) < -tol or np.max(eig_c) > 2 + tol):
        raise ValueError("0 <= C <= 2I violated")
    return True


def _finish_triple(W, Hsq, C):
    smax_c, _ = _sigma_stats(C)
    smax_h, smin_h = _sigma_stats(Hsq)
    mats = PudaMatrices(W=W, Hsq=Hsq, C=C, sigma_max_C=smax_c,
                        sigma_min_plus_Hsq=smin_h, sigma_max_Hsq=smax_h)
    validate_puda(mats)
    return mats


def prox_ed_triple(Wtilde):
    """Exact-diffusion instance: W = (I+Wt)/2, H^2 = (I-Wt)/2, C = 0."""
    Wtilde = np.asarray(Wtilde, dtype=float)
    m = Wtilde.shape[0]
    eye = np.eye(m)
    return _finish_triple((eye + Wtilde) / 2, (eye - Wtilde) / 2, np.zeros((m, m)))


def extra_triple(Wtilde):
    """EXTRA instance: W = (I+Wt)/2, H^2 = (I-Wt)/2, C = (I-Wt)/2."""
    Wtilde = np.asarray(Wtilde, dtype=float)
    m = Wtilde.shape[0]
    eye = np.eye(m)
    half = (eye - Wtilde) / 2
    return _finish_triple((eye + Wtilde) / 2, half, half.copy())
