"""Centralized reference computations and runtime convergence certificates.

Everything here is simulator-side tooling: a reference solver, the Moreau
envelope oracle, and executable checks for the three guarantees the
accelerated loop relies on (merit contraction, warm-start stability, and the
momentum lower-bound chain built from inexact quadratic models).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .outer import build_subproblem, lambda_sequence


@dataclass
class ReferenceSolution:
    x_star: np.ndarray
    u_star: float
    residual: float
    iterations: int
    converged: bool


def accel_prox_gradient(value_grad, prox, L, x0, tol=1e-10, max_iter=100000, mu=0.0):
    """Accelerated proximal gradient on g + r with restart-free momentum.

    `prox(v, theta)` must return argmin_y theta*r(y) + ||y - v||^2 / 2.
    Stops when the prox-gradient fixed-point residual at the iterate is at
    most tol. Returns (x, iterations, residual, converged).
    """
    x = np.asarray(x0, dtype=float).copy()
    y = x.copy()
    step = 1.0 / L
    if mu > 0:
        q = mu / L
        beta = (1.0 - math.sqrt(q)) / (1.0 + math.sqrt(q))
    else:
        beta = None
        t_mom = 1.0
    it = 0
    while it < max_iter:
        _, g = value_grad(y)
        x_new = prox(y - step * g, step)
        it += 1
        if np.linalg.norm(x_new - y) <= 0.5 * tol:
            # candidate; confirm with the true residual at x_new
            _, gx = value_grad(x_new)
            resid = float(np.linalg.norm(x_new - prox(x_new - step * gx, step)))
            if resid <= tol:
                return x_new, it, resid, True
        if beta is not None:
            y = x_new + beta * (x_new - x)
        else:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
            y = x_new + ((t_mom - 1.0) / t_next) * (x_new - x)
            t_mom = t_next
        x = x_new
    _, gx = value_grad(x)
    resid = float(np.linalg.norm(x - prox(x - step * gx, step)))
    return x, it, resid, resid <= tol


def fista_solve(problem, tol=1e-10, max_iter=200000, x0=None):
    """Reference minimizer of the centralized composite problem."""
    if tol <= 0:
        raise ValueError("tol must be > 0")
    x0 = np.zeros(problem.d) if x0 is None else np.asarray(x0, dtype=float)
    x, it, resid, ok = accel_prox_gradient(
        problem.smooth_value_grad, problem.prox, problem.L, x0,
        tol=tol, max_iter=max_iter, mu=problem.mu)
    return ReferenceSolution(x_star=x, u_star=problem.value(x),
                             residual=resid, iterations=it, converged=ok)


class MoreauOracle:
    """Memoized Moreau-envelope oracle for u at smoothing weight 1/delta.

    prox(x) minimizes u(y) + (delta/2)||y - x||^2; the envelope value is the
    attained minimum and its gradient is delta * (x - prox(x)). Solves are
    cached per query point (certificates and metrics revisit the same
    points) and warm-started from the previous solution.
    """

    def __init__(self, problem, delta, tol=1e-12, max_iter=200000):
        if delta <= 0:
            raise ValueError("delta must be > 0")
        self.problem = problem
        self.delta = float(delta)
        self.tol = tol
        self.max_iter = max_iter
        self._cache = {}
        self._last = None
        self.solves = 0

    def _solve(self, x):
        key = x.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        delta = self.delta

        def vg(y):
            val, g = self.problem.smooth_value_grad(y)
            diff = y - x
            return val + 0.5 * delta * float(diff @ diff), g + delta * diff

        x0 = self._last if self._last is not None else x
        p, _, resid, ok = accel_prox_gradient(
            vg, self.problem.prox, self.problem.L + delta, x0,
            tol=self.tol, max_iter=self.max_iter, mu=self.problem.mu + delta)
        if not ok:
            raise RuntimeError(f"Moreau prox solve stalled at residual {resid:.3e}")
        val = self.problem.value(p) + 0.5 * delta * float(np.sum((p - x) ** 2))
        self._cache[key] = (p, val)
        self._last = p
        self.solves += 1
        return p, val

    def prox(self, x):
        return self._solve(np.asarray(x, dtype=float))[0]

    def value(self, x):
        return self._solve(np.asarray(x, dtype=float))[1]

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return self.delta * (x - self._solve(x)[0])


def moreau_grad(problem, delta, x, tol=1e-12):
    """Gradient of the Moreau envelope of u at x (one-shot convenience)."""
    return MoreauOracle(problem, delta, tol=tol).grad(x)


# ---------------------------------------------------------------------------
# estimating-sequence certificate

def _slack(rhs, tol=1e-8):
    return tol * (1.0 + abs(rhs))


@dataclass
class EstSeqCertificate:
    """Reconstruction of the quadratic lower models along a run.

    Arrays are indexed by outer iteration k (0..K) and agent i. `anchors`
    are the models' centers (the estimating-sequence auxiliary points,
    distinct from the variance-reduction anchors).
    """

    zeta: np.ndarray  # (K+1,)
    lam: np.ndarray  # (K+1,)
    mu_moreau: float
    psi_star: np.ndarray  # (K+1, m)
    eps_psi: np.ndarray  # (K+1, m)
    eps_tot: np.ndarray  # (K, m)
    e_norm: np.ndarray  # (K, m)
    moreau_at_x: np.ndarray  # (K+1, m)
    anchors: np.ndarray  # (K+1, m, d)
    lower_bound_ok: np.ndarray  # (K+1, m) bool
    chain_ok: np.ndarray  # (K+1, m) bool
    violations: list = field(default_factory=list)

    @property
    def passed(self):
        return len(self.violations) == 0

    def rows(self):
        K1, m = self.psi_star.shape
        for k in range(K1):
            for i in range(m):
                yield {
                    "k": k, "agent": i,
                    "zeta": self.zeta[k], "lambda": self.lam[k],
                    "psi_star": self.psi_star[k, i],
                    "eps_psi": self.eps_psi[k, i],
                    "eps_tot": self.eps_tot[k, i] if k < K1 - 1 else "",
                    "moreau": self.moreau_at_x[k, i],
                    "lower_bound_ok": int(self.lower_bound_ok[k, i]),
                    "chain_ok": int(self.chain_ok[k, i]),
                }


def certify_estseq(trace, problem, schedule, oracle_tol=1e-12, tol=1e-8,
                   x_star=None, u_star=None):
    """Rebuild the inexact quadratic models along `trace` and check them.

    Verifies, at every outer index and agent: the envelope value at the
    iterate is below the model minimum plus its tracked error, and the
    telescoped model-gap chain stays within its certified band. Also asserts
    the zeta recursion against the closed form delta * alpha^2.
    """
    delta = schedule.delta
    if delta <= 0:
        raise ValueError("certificate needs delta > 0")
    oracle = MoreauOracle(problem, delta, tol=oracle_tol)
    if x_star is None:
        ref = fista_solve(problem, tol=oracle_tol)
        if not ref.converged:
            raise RuntimeError("reference solve did not reach the requested tolerance")
        x_star, u_star = ref.x_star, ref.u_star
    if u_star is None:
        u_star = problem.value(x_star)

    K = len(trace.records)
    m, d = trace.x0.shape
    alphas = [r.alpha_k for r in trace.records]
    lam = np.array(lambda_sequence(alphas))
    mu_m = schedule.mu_moreau

    zeta = np.empty(K + 1)
    zeta[0] = mu_m if schedule.mode == "scvx" else delta
    psi_star = np.empty((K + 1, m))
    eps_psi = np.zeros((K + 1, m))
    eps_tot = np.zeros((K, m))
    e_norm = np.zeros((K, m))
    m_at_x = np.empty((K + 1, m))
    anchors = np.empty((K + 1, m, d))
    violations = []

    xs = [trace.x0] + [r.x_end for r in trace.records]
    zs = [r.z for r in trace.records]

    for i in range(m):
        anchors[0, i] = trace.x0[i]
        psi_star[0, i] = oracle.value(trace.x0[i])
        m_at_x[0, i] = psi_star[0, i]

    chain_accum = np.zeros(m)  # sum_t eps_tot / lambda^{t+1}
    psi0_at_star = np.array([
        psi_star[0, i] + 0.5 * zeta[0] * float(np.sum((x_star - anchors[0, i]) ** 2))
        for i in range(m)])

    lower_ok = np.ones((K + 1, m), dtype=bool)
    chain_ok = np.ones((K + 1, m), dtype=bool)

    def check_k(k):
        for i in range(m):
            # envelope value vs model minimum plus tracked error
            lhs = m_at_x[k, i]
            rhs = psi_star[k, i] + eps_psi[k, i]
            if lhs > rhs + _slack(rhs, tol):
                lower_ok[k, i] = False
                violations.append(("lower_bound", k, i, lhs, rhs))
            # telescoped band on the model gap at the solution
            psi_at_star = psi_star[k, i] + 0.5 * zeta[k] * float(
                np.sum((x_star - anchors[k, i]) ** 2))
            mid = psi_at_star + eps_psi[k, i] - u_star
            hi = lam[k] * (psi0_at_star[i] - u_star + chain_accum[i])
            if mid < -_slack(mid, tol) or mid > hi + _slack(hi, tol):
                chain_ok[k, i] = False
                violations.append(("chain", k, i, mid, hi))

    check_k(0)

    # precondition of the lower-bound construction: the momentum points in
    # the trace follow the extrapolation recursion from the iterates
    from .outer import extrapolate
    if K > 0 and np.abs(zs[0] - trace.x0).max() > 1e-12:
        violations.append(("extrapolation_consistency", 0, -1,
                           float(np.abs(zs[0] - trace.x0).max()), 0.0))
    for k in range(K - 1):
        z_expect = extrapolate(xs[k + 1], xs[k], alphas[k], alphas[k + 1])
        dev = float(np.abs(zs[k + 1] - z_expect).max())
        scale = 1.0 + float(np.abs(z_expect).max())
        if dev > 1e-10 * scale:
            violations.append(("extrapolation_consistency", k + 1, -1, dev, 0.0))

    for k in range(K):
        a = alphas[k]
        zeta[k + 1] = (1.0 - a) * zeta[k] + a * mu_m
        closed = delta * a * a
        if abs(zeta[k + 1] - closed) > 1e-14 * max(1.0, abs(closed)):
            violations.append(("zeta_identity", k + 1, -1, zeta[k + 1], closed))
        for i in range(m):
            zk = zs[k][i]
            x_next = xs[k + 1][i]
            gm = oracle.grad(zk)
            mz = oracle.value(zk)
            e = delta * (zk - x_next) - gm
            e_norm[k, i] = float(np.linalg.norm(e))
            ge = gm + e
            vk = anchors[k, i]
            anchors[k + 1, i] = ((1.0 - a) * zeta[k] * vk + a * mu_m * zk
                                 - a * ge) / zeta[k + 1]
            psi_star[k + 1, i] = (
                (1.0 - a) * psi_star[k, i] + a * mz
                - (a * a) / (2.0 * zeta[k + 1]) * float(ge @ ge)
                + (a * (1.0 - a) * zeta[k] / zeta[k + 1]) * (
                    float(ge @ (vk - zk)) + 0.5 * mu_m * float(np.sum((zk - vk) ** 2))))
            eps_psi[k + 1, i] = (
                (1.0 - a) * eps_psi[k, i]
                + (1.0 - a) * float(e @ (xs[k][i] - zk))
                + float((ge) @ e) / delta)
            eps_tot[k, i] = (eps_psi[k + 1, i] - (1.0 - a) * eps_psi[k, i]
                             + a * float(e @ (x_star - zk)))
            chain_accum[i] += eps_tot[k, i] / lam[k + 1]
            m_at_x[k + 1, i] = oracle.value(x_next)
        check_k(k + 1)

    return EstSeqCertificate(
        zeta=zeta, lam=lam, mu_moreau=mu_m, psi_star=psi_star, eps_psi=eps_psi,
        eps_tot=eps_tot, e_norm=e_norm, moreau_at_x=m_at_x, anchors=anchors,
        lower_bound_ok=lower_ok, chain_ok=chain_ok, violations=violations)


# ---------------------------------------------------------------------------
# merit-function validators

@dataclass
class Assumption4Report:
    rates: list
    median_rate: float
    required_rate: float
    domination_margin: float
    envelope_margin: float
    passed: bool


def check_assumption4(inner, subproblem, topology, steps, seeds, x0_scale=1.0,
                      slack=0.05):
    """Measure the merit contraction of `inner` on one subproblem.

    For each seed, runs `steps` iterations from a random start and fits the
    per-step geometric rate of the merit; passes when the median rate stays
    below 1 - (1 - slack)/r with r the algorithm's declared rate. Also
    reports how far the merit dominates the mean squared distance to the
    solution (<= 1 when the merit is a true upper bound).
    """
    ref = inner.merit_reference(subproblem, topology)
    r = inner.rate(subproblem)
    required = 1.0 - (1.0 - slack) / r
    rates = []
    dom = 0.0
    env = 0.0
    x_star = ref[0]
    for seed in seeds:
        rng = np.random.default_rng(seed)
        x0 = x_star[None, :] + x0_scale * rng.standard_normal((subproblem.m, subproblem.d))
        state, _ = inner.init_state(subproblem, topology, x0)
        merits = [inner.merit(state, subproblem, ref)]
        for t in range(steps):
            diff = state.x - x_star[None, :]
            msd = float(np.sum(diff * diff) / subproblem.m)
            # pointwise checks only where cancellation noise is negligible
            if merits[-1] > merits[0] * 1e-12:
                dom = max(dom, msd / merits[-1])
                env = max(env, merits[-1] / (merits[0] * (1.0 - 1.0 / r) ** t))
            state, _ = inner.step(state, subproblem, topology)
            merits.append(inner.merit(state, subproblem, ref))
        merits = np.array(merits)
        # stop the fit where float cancellation floors the merit
        floor = max(merits[0] * 1e-26, 1e-300)
        below = np.nonzero(merits < floor)[0]
        tail = int(below[0]) - 1 if below.size else len(merits) - 1
        tail = max(tail, 1)
        rates.append((merits[tail] / merits[0]) ** (1.0 / tail))
    median = float(np.median(rates))
    return Assumption4Report(rates=rates, median_rate=median,
                             required_rate=required, domination_margin=dom,
                             envelope_margin=env, passed=median <= required)


@dataclass
class Assumption5Report:
    checked: int
    violations: list
    max_ratio: float

    @property
    def passed(self):
        return not self.violations


def check_assumption5(inner, problem, topology, trace, delta, tol=1e-8,
                      max_transitions=None):
    """Verify the warm-start inequality on the transitions recorded in `trace`.

    Needs a trace produced with record_states=True. For each consecutive
    pair of outer loops, checks
    merit_{k+1}(warm state) <= c * merit_k(terminal state) + (d/m) ||dz||^2.
    """
    recs = trace.records
    if not recs or recs[0].state_end is None:
        raise ValueError("trace must be recorded with record_states=True")
    c_m, d_m = inner.warm_start_constants(
        build_subproblem(problem, recs[0].z, delta), delta)
    violations = []
    max_ratio = 0.0
    n_checked = 0
    limit = len(recs) - 1 if max_transitions is None else min(max_transitions, len(recs) - 1)
    refs = {}

    def ref_for(k, sub):
        if k not in refs:
            refs[k] = inner.merit_reference(sub, topology)
        return refs[k]

    for k in range(limit):
        sub_k = build_subproblem(problem, recs[k].z, delta)
        sub_k1 = build_subproblem(problem, recs[k + 1].z, delta)
        lhs = inner.merit(recs[k + 1].state_warm, sub_k1, ref_for(k + 1, sub_k1))
        term = inner.merit(recs[k].state_end, sub_k, ref_for(k, sub_k))
        dz = recs[k + 1].z - recs[k].z
        rhs = c_m * term + (d_m / problem.m) * float(np.sum(dz * dz))
        n_checked += 1
        if rhs > 0:
            max_ratio = max(max_ratio, lhs / rhs)
        if lhs > rhs + _slack(rhs, tol):
            violations.append((k, lhs, rhs))
    return Assumption5Report(checked=n_checked, violations=violations,
                             max_ratio=max_ratio)
