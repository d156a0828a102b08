"""Accelerated outer loop: proximal subproblems, momentum schedule, budgets.

Each outer iteration k builds the subproblem u^k (every agent's loss gets a
proximal term centered at its momentum vector z_i^k), runs the chosen inner
algorithm for T_k steps from a warm start, then extrapolates the momentum
vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .inner_base import Counters
from .problems import CompositeProblem, ProxShiftedLoss


def build_subproblem(problem, z, delta):
    """Problem with agent i's loss replaced by f_i + (delta/2)||x - z_i||^2."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    z = np.asarray(z, dtype=float)
    if z.shape != (problem.m, problem.d):
        raise ValueError("z must be m x d")
    if delta == 0.0:
        return problem
    agents = [ProxShiftedLoss(a, delta, z[i]) for i, a in enumerate(problem.agents)]
    return CompositeProblem(agents, problem.regularizer,
                            constants=problem.constants.shifted(delta))


def alpha_scvx(mu, delta):
    """Constant momentum root alpha = sqrt(mu / (mu + delta)) for mu > 0."""
    if mu <= 0:
        raise ValueError("mu = 0: use the convex recursion for alpha")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    return math.sqrt(mu / (mu + delta))


ALPHA0_CVX = (math.sqrt(5.0) - 1.0) / 2.0


def alpha_cvx_next(alpha_prev):
    """Positive root of a^2 = (1 - a) * alpha_prev^2; strictly decreasing."""
    if not (0 < alpha_prev < 1):
        raise ValueError("alpha_prev must lie in (0, 1)")
    q = alpha_prev * alpha_prev
    return (-q + math.sqrt(q * q + 4.0 * q)) / 2.0


def lambda_sequence(alphas):
    """lambda^k = prod_{t<k} (1 - alpha^t), with lambda^0 = 1."""
    lam = [1.0]
    for a in alphas:
        lam.append(lam[-1] * (1.0 - a))
    return lam


def extrapolate(x_new, x_old, alpha_k, alpha_next):
    """Momentum update z = x_new + coeff * (x_new - x_old), per agent."""
    if x_new.shape != x_old.shape:
        raise ValueError("shape mismatch in extrapolation")
    coeff = alpha_k * (1.0 - alpha_k) / (alpha_k * alpha_k + alpha_next)
    return x_new + coeff * (x_new - x_old)


# ---------------------------------------------------------------------------
# inner-iteration budgets

@dataclass
class FixedBudget:
    T: int

    def budget(self, k):
        return max(int(self.T), 1)


@dataclass
class PracticalBudget:
    """T_k = ceil(coef * log(ratio)), the tuning used in the experiments.

    `ratio` is the relevant condition ratio of the instance (L/mu for the
    linearized variant, beta/mu when exploiting similarity); coef = 0.5
    reproduces the variance-reduction tuning.
    """

    ratio: float
    coef: float = 1.0

    def budget(self, k):
        return max(math.ceil(self.coef * math.log(self.ratio)), 1)


@dataclass
class PracticalCvxBudget:
    """T_k = ceil(log(k + 1)), floored at one step."""

    coef: float = 1.0

    def budget(self, k):
        return max(math.ceil(self.coef * math.log(k + 1)), 1)


def _c_hat(mu, delta, m, c):
    # problem-size factor of the strongly convex outer constant, in units
    # of eps0 (eps0 cancels when eps0 is chosen as the max initialization)
    s = (mu + delta) ** 2 / (mu * mu)
    return (2.0 + delta / mu
            + (2 * m + 1) * s / (1.0 - c)
            + 2.0 * math.sqrt(2000.0) * s * math.sqrt(m) / (1.0 - c) ** 2)


@dataclass
class TheoryScvxBudget:
    """Uniform T_k meeting the linear-convergence termination criterion.

    Evaluates the ceiling bound with the algorithm's (c_M, d_M) warm-start
    constants; k-independent by construction.
    """

    r_m_delta: float
    c_m: float
    d_m: float
    mu: float
    delta: float
    m: int
    c: float = 0.9
    c_l: float = 1.0
    ratio0: float = 1.0  # merit(s^0) / eps0, at most 1 for the default eps0

    def budget(self, k):
        alpha = alpha_scvx(self.mu, self.delta)
        ca = self.c * alpha
        chat = _c_hat(self.mu, self.delta, self.m, self.c)
        first = math.log(max(self.c_l * self.ratio0, 1e-300) / (1.0 - ca))
        second = math.log(
            (self.c_l * self.c_m + 36.0 * self.d_m * chat / (1.0 - ca) ** 2)
            / (1.0 - ca))
        return max(math.ceil(self.r_m_delta * max(first, second)), 1)


@dataclass
class TheoryCvxBudget:
    """Logarithmically growing T_k for the mu = 0 schedule."""

    r_m_delta: float
    r0: float = 0.1

    def budget(self, k):
        inner = 2.0 ** (5 + 2 * self.r0) + 1224.0 * (k + 3) ** (4 + 2 * self.r0)
        return max(math.ceil(self.r_m_delta * math.log(inner)), 1)


@dataclass
class MeritThresholdBudget:
    """Verification-mode termination: stop once the merit crosses the
    theoretical threshold eps0 (1 - c alpha)^{k+1}. Needs oracle access to
    the subproblem solution, so it is only usable in simulator mode.
    """

    eps0: float
    c: float
    alpha: float
    cap: int = 100000

    def threshold(self, k):
        return self.eps0 * (1.0 - self.c * self.alpha) ** (k + 1)


def inner_budget(k, policy):
    return policy.budget(k)


# ---------------------------------------------------------------------------
# schedules and traces

@dataclass
class OuterSchedule:
    """Everything the outer loop needs: delta, momentum mode, budgets."""

    delta: float
    mode: str  # "scvx" (constant alpha from mu) or "cvx" (recursive alpha)
    budget: object
    mu: float = 0.0
    eps0: float = 1.0
    c: float = 0.9
    r0: float = 0.1

    def __post_init__(self):
        if self.mode not in ("scvx", "cvx"):
            raise ValueError(f"unknown schedule mode: {self.mode}")
        if self.mode == "scvx" and self.mu <= 0:
            raise ValueError("strongly convex schedule requires mu > 0")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")

    @property
    def alpha(self):
        if self.mode != "scvx":
            raise ValueError("constant alpha only exists in scvx mode")
        return alpha_scvx(self.mu, self.delta)

    @property
    def mu_moreau(self):
        """Strong convexity of the Moreau envelope; equals delta * alpha^2."""
        if self.mode == "cvx":
            return 0.0
        a = self.alpha
        return self.delta * a * a

    def alpha_iter(self):
        if self.mode == "scvx":
            a = self.alpha
            while True:
                yield a
        else:
            a = ALPHA0_CVX
            while True:
                yield a
                a = alpha_cvx_next(a)


@dataclass
class MetricsConfig:
    x_star: np.ndarray | None = None
    u_star: float | None = None
    gap_mode: str = "scvx"  # "scvx": mean squared distance; "cvx": value gap
    record_inner_every: int = 0  # 0: outer records only
    record_states: bool = False  # keep warm/terminal states for certificates
    merit_oracle: object = None  # callable (k, subproblem) -> reference


@dataclass
class OuterRecord:
    k: int
    alpha_k: float
    T_k: int
    counters: Counters
    z: np.ndarray
    x_end: np.ndarray
    gap: float | None = None
    consensus: float = 0.0
    merit: float | None = None
    state_end: object = None
    state_warm: object = None


@dataclass
class InnerRecord:
    k: int
    t: int
    counters: Counters
    gap: float | None
    consensus: float


@dataclass
class RunTrace:
    x0: np.ndarray
    mode: str
    delta: float
    records: list = field(default_factory=list)
    inner_records: list = field(default_factory=list)
    initial_gap: float | None = None
    initial_consensus: float = 0.0
    totals: Counters = field(default_factory=Counters)
    meta: dict = field(default_factory=dict)

    @property
    def alphas(self):
        return [r.alpha_k for r in self.records]

    def gaps(self):
        return np.array([r.gap for r in self.records], dtype=float)


def _gap(X, problem, metrics):
    if metrics.x_star is None:
        return None
    if metrics.gap_mode == "cvx":
        if metrics.u_star is None:
            return None
        vals = [problem.value(X[i]) for i in range(X.shape[0])]
        return float(np.mean(vals) - metrics.u_star)
    diff = X - metrics.x_star[None, :]
    return float(np.sum(diff * diff) / X.shape[0])


def _consensus(X):
    xbar = np.mean(X, axis=0)
    return float(np.linalg.norm(X - xbar[None, :]))


def run_dcatalyst(problem, topology, inner, schedule, K, metrics=None):
    """Run K accelerated outer loops of `inner` on `problem`.

    Starts from rows of zeros with x^0 = z^0 = z^{-1}; use
    `run_dcatalyst_from` for an explicit starting point.
    """
    x0 = np.zeros((problem.m, problem.d))
    return run_dcatalyst_from(problem, topology, inner, schedule, K, x0, metrics)


def run_dcatalyst_from(problem, topology, inner, schedule, K, x0, metrics=None):
    metrics = metrics if metrics is not None else MetricsConfig()
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (problem.m, problem.d):
        raise ValueError("x0 must be m x d")

    trace = RunTrace(x0=x0.copy(), mode=schedule.mode, delta=schedule.delta)
    trace.initial_gap = _gap(x0, problem, metrics)
    trace.initial_consensus = _consensus(x0)

    alphas = schedule.alpha_iter()
    alpha_k = next(alphas)

    x = x0.copy()
    z = x0.copy()
    z_prev = x0.copy()
    state = None
    totals = trace.totals

    for k in range(K):
        sub = build_subproblem(problem, z, schedule.delta)
        if state is None:
            state, c_init = inner.init_state(sub, topology, x)
            totals += c_init
        else:
            state = inner.warm_start(state, z_new=z, z_old=z_prev, delta=schedule.delta)
        state_warm = state if metrics.record_states else None

        if isinstance(schedule.budget, MeritThresholdBudget):
            if metrics.merit_oracle is None:
                raise ValueError("merit-threshold termination needs a merit oracle")
            ref = metrics.merit_oracle(k, sub)
            thr = schedule.budget.threshold(k)
            t = 0
            while inner.merit(state, sub, ref) > thr and t < schedule.budget.cap:
                state, dc = inner.step(state, sub, topology)
                totals += dc
                t += 1
            T_k = t
        else:
            T_k = schedule.budget.budget(k)
            for t in range(T_k):
                state, dc = inner.step(state, sub, topology)
                totals += dc
                if metrics.record_inner_every and (t + 1) % metrics.record_inner_every == 0:
                    trace.inner_records.append(InnerRecord(
                        k=k, t=t + 1, counters=totals.copy(),
                        gap=_gap(state.x, problem, metrics),
                        consensus=_consensus(state.x)))

        x_new = state.x.copy()
        alpha_next = next(alphas)
        z_new = extrapolate(x_new, x, alpha_k, alpha_next)

        merit_val = None
        if metrics.merit_oracle is not None and not isinstance(schedule.budget, MeritThresholdBudget):
            merit_val = inner.merit(state, sub, metrics.merit_oracle(k, sub))

        trace.records.append(OuterRecord(
            k=k, alpha_k=alpha_k, T_k=T_k, counters=totals.copy(),
            z=z.copy(), x_end=x_new,
            gap=_gap(x_new, problem, metrics),
            consensus=_consensus(x_new),
            merit=merit_val,
            state_end=state if metrics.record_states else None,
            state_warm=state_warm))

        x, z_prev, z = x_new, z, z_new
        alpha_k = alpha_next

    trace.meta["delta"] = schedule.delta
    trace.meta["mode"] = schedule.mode
    return trace


def run_plain(problem, topology, inner, n_steps, metrics=None, record_every=1,
              stop_gap=None):
    """Run the bare inner algorithm on `problem` (non-accelerated baseline)."""
    metrics = metrics if metrics is not None else MetricsConfig()
    x0 = np.zeros((problem.m, problem.d))
    trace = RunTrace(x0=x0.copy(), mode="plain", delta=0.0)
    trace.initial_gap = _gap(x0, problem, metrics)
    trace.initial_consensus = _consensus(x0)
    state, c_init = inner.init_state(problem, topology, x0)
    trace.totals += c_init
    for t in range(1, n_steps + 1):
        state, dc = inner.step(state, problem, topology)
        trace.totals += dc
        if t % record_every == 0 or t == n_steps:
            g = _gap(state.x, problem, metrics)
            trace.inner_records.append(InnerRecord(
                k=0, t=t, counters=trace.totals.copy(), gap=g,
                consensus=_consensus(state.x)))
            if stop_gap is not None and g is not None and g <= stop_gap:
                break
    trace.meta["final_state"] = state
    return trace
