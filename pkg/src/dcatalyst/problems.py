"""Composite objectives split across agents: losses, regularizers, problem constants.

The objective is u(x) = (1/m) sum_i f_i(x) + r(x), each f_i held by one agent.
Finite-sum losses additionally expose per-component gradients f_ij with
f_i = (1/n) sum_j f_ij.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

# Shards below this many entries are densified for fast row access.
_DENSIFY_LIMIT = 5_000_000


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _as_shard(A):
    A = A if sp.issparse(A) else np.asarray(A, dtype=float)
    if sp.issparse(A) and A.shape[0] * A.shape[1] <= _DENSIFY_LIMIT:
        A = A.toarray()
    return A


class Regularizer:
    """Shared convex regularizer with a closed-form proximal operator.

    Kinds: ``zero``, ``l1`` (weight ``lam``), ``box`` (componentwise [lo, hi]).
    """

    def __init__(self, kind="zero", lam=0.0, lo=None, hi=None):
        if kind not in ("zero", "l1", "box"):
            raise ValueError(f"unknown regularizer kind: {kind}")
        if lam < 0:
            raise ValueError("l1 weight must be >= 0")
        self.kind = kind
        self.lam = float(lam)
        self.lo = lo
        self.hi = hi

    @staticmethod
    def zero():
        return Regularizer("zero")

    @staticmethod
    def l1(lam):
        return Regularizer("l1", lam=lam)

    @staticmethod
    def box(lo, hi):
        return Regularizer("box", lo=float(lo), hi=float(hi))

    def value(self, x):
        if self.kind == "zero":
            return 0.0
        if self.kind == "l1":
            return self.lam * float(np.sum(np.abs(x)))
        inside = np.all(x >= self.lo - 1e-12) and np.all(x <= self.hi + 1e-12)
        return 0.0 if inside else np.inf

    def prox(self, x, theta):
        """argmin_y theta*r(y) + 0.5*||y - x||^2, exact for every kind."""
        if theta < 0:
            raise ValueError("prox weight theta must be >= 0")
        x = np.asarray(x, dtype=float)
        if self.kind == "zero" or theta == 0.0:
            return x.copy()
        if self.kind == "l1":
            return soft_threshold(x, theta * self.lam)
        return np.clip(x, self.lo, self.hi)


class AgentLoss:
    """Base class for one agent's smooth loss.

    Subclasses implement value/gradient, smoothness and strong-convexity
    moduli, and (for finite-sum kinds) component gradients.
    """

    kind = "abstract"
    finite_sum = False

    def __init__(self, d, n=1, gamma=0.0):
        self.d = int(d)
        self.n = int(n)
        self.gamma = float(gamma)

    # accounting unit for one full gradient: n component grads if finite-sum
    @property
    def grad_cost(self):
        return self.n if self.finite_sum else 1

    def _check_dim(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"expected vector of dim {self.d}, got shape {x.shape}")
        return x

    def value_grad(self, x):
        raise NotImplementedError

    def value(self, x):
        return self.value_grad(x)[0]

    def grad(self, x):
        return self.value_grad(x)[1]

    def smoothness(self):
        raise NotImplementedError

    def strong_convexity(self):
        raise NotImplementedError

    def hessian_matvec(self, v):
        """v -> H v for losses with constant Hessian, else None."""
        return None

    def hessian_dense(self):
        """Constant Hessian as a dense matrix, or None."""
        return None

    # finite-sum interface
    def component_grad(self, j, x):
        raise NotImplementedError(f"{self.kind} loss has no components")

    def component_smoothness(self):
        raise NotImplementedError(f"{self.kind} loss has no components")

    # curvature estimators used for the global constants; split into a data
    # term (an operator) and a scalar offset so deviations can be bounded
    # separately (see estimate_constants).
    def curvature_matvec(self, v):
        raise NotImplementedError

    def curvature_offset(self):
        return self.gamma


class QuadraticLoss(AgentLoss):
    """f(x) = 0.5 x'Hx - b'x + c0 with symmetric PSD H."""

    kind = "quadratic"

    def __init__(self, H, b=None, c0=0.0):
        H = np.asarray(H, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError("H must be square")
        super().__init__(d=H.shape[0], n=1)
        self.H = 0.5 * (H + H.T)
        self.b = np.zeros(self.d) if b is None else np.asarray(b, dtype=float)
        self.c0 = float(c0)

    def value_grad(self, x):
        x = self._check_dim(x)
        Hx = self.H @ x
        val = 0.5 * float(x @ Hx) - float(self.b @ x) + self.c0
        return val, Hx - self.b

    def hessian_matvec(self, v):
        return self.H @ v

    def hessian_dense(self):
        return self.H

    def smoothness(self):
        return lambda_max_psd(lambda v: self.H @ v, self.d)

    def strong_convexity(self):
        return lambda_min_psd(lambda v: self.H @ v, self.d)

    def curvature_matvec(self, v):
        return self.H @ v

    def curvature_offset(self):
        return 0.0


class LogisticLoss(AgentLoss):
    """Regularized logistic loss over a shard (A, y), labels in {-1, +1}.

    f(x) = (1/n) sum_j log(1 + exp(-y_j <a_j, x>)) + (gamma/2) ||x||^2,
    evaluated in the overflow-safe log-sum-exp form.
    """

    kind = "logistic"
    finite_sum = True

    def __init__(self, A, y, gamma=0.0):
        A = _as_shard(A)
        y = np.asarray(y, dtype=float).ravel()
        if A.shape[0] != y.shape[0] or A.shape[0] < 1:
            raise ValueError("shard and labels disagree or shard empty")
        super().__init__(d=A.shape[1], n=A.shape[0], gamma=gamma)
        self.A = A
        self.y = y

    def _margins(self, x):
        return self.y * (self.A @ x)

    def value_grad(self, x):
        x = self._check_dim(x)
        t = self._margins(x)
        val = float(np.mean(np.logaddexp(0.0, -t)))
        s = expit(-t)  # sigmoid(-t), stable for large |t|
        g = -(self.A.T @ (s * self.y)) / self.n
        g = np.asarray(g).ravel()
        if self.gamma:
            val += 0.5 * self.gamma * float(x @ x)
            g = g + self.gamma * x
        return val, g

    def component_grad(self, j, x):
        a = self.A[j] if isinstance(self.A, np.ndarray) else self.A[j].toarray().ravel()
        t = self.y[j] * float(a @ x)
        g = (-expit(-t) * self.y[j]) * a
        if self.gamma:
            g = g + self.gamma * x
        return g

    def component_smoothness(self):
        if isinstance(self.A, np.ndarray):
            row_sq = np.einsum("ij,ij->i", self.A, self.A)
        else:
            row_sq = np.asarray(self.A.multiply(self.A).sum(axis=1)).ravel()
        return 0.25 * row_sq + self.gamma

    def smoothness(self):
        return lambda_max_psd(self.curvature_matvec, self.d) + self.gamma

    def strong_convexity(self):
        return self.gamma

    def curvature_matvec(self, v):
        # (1/(4n)) A'A v, a uniform bound on the data Hessian
        return np.asarray(self.A.T @ (self.A @ v)).ravel() / (4.0 * self.n)


class LinearRegressionLoss(AgentLoss):
    """Ridge least squares: f_ij(x) = 0.5 (<a_j, x> - y_j)^2 + (gamma/2)||x||^2."""

    kind = "linear-regression"
    finite_sum = True

    def __init__(self, A, y, gamma=0.0):
        A = _as_shard(A)
        y = np.asarray(y, dtype=float).ravel()
        if A.shape[0] != y.shape[0] or A.shape[0] < 1:
            raise ValueError("shard and labels disagree or shard empty")
        super().__init__(d=A.shape[1], n=A.shape[0], gamma=gamma)
        self.A = A
        self.y = y

    def value_grad(self, x):
        x = self._check_dim(x)
        res = self.A @ x - self.y
        val = 0.5 * float(res @ res) / self.n
        g = np.asarray(self.A.T @ res).ravel() / self.n
        if self.gamma:
            val += 0.5 * self.gamma * float(x @ x)
            g = g + self.gamma * x
        return val, g

    def component_grad(self, j, x):
        a = self.A[j] if isinstance(self.A, np.ndarray) else self.A[j].toarray().ravel()
        g = (float(a @ x) - self.y[j]) * a
        if self.gamma:
            g = g + self.gamma * x
        return g

    def component_smoothness(self):
        if isinstance(self.A, np.ndarray):
            row_sq = np.einsum("ij,ij->i", self.A, self.A)
        else:
            row_sq = np.asarray(self.A.multiply(self.A).sum(axis=1)).ravel()
        return row_sq + self.gamma

    def hessian_matvec(self, v):
        return np.asarray(self.A.T @ (self.A @ v)).ravel() / self.n + self.gamma * v

    def hessian_dense(self):
        if not hasattr(self, "_H"):
            AtA = self.A.T @ self.A
            if sp.issparse(AtA):
                AtA = AtA.toarray()
            self._H = np.asarray(AtA) / self.n + self.gamma * np.eye(self.d)
        return self._H

    def smoothness(self):
        return lambda_max_psd(self.hessian_matvec, self.d)

    def strong_convexity(self):
        return lambda_min_psd(self.hessian_matvec, self.d)

    def curvature_matvec(self, v):
        return np.asarray(self.A.T @ (self.A @ v)).ravel() / self.n

    def curvature_offset(self):
        return self.gamma


class HuberRegularizedLinreg(AgentLoss):
    """Least squares with a smooth Huber penalty on each coordinate.

    f(x) = sum_j (<a_j, x> - y_j)^2 + sum_k h(x_k), where
    h(t) = hgamma * t^2 for |t| < lam/(2*hgamma) and
    h(t) = lam * (|t| - lam/(4*hgamma)) otherwise. The two branches match in
    value and derivative at the breakpoint.
    """

    kind = "huber-regularized-linreg"

    def __init__(self, A, y, lam, hgamma):
        A = _as_shard(A)
        y = np.asarray(y, dtype=float).ravel()
        if A.shape[0] != y.shape[0] or A.shape[0] < 1:
            raise ValueError("shard and labels disagree or shard empty")
        if lam < 0 or hgamma <= 0:
            raise ValueError("need lam >= 0 and hgamma > 0")
        super().__init__(d=A.shape[1], n=A.shape[0])
        self.A = A
        self.y = y
        self.lam = float(lam)
        self.hgamma = float(hgamma)

    def _huber(self, x):
        cut = self.lam / (2.0 * self.hgamma)
        absx = np.abs(x)
        quad = absx < cut
        vals = np.where(quad, self.hgamma * x * x,
                        self.lam * (absx - self.lam / (4.0 * self.hgamma)))
        grads = np.where(quad, 2.0 * self.hgamma * x, self.lam * np.sign(x))
        return float(np.sum(vals)), grads

    def value_grad(self, x):
        x = self._check_dim(x)
        res = self.A @ x - self.y
        hval, hgrad = self._huber(x)
        val = float(res @ res) + hval
        g = 2.0 * np.asarray(self.A.T @ res).ravel() + hgrad
        return val, g

    def smoothness(self):
        return 2.0 * lambda_max_psd(self._ls_matvec, self.d) + 2.0 * self.hgamma

    def strong_convexity(self):
        # Huber curvature can vanish, so only the data term counts.
        return 2.0 * lambda_min_psd(self._ls_matvec, self.d)

    def _ls_matvec(self, v):
        return np.asarray(self.A.T @ (self.A @ v)).ravel()

    def curvature_matvec(self, v):
        return 2.0 * self._ls_matvec(v)

    def curvature_offset(self):
        return 2.0 * self.hgamma


class ProxShiftedLoss(AgentLoss):
    """Agent loss plus a proximal term (delta/2)||x - center||^2."""

    def __init__(self, base, delta, center):
        if delta < 0:
            raise ValueError("delta must be >= 0")
        center = np.asarray(center, dtype=float)
        if center.shape != (base.d,):
            raise ValueError("center dimension mismatch")
        super().__init__(d=base.d, n=base.n, gamma=base.gamma)
        self.base = base
        self.delta = float(delta)
        self.center = center
        self.finite_sum = base.finite_sum
        self.kind = base.kind + "+prox"

    def value_grad(self, x):
        x = self._check_dim(x)
        val, g = self.base.value_grad(x)
        diff = x - self.center
        return val + 0.5 * self.delta * float(diff @ diff), g + self.delta * diff

    def component_grad(self, j, x):
        return self.base.component_grad(j, x) + self.delta * (x - self.center)

    def component_smoothness(self):
        return self.base.component_smoothness() + self.delta

    def hessian_matvec(self, v):
        base = self.base.hessian_matvec(v)
        return None if base is None else base + self.delta * v

    def hessian_dense(self):
        base = self.base.hessian_dense()
        return None if base is None else base + self.delta * np.eye(self.d)

    def smoothness(self):
        return self.base.smoothness() + self.delta

    def strong_convexity(self):
        return self.base.strong_convexity() + self.delta

    def curvature_matvec(self, v):
        return self.base.curvature_matvec(v)

    def curvature_offset(self):
        return self.base.curvature_offset() + self.delta


# ---------------------------------------------------------------------------
# spectral helpers (power iteration; d may be too large for dense eigensolves)

def lambda_max_psd(matvec, d, tol=1e-10, max_iter=10000):
    """Largest eigenvalue of a symmetric PSD operator by power iteration.

    Stops when the eigen-residual ||Mv - lam v|| <= tol * max(lam, 1); the
    eigenvalue error is then quadratically smaller than tol.
    """
    if d == 1:
        return float(matvec(np.ones(1))[0])
    v = np.linspace(1.0, 2.0, d)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = matvec(v)
        lam = float(v @ w)
        resid = np.linalg.norm(w - lam * v)
        if resid <= tol * max(abs(lam), 1.0):
            break
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    return max(lam, 0.0)

def lambda_min_psd(matvec, d, tol=1e-10, max_iter=10000):
    """Smallest eigenvalue of a symmetric PSD operator via a spectral shift."""
    s = lambda_max_psd(matvec, d, tol, max_iter)
    if s == 0.0:
        return 0.0
    t = lambda_max_psd(lambda v: s * v - matvec(v), d, tol, max_iter)
    return max(s - t, 0.0)

def spectral_norm_sym(matvec, d, tol=1e-10, max_iter=10000):
    """2-norm of a symmetric (possibly indefinite) operator.

    Runs power iteration on M^2, which is PSD and immune to +/- eigenvalue
    ties of M itself.
    """
    lam2 = lambda_max_psd(lambda v: matvec(matvec(v)), d, tol, max_iter)
    return float(np.sqrt(max(lam2, 0.0)))


class ProblemConstants:
    """Smoothness/convexity moduli and the similarity constant for a problem.

    Condition numbers are exposed as properties and raise when the relevant
    modulus vanishes.
    """

    def __init__(self, L, mu, L_max, mu_min, L_bar_max=None, beta=None):
        self.L = float(L)
        self.mu = float(mu)
        self.L_max = float(L_max)
        self.mu_min = float(mu_min)
        self.L_bar_max = None if L_bar_max is None else float(L_bar_max)
        self.beta = None if beta is None else float(beta)

    @property
    def kappa_g(self):
        if self.mu <= 0:
            raise ValueError("undefined condition number: mu = 0")
        return self.L / self.mu

    @property
    def kappa_ell(self):
        if self.mu_min <= 0:
            raise ValueError("undefined condition number: mu_min = 0")
        return self.L_max / self.mu_min

    @property
    def kappa_s(self):
        if self.L_bar_max is None:
            raise ValueError("kappa_s needs finite-sum losses")
        if self.mu_min <= 0:
            raise ValueError("undefined condition number: mu_min = 0")
        return self.L_bar_max / self.mu_min

    def shifted(self, delta):
        """Constants of the problem with (delta/2)||x - z_i||^2 added per agent."""
        return ProblemConstants(
            L=self.L + delta,
            mu=self.mu + delta,
            L_max=self.L_max + delta,
            mu_min=self.mu_min + delta,
            L_bar_max=None if self.L_bar_max is None else self.L_bar_max + delta,
            beta=self.beta,
        )

    def __repr__(self):
        return (f"ProblemConstants(L={self.L:.6g}, mu={self.mu:.6g}, "
                f"L_max={self.L_max:.6g}, mu_min={self.mu_min:.6g}, "
                f"L_bar_max={self.L_bar_max}, beta={self.beta})")


def estimate_constants(agents):
    """Estimate (L, mu, L_max, mu_min, L_bar_max, beta) for a set of agents.

    Losses with constant Hessians give exact spectral quantities; for the
    rest, conservative curvature bounds are used (an upper bound on beta is
    all the similarity-based methods need to stay valid).
    """
    m = len(agents)
    d = agents[0].d
    L_i = np.array([a.smoothness() for a in agents])
    mu_i = np.array([a.strong_convexity() for a in agents])
    L_max = float(np.max(L_i))
    mu_min = float(np.min(mu_i))

    exact = all(a.hessian_matvec(np.zeros(d)) is not None for a in agents)

    def mean_curv(v):
        return sum(a.curvature_matvec(v) for a in agents) / m

    offsets = np.array([a.curvature_offset() for a in agents])

    if exact:
        def mean_hess(v):
            return sum(a.hessian_matvec(v) for a in agents) / m
        L = lambda_max_psd(mean_hess, d)
        mu = lambda_min_psd(mean_hess, d)
        beta = max(
            spectral_norm_sym(
                lambda v, ai=a: ai.hessian_matvec(v) - mean_hess(v), d)
            for a in agents
        ) if m > 1 else 0.0
    else:
        L = lambda_max_psd(mean_curv, d) + float(np.mean(offsets))
        mu = mu_min
        dev = max(
            spectral_norm_sym(
                lambda v, ai=a: ai.curvature_matvec(v) - mean_curv(v), d)
            for a in agents
        ) if m > 1 else 0.0
        beta = dev + float(np.max(np.abs(offsets - np.mean(offsets))))

    mu = min(mu, L)

    L_bar_max = None
    if all(a.finite_sum for a in agents):
        L_bar_max = float(max(np.mean(a.component_smoothness()) for a in agents))

    return ProblemConstants(L, mu, L_max, mu_min, L_bar_max, beta)


class CompositeProblem:
    """Problem u(x) = (1/m) sum_i f_i(x) + r(x) over m agents."""

    def __init__(self, agents, regularizer=None, constants=None):
        if len(agents) < 1:
            raise ValueError("need at least one agent")
        d = agents[0].d
        if any(a.d != d for a in agents):
            raise ValueError("all agents must share the dimension")
        self.agents = list(agents)
        self.regularizer = regularizer if regularizer is not None else Regularizer.zero()
        self.constants = constants if constants is not None else estimate_constants(self.agents)

    @property
    def m(self):
        return len(self.agents)

    @property
    def d(self):
        return self.agents[0].d

    @property
    def L(self):
        return self.constants.L

    @property
    def mu(self):
        return self.constants.mu

    @property
    def beta(self):
        return self.constants.beta

    def smooth_value_grad(self, x):
        """Value and gradient of f = (1/m) sum_i f_i at x."""
        val = 0.0
        g = np.zeros(self.d)
        for a in self.agents:
            v, gi = a.value_grad(x)
            val += v
            g += gi
        return val / self.m, g / self.m

    def value(self, x):
        fval, _ = self.smooth_value_grad(x)
        return fval + self.regularizer.value(x)

    def grad_matrix(self, X):
        """Stacked per-agent gradients: row i is grad f_i(X[i])."""
        return np.stack([a.grad(X[i]) for i, a in enumerate(self.agents)])

    def prox(self, x, theta):
        return self.regularizer.prox(x, theta)
