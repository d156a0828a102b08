"""Experiment driver: configs, data ingestion, instance synthesis, traces.

Configs are INI files with [problem], [topology], [algorithm], [output] and
[run] sections (see README for the schema). A run is deterministic given
(config, seed); CSV output is byte-identical across reruns.
"""

from __future__ import annotations

import configparser
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .inner_pmgt import PmgtLsvrg
from .inner_sonata import Sonata
from .inner_puda import Puda
from .network import Topology, extra_triple, prox_ed_triple
from .oracle import MoreauOracle, fista_solve
from .outer import (FixedBudget, MetricsConfig, OuterSchedule, PracticalBudget,
                    PracticalCvxBudget, TheoryCvxBudget, TheoryScvxBudget,
                    run_dcatalyst_from, run_plain)
from .problems import (CompositeProblem, HuberRegularizedLinreg,
                       LinearRegressionLoss, LogisticLoss, QuadraticLoss,
                       Regularizer, lambda_max_psd)

TRACE_COLUMNS = ["outer_k", "inner_t", "comm_rounds_cum", "grad_components_cum",
                 "prox_cum", "gap", "consensus_err", "merit", "wallclock_ms"]

GAP_TARGETS = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8]


# ---------------------------------------------------------------------------
# data ingestion

@dataclass
class Dataset:
    features: sp.csr_matrix
    labels: np.ndarray
    d: int

    @property
    def n(self):
        return self.features.shape[0]


def _map_labels(raw):
    vals = set(np.unique(raw).tolist())
    if vals <= {-1.0, 1.0}:
        return raw.astype(float)
    if vals <= {0.0, 1.0}:
        return np.where(raw > 0.5, 1.0, -1.0)
    # multi-class digits: even -> +1, odd -> -1
    return np.where(np.mod(np.rint(raw), 2) == 0, 1.0, -1.0)


def parse_libsvm(path):
    """Sparse row-major dataset from an svmlight-format text file.

    1-based feature indices become 0-based; d is the largest index seen.
    Labels are mapped to {-1, +1}: binary {0,1} by sign, multi-class digits
    by parity (even -> +1, odd -> -1).
    """
    rows, cols, vals, labels = [], [], [], []
    d = 0
    with open(path) as fh:
        any_line = False
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            any_line = True
            parts = line.split()
            try:
                labels.append(float(parts[0]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad label {parts[0]!r}") from exc
            for tok in parts[1:]:
                try:
                    idx, val = tok.split(":")
                    idx = int(idx)
                    val = float(val)
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: bad feature {tok!r}") from exc
                if idx < 1:
                    raise ValueError(f"{path}:{lineno}: indices are 1-based, got {idx}")
                rows.append(len(labels) - 1)
                cols.append(idx - 1)
                vals.append(val)
                d = max(d, idx)
    if not any_line:
        raise ValueError(f"{path}: empty dataset")
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(len(labels), d))
    return Dataset(features=mat, labels=_map_labels(np.array(labels)), d=d)


def write_libsvm(path, features, labels):
    """Writer matching parse_libsvm (round-trips exactly at %.17g)."""
    features = sp.csr_matrix(features)
    with open(path, "w") as fh:
        for i in range(features.shape[0]):
            row = features.getrow(i)
            toks = [f"{labels[i]:g}"]
            for j, v in zip(row.indices, row.data):
                toks.append(f"{j + 1}:{v:.17g}")
            fh.write(" ".join(toks) + "\n")


def partition(dataset, m, seed):
    """Random permutation then contiguous split; shard sizes differ by <= 1."""
    if dataset.n < m:
        raise ValueError("dataset smaller than the agent count")
    perm = np.random.default_rng(seed).permutation(dataset.n)
    shards = []
    for idx in np.array_split(perm, m):
        shards.append(Dataset(features=dataset.features[idx],
                              labels=dataset.labels[idx], d=dataset.d))
    return shards


# ---------------------------------------------------------------------------
# synthetic instances

def conditioned_quadratics(m, d, mu0, L0, beta, seed, target_scale=1.0,
                           disagreement=1.0):
    """Quadratic agents with exact mean spectrum [mu0, L0] and exact beta.

    Rank-one perturbations of norm `beta` act on the mean Hessian's top
    eigendirection with signs summing to zero, so L, mu, kappa_g are those
    of the unperturbed mean and the similarity constant equals beta exactly.
    The aggregate minimizer is placed at a point of norm ~ target_scale
    (independent of the conditioning); zero-sum offsets keep the agents'
    local minimizers apart.
    """
    if beta > L0:
        raise ValueError("beta > L0 breaks agent convexity")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    Hbar = Q @ np.diag(np.linspace(mu0, L0, d)) @ Q.T
    P = np.outer(Q[:, -1], Q[:, -1])
    signs = np.array([1.0 if i % 2 == 0 else -1.0 for i in range(m)])
    if m % 2 == 1:
        signs[-1] = 0.0
    x_target = target_scale * rng.standard_normal(d) / math.sqrt(d)
    eps = disagreement * rng.standard_normal((m, d))
    eps -= eps.mean(axis=0, keepdims=True)
    agents = []
    for i in range(m):
        H = Hbar + signs[i] * beta * P
        # mean of H_i x_target is Hbar x_target only if the sign pattern is
        # balanced; build b from the agent's own H to keep x_target exact
        agents.append(QuadraticLoss(H, b=H @ x_target + eps[i]))
    return agents


def synth_similarity_sweep(m, d, n_list, seed, beta_scale=1.0, mu0=1.0, L0=None,
                           reg=None):
    """One problem per n in n_list, with similarity shrinking as 1/sqrt(n).

    All instances share the same mean Hessian (spectrum [mu0, L0]) and the
    same perturbation directions drawn once from `seed`; instance n scales
    the perturbations by 1/sqrt(n), so beta = beta_scale/sqrt(n) exactly and
    kappa_g is identical across the sweep.
    """
    L0 = 10.0 * mu0 if L0 is None else L0
    problems = []
    for n in n_list:
        scale = beta_scale / math.sqrt(n)
        agents = conditioned_quadratics(m, d, mu0, L0, scale, seed)
        problems.append(CompositeProblem(
            agents, reg if reg is not None else Regularizer.zero()))
    return problems


def synth_conditioning_sweep(m, d, kappa_list, beta_over_mu, seed, reg=None):
    """One problem per kappa, varying mu with L = 1 and beta/mu fixed."""
    problems = []
    for kappa in kappa_list:
        mu0 = 1.0 / kappa
        agents = conditioned_quadratics(m, d, mu0, 1.0, beta_over_mu * mu0, seed)
        problems.append(CompositeProblem(
            agents, reg if reg is not None else Regularizer.zero()))
    return problems


def synth_classification(n, d, seed, noise=0.3, decay=0.0, rng=None, w=None):
    """Linearly separable-ish features with +/-1 labels.

    decay > 0 scales feature j by (j+1)^-decay, producing ill-conditioned
    spectra (flat directions that keep accelerated methods in their
    sublinear regime).
    """
    rng = np.random.default_rng(seed) if rng is None else rng
    A = rng.standard_normal((n, d))
    if decay > 0:
        A = A * (np.arange(1, d + 1, dtype=float) ** (-decay))[None, :]
    else:
        A = A / math.sqrt(d)
    w = rng.standard_normal(d) if w is None else w
    y = np.sign(A @ w + noise * rng.standard_normal(n))
    y[y == 0] = 1.0
    return A, y


def synth_regression(n, d, seed, noise=0.1, row_scales=None):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, d)) / math.sqrt(d)
    if row_scales is not None:
        A = A * np.asarray(row_scales)[:, None]
    w = rng.standard_normal(d)
    y = A @ w + noise * rng.standard_normal(n)
    return A, y


# ---------------------------------------------------------------------------
# configuration

@dataclass
class ExperimentConfig:
    problem: dict
    topology: dict
    algorithm: dict
    output: dict
    seed: int = 0
    oracle_tol: float = 1e-10

    @staticmethod
    def from_ini(path_or_text):
        parser = configparser.ConfigParser()
        text = path_or_text
        if "\n" not in str(path_or_text) and Path(path_or_text).exists():
            text = Path(path_or_text).read_text()
        parser.read_string(text)
        sections = {name: dict(parser[name]) for name in parser.sections()}
        run = sections.pop("run", {})
        return ExperimentConfig(
            problem=sections.get("problem", {}),
            topology=sections.get("topology", {}),
            algorithm=sections.get("algorithm", {}),
            output=sections.get("output", {}),
            seed=int(run.get("seed", 0)),
            oracle_tol=float(run.get("oracle_tol", 1e-10)),
        )


def _build_regularizer(pcfg):
    lam = float(pcfg.get("lambda_l1", 0.0))
    if "box" in pcfg:
        lo, hi = (float(t) for t in pcfg["box"].split(","))
        return Regularizer.box(lo, hi)
    return Regularizer.l1(lam) if lam > 0 else Regularizer.zero()


def build_problem(cfg):
    """Problem instance from the [problem] section (seeded by [run] seed)."""
    pcfg = cfg.problem
    kind = pcfg.get("kind", "logistic")
    m = int(cfg.topology.get("m", 5))
    seed = cfg.seed
    reg = _build_regularizer(pcfg)

    if kind == "quadratic":
        agents = conditioned_quadratics(
            m, int(pcfg.get("d", 4)),
            mu0=float(pcfg.get("mu", 1.0)),
            L0=float(pcfg.get("l", 10.0)),
            beta=float(pcfg.get("beta", 2.0)),
            seed=seed)
        return CompositeProblem(agents, reg)

    if "data" in pcfg:
        dataset = parse_libsvm(pcfg["data"])
        shards = partition(dataset, m, seed)
        packs = [(s.features, s.labels) for s in shards]
        d = dataset.d
    else:
        n = int(pcfg.get("n", 20))
        d = int(pcfg.get("d", 10))
        decay = float(pcfg.get("decay", 0.0))
        rng = np.random.default_rng(seed)
        w = rng.standard_normal(d)  # shared ground truth across agents
        packs = []
        for i in range(m):
            if kind == "logistic":
                packs.append(synth_classification(
                    n, d, seed, noise=float(pcfg.get("noise", 0.3)),
                    decay=decay, rng=rng, w=w))
            else:
                packs.append(synth_regression(n, d, seed * 1000 + i))

    gamma_spec = pcfg.get("gamma", "0")
    if str(gamma_spec).startswith("auto:"):
        kappa = float(str(gamma_spec).split(":")[1])
        gamma = _gamma_for_kappa(kind, packs, kappa)
    else:
        gamma = float(gamma_spec)

    agents = []
    for A, y in packs:
        if kind == "logistic":
            agents.append(LogisticLoss(A, y, gamma=gamma))
        elif kind == "linreg":
            agents.append(LinearRegressionLoss(A, y, gamma=gamma))
        elif kind == "huber":
            agents.append(HuberRegularizedLinreg(
                A, y, lam=float(pcfg.get("huber_lambda", 0.5)),
                hgamma=float(pcfg.get("huber_gamma", 0.5))))
        else:
            raise ValueError(f"unknown problem kind: {kind}")
    return CompositeProblem(agents, reg)


def _gamma_for_kappa(kind, packs, kappa):
    """Ridge weight making the global condition number equal kappa."""
    if kappa <= 1:
        raise ValueError("kappa must exceed 1")
    m = len(packs)
    d = packs[0][0].shape[1]
    coef = 0.25 if kind == "logistic" else 1.0

    def mean_curv(v):
        out = np.zeros(d)
        for A, _ in packs:
            out += coef * np.asarray(A.T @ (A @ v)).ravel() / A.shape[0]
        return out / m

    s = lambda_max_psd(mean_curv, d)
    return s / (kappa - 1.0)


def build_topology(cfg):
    tcfg = cfg.topology
    return Topology.build(m=int(tcfg.get("m", 5)),
                          p=float(tcfg.get("p", 0.5)),
                          seed=int(tcfg.get("seed", cfg.seed)))


def build_inner(cfg, problem, topology):
    acfg = cfg.algorithm
    kind = acfg.get("inner", "sonata-l")
    mixing = acfg.get("mixing", "1")
    mixing = mixing if mixing == "auto" else int(mixing)
    if kind == "sonata-l":
        return Sonata(variant="L", mixing_rounds=mixing)
    if kind == "sonata-f":
        return Sonata(variant="F", mixing_rounds=mixing)
    if kind == "puda-proxed":
        return Puda(prox_ed_triple(topology.W))
    if kind == "puda-extra":
        return Puda(extra_triple(topology.W))
    if kind == "pmgt-lsvrg":
        n_fm = acfg.get("n_fm")
        return PmgtLsvrg(master_seed=int(acfg.get("inner_seed", cfg.seed)),
                         n_fm=None if n_fm in (None, "auto") else int(n_fm))
    raise ValueError(f"unknown inner algorithm: {kind}")


def _resolve_delta(acfg, inner, problem):
    spec = acfg.get("delta", "policy")
    if spec == "policy":
        return inner.delta_policy(problem)
    return float(spec)


def _budget_ratio(acfg, inner, problem, delta):
    spec = acfg.get("budget_ratio", "auto")
    if spec != "auto":
        return float(spec)
    c = problem.constants
    if c.mu <= 0:
        raise ValueError("budget_ratio = auto needs mu > 0; "
                         "set it explicitly or use budget = practical-cvx")
    if getattr(inner, "variant", None) == "F":
        return max(c.beta / c.mu, math.e)
    return max(c.L / c.mu, math.e)


def build_schedule(cfg, inner, problem, topology):
    acfg = cfg.algorithm
    delta = _resolve_delta(acfg, inner, problem)
    mode = acfg.get("schedule", "scvx")
    c = float(acfg.get("c", 0.9))
    r0 = float(acfg.get("r0", 0.1))
    coef = float(acfg.get("budget_coef", 1.0))
    policy_name = acfg.get("budget", "practical")

    from .outer import build_subproblem
    sub0 = build_subproblem(problem, np.zeros((problem.m, problem.d)), delta)
    if policy_name == "practical":
        budget = PracticalBudget(ratio=_budget_ratio(acfg, inner, problem, delta),
                                 coef=coef)
    elif policy_name == "practical-cvx":
        budget = PracticalCvxBudget(coef=coef)
    elif policy_name == "practical-vr":
        budget = PracticalBudget(ratio=_budget_ratio(acfg, inner, problem, delta),
                                 coef=0.5 * coef)
    elif policy_name == "theory":
        c_m, d_m = inner.warm_start_constants(sub0, delta)
        budget = TheoryScvxBudget(r_m_delta=inner.rate(sub0), c_m=c_m, d_m=d_m,
                                  mu=problem.mu, delta=delta,
                                  m=problem.m, c=c)
    elif policy_name == "theory-cvx":
        budget = TheoryCvxBudget(r_m_delta=inner.rate(sub0), r0=r0)
    elif policy_name == "fixed":
        budget = FixedBudget(int(acfg.get("budget_t", 5)))
    else:
        raise ValueError(f"unknown budget policy: {policy_name}")
    return OuterSchedule(delta=delta, mode=mode, budget=budget,
                         mu=problem.mu if mode == "scvx" else 0.0,
                         eps0=float(acfg.get("eps0", 1.0)) if acfg.get("eps0", "auto") != "auto" else 1.0,
                         c=c, r0=r0)


# ---------------------------------------------------------------------------
# experiment runner

def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def trace_to_rows(trace, wallclock=False, elapsed_ms=0.0):
    """Flatten a run trace into TraceRow tuples (initial record first)."""
    rows = [dict(outer_k=0, inner_t=0, comm_rounds_cum=0, grad_components_cum=0,
                 prox_cum=0, gap=trace.initial_gap,
                 consensus_err=trace.initial_consensus, merit=None,
                 wallclock_ms=elapsed_ms if wallclock else 0.0)]
    inner_by_k = {}
    for rec in trace.inner_records:
        inner_by_k.setdefault(rec.k, []).append(rec)
    for rec in trace.records:
        for ir in inner_by_k.get(rec.k, []):
            if ir.t < rec.T_k:
                rows.append(dict(outer_k=rec.k, inner_t=ir.t,
                                 comm_rounds_cum=ir.counters.comm_rounds,
                                 grad_components_cum=ir.counters.grad_components,
                                 prox_cum=ir.counters.prox_calls,
                                 gap=ir.gap, consensus_err=ir.consensus,
                                 merit=None,
                                 wallclock_ms=elapsed_ms if wallclock else 0.0))
        rows.append(dict(outer_k=rec.k, inner_t=rec.T_k,
                         comm_rounds_cum=rec.counters.comm_rounds,
                         grad_components_cum=rec.counters.grad_components,
                         prox_cum=rec.counters.prox_calls,
                         gap=rec.gap, consensus_err=rec.consensus,
                         merit=rec.merit,
                         wallclock_ms=elapsed_ms if wallclock else 0.0))
    if not trace.records:
        for ir in trace.inner_records:  # plain (non-accelerated) runs
            rows.append(dict(outer_k=ir.k, inner_t=ir.t,
                             comm_rounds_cum=ir.counters.comm_rounds,
                             grad_components_cum=ir.counters.grad_components,
                             prox_cum=ir.counters.prox_calls,
                             gap=ir.gap, consensus_err=ir.consensus,
                             merit=None,
                             wallclock_ms=elapsed_ms if wallclock else 0.0))
    return rows


def rows_to_csv_text(rows):
    buf = io.StringIO()
    buf.write(",".join(TRACE_COLUMNS) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row[c]) for c in TRACE_COLUMNS) + "\n")
    return buf.getvalue()


def cost_to_targets(rows, targets=GAP_TARGETS):
    """First cumulative communication/gradient counts reaching each gap target."""
    out = {}
    for target in targets:
        comm = grad = None
        for row in rows:
            if row["gap"] is not None and row["gap"] <= target:
                comm = row["comm_rounds_cum"]
                grad = row["grad_components_cum"]
                break
        out[f"{target:.0e}"] = {"comm_rounds": comm, "grad_components": grad}
    return out


def fit_loglog_slope(x, y):
    """Least-squares slope of log10(y) against log10(x); nan if degenerate."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = (x > 0) & (y > 0)
    if mask.sum() < 2:
        return float("nan")
    lx, ly = np.log10(x[mask]), np.log10(y[mask])
    lx = lx - lx.mean()
    den = float(np.sum(lx * lx))
    if den == 0.0:
        return float("nan")
    return float(np.sum(lx * (ly - ly.mean())) / den)


def fit_semilog_slope(k, gap):
    """Least-squares slope of ln(gap) against k; nan if degenerate."""
    k = np.asarray(k, dtype=float)
    gap = np.asarray(gap, dtype=float)
    mask = gap > 0
    if mask.sum() < 2:
        return float("nan")
    kk = k[mask] - k[mask].mean()
    lg = np.log(gap[mask])
    den = float(np.sum(kk * kk))
    if den == 0.0:
        return float("nan")
    return float(np.sum(kk * (lg - lg.mean())) / den)


@dataclass
class ExperimentResult:
    trace: object
    rows: list
    csv_text: str
    summary: dict
    problem: object = None
    topology: object = None
    schedule: object = None
    reference: object = None
    moreau_rows: list = field(default_factory=list)


def run_experiment(cfg, write=True):
    """Execute one configured experiment; returns rows, CSV text and summary."""
    t0 = time.perf_counter()
    problem = build_problem(cfg)
    topology = build_topology(cfg)
    inner = build_inner(cfg, problem, topology)
    acfg = cfg.algorithm
    ocfg = cfg.output
    K = int(acfg.get("k", 20))
    metric_set = [t.strip() for t in ocfg.get("metrics", "gap,consensus").split(",")]

    ref = None
    if "gap" in metric_set:
        ref = fista_solve(problem, tol=cfg.oracle_tol)
        if not ref.converged:
            raise RuntimeError(
                f"oracle reference did not converge (residual {ref.residual:.3e})")

    mode = acfg.get("schedule", "scvx")
    gap_mode = "cvx" if mode == "cvx" else "scvx"
    record = ocfg.get("record", "outer")
    stride = int(record.split(":")[1]) if record.startswith("inner") else 0
    metrics = MetricsConfig(x_star=None if ref is None else ref.x_star,
                            u_star=None if ref is None else ref.u_star,
                            gap_mode=gap_mode, record_inner_every=stride)
    if "merit" in metric_set:
        merit_refs = {}

        def merit_oracle(k, sub):
            if k not in merit_refs:
                merit_refs[k] = inner.merit_reference(sub, topology)
            return merit_refs[k]

        metrics.merit_oracle = merit_oracle

    accelerated = acfg.get("accelerated", "true").lower() != "false"
    if accelerated:
        schedule = build_schedule(cfg, inner, problem, topology)
        x0 = np.zeros((problem.m, problem.d))
        trace = run_dcatalyst_from(problem, topology, inner, schedule, K, x0, metrics)
    else:
        schedule = None
        stop_gap = float(ocfg["stop_gap"]) if "stop_gap" in ocfg else None
        trace = run_plain(problem, topology, inner, n_steps=K, metrics=metrics,
                          record_every=max(stride, 1), stop_gap=stop_gap)

    wallclock = ocfg.get("wallclock", "false").lower() == "true"
    elapsed_ms = (time.perf_counter() - t0) * 1000.0
    rows = trace_to_rows(trace, wallclock=wallclock, elapsed_ms=elapsed_ms)
    csv_text = rows_to_csv_text(rows)

    summary = {
        "final_gap": rows[-1]["gap"],
        "targets": cost_to_targets(rows),
        "totals": {"comm_rounds": trace.totals.comm_rounds,
                   "grad_components": trace.totals.grad_components,
                   "prox_calls": trace.totals.prox_calls},
        "oracle": (None if ref is None else
                   {"residual": ref.residual, "iterations": ref.iterations}),
        "mode": trace.mode,
        "delta": trace.delta,
    }
    if accelerated and len(trace.records) >= 10 and trace.records[0].gap is not None:
        ks = np.arange(len(trace.records))
        slope = fit_semilog_slope(
            ks, np.array([r.gap for r in trace.records], dtype=float))
        if math.isfinite(slope):
            summary["gap_slope_per_outer"] = slope

    result = ExperimentResult(trace=trace, rows=rows, csv_text=csv_text,
                              summary=summary, problem=problem,
                              topology=topology, schedule=schedule,
                              reference=ref)

    if "moreau" in metric_set and mode == "cvx" and schedule is not None:
        result.moreau_rows = moreau_metric_series(problem, trace, schedule.delta)
        ks = np.array([k for k, _ in result.moreau_rows], dtype=float)
        vals = np.array([v for _, v in result.moreau_rows], dtype=float)
        window = (ks >= 5)
        if window.sum() >= 3:
            slope = fit_loglog_slope(ks[window] + 2.0, vals[window])
            if math.isfinite(slope):
                summary["moreau_slope_loglog"] = slope

    if write and "csv" in ocfg:
        path = Path(ocfg["csv"])
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(csv_text)
        path.with_suffix(path.suffix + ".summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n")
        if result.moreau_rows:
            mpath = path.with_suffix(path.suffix + ".moreau.csv")
            with open(mpath, "w") as fh:
                fh.write("outer_k,moreau_metric\n")
                for k, v in result.moreau_rows:
                    fh.write(f"{k},{repr(v)}\n")
    return result


def moreau_metric_series(problem, trace, delta, tol=1e-12):
    """(1/(2 delta m)) sum_i ||grad M(x_i^k)||^2 for each outer record."""
    oracle = MoreauOracle(problem, delta, tol=tol)
    series = []
    for rec in trace.records:
        total = 0.0
        for i in range(problem.m):
            g = oracle.grad(rec.x_end[i])
            total += float(g @ g)
        series.append((rec.k, total / (2.0 * delta * problem.m)))
    return series


def run_sweep(configs, labels=None, target=1e-4, x_values=None):
    """Run several experiments and collect communications-to-target points.

    Returns (points, fits): points are (label, x, comm_rounds, grad_components)
    and fits map each label to the log-log slope of comms against x.
    """
    points = []
    for i, cfg in enumerate(configs):
        label = labels[i] if labels else cfg.algorithm.get("inner", f"run{i}")
        x_val = (x_values[i] if x_values is not None
                 else float(cfg.output.get("sweep_x", i + 1)))
        result = run_experiment(cfg, write=False)
        costs = cost_to_targets(result.rows, targets=[target])
        entry = costs[f"{target:.0e}"]
        points.append({"label": label, "x": x_val,
                       "comm_rounds": entry["comm_rounds"],
                       "grad_components": entry["grad_components"]})
    fits = {}
    for label in {p["label"] for p in points}:
        xs = [p["x"] for p in points if p["label"] == label and p["comm_rounds"]]
        ys = [p["comm_rounds"] for p in points if p["label"] == label and p["comm_rounds"]]
        if len(xs) >= 2:
            slope = fit_loglog_slope(xs, ys)
            if math.isfinite(slope):
                fits[label] = slope
    return points, fits


def sweep_to_csv(points):
    buf = io.StringIO()
    buf.write("label,x,comm_rounds,grad_components\n")
    for p in points:
        buf.write(f"{p['label']},{_fmt(float(p['x']))},"
                  f"{_fmt(p['comm_rounds'])},{_fmt(p['grad_components'])}\n")
    return buf.getvalue()
