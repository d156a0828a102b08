"""Command-line driver: run experiments, sweeps, trace verification, datagen.

Exit codes: 0 success, 1 error, 2 certificate failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

from .harness import (ExperimentConfig, run_experiment, run_sweep,
                      sweep_to_csv, synth_classification, synth_regression,
                      write_libsvm)
from .oracle import certify_estseq


def _load_config(path, args):
    cfg = ExperimentConfig.from_ini(path)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "oracle_tol", None) is not None:
        cfg.oracle_tol = args.oracle_tol
    if getattr(args, "out", None) is not None:
        cfg.output["csv"] = args.out
    return cfg


def cmd_run(args):
    cfg = _load_config(args.config, args)
    result = run_experiment(cfg)
    final = result.summary["final_gap"]
    print(f"rows={len(result.rows)} final_gap={final}")
    if "csv" in cfg.output:
        print(f"csv written to {cfg.output['csv']}")
    return 0


def cmd_sweep(args):
    cfg_dir = Path(args.config_dir)
    paths = sorted(cfg_dir.glob("*.ini"))
    if not paths:
        print(f"no .ini configs found in {cfg_dir}", file=sys.stderr)
        return 1
    configs, labels, xs = [], [], []
    for p in paths:
        cfg = _load_config(p, args)
        configs.append(cfg)
        labels.append(cfg.output.get("label", p.stem))
        xs.append(float(cfg.output.get("sweep_x", len(xs) + 1)))
    points, fits = run_sweep(configs, labels=labels, target=args.target, x_values=xs)
    out = Path(args.out or (cfg_dir / "sweep.csv"))
    out.write_text(sweep_to_csv(points))
    out.with_suffix(".summary.json").write_text(
        json.dumps({"target": args.target, "slopes": fits}, indent=2, sort_keys=True) + "\n")
    print(f"sweep written to {out}")
    for label, slope in sorted(fits.items()):
        print(f"  {label}: log-log slope {slope:.4f}")
    return 0


def cmd_verify(args):
    cfg = _load_config(args.config, args)
    cfg.output.pop("csv", None)  # never overwrite the trace being verified
    result = run_experiment(cfg, write=False)
    recorded = Path(args.trace).read_text()
    if recorded != result.csv_text:
        print("trace mismatch: the config does not reproduce the recorded CSV",
              file=sys.stderr)
        return 1
    print("trace reproduced byte-for-byte")
    if result.schedule is None:
        print("plain run: no certificate to check")
        return 0
    # reuse the run's solution when it is tight enough for the certificate
    ref = result.reference if cfg.oracle_tol <= 1e-10 else None
    cert = certify_estseq(result.trace, result.problem, result.schedule,
                          oracle_tol=min(cfg.oracle_tol, 1e-12),
                          x_star=None if ref is None else ref.x_star,
                          u_star=None if ref is None else ref.u_star)
    out = Path(args.out or (args.trace + ".certificate.csv"))
    with open(out, "w") as fh:
        cols = ["k", "agent", "zeta", "lambda", "psi_star", "eps_psi",
                "eps_tot", "moreau", "lower_bound_ok", "chain_ok"]
        fh.write(",".join(cols) + "\n")
        for row in cert.rows():
            fh.write(",".join(str(row[c]) for c in cols) + "\n")
    print(f"certificate written to {out}")
    if not cert.passed:
        for v in cert.violations[:5]:
            print(f"violation: {v}", file=sys.stderr)
        print(f"{len(cert.violations)} certificate violations", file=sys.stderr)
        return 2
    print("certificate clean: all inequalities hold")
    return 0


def cmd_datagen(args):
    parser = configparser.ConfigParser()
    parser.read(args.spec)
    spec = dict(parser["datagen"])
    kind = spec.get("kind", "classification")
    n, d = int(spec.get("n", 600)), int(spec.get("d", 10))
    seed = int(spec.get("seed", 0))
    out = spec["out"]
    if kind == "classification":
        A, y = synth_classification(n, d, seed, noise=float(spec.get("noise", 0.3)))
    elif kind == "regression":
        A, y = synth_regression(n, d, seed, noise=float(spec.get("noise", 0.1)))
    else:
        print(f"unknown datagen kind: {kind}", file=sys.stderr)
        return 1
    write_libsvm(out, A, y)
    print(f"wrote {n} rows (d={d}) to {out}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="dcatalyst",
        description="Accelerated decentralized optimization simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out")
    p_run.add_argument("--oracle-tol", dest="oracle_tol", type=float)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run every config in a directory")
    p_sweep.add_argument("config_dir")
    p_sweep.add_argument("--target", type=float, default=1e-4)
    p_sweep.add_argument("--seed", type=int)
    p_sweep.add_argument("--out")
    p_sweep.add_argument("--oracle-tol", dest="oracle_tol", type=float)
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="reproduce a trace and certify it")
    p_verify.add_argument("trace")
    p_verify.add_argument("config")
    p_verify.add_argument("--seed", type=int)
    p_verify.add_argument("--out")
    p_verify.add_argument("--oracle-tol", dest="oracle_tol", type=float)
    p_verify.set_defaults(func=cmd_verify)

    p_gen = sub.add_parser("datagen", help="write a synthetic svmlight dataset")
    p_gen.add_argument("spec")
    p_gen.set_defaults(func=cmd_datagen)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface as exit code 1 with a message
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
