"""Command-line interface.

Subcommands: simulate, solve, rate, cjk, slope, ratio, j1.
Exit codes: 0 success/PASS, 2 configuration error, 3 convergence or
integrator error, 4 experiment FAIL.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .paths import CadlagPath, DomainError, j1_distance
from .levy import SimConfig, sample_scaled_path
from .solution import ConvergenceError, SolverConfig, apply_F, apply_F_inverse
from .rate import rate_I, rate_I_tilde
from .cluster import ClusterSampleSpec, estimate_Cjk, estimate_Cjk_tilde
from .config import ConfigError, load_config, get as cfg_get, section as cfg_section
from .experiments import (IntegratorError, build_model, build_drift,
                          build_oracle, run_slope_experiment,
                          run_ratio_experiment, write_results, _is_zero_drift,
                          SCHEMA_VERSION)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_FAIL = 4


def _build_parser():
    p = argparse.ArgumentParser(prog="levyldp",
                                description="Heavy-tailed SDE rare-event toolkit")
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="emit sample driver paths")
    sp.add_argument("--n", type=int, default=1)

    so = sub.add_parser("solve", help="apply the solution map to a path file")
    so.add_argument("path_file")

    ra = sub.add_parser("rate", help="evaluate the rate functions on a path file")
    ra.add_argument("path_file")

    sub.add_parser("cjk", help="cluster-measure estimate")
    sub.add_parser("slope", help="log-log slope experiment")
    sub.add_parser("ratio", help="normalized-ratio experiment")

    j1 = sub.add_parser("j1", help="J1 distance between two path files")
    j1.add_argument("file_a")
    j1.add_argument("file_b")
    j1.add_argument("--tol", type=float, default=1e-4)
    return p


def _load_cfg(args, required=True):
    if args.config is None:
        if required:
            raise ConfigError("missing required --config FILE")
        return {}
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _load_path(name) -> CadlagPath:
    with open(name, "r", encoding="utf-8") as fh:
        text = fh.read()
    if name.endswith(".csv"):
        return CadlagPath.from_csv(text)
    return CadlagPath.from_json(text)


def _write_path(path: CadlagPath, name):
    with open(name, "w", encoding="utf-8") as fh:
        if name.endswith(".csv"):
            fh.write(path.to_csv())
        else:
            fh.write(path.to_json())


def _cmd_simulate(args):
    cfg = _load_cfg(args)
    model = build_model(cfg)
    eps = cfg_get(cfg, "eps", required=True)
    eps = float(eps[0] if isinstance(eps, list) else eps)
    sim_sec = cfg_section(cfg, "sim")
    seed = int(cfg_get(cfg, "seed", 0))
    os.makedirs(args.out, exist_ok=True)
    ext = "json" if args.format == "json" else "csv"
    names = []
    for i in range(args.n):
        sim = SimConfig(epsilon=eps,
                        trunc_tau=sim_sec.get("trunc_tau"),
                        gaussian_smalljump=bool(sim_sec.get("gaussian_smalljump", True)),
                        grid_delta=float(sim_sec.get("grid_delta", 2.0 ** -12)),
                        seed=seed, stream_id=i)
        path = sample_scaled_path(model, sim)
        name = os.path.join(args.out, f"path_{i:04d}.{ext}")
        _write_path(path, name)
        names.append(name)
    print("\n".join(names))
    return EXIT_OK


def _cmd_solve(args):
    cfg = _load_cfg(args)
    drift = build_drift(cfg)
    g = _load_path(args.path_file)
    step = float(cfg_get(cfg, "solver.step", 2.0 ** -12))
    f = apply_F(drift, g, SolverConfig(step=step))
    base = os.path.splitext(os.path.basename(args.path_file))[0]
    os.makedirs(args.out, exist_ok=True)
    ext = "json" if args.format == "json" else "csv"
    name = os.path.join(args.out, f"{base}_solved.{ext}")
    _write_path(f, name)
    print(name)
    return EXIT_OK


def _cmd_rate(args):
    cfg = _load_cfg(args)
    model = build_model(cfg)
    drift = build_drift(cfg)
    path = _load_path(args.path_file)
    out = {
        "schema_version": SCHEMA_VERSION,
        "I": rate_I(path, model.alpha, model.beta),
        "I_tilde": rate_I_tilde(path, drift, model.alpha, model.beta),
    }
    out = {k: ("inf" if isinstance(v, float) and v == float("inf") else v)
           for k, v in out.items()}
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def _cmd_cjk(args):
    cfg = _load_cfg(args)
    model = build_model(cfg)
    drift = build_drift(cfg)
    oracle = build_oracle(cfg)
    sec = cfg_section(cfg, "cjk")
    try:
        j, k = int(sec["j"]), int(sec["k"])
    except KeyError as exc:
        raise ConfigError(f"missing required config key cjk.{exc.args[0]}") from exc
    spec = ClusterSampleSpec(
        j=j, k=k,
        floor_up=float(sec.get("floor_up", 0.5)),
        floor_down=float(sec.get("floor_down", 0.5)),
        n_samples=int(sec.get("n_samples", 100_000)),
        seed=int(cfg_get(cfg, "seed", 0)),
        alpha=model.alpha, beta=model.beta,
        weight_up=float(sec.get("weight_up", 1.0)),
        weight_down=float(sec.get("weight_down", 1.0)))
    outer = bool(sec.get("outer", False))
    tilde = bool(sec.get("tilde", not _is_zero_drift(drift)))
    if tilde:
        est = estimate_Cjk_tilde(lambda p: oracle(p, outer), drift, spec, outer=outer)
    else:
        est = estimate_Cjk(lambda p: oracle(p, outer), spec, outer=outer,
                           batch_contains=oracle.batch_steps)
    payload = est.to_dict()
    payload["schema_version"] = SCHEMA_VERSION
    print(json.dumps(payload, sort_keys=True))
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "cjk.csv")
    header = "j,k,floor_up,floor_down,n,value,se,ci_lo,ci_hi,leakage\n"
    line = (f"{j},{k},{spec.floor_up},{spec.floor_down},{spec.n_samples},"
            f"{est.value:.12g},{est.std_error:.12g},"
            f"{est.ci95[0]:.12g},{est.ci95[1]:.12g},{int(est.floor_leakage_flag)}\n")
    new = not os.path.exists(csv_path)
    with open(csv_path, "a", encoding="utf-8") as fh:
        if new:
            fh.write(header)
        fh.write(line)
    return EXIT_OK


def _cmd_slope(args):
    cfg = _load_cfg(args)
    rec = run_slope_experiment(cfg, threads=args.threads)
    write_results(rec, args.out, "slope", fmt=args.format)
    print(json.dumps({"pass": rec.passed,
                      "slope": rec.derived["slope"],
                      "theory_slope": rec.derived["theory_slope"]},
                     sort_keys=True))
    return EXIT_OK if rec.passed else EXIT_FAIL


def _cmd_ratio(args):
    cfg = _load_cfg(args)
    rec = run_ratio_experiment(cfg, threads=args.threads)
    write_results(rec, args.out, "ratio", fmt=args.format)
    summary = {"pass": rec.passed, "final_ratio": rec.ratios[-1],
               "vanishing_branch": rec.derived["vanishing_branch"]}
    if "bracket_interval" in rec.derived:
        summary["bracket"] = rec.derived["bracket_interval"]
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK if rec.passed else EXIT_FAIL


def _cmd_j1(args):
    a = _load_path(args.file_a)
    b = _load_path(args.file_b)
    br = j1_distance(a, b, tol=args.tol)
    print(json.dumps({"lower": br.lower, "upper": br.upper,
                      "converged": br.converged, "exact": br.exact},
                     sort_keys=True))
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "solve": _cmd_solve,
    "rate": _cmd_rate,
    "cjk": _cmd_cjk,
    "slope": _cmd_slope,
    "ratio": _cmd_ratio,
    "j1": _cmd_j1,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, DomainError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, IntegratorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
