"""Command line entry point: ``cgwishart <verb> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .colored_graph import ColoredGraph
from .diagnostics import DEFAULT_BATCHES, DEFAULT_MAX_LAG, acf, batch_standard_error
from .exact import Hyperparams, bind_family, exact_mean, log_norm, mc_norm_oracle
from .harness import (
    FIXTURE_NAMES,
    ExperimentConfig,
    builtin_fixture,
    emit_report,
    run_experiment,
    simulate_gaussian,
)
from .sampler import ChainConfig, posterior_params, run_many


def _graph_and_defaults(spec: str):
    """Fixture name or graph JSON path -> (graph, delta, D, K_true)."""
    if spec in FIXTURE_NAMES:
        fx = builtin_fixture(spec)
        return fx.graph, fx.delta, fx.D, fx.K_true
    graph = ColoredGraph.from_json(spec)
    return graph, 3.0, np.eye(graph.p), None


def _matrix(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)


def _resolve(args):
    graph, delta, D, K_true = _graph_and_defaults(args.graph)
    if getattr(args, "delta", None) is not None:
        delta = args.delta
    if getattr(args, "scale", None):
        D = _matrix(args.scale)
    return graph, float(delta), D, K_true


def _write(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _write_matrix(M, out):
    if out:
        np.savetxt(out, M, delimiter=",", fmt="%.17g")
    else:
        np.savetxt(sys.stdout, M, delimiter=",", fmt="%.10g")


def _chain_summary(graph, hypers, args):
    cfg = ChainConfig(args.iters, args.burnin, 1, args.seed)
    seeds = np.random.SeedSequence(args.seed).spawn(args.reps)
    out = run_many(graph, hypers, seeds, cfg)
    return {
        "seed": args.seed,
        "iterations": args.iters,
        "burn_in": args.burnin,
        "replications": args.reps,
        "mean_k": np.mean([s.mean_k for s in out], axis=0).tolist(),
        "per_rep": [s.mean_k.tolist() for s in out],
        "acceptance": [s.acceptance_rate for s in out],
    }


def cmd_sample_prior(args):
    graph, delta, D, _ = _resolve(args)
    _write(_chain_summary(graph, Hyperparams(delta, D), args), args.out)


def cmd_sample_posterior(args):
    graph, delta, D, K_true = _resolve(args)
    if args.data:
        X = _matrix(args.data)
        n = X.shape[0]
        S = X.T @ X / n
    else:
        if K_true is None:
            raise SystemExit("sample-posterior needs --data or a fixture with a true K")
        n = args.n_data
        S = simulate_gaussian(K_true, n, args.seed)
    report = _chain_summary(graph, posterior_params(delta, D, n, S), args)
    report["n_data"] = n
    _write(report, args.out)


def cmd_exact_mean(args):
    graph, delta, D, _ = _resolve(args)
    _write_matrix(exact_mean(bind_family(graph), delta, D), args.out)


def cmd_norm_const(args):
    graph, delta, D, _ = _resolve(args)
    out = {"delta": delta}
    try:
        fam = bind_family(graph)
        out["family"] = fam.tag
        out["log_norm"] = log_norm(fam, delta, D)
    except Exception as exc:  # no closed form; the oracle may still run
        out["closed_form_error"] = f"{type(exc).__name__}: {exc}"
    if args.mc:
        est = mc_norm_oracle(graph, delta, D, n_draws=args.mc, seed=args.seed)
        out["mc"] = {
            "log_estimate": est.log_estimate,
            "rel_std_err": est.rel_std_err,
            "n_draws": est.n_draws,
            "n_valid": est.n_valid,
        }
    _write(out, args.out)


def cmd_simulate(args):
    if args.true_k:
        K = _matrix(args.true_k)
    else:
        _, _, _, K = _graph_and_defaults(args.graph)
        if K is None:
            raise SystemExit("simulate needs --true-k or a fixture with a true K")
    _write_matrix(simulate_gaussian(K, args.n_data, args.seed), args.out)


def cmd_experiment(args):
    cfg = ExperimentConfig(
        fixture=args.graph if args.graph in FIXTURE_NAMES else "custom",
        graph_path=None if args.graph in FIXTURE_NAMES else args.graph,
        D_path=args.scale,
        mode=args.mode,
        replications=args.reps,
        iterations=args.iters,
        burn_in=args.burnin,
        seed=args.seed,
        n_data=args.n_data,
        delta=args.delta,
        n_batches=args.batches,
    )
    report = run_experiment(cfg)
    out = args.out or f"{args.graph}_{args.mode}.json"
    written = emit_report(report, out)
    line = f"nmse mean {written['nmse']['mean']:.6g} sd {written['nmse']['sd']:.3g}"
    line += f"; acceptance {written['acceptance']['mean']:.3f}; report {out}"
    print(line)


def cmd_diagnose(args):
    y = np.loadtxt(args.trace, delimiter=",", skiprows=1, ndmin=2)[:, args.column]
    out = {"n": int(y.size), "acf": acf(y, args.lags).tolist()}
    try:
        out["batch_se"] = batch_standard_error(y, args.batches)
    except Exception as exc:
        out["batch_se_error"] = str(exc)
    _write(out, args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cgwishart", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, chain=True):
        p.add_argument("--graph", required=True, help="fixture name or graph JSON file")
        p.add_argument("--delta", type=float, default=None)
        p.add_argument("--scale", default=None, help="CSV file with the scale matrix D")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None)
        if chain:
            p.add_argument("--iters", type=int, default=5000)
            p.add_argument("--burnin", type=int, default=1000)
            p.add_argument("--reps", type=int, default=1)

    p = sub.add_parser("sample-prior", help="sample the colored G-Wishart prior")
    common(p)
    p.set_defaults(func=cmd_sample_prior)

    p = sub.add_parser("sample-posterior", help="sample the posterior given data")
    common(p)
    p.add_argument("--data", default=None, help="CSV of observations, one per row")
    p.add_argument("--n-data", type=int, default=1000)
    p.set_defaults(func=cmd_sample_posterior)

    p = sub.add_parser("exact-mean", help="closed-form E(K)")
    common(p, chain=False)
    p.set_defaults(func=cmd_exact_mean)

    p = sub.add_parser("norm-const", help="log normalizing constant")
    common(p, chain=False)
    p.add_argument("--mc", type=int, default=0, help="also run the Monte-Carlo oracle with this many draws")
    p.set_defaults(func=cmd_norm_const)

    p = sub.add_parser("simulate", help="sample covariance of Gaussian data")
    p.add_argument("--graph", default=None)
    p.add_argument("--true-k", default=None)
    p.add_argument("--n-data", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="replicated prior or posterior study")
    common(p)
    p.set_defaults(iters=None, reps=100)
    p.add_argument("--mode", choices=["prior", "posterior"], default="prior")
    p.add_argument("--n-data", type=int, default=1000)
    p.add_argument("--batches", type=int, default=DEFAULT_BATCHES)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("diagnose", help="ACF and batch standard error of a trace CSV")
    p.add_argument("--trace", required=True)
    p.add_argument("--column", type=int, default=0)
    p.add_argument("--lags", type=int, default=DEFAULT_MAX_LAG)
    p.add_argument("--batches", type=int, default=DEFAULT_BATCHES)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
