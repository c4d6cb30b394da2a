"""Command-line interface.

Subcommands mirror the pipeline stages: ``run`` executes the whole
experiment, ``simulate`` and ``sample`` split it at the measurement CSV,
``forward`` dumps one forward solve, ``rate-study`` sweeps sample sizes,
``verify`` runs the numerical verification suites, and ``oracle`` dumps
the operator symbol and quadrature reference values.  Configuration
comes from ``--preset`` or a ``--config`` file, with ``--seed``
overriding the configured seed; all artifacts land under ``--out``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .checks import run_all
from .config import PRESETS, RunConfig, apply_overrides, load_config, preset_config
from .forward import SolveError, dn_on_grid
from .grid import BumpDatum
from .operator import apply_fft, quadrature_dn_phi
from .pipeline import (
    Problem,
    build_problem,
    fmt_float,
    make_truth,
    read_measurements,
    run_pipeline,
    run_sampler,
    simulate,
    write_loglik,
    write_manifest,
    write_measurements,
    write_stats,
)
from .ratestudy import rate_study
from .sampler import burn_in_mean

log = logging.getLogger(__name__)


def _add_common(sub: argparse.ArgumentParser, out_required: bool = True) -> None:
    sub.add_argument("--config", help="path to a key = value config file")
    sub.add_argument("--preset", choices=PRESETS, help="named parameter bundle")
    sub.add_argument("--seed", type=int, help="override the configured seed")
    sub.add_argument("--out", required=out_required, help="output directory")


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    if args.config and args.preset:
        raise ValueError("pass either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = preset_config(args.preset or "full")
    if args.seed is not None:
        cfg = apply_overrides(cfg, {"seed": str(args.seed)})
    return cfg


def _prepared(args: argparse.Namespace) -> tuple[RunConfig, Problem]:
    cfg = _resolve_config(args)
    os.makedirs(args.out, exist_ok=True)
    return cfg, build_problem(cfg)


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    result = run_pipeline(cfg, args.out)
    log.info("run complete, artifacts in %s", result.outdir)
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg, problem = _prepared(args)
    _, data = simulate(problem)
    write_measurements(os.path.join(args.out, "measurements.csv"), data)
    write_manifest(os.path.join(args.out, "manifest.txt"), cfg)
    return 0


def _cmd_sample(args: argparse.Namespace) -> int:
    cfg, problem = _prepared(args)
    data = read_measurements(args.data, sigma=cfg.observation.sigma, seed=cfg.seed)
    trace = run_sampler(problem, data)
    write_loglik(os.path.join(args.out, "loglik.csv"), trace)
    f_burn = burn_in_mean(trace)
    x = problem.spec.node_x(problem.regions.omega)
    with open(os.path.join(args.out, "f_burn.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,f_burn\n")
        for i in range(x.size):
            fh.write(f"{fmt_float(x[i])},{fmt_float(f_burn.values[i])}\n")
    stats = {
        "iterations": trace.iterations,
        "accept_count": trace.accept_count,
        "accept_rate": trace.accept_rate,
        "clip_count": int(trace.clip_iterations.size),
        "nan_rejections": trace.nan_rejections,
        "final_loglik": float(trace.loglik_trace[-1]),
        "n": data.n,
        "sigma": data.sigma,
        "seed": cfg.seed,
    }
    write_stats(os.path.join(args.out, "stats.json"), stats)
    write_manifest(os.path.join(args.out, "manifest.txt"), cfg)
    return 0


def _cmd_forward(args: argparse.Namespace) -> int:
    cfg, problem = _prepared(args)
    truth = make_truth(cfg, problem.spec, problem.regions)
    solver = problem.model.solver
    sol = solver.solution(solver.solve_values(truth.values))
    dn = dn_on_grid(sol, problem.op, problem.regions)
    with open(os.path.join(args.out, "forward_u.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("i,x,value\n")
        for idx in problem.regions.omega:
            fh.write(f"{idx},{fmt_float(problem.spec.node_x(idx))},{fmt_float(sol.u.at(idx))}\n")
    with open(os.path.join(args.out, "forward_dn.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("i,x,value\n")
        for k, idx in enumerate(problem.regions.dd):
            fh.write(f"{idx},{fmt_float(problem.spec.node_x(idx))},{fmt_float(dn[k])}\n")
    write_manifest(os.path.join(args.out, "manifest.txt"), cfg)
    return 0


def _cmd_rate_study(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    os.makedirs(args.out, exist_ok=True)
    n_values = tuple(int(tok) for tok in args.n_values.split(","))
    seeds = tuple(int(tok) for tok in args.seeds.split(","))
    result = rate_study(cfg, n_values=n_values, seeds=seeds, outdir=args.out, workers=args.workers)
    write_manifest(os.path.join(args.out, "manifest.txt"), cfg)
    log.info("fitted mu=%.4f, C=%.4f", result.mu, result.c_fit)
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    results = run_all()
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.summary}")
    return 0 if all(r.passed for r in results) else 1


def _cmd_oracle(args: argparse.Namespace) -> int:
    cfg, problem = _prepared(args)
    symbol = problem.op.symbol
    with open(os.path.join(args.out, "symbol.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("offset,value\n")
        for i, a in enumerate(symbol):
            fh.write(f"{i},{fmt_float(a)}\n")
    datum = BumpDatum(
        amplitude=cfg.datum.amplitude, center=cfg.datum.center, radius=cfg.datum.radius
    )
    aphi = apply_fft(problem.op, problem.phi.values)
    x_dd = problem.spec.node_x(problem.regions.dd)
    order = np.argsort(np.abs(x_dd - 2.0), kind="stable")[:10]
    with open(os.path.join(args.out, "quadrature.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,discrete,quadrature\n")
        for j in sorted(order):
            exact = quadrature_dn_phi(float(x_dd[j]), datum, problem.spec.s)
            got = float(aphi[problem.regions.dd[j] - 1])
            fh.write(f"{fmt_float(x_dd[j])},{fmt_float(got)},{fmt_float(exact)}\n")
    write_manifest(os.path.join(args.out, "manifest.txt"), cfg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    """The argument parser for the ``fracbayes`` entry point."""
    parser = argparse.ArgumentParser(
        prog="fracbayes",
        description="Bayesian recovery of a potential from single-measurement "
        "exterior flux data of a fractional diffusion.",
    )
    parser.add_argument("--version", action="version", version=f"fracbayes {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full pipeline: simulate, sample, reconstruct")
    _add_common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("simulate", help="write synthetic measurements")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sample", help="run the chain against a measurement CSV")
    _add_common(p)
    p.add_argument("--data", required=True, help="measurements.csv from simulate")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("forward", help="dump one forward solve (state and flux)")
    _add_common(p)
    p.set_defaults(func=_cmd_forward)

    p = sub.add_parser("rate-study", help="error-vs-sample-size sweep with rate fit")
    _add_common(p)
    p.add_argument("--n-values", default="25,100,400", help="comma-separated sample sizes")
    p.add_argument("--seeds", default="0,1,2,3,4", help="comma-separated seeds")
    p.add_argument("--workers", type=int, default=1, help="parallel cell processes")
    p.set_defaults(func=_cmd_rate_study)

    p = sub.add_parser("verify", help="run the numerical verification suites")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("oracle", help="dump operator symbol and quadrature references")
    _add_common(p)
    p.set_defaults(func=_cmd_oracle)

    return parser


def main(argv: list[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, SolveError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
