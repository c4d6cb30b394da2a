"""Empirical contraction-rate study over a grid of sample sizes.

For each sample size ``n`` and seed, one full pipeline run (in memory)
produces the sup-norm reconstruction error over the observation window;
per-``n`` medians are fitted as ``log(error) = log(C) - mu*log(log(n))``
to estimate the logarithmic contraction exponent ``mu``.  The reference
algebraic rate ``delta_n = n**(-alpha/(2*alpha + 1))`` is reported
alongside for scale.

Cells are independent pipelines (own seed substreams, shared nothing),
so they parallelize across processes; every completed cell is persisted
immediately so partial studies survive interruption.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .config import RunConfig
from .pipeline import build_problem, reconstruct, run_sampler, simulate
from .priors import sieve_level

__all__ = ["RateStudyResult", "rate_study", "fit_rate", "reference_rate"]

log = logging.getLogger(__name__)


@dataclass
class RateStudyResult:
    """Raw errors, per-n medians, and the fitted logarithmic rate."""

    n_values: tuple[int, ...]
    seeds: tuple[int, ...]
    errors: tuple[float, ...]
    table: tuple[tuple[int, int, float], ...]
    c_fit: float
    mu: float
    residuals: tuple[float, ...]
    delta: tuple[float, ...]

    def __post_init__(self) -> None:
        if list(self.n_values) != sorted(set(self.n_values)):
            raise ValueError("n_values must be strictly increasing")
        if any(e < 0 for e in self.errors):
            raise ValueError("errors must be nonnegative")


def reference_rate(n: int, alpha: float) -> float:
    """Algebraic reference rate ``n**(-alpha/(2*alpha + 1))``."""
    return float(n) ** (-alpha / (2.0 * alpha + 1.0))


def fit_rate(n_values, medians) -> tuple[float, float, tuple[float, ...]]:
    """Least-squares fit of ``log(median)`` against ``log(log(n))``.

    Returns
    -------
    (mu, log_c, residuals)
        Slope is ``-mu``; residuals are per-``n`` fit errors in log space.
    """
    lln = np.log(np.log(np.asarray(n_values, dtype=float)))
    le = np.log(np.asarray(medians, dtype=float))
    slope, intercept = np.polyfit(lln, le, 1)
    resid = le - (intercept + slope * lln)
    return float(-slope), float(intercept), tuple(float(r) for r in resid)


def _cell_config(cfg: RunConfig, n: int, seed: int) -> RunConfig:
    out = replace(cfg, seed=seed, observation=replace(cfg.observation, n=n))
    if cfg.prior.family == "haar":
        out = replace(out, prior=replace(cfg.prior, j0=sieve_level(n, cfg.prior.alpha)))
    return out


def _run_cell(args: tuple[RunConfig, int, int]) -> tuple[int, int, float]:
    cfg, n, seed = args
    problem = build_problem(_cell_config(cfg, n, seed))
    _, data = simulate(problem)
    trace = run_sampler(problem, data)
    rec = reconstruct(problem, trace)
    return n, seed, rec.linf_error


def _persist_cell(outdir: str, n: int, seed: int, error: float) -> None:
    path = os.path.join(outdir, "cells", f"n{n}_seed{seed}.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("n,seed,error\n")
        fh.write(f"{n},{seed},{error:.17g}\n")


def rate_study(
    cfg: RunConfig,
    n_values: tuple[int, ...] = (25, 100, 400),
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4),
    outdir: str | None = None,
    workers: int = 1,
) -> RateStudyResult:
    """Run the full (n, seed) grid and fit the logarithmic rate.

    Parameters
    ----------
    cfg : RunConfig
        Base config; each cell overrides the sample size and seed (and,
        for the haar prior family, the truncation level matched to n).
    n_values : tuple of int
        At least 3 distinct sample sizes, strictly increasing, all > 1.
    seeds : tuple of int
        At least 3 seeds.
    outdir : str, optional
        When set, every completed cell is persisted under ``cells/``
        immediately, and the merged table, per-n summary, and fit report
        are written at the end.
    workers : int
        Process count for parallel cells (1 = run in-process).

    Returns
    -------
    RateStudyResult
    """
    n_values = tuple(int(n) for n in n_values)
    seeds = tuple(int(s) for s in seeds)
    if len(n_values) < 3 or list(n_values) != sorted(set(n_values)):
        raise ValueError(f"need at least 3 distinct increasing sample sizes, got {n_values!r}")
    if any(n <= 1 for n in n_values):
        raise ValueError("sample sizes must exceed 1 (the fit uses log(log(n)))")
    if len(seeds) < 3:
        raise ValueError(f"need at least 3 seeds, got {seeds!r}")
    if outdir is not None:
        os.makedirs(os.path.join(outdir, "cells"), exist_ok=True)

    jobs = [(cfg, n, seed) for n in n_values for seed in seeds]
    results: dict[tuple[int, int], float] = {}

    def record(n: int, seed: int, error: float) -> None:
        results[(n, seed)] = error
        log.info("cell n=%d seed=%d error=%.6g", n, seed, error)
        if outdir is not None:
            _persist_cell(outdir, n, seed, error)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for n, seed, error in pool.map(_run_cell, jobs):
                record(n, seed, error)
    else:
        for job in jobs:
            record(*_run_cell(job))

    table = tuple((n, seed, results[(n, seed)]) for n in n_values for seed in seeds)
    medians = tuple(float(np.median([results[(n, s)] for s in seeds])) for n in n_values)
    mu, log_c, residuals = fit_rate(n_values, medians)
    out = RateStudyResult(
        n_values=n_values,
        seeds=seeds,
        errors=medians,
        table=table,
        c_fit=math.exp(log_c),
        mu=mu,
        residuals=residuals,
        delta=tuple(reference_rate(n, cfg.prior.alpha) for n in n_values),
    )
    if outdir is not None:
        _write_outputs(outdir, out)
    return out


def _write_outputs(outdir: str, res: RateStudyResult) -> None:
    with open(os.path.join(outdir, "rate_table.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("n,seed,error\n")
        for n, seed, error in res.table:
            fh.write(f"{n},{seed},{error:.17g}\n")
    with open(os.path.join(outdir, "rate_summary.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("n,median_error,delta_n\n")
        for n, med, dl in zip(res.n_values, res.errors, res.delta):
            fh.write(f"{n},{med:.17g},{dl:.17g}\n")
    fit = {
        "mu": res.mu,
        "c": res.c_fit,
        "residuals": list(res.residuals),
        "n_values": list(res.n_values),
        "median_errors": list(res.errors),
    }
    with open(os.path.join(outdir, "rate_fit.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(fit, sort_keys=True, indent=2))
        fh.write("\n")
