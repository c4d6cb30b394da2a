"""Markov chain over potentials with autoregressive prior-draw proposals.

Each iteration proposes

``proposal = center + sqrt(1 - beta^2) * (current - center) + beta * draw``

on the observation-window nodes (``center`` is the background: 1 in
potential space, 0 in link mode), leaving the rest of the bulk at the
background.  Two acceptance rules are provided: ``greedy`` accepts only
strict log-likelihood increases (hill climbing, no randomness), and
``pcn`` accepts with probability ``min(1, exp(l_prop - l_cur))``, which
together with the prior-reversible proposal targets the posterior.

Chain states are kept unclipped so that under a flat likelihood the
``pcn`` chain leaves the prior exactly invariant; admissibility is
enforced where it is needed, by clipping negatives to zero immediately
before each forward solve (clip events are recorded per iteration).
The trace stores every accepted state with its iteration index, which is
a run-length encoding of the full chain: the burn-in mean over all
second-half iterations is reconstructed from it exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .forward import ForwardModel, Potential, SolveError
from .grid import GridFunction, RegionMap
from .observation import LinkFunction, MeasurementSet
from .priors import PriorSampler, SievePriorConfig, make_sampler
from .rng import substream

__all__ = [
    "SamplerConfig",
    "ChainTrace",
    "pcn_propose",
    "accept_step",
    "run_chain",
    "burn_in_mean",
]

RULES = ("greedy", "pcn")


@dataclass(frozen=True)
class SamplerConfig:
    """Chain parameters.

    Parameters
    ----------
    rule : {"greedy", "pcn"}
        Acceptance rule.
    step_beta : float
        Proposal step size in [0, 1]; 0 freezes the chain at its initial
        state (degenerate but well-defined, useful for harness checks).
    iterations : int
        Chain length T (at least 2).
    thinning : int
        Keep every ``thinning``-th accepted snapshot in the exported
        ``accepted`` list; the log-likelihood trace is never thinned.
    seed : int
        Master seed; proposal and acceptance draws use independent named
        substreams of it.
    link_mode : bool
        Run the chain on an unconstrained field mapped through the link
        function instead of directly on the potential.
    prior : SievePriorConfig, optional
        Prior whose draws drive the proposals.
    """

    rule: str = "greedy"
    step_beta: float = 0.1
    iterations: int = 1000
    thinning: int = 1
    seed: int = 0
    link_mode: bool = False
    prior: SievePriorConfig | None = None

    def __post_init__(self) -> None:
        if self.rule not in RULES:
            raise ValueError(f"unknown acceptance rule {self.rule!r}, expected one of {RULES}")
        if not 0 <= self.step_beta <= 1:
            raise ValueError(f"step_beta must lie in [0, 1], got {self.step_beta!r}")
        if self.iterations < 2:
            raise ValueError(f"need at least 2 iterations, got {self.iterations!r}")
        if self.thinning < 1:
            raise ValueError(f"thinning must be a positive count, got {self.thinning!r}")


@dataclass
class ChainTrace:
    """Everything recorded about one chain run.

    ``states``/``states_iters`` hold the initial state (iteration 0) and
    every accepted state with its iteration index; the chain value at any
    iteration is the stored state with the largest index not exceeding
    it.  ``loglik_trace[tau - 1]`` is the cached log-likelihood after
    iteration ``tau``.
    """

    iterations: int
    thinning: int
    states_iters: np.ndarray
    states: np.ndarray
    loglik_trace: np.ndarray
    accept_count: int
    nan_rejections: int
    clip_iterations: np.ndarray
    final_state: Potential
    link: LinkFunction | None = None

    @property
    def accept_rate(self) -> float:
        """Fraction of iterations whose proposal was accepted."""
        return self.accept_count / self.iterations

    def _to_potential(self, values: np.ndarray) -> Potential:
        if self.link is not None:
            return Potential(self.link(values), cap=self.link.m0)
        return Potential(np.maximum(values, 0.0))

    @property
    def accepted(self) -> list[tuple[int, Potential]]:
        """Every ``thinning``-th accepted snapshot as (iteration, potential)."""
        return [
            (int(self.states_iters[j]), self._to_potential(self.states[j]))
            for j in range(1, self.states_iters.size, self.thinning)
        ]


def pcn_propose(
    current: Potential, draw: GridFunction, step_beta: float, regions: RegionMap
) -> Potential:
    """One autoregressive proposal in potential space.

    Combines the current potential with a fresh prior draw on the
    observation-window nodes, leaving all other bulk nodes at the
    background; negative values are clipped to 0 so the result is
    admissible.  (The chain engine applies the same formula to unclipped
    internal states; see the module docstring.)
    """
    if not 0 <= step_beta <= 1:
        raise ValueError(f"step_beta must lie in [0, 1], got {step_beta!r}")
    o_pos = regions.oo - regions.omega[0]
    out = current.values.copy()
    draw_o = draw.at(regions.oo)
    root = math.sqrt(1.0 - step_beta**2)
    out[o_pos] = 1.0 + root * (out[o_pos] - 1.0) + step_beta * draw_o
    return Potential(np.maximum(out, 0.0))


def accept_step(
    l_current: float, l_proposal: float, rule: str, rng: np.random.Generator | None = None
) -> bool:
    """Decide acceptance from the two cached log-likelihoods.

    The ``greedy`` rule accepts strict increases and consumes no
    randomness.  The ``pcn`` rule draws exactly one uniform and accepts
    when it falls below ``exp(min(0, l_proposal - l_current))``.  A NaN
    proposal log-likelihood is always rejected (the uniform is still
    consumed under ``pcn``, keeping stream alignment).
    """
    if rule == "greedy":
        return not math.isnan(l_proposal) and l_proposal > l_current
    if rule == "pcn":
        if rng is None:
            raise ValueError("the pcn rule needs an RNG for its uniform draw")
        u = rng.random()
        if math.isnan(l_proposal):
            return False
        return u < math.exp(min(0.0, l_proposal - l_current))
    raise ValueError(f"unknown acceptance rule {rule!r}, expected one of {RULES}")


def run_chain(
    cfg: SamplerConfig,
    data: MeasurementSet,
    model: ForwardModel,
    regions: RegionMap,
    *,
    prior: PriorSampler | None = None,
    link: LinkFunction | None = None,
    init: np.ndarray | None = None,
) -> ChainTrace:
    """Run one chain of ``cfg.iterations`` proposals.

    Parameters
    ----------
    cfg : SamplerConfig
        Chain parameters; ``cfg.seed`` feeds the proposal and acceptance
        substreams.
    data : MeasurementSet
        Observations; an infinite noise level switches to the flat
        likelihood (every state scores 0 and no solves run).
    model : ForwardModel
        Forward map shared immutably by all evaluations.
    regions : RegionMap
        Region bookkeeping (the proposal only moves observation-window
        nodes).
    prior : PriorSampler, optional
        Proposal draw source; built from ``cfg.prior`` when omitted.
    link : LinkFunction, optional
        Link for ``cfg.link_mode`` (default :class:`LinkFunction`).
    init : ndarray, optional
        Initial state on the bulk nodes; defaults to the background
        (constant 1 in potential space, 0 in link mode).

    Returns
    -------
    ChainTrace

    Raises
    ------
    SolveError
        Re-raised from the forward solver with the iteration index
        attached.
    """
    if prior is None:
        if cfg.prior is None:
            raise ValueError("no prior sampler: pass prior= or set cfg.prior")
        prior = make_sampler(cfg.prior, model.spec, regions)
    if cfg.link_mode and link is None:
        link = LinkFunction()
    if not cfg.link_mode:
        link = None
    center = 0.0 if cfg.link_mode else 1.0
    n_state = regions.omega.size
    o_pos = regions.oo - regions.omega[0]
    rng_prop = substream(cfg.seed, "proposal")
    rng_accept = substream(cfg.seed, "accept") if cfg.rule == "pcn" else None

    flat = math.isinf(data.sigma)
    if not flat:
        plan = model.prepare(data.x)
        inv_two_sigma2 = 1.0 / (2.0 * data.sigma**2)

    def to_solver_input(state: np.ndarray) -> tuple[np.ndarray, bool]:
        if link is not None:
            return link(state), False
        clipped = (state < 0.0).any()
        return (np.maximum(state, 0.0), True) if clipped else (state, False)

    def loglik(state: np.ndarray, tau: int) -> tuple[float, bool]:
        if flat:
            return 0.0, False
        fvals, clipped = to_solver_input(state)
        try:
            resid = data.y - model.predict_values(fvals, plan)
        except SolveError as exc:
            raise SolveError(f"iteration {tau}: {exc}") from exc
        return -math.fsum((resid * resid).tolist()) * inv_two_sigma2, clipped

    cur = np.full(n_state, center) if init is None else np.asarray(init, dtype=float).copy()
    if cur.shape != (n_state,):
        raise ValueError(f"initial state needs {n_state} bulk values, got shape {cur.shape}")
    l_cur, _ = loglik(cur, 0)

    t_total = cfg.iterations
    root = math.sqrt(1.0 - cfg.step_beta**2)
    beta = cfg.step_beta
    ll_trace = np.empty(t_total)
    kept_states = [cur.copy()]
    kept_iters = [0]
    clip_iters: list[int] = []
    accept_count = 0
    nan_rejections = 0

    for tau in range(1, t_total + 1):
        draw_o = prior.draw_omega(rng_prop)[o_pos]
        prop = cur.copy()
        prop[o_pos] = center + root * (prop[o_pos] - center) + beta * draw_o
        l_prop, clipped = loglik(prop, tau)
        if clipped:
            clip_iters.append(tau)
        if math.isnan(l_prop):
            nan_rejections += 1
        if accept_step(l_cur, l_prop, cfg.rule, rng_accept):
            cur = prop
            l_cur = l_prop
            accept_count += 1
            kept_states.append(cur.copy())
            kept_iters.append(tau)
        ll_trace[tau - 1] = l_cur

    final_values = link(cur) if link is not None else np.maximum(cur, 0.0)
    final = Potential(final_values, cap=link.m0 if link is not None else None)
    return ChainTrace(
        iterations=t_total,
        thinning=cfg.thinning,
        states_iters=np.asarray(kept_iters),
        states=np.asarray(kept_states),
        loglik_trace=ll_trace,
        accept_count=accept_count,
        nan_rejections=nan_rejections,
        clip_iterations=np.asarray(clip_iters, dtype=int),
        final_state=final,
        link=link,
    )


def burn_in_mean(trace: ChainTrace) -> Potential:
    """Average of the chain over the second half of its iterations.

    Reconstructs the exact elementwise mean of the chain value at every
    iteration ``tau`` in ``{floor(T/2)+1, ..., T}`` (rejections repeat
    the previous state) from the stored accepted snapshots and their run
    lengths.  In link mode the states pass through the link before
    averaging, so the result is the mean potential; otherwise the mean
    state is clipped at 0 to form an admissible potential.
    """
    t_total = trace.iterations
    lo = t_total // 2 + 1
    if lo > t_total:
        raise ValueError(f"chain of {t_total} iterations has an empty second half")
    iters = trace.states_iters
    ends = np.append(iters[1:] - 1, t_total)
    weights = np.minimum(ends, t_total) - np.maximum(iters, lo) + 1
    weights = np.maximum(weights, 0).astype(float)
    total = weights.sum()
    if trace.link is not None:
        values = np.zeros(trace.states.shape[1])
        for w, state in zip(weights, trace.states):
            if w > 0:
                values += w * trace.link(state)
        values /= total
        return Potential(values, cap=trace.link.m0)
    mean_state = (weights / total) @ trace.states
    return Potential(np.maximum(mean_state, 0.0))
