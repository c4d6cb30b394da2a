"""Proposal kernel, acceptance rules, chain engine, and burn-in averaging."""

import math

import numpy as np
import pytest

from fracbayes.forward import ForwardModel, Potential
from fracbayes.grid import GridFunction, build_grid, classify_regions, sample_phi
from fracbayes.observation import LinkFunction, MeasurementSet, generate_data
from fracbayes.operator import build_symbol
from fracbayes.priors import SievePriorConfig, make_sampler
from fracbayes.sampler import (
    ChainTrace,
    SamplerConfig,
    accept_step,
    burn_in_mean,
    pcn_propose,
    run_chain,
)


def _setup(m=10):
    spec = build_grid(3.0, m, 0.5)
    regions = classify_regions(spec)
    op = build_symbol(spec)
    phi = sample_phi(spec)
    return spec, regions, ForwardModel(op, phi, regions)


def _flat_data():
    return MeasurementSet(x=np.array([2.0]), y=np.array([0.0]), sigma=math.inf)


def _real_data(model, regions, n=20, sigma=0.01, seed=1):
    f0 = Potential(np.ones(regions.n_omega))
    return generate_data(
        f0, model, n, sigma,
        np.random.default_rng(seed), np.random.default_rng(seed + 1),
    )


class TestSamplerConfig:
    def test_step_size_bounds_inclusive(self):
        SamplerConfig(step_beta=0.0, prior=SievePriorConfig())
        SamplerConfig(step_beta=1.0, prior=SievePriorConfig())
        with pytest.raises(ValueError):
            SamplerConfig(step_beta=-0.1)
        with pytest.raises(ValueError):
            SamplerConfig(step_beta=1.1)

    def test_other_validation(self):
        with pytest.raises(ValueError):
            SamplerConfig(rule="metropolis")
        with pytest.raises(ValueError):
            SamplerConfig(iterations=1)
        with pytest.raises(ValueError):
            SamplerConfig(thinning=0)


class TestProposal:
    def test_zero_step_returns_current(self):
        spec, regions, model = _setup()
        cur = Potential(np.linspace(0.5, 2.0, regions.n_omega))
        draw = make_sampler(SievePriorConfig(), spec, regions).draw(
            np.random.default_rng(0)
        )
        prop = pcn_propose(cur, draw, 0.0, regions)
        np.testing.assert_array_equal(prop.values, cur.values)

    def test_unit_step_is_pure_prior_draw(self):
        """beta=1 discards the current state: the window becomes
        1 + draw (clipped at zero)."""
        spec, regions, model = _setup()
        cur = Potential(np.full(regions.n_omega, 7.0))
        draw = make_sampler(SievePriorConfig(), spec, regions).draw(
            np.random.default_rng(2)
        )
        prop = pcn_propose(cur, draw, 1.0, regions)
        o_pos = regions.oo - regions.omega[0]
        expected = np.maximum(1.0 + draw.at(regions.oo), 0.0)
        np.testing.assert_array_equal(prop.values[o_pos], expected)

    def test_only_window_nodes_move(self):
        spec, regions, model = _setup()
        cur = Potential(np.full(regions.n_omega, 3.0))
        draw = make_sampler(SievePriorConfig(), spec, regions).draw(
            np.random.default_rng(3)
        )
        prop = pcn_propose(cur, draw, 0.5, regions)
        o_pos = regions.oo - regions.omega[0]
        frozen = np.setdiff1d(np.arange(regions.n_omega), o_pos)
        np.testing.assert_array_equal(prop.values[frozen], 3.0)

    def test_result_is_clipped_nonnegative(self):
        spec, regions, model = _setup()
        cur = Potential(np.zeros(regions.n_omega))
        big_negative = GridFunction(spec, np.full(spec.n_interior, -50.0))
        prop = pcn_propose(cur, big_negative, 1.0, regions)
        assert np.all(prop.values >= 0)

    def test_step_out_of_range_rejected(self):
        spec, regions, model = _setup()
        cur = Potential(np.ones(regions.n_omega))
        draw = GridFunction(spec, np.zeros(spec.n_interior))
        with pytest.raises(ValueError):
            pcn_propose(cur, draw, 1.5, regions)


class TestAcceptStep:
    def test_greedy_accepts_only_strict_improvement(self):
        assert accept_step(-5.0, -4.0, "greedy")
        assert not accept_step(-5.0, -5.0, "greedy")
        assert not accept_step(-5.0, -6.0, "greedy")
        assert not accept_step(-5.0, math.nan, "greedy")

    def test_greedy_consumes_no_randomness(self):
        rng = np.random.default_rng(0)
        before = rng.bit_generator.state
        accept_step(-1.0, 0.0, "greedy", rng)
        assert rng.bit_generator.state == before

    def test_pcn_requires_rng(self):
        with pytest.raises(ValueError):
            accept_step(-1.0, 0.0, "pcn", None)

    def test_pcn_always_accepts_improvements(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            assert accept_step(-2.0, -1.0, "pcn", rng)
            assert accept_step(-2.0, -2.0, "pcn", rng)

    def test_pcn_rejects_nan_but_consumes_the_uniform(self):
        """Stream alignment: a NaN rejection advances the acceptance
        stream exactly as a regular decision would."""
        rng = np.random.default_rng(123)
        accept_step(-1.0, math.nan, "pcn", rng)
        ref = np.random.default_rng(123)
        ref.random()
        assert rng.random() == ref.random()

    def test_pcn_acceptance_rate_matches_exponential(self):
        """Delta loglik = -ln 2 accepts with probability 1/2: 10^5 trials
        stay within 3 binomial standard errors."""
        rng = np.random.default_rng(7)
        trials = 100_000
        hits = sum(
            accept_step(0.0, -math.log(2.0), "pcn", rng) for _ in range(trials)
        )
        se = math.sqrt(trials * 0.25)
        assert abs(hits - trials / 2) <= 3 * se

    def test_unknown_rule_rejected(self):
        with pytest.raises(ValueError):
            accept_step(0.0, 0.0, "anneal", np.random.default_rng(0))


class TestRunChainDegenerate:
    def test_frozen_chain_under_zero_step_greedy(self):
        """beta=0 proposes the current state; the flat likelihood never
        strictly improves, so greedy rejects every iteration."""
        spec, regions, model = _setup()
        cfg = SamplerConfig(
            rule="greedy", step_beta=0.0, iterations=2, seed=0,
            prior=SievePriorConfig(),
        )
        trace = run_chain(cfg, _flat_data(), model, regions)
        assert trace.accept_count == 0
        assert trace.states.shape[0] == 1
        np.testing.assert_array_equal(trace.loglik_trace, 0.0)
        np.testing.assert_array_equal(trace.final_state.values, 1.0)

    def test_flat_pcn_accepts_everything(self):
        spec, regions, model = _setup()
        cfg = SamplerConfig(
            rule="pcn", step_beta=0.3, iterations=50, seed=4,
            prior=SievePriorConfig(),
        )
        trace = run_chain(cfg, _flat_data(), model, regions)
        assert trace.accept_count == 50
        assert trace.accept_rate == 1.0

    def test_nan_observations_reject_every_proposal(self):
        spec, regions, model = _setup()
        data = MeasurementSet(x=np.array([2.0]), y=np.array([math.nan]), sigma=0.1)
        cfg = SamplerConfig(
            rule="pcn", step_beta=0.5, iterations=30, seed=9,
            prior=SievePriorConfig(),
        )
        trace = run_chain(cfg, data, model, regions)
        assert trace.nan_rejections == 30
        assert trace.accept_count == 0
        assert trace.states.shape[0] == 1

    def test_missing_prior_rejected(self):
        spec, regions, model = _setup()
        cfg = SamplerConfig(iterations=2)
        with pytest.raises(ValueError):
            run_chain(cfg, _flat_data(), model, regions)

    def test_bad_initial_state_rejected(self):
        spec, regions, model = _setup()
        cfg = SamplerConfig(iterations=2, prior=SievePriorConfig())
        with pytest.raises(ValueError):
            run_chain(cfg, _flat_data(), model, regions, init=np.ones(3))


class TestRunChainOnData:
    def test_greedy_trace_is_nondecreasing_with_strict_jumps(self):
        spec, regions, model = _setup()
        data = _real_data(model, regions)
        cfg = SamplerConfig(
            rule="greedy", step_beta=0.3, iterations=200, seed=11,
            prior=SievePriorConfig(),
        )
        trace = run_chain(cfg, data, model, regions)
        assert np.all(np.diff(trace.loglik_trace) >= 0)
        accepted_scores = trace.loglik_trace[trace.states_iters[1:] - 1]
        assert np.all(np.diff(accepted_scores) > 0)
        assert trace.accept_count == trace.states_iters.size - 1

    def test_same_seed_is_bit_identical(self):
        spec, regions, model = _setup()
        data = _real_data(model, regions)
        cfg = SamplerConfig(
            rule="pcn", step_beta=0.4, iterations=150, seed=21,
            prior=SievePriorConfig(),
        )
        t1 = run_chain(cfg, data, model, regions)
        t2 = run_chain(cfg, data, model, regions)
        np.testing.assert_array_equal(t1.states, t2.states)
        np.testing.assert_array_equal(t1.loglik_trace, t2.loglik_trace)
        assert t1.accept_count == t2.accept_count

    def test_clipped_proposals_are_recorded(self):
        """Large proposal steps push window nodes negative; the engine
        logs the iterations whose likelihood saw a clipped state."""
        spec, regions, model = _setup()
        data = _real_data(model, regions)
        cfg = SamplerConfig(
            rule="pcn", step_beta=1.0, iterations=100, seed=31,
            prior=SievePriorConfig(),
        )
        trace = run_chain(cfg, data, model, regions)
        assert trace.clip_iterations.size > 0
        assert trace.clip_iterations.min() >= 1
        assert trace.clip_iterations.max() <= 100

    def test_thinning_touches_snapshots_only(self):
        spec, regions, model = _setup()
        data = _real_data(model, regions)
        kwargs = dict(rule="pcn", step_beta=0.4, iterations=100, seed=41,
                      prior=SievePriorConfig())
        full = run_chain(SamplerConfig(thinning=1, **kwargs), data, model, regions)
        thin = run_chain(SamplerConfig(thinning=3, **kwargs), data, model, regions)
        np.testing.assert_array_equal(full.loglik_trace, thin.loglik_trace)
        assert len(thin.accepted) == len(full.accepted[::3])
        full_iters = [i for i, _ in full.accepted]
        thin_iters = [i for i, _ in thin.accepted]
        assert thin_iters == full_iters[::3]

    def test_link_mode_runs_in_field_space(self):
        spec, regions, model = _setup()
        data = _real_data(model, regions)
        cfg = SamplerConfig(
            rule="pcn", step_beta=0.5, iterations=60, seed=51, link_mode=True,
            prior=SievePriorConfig(),
        )
        trace = run_chain(cfg, data, model, regions)
        assert trace.link is not None
        assert trace.final_state.cap == trace.link.m0
        assert np.all(trace.final_state.values > 0)
        assert np.all(trace.final_state.values <= trace.link.m0)
        for _, f in trace.accepted:
            assert np.all(f.values <= trace.link.m0)


class TestBurnInMean:
    def _hand_trace(self, states_iters, states, t_total, link=None):
        states = np.asarray(states, dtype=float)
        return ChainTrace(
            iterations=t_total,
            thinning=1,
            states_iters=np.asarray(states_iters),
            states=states,
            loglik_trace=np.zeros(t_total),
            accept_count=len(states_iters) - 1,
            nan_rejections=0,
            clip_iterations=np.array([], dtype=int),
            final_state=Potential(np.maximum(states[-1], 0.0)),
            link=link,
        )

    def test_single_late_acceptance(self):
        """T=4 with one acceptance at tau=3: the second half (tau=3,4) sits
        entirely at the accepted state."""
        trace = self._hand_trace([0, 3], [[1.0, 1.0], [5.0, 2.0]], 4)
        np.testing.assert_array_equal(burn_in_mean(trace).values, [5.0, 2.0])

    def test_alternating_chain_averages_both_states(self):
        """Acceptance at every iteration alternating a, b gives (a+b)/2
        over the second half."""
        a, b = 4.0, 2.0
        trace = self._hand_trace(
            [0, 1, 2, 3, 4], [[1.0], [a], [b], [a], [b]], 4
        )
        np.testing.assert_array_equal(burn_in_mean(trace).values, [(a + b) / 2.0])

    def test_rejections_weight_the_held_state(self):
        """T=8, acceptances at 5 and 7: second half is s0 at tau=5? no --
        values are a at tau=5,6 and b at tau=7,8, so the mean is (a+b)/2."""
        trace = self._hand_trace([0, 5, 7], [[0.0], [3.0], [9.0]], 8)
        np.testing.assert_array_equal(burn_in_mean(trace).values, [6.0])

    def test_negative_mean_states_are_clipped(self):
        trace = self._hand_trace([0, 3], [[1.0], [-2.0]], 4)
        np.testing.assert_array_equal(burn_in_mean(trace).values, [0.0])

    def test_link_mode_averages_potentials_not_fields(self):
        """With a link the average runs over link(state), which differs
        from link(average state) for a nonlinear link."""
        link = LinkFunction(m0=5.0, k=1.0)
        trace = self._hand_trace(
            [0, 1, 2, 3, 4], [[0.0], [1.0], [-1.0], [1.0], [-1.0]], 4, link=link
        )
        expected = 0.5 * (link(1.0) + link(-1.0))
        got = burn_in_mean(trace).values
        np.testing.assert_allclose(got, [expected], rtol=1e-15)
        assert got[0] != pytest.approx(link(0.0), rel=1e-6)

    def test_matches_brute_force_replay(self):
        """The run-length reconstruction equals an explicit replay of the
        chain value at every second-half iteration."""
        spec, regions, model = _setup()
        data = _real_data(model, regions)
        cfg = SamplerConfig(
            rule="pcn", step_beta=0.5, iterations=101, seed=61,
            prior=SievePriorConfig(),
        )
        trace = run_chain(cfg, data, model, regions)
        lo = trace.iterations // 2 + 1
        replayed = np.zeros(trace.states.shape[1])
        for tau in range(lo, trace.iterations + 1):
            j = np.searchsorted(trace.states_iters, tau, side="right") - 1
            replayed += trace.states[j]
        replayed = np.maximum(replayed / (trace.iterations - lo + 1), 0.0)
        np.testing.assert_allclose(burn_in_mean(trace).values, replayed, rtol=1e-12)


class TestPriorInvariance:
    def test_flat_pcn_chain_preserves_the_prior(self):
        """With a flat likelihood the pCN kernel leaves the prior exactly
        invariant: window-node moments over a 20000-iteration chain match
        the standard-normal field around background 1 (loose 3-sigma-ish
        gates for the short run)."""
        spec, regions, model = _setup()
        cfg = SamplerConfig(
            rule="pcn", step_beta=0.5, iterations=20_000, seed=71,
            prior=SievePriorConfig(),
        )
        trace = run_chain(cfg, _flat_data(), model, regions)
        o_pos = regions.oo - regions.omega[0]
        burn = 2_000
        states = trace.states[burn:, :][:, o_pos]
        mean = states.mean(axis=0)
        var = states.var(axis=0)
        assert np.all(np.abs(mean - 1.0) < 0.12)
        assert np.all(np.abs(var - 1.0) < 0.2)
