import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from belief_sampler.core import distinguishability
from belief_sampler.diagnostics import (
    analytic_report,
    build_bound_report,
    check_count_growth,
    check_identifiable_plateau,
    check_invariants,
    check_true_state_floor,
    default_burn_in,
    detect_learning,
    private_decay_slope,
    slope_statistics,
    true_state_floor,
)
from belief_sampler.engine import GEOMETRIC, SimulationTrace, run_ensemble
from belief_sampler.errors import InsufficientEnsemble, NotIdentifiable
from belief_sampler.scenarios import acceptance_ring, chain, pinned_uniform, single_agent


def synthetic(truth, rounds=None, m=2, counters=None, seed=0, horizon=None):
    """Trace with one agent whose true-state belief follows ``truth``."""
    truth = np.asarray(truth, dtype=float)
    r = len(truth)
    rounds = np.arange(1, r + 1) if rounds is None else np.asarray(rounds)
    probs = np.empty((r, 1, m))
    probs[:, 0, 0] = truth
    probs[:, 0, 1:] = ((1 - truth) / (m - 1))[:, None]
    with np.errstate(divide="ignore"):
        logs = np.log(probs)
    return SimulationTrace(rounds=rounds, log_private=logs.copy(), log_pooled=logs,
                           actions=np.zeros((r, 1), dtype=np.int64), counters=counters,
                           signals=np.zeros((r, 1), dtype=np.int64), config_hash="x",
                           seed=seed, rule=GEOMETRIC, thinning=1,
                           horizon=int(rounds[-1]) if horizon is None else horizon,
                           true_state=0, beliefs=probs)


def test_default_burn_in():
    assert default_burn_in(1000) == 100
    assert default_burn_in(10_000) == 100
    assert default_burn_in(50_000) == 500


def test_detect_learning_constant_traces():
    (v,) = detect_learning(synthetic(np.ones(50)))
    assert v.learned and v.learning_time == 1 and v.final_belief == 1.0
    (v,) = detect_learning(synthetic(np.full(50, 0.5)))
    assert not v.learned and v.learning_time is None


def test_detect_learning_crossing():
    truth = np.where(np.arange(1, 1001) >= 400, 0.97, 0.6)
    (v,) = detect_learning(synthetic(truth))
    assert v.learning_time == 400
    rounds = np.arange(30, 1001, 30)
    (v,) = detect_learning(synthetic(np.where(rounds >= 400, 0.97, 0.6), rounds=rounds))
    assert v.learning_time == 420


def test_detect_learning_requires_hold():
    truth = np.full(100, 0.99)
    truth[-1] = 0.9
    (v,) = detect_learning(synthetic(truth))
    assert not v.learned
    truth[-1] = 0.99
    truth[60] = 0.5
    (v,) = detect_learning(synthetic(truth))
    assert v.learning_time == 62


@given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=60), st.floats(0.3, 0.98), st.floats(0.3, 0.98))
@settings(max_examples=150, deadline=None)
def test_learning_verdict_invariants(values, t1, t2):
    tr = synthetic(values)
    lo, hi = sorted((t1, t2))
    (v_lo,), (v_hi,) = detect_learning(tr, lo), detect_learning(tr, hi)
    for v, thr in ((v_lo, lo), (v_hi, hi)):
        assert v.learned == (v.learning_time is not None)
        if v.learned:
            k = v.learning_time - 1
            assert all(x >= thr for x in values[k:])
            assert k == 0 or values[k - 1] < thr
    # a stricter threshold can only delay or remove learning
    if v_hi.learned:
        assert v_lo.learned and v_lo.learning_time <= v_hi.learning_time


def test_slope_on_single_agent_ensemble():
    cfg = single_agent(horizon=2000)
    traces = run_ensemble(cfg, range(50))
    est = private_decay_slope(traces, 0, 1, cfg, t_eval=2000)
    assert est.kl == pytest.approx(0.368064, abs=1e-6)
    assert abs(est.mean - est.target) <= 0.03
    assert est.n_seeds == 50 and est.t_eval == 2000
    with pytest.raises(InsufficientEnsemble):
        private_decay_slope(traces[:10], 0, 1, cfg)
    with pytest.raises(InsufficientEnsemble):
        private_decay_slope(traces, 0, 1, cfg, t_eval=3000)


def test_slope_rejects_equivalent_state():
    cfg = acceptance_ring(horizon=10)
    with pytest.raises(NotIdentifiable):
        private_decay_slope([], 1, 1, cfg)
    with pytest.raises(NotIdentifiable):
        private_decay_slope([], 0, 2, cfg)


def _synthetic_slopes(rng, seeds, t, mean=-0.2, sd=1.0):
    return rng.normal(mean, sd, size=(seeds, t)).sum(axis=1) / t


def test_slope_band_coverage():
    rng = np.random.default_rng(0)
    covered = 0
    reps = 1000
    for _ in range(reps):
        est = slope_statistics(_synthetic_slopes(rng, 30, 50), 50, 0.2)
        covered += abs(est.mean - est.target) <= 2.5 * est.stderr
    assert covered / reps >= 0.95


def test_slope_band_shrinks_with_horizon():
    rng = np.random.default_rng(1)
    se_t = np.mean([slope_statistics(_synthetic_slopes(rng, 40, 200), 200, 0.2).stderr
                    for _ in range(200)])
    se_2t = np.mean([slope_statistics(_synthetic_slopes(rng, 40, 400), 400, 0.2).stderr
                     for _ in range(200)])
    assert se_t / se_2t == pytest.approx(math.sqrt(2), rel=0.05)


def test_floor_boundary_is_not_a_violation():
    assert true_state_floor(0, 3, 0.4) == pytest.approx(1 / 3)
    t = np.arange(1, 301)
    tr = synthetic(true_state_floor(t, 2, 0.5))
    tr.log_pooled[:, 0, 0] = np.log(true_state_floor(t, 2, 0.5))
    chk = check_true_state_floor([tr], [0.5], burn_in=1)
    assert chk.violations == [0]
    tr.log_pooled[:, 0, 0] -= 1e-9
    chk = check_true_state_floor([tr], [0.5], burn_in=100)
    assert chk.violations == [201] and chk.checks == [201]
    assert chk.overall_frequency == 1.0


def test_floor_bayesian_agent_has_no_late_violations():
    cfg = single_agent(horizon=2000)
    chk = check_true_state_floor(run_ensemble(cfg, range(5)), [1.0], burn_in=100)
    assert chk.overall_frequency == 0.0
    assert len(chk.bucket_frequency[0]) == len(chk.bucket_edges) - 1


def test_count_growth_pinned_uniform():
    cfg = pinned_uniform(n=3, m=3, horizon=10_000)
    traces = run_ensemble(cfg, range(10))
    growth = check_count_growth(traces, cfg.net.self_weights, 100)
    ratios = np.array(growth.final_ratio)
    assert np.all(np.abs(ratios - 1 / 3) <= 0.02)
    report = distinguishability(cfg.model, cfg.space)
    assert check_identifiable_plateau(traces, report).deltas == {}
    half = cfg.horizon / 2 / cfg.m
    for tr in traces:
        mid = np.flatnonzero(tr.rounds <= cfg.horizon // 2)[-1]
        delta = tr.counters[-1, :, 1] - tr.counters[mid, :, 1]
        assert np.all(np.abs(delta - half) <= 0.1 * half)


def test_count_growth_initial_ratio():
    counters = np.ones((1, 1, 2), dtype=np.int64)
    counters[0, 0, 0] = 2
    tr = synthetic([0.5], counters=counters)
    growth = check_count_growth([tr], [0.5], burn_in=0)
    assert growth.final_ratio == [[1.0]]
    assert growth.min_scaled[0][0] == pytest.approx(2 / 2 ** 0.5)
    # pseudocounts alone give ratio 1 at t = 0
    fresh = synthetic([0.5], rounds=[0], counters=np.ones((1, 1, 2), dtype=np.int64))
    assert check_count_growth([fresh], [0.5], burn_in=0).min_scaled == [[1.0]]


def test_plateau_excludes_true_state_and_uses_midpoint():
    cfg = chain(horizon=400)
    traces = run_ensemble(cfg, range(3))
    plateau = check_identifiable_plateau(traces, distinguishability(cfg.model, cfg.space))
    assert set(plateau.deltas) == {(2, 1)}
    assert plateau.midpoint == [200, 200, 200]
    for tr, d in zip(traces, plateau.deltas[(2, 1)]):
        assert d == tr.counters[-1, 2, 1] - tr.counters[199, 2, 1]


def test_invariant_checker_flags_broken_traces():
    tr = run_ensemble(acceptance_ring(horizon=100), [0])[0]
    assert check_invariants(tr) == []
    tr.counters[5, 1, 0] += 1
    tr.log_pooled[7, 2] += 1e-6
    failures = check_invariants(tr)
    assert any("counters of agent 1" in f for f in failures)
    assert any("pooled belief of agent 2" in f for f in failures)
    tr = run_ensemble(acceptance_ring(horizon=100), [0])[0]
    tr.log_pooled[9, 0, 1] = -np.inf
    assert "pooled belief of agent 0 on state 1 at round 10 has zero mass" in check_invariants(tr)


def test_invariants_accept_tails_below_float_range():
    # expert beliefs on wrong states sink far below exp(-745) yet stay positive
    tr = run_ensemble(acceptance_ring(horizon=2000), [0])[0]
    assert tr.log_pooled.min() < -745
    assert check_invariants(tr) == []


def test_bound_report_chain_echoes_recursion():
    rep = analytic_report(chain())
    (geo,) = rep.geometry
    assert geo["beta_bar"] == pytest.approx([0.75, 0.9, 0.96], abs=1e-12)
    assert rep.warnings == []
    for entry in rep.divergences:
        if entry["identifiable"]:
            assert 0 < entry["beta"] < entry["kl"]
            assert entry["gamma"] > 0
    assert all(b < 1 for b in geo["beta_tilde"])


def test_bound_report_flags_missing_expert():
    cfg = pinned_uniform(n=3, m=2, horizon=10)
    rep = analytic_report(cfg)
    assert not rep.collective
    assert rep.violating_pairs == [[0, 1]]
    assert any("EmptyExpertSet" in w for w in rep.warnings)
    assert rep.geometry == [{"theta": 1, "empty_expert_set": True}]


def test_bound_report_is_deterministic():
    cfg = acceptance_ring(horizon=300)
    traces = run_ensemble(cfg, range(3))
    a = build_bound_report(cfg, traces).to_dict()
    b = build_bound_report(cfg, run_ensemble(cfg, range(3))).to_dict()
    assert a == b
    emp = a["empirical"]
    assert emp["burn_in"] == 100 and emp["seeds"] == [0, 1, 2]
    assert "skipped" in emp["private_slopes"][0]
    assert {"true_state_floor", "count_growth", "plateau", "count_exponents"} <= set(emp)
