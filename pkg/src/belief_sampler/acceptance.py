"""Pass/fail evaluation of the acceptance criteria against ensembles.

Each ``criterion_*`` function returns a :class:`CriterionResult`; the CLI's
``verify`` command and the test suite share them.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .core import StateSpace, distinguishability, kl_divergence, validate_model
from .diagnostics import (
    all_learned,
    check_count_growth,
    check_identifiable_plateau,
    check_invariants,
    check_true_state_floor,
    private_decay_slope,
)
from .engine import FULL_BELIEF, GEOMETRIC, SimulationConfig, run
from .errors import EmptyExpertSet
from .graph import expert_geometry, random_network, validate_network
from .tracefile import write_trace

LEARN_THRESHOLD = 0.95
GEOMETRIC_SEED_FRACTION = 19 / 20
FULL_BELIEF_SEED_FRACTION = 1.0
SLOPE_REL_TOL = 0.10
SLOPE_MIN_SEEDS = 30
FLOOR_BURN_IN = 100
FLOOR_MAX_FREQUENCY = 0.01
COUNT_RATIO_MIN = 0.5
PLATEAU_DELTA = 3
PLATEAU_SEED_FRACTION = 0.90
BETA_BAR_TOL = 1e-12
NORM_TOL = 1e-9


@dataclass(frozen=True)
class CriterionResult:
    key: str
    title: str
    passed: bool
    detail: str
    applicable: bool = True

    @property
    def status(self) -> str:
        if not self.applicable:
            return "N/A"
        return "PASS" if self.passed else "FAIL"

    def line(self) -> str:
        return f"[{self.status}] {self.key} {self.title}: {self.detail}"

    def to_dict(self) -> dict:
        return {"key": self.key, "title": self.title, "status": self.status,
                "detail": self.detail}


def _na(key, title, why):
    return CriterionResult(key, title, True, why, applicable=False)


def learning_seed_flags(traces, threshold=LEARN_THRESHOLD) -> list[bool]:
    return [all_learned(tr, threshold) for tr in traces]


def criterion_learning(traces, rule: str, threshold: float = LEARN_THRESHOLD) -> CriterionResult:
    if rule == GEOMETRIC:
        key, title, need = "C1", "learning under sample-based geometric pooling", GEOMETRIC_SEED_FRACTION
    elif rule == FULL_BELIEF:
        key, title, need = "C2", "learning under full-belief baseline", FULL_BELIEF_SEED_FRACTION
    else:
        return _na("C1", "learning", "sample-arithmetic rule carries no learning guarantee")
    flags = learning_seed_flags(traces, threshold)
    ok = sum(flags)
    frac = ok / len(flags)
    worst = [min(tr.pooled[-1, :, tr.true_state].tolist()) for tr in traces]
    return CriterionResult(key, title, frac >= need - 1e-12,
                           f"{ok}/{len(flags)} seeds with every agent holding "
                           f"mu(theta*) >= {threshold} (need >= {need:.0%}); "
                           f"lowest final belief {min(worst):.4f}")


def criterion_slope(traces, config: SimulationConfig) -> CriterionResult:
    title = "private log-ratio slope"
    if len(traces) < SLOPE_MIN_SEEDS:
        return _na("C3", title, f"needs >= {SLOPE_MIN_SEEDS} seeds, got {len(traces)}")
    report = distinguishability(config.model, config.space)
    star = config.space.true_state_index
    parts, ok = [], True
    for i, ident in enumerate(report.identifiable):
        for th, flag in enumerate(ident):
            if not flag:
                continue
            est = private_decay_slope(traces, i, th, config)
            kl = kl_divergence(config.model.likelihoods[i][star], config.model.likelihoods[i][th])
            rel = abs(est.mean + kl) / kl
            ok &= rel <= SLOPE_REL_TOL
            parts.append(f"agent {i} theta {th}: mean {est.mean:.6f} vs {-kl:.6f} "
                         f"(rel err {rel:.3%}, se {est.stderr:.2g})")
    if not parts:
        return _na("C3", title, "no identifiable (agent, state) pair")
    return CriterionResult("C3", title, ok, "; ".join(parts))


def criterion_floor(traces, config: SimulationConfig) -> CriterionResult:
    title = "true-state belief floor"
    if config.rule != GEOMETRIC:
        return _na("C4", title, "only stated for the geometric rule")
    chk = check_true_state_floor(traces, config.net.self_weights, FLOOR_BURN_IN)
    freq = chk.overall_frequency
    return CriterionResult("C4", title, freq <= FLOOR_MAX_FREQUENCY,
                           f"violation frequency {freq:.4%} over {sum(chk.checks)} "
                           f"checks for t in [{FLOOR_BURN_IN}, T] (limit {FLOOR_MAX_FREQUENCY:.0%})")


def criterion_count_growth(traces, config: SimulationConfig,
                           threshold: float = LEARN_THRESHOLD) -> CriterionResult:
    title = "true-state count growth in passing seeds"
    if config.rule != GEOMETRIC:
        return _na("C5", title, "only stated for the geometric rule")
    growth = check_count_growth(traces, config.net.self_weights, FLOOR_BURN_IN)
    flags = learning_seed_flags(traces, threshold)
    all_min = min(min(r) for r in growth.final_ratio)
    passing = [r for r, f in zip(growth.final_ratio, flags) if f]
    if not passing:
        return CriterionResult("C5", title, False,
                               f"no passing seed to evaluate (lowest ratio over all seeds "
                               f"{all_min:.4f}, need >= {COUNT_RATIO_MIN})")
    low = min(min(r) for r in passing)
    return CriterionResult("C5", title, low >= COUNT_RATIO_MIN,
                           f"lowest n_iT(theta*)/(T+1) over {len(passing)} passing seeds "
                           f"{low:.4f} (need >= {COUNT_RATIO_MIN}); over all seeds {all_min:.4f}")


def criterion_plateau(traces, config: SimulationConfig) -> CriterionResult:
    title = "finite wrong picks of identifiable states"
    if config.rule != GEOMETRIC:
        return _na("C6", title, "only stated for the geometric rule")
    report = distinguishability(config.model, config.space)
    plateau = check_identifiable_plateau(traces, report)
    if not plateau.deltas:
        return _na("C6", title, "no expert agents")
    parts, ok = [], True
    for (i, th), deltas in sorted(plateau.deltas.items()):
        frac = plateau.fraction_at_most(i, th, PLATEAU_DELTA)
        ok &= frac >= PLATEAU_SEED_FRACTION
        parts.append(f"agent {i} theta {th}: {frac:.0%} of seeds with delta <= "
                     f"{PLATEAU_DELTA} (max {max(deltas)})")
    return CriterionResult("C6", title, ok, "; ".join(parts))


def beta_bar_exact(weights, dist, sigma) -> list[Fraction]:
    """Rational-arithmetic evaluation of the distance-indexed exponent recursion."""
    beta = [Fraction(3, 4)]
    for level in range(1, max(dist) + 1):
        members = [i for i, d in enumerate(dist) if d == level]
        beta.append(max(1 - Fraction(weights[i][sigma[i]]).limit_denominator(10**12)
                        * (1 - beta[-1]) for i in members))
    return beta


def criterion_exponents(config: SimulationConfig) -> CriterionResult:
    title = "distance-indexed exponent recursion"
    report = distinguishability(config.model, config.space)
    ok, parts = True, []
    w = config.net.weights.tolist()
    for th in range(config.m):
        if th == config.space.true_state_index:
            continue
        try:
            geo = expert_geometry(th, report, config.net)
        except EmptyExpertSet:
            ok = False
            parts.append(f"theta {th}: empty expert set")
            continue
        exact = beta_bar_exact(w, geo.dist, geo.sigma)
        err = max(abs(float(e) - b) for e, b in zip(exact, geo.beta_bar))
        good = err <= BETA_BAR_TOL and max(geo.beta_bar) < 1 and max(geo.beta_tilde) < 1
        ok &= good
        parts.append(f"theta {th}: beta_bar {[round(b, 6) for b in geo.beta_bar]}, "
                     f"max beta_tilde {max(geo.beta_tilde):.4f}, rational err {err:.1e}")
    return CriterionResult("C7", title, ok, "; ".join(parts))


def criterion_invariants(traces) -> CriterionResult:
    failures = []
    for tr in traces:
        failures += [f"seed {tr.seed}: {f}" for f in check_invariants(tr, NORM_TOL)]
    rounds = sum(len(tr.rounds) for tr in traces)
    detail = (f"{rounds} recorded rounds checked, {len(failures)} failures"
              + (f" (first: {failures[0]})" if failures else ""))
    return CriterionResult("C8", "round invariants", not failures, detail)


def trace_bytes(config: SimulationConfig) -> bytes:
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "trace.csv")
        write_trace(run(config), path)
        with open(path, "rb") as fh:
            return fh.read()


def criterion_determinism(configs) -> CriterionResult:
    same = [trace_bytes(c) == trace_bytes(c) for c in configs]
    return CriterionResult("C9", "byte-identical reruns", all(same),
                           f"{sum(same)}/{len(same)} reruns byte-identical")


def evaluate(config: SimulationConfig, traces, threshold: float = LEARN_THRESHOLD,
             determinism_seeds: int = 1) -> list[CriterionResult]:
    """All criteria that make sense for one scenario and its ensemble."""
    results = [criterion_learning(traces, config.rule, threshold),
               criterion_slope(traces, config),
               criterion_floor(traces, config),
               criterion_count_growth(traces, config, threshold),
               criterion_plateau(traces, config),
               criterion_exponents(config),
               criterion_invariants(traces),
               criterion_determinism([replace(config, seed=tr.seed)
                                      for tr in traces[:determinism_seeds]])]
    return results


def all_passed(results) -> bool:
    return all(r.passed for r in results if r.applicable)


def random_fixture_exponents(count: int = 100, seed: int = 0):
    """beta_tilde maxima on random strongly connected networks with random expert sets."""
    rng = np.random.default_rng(seed)
    out = []
    space = StateSpace(("a", "b"), 0)
    for _ in range(count):
        n = int(rng.integers(2, 9))
        net = validate_network(random_network(n, float(rng.uniform(0.2, 0.7)), rng))
        experts = rng.random(n) < 0.3
        experts[int(rng.integers(n))] = True
        rows = [[(0.8, 0.2), (0.3, 0.7)] if e else [(0.5, 0.5), (0.5, 0.5)] for e in experts]
        report = distinguishability(validate_model(rows, space), space)
        geo = expert_geometry(1, report, net)
        out.append((geo, net))
    return out
