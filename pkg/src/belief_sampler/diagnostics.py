"""Learning detection and empirical checks of the convergence statements.

Everything here is a deterministic function of the traces it receives.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import (
    GAMMA_GRID_STEP,
    DistinguishabilityReport,
    decay_exponent_gamma,
    distinguishability,
    kl_divergence,
)
from .engine import FULL_BELIEF, GEOMETRIC, SimulationConfig, SimulationTrace
from .errors import EmptyExpertSet, InsufficientEnsemble, NotIdentifiable
from .graph import expert_geometry

DEFAULT_THRESHOLD = 0.95
DEFAULT_BETA_FRACTION = 0.5
MIN_SLOPE_SEEDS = 30
NORM_TOL = 1e-9


def default_burn_in(horizon: int) -> int:
    return max(100, horizon // 100)


@dataclass(frozen=True)
class AgentVerdict:
    agent: int
    learned: bool
    learning_time: int | None
    final_belief: float


def detect_learning(trace: SimulationTrace, threshold: float = DEFAULT_THRESHOLD) -> list[AgentVerdict]:
    """Threshold-and-hold surrogate for learning: belief on the true state stays
    at or above ``threshold`` from ``learning_time`` through the last record."""
    truth = trace.pooled[:, :, trace.true_state]
    verdicts = []
    for i in range(trace.n):
        below = np.flatnonzero(truth[:, i] < threshold)
        if len(below) == 0:
            k = 0
        elif below[-1] == len(truth) - 1:
            k = None
        else:
            k = int(below[-1]) + 1
        verdicts.append(AgentVerdict(
            agent=i,
            learned=k is not None,
            learning_time=None if k is None else int(trace.rounds[k]),
            final_belief=float(truth[-1, i]),
        ))
    return verdicts


def all_learned(trace: SimulationTrace, threshold: float = DEFAULT_THRESHOLD) -> bool:
    return all(v.learned for v in detect_learning(trace, threshold))


@dataclass(frozen=True)
class SlopeEstimate:
    mean: float
    stderr: float
    kl: float
    t_eval: int
    n_seeds: int

    @property
    def target(self) -> float:
        return -self.kl


def slope_statistics(values, t_eval: int, kl: float) -> SlopeEstimate:
    """Mean and standard error of per-seed slopes ``values``."""
    values = np.asarray(values, dtype=float)
    se = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else float("inf")
    return SlopeEstimate(float(values.mean()), se, kl, t_eval, len(values))


def private_decay_slope(traces, agent: int, theta: int, config: SimulationConfig,
                        t_eval: int | None = None, min_seeds: int = MIN_SLOPE_SEEDS) -> SlopeEstimate:
    """Seed-average of ``ln(mu_P(theta) / mu_P(theta*)) / t_eval`` against ``-KL``."""
    star = config.space.true_state_index
    mat = config.model.likelihoods[agent]
    report = distinguishability(config.model, config.space)
    if not report.identifiable[agent][theta]:
        raise NotIdentifiable(agent, theta)
    if len(traces) < min_seeds:
        raise InsufficientEnsemble(f"need at least {min_seeds} seeds, got {len(traces)}")
    values = []
    for tr in traces:
        t = tr.horizon if t_eval is None else t_eval
        ks = np.flatnonzero(tr.rounds == t)
        if len(ks) == 0:
            raise InsufficientEnsemble(f"round {t} not recorded in trace (seed {tr.seed})")
        if tr.log_private is None:
            raise InsufficientEnsemble(f"trace for seed {tr.seed} carries no private beliefs")
        lp = tr.log_private[ks[0], agent]
        values.append((lp[theta] - lp[star]) / t)
    used = tr.horizon if t_eval is None else t_eval
    return slope_statistics(values, used, kl_divergence(mat[star], mat[theta]))


def _post_burn_in(trace: SimulationTrace, burn_in: int):
    mask = trace.rounds >= burn_in
    return mask, trace.rounds[mask]


@dataclass
class FloorCheck:
    violations: list          # per agent
    checks: list
    bucket_edges: list
    bucket_frequency: list    # per agent, per bucket
    burn_in: int

    @property
    def frequency(self) -> list:
        return [v / c if c else 0.0 for v, c in zip(self.violations, self.checks)]

    @property
    def overall_frequency(self) -> float:
        total = sum(self.checks)
        return sum(self.violations) / total if total else 0.0


def true_state_floor(t, m: int, self_weight: float):
    return 1.0 / (m * (np.asarray(t, dtype=float) + 1.0) ** (1.0 - self_weight))


def check_true_state_floor(traces, self_weights, burn_in: int, n_buckets: int = 10) -> FloorCheck:
    """Frequency of ``mu_it(theta*) < 1 / (m (t+1)^(1 - a_ii))`` past ``burn_in``."""
    n = traces[0].n
    m = traces[0].m
    horizon = max(tr.horizon for tr in traces)
    edges = np.unique(np.linspace(burn_in, horizon + 1, n_buckets + 1).astype(np.int64))
    viol = np.zeros(n, dtype=np.int64)
    checks = np.zeros(n, dtype=np.int64)
    bucket_v = np.zeros((n, len(edges) - 1), dtype=np.int64)
    bucket_c = np.zeros((n, len(edges) - 1), dtype=np.int64)
    for tr in traces:
        mask, t = _post_burn_in(tr, burn_in)
        log_truth = tr.log_pooled[mask, :, tr.true_state]
        which = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, len(edges) - 2)
        for i in range(n):
            floor = np.log(true_state_floor(t, m, self_weights[i]))
            bad = log_truth[:, i] < floor
            viol[i] += int(bad.sum())
            checks[i] += len(t)
            np.add.at(bucket_v[i], which, bad.astype(np.int64))
            np.add.at(bucket_c[i], which, 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        freq = np.where(bucket_c > 0, bucket_v / np.maximum(bucket_c, 1), 0.0)
    return FloorCheck(viol.tolist(), checks.tolist(), edges.tolist(), freq.tolist(), burn_in)


@dataclass
class CountGrowth:
    final_ratio: list     # [seed][agent] n_iT(theta*) / (T + 1)
    min_scaled: list      # [seed][agent] min_t n_it(theta*) / (t+1)^(1 - a_ii)
    burn_in: int


def check_count_growth(traces, self_weights, burn_in: int) -> CountGrowth:
    final, scaled = [], []
    for tr in traces:
        counts = tr.counters[:, :, tr.true_state]
        final.append((counts[-1] / (tr.rounds[-1] + 1.0)).tolist())
        mask, t = _post_burn_in(tr, burn_in)
        row = []
        for i in range(tr.n):
            if not mask.any():
                row.append(float("nan"))
                continue
            ratio = counts[mask, i] / (t + 1.0) ** (1.0 - self_weights[i])
            row.append(float(ratio.min()))
        scaled.append(row)
    return CountGrowth(final, scaled, burn_in)


@dataclass
class Plateau:
    deltas: dict               # (agent, theta) -> per-seed deltas
    midpoint: list             # per-seed recorded round used for T/2

    def fraction_at_most(self, agent: int, theta: int, bound: int) -> float:
        d = np.asarray(self.deltas[(agent, theta)])
        return float((d <= bound).mean())


def _midpoint_index(trace: SimulationTrace) -> int:
    half = trace.horizon // 2
    ks = np.flatnonzero(trace.rounds <= half)
    return int(ks[-1]) if len(ks) else -1


def check_identifiable_plateau(traces, report: DistinguishabilityReport) -> Plateau:
    """``n_iT(theta) - n_{i,T/2}(theta)`` for every identifiable wrong pair."""
    deltas, mids = {}, []
    pairs = [(i, th) for i, ident in enumerate(report.identifiable)
             for th, ok in enumerate(ident) if ok]
    for tr in traces:
        k = _midpoint_index(tr)
        mids.append(int(tr.rounds[k]) if k >= 0 else 0)
        for i, th in pairs:
            before = tr.counters[k, i, th] if k >= 0 else 1
            deltas.setdefault((i, th), []).append(int(tr.counters[-1, i, th] - before))
    return Plateau(deltas, mids)


def check_invariants(trace: SimulationTrace, tol: float = NORM_TOL) -> list[str]:
    """Normalisation, counter conservation and positivity on every record."""
    failures = []
    for name, logs in (("private", trace.log_private), ("pooled", trace.log_pooled)):
        if logs is None:
            continue
        err = np.abs(np.exp(logs).sum(axis=2) - 1.0)
        bad = np.argwhere(err > tol)
        for k, i in bad[:5]:
            failures.append(f"{name} belief of agent {i} at round {trace.rounds[k]} "
                            f"off by {err[k, i]:.3g}")
        if len(bad) > 5:
            failures.append(f"... {len(bad) - 5} more {name} normalisation failures")
    if trace.counters is not None:
        sums = trace.counters.sum(axis=2)
        expected = trace.rounds[:, None] + trace.m
        bad = np.argwhere(sums != expected)
        for k, i in bad[:5]:
            failures.append(f"counters of agent {i} at round {trace.rounds[k]} sum to "
                            f"{sums[k, i]}, expected {expected[k, 0]}")
        if np.any(trace.counters < 1):
            failures.append("a counter dropped below 1")
    # positivity is judged on the log representation; deep tails legitimately
    # fall below the smallest float64 once exponentiated
    bad = np.argwhere(~np.isfinite(trace.log_pooled))
    for k, i, th in bad[:5]:
        failures.append(f"pooled belief of agent {i} on state {th} at round "
                        f"{trace.rounds[k]} has zero mass")
    return failures


@dataclass
class BoundReport:
    """Analytic quantities joined with empirical statistics for one scenario."""

    rule: str
    m: int
    n: int
    true_state: int
    collective: bool
    violating_pairs: list
    gamma_grid_step: float
    divergences: list = field(default_factory=list)
    geometry: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    empirical: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def analytic_report(config: SimulationConfig, beta_fraction: float = DEFAULT_BETA_FRACTION) -> BoundReport:
    space, model, net = config.space, config.model, config.net
    report = distinguishability(model, space)
    star = space.true_state_index
    out = BoundReport(rule=config.rule, m=space.m, n=net.n, true_state=star,
                      collective=report.collective,
                      violating_pairs=[list(p) for p in report.violating_pairs],
                      gamma_grid_step=GAMMA_GRID_STEP)
    if not report.collective:
        out.warnings.append(f"collective distinguishability fails for pairs "
                            f"{[list(p) for p in report.violating_pairs]}")
    for i, mat in enumerate(model.likelihoods):
        for th in range(space.m):
            if th == star:
                continue
            kl = kl_divergence(mat[star], mat[th])
            entry = {"agent": i, "theta": th, "kl": kl,
                     "identifiable": report.identifiable[i][th]}
            if report.identifiable[i][th]:
                spec = decay_exponent_gamma(beta_fraction * kl, mat[star], mat[th])
                entry.update(beta=spec.beta, gamma=spec.gamma, alpha_star=spec.alpha_star)
            out.divergences.append(entry)
    for th in range(space.m):
        if th == star:
            continue
        try:
            geo = expert_geometry(th, report, net)
        except EmptyExpertSet as exc:
            out.warnings.append(f"EmptyExpertSet: {exc}")
            out.geometry.append({"theta": th, "empty_expert_set": True})
            continue
        if geo.empty_levels:
            out.warnings.append(f"theta {th}: empty distance levels {list(geo.empty_levels)}")
        out.geometry.append({
            "theta": th, "empty_expert_set": False,
            "expert_set": list(geo.expert_set), "dist": list(geo.dist),
            "sigma": list(geo.sigma), "h": geo.h, "beta_bar": list(geo.beta_bar),
            "beta_tilde": list(geo.beta_tilde), "empty_levels": list(geo.empty_levels),
        })
    return out


def count_exponents(traces, agent: int, theta: int, burn_in: int) -> list[float]:
    """Per seed: max over recorded t >= burn_in of ln n_it(theta) / ln(t+1)."""
    out = []
    for tr in traces:
        mask, t = _post_burn_in(tr, burn_in)
        if not mask.any():
            out.append(float("nan"))
            continue
        c = tr.counters[mask, agent, theta]
        out.append(float(np.max(np.log(c) / np.log(t + 1.0))))
    return out


def pooled_tail_frequency(traces, agent: int, theta: int, self_weight: float, beta: float,
                          burn_in: int) -> float:
    """Fraction of records past burn-in with ``mu_it(theta) >= exp(-a_ii beta t)``."""
    hits = total = 0
    for tr in traces:
        mask, t = _post_burn_in(tr, burn_in)
        lp = tr.log_pooled[mask, agent, theta]
        hits += int(np.sum(lp >= -self_weight * beta * t))
        total += len(t)
    return hits / total if total else 0.0


def build_bound_report(config: SimulationConfig, traces, threshold: float = DEFAULT_THRESHOLD,
                       burn_in: int | None = None,
                       beta_fraction: float = DEFAULT_BETA_FRACTION) -> BoundReport:
    out = analytic_report(config, beta_fraction)
    burn_in = default_burn_in(config.horizon) if burn_in is None else burn_in
    a = config.net.self_weights
    report = distinguishability(config.model, config.space)
    verdicts = [detect_learning(tr, threshold) for tr in traces]
    emp = out.empirical
    emp["threshold"] = threshold
    emp["burn_in"] = burn_in
    emp["seeds"] = [tr.seed for tr in traces]
    emp["learning"] = {
        "rule": config.rule,
        "all_agents_rate": float(np.mean([all(v.learned for v in vs) for vs in verdicts])),
        "per_agent_rate": [float(np.mean([vs[i].learned for vs in verdicts]))
                           for i in range(config.n)],
    }
    slopes = []
    for entry in out.divergences:
        if not entry["identifiable"]:
            continue
        i, th = entry["agent"], entry["theta"]
        item = {"agent": i, "theta": th, "target": -entry["kl"]}
        try:
            est = private_decay_slope(traces, i, th, config)
            item.update(mean=est.mean, stderr=est.stderr, t_eval=est.t_eval)
        except InsufficientEnsemble as exc:
            item["skipped"] = str(exc)
        if config.rule == GEOMETRIC:
            item["pooled_tail_frequency"] = pooled_tail_frequency(
                traces, i, th, a[i], entry["beta"], burn_in)
        slopes.append(item)
    emp["private_slopes"] = slopes
    if config.rule == FULL_BELIEF:
        emp["note"] = "full-belief rule has no actions; count-based checks skipped"
        return out
    floor = check_true_state_floor(traces, a, burn_in)
    emp["true_state_floor"] = {"frequency": floor.frequency,
                               "overall_frequency": floor.overall_frequency,
                               "bucket_edges": floor.bucket_edges,
                               "bucket_frequency": floor.bucket_frequency}
    growth = check_count_growth(traces, a, burn_in)
    emp["count_growth"] = {"final_ratio": growth.final_ratio, "min_scaled": growth.min_scaled}
    plateau = check_identifiable_plateau(traces, report)
    emp["plateau"] = [{"agent": i, "theta": th, "deltas": d}
                      for (i, th), d in sorted(plateau.deltas.items())]
    exps = []
    for geo in out.geometry:
        if geo["empty_expert_set"]:
            continue
        th = geo["theta"]
        for i in range(config.n):
            ceiling = geo["beta_bar"][geo["dist"][i]]
            vals = count_exponents(traces, i, th, burn_in)
            exps.append({"agent": i, "theta": th, "dist": geo["dist"][i],
                         "ceiling": ceiling, "max_exponent": float(np.nanmax(vals))
                         if not all(math.isnan(v) for v in vals) else None})
    emp["count_exponents"] = exps
    return out
