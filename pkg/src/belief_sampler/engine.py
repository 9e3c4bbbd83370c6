"""Round-based simulation of the sample-based dynamics and the two baselines.

Round ordering for every rule (t counts completed rounds):

1. each agent draws a private signal and updates its private belief;
2. each agent pools using neighbour information from the end of round t-1;
3. each agent samples an action from its new belief;
4. counters are incremented.

Neighbours' round-t actions therefore reach pooled beliefs at round t+1.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .agent import bayes_log_update, geometric_pool, log_empirical, sample_indices
from .core import LikelihoodModel, StateSpace
from .errors import ValidationError
from .graph import Network

GEOMETRIC = "geometric-sample"
FULL_BELIEF = "full-belief-arithmetic"
SAMPLE_ARITHMETIC = "sample-arithmetic"
RULES = (GEOMETRIC, FULL_BELIEF, SAMPLE_ARITHMETIC)
RULE_ALIASES = {"full-belief": FULL_BELIEF}

SIGNAL_STREAM = 0
ACTION_STREAM = 1
STREAM_BLOCK = 1024


def canonical_rule(rule: str) -> str:
    rule = RULE_ALIASES.get(rule, rule)
    if rule not in RULES:
        raise ValidationError(f"unknown rule {rule!r}; expected one of {RULES}")
    return rule


class UniformStream:
    """Buffered U[0,1) stream; block draws equal one-at-a-time draws for PCG64."""

    def __init__(self, generator: np.random.Generator, block: int = STREAM_BLOCK):
        self._gen = generator
        self._block = block
        self._buf = np.empty(0)
        self._pos = 0

    def random(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self._gen.random(self._block)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)


def agent_stream(seed: int, agent: int, purpose: int) -> UniformStream:
    """Split function: (root seed, agent, purpose) -> independent stream."""
    ss = np.random.SeedSequence(seed, spawn_key=(agent, purpose))
    return UniformStream(np.random.Generator(np.random.PCG64(ss)))


@dataclass
class Streams:
    signal: list
    action: list

    @classmethod
    def from_seed(cls, seed: int, n: int) -> "Streams":
        return cls([agent_stream(seed, i, SIGNAL_STREAM) for i in range(n)],
                   [agent_stream(seed, i, ACTION_STREAM) for i in range(n)])

    def signal_uniforms(self) -> np.ndarray:
        return np.array([s.random() for s in self.signal])

    def action_uniforms(self) -> np.ndarray:
        return np.array([s.random() for s in self.action])


@dataclass(frozen=True, eq=False)
class SimulationConfig:
    space: StateSpace
    model: LikelihoodModel
    net: Network
    horizon: int
    seed: int
    rule: str = GEOMETRIC
    thinning: int = 1

    def __post_init__(self):
        object.__setattr__(self, "rule", canonical_rule(self.rule))
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValidationError(f"horizon must be a positive integer, got {self.horizon!r}")
        if int(self.thinning) != self.thinning or self.thinning < 1:
            raise ValidationError(f"thinning must be a positive integer, got {self.thinning!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValidationError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.model.n != self.net.n:
            raise ValidationError(
                f"model has {self.model.n} agents but network has {self.net.n}"
            )
        if any(mat.shape[0] != self.space.m for mat in self.model.likelihoods):
            raise ValidationError("likelihood matrices do not match the state space")

    @property
    def n(self) -> int:
        return self.net.n

    @property
    def m(self) -> int:
        return self.space.m

    def to_dict(self) -> dict:
        return {
            "states": {"names": list(self.space.states),
                       "true_state": self.space.states[self.space.true_state_index]},
            "agents": [{"signals": list(sig), "likelihood": mat.tolist()}
                       for sig, mat in zip(self.model.signal_spaces, self.model.likelihoods)],
            "network": {"matrix": self.net.weights.tolist()},
            "run": {"rule": self.rule, "horizon": int(self.horizon),
                    "thinning": int(self.thinning), "seed": int(self.seed)},
        }


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def hash_document(doc) -> str:
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()


def config_hash(config: SimulationConfig) -> str:
    return hash_document(config.to_dict())


@dataclass(frozen=True, eq=False)
class _Static:
    n: int
    m: int
    star: int
    diag: np.ndarray
    offdiag: np.ndarray
    lik: np.ndarray       # (n, m, S_max), padded with 1
    loglik: np.ndarray
    signal_cdf: np.ndarray  # (n, S_max), padded with inf
    signal_sizes: np.ndarray

    @classmethod
    def from_config(cls, config: SimulationConfig) -> "_Static":
        n, m = config.n, config.m
        smax = max(mat.shape[1] for mat in config.model.likelihoods)
        lik = np.ones((n, m, smax))
        cdf = np.full((n, smax), np.inf)
        sizes = np.empty(n, dtype=np.int64)
        star = config.space.true_state_index
        for i, mat in enumerate(config.model.likelihoods):
            k = mat.shape[1]
            lik[i, :, :k] = mat
            cdf[i, :k] = np.cumsum(mat[star])
            sizes[i] = k
        w = config.net.weights
        return cls(n=n, m=m, star=star, diag=np.diag(w).copy(),
                   offdiag=w - np.diag(np.diag(w)), lik=lik, loglik=np.log(lik),
                   signal_cdf=cdf, signal_sizes=sizes)


@dataclass
class World:
    """Full population state after ``t`` completed rounds."""

    static: _Static = field(repr=False)
    t: int
    log_private: np.ndarray
    log_pooled: np.ndarray
    counters: np.ndarray
    belief: np.ndarray
    actions: np.ndarray
    signals: np.ndarray

    def copy(self) -> "World":
        return replace(self, log_private=self.log_private.copy(),
                       log_pooled=self.log_pooled.copy(), counters=self.counters.copy(),
                       belief=self.belief.copy(), actions=self.actions.copy(),
                       signals=self.signals.copy())


def init_world(config: SimulationConfig, streams: Streams | None = None) -> World:
    """Uniform beliefs and unit counters for every agent.

    The sample-arithmetic rule needs neighbour actions before round 1; those
    are drawn from the uniform initial beliefs using each agent's action
    stream, and are not added to the counters.
    """
    st = _Static.from_config(config)
    n, m = st.n, st.m
    uniform = np.full((n, m), -math.log(m))
    world = World(static=st, t=0, log_private=uniform.copy(), log_pooled=uniform.copy(),
                  counters=np.ones((n, m), dtype=np.int64), belief=np.full((n, m), 1.0 / m),
                  actions=np.full(n, -1, dtype=np.int64), signals=np.full(n, -1, dtype=np.int64))
    if config.rule == SAMPLE_ARITHMETIC:
        if streams is None:
            raise ValidationError("sample-arithmetic initialisation needs the action streams")
        world.actions = sample_indices(world.belief, streams.action_uniforms())
    return world


def _draw_signals(world: World, streams: Streams) -> np.ndarray:
    st = world.static
    u = streams.signal_uniforms()
    k = (u[:, None] >= st.signal_cdf).sum(axis=1)
    return np.minimum(k, st.signal_sizes - 1)


def _signal_columns(st: _Static, signals: np.ndarray, log: bool) -> np.ndarray:
    src = st.loglik if log else st.lik
    return src[np.arange(st.n), :, signals]


def _record(world: World, actions: np.ndarray) -> None:
    world.counters[np.arange(world.static.n), actions] += 1
    world.actions = actions


def step_geometric(world: World, streams: Streams) -> World:
    st = world.static
    w = world.copy()
    signals = _draw_signals(w, streams)
    w.log_private = bayes_log_update(w.log_private, _signal_columns(st, signals, log=True))
    # counters still hold actions through round t-1
    w.log_pooled = geometric_pool(w.log_private, st.diag, log_empirical(w.counters), st.offdiag)
    w.belief = np.exp(w.log_pooled)
    actions = sample_indices(w.belief, streams.action_uniforms())
    _record(w, actions)
    w.signals = signals
    w.t += 1
    return w


def _arithmetic_step(world: World, streams: Streams, neighbor_term) -> World:
    st = world.static
    w = world.copy()
    signals = _draw_signals(w, streams)
    w.log_private = bayes_log_update(w.log_private, _signal_columns(st, signals, log=True))
    lik = _signal_columns(st, signals, log=False)
    weighted = lik * w.belief
    bayes = weighted / weighted.sum(axis=1, keepdims=True)
    belief = st.diag[:, None] * bayes + neighbor_term(w)
    w.belief = belief
    with np.errstate(divide="ignore"):
        w.log_pooled = np.log(belief)
    w.signals = signals
    return w


def step_full_belief(world: World, streams: Streams) -> World:
    w = _arithmetic_step(world, streams, lambda w: w.static.offdiag @ w.belief)
    w.actions = np.full(w.static.n, -1, dtype=np.int64)
    w.t += 1
    return w


def step_sample_arithmetic(world: World, streams: Streams) -> World:
    def indicator(w):
        onehot = np.zeros((w.static.n, w.static.m))
        onehot[np.arange(w.static.n), w.actions] = 1.0
        return w.static.offdiag @ onehot

    w = _arithmetic_step(world, streams, indicator)
    actions = sample_indices(w.belief, streams.action_uniforms())
    _record(w, actions)
    w.t += 1
    return w


STEPS = {
    GEOMETRIC: step_geometric,
    FULL_BELIEF: step_full_belief,
    SAMPLE_ARITHMETIC: step_sample_arithmetic,
}


@dataclass(eq=False)
class SimulationTrace:
    """Per-recorded-round history.  Arrays are indexed ``[record, agent, ...]``.

    ``actions`` is -1 and ``counters`` is None for the full-belief rule.
    ``beliefs`` keeps the linear pooled beliefs exactly as the rule produced
    them, so files and verdicts do not depend on an exp/log round trip.
    """

    rounds: np.ndarray
    log_private: np.ndarray
    log_pooled: np.ndarray
    actions: np.ndarray
    counters: np.ndarray | None
    signals: np.ndarray
    config_hash: str
    seed: int
    rule: str
    thinning: int
    horizon: int
    true_state: int
    beliefs: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.signals.shape[1]

    @property
    def m(self) -> int:
        return self.log_pooled.shape[2]

    @property
    def pooled(self) -> np.ndarray:
        if self.beliefs is not None:
            return self.beliefs
        return np.exp(self.log_pooled)

    @property
    def private(self) -> np.ndarray:
        return np.exp(self.log_private)

    def equals(self, other: "SimulationTrace") -> bool:
        same_counters = (self.counters is None and other.counters is None) or (
            self.counters is not None and other.counters is not None
            and np.array_equal(self.counters, other.counters))
        return (same_counters
                and self.config_hash == other.config_hash and self.seed == other.seed
                and self.rule == other.rule and np.array_equal(self.rounds, other.rounds)
                and np.array_equal(self.log_private, other.log_private)
                and np.array_equal(self.log_pooled, other.log_pooled)
                and np.array_equal(self.actions, other.actions)
                and np.array_equal(self.signals, other.signals))


def recorded_rounds(horizon: int, thinning: int) -> np.ndarray:
    rounds = list(range(thinning, horizon + 1, thinning))
    if not rounds or rounds[-1] != horizon:
        rounds.append(horizon)
    return np.array(rounds, dtype=np.int64)


def run(config: SimulationConfig) -> SimulationTrace:
    streams = Streams.from_seed(config.seed, config.n)
    world = init_world(config, streams)
    step = STEPS[config.rule]
    rounds = recorded_rounds(config.horizon, config.thinning)
    r, n, m = len(rounds), config.n, config.m
    log_private = np.empty((r, n, m))
    log_pooled = np.empty((r, n, m))
    beliefs = np.empty((r, n, m))
    actions = np.empty((r, n), dtype=np.int64)
    signals = np.empty((r, n), dtype=np.int64)
    has_counters = config.rule != FULL_BELIEF
    counters = np.empty((r, n, m), dtype=np.int64) if has_counters else None
    k = 0
    for t in range(1, config.horizon + 1):
        world = step(world, streams)
        if t == rounds[k]:
            log_private[k] = world.log_private
            log_pooled[k] = world.log_pooled
            beliefs[k] = world.belief
            actions[k] = world.actions
            signals[k] = world.signals
            if has_counters:
                counters[k] = world.counters
            k += 1
    return SimulationTrace(rounds=rounds, log_private=log_private, log_pooled=log_pooled,
                           actions=actions, counters=counters, signals=signals,
                           config_hash=config_hash(config), seed=int(config.seed),
                           rule=config.rule, thinning=int(config.thinning),
                           horizon=int(config.horizon),
                           true_state=config.space.true_state_index, beliefs=beliefs)


def run_ensemble(config: SimulationConfig, seeds, parallelism: int = 1) -> list[SimulationTrace]:
    seeds = [int(s) for s in seeds]
    if len(set(seeds)) != len(seeds):
        raise ValidationError("ensemble seeds must be distinct")
    configs = [replace(config, seed=s) for s in seeds]
    if parallelism <= 1 or len(configs) <= 1:
        return [run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=min(parallelism, len(configs))) as pool:
        return list(pool.map(run, configs))
