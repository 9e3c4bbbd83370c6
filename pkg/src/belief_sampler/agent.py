"""Single-agent state and update rules.

Every kernel below works on the last axis, so the same function updates one
agent (shape ``(m,)``) or a whole population (shape ``(n, m)``).  The
simulation engine relies on that to keep the per-round cost low.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import inverse_cdf
from .errors import WeightMismatch

NORM_TOL = 1e-9


def log_normalize(x: np.ndarray) -> np.ndarray:
    mx = np.max(x, axis=-1, keepdims=True)
    return x - (mx + np.log(np.sum(np.exp(x - mx), axis=-1, keepdims=True)))


def bayes_log_update(log_belief: np.ndarray, log_lik: np.ndarray) -> np.ndarray:
    """Posterior in log space; ``log_lik`` holds ln l(signal | theta) per state."""
    return log_normalize(log_belief + log_lik)


def log_empirical(counters: np.ndarray) -> np.ndarray:
    """ln of counters / (t + m); the denominator is the exact integer counter sum."""
    counters = np.asarray(counters)
    return np.log(counters) - np.log(counters.sum(axis=-1, keepdims=True))


def geometric_pool(log_private, self_weight, log_empiricals, neighbor_weights) -> np.ndarray:
    """Normalised weighted geometric mean of a private belief and neighbour empiricals.

    For one agent: ``log_private`` (m,), scalar ``self_weight``,
    ``log_empiricals`` (k, m), ``neighbor_weights`` (k,).  For a population the
    shapes are (n, m), (n,), (n, m) and an (n, n) matrix with zero diagonal.
    """
    self_weight = np.asarray(self_weight, dtype=float)
    mixed = self_weight[..., None] * log_private
    if np.size(neighbor_weights):
        mixed = mixed + np.asarray(neighbor_weights) @ np.asarray(log_empiricals)
    return log_normalize(mixed)


def sample_indices(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise inverse-CDF draws; agrees element-wise with :func:`inverse_cdf`."""
    cdf = np.cumsum(probs, axis=-1)
    k = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(k, probs.shape[-1] - 1)


@dataclass
class EmpiricalDistribution:
    probs: np.ndarray
    t: int
    m: int

    @classmethod
    def from_counters(cls, counters) -> "EmpiricalDistribution":
        counters = np.asarray(counters, dtype=np.int64)
        total = int(counters.sum())
        return cls(counters / total, total - len(counters), len(counters))

    @property
    def log_probs(self) -> np.ndarray:
        return np.log(self.probs)


@dataclass
class AgentState:
    log_private: np.ndarray
    counters: np.ndarray
    log_pooled: np.ndarray
    last_action: int | None = None

    @property
    def m(self) -> int:
        return len(self.counters)

    @property
    def t(self) -> int:
        """Number of recorded actions."""
        return int(self.counters.sum()) - self.m

    @property
    def private(self) -> np.ndarray:
        return np.exp(self.log_private)

    @property
    def pooled(self) -> np.ndarray:
        return np.exp(self.log_pooled)

    def empirical(self) -> EmpiricalDistribution:
        return EmpiricalDistribution.from_counters(self.counters)


def init_agent(m: int) -> AgentState:
    if m < 2:
        raise ValueError("need at least two states")
    uniform = np.full(m, -np.log(m))
    return AgentState(uniform.copy(), np.ones(m, dtype=np.int64), uniform.copy())


def private_bayes_update(state: AgentState, signal: int, likelihood) -> AgentState:
    """Apply one private signal; ``likelihood`` is the agent's m x |S| matrix."""
    log_lik = np.log(np.asarray(likelihood, dtype=float)[:, signal])
    return replace(state, log_private=bayes_log_update(state.log_private, log_lik))


def record_action(state: AgentState, action: int) -> AgentState:
    if not 0 <= action < state.m:
        raise ValueError(f"action {action} outside [0, {state.m})")
    counters = state.counters.copy()
    counters[action] += 1
    return replace(state, counters=counters, last_action=int(action))


def pool_beliefs(state: AgentState, neighbor_empiricals, self_weight: float,
                 neighbor_weights) -> AgentState:
    neighbor_weights = np.asarray(neighbor_weights, dtype=float).reshape(-1)
    if len(neighbor_empiricals) != len(neighbor_weights):
        raise WeightMismatch(
            f"{len(neighbor_empiricals)} empiricals for {len(neighbor_weights)} weights"
        )
    total = self_weight + neighbor_weights.sum()
    if abs(total - 1.0) > NORM_TOL:
        raise WeightMismatch(f"pooling weights sum to {total!r}, not 1")
    logs = np.array([e.log_probs for e in neighbor_empiricals]).reshape(-1, state.m)
    pooled = geometric_pool(state.log_private, self_weight, logs, neighbor_weights)
    return replace(state, log_pooled=pooled)


def sample_action(state: AgentState, rng) -> int:
    return inverse_cdf(state.pooled, rng.random())
