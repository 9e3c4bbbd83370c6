"""Trust networks: validation, scenario generators and expert-set geometry.

Edge convention: ``i -> j`` exists iff ``a_ij > 0`` with ``i != j``, meaning
agent ``i`` observes agent ``j``.  Self-loops never count toward
reachability between distinct agents.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .core import DistinguishabilityReport
from .errors import (
    EmptyExpertSet,
    GenerationBudgetExceeded,
    NotRowStochastic,
    NotStronglyConnected,
    ValidationError,
    ZeroDiagonal,
)

ROW_SUM_TOL = 1e-9
BETA_BAR_ZERO = 0.75
SELF_WEIGHT_FLOOR = 0.1


@dataclass(frozen=True, eq=False)
class Network:
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def self_weights(self) -> np.ndarray:
        return np.diag(self.weights).copy()

    def neighbors(self, i: int) -> list[int]:
        return [j for j in range(self.n) if j != i and self.weights[i, j] > 0]

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return np.array_equal(self.weights, other.weights)


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adj[u]):
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return seen


def unreachable_pair(weights) -> tuple[int, int] | None:
    """Return ``(source, target)`` with target unreachable from source, or None."""
    w = np.asarray(weights)
    adj = w > 0
    np.fill_diagonal(adj, False)
    forward = _reachable(adj, 0)
    if not forward.all():
        return 0, int(np.flatnonzero(~forward)[0])
    backward = _reachable(adj.T, 0)
    if not backward.all():
        return int(np.flatnonzero(~backward)[0]), 0
    return None


def validate_network(weights) -> Network:
    w = np.array(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] == 0:
        raise ValidationError(f"weight matrix must be square, got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValidationError("weights must be finite and non-negative")
    for i, total in enumerate(w.sum(axis=1)):
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise NotRowStochastic(i, float(total))
    for i in range(w.shape[0]):
        if not w[i, i] > 0:
            raise ZeroDiagonal(i)
    pair = unreachable_pair(w)
    if pair is not None:
        raise NotStronglyConnected(*pair)
    w.setflags(write=False)
    return Network(w)


@dataclass(frozen=True)
class ExpertGeometry:
    """Distances to the expert set of one wrong state and the derived exponents."""

    theta: int
    expert_set: tuple
    dist: tuple
    sigma: tuple  # None for experts
    h: int
    beta_bar: tuple
    beta_tilde: tuple
    empty_levels: tuple = ()


def expert_geometry(theta: int, report: DistinguishabilityReport, net: Network) -> ExpertGeometry:
    n = net.n
    w = net.weights
    experts = [i for i in range(n) if report.identifiable[i][theta]]
    if not experts:
        raise EmptyExpertSet(theta)
    dist = [-1] * n
    queue = deque()
    for e in experts:
        dist[e] = 0
        queue.append(e)
    # multi-source BFS over reversed observation edges
    while queue:
        u = queue.popleft()
        for p in range(n):
            if p != u and w[p, u] > 0 and dist[p] < 0:
                dist[p] = dist[u] + 1
                queue.append(p)
    if min(dist) < 0:
        raise NotStronglyConnected(int(dist.index(-1)), experts[0])
    sigma = []
    for i in range(n):
        if dist[i] == 0:
            sigma.append(None)
        else:
            sigma.append(min(j for j in range(n)
                             if j != i and w[i, j] > 0 and dist[j] == dist[i] - 1))
    h = max(dist)
    beta_bar = [BETA_BAR_ZERO]
    empty = []
    for level in range(1, h + 1):
        members = [i for i in range(n) if dist[i] == level]
        if not members:
            # unreachable for BFS distances, kept for hand-built inputs
            empty.append(level)
            beta_bar.append(beta_bar[-1])
            continue
        beta_bar.append(max(1.0 - w[i, sigma[i]] * (1.0 - beta_bar[-1]) for i in members))
    beta_tilde = []
    for i in range(n):
        val = w[i, i] + sum(w[i, j] * beta_bar[dist[j]] for j in range(n) if j != i)
        beta_tilde.append(float(val))
    return ExpertGeometry(
        theta=theta,
        expert_set=tuple(experts),
        dist=tuple(dist),
        sigma=tuple(sigma),
        h=h,
        beta_bar=tuple(float(b) for b in beta_bar),
        beta_tilde=tuple(beta_tilde),
        empty_levels=tuple(empty),
    )


def ring(n: int, self_weight: float = 0.5) -> np.ndarray:
    """Directed cycle: agent i observes agent i+1 (mod n)."""
    if n < 2:
        raise ValidationError("ring needs n >= 2")
    if not 0 < self_weight < 1:
        raise ValidationError("ring self weight must lie in (0, 1)")
    w = np.zeros((n, n))
    for i in range(n):
        w[i, i] = self_weight
        w[i, (i + 1) % n] = 1.0 - self_weight
    return w


def star(n: int, self_weight: float = 0.5) -> np.ndarray:
    """Hub 0 observes every spoke; every spoke observes the hub."""
    if n < 2:
        raise ValidationError("star needs n >= 2")
    if not 0 < self_weight < 1:
        raise ValidationError("star self weight must lie in (0, 1)")
    w = np.zeros((n, n))
    w[0, 0] = self_weight
    w[0, 1:] = (1.0 - self_weight) / (n - 1)
    for i in range(1, n):
        w[i, i] = self_weight
        w[i, 0] = 1.0 - self_weight
    return w


def random_network(n: int, p: float, rng: np.random.Generator, budget: int = 1000,
                   floor: float = SELF_WEIGHT_FLOOR) -> np.ndarray:
    """Directed Erdős–Rényi support, resampled until strongly connected."""
    if n < 2:
        raise ValidationError("random network needs n >= 2")
    if not 0 < p <= 1:
        raise ValidationError("edge probability must lie in (0, 1]")
    for _ in range(budget):
        support = rng.random((n, n)) < p
        np.fill_diagonal(support, False)
        if unreachable_pair(support) is not None:
            continue
        w = np.where(support, rng.random((n, n)), 0.0)
        np.fill_diagonal(w, np.maximum(rng.random(n), floor))
        return w / w.sum(axis=1, keepdims=True)
    raise GenerationBudgetExceeded(
        f"no strongly connected support after {budget} draws (n={n}, p={p})"
    )


def scenario_generators(kind: str, n: int, params: dict | None = None,
                        rng: np.random.Generator | None = None) -> np.ndarray:
    params = dict(params or {})
    if kind == "ring":
        return ring(n, params.get("self_weight", 0.5))
    if kind == "star":
        return star(n, params.get("self_weight", 0.5))
    if kind == "random":
        if rng is None:
            rng = np.random.default_rng(params.get("seed", 0))
        return random_network(n, params.get("p", 0.5), rng,
                              budget=params.get("budget", 1000),
                              floor=params.get("floor", SELF_WEIGHT_FLOOR))
    raise ValidationError(f"unknown network kind {kind!r}")
