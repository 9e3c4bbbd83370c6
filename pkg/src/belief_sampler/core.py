"""State space, likelihood structure, signal draws and divergence machinery."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BetaOutOfRange,
    DimensionMismatch,
    LengthMismatch,
    NonPositiveEntry,
    NotAProbabilityVector,
    RowSumMismatch,
    ValidationError,
)

ROW_SUM_TOL = 1e-9
GAMMA_GRID_STEP = 1e-4
GOLDEN_TOL = 1e-12


@dataclass(frozen=True)
class StateSpace:
    states: tuple
    true_state_index: int

    def __post_init__(self):
        states = tuple(self.states)
        object.__setattr__(self, "states", states)
        if len(states) < 2:
            raise ValidationError("the state space needs at least two states")
        if len(set(states)) != len(states):
            raise ValidationError("state identifiers must be unique")
        if not 0 <= self.true_state_index < len(states):
            raise ValidationError(
                f"true_state_index {self.true_state_index} outside [0, {len(states)})"
            )

    @property
    def m(self) -> int:
        return len(self.states)


@dataclass(frozen=True, eq=False)
class LikelihoodModel:
    """Per-agent signal spaces and likelihood matrices ``l_i`` of shape m x |S_i|.

    Build instances through :func:`validate_model`; the constructor does not
    check anything beyond array conversion.
    """

    signal_spaces: tuple
    likelihoods: tuple = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.likelihoods)

    def row(self, agent: int, state: int) -> np.ndarray:
        return self.likelihoods[agent][state]

    def __eq__(self, other):
        if not isinstance(other, LikelihoodModel):
            return NotImplemented
        return self.signal_spaces == other.signal_spaces and all(
            np.array_equal(a, b) for a, b in zip(self.likelihoods, other.likelihoods)
        )


def validate_model(likelihoods, space: StateSpace, signal_spaces=None) -> LikelihoodModel:
    """Check raw likelihood matrices and freeze them into a :class:`LikelihoodModel`.

    ``likelihoods`` is a sequence with one ``m x |S_i|`` nested list per agent.
    ``signal_spaces`` defaults to ``range(|S_i|)`` for each agent.
    """
    if isinstance(likelihoods, LikelihoodModel):
        signal_spaces = likelihoods.signal_spaces if signal_spaces is None else signal_spaces
        likelihoods = likelihoods.likelihoods
    if len(likelihoods) == 0:
        raise DimensionMismatch("the model needs at least one agent")
    if signal_spaces is not None and len(signal_spaces) != len(likelihoods):
        raise DimensionMismatch(
            f"{len(signal_spaces)} signal spaces given for {len(likelihoods)} agents"
        )
    mats = []
    spaces = []
    for i, raw in enumerate(likelihoods):
        mat = np.array(raw, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != space.m:
            raise DimensionMismatch(
                f"agent {i}: likelihood must have {space.m} rows, got shape {mat.shape}"
            )
        if mat.shape[1] < 2:
            raise DimensionMismatch(f"agent {i}: signal space must have at least 2 signals")
        sig = tuple(range(mat.shape[1])) if signal_spaces is None else tuple(signal_spaces[i])
        if len(sig) != mat.shape[1]:
            raise DimensionMismatch(
                f"agent {i}: {len(sig)} signals declared, matrix has {mat.shape[1]} columns"
            )
        if len(set(sig)) != len(sig):
            raise DimensionMismatch(f"agent {i}: signal identifiers must be unique")
        for s in range(space.m):
            for k in range(mat.shape[1]):
                if not mat[s, k] > 0:
                    raise NonPositiveEntry(i, s, k, float(mat[s, k]))
            total = float(mat[s].sum())
            if abs(total - 1.0) > ROW_SUM_TOL:
                raise RowSumMismatch(i, s, total)
        mat.setflags(write=False)
        mats.append(mat)
        spaces.append(sig)
    return LikelihoodModel(tuple(spaces), tuple(mats))


def inverse_cdf(probs, u: float) -> int:
    """Index of the first cumulative mass strictly above ``u``, in declared order."""
    cdf = np.cumsum(probs)
    k = int(np.searchsorted(cdf, u, side="right"))
    return min(k, len(cdf) - 1)


def sample_signal(agent: int, true_state: int, model: LikelihoodModel, rng) -> int:
    """Draw agent's private signal under ``true_state``; ``rng`` needs ``random()``."""
    return inverse_cdf(model.likelihoods[agent][true_state], rng.random())


def _check_pair(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise LengthMismatch(f"distributions have shapes {p.shape} and {q.shape}")
    for name, v in (("P", p), ("Q", q)):
        if not np.all(v > 0):
            raise NonPositiveEntry(None, name, int(np.argmin(v)), float(v.min()))
        if abs(v.sum() - 1.0) > ROW_SUM_TOL:
            raise NotAProbabilityVector(f"{name} sums to {v.sum()!r}")
    return p, q


def kl_divergence(p, q) -> float:
    """KL divergence in nats."""
    p, q = _check_pair(p, q)
    return max(float(np.sum(p * (np.log(p) - np.log(q)))), 0.0)


def renyi_divergence(alpha: float, p, q) -> float:
    """Rényi divergence of order ``alpha`` in nats; ``alpha == 1`` is KL."""
    if alpha < 0:
        raise ValidationError(f"Renyi order must be >= 0, got {alpha}")
    if alpha == 1:
        return kl_divergence(p, q)
    p, q = _check_pair(p, q)
    return _log_moment(alpha, np.log(p), np.log(q)) / (alpha - 1.0)


def _log_moment(alpha, logp, logq):
    # ln sum p^a q^(1-a), evaluated by log-sum-exp
    x = alpha * logp + (1.0 - alpha) * logq
    mx = x.max()
    return float(mx + math.log(np.exp(x - mx).sum()))


@dataclass(frozen=True)
class ExponentSpec:
    beta: float
    gamma: float
    alpha_star: float
    grid_step: float = GAMMA_GRID_STEP


def _golden_max(f, lo, hi, tol=GOLDEN_TOL):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def decay_exponent_gamma(beta: float, p, q, grid_step: float = GAMMA_GRID_STEP) -> ExponentSpec:
    """Tail exponent for the private log-ratio bound at decay target ``beta``.

    Maximises ``(1 - a) * (D_a(P||Q) - beta)`` over ``a`` in (0, 1): a dense
    grid locates the bracket, golden-section refines inside it.
    """
    kl = kl_divergence(p, q)
    if not 0 < beta < kl:
        raise BetaOutOfRange(beta, kl)
    logp = np.log(np.asarray(p, dtype=float))
    logq = np.log(np.asarray(q, dtype=float))

    def g(a):
        # (1-a) * D_a == -ln sum p^a q^(1-a)
        return -_log_moment(a, logp, logq) - (1.0 - a) * beta

    steps = int(round(1.0 / grid_step))
    grid = np.arange(1, steps) * grid_step
    x = grid[:, None] * logp[None, :] + (1.0 - grid[:, None]) * logq[None, :]
    mx = x.max(axis=1)
    vals = -(mx + np.log(np.exp(x - mx[:, None]).sum(axis=1))) - (1.0 - grid) * beta
    k = int(np.argmax(vals))
    lo = grid[k - 1] if k > 0 else 0.0
    hi = grid[k + 1] if k + 1 < len(grid) else 1.0
    a_star, best = _golden_max(g, lo, hi)
    if best < vals[k]:
        a_star, best = float(grid[k]), float(vals[k])
    return ExponentSpec(beta=float(beta), gamma=float(best), alpha_star=float(a_star),
                        grid_step=grid_step)


@dataclass(frozen=True)
class DistinguishabilityReport:
    """Pairwise observational equivalence per agent plus the collective verdict.

    ``equivalent[i]`` is an m x m boolean array; ``identifiable[i][theta]`` is
    True when agent i separates ``theta`` from the true state.
    """

    equivalent: tuple
    identifiable: tuple
    collective: bool
    violating_pairs: tuple
    true_state_index: int
    tolerance: float

    def experts(self, theta: int) -> list[int]:
        return [i for i, ident in enumerate(self.identifiable) if ident[theta]]


def distinguishability(model: LikelihoodModel, space: StateSpace,
                       tolerance: float = 1e-12) -> DistinguishabilityReport:
    m = space.m
    star = space.true_state_index
    equivalent = []
    identifiable = []
    for mat in model.likelihoods:
        diff = np.abs(mat[:, None, :] - mat[None, :, :]).max(axis=2)
        eq = diff <= tolerance
        eq.setflags(write=False)
        equivalent.append(eq)
        identifiable.append(tuple(bool(th != star and not eq[th, star]) for th in range(m)))
    violating = tuple(
        (a, b)
        for a in range(m)
        for b in range(a + 1, m)
        if all(eq[a, b] for eq in equivalent)
    )
    return DistinguishabilityReport(
        equivalent=tuple(equivalent),
        identifiable=tuple(identifiable),
        collective=not violating,
        violating_pairs=violating,
        true_state_index=star,
        tolerance=tolerance,
    )
