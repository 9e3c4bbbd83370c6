"""Named scenarios used by the acceptance suite, the CLI and the tests."""

from __future__ import annotations

import numpy as np

from .core import StateSpace, validate_model
from .engine import GEOMETRIC, SimulationConfig
from .graph import ring, validate_network

UNINFORMATIVE = (0.5, 0.5)
CHAIN_WEIGHTS = ((0.6, 0.4, 0.0), (0.3, 0.3, 0.4), (0.0, 0.5, 0.5))


def acceptance_ring(horizon: int = 10_000, seed: int = 0, rule: str = GEOMETRIC,
                    thinning: int = 1, self_weight: float = 0.6) -> SimulationConfig:
    """Five-agent directed ring, three states, one expert per wrong state.

    Agent 0 alone separates state 1 from the true state 0, agent 2 alone
    separates state 2; the rest see uninformative coin flips.
    """
    space = StateSpace(("theta0", "theta1", "theta2"), 0)
    hi, lo = (0.9, 0.1), (0.1, 0.9)
    rows = [[UNINFORMATIVE] * 3 for _ in range(5)]
    rows[0] = [hi, lo, hi]
    rows[2] = [hi, hi, lo]
    model = validate_model(rows, space)
    net = validate_network(ring(5, self_weight))
    return SimulationConfig(space, model, net, horizon=horizon, seed=seed, rule=rule,
                            thinning=thinning)


def single_agent(horizon: int = 2000, seed: int = 0, rule: str = GEOMETRIC,
                 rows=((0.9, 0.1), (0.5, 0.5))) -> SimulationConfig:
    space = StateSpace(("theta0", "theta1"), 0)
    model = validate_model([rows], space)
    net = validate_network(np.ones((1, 1)))
    return SimulationConfig(space, model, net, horizon=horizon, seed=seed, rule=rule)


def chain(horizon: int = 1000, seed: int = 0, rule: str = GEOMETRIC) -> SimulationConfig:
    """Three agents in a line; agent 2 is the only one who can tell the states apart."""
    space = StateSpace(("theta0", "theta1"), 0)
    rows = [[UNINFORMATIVE] * 2, [UNINFORMATIVE] * 2, [(0.8, 0.2), (0.3, 0.7)]]
    model = validate_model(rows, space)
    net = validate_network(np.array(CHAIN_WEIGHTS))
    return SimulationConfig(space, model, net, horizon=horizon, seed=seed, rule=rule)


def pinned_uniform(n: int = 3, m: int = 3, horizon: int = 2000, seed: int = 0,
                   self_weight: float = 0.5) -> SimulationConfig:
    """Every likelihood row identical: nobody can learn anything."""
    space = StateSpace(tuple(f"theta{k}" for k in range(m)), 0)
    model = validate_model([[UNINFORMATIVE] * m for _ in range(n)], space)
    net = validate_network(ring(n, self_weight))
    return SimulationConfig(space, model, net, horizon=horizon, seed=seed)
