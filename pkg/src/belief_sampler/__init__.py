"""Sample-based social learning on directed weighted networks."""

from .agent import AgentState, init_agent, pool_beliefs, private_bayes_update, record_action, sample_action
from .core import (
    LikelihoodModel,
    StateSpace,
    decay_exponent_gamma,
    distinguishability,
    kl_divergence,
    renyi_divergence,
    sample_signal,
    validate_model,
)
from .engine import SimulationConfig, SimulationTrace, run, run_ensemble
from .graph import Network, expert_geometry, scenario_generators, validate_network

__version__ = "0.1.0"
