"""JSON configuration documents: parsing, serialisation and generation."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .core import LikelihoodModel, StateSpace, distinguishability, validate_model
from .diagnostics import DEFAULT_BETA_FRACTION, DEFAULT_THRESHOLD
from .engine import GEOMETRIC, SimulationConfig, canonical_rule, hash_document
from .errors import ConfigError, GenerationBudgetExceeded, ValidationError
from .graph import Network, scenario_generators, validate_network

SECTIONS = {"states", "agents", "network", "run", "diagnostics"}
REQUIRED = {"states", "agents", "network", "run"}
STATE_KEYS = {"names", "true_state"}
AGENT_KEYS = {"signals", "likelihood"}
NETWORK_KEYS = {"matrix", "generator"}
GENERATOR_KEYS = {"kind", "n", "params", "seed"}
RUN_KEYS = {"rule", "horizon", "thinning", "seeds"}
DIAGNOSTIC_KEYS = {"threshold", "burn_in", "beta_fraction"}


def _check_keys(section: str, obj, allowed: set, required: set = frozenset()):
    if not isinstance(obj, dict):
        raise ConfigError(f"section {section!r} must be an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {section!r}: {sorted(unknown)}")
    missing = set(required) - set(obj)
    if missing:
        raise ConfigError(f"missing key(s) in {section!r}: {sorted(missing)}")


@dataclass(frozen=True, eq=False)
class ConfigFile:
    space: StateSpace
    model: LikelihoodModel
    net: Network
    network_spec: dict
    rule: str
    horizon: int
    thinning: int
    seeds: tuple
    threshold: float = DEFAULT_THRESHOLD
    burn_in: int | None = None
    beta_fraction: float = DEFAULT_BETA_FRACTION

    def to_document(self) -> dict:
        return {
            "states": {"names": list(self.space.states),
                       "true_state": self.space.states[self.space.true_state_index]},
            "agents": [{"signals": list(sig), "likelihood": mat.tolist()}
                       for sig, mat in zip(self.model.signal_spaces, self.model.likelihoods)],
            "network": self.network_spec,
            "run": {"rule": self.rule, "horizon": self.horizon, "thinning": self.thinning,
                    "seeds": list(self.seeds)},
            "diagnostics": {"threshold": self.threshold, "burn_in": self.burn_in,
                            "beta_fraction": self.beta_fraction},
        }

    @property
    def base_hash(self) -> str:
        return hash_document(self.to_document())

    def __eq__(self, other):
        if not isinstance(other, ConfigFile):
            return NotImplemented
        return self.to_document() == other.to_document()

    def simulation_config(self, seed: int | None = None, **overrides) -> SimulationConfig:
        if seed is None:
            seed = self.seeds[0]
        return SimulationConfig(self.space, self.model, self.net,
                                horizon=overrides.get("horizon") or self.horizon,
                                seed=seed,
                                rule=overrides.get("rule") or self.rule,
                                thinning=overrides.get("thinning") or self.thinning)

    def with_overrides(self, **kw) -> "ConfigFile":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "rule" in kw:
            kw["rule"] = canonical_rule(kw["rule"])
        return replace(self, **kw)


def _as_int(section, key, value, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{section}.{key} must be >= {minimum}, got {value}")
    return value


def parse_config(doc: dict) -> ConfigFile:
    _check_keys("<root>", doc, SECTIONS, REQUIRED)
    st = doc["states"]
    _check_keys("states", st, STATE_KEYS, STATE_KEYS)
    names = list(st["names"])
    if st["true_state"] not in names:
        raise ConfigError(f"true_state {st['true_state']!r} is not among the states")
    space = StateSpace(tuple(names), names.index(st["true_state"]))

    agents = doc["agents"]
    if not isinstance(agents, list) or not agents:
        raise ConfigError("'agents' must be a non-empty list")
    for k, a in enumerate(agents):
        _check_keys(f"agents[{k}]", a, AGENT_KEYS, AGENT_KEYS)
    model = validate_model([a["likelihood"] for a in agents], space,
                           [a["signals"] for a in agents])

    spec = doc["network"]
    _check_keys("network", spec, NETWORK_KEYS)
    if len(spec) != 1:
        raise ConfigError("network needs exactly one of 'matrix' or 'generator'")
    if "matrix" in spec:
        weights = spec["matrix"]
    else:
        gen = spec["generator"]
        _check_keys("network.generator", gen, GENERATOR_KEYS, {"kind", "n"})
        rng = np.random.default_rng(gen.get("seed", 0))
        weights = scenario_generators(gen["kind"], _as_int("generator", "n", gen["n"], 2),
                                      gen.get("params", {}), rng)
    net = validate_network(weights)
    if net.n != model.n:
        raise ConfigError(f"network has {net.n} agents, 'agents' lists {model.n}")

    run = doc["run"]
    _check_keys("run", run, RUN_KEYS, {"horizon"})
    seeds = run.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("run.seeds must be a non-empty list")
    seeds = tuple(_as_int("run", "seeds", s, 0) for s in seeds)
    if len(set(seeds)) != len(seeds):
        raise ConfigError("run.seeds must be distinct")

    diag = doc.get("diagnostics", {})
    _check_keys("diagnostics", diag, DIAGNOSTIC_KEYS)
    burn_in = diag.get("burn_in")
    if burn_in is not None:
        _as_int("diagnostics", "burn_in", burn_in, 0)
    threshold = float(diag.get("threshold", DEFAULT_THRESHOLD))
    if not 0 < threshold <= 1:
        raise ConfigError("diagnostics.threshold must lie in (0, 1]")
    beta_fraction = float(diag.get("beta_fraction", DEFAULT_BETA_FRACTION))
    if not 0 < beta_fraction < 1:
        raise ConfigError("diagnostics.beta_fraction must lie in (0, 1)")

    cfg = ConfigFile(space=space, model=model, net=net, network_spec=spec,
                     rule=canonical_rule(run.get("rule", GEOMETRIC)),
                     horizon=_as_int("run", "horizon", run["horizon"], 1),
                     thinning=_as_int("run", "thinning", run.get("thinning", 1), 1),
                     seeds=seeds, threshold=threshold, burn_in=burn_in,
                     beta_fraction=beta_fraction)
    cfg.simulation_config()  # cross-module validation
    return cfg


def serialize_config(cfg: ConfigFile) -> str:
    return json.dumps(cfg.to_document(), indent=2) + "\n"


def loads_config(text: str) -> ConfigFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(doc)


def load_config(path) -> ConfigFile:
    with open(path, encoding="utf-8") as fh:
        return loads_config(fh.read())


def from_simulation_config(config: SimulationConfig, seeds=None) -> ConfigFile:
    return ConfigFile(space=config.space, model=config.model, net=config.net,
                      network_spec={"matrix": config.net.weights.tolist()},
                      rule=config.rule, horizon=int(config.horizon),
                      thinning=int(config.thinning),
                      seeds=tuple(seeds) if seeds is not None else (int(config.seed),))


def _random_row(rng, size: int, decimals: int = 4, floor: float = 0.2) -> list[float]:
    raw = (1.0 - floor) * rng.dirichlet(np.ones(size)) + floor / size
    head = [round(float(x), decimals) for x in raw[:-1]]
    return head + [round(1.0 - sum(head), decimals)]


def generate_config(kind: str, n: int, m: int, params: dict | None = None, seed: int = 0,
                    horizon: int = 1000, budget: int = 1000) -> ConfigFile:
    """Runnable config with a generated network and collectively distinguishable
    likelihoods: every wrong state gets a designated agent whose row for it
    differs from the true-state row; other rows copy the true-state row."""
    params = dict(params or {})
    n_signals = int(params.pop("signals", 2))
    if n_signals < 2:
        raise ValidationError("agents need at least two signals")
    if m < 2:
        raise ValidationError("need at least two states")
    rng = np.random.default_rng(seed)
    weights = scenario_generators(kind, n, params, rng)
    space = StateSpace(tuple(f"theta{k}" for k in range(m)), 0)
    for _ in range(budget):
        designated = rng.permutation(max(n, m - 1))[: m - 1] % n
        rows = []
        for i in range(n):
            base = _random_row(rng, n_signals)
            mat = [base] * m
            for th in range(1, m):
                if designated[th - 1] != i:
                    continue
                row = _random_row(rng, n_signals)
                taken = [mat[0]] + [mat[k] for k in range(1, m) if k != th]
                while min(max(abs(a - b) for a, b in zip(row, other)) for other in taken) < 0.05:
                    row = _random_row(rng, n_signals)
                mat = mat[:th] + [row] + mat[th + 1:]
            rows.append(mat)
        model = validate_model(rows, space)
        if distinguishability(model, space).collective:
            break
    else:
        raise GenerationBudgetExceeded("could not assign distinguishable likelihoods")
    net = validate_network(weights)
    return ConfigFile(space=space, model=model, net=net,
                      network_spec={"matrix": net.weights.tolist()},
                      rule=GEOMETRIC, horizon=horizon, thinning=1, seeds=(seed,))
