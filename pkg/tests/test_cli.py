import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from belief_sampler.cli import EXIT_CRITERIA, EXIT_INVALID, EXIT_IO, EXIT_OK, main
from belief_sampler.configfile import (
    from_simulation_config,
    generate_config,
    load_config,
    loads_config,
    parse_config,
    serialize_config,
)
from belief_sampler.core import distinguishability
from belief_sampler.diagnostics import detect_learning
from belief_sampler.engine import FULL_BELIEF, SAMPLE_ARITHMETIC, config_hash, run
from belief_sampler.errors import ConfigError, NotRowStochastic, ValidationError
from belief_sampler.scenarios import acceptance_ring, chain, pinned_uniform
from belief_sampler.tracefile import read_trace, write_trace

MINIMAL = {
    "states": {"names": ["good", "bad"], "true_state": "good"},
    "agents": [
        {"signals": ["h", "t"], "likelihood": [[0.7, 0.3], [0.4, 0.6]]},
        {"signals": ["h", "t"], "likelihood": [[0.5, 0.5], [0.5, 0.5]]},
    ],
    "network": {"matrix": [[0.6, 0.4], [0.3, 0.7]]},
    "run": {"rule": "geometric-sample", "horizon": 40, "thinning": 1, "seeds": [5]},
}


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def dump_config(tmp_path, sim_config, name="cfg.json", seeds=None):
    path = tmp_path / name
    path.write_text(serialize_config(from_simulation_config(sim_config, seeds)))
    return str(path)


def read_bytes(directory):
    return {name: open(os.path.join(directory, name), "rb").read()
            for name in sorted(os.listdir(directory))}


def test_parse_minimal_config():
    cfg = parse_config(MINIMAL)
    assert cfg.space.states == ("good", "bad")
    assert cfg.seeds == (5,)
    assert cfg.burn_in is None and cfg.threshold == 0.95
    sim = cfg.simulation_config()
    assert sim.horizon == 40 and sim.seed == 5 and sim.n == 2


def test_generator_network_spec():
    doc = dict(MINIMAL, network={"generator": {"kind": "ring", "n": 2, "params": {"self_weight": 0.7}}})
    cfg = parse_config(doc)
    assert np.allclose(cfg.net.weights, [[0.7, 0.3], [0.3, 0.7]], atol=1e-15)
    assert loads_config(serialize_config(cfg)) == cfg


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(extra=1),
    lambda d: d["run"].update(speed=3),
    lambda d: d["states"].update(prior=[0.5, 0.5]),
    lambda d: d["agents"][0].update(name="x"),
    lambda d: d.update(diagnostics={"alpha": 0.1}),
    lambda d: d["network"].update(generator={"kind": "ring", "n": 2}),
    lambda d: d.pop("run"),
    lambda d: d["run"].update(seeds=[1, 1]),
    lambda d: d["run"].update(horizon=2.5),
    lambda d: d["states"].update(true_state="ugly"),
])
def test_config_rejections(mutate):
    doc = json.loads(json.dumps(MINIMAL))
    mutate(doc)
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_module_validation_surfaces():
    doc = json.loads(json.dumps(MINIMAL))
    doc["network"]["matrix"][0] = [0.6, 0.5]
    with pytest.raises(NotRowStochastic):
        parse_config(doc)
    with pytest.raises(ConfigError):
        loads_config("{not json")


@given(st.sampled_from(["ring", "star", "random"]), st.integers(2, 6), st.integers(2, 4),
       st.integers(0, 2**20))
@settings(max_examples=30, deadline=None)
def test_generated_configs_round_trip(kind, n, m, seed):
    cfg = generate_config(kind, n, m, {"p": 0.6}, seed)
    text = serialize_config(cfg)
    again = loads_config(text)
    assert again == cfg
    assert serialize_config(again) == text
    assert again.base_hash == cfg.base_hash
    assert distinguishability(cfg.model, cfg.space).collective


def test_scenario_config_round_trip():
    for sim in (acceptance_ring(), chain(), pinned_uniform()):
        cfg = from_simulation_config(sim)
        assert loads_config(serialize_config(cfg)) == cfg
        assert config_hash(loads_config(serialize_config(cfg)).simulation_config()) == config_hash(sim)


@pytest.mark.parametrize("rule", ["geometric-sample", FULL_BELIEF, SAMPLE_ARITHMETIC])
def test_trace_file_round_trip(tmp_path, rule):
    tr = run(acceptance_ring(horizon=300, seed=2, rule=rule, thinning=7))
    path = tmp_path / "t.csv"
    write_trace(tr, path)
    back = read_trace(path)
    assert np.array_equal(back.pooled, tr.pooled)
    assert np.array_equal(back.rounds, tr.rounds)
    assert np.array_equal(back.actions, tr.actions)
    assert np.array_equal(back.signals, tr.signals)
    assert (back.counters is None) == (tr.counters is None)
    if tr.counters is not None:
        assert np.array_equal(back.counters, tr.counters)
    assert (back.config_hash, back.seed, back.rule) == (tr.config_hash, tr.seed, tr.rule)
    assert detect_learning(back) == detect_learning(tr)
    text = path.read_bytes()
    assert b"\r" not in text
    lines = text.decode().splitlines()
    assert lines[1] == "t,agent,signal,action,belief_0,belief_1,belief_2,count_0,count_1,count_2"
    for line in lines[2:]:
        cells = line.split(",")
        assert abs(sum(map(float, cells[4:7])) - 1) < 1e-9
        if tr.counters is not None:
            assert sum(map(int, cells[7:])) == int(cells[0]) + 3


def test_run_smoke(tmp_path):
    cfg = write_json(tmp_path / "min.json", MINIMAL)
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert sorted(os.listdir(out)) == ["summary.json", "trace_seed5.csv"]
    summary = json.loads((out / "summary.json").read_text())
    (entry,) = summary["runs"]
    assert len(entry["verdicts"]) == 2 and len(entry["final_beliefs"]) == 2
    assert summary["base_config_hash"] == load_config(cfg).base_hash
    assert entry["effective_config_hash"] == config_hash(load_config(cfg).simulation_config())
    assert "round_ordering" in summary


def test_run_seed_override_and_rerun(tmp_path):
    cfg = write_json(tmp_path / "min.json", MINIMAL)
    a, b, c = (str(tmp_path / k) for k in "abc")
    assert main(["run", "--config", cfg, "--out", a]) == EXIT_OK
    assert main(["run", "--config", cfg, "--out", b]) == EXIT_OK
    assert read_bytes(a) == read_bytes(b)
    assert main(["run", "--config", cfg, "--seed", "6", "--out", c]) == EXIT_OK
    sa = json.load(open(os.path.join(a, "summary.json")))
    sc = json.load(open(os.path.join(c, "summary.json")))
    assert sa["base_config_hash"] == sc["base_config_hash"]
    assert sa["runs"][0]["effective_config_hash"] != sc["runs"][0]["effective_config_hash"]
    assert os.listdir(c).count("trace_seed6.csv") == 1


def test_run_flag_overrides(tmp_path):
    cfg = write_json(tmp_path / "min.json", MINIMAL)
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--horizon", "25", "--thin", "10",
                 "--rule", "full-belief", "--out", str(out)]) == EXIT_OK
    tr = read_trace(out / "trace_seed5.csv")
    assert tr.rounds.tolist() == [10, 20, 25]
    assert tr.rule == FULL_BELIEF and tr.counters is None


def test_exit_codes_for_bad_input(tmp_path):
    bad = json.loads(json.dumps(MINIMAL))
    bad["agents"][0]["likelihood"][0] = [0.7, 0.2]
    path = write_json(tmp_path / "bad.json", bad)
    assert main(["run", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_INVALID
    assert main(["bounds", "--config", str(tmp_path / "missing.json")]) == EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("")
    good = write_json(tmp_path / "min.json", MINIMAL)
    assert main(["run", "--config", good, "--out", str(blocker)]) == EXIT_IO


def test_bounds_all_expert(tmp_path, capsys):
    doc = json.loads(json.dumps(MINIMAL))
    doc["agents"][1]["likelihood"] = [[0.2, 0.8], [0.6, 0.4]]
    assert main(["bounds", "--config", write_json(tmp_path / "c.json", doc)]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert [g["beta_bar"] for g in report["geometry"]] == [[0.75]]
    assert "empirical" not in report


def test_bounds_chain_to_file(tmp_path):
    out = tmp_path / "bounds.json"
    assert main(["bounds", "--config", dump_config(tmp_path, chain()), "--out", str(out)]) == EXIT_OK
    report = json.loads(out.read_text())
    assert report["geometry"][0]["beta_bar"] == pytest.approx([0.75, 0.9, 0.96], abs=1e-12)


def test_bounds_warns_on_violating_pairs(tmp_path, capsys):
    path = dump_config(tmp_path, pinned_uniform(n=2, m=2, horizon=10))
    assert main(["bounds", "--config", path]) == EXIT_OK
    err = capsys.readouterr().err
    assert "[[0, 1]]" in err
    assert "EmptyExpertSet" in err


def test_verify_short_horizon_fails(tmp_path, capsys):
    path = dump_config(tmp_path, acceptance_ring())
    out = tmp_path / "v"
    code = main(["verify", "--config", path, "--seeds", "3", "--horizon", "50", "--out", str(out)])
    assert code == EXIT_CRITERIA
    doc = json.loads((out / "report.json").read_text())
    status = {c["key"]: c["status"] for c in doc["criteria"]}
    assert status["C1"] == "FAIL"
    assert status["C3"] == "N/A"
    assert "CRITERIA FAILED" in capsys.readouterr().out


def test_verify_sample_arithmetic_marks_not_applicable(tmp_path):
    path = dump_config(tmp_path, acceptance_ring(horizon=200, rule=SAMPLE_ARITHMETIC))
    out = tmp_path / "v"
    code = main(["verify", "--config", path, "--seeds", "2", "--out", str(out)])
    doc = json.loads((out / "report.json").read_text())
    status = {c["key"]: c["status"] for c in doc["criteria"]}
    for key in ("C1", "C4", "C5", "C6"):
        assert status[key] == "N/A"
    assert status["C8"] == "PASS" and status["C9"] == "PASS"
    assert "learning" in doc["report"]["empirical"]
    assert code == EXIT_OK


def test_gen_ring_runs(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["gen", "--kind", "ring", "--n", "5", "--m", "2", "--seed", "3", "--out", str(a)]) == EXIT_OK
    assert main(["gen", "--kind", "ring", "--n", "5", "--m", "2", "--seed", "3", "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    cfg = load_config(a)
    assert cfg.net.n == 5
    assert distinguishability(cfg.model, cfg.space).collective
    assert main(["run", "--config", str(a), "--horizon", "20", "--out", str(tmp_path / "o")]) == EXIT_OK


def test_gen_params_and_failures(tmp_path):
    out = tmp_path / "g.json"
    assert main(["gen", "--kind", "random", "--n", "4", "--m", "3", "--param", "p=0.5",
                 "--param", "signals=3", "--out", str(out)]) == EXIT_OK
    assert load_config(out).model.likelihoods[0].shape == (3, 3)
    assert main(["gen", "--kind", "random", "--n", "6", "--param", "p=0.01",
                 "--param", "budget=3", "--out", str(out)]) == EXIT_INVALID
    assert main(["gen", "--kind", "ring", "--n", "3", "--param", "oops", "--out", str(out)]) == EXIT_INVALID


def test_generate_config_rejects_degenerate_sizes():
    with pytest.raises(ValidationError):
        generate_config("ring", 3, 1)
    with pytest.raises(ValidationError):
        generate_config("ring", 3, 2, {"signals": 1})
