"""Deterministic simulator: seeding, traces, faults and Byzantine validators."""

import dataclasses
import json
import random
from pathlib import Path

import pytest

from fastset.scenario import ScenarioError, build_sim_config, load_scenario, run
from fastset.simnet import Latency, fork_rng

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="module")
def token():
    return load_scenario(SCENARIOS / "token.yaml")


def test_same_seed_same_trace(token):
    a, b = run(token, 7), run(token, 7)
    assert a.passed and b.passed
    assert a.trace.to_ndjson() == b.trace.to_ndjson()
    assert a.metrics() == b.metrics()


def test_different_seeds_reach_the_same_state_by_different_paths(token):
    a, b = run(token, 1), run(token, 2)
    assert a.trace.to_ndjson() != b.trace.to_ndjson()
    assert set(a.sim.final_state_digests().values()) == set(b.sim.final_state_digests().values())


def test_trace_is_ndjson_with_time_and_event(token, tmp_path):
    r = run(token, 3)
    path = tmp_path / "t.ndjson"
    r.trace.write(path)
    records = [json.loads(line) for line in path.read_text().splitlines()]
    assert records and all({"t", "event"} <= set(rec) for rec in records)
    times = [rec["t"] for rec in records]
    assert times == sorted(times)
    assert {"send", "deliver", "approve", "settle"} <= {rec["event"] for rec in records}


def test_fork_rng_is_independent_per_label():
    assert fork_rng(1, "a").random() == fork_rng(1, "a").random()
    assert fork_rng(1, "a").random() != fork_rng(1, "b").random()
    assert fork_rng(1, "a").random() != fork_rng(2, "a").random()


def test_latency_models():
    rng = random.Random(0)
    assert Latency.parse(12).sample(rng) == 12
    lan = Latency.parse("lan")
    assert all(1 <= lan.sample(rng) <= 5 for _ in range(50))
    logn = Latency.parse({"kind": "lognormal", "median": 40, "sigma": 0.3})
    assert all(logn.sample(rng) >= 1 for _ in range(50))
    with pytest.raises(ValueError):
        Latency.parse({"kind": "warp"})


def test_lossy_network_still_converges(token):
    lossy = dataclasses.replace(token, sim={**token.sim, "drop_rate": 0.2, "duplication_rate": 0.2})
    r = run(lossy, 5)
    assert r.passed, r.failures
    assert r.metrics()["messages_dropped"] > 0


@pytest.mark.parametrize("mode", ["Silent", "SignEverything", "EquivocationHelper"])
def test_one_byzantine_validator_is_tolerated(token, mode):
    byz = dataclasses.replace(token, sim={**token.sim, "byzantine_validators": {"v3": mode}})
    r = run(byz, 4)
    assert r.passed, r.failures
    assert len(r.sim.honest_validators()) == 3


def test_more_byzantine_validators_than_f_is_a_config_error(token):
    byz = dataclasses.replace(token, sim={"byzantine_validators": {"v2": "Silent", "v3": "Silent"}})
    with pytest.raises(ScenarioError):
        build_sim_config(byz, 0)
