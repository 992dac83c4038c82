from pathlib import Path

import pytest

from mobocc.config import InvalidSpec, WorkloadSpec, load_config, spec_from_dict
from mobocc.coordinator import Strategy
from mobocc.harness import parse_range
from mobocc.workload import generate_workload, host_layout

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_same_seed_same_workload():
    spec = WorkloadSpec(seed=42)
    assert generate_workload(spec) == generate_workload(WorkloadSpec(seed=42))
    assert generate_workload(spec) != generate_workload(WorkloadSpec(seed=43))


def test_enquiry_only_mix():
    arrivals = generate_workload(WorkloadSpec(mix={"T3": 1}))
    assert arrivals and {a.txn_type_id for a in arrivals} == {"T3"}


def test_full_skew_single_hot_key():
    arrivals = generate_workload(WorkloadSpec(row_distribution="hotspot", skew=1.0, hot_keys=1))
    assert {a.params.row_key for a in arrivals} == {101}


def test_arrivals_ordered_and_within_duration():
    arrivals = generate_workload(WorkloadSpec(duration_ms=5000, hosts=4))
    times = [a.time for a in arrivals]
    assert times == sorted(times) and times[-1] < 5000
    assert all(1 <= a.site <= 4 for a in arrivals)


@pytest.mark.parametrize("bad", [
    {"mix": {"T1": -1, "T2": 2}},
    {"mix": {"T1": 0}},
    {"mix": {"T9": 1}},
    {"row_distribution": "zipf"},
    {"skew": 1.5},
    {"hosts": 0},
    {"restart_cap": -1},
])
def test_invalid_specs(bad):
    with pytest.raises(InvalidSpec):
        generate_workload(WorkloadSpec(**bad))


def test_host_layout_round_robin_and_overrides():
    spec = spec_from_dict({"topology": {"hosts": 4, "cells": 2, "compute_delay_ms": 700},
                           "hosts": [{"site": 3, "cell": 2, "moves": [[10, 1]]}]})
    layout = host_layout(spec)
    assert [h.cell for h in layout] == [1, 2, 2, 2]
    assert all(h.compute_delay_ms == 700 for h in layout)
    assert layout[2].moves == [(10, 1)]


def test_host_layout_random_delays_deterministic():
    spec = WorkloadSpec(compute_delay_ms=(100, 200), hosts=6, disconnects_per_host=1)
    a, b = host_layout(spec), host_layout(spec)
    assert a == b and all(100 <= h.compute_delay_ms <= 200 for h in a)
    assert all(len(h.outages) == 1 for h in a)


def test_override_unknown_host():
    with pytest.raises(InvalidSpec):
        host_layout(spec_from_dict({"topology": {"hosts": 2}, "hosts": [{"site": 5}]}))


def test_load_banking_config():
    spec = load_config(CONFIGS / "banking.toml")
    assert spec.hosts == 2 and len(spec.script) == 2
    assert spec.script[0].params.amount == 1000
    assert [t.name for t in spec.catalog] == ["Deposit", "Withdraw", "Enquiry"]


def test_load_hotspot_config():
    spec = load_config(CONFIGS / "hotspot.toml")
    assert spec.compute_delay_ms == (500, 4000) and spec.cells == 2
    assert spec.row_distribution == "hotspot" and len(spec.relations[0].rows) == 10
    assert spec.strategy is Strategy.MULTICAST_RESTART


def test_config_name_defaults_to_stem(tmp_path):
    p = tmp_path / "tiny.toml"
    p.write_text('seed = 3\nrestart_cap = "unlimited"\n[topology]\nhosts = 2\n')
    spec = load_config(p)
    assert (spec.name, spec.seed, spec.restart_cap) == ("tiny", 3, None)


def test_parse_range():
    assert parse_range("2..64") == [2, 4, 8, 16, 32, 64]
    assert parse_range("8..12:+2") == [8, 10, 12]
    assert parse_range("8,16") == [8, 16]
    for bad in ("64..2", "x", "0..4", ""):
        with pytest.raises(InvalidSpec):
            parse_range(bad)
