import json
import math

import numpy as np
import pytest

from sfcsim.errors import ConfigError
from sfcsim.services import (
    DEFAULT_ENTRIES,
    CatalogEntry,
    default_catalog,
    load_catalog_entries,
    sample_arrival_count,
    sample_lifetime,
    save_catalog_entries,
    validate_entry,
)
from sfcsim.topology import generate_random_connected


@pytest.fixture(scope="module")
def topo():
    return generate_random_connected(10, target_degree=3.0, seed=42)


def test_default_catalog_voip_spec(topo):
    catalog = default_catalog(topo, np.random.default_rng(0))
    voip = next(s for s in catalog if s.name == "Voice over IP")
    assert voip.chain == ("NAT", "FW")
    assert voip.bandwidth_mbps == 0.064
    assert voip.latency_budget_s == 0.1


def test_default_catalog_video_rate(topo):
    catalog = default_catalog(topo, np.random.default_rng(0))
    video = next(s for s in catalog if s.name == "Video Streaming")
    assert video.bandwidth_mbps == 4.0


def test_default_catalog_endpoints_distinct(topo):
    for seed in range(20):
        for spec in default_catalog(topo, np.random.default_rng(seed)):
            assert spec.ingress != spec.egress
            assert 0 <= spec.ingress < topo.n_nodes
            assert 0 <= spec.egress < topo.n_nodes


def test_catalog_chains_respect_nat_before_fw():
    for entry in DEFAULT_ENTRIES:
        if "NAT" in entry.chain and "FW" in entry.chain:
            assert entry.chain.index("NAT") < entry.chain.index("FW")


def test_packet_bits_matches_one_second_of_traffic(topo):
    catalog = default_catalog(topo, np.random.default_rng(0))
    for spec in catalog:
        assert spec.packet_bits == spec.bandwidth_mbps * 1e6
    # a 100 Kbps flow has 100 Kbit packets
    voip_like = catalog[0]
    assert 0.1 * 1e6 == 100_000.0


def test_arrival_count_zero_mean():
    rng = np.random.default_rng(0)
    assert all(sample_arrival_count(rng, 0.0) == 0 for _ in range(100))


def test_arrival_count_range_and_mean():
    rng = np.random.default_rng(7)
    draws = [sample_arrival_count(rng, 5.0) for _ in range(100_000)]
    assert min(draws) >= 0
    assert max(draws) <= 10
    assert abs(np.mean(draws) - 5.0) < 0.05  # within 1%


def test_arrival_count_negative_mean_rejected():
    with pytest.raises(ConfigError):
        sample_arrival_count(np.random.default_rng(0), -1.0)


def test_lifetime_positive():
    rng = np.random.default_rng(3)
    assert all(sample_lifetime(rng, 240.0) > 0 for _ in range(1000))


def test_lifetime_survival_at_mean():
    rng = np.random.default_rng(11)
    draws = np.array([sample_lifetime(rng, 240.0) for _ in range(100_000)])
    survival = float(np.mean(draws > 240.0))
    assert abs(survival - math.exp(-1.0)) < 0.005


def test_lifetime_mean_within_one_percent():
    rng = np.random.default_rng(13)
    draws = np.array([sample_lifetime(rng, 240.0) for _ in range(100_000)])
    assert abs(draws.mean() - 240.0) / 240.0 < 0.01


def test_lifetime_requires_positive_mean():
    with pytest.raises(ConfigError):
        sample_lifetime(np.random.default_rng(0), 0.0)


def test_request_departure_after_arrival():
    from sfcsim.services import Request

    for lifetime in (0.2, 1.0, 239.9):
        req = Request(user=0, service_id=0, arrival_slot=5, lifetime_s=lifetime)
        assert req.departure_slot > req.arrival_slot
        assert req.departure_slot == 5 + math.ceil(lifetime)


def test_same_seed_same_workload(topo):
    def trace(seed):
        rng = np.random.default_rng(seed)
        catalog = default_catalog(topo, rng)
        out = []
        for _ in range(50):
            count = sample_arrival_count(rng, 5.0)
            for _ in range(count):
                sid = int(rng.integers(0, len(catalog)))
                out.append((count, sid, sample_lifetime(rng, 240.0)))
        return out

    assert trace(99) == trace(99)


def test_catalog_file_round_trip(tmp_path):
    path = tmp_path / "catalog.json"
    save_catalog_entries(DEFAULT_ENTRIES, path)
    loaded = load_catalog_entries(path)
    assert tuple(loaded) == DEFAULT_ENTRIES


def test_catalog_file_validation(tmp_path):
    path = tmp_path / "catalog.json"
    path.write_text(json.dumps([{"name": "x", "chain": [], "cycles_per_bit": [],
                                 "bandwidth_mbps": 1.0, "latency_budget_ms": 100}]))
    with pytest.raises(ConfigError):
        load_catalog_entries(path)
    path.write_text("{}")
    with pytest.raises(ConfigError):
        load_catalog_entries(path)


def test_entry_validation_rules():
    with pytest.raises(ConfigError):
        validate_entry(CatalogEntry("bad", ("FW", "NAT"), (1.0, 1.0), 1.0, 0.1))
    with pytest.raises(ConfigError):
        validate_entry(CatalogEntry("bad", ("FW",), (1.0, 2.0), 1.0, 0.1))
    with pytest.raises(ConfigError):
        validate_entry(CatalogEntry("bad", ("FW",), (0.0,), 1.0, 0.1))
    with pytest.raises(ConfigError):
        validate_entry(CatalogEntry("bad", ("FW",), (1.0,), -1.0, 0.1))
