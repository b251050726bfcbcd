import numpy as np
import pytest

from sfcsim.delay_cost import CostWeights
from sfcsim.engine import EngineConfig, Episode
from sfcsim.services import Request, ServiceSpec
from sfcsim.topology import Topology


def make_line3(vms_per_node=1, vm_capacity=1200.0, link_capacity=1600.0, prop_delay=0.010):
    """Path graph 0-1-2."""
    caps = [[vm_capacity] * vms_per_node for _ in range(3)]
    links = [(0, 1, link_capacity, prop_delay), (1, 2, link_capacity, prop_delay)]
    return Topology(caps, links)


def make_triangle(vms_per_node=1, vm_capacity=1200.0, link_capacity=1600.0, prop_delay=0.010):
    caps = [[vm_capacity] * vms_per_node for _ in range(3)]
    links = [
        (0, 1, link_capacity, prop_delay),
        (0, 2, link_capacity, prop_delay),
        (1, 2, link_capacity, prop_delay),
    ]
    return Topology(caps, links)


def make_pair(vm_capacity=1200.0, link_capacity=1600.0, prop_delay=0.010, vms_per_node=1):
    caps = [[vm_capacity] * vms_per_node for _ in range(2)]
    return Topology(caps, [(0, 1, link_capacity, prop_delay)])


def make_service(chain_len=1, d=10.0, bandwidth=1.0, latency=0.5, ingress=0, egress=2,
                 service_id=0):
    names = ("NAT", "FW", "TM", "VOC", "IDPS")
    return ServiceSpec(
        service_id=service_id,
        name="test",
        chain=tuple(names[i % len(names)] for i in range(chain_len)),
        cycles_per_bit=tuple(d for _ in range(chain_len)) if not isinstance(d, (list, tuple))
        else tuple(d),
        bandwidth_mbps=bandwidth,
        latency_budget_s=latency,
        ingress=ingress,
        egress=egress,
    )


def make_request(user=0, service_id=0, slot=0, lifetime=10.0):
    return Request(user=user, service_id=service_id, arrival_slot=slot, lifetime_s=lifetime)


def run_random_episode(topology, service, ledger, weights, rng, config=None, place_prob=0.5):
    """Drive an episode with uniformly random possible actions."""
    config = config or EngineConfig()
    episode = Episode(make_request(user=rng.integers(10**6)), service, topology, ledger,
                      weights, config, catalog_size=1)
    while not episode.done:
        actions = episode.possible_actions()
        vms = sorted({a // 2 for a in actions})
        vm = int(vms[rng.integers(len(vms))])
        place = bool(rng.random() < place_prob)
        episode.step(2 * vm + (1 if place else 0))
    return episode


@pytest.fixture
def line3():
    return make_line3()


@pytest.fixture
def triangle():
    return make_triangle()


@pytest.fixture
def uniform_weights():
    def _make(topology, value=50.0):
        return CostWeights.uniform(topology, value)

    return _make


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
