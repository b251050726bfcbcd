import pytest

from sfcsim.delay_cost import (
    CAPACITY_CYCLES_SCALE,
    CostWeights,
    delay_breakdown,
    processing_delay,
    request_objective,
    step_cost,
    step_delay,
    transmission_delay,
)
from sfcsim.errors import SfcSimError

from conftest import make_line3, make_service


def test_processing_delay_basic():
    # 10 cycles/bit on a 100 Kbit packet at 1e9 cycles/s -> 1 ms
    assert processing_delay(10.0, 100_000.0, 1e9) == pytest.approx(0.001)


def test_processing_delay_zero_cycles():
    assert processing_delay(0.0, 100_000.0, 1e9) == 0.0


def test_processing_delay_zero_capacity_rejected():
    with pytest.raises(SfcSimError):
        processing_delay(10.0, 100_000.0, 0.0)


def test_step_delay_forwarding_example():
    topo = make_line3(link_capacity=1600.0, prop_delay=0.010)
    delay = step_delay(False, topo, [(0, 1)], packet_bits=1e5)
    assert delay == pytest.approx(0.010 + 0.0000625, rel=1e-12)


def test_step_delay_placement_without_link():
    topo = make_line3()
    delay = step_delay(True, topo, [], packet_bits=1e5,
                       cycles_per_bit=10.0, vm_capacity_units=1000.0)
    assert delay == pytest.approx(10.0 * 1e5 / (1000.0 * CAPACITY_CYCLES_SCALE))


def test_step_delay_paper_mode_drops_transmission():
    topo = make_line3(prop_delay=0.010)
    full = step_delay(False, topo, [(0, 1)], packet_bits=1e5)
    literal = step_delay(False, topo, [(0, 1)], packet_bits=1e5, include_transmission=False)
    assert literal == pytest.approx(0.010)
    assert full > literal


def test_step_cost_examples():
    # placement: w=50, d=10, B=1 plus one link at 25 -> 525
    assert step_cost(True, 50.0, 10.0, 1.0, [25.0]) == pytest.approx(525.0)
    # forwarding drops the VM term
    assert step_cost(False, 50.0, 10.0, 1.0, [25.0]) == pytest.approx(25.0)


def test_transmission_delay_units():
    assert transmission_delay(1e5, 1600.0) == pytest.approx(6.25e-5)


class _Outcome:
    def __init__(self, accepted, service, xi, segments):
        self.accepted = accepted
        self.service = service
        self.xi = xi
        self.segments = segments


def test_request_objective_link_only_for_empty_chain():
    topo = make_line3()
    service = make_service(chain_len=0, bandwidth=2.0, ingress=0, egress=2)
    weights = CostWeights.uniform(topo, 30.0)
    out = _Outcome(True, service, [], [[(0, 1), (1, 2)]])
    assert request_objective(out, weights) == pytest.approx(2 * 30.0 * 2.0)


def test_request_objective_rejected_is_domain_error():
    topo = make_line3()
    service = make_service()
    out = _Outcome(False, service, [], [])
    with pytest.raises(SfcSimError):
        request_objective(out, CostWeights.uniform(topo))


def test_request_objective_homogeneous_in_weights():
    topo = make_line3()
    service = make_service(chain_len=2, d=5.0, bandwidth=1.5, ingress=0, egress=2)
    xi = [(1, 1), (2, 2)]
    segments = [[(0, 1)], [(1, 2)], []]
    base = request_objective(_Outcome(True, service, xi, segments), CostWeights.uniform(topo, 40.0))
    doubled = request_objective(_Outcome(True, service, xi, segments), CostWeights.uniform(topo, 80.0))
    assert doubled == pytest.approx(2.0 * base)


def test_request_objective_linear_in_bandwidth():
    topo = make_line3()
    xi = [(1, 1)]
    segments = [[(0, 1)], [(1, 2)]]
    weights = CostWeights.uniform(topo, 40.0)
    costs = []
    for bw in (1.0, 2.0):
        service = make_service(chain_len=1, d=5.0, bandwidth=bw, ingress=0, egress=2)
        costs.append(request_objective(_Outcome(True, service, xi, segments), weights))
    assert costs[1] == pytest.approx(2.0 * costs[0])


def test_delay_breakdown_total_is_component_sum():
    topo = make_line3()
    service = make_service(chain_len=2, d=8.0, bandwidth=1.0, ingress=0, egress=2)
    xi = [(1, 1), (2, 2)]
    segments = [[(0, 1)], [(1, 2)], []]
    bd = delay_breakdown(service, topo, xi, segments)
    assert bd.total == bd.processing + bd.propagation + bd.transmission
    assert bd.processing > 0 and bd.propagation > 0 and bd.transmission > 0


def test_adding_link_never_decreases_delay_or_cost(rng):
    topo = make_line3()
    service = make_service(chain_len=1, d=5.0, bandwidth=1.0, ingress=0, egress=2)
    weights = CostWeights.sample(topo, rng)
    xi = [(1, 1)]
    segments = [[(0, 1)], [(1, 2)]]
    base_delay = delay_breakdown(service, topo, xi, segments).total
    base_cost = request_objective(_Outcome(True, service, xi, segments), weights)
    longer = [[(0, 1)], [(1, 2), (1, 2)]]
    assert delay_breakdown(service, topo, xi, longer).total >= base_delay
    assert request_objective(_Outcome(True, service, xi, longer), weights) >= base_cost


def test_cost_weights_sampling_range(rng):
    topo = make_line3(vms_per_node=3)
    weights = CostWeights.sample(topo, rng, 25.0, 75.0)
    assert len(weights.vm) == topo.num_vms
    assert set(weights.link) == set(topo.links)
    assert all(25.0 <= w <= 75.0 for w in weights.vm)
    assert all(25.0 <= w <= 75.0 for w in weights.link.values())
