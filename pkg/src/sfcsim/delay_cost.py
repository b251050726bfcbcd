"""Delay and cost formulas for placements and routed segments.

All functions here are pure. VM capacities live in capacity units
(mega-cycles per second): the table-style 200-1200 range only satisfies
the latency budgets when scaled by CAPACITY_CYCLES_SCALE, so callers pass
capacity_units * CAPACITY_CYCLES_SCALE as cycles/s.
"""

from dataclasses import dataclass

from .errors import SfcSimError

# capacity units -> CPU cycles per second
CAPACITY_CYCLES_SCALE = 1e6

DEFAULT_WEIGHT_RANGE = (25.0, 75.0)


@dataclass(frozen=True)
class DelayBreakdown:
    processing: float
    propagation: float
    transmission: float

    @property
    def total(self) -> float:
        return self.processing + self.propagation + self.transmission


@dataclass(frozen=True)
class CostWeights:
    """Unit costs per VM and per link ($/Mbps), fixed for a run."""

    vm: tuple[float, ...]
    link: dict

    @classmethod
    def sample(cls, topology, rng, low=DEFAULT_WEIGHT_RANGE[0], high=DEFAULT_WEIGHT_RANGE[1]):
        vm = tuple(float(w) for w in rng.uniform(low, high, size=topology.num_vms))
        link = {
            key: float(w)
            for key, w in zip(topology.links, rng.uniform(low, high, size=topology.num_links))
        }
        return cls(vm=vm, link=link)

    @classmethod
    def uniform(cls, topology, value=50.0):
        return cls(
            vm=tuple(value for _ in range(topology.num_vms)),
            link={key: value for key in topology.links},
        )


def processing_delay(cycles_per_bit: float, packet_bits: float, capacity_cycles_per_s: float) -> float:
    """Seconds to process one packet on a VM running at the given rate."""
    if not capacity_cycles_per_s > 0:
        raise SfcSimError("processing capacity must be > 0")
    return cycles_per_bit * packet_bits / capacity_cycles_per_s


def transmission_delay(packet_bits: float, link_capacity_mbps: float) -> float:
    if not link_capacity_mbps > 0:
        raise SfcSimError("link capacity must be > 0")
    return packet_bits / (link_capacity_mbps * 1e6)


def step_delay(
    placement: bool,
    topology,
    links,
    packet_bits: float,
    cycles_per_bit: float = 0.0,
    vm_capacity_units: float = 0.0,
    include_transmission: bool = True,
) -> float:
    """Delay incurred by one routing/placement step.

    A placement step pays the processing delay on the selected VM plus the
    propagation (and, by default, transmission) delay of the links
    traversed; a forwarding step pays the link terms only. Disabling
    include_transmission reproduces the literal step-delay bookkeeping,
    at the price of the accumulated episode delay no longer matching the
    closed-form total.
    """
    delay = 0.0
    if placement:
        delay += processing_delay(
            cycles_per_bit, packet_bits, vm_capacity_units * CAPACITY_CYCLES_SCALE
        )
    for link in links:
        delay += topology.prop_delay[link]
        if include_transmission:
            delay += transmission_delay(packet_bits, topology.link_capacity[link])
    return delay


def step_cost(
    placement: bool,
    vm_weight: float,
    cycles_per_bit: float,
    bandwidth_mbps: float,
    link_weights,
) -> float:
    """Cost of one step: VM term (placement only) plus per-link terms."""
    cost = 0.0
    if placement:
        cost += vm_weight * cycles_per_bit * bandwidth_mbps
    for w in link_weights:
        cost += w * bandwidth_mbps
    return cost


def delay_breakdown(service, topology, xi, segments) -> DelayBreakdown:
    """Closed-form per-packet delay of a finished placement.

    xi: per chain function (vm, node); segments: per chain segment the
    ordered traversed link list (chain_length + 1 segments).
    """
    processing = 0.0
    for (vm, _node), d in zip(xi, service.cycles_per_bit):
        processing += processing_delay(
            d, service.packet_bits, topology.vm_capacity(vm) * CAPACITY_CYCLES_SCALE
        )
    propagation = 0.0
    transmission = 0.0
    for segment in segments:
        for link in segment:
            propagation += topology.prop_delay[link]
            transmission += transmission_delay(service.packet_bits, topology.link_capacity[link])
    return DelayBreakdown(processing, propagation, transmission)


def request_objective(outcome, weights: CostWeights) -> float:
    """Per-request resource-utilization cost of an accepted placement.

    First term: VM processing cost over placed functions; second term:
    bandwidth cost over all links of all selected segments.
    """
    if not outcome.accepted:
        raise SfcSimError("objective is defined for accepted placements only")
    service = outcome.service
    cost = 0.0
    for (vm, _node), d in zip(outcome.xi, service.cycles_per_bit):
        cost += weights.vm[vm] * d * service.bandwidth_mbps
    for segment in outcome.segments:
        for link in segment:
            cost += weights.link[link] * service.bandwidth_mbps
    return cost
