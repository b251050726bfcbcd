"""Authoritative available-resource state with exact, reversible charges.

Charges are stored as exact rationals so releasing a user restores the
availability bit-exactly and the conservation identity (capacity minus
available equals the sum of live charges) can be asserted with equality.
One ledger belongs to one simulation run; only the run loop mutates it.
"""

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CapacityError, SfcSimError

DEFAULT_QUANTIZATION_LEVELS = 1000  # resource levels I
CONTEXT_FEATURES = 5


@dataclass(frozen=True)
class Allocation:
    user: int
    arrival_slot: int
    departure_slot: int
    vm_charges: tuple  # ((vm_id, Fraction), ...)
    link_charges: tuple  # ((link, Fraction), ...)


@dataclass(frozen=True)
class EncodeContext:
    """Episode-side inputs to the state encoding."""

    service: object
    catalog_size: int
    current_node: int
    current_vm: int | None
    next_function_index: int
    elapsed_s: float


class ResourceLedger:
    def __init__(self, topology):
        self.topology = topology
        self._vm_capacity = [Fraction(vm.capacity) for vm in topology.vms]
        self._vm_available = list(self._vm_capacity)
        self._link_capacity = {k: Fraction(c) for k, c in topology.link_capacity.items()}
        self._link_available = dict(self._link_capacity)
        self._allocations: dict[int, Allocation] = {}

    # -- views --------------------------------------------------------------

    def vm_available(self, vm_id: int) -> Fraction:
        return self._vm_available[vm_id]

    def vm_capacity(self, vm_id: int) -> Fraction:
        return self._vm_capacity[vm_id]

    def link_available(self, link) -> Fraction:
        return self._link_available[link]

    def link_capacity(self, link) -> Fraction:
        return self._link_capacity[link]

    def live_users(self) -> list[int]:
        return sorted(self._allocations)

    def has_user(self, user: int) -> bool:
        return user in self._allocations

    def snapshot(self):
        """Hashable-free exact copy for bit-identity comparisons."""
        return (
            tuple(self._vm_available),
            tuple(sorted(self._link_available.items())),
            tuple(sorted(self._allocations.items())),
        )

    # -- mutations ------------------------------------------------------------

    def charge(self, user, vm_charges, link_charges, departure_slot, arrival_slot=0):
        """Atomically deduct a user's charges and record the allocation.

        vm_charges: iterable of (vm_id, amount); link_charges: iterable of
        (link, amount). Amounts are converted to exact Fractions. Raises
        CapacityError (ledger untouched) when any aggregated charge exceeds
        the available amount.
        """
        if user in self._allocations:
            raise SfcSimError(f"user {user} already holds an allocation")
        vm_totals: dict[int, Fraction] = {}
        for vm_id, amount in vm_charges:
            frac = Fraction(amount)
            if frac < 0:
                raise SfcSimError("negative charge")
            vm_totals[vm_id] = vm_totals.get(vm_id, Fraction(0)) + frac
        link_totals: dict = {}
        for link, amount in link_charges:
            frac = Fraction(amount)
            if frac < 0:
                raise SfcSimError("negative charge")
            link_totals[link] = link_totals.get(link, Fraction(0)) + frac

        for vm_id, total in vm_totals.items():
            if total > self._vm_available[vm_id]:
                raise CapacityError(f"vm {vm_id}: charge {total} exceeds available")
        for link, total in link_totals.items():
            if total > self._link_available[link]:
                raise CapacityError(f"link {link}: charge {total} exceeds available")

        for vm_id, total in vm_totals.items():
            self._vm_available[vm_id] -= total
        for link, total in link_totals.items():
            self._link_available[link] -= total
        self._allocations[user] = Allocation(
            user=user,
            arrival_slot=arrival_slot,
            departure_slot=departure_slot,
            vm_charges=tuple(sorted(vm_totals.items())),
            link_charges=tuple(sorted(link_totals.items())),
        )

    def release(self, user) -> bool:
        """Return all of a user's charges. Unknown user: warning no-op (False)."""
        alloc = self._allocations.pop(user, None)
        if alloc is None:
            return False
        for vm_id, amount in alloc.vm_charges:
            self._vm_available[vm_id] += amount
        for link, amount in alloc.link_charges:
            self._link_available[link] += amount
        return True

    def apply_departures(self, slot: int) -> list[int]:
        """Release every user whose departure slot is <= slot."""
        due = sorted(
            user
            for user, alloc in self._allocations.items()
            if alloc.departure_slot <= slot
        )
        for user in due:
            self.release(user)
        return due

    # -- invariants -------------------------------------------------------------

    def check_conservation(self) -> None:
        """Assert capacity - available == sum of live charges, exactly."""
        vm_used = [Fraction(0)] * len(self._vm_capacity)
        link_used = {k: Fraction(0) for k in self._link_capacity}
        for alloc in self._allocations.values():
            for vm_id, amount in alloc.vm_charges:
                vm_used[vm_id] += amount
            for link, amount in alloc.link_charges:
                link_used[link] += amount
        for vm_id, used in enumerate(vm_used):
            if self._vm_capacity[vm_id] - self._vm_available[vm_id] != used:
                raise SfcSimError(f"conservation violated on vm {vm_id}")
            if not 0 <= self._vm_available[vm_id] <= self._vm_capacity[vm_id]:
                raise SfcSimError(f"availability out of bounds on vm {vm_id}")
        for link, used in link_used.items():
            if self._link_capacity[link] - self._link_available[link] != used:
                raise SfcSimError(f"conservation violated on link {link}")
            if not 0 <= self._link_available[link] <= self._link_capacity[link]:
                raise SfcSimError(f"availability out of bounds on link {link}")

    def is_fully_available(self) -> bool:
        return self._vm_available == self._vm_capacity and all(
            self._link_available[k] == self._link_capacity[k] for k in self._link_capacity
        )

    # -- state encoding ------------------------------------------------------------

    def utilization_level(self, capacity: Fraction, available: Fraction, levels: int) -> int:
        """Quantized utilization: floor(levels * used / capacity), exact."""
        used = capacity - available
        return int(math.floor(Fraction(levels) * used / capacity))

    def encode_state(self, ctx: EncodeContext, levels: int = DEFAULT_QUANTIZATION_LEVELS) -> np.ndarray:
        """Agent-facing state vector, every entry in [0, 1].

        Layout: per-link utilization level, per-VM utilization level, then
        five context features (service type, current node, current VM,
        chain progress, remaining latency budget). Resource levels are
        quantized to {0..levels} relative to initial capacity and emitted
        normalized by the level count.
        """
        topo = self.topology
        out = np.empty(topo.num_links + topo.num_vms + CONTEXT_FEATURES, dtype=np.float64)
        pos = 0
        for link in topo.links:
            out[pos] = (
                self.utilization_level(self._link_capacity[link], self._link_available[link], levels)
                / levels
            )
            pos += 1
        for vm_id in range(topo.num_vms):
            out[pos] = (
                self.utilization_level(self._vm_capacity[vm_id], self._vm_available[vm_id], levels)
                / levels
            )
            pos += 1
        service = ctx.service
        out[pos] = ctx.service.service_id / max(1, ctx.catalog_size - 1)
        out[pos + 1] = ctx.current_node / max(1, topo.n_nodes - 1)
        out[pos + 2] = 0.0 if ctx.current_vm is None else (ctx.current_vm + 1) / topo.num_vms
        out[pos + 3] = ctx.next_function_index / max(1, service.chain_length)
        out[pos + 4] = max(0.0, (service.latency_budget_s - ctx.elapsed_s) / service.latency_budget_s)
        return out

    # -- audit dump ------------------------------------------------------------

    def snapshot_csv(self, path, slot: int) -> None:
        """Audit dump: one row per resource with capacity and availability."""
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["slot", "resource_kind", "resource_id", "capacity", "available"])
            for vm_id in range(len(self._vm_capacity)):
                writer.writerow(
                    [slot, "vm", vm_id, float(self._vm_capacity[vm_id]), float(self._vm_available[vm_id])]
                )
            for link in self.topology.links:
                writer.writerow(
                    [
                        slot,
                        "link",
                        f"{link[0]}-{link[1]}",
                        float(self._link_capacity[link]),
                        float(self._link_available[link]),
                    ]
                )


def state_vector_size(topology) -> int:
    """Input width of the value network for a fixed topology."""
    return topology.num_links + topology.num_vms + CONTEXT_FEATURES
