"""Service catalog and online workload generation.

A service is an SFC (ordered function list with per-function cycles/bit),
the flow's data rate, a latency budget, and fixed ingress/egress nodes.
Requests arrive per slot (discrete uniform counts) and stay for an
exponentially distributed lifetime; one time slot equals one second.
"""

import json
import math
from dataclasses import dataclass

from .errors import ConfigError

# Canonical function set; catalogs may extend it with custom names.
FUNCTION_NAMES = ("NAT", "FW", "IDPS", "TM", "VOC")

BITS_PER_MBPS = 1e6


@dataclass(frozen=True)
class ServiceSpec:
    service_id: int
    name: str
    chain: tuple[str, ...]            # ordered function names
    cycles_per_bit: tuple[float, ...]  # processing requirement per function
    bandwidth_mbps: float              # flow data rate
    latency_budget_s: float            # tolerable SFC latency
    ingress: int
    egress: int

    @property
    def chain_length(self) -> int:
        return len(self.chain)

    @property
    def packet_bits(self) -> float:
        """Packet size: the bits transmitted in one second at the data rate."""
        return self.bandwidth_mbps * BITS_PER_MBPS


@dataclass(frozen=True)
class Request:
    user: int
    service_id: int
    arrival_slot: int
    lifetime_s: float

    @property
    def departure_slot(self) -> int:
        return self.arrival_slot + math.ceil(self.lifetime_s)


@dataclass(frozen=True)
class CatalogEntry:
    """File-level service type; endpoints are assigned per run."""

    name: str
    chain: tuple[str, ...]
    cycles_per_bit: tuple[float, ...]
    bandwidth_mbps: float
    latency_budget_s: float


# Cycles/bit magnitudes are tuned so per-function processing delay lands in
# roughly 1-50 ms under the default VM capacity range.
DEFAULT_ENTRIES = (
    CatalogEntry(
        name="Web Browsing",
        chain=("NAT", "FW", "IDPS"),
        cycles_per_bit=(10.0, 8.0, 12.0),
        bandwidth_mbps=1.0,
        latency_budget_s=0.3,
    ),
    CatalogEntry(
        name="Voice over IP",
        chain=("NAT", "FW"),
        cycles_per_bit=(100.0, 80.0),
        bandwidth_mbps=0.064,
        latency_budget_s=0.1,
    ),
    CatalogEntry(
        name="Video Streaming",
        chain=("NAT", "FW", "TM", "VOC"),
        cycles_per_bit=(2.5, 2.0, 3.0, 2.5),
        bandwidth_mbps=4.0,
        latency_budget_s=0.5,
    ),
)


def validate_entry(entry: CatalogEntry) -> None:
    if len(entry.chain) < 1:
        raise ConfigError(f"service {entry.name!r}: empty chain")
    if len(entry.chain) != len(entry.cycles_per_bit):
        raise ConfigError(f"service {entry.name!r}: chain/cycles length mismatch")
    if any(not d > 0 for d in entry.cycles_per_bit):
        raise ConfigError(f"service {entry.name!r}: non-positive cycles/bit")
    if not entry.bandwidth_mbps > 0:
        raise ConfigError(f"service {entry.name!r}: non-positive bandwidth")
    if not entry.latency_budget_s > 0:
        raise ConfigError(f"service {entry.name!r}: non-positive latency budget")
    if "NAT" in entry.chain and "FW" in entry.chain:
        if entry.chain.index("NAT") > entry.chain.index("FW"):
            raise ConfigError(f"service {entry.name!r}: NAT must precede FW")


def assign_endpoints(entries, topology, rng) -> list[ServiceSpec]:
    """Fix random distinct ingress/egress nodes for each entry.

    Endpoints are drawn once and stay fixed for the whole run.
    """
    if topology.n_nodes < 2:
        raise ConfigError("endpoint assignment needs at least two nodes")
    specs = []
    for service_id, entry in enumerate(entries):
        validate_entry(entry)
        ingress, egress = rng.choice(topology.n_nodes, size=2, replace=False)
        specs.append(
            ServiceSpec(
                service_id=service_id,
                name=entry.name,
                chain=tuple(entry.chain),
                cycles_per_bit=tuple(entry.cycles_per_bit),
                bandwidth_mbps=entry.bandwidth_mbps,
                latency_budget_s=entry.latency_budget_s,
                ingress=int(ingress),
                egress=int(egress),
            )
        )
    return specs


def default_catalog(topology, rng) -> list[ServiceSpec]:
    """The three stock services with per-run random endpoints."""
    return assign_endpoints(DEFAULT_ENTRIES, topology, rng)


def load_catalog_entries(path) -> list[CatalogEntry]:
    """Parse a catalog file: array of service type records.

    Record fields: name, chain, cycles_per_bit, bandwidth_mbps,
    latency_budget_ms.
    """
    with open(path) as handle:
        data = json.load(handle)
    if not isinstance(data, list) or not data:
        raise ConfigError("catalog file must be a non-empty JSON array")
    entries = []
    for rec in data:
        try:
            entry = CatalogEntry(
                name=rec["name"],
                chain=tuple(rec["chain"]),
                cycles_per_bit=tuple(float(d) for d in rec["cycles_per_bit"]),
                bandwidth_mbps=float(rec["bandwidth_mbps"]),
                latency_budget_s=float(rec["latency_budget_ms"]) / 1000.0,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed catalog record: {exc}") from exc
        validate_entry(entry)
        entries.append(entry)
    return entries


def save_catalog_entries(entries, path) -> None:
    records = [
        {
            "name": e.name,
            "chain": list(e.chain),
            "cycles_per_bit": list(e.cycles_per_bit),
            "bandwidth_mbps": e.bandwidth_mbps,
            "latency_budget_ms": e.latency_budget_s * 1000.0,
        }
        for e in entries
    ]
    with open(path, "w") as handle:
        json.dump(records, handle, indent=2)


def sample_arrival_count(rng, mean_rate: float) -> int:
    """Per-slot request count: DiscreteUniform{0..2*mean_rate}.

    The uniform process is realized over integers so the empirical mean
    equals mean_rate (exactly when 2*mean_rate is integer).
    """
    if mean_rate < 0:
        raise ConfigError("mean_rate must be >= 0")
    high = int(round(2.0 * mean_rate))
    if high == 0:
        return 0
    return int(rng.integers(0, high + 1))


def sample_poisson_arrival_count(rng, mean_rate: float) -> int:
    """Poisson alternative for sensitivity runs."""
    if mean_rate < 0:
        raise ConfigError("mean_rate must be >= 0")
    return int(rng.poisson(mean_rate))


def sample_lifetime(rng, mean_s: float) -> float:
    """Exponential service lifetime with the given mean, strictly positive."""
    if not mean_s > 0:
        raise ConfigError("lifetime mean must be > 0")
    x = float(rng.exponential(mean_s))
    while x <= 0.0:
        x = float(rng.exponential(mean_s))
    return x
