"""Physical network model: nodes, per-node VMs, capacitated links.

Node ids are dense integers 0..N-1 and VM ids are dense global integers
0..V-1 (node 0's VMs first, then node 1's, ...), so both can index state
and action vectors directly. Links are undirected with a single shared
capacity in both directions; a topology is immutable after construction
and safe to share read-only across parallel runs.
"""

import heapq
import json
from dataclasses import dataclass

import numpy as np

from .errors import TopologyError

Link = tuple[int, int]

# Table-style defaults: capacities in capacity units (mega-cycles/s) and
# Mbps, propagation delay in seconds.
DEFAULT_VM_CAPACITY_RANGE = (200.0, 1200.0)
DEFAULT_LINK_CAPACITY_RANGE = (1600.0, 6400.0)
DEFAULT_PROP_DELAY_RANGE = (0.005, 0.015)
DEFAULT_VM_COUNT_RANGE = (6, 6)


def link_key(a: int, b: int) -> Link:
    """Canonical undirected link id: ordered node pair."""
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Vm:
    vm_id: int
    node: int
    capacity: float  # processing resource, capacity units (mega-cycles/s)


@dataclass(frozen=True)
class Path:
    """A simple path: ordered node list with derived link list."""

    hops: tuple[int, ...]

    @property
    def links(self) -> tuple[Link, ...]:
        return tuple(link_key(a, b) for a, b in zip(self.hops, self.hops[1:]))

    def contains_link(self, a: int, b: int) -> bool:
        """Membership indicator of link (a, b) in this path."""
        return link_key(a, b) in set(self.links)


class Topology:
    """Immutable network graph with per-node VM lists and capacitated links.

    Args:
        vm_capacities: per-node list of VM capacities; node n hosts
            len(vm_capacities[n]) VMs.
        links: iterable of (a, b, capacity_mbps, prop_delay_s) records.
    """

    def __init__(self, vm_capacities, links):
        self.n_nodes = len(vm_capacities)
        if self.n_nodes < 1:
            raise TopologyError("topology needs at least one node")

        self.vms: list[Vm] = []
        self.node_vms: list[tuple[int, ...]] = []
        for node, caps in enumerate(vm_capacities):
            if len(caps) < 1:
                raise TopologyError(f"node {node} hosts no VMs")
            ids = []
            for cap in caps:
                if not cap > 0:
                    raise TopologyError(f"non-positive VM capacity on node {node}")
                ids.append(len(self.vms))
                self.vms.append(Vm(vm_id=ids[-1], node=node, capacity=float(cap)))
            self.node_vms.append(tuple(ids))

        self.link_capacity: dict[Link, float] = {}
        self.prop_delay: dict[Link, float] = {}
        adjacency = [set() for _ in range(self.n_nodes)]
        for a, b, cap, delay in links:
            if not (0 <= a < self.n_nodes and 0 <= b < self.n_nodes):
                raise TopologyError(f"link ({a},{b}) references unknown node")
            if a == b:
                raise TopologyError(f"self-link on node {a}")
            key = link_key(a, b)
            if key in self.link_capacity:
                raise TopologyError(f"duplicate link {key}")
            if not cap > 0 or not delay > 0:
                raise TopologyError(f"non-positive capacity/delay on link {key}")
            self.link_capacity[key] = float(cap)
            self.prop_delay[key] = float(delay)
            adjacency[a].add(b)
            adjacency[b].add(a)

        self.links: tuple[Link, ...] = tuple(sorted(self.link_capacity))
        self.link_index = {link: i for i, link in enumerate(self.links)}
        self._adjacency = tuple(tuple(sorted(s)) for s in adjacency)

        if not self._connected():
            raise TopologyError("graph is not connected")

    # -- basic queries ----------------------------------------------------

    @property
    def num_vms(self) -> int:
        return len(self.vms)

    @property
    def num_links(self) -> int:
        return len(self.links)

    def neighbors(self, n: int) -> tuple[int, ...]:
        """Nodes directly connected to n."""
        if not 0 <= n < self.n_nodes:
            raise TopologyError(f"unknown node {n}")
        return self._adjacency[n]

    def has_link(self, a: int, b: int) -> bool:
        return link_key(a, b) in self.link_capacity

    def vm_node(self, vm_id: int) -> int:
        return self.vms[vm_id].node

    def vm_capacity(self, vm_id: int) -> float:
        return self.vms[vm_id].capacity

    def max_vms_per_node(self) -> int:
        return max(len(ids) for ids in self.node_vms)

    def connectivity_matrix(self) -> np.ndarray:
        """Symmetric 0/1 matrix with zero diagonal."""
        mat = np.zeros((self.n_nodes, self.n_nodes), dtype=int)
        for a, b in self.links:
            mat[a, b] = 1
            mat[b, a] = 1
        return mat

    def _connected(self) -> bool:
        seen = {0}
        queue = [0]
        while queue:
            cur = queue.pop()
            for nxt in self._adjacency[cur]:
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return len(seen) == self.n_nodes

    # -- path enumeration --------------------------------------------------

    def enumerate_simple_paths(self, src: int, dst: int, max_hops: int) -> list[Path]:
        """All simple paths src->dst with at most max_hops links.

        Returned in deterministic order: shorter paths first, ties broken
        by the hop sequence. Empty when dst is unreachable within the bound.
        """
        if not 0 <= src < self.n_nodes or not 0 <= dst < self.n_nodes:
            raise TopologyError("unknown endpoint")
        if max_hops < 0:
            raise TopologyError("max_hops must be >= 0")
        found: list[tuple[int, ...]] = []

        def dfs(current, visited, trail):
            if current == dst:
                found.append(tuple(trail))
                return
            if len(trail) - 1 >= max_hops:
                return
            for nxt in self._adjacency[current]:
                if nxt not in visited:
                    visited.add(nxt)
                    trail.append(nxt)
                    dfs(nxt, visited, trail)
                    trail.pop()
                    visited.remove(nxt)

        dfs(src, {src}, [src])
        found.sort(key=lambda hops: (len(hops), hops))
        return [Path(hops) for hops in found]

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "nodes": [
                {
                    "id": node,
                    "vms": [
                        {"id": vm_id, "capacity": self.vms[vm_id].capacity}
                        for vm_id in self.node_vms[node]
                    ],
                }
                for node in range(self.n_nodes)
            ],
            "links": [
                {
                    "a": a,
                    "b": b,
                    "capacity_mbps": self.link_capacity[(a, b)],
                    "prop_delay_ms": self.prop_delay[(a, b)] * 1000.0,
                }
                for a, b in self.links
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Topology":
        try:
            nodes = sorted(data["nodes"], key=lambda rec: rec["id"])
            ids = [rec["id"] for rec in nodes]
            if ids != list(range(len(ids))):
                raise TopologyError("node ids must be dense 0..N-1")
            vm_capacities = [[vm["capacity"] for vm in rec["vms"]] for rec in nodes]
            links = [
                (rec["a"], rec["b"], rec["capacity_mbps"], rec["prop_delay_ms"] / 1000.0)
                for rec in data["links"]
            ]
        except (KeyError, TypeError) as exc:
            raise TopologyError(f"malformed topology record: {exc}") from exc
        return cls(vm_capacities, links)

    def save(self, path) -> None:
        with open(path, "w") as handle:
            json.dump(self.to_json_dict(), handle, indent=2)

    @classmethod
    def load(cls, path) -> "Topology":
        with open(path) as handle:
            return cls.from_json_dict(json.load(handle))


def _tree_from_pruefer(sequence, n_nodes):
    """Decode a Pruefer sequence into the edge list of a labeled tree."""
    degree = [1] * n_nodes
    for x in sequence:
        degree[x] += 1
    leaves = [i for i in range(n_nodes) if degree[i] == 1]
    heapq.heapify(leaves)
    edges = []
    for x in sequence:
        leaf = heapq.heappop(leaves)
        edges.append(link_key(leaf, x))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(leaves, x)
    a = heapq.heappop(leaves)
    b = heapq.heappop(leaves)
    edges.append(link_key(a, b))
    return edges


def generate_random_connected(
    n_nodes,
    target_degree=3.0,
    vm_count_range=DEFAULT_VM_COUNT_RANGE,
    vm_capacity_range=DEFAULT_VM_CAPACITY_RANGE,
    link_capacity_range=DEFAULT_LINK_CAPACITY_RANGE,
    prop_delay_range=DEFAULT_PROP_DELAY_RANGE,
    seed=0,
) -> Topology:
    """Generate a random connected topology, deterministic under the seed.

    Builds a uniform random spanning tree (Pruefer decode) so connectivity
    is guaranteed, then adds random extra edges until the target mean
    degree is reached. Capacities and propagation delays are drawn
    uniformly from the given ranges.
    """
    if n_nodes < 1:
        raise TopologyError("n_nodes must be >= 1")
    rng = np.random.default_rng(seed)

    if n_nodes == 1:
        edges = []
    else:
        min_degree = 2.0 * (n_nodes - 1) / n_nodes  # spanning tree mean degree
        if target_degree < min_degree:
            raise TopologyError(
                f"target_degree {target_degree} below connectivity minimum {min_degree:.3f}"
            )
        if target_degree > n_nodes - 1:
            raise TopologyError(
                f"target_degree {target_degree} exceeds complete-graph degree {n_nodes - 1}"
            )
        if n_nodes == 2:
            edges = [(0, 1)]
        else:
            sequence = [int(x) for x in rng.integers(0, n_nodes, size=n_nodes - 2)]
            edges = _tree_from_pruefer(sequence, n_nodes)
        present = set(edges)
        absent = [
            (a, b)
            for a in range(n_nodes)
            for b in range(a + 1, n_nodes)
            if (a, b) not in present
        ]
        rng.shuffle(absent)
        while absent and 2.0 * len(edges) / n_nodes < target_degree:
            edges.append(tuple(absent.pop()))

    lo, hi = vm_count_range
    if not 1 <= lo <= hi:
        raise TopologyError(f"bad vm_count_range {vm_count_range}")
    vm_counts = [int(x) for x in rng.integers(lo, hi + 1, size=n_nodes)]
    vm_capacities = [
        [float(c) for c in rng.uniform(*vm_capacity_range, size=count)]
        for count in vm_counts
    ]

    links = []
    for a, b in sorted(edges):
        cap = float(rng.uniform(*link_capacity_range))
        delay = float(rng.uniform(*prop_delay_range))
        links.append((a, b, cap, delay))

    return Topology(vm_capacities, links)
