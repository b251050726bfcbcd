"""Non-learning placement policies: greedy, Tabu search, exhaustive oracle.

Each policy plans a (path, function placement) for one request and pushes
the plan through the engine's constraint evaluator, so accepted outcomes
from any policy satisfy exactly the same checks as episode outcomes.
"""

import heapq
import itertools
from fractions import Fraction

from .engine import (
    REJECT_NO_PATH,
    REJECT_VM_CAPACITY,
    EngineConfig,
    PlacementOutcome,
    evaluate_plan,
)
from .delay_cost import DelayBreakdown
from .errors import OracleBoundsError
from .topology import link_key

ORACLE_MAX_NODES = 5
ORACLE_MAX_VMS_PER_NODE = 2
ORACLE_MAX_FUNCTIONS = 3
ORACLE_MAX_HOPS = 5

DEFAULT_TABU_ITERATIONS = 50
DEFAULT_TABU_TENURE = 7
DEFAULT_TABU_PATHS = 8


def _rejected(request, service, reason) -> PlacementOutcome:
    return PlacementOutcome(
        accepted=False, reason=reason, hops=[], xi=[], segments=[],
        delay=DelayBreakdown(0.0, 0.0, 0.0), total_cost=0.0, reward=0.0,
        steps=0, vm_charges=[], link_charges=[], service=service, request=request,
    )


def dijkstra_path(topology, src, dst, edge_weight) -> list[int] | None:
    """Minimum-weight path under a nonnegative per-link weight function.

    Deterministic: neighbors are relaxed in ascending node order with
    strict-improvement updates.
    """
    dist = {src: 0.0}
    prev = {}
    heap = [(0.0, src)]
    seen = set()
    while heap:
        d, node = heapq.heappop(heap)
        if node in seen:
            continue
        seen.add(node)
        if node == dst:
            break
        for nxt in topology.neighbors(node):
            w = edge_weight(link_key(node, nxt))
            nd = d + w
            if nd < dist.get(nxt, float("inf")):
                dist[nxt] = nd
                prev[nxt] = node
                heapq.heappush(heap, (nd, nxt))
    if dst not in seen and dst != src:
        return None
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    path.reverse()
    return path


def _path_weight(topology, hops, edge_weight) -> float:
    return sum(edge_weight(link_key(a, b)) for a, b in zip(hops, hops[1:]))


def k_shortest_paths(topology, src, dst, k, edge_weight) -> list[list[int]]:
    """Yen's algorithm: up to k loopless paths by ascending weight."""
    first = dijkstra_path(topology, src, dst, edge_weight)
    if first is None:
        return []
    paths = [first]
    candidates: list[tuple[float, list[int]]] = []
    while len(paths) < k:
        prev_path = paths[-1]
        for i in range(len(prev_path) - 1):
            spur_node = prev_path[i]
            root = prev_path[: i + 1]
            removed_links = set()
            for known in paths:
                if known[: i + 1] == root and len(known) > i + 1:
                    removed_links.add(link_key(known[i], known[i + 1]))
            banned_nodes = set(root[:-1])

            def spur_weight(link, _removed=removed_links):
                return float("inf") if link in _removed else edge_weight(link)

            spur = _restricted_dijkstra(topology, spur_node, dst, spur_weight, banned_nodes)
            if spur is not None:
                candidate = root[:-1] + spur
                if candidate not in paths and all(candidate != c for _, c in candidates):
                    candidates.append((_path_weight(topology, candidate, edge_weight), candidate))
        if not candidates:
            break
        candidates.sort(key=lambda item: (item[0], item[1]))
        _, best = candidates.pop(0)
        paths.append(best)
    return paths


def _restricted_dijkstra(topology, src, dst, edge_weight, banned_nodes):
    dist = {src: 0.0}
    prev = {}
    heap = [(0.0, src)]
    seen = set()
    while heap:
        d, node = heapq.heappop(heap)
        if node in seen:
            continue
        seen.add(node)
        if node == dst:
            break
        for nxt in topology.neighbors(node):
            if nxt in banned_nodes:
                continue
            w = edge_weight(link_key(node, nxt))
            if w == float("inf"):
                continue
            nd = d + w
            if nd < dist.get(nxt, float("inf")):
                dist[nxt] = nd
                prev[nxt] = node
                heapq.heappush(heap, (nd, nxt))
    if dst not in seen:
        return None
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    path.reverse()
    return path


def _first_fit_placements(service, topology, ledger, path):
    """Earliest-hop, lowest-id VM assignment along a fixed path.

    Returns the placement list or None when some function does not fit.
    Skips the ingress hop: functions live on nodes the flow moves to.
    """
    bw = Fraction(service.bandwidth_mbps)
    staged: dict[int, Fraction] = {}
    placements = []
    pos = 1
    for d in service.cycles_per_bit:
        charge = Fraction(d) * bw
        chosen = None
        for hop in range(pos, len(path)):
            for vm in topology.node_vms[path[hop]]:
                if charge <= ledger.vm_available(vm) - staged.get(vm, Fraction(0)):
                    chosen = (hop, vm)
                    break
            if chosen:
                break
        if chosen is None:
            return None
        pos, vm = chosen
        staged[vm] = staged.get(vm, Fraction(0)) + charge
        placements.append((pos, vm))
    return placements


class GreedyPolicy:
    """Shortest-propagation-delay path with first-fit placement.

    Rng-free and stateless: identical inputs give identical outcomes. A
    flag switches the edge weight to monetary link cost.
    """

    def __init__(self, topology, weights, engine_config: EngineConfig | None = None,
                 edge_metric: str = "delay"):
        self.topology = topology
        self.weights = weights
        self.engine_config = engine_config or EngineConfig()
        if edge_metric == "delay":
            self._edge_weight = lambda link: topology.prop_delay[link]
        elif edge_metric == "cost":
            self._edge_weight = lambda link: weights.link[link]
        else:
            raise OracleBoundsError(f"unknown edge metric {edge_metric!r}")

    def place(self, request, service, ledger):
        path = dijkstra_path(self.topology, service.ingress, service.egress, self._edge_weight)
        if path is None or len(path) < 2:
            return _rejected(request, service, REJECT_NO_PATH)
        placements = _first_fit_placements(service, self.topology, ledger, path)
        if placements is None:
            return _rejected(request, service, REJECT_VM_CAPACITY)
        return evaluate_plan(
            request, service, self.topology, ledger, self.weights,
            self.engine_config, path, placements,
        )


class TabuPolicy:
    """Local search over (path choice, per-function VM assignment).

    Starts from the greedy solution; one move either relocates a single
    function to another feasible VM on the current path or swaps the whole
    path for another of the precomputed shortest candidates. Recently
    applied moves are tabu for a fixed tenure unless they beat the best
    known cost. Keeps the best feasible solution seen.
    """

    def __init__(self, topology, weights, engine_config: EngineConfig | None = None,
                 iterations: int = DEFAULT_TABU_ITERATIONS,
                 tenure: int = DEFAULT_TABU_TENURE,
                 num_paths: int = DEFAULT_TABU_PATHS, rng=None):
        if iterations < 1:
            raise OracleBoundsError("tabu needs at least one iteration")
        self.topology = topology
        self.weights = weights
        self.engine_config = engine_config or EngineConfig()
        self.iterations = iterations
        self.tenure = tenure
        self.num_paths = num_paths
        self.rng = rng
        self._greedy = GreedyPolicy(topology, weights, self.engine_config)

    def place(self, request, service, ledger):
        paths = k_shortest_paths(
            self.topology, service.ingress, service.egress, self.num_paths,
            lambda link: self.topology.prop_delay[link],
        )
        if not paths:
            return _rejected(request, service, REJECT_NO_PATH)

        def evaluate(path_idx, placements):
            return evaluate_plan(
                request, service, self.topology, ledger, self.weights,
                self.engine_config, paths[path_idx], placements,
            )

        current = None
        for idx, path in enumerate(paths):
            placements = _first_fit_placements(service, self.topology, ledger, path)
            if placements is None:
                continue
            outcome = evaluate(idx, placements)
            if outcome.accepted:
                current = (idx, placements, outcome)
                break
        if current is None:
            return _rejected(request, service, REJECT_VM_CAPACITY)

        best = current
        tabu: dict = {}
        for iteration in range(1, self.iterations):
            idx, placements, outcome = current
            moves = []
            # relocate one function to another feasible VM on the current path
            path = paths[idx]
            for f in range(len(placements)):
                lo = placements[f - 1][0] if f > 0 else 1
                hi = placements[f + 1][0] if f + 1 < len(placements) else len(path) - 1
                for pos in range(lo, hi + 1):
                    for vm in self.topology.node_vms[path[pos]]:
                        if (pos, vm) == placements[f]:
                            continue
                        trial = list(placements)
                        trial[f] = (pos, vm)
                        moves.append((("assign", f, pos, vm), idx, trial))
            # swap the route for the next candidate path
            for other in range(len(paths)):
                if other == idx:
                    continue
                trial = _first_fit_placements(service, self.topology, ledger, paths[other])
                if trial is not None:
                    moves.append((("path", other), other, trial))

            best_move = None
            for key, new_idx, trial in moves:
                candidate = evaluate(new_idx, trial)
                if not candidate.accepted:
                    continue
                is_tabu = tabu.get(key, 0) > iteration
                if is_tabu and candidate.total_cost >= best[2].total_cost:
                    continue
                if best_move is None or candidate.total_cost < best_move[3].total_cost:
                    best_move = (key, new_idx, trial, candidate)
            if best_move is None:
                break
            key, new_idx, trial, candidate = best_move
            tabu[key] = iteration + self.tenure
            current = (new_idx, trial, candidate)
            if candidate.total_cost < best[2].total_cost:
                best = current
        return best[2]


class OraclePolicy:
    """Exhaustive minimum-cost search for tiny instances.

    Enumerates every simple path within the hop bound and every
    chain-order-monotone assignment of functions to VMs on the path's
    non-ingress hops; returns the cheapest feasible outcome. Ties resolve
    to the first candidate in enumeration order (paths by length then hop
    sequence, assignments lexicographic), making the result deterministic.
    """

    def __init__(self, topology, weights, engine_config: EngineConfig | None = None,
                 max_hops: int = 4):
        self.topology = topology
        self.weights = weights
        self.engine_config = engine_config or EngineConfig()
        self.max_hops = max_hops

    def place(self, request, service, ledger):
        topo = self.topology
        if topo.n_nodes > ORACLE_MAX_NODES:
            raise OracleBoundsError(f"oracle limited to {ORACLE_MAX_NODES} nodes")
        if topo.max_vms_per_node() > ORACLE_MAX_VMS_PER_NODE:
            raise OracleBoundsError(f"oracle limited to {ORACLE_MAX_VMS_PER_NODE} VMs per node")
        if service.chain_length > ORACLE_MAX_FUNCTIONS:
            raise OracleBoundsError(f"oracle limited to {ORACLE_MAX_FUNCTIONS} functions")
        if self.max_hops > ORACLE_MAX_HOPS:
            raise OracleBoundsError(f"oracle limited to max_hops {ORACLE_MAX_HOPS}")

        best = None
        for path in topo.enumerate_simple_paths(service.ingress, service.egress, self.max_hops):
            hops = list(path.hops)
            if len(hops) < 2:
                continue
            positions = range(1, len(hops))
            for combo in itertools.combinations_with_replacement(positions, service.chain_length):
                vm_options = [topo.node_vms[hops[pos]] for pos in combo]
                for vms in itertools.product(*vm_options):
                    placements = list(zip(combo, vms))
                    outcome = evaluate_plan(
                        request, service, topo, ledger, self.weights,
                        self.engine_config, hops, placements,
                    )
                    if outcome.accepted and (best is None or outcome.total_cost < best.total_cost):
                        best = outcome
        if best is None:
            return _rejected(request, service, "infeasible")
        return best
