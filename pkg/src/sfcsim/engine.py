"""Node-by-node routing and function placement episodes.

An episode starts at the request's ingress node and repeatedly applies
(VM, place-or-forward) actions: each action moves to the selected VM's
node (VMs on neighbor nodes only), a placement additionally pins the next
chain function to that VM. Capacity and latency constraints are checked
per step; the episode ends accepted at the egress with the whole chain
placed, or rejected.

Charges are staged inside the episode and handed to the caller on
acceptance, so a rejected episode never touches the ledger. Step rewards
are likewise staged: when an episode is rejected its total reward is
forced to zero, which here means every staged step reward is zeroed
before the transitions are exposed for training.
"""

from dataclasses import dataclass, field
from fractions import Fraction

from .delay_cost import (
    CAPACITY_CYCLES_SCALE,
    DelayBreakdown,
    delay_breakdown,
    processing_delay,
    request_objective,
    transmission_delay,
)
from .errors import SfcSimError
from .ledger import EncodeContext
from .topology import link_key

REJECT_INVALID_ACTION = "invalid_action"
REJECT_VM_CAPACITY = "vm_capacity"
REJECT_LINK_CAPACITY = "link_capacity"
REJECT_LATENCY = "latency"
REJECT_STEP_LIMIT = "step_limit"
REJECT_EGRESS_CAPACITY = "egress_capacity"
REJECT_NO_PATH = "no_path"


@dataclass(frozen=True)
class EngineConfig:
    max_steps: int = 100          # per-episode step bound J
    w_acc: float = 1.0            # constraint-satisfaction reward coefficient
    w_cost: float = 0.001         # cost penalty coefficient
    quantization_levels: int = 1000
    include_transmission_in_step: bool = True
    literal_action_space: bool = False  # inflate outputs to N * V * 2; extras never selectable
    mask_invalid_actions: bool = False
    # Stored transition rewards on a rejected episode. The episode reward is
    # always forced to zero; by default the staged per-step rewards are voided
    # with it, so a doomed walk cannot bank per-step rewards. Disabling this
    # keeps the satisfied steps' granted rewards (store-as-you-go reading),
    # which makes reward farming on never-completing walks the best policy.
    void_rewards_on_rejection: bool = True


def action_space_size(topology, literal: bool = False) -> int:
    """Number of actions: every global VM times {place, forward}."""
    base = topology.num_vms * 2
    if literal:
        return topology.n_nodes * base
    return base


def decode_action(action: int, topology) -> tuple[int, bool]:
    """Map an action index to (vm, is_placement).

    Even indices are forwarding (the VM acts as a switch), odd indices are
    placements.
    """
    if not 0 <= action < topology.num_vms * 2:
        raise SfcSimError(f"action {action} out of range")
    return action // 2, action % 2 == 1


def encode_action(vm_id: int, placement: bool) -> int:
    return 2 * vm_id + (1 if placement else 0)


@dataclass
class StepRecord:
    j: int
    action: int
    kind: str      # place | forward | finish
    node: int
    vm: int | None
    t_o: float
    phi: float
    reward: float
    status: str


@dataclass
class PlacementOutcome:
    accepted: bool
    reason: str | None
    hops: list
    xi: list                      # per chain function: (vm, node)
    segments: list                # chain_length + 1 ordered link lists
    delay: DelayBreakdown
    total_cost: float
    reward: float                 # episode reward; zero when rejected
    steps: int
    vm_charges: list              # (vm_id, Fraction) manifest, empty when rejected
    link_charges: list            # (link, Fraction) manifest
    service: object
    request: object
    step_records: list = field(default_factory=list)


class Episode:
    """Live episode state: current node, chain progress, staged charges."""

    def __init__(self, request, service, topology, ledger, weights, config: EngineConfig,
                 catalog_size: int = 1):
        self.request = request
        self.service = service
        self.topology = topology
        self.ledger = ledger
        self.weights = weights
        self.config = config
        self.catalog_size = catalog_size

        self.current_node = service.ingress
        self.current_vm: int | None = None
        self.i_f = 0
        self.t_o = 0.0
        self.j = 0
        self.hops = [service.ingress]
        self.xi: list[tuple[int, int]] = []
        self.done = False
        self.outcome: PlacementOutcome | None = None

        self._bw = Fraction(service.bandwidth_mbps)
        self._staged_vm: dict[int, Fraction] = {}
        self._staged_link: dict = {}
        self._step_rewards: list[float] = []
        self.transition_rewards: list[float] = []
        self._segments: list[list] = [[]]
        self._proc = 0.0
        self._prop = 0.0
        self._trans = 0.0
        self._cost = 0.0
        self._records: list[StepRecord] = []

        if self.current_node == service.egress:
            # Degenerate request whose ingress equals its egress.
            self._finish(agent_step=False)

    # -- queries ---------------------------------------------------------------

    def possible_actions(self) -> list[int]:
        """Actions whose VM sits on a node directly connected to the current one."""
        actions = []
        for neighbor in self.topology.neighbors(self.current_node):
            for vm_id in self.topology.node_vms[neighbor]:
                actions.append(encode_action(vm_id, False))
                actions.append(encode_action(vm_id, True))
        actions.sort()
        return actions

    def encode_state(self):
        ctx = EncodeContext(
            service=self.service,
            catalog_size=self.catalog_size,
            current_node=self.current_node,
            current_vm=self.current_vm,
            next_function_index=self.i_f,
            elapsed_s=self.t_o,
        )
        return self.ledger.encode_state(ctx, self.config.quantization_levels)

    def _vm_available(self, vm_id) -> Fraction:
        return self.ledger.vm_available(vm_id) - self._staged_vm.get(vm_id, Fraction(0))

    def _link_available(self, link) -> Fraction:
        return self.ledger.link_available(link) - self._staged_link.get(link, Fraction(0))

    # -- stepping ---------------------------------------------------------------

    def step(self, action: int) -> bool:
        """Apply one action; returns True when the episode has ended."""
        if self.done:
            raise SfcSimError("episode already finished")
        service = self.service
        cfg = self.config

        if action not in set(self.possible_actions()):
            self._record(action, "invalid", self.current_node, None, 0.0, 0.0,
                         REJECT_INVALID_ACTION)
            self.transition_rewards.append(0.0)
            self._reject(REJECT_INVALID_ACTION)
            return True

        vm_id, place = decode_action(action, self.topology)
        dest = self.topology.vm_node(vm_id)
        link = link_key(self.current_node, dest)
        placing = place and self.i_f < service.chain_length

        if placing:
            charge = Fraction(service.cycles_per_bit[self.i_f]) * self._bw
            if charge > self._vm_available(vm_id):
                self._record(action, "place", dest, vm_id, 0.0, 0.0, REJECT_VM_CAPACITY)
                self.transition_rewards.append(0.0)
                self._reject(REJECT_VM_CAPACITY)
                return True
        if self._bw > self._link_available(link):
            self._record(action, "place" if placing else "forward", dest, vm_id, 0.0, 0.0,
                         REJECT_LINK_CAPACITY)
            self.transition_rewards.append(0.0)
            self._reject(REJECT_LINK_CAPACITY)
            return True

        # Constraints hold: stage charges and accumulate delay/cost/reward.
        prop = self.topology.prop_delay[link]
        trans = (
            transmission_delay(service.packet_bits, self.topology.link_capacity[link])
            if cfg.include_transmission_in_step
            else 0.0
        )
        self._staged_link[link] = self._staged_link.get(link, Fraction(0)) + self._bw
        self._prop += prop
        self._trans += trans
        tau_hat = prop + trans
        phi = self.weights.link[link] * service.bandwidth_mbps

        if placing:
            d = service.cycles_per_bit[self.i_f]
            charge = Fraction(d) * self._bw
            proc = processing_delay(
                d, service.packet_bits, self.topology.vm_capacity(vm_id) * CAPACITY_CYCLES_SCALE
            )
            self._staged_vm[vm_id] = self._staged_vm.get(vm_id, Fraction(0)) + charge
            self._proc += proc
            tau_hat += proc
            phi += self.weights.vm[vm_id] * d * service.bandwidth_mbps
            self.xi.append((vm_id, dest))
            self._segments[-1].append(link)
            self._segments.append([])
            self.i_f += 1
            kind = "place"
        else:
            self._segments[-1].append(link)
            kind = "forward"

        self.current_node = dest
        self.current_vm = vm_id
        self.hops.append(dest)
        self.j += 1
        self.t_o += tau_hat
        self._cost += phi
        reward = cfg.w_acc - cfg.w_cost * phi
        self._step_rewards.append(reward)
        self.transition_rewards.append(reward)
        self._record(action, kind, dest, vm_id, tau_hat, phi, "ok")

        if self.current_node == service.egress:
            self._finish(agent_step=True)
            return True
        if self.t_o >= service.latency_budget_s:
            self._reject(REJECT_LATENCY)
            return True
        if self.j >= cfg.max_steps:
            self._reject(REJECT_STEP_LIMIT)
            return True
        return False

    def _finish(self, agent_step: bool) -> None:
        """Egress reached: place any remaining functions on egress-node VMs."""
        service = self.service
        cfg = self.config
        egress = service.egress
        finish_reward = 0.0
        while self.i_f < service.chain_length:
            d = service.cycles_per_bit[self.i_f]
            charge = Fraction(d) * self._bw
            chosen = None
            for vm_id in self.topology.node_vms[egress]:
                if charge <= self._vm_available(vm_id):
                    chosen = vm_id
                    break
            if chosen is None:
                self._reject(REJECT_EGRESS_CAPACITY)
                return
            proc = processing_delay(
                d, service.packet_bits, self.topology.vm_capacity(chosen) * CAPACITY_CYCLES_SCALE
            )
            self._staged_vm[chosen] = self._staged_vm.get(chosen, Fraction(0)) + charge
            self._proc += proc
            self.t_o += proc
            self.j += 1
            phi = self.weights.vm[chosen] * d * service.bandwidth_mbps
            self._cost += phi
            reward = cfg.w_acc - cfg.w_cost * phi
            self._step_rewards.append(reward)
            finish_reward += reward
            self.current_vm = chosen
            self.xi.append((chosen, egress))
            self._segments.append([])
            self.i_f += 1
            self._record(None, "finish", egress, chosen, proc, phi, "ok")
        if agent_step and self.transition_rewards and finish_reward:
            self.transition_rewards[-1] += finish_reward
        if self.t_o > service.latency_budget_s:
            self._reject(REJECT_LATENCY)
            return
        self._accept()

    # -- termination --------------------------------------------------------------

    def _record(self, action, kind, node, vm, tau_hat, phi, status):
        self._records.append(
            StepRecord(
                j=self.j, action=action, kind=kind, node=node, vm=vm,
                t_o=self.t_o, phi=phi,
                reward=self._step_rewards[-1] if status == "ok" and self._step_rewards else 0.0,
                status=status,
            )
        )

    def _segments_final(self):
        # chain_length + 1 segments; trailing forward links belong to the
        # last (function -> egress) segment.
        segs = [list(s) for s in self._segments]
        while len(segs) < self.service.chain_length + 1:
            segs.append([])
        if len(segs) > self.service.chain_length + 1:
            # merge any surplus (placements after the last segment open) -- cannot
            # happen with the stepping rules above, kept defensive.
            head = segs[: self.service.chain_length]
            tail = [l for s in segs[self.service.chain_length:] for l in s]
            segs = head + [tail]
        return segs

    def _accept(self) -> None:
        self.done = True
        self.outcome = PlacementOutcome(
            accepted=True,
            reason=None,
            hops=list(self.hops),
            xi=list(self.xi),
            segments=self._segments_final(),
            delay=DelayBreakdown(self._proc, self._prop, self._trans),
            total_cost=self._cost,
            reward=sum(self._step_rewards),
            steps=self.j,
            vm_charges=sorted(self._staged_vm.items()),
            link_charges=sorted(self._staged_link.items()),
            service=self.service,
            request=self.request,
            step_records=self._records,
        )

    def _reject(self, reason: str) -> None:
        self.done = True
        if self.config.void_rewards_on_rejection:
            # Mirror the zero episode reward in the stored transitions too, so
            # the agent cannot learn to farm per-step rewards on doomed walks.
            self.transition_rewards = [0.0] * len(self.transition_rewards)
        elif self.transition_rewards:
            # The step that killed the episode violated a constraint, so it
            # earns nothing even when it moved before the breach surfaced.
            self.transition_rewards[-1] = 0.0
        self.outcome = PlacementOutcome(
            accepted=False,
            reason=reason,
            hops=list(self.hops),
            xi=list(self.xi),
            segments=[list(s) for s in self._segments],
            delay=DelayBreakdown(self._proc, self._prop, self._trans),
            total_cost=self._cost,
            reward=0.0,
            steps=self.j,
            vm_charges=[],
            link_charges=[],
            service=self.service,
            request=self.request,
            step_records=self._records,
        )


def evaluate_plan(request, service, topology, ledger, weights, config: EngineConfig,
                  path_nodes, placements) -> PlacementOutcome:
    """Check a planner's (path, placement) proposal against the constraints.

    path_nodes: simple hop list ingress..egress; placements: per chain
    function a (position, vm) pair with 1 <= position < len(path_nodes),
    positions non-decreasing in chain order. Returns the same outcome
    structure an episode produces, so every policy flows through one
    constraint checker.
    """
    def rejected(reason):
        return PlacementOutcome(
            accepted=False, reason=reason, hops=list(path_nodes), xi=[],
            segments=[], delay=DelayBreakdown(0.0, 0.0, 0.0), total_cost=0.0,
            reward=0.0, steps=0, vm_charges=[], link_charges=[],
            service=service, request=request,
        )

    if path_nodes[0] != service.ingress or path_nodes[-1] != service.egress:
        raise SfcSimError("plan path endpoints do not match the service")
    for a, b in zip(path_nodes, path_nodes[1:]):
        if not topology.has_link(a, b):
            raise SfcSimError(f"plan path hops {a}->{b} not adjacent")
    if len(placements) != service.chain_length:
        raise SfcSimError("plan places the wrong number of functions")
    last_pos = 1
    for pos, vm in placements:
        if pos < last_pos or pos >= len(path_nodes):
            raise SfcSimError("plan placement positions must be non-decreasing hop indices")
        if topology.vm_node(vm) != path_nodes[pos]:
            raise SfcSimError("plan assigns a function to a VM off its hop")
        last_pos = pos

    bw = Fraction(service.bandwidth_mbps)
    vm_totals: dict[int, Fraction] = {}
    for (pos, vm), d in zip(placements, service.cycles_per_bit):
        charge = Fraction(d) * bw
        vm_totals[vm] = vm_totals.get(vm, Fraction(0)) + charge
    for vm, total in vm_totals.items():
        if total > ledger.vm_available(vm):
            return rejected(REJECT_VM_CAPACITY)
    links = [link_key(a, b) for a, b in zip(path_nodes, path_nodes[1:])]
    link_totals: dict = {}
    for link in links:
        link_totals[link] = link_totals.get(link, Fraction(0)) + bw
    for link, total in link_totals.items():
        if total > ledger.link_available(link):
            return rejected(REJECT_LINK_CAPACITY)

    positions = [pos for pos, _vm in placements]
    bounds = [0] + positions + [len(links)]
    segments = [links[bounds[i]: bounds[i + 1]] for i in range(len(bounds) - 1)]
    xi = [(vm, path_nodes[pos]) for pos, vm in placements]

    delay = delay_breakdown(service, topology, xi, segments)
    if delay.total > service.latency_budget_s:
        return rejected(REJECT_LATENCY)

    steps = len(links) + service.chain_length
    outcome = PlacementOutcome(
        accepted=True,
        reason=None,
        hops=list(path_nodes),
        xi=xi,
        segments=segments,
        delay=delay,
        total_cost=0.0,
        reward=0.0,
        steps=steps,
        vm_charges=sorted(vm_totals.items()),
        link_charges=sorted(link_totals.items()),
        service=service,
        request=request,
    )
    outcome.total_cost = request_objective(outcome, weights)
    outcome.reward = steps * config.w_acc - config.w_cost * outcome.total_cost
    return outcome


def validate_outcome(outcome: PlacementOutcome, topology, ledger, weights=None) -> list[str]:
    """Replay an accepted outcome against a ledger snapshot; list violations.

    Re-checks the path, the one-VM-per-function assignment, the segment
    structure, exact capacity feasibility, and the latency budget from the
    closed-form delay.
    """
    if not outcome.accepted:
        return ["outcome not accepted"]
    service = outcome.service
    problems = []
    if outcome.hops[0] != service.ingress:
        problems.append("path does not start at the ingress")
    if outcome.hops[-1] != service.egress:
        problems.append("path does not end at the egress")
    for a, b in zip(outcome.hops, outcome.hops[1:]):
        if not topology.has_link(a, b):
            problems.append(f"hops {a}->{b} not adjacent")
    if len(outcome.xi) != service.chain_length:
        problems.append("chain not fully placed exactly once")
    for vm, node in outcome.xi:
        if topology.vm_node(vm) != node:
            problems.append(f"vm {vm} is not hosted on node {node}")
    if len(outcome.segments) != service.chain_length + 1:
        problems.append("segment count mismatch")
    walked = [l for seg in outcome.segments for l in seg]
    expected = [link_key(a, b) for a, b in zip(outcome.hops, outcome.hops[1:])]
    if walked != expected:
        problems.append("segments do not partition the hop path")

    bw = Fraction(service.bandwidth_mbps)
    vm_totals: dict[int, Fraction] = {}
    for (vm, _node), d in zip(outcome.xi, service.cycles_per_bit):
        vm_totals[vm] = vm_totals.get(vm, Fraction(0)) + Fraction(d) * bw
    for vm, total in vm_totals.items():
        if total > ledger.vm_available(vm):
            problems.append(f"vm {vm} over capacity")
    link_totals: dict = {}
    for seg in outcome.segments:
        for link in seg:
            link_totals[link] = link_totals.get(link, Fraction(0)) + bw
    for link, total in link_totals.items():
        if total > ledger.link_available(link):
            problems.append(f"link {link} over capacity")

    recomputed = delay_breakdown(service, topology, outcome.xi, outcome.segments)
    if recomputed.total > service.latency_budget_s:
        problems.append("latency budget exceeded")
    return problems
