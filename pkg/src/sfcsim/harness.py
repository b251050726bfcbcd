"""Simulation driver: slot loop, Monte Carlo repetitions, metrics, outputs.

Each repetition owns a private ledger and rng streams. Child seeds derive
from the master seed through numpy's splittable SeedSequence: the
topology, cost weights, and per-repetition workload streams are
independent of the policy stream, so every policy sees the same trace for
a given master seed. All outputs are a pure function of (config, master
seed); no timestamps are written.
"""

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from .delay_cost import CostWeights, DEFAULT_WEIGHT_RANGE
from .dqn import DqnAgent, DqnConfig
from .engine import EngineConfig
from .errors import ConfigError, InvariantViolation
from .ledger import ResourceLedger, DEFAULT_QUANTIZATION_LEVELS
from .policies import GreedyPolicy, OraclePolicy, TabuPolicy
from .services import (
    Request,
    default_catalog,
    load_catalog_entries,
    assign_endpoints,
    sample_arrival_count,
    sample_poisson_arrival_count,
    sample_lifetime,
)
from .topology import Topology, generate_random_connected

METRICS_WINDOW = 100  # sliding episode window for AAR/ANUC

POLICY_NAMES = ("dqn", "greedy", "tabu", "oracle")

_GENERATE_KEYS = {
    "n_nodes", "target_degree", "vm_count_range", "vm_capacity_range",
    "link_capacity_range", "prop_delay_range", "seed",
}


@dataclass
class RunConfig:
    topology_file: str | None = None
    topology_generate: dict | None = None
    catalog_file: str | None = None  # None: stock catalog
    policy: str = "dqn"
    policy_params: dict = field(default_factory=dict)
    horizon: int = 2000
    arrival_mean: float = 5.0
    lifetime_mean: float = 240.0
    arrival_process: str = "uniform"  # or "poisson" for sensitivity runs
    max_episodes: int | None = None
    repetitions: int = 10
    master_seed: int = 0
    # Service ingress/egress nodes are random but fixed for a whole run; by
    # default they derive from the per-repetition workload stream. Setting
    # endpoint_seed pins them across repetitions and master seeds, making the
    # scenario a fixed task with stochastic workload.
    endpoint_seed: int | None = None
    out_dir: str = "results"
    w_acc: float = 1.0
    w_cost: float = 0.001
    quantization_levels: int = DEFAULT_QUANTIZATION_LEVELS
    max_steps: int = 100
    weight_range: tuple = DEFAULT_WEIGHT_RANGE
    anuc_mode: str = "per_request"  # or "per_slot" cumulative alternative
    step_delay_includes_transmission: bool = True
    mask_invalid_actions: bool = False
    void_rewards_on_rejection: bool = True
    literal_action_space: bool = False
    episode_trace: bool = False
    audit_every_slot: bool = False

    def validate(self) -> None:
        if self.topology_file is None and self.topology_generate is None:
            raise ConfigError("config needs topology_file or topology_generate")
        if self.topology_file is not None and self.topology_generate is not None:
            raise ConfigError("give only one of topology_file / topology_generate")
        if self.topology_generate is not None:
            unknown = set(self.topology_generate) - _GENERATE_KEYS
            if unknown:
                raise ConfigError(f"unknown topology_generate keys: {sorted(unknown)}")
        if self.policy not in POLICY_NAMES:
            raise ConfigError(f"unknown policy {self.policy!r}; choose from {POLICY_NAMES}")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.arrival_mean < 0:
            raise ConfigError("arrival_mean must be >= 0")
        if not self.lifetime_mean > 0:
            raise ConfigError("lifetime_mean must be > 0")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.max_episodes is not None and self.max_episodes < 1:
            raise ConfigError("max_episodes must be >= 1 when set")
        if self.arrival_process not in ("uniform", "poisson"):
            raise ConfigError("arrival_process must be uniform or poisson")
        if self.anuc_mode not in ("per_request", "per_slot"):
            raise ConfigError("anuc_mode must be per_request or per_slot")
        if not self.w_acc >= 0 or self.w_cost < 0:
            raise ConfigError("reward coefficients must be non-negative")
        lo, hi = self.weight_range
        if not 0 < lo <= hi:
            raise ConfigError("weight_range must be 0 < low <= high")
        if self.quantization_levels < 1 or self.max_steps < 1:
            raise ConfigError("quantization_levels and max_steps must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        if isinstance(cfg.weight_range, list):
            cfg.weight_range = tuple(cfg.weight_range)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path) as handle:
                data = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["weight_range"] = list(self.weight_range)
        return data

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()

    def engine_config(self) -> EngineConfig:
        return EngineConfig(
            max_steps=self.max_steps,
            w_acc=self.w_acc,
            w_cost=self.w_cost,
            quantization_levels=self.quantization_levels,
            include_transmission_in_step=self.step_delay_includes_transmission,
            mask_invalid_actions=self.mask_invalid_actions,
            void_rewards_on_rejection=self.void_rewards_on_rejection,
            literal_action_space=self.literal_action_space,
        )


@dataclass
class EpisodeRecord:
    iteration: int
    slot: int
    user: int
    service_id: int
    accepted: bool
    reason: str | None
    cost: float | None
    reward: float
    steps: int
    epsilon: float | None
    buffer_size: int | None


@dataclass
class MetricsSeries:
    """Per-repetition episode log with sliding-window AAR/ANUC curves."""

    rep: int
    records: list = field(default_factory=list)
    aar: list = field(default_factory=list)
    anuc: list = field(default_factory=list)
    traces: list = field(default_factory=list)  # per-step records when enabled

    @property
    def offered(self) -> int:
        return len(self.records)

    @property
    def accepted(self) -> int:
        return sum(1 for r in self.records if r.accepted)

    @property
    def rejected(self) -> int:
        return self.offered - self.accepted

    def final_aar(self):
        return self.aar[-1] if self.aar else None

    def final_anuc(self):
        return self.anuc[-1] if self.anuc else None

    def compute_windows(self, window: int = METRICS_WINDOW, mode: str = "per_request") -> None:
        self.aar = []
        self.anuc = []
        accepted_flags = [1 if r.accepted else 0 for r in self.records]
        costs = [r.cost for r in self.records]
        cum_cost = 0.0
        for i, rec in enumerate(self.records):
            lo = max(0, i - window + 1)
            span = i - lo + 1
            acc = sum(accepted_flags[lo: i + 1])
            self.aar.append(acc / span)
            if mode == "per_slot":
                if rec.accepted:
                    cum_cost += rec.cost
                self.anuc.append(cum_cost / (rec.slot + 1))
            else:
                window_costs = [c for c, a in zip(costs[lo: i + 1], accepted_flags[lo: i + 1]) if a]
                self.anuc.append(sum(window_costs) / len(window_costs) if window_costs else None)


@dataclass
class SimulationResult:
    config: RunConfig
    series: list  # one MetricsSeries per repetition


def _rng(master_seed: int, *spawn_key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=spawn_key))


def build_topology(config: RunConfig):
    if config.topology_file is not None:
        return Topology.load(config.topology_file)
    params = dict(config.topology_generate)
    params.setdefault("seed", config.master_seed)
    for key in ("vm_count_range", "vm_capacity_range", "link_capacity_range", "prop_delay_range"):
        if key in params:
            params[key] = tuple(params[key])
    return generate_random_connected(**params)


def build_catalog(config: RunConfig, topology, rng):
    if config.catalog_file is not None:
        entries = load_catalog_entries(config.catalog_file)
        return assign_endpoints(entries, topology, rng)
    return default_catalog(topology, rng)


def make_policy(config: RunConfig, topology, weights, catalog_size, rng):
    engine_cfg = config.engine_config()
    params = dict(config.policy_params)
    if config.policy == "greedy":
        return GreedyPolicy(topology, weights, engine_cfg, **params)
    if config.policy == "tabu":
        return TabuPolicy(topology, weights, engine_cfg, rng=rng, **params)
    if config.policy == "oracle":
        return OraclePolicy(topology, weights, engine_cfg, **params)
    dqn_cfg = DqnConfig(**params) if params else DqnConfig()
    return DqnAgent(topology, weights, catalog_size, engine_cfg, dqn_cfg, rng=rng)


def run_repetition(config: RunConfig, topology, weights, rep: int) -> MetricsSeries:
    """One full slot loop with a private ledger and rng streams."""
    workload_rng = _rng(config.master_seed, 2, rep)
    policy_rng = _rng(config.master_seed, 3, rep)
    if config.endpoint_seed is not None:
        catalog = build_catalog(config, topology, np.random.default_rng(config.endpoint_seed))
    else:
        catalog = build_catalog(config, topology, workload_rng)
    ledger = ResourceLedger(topology)
    policy = make_policy(config, topology, weights, len(catalog), policy_rng)
    sample_count = (
        sample_arrival_count if config.arrival_process == "uniform" else sample_poisson_arrival_count
    )

    series = MetricsSeries(rep=rep)
    next_user = 0
    stop = False
    for slot in range(config.horizon):
        ledger.apply_departures(slot)
        if config.audit_every_slot:
            ledger.check_conservation()
        count = sample_count(workload_rng, config.arrival_mean)
        for _ in range(count):
            service = catalog[int(workload_rng.integers(0, len(catalog)))]
            lifetime = sample_lifetime(workload_rng, config.lifetime_mean)
            request = Request(
                user=next_user, service_id=service.service_id,
                arrival_slot=slot, lifetime_s=lifetime,
            )
            next_user += 1
            outcome = policy.place(request, service, ledger)
            if outcome.accepted:
                ledger.charge(
                    request.user, outcome.vm_charges, outcome.link_charges,
                    departure_slot=request.departure_slot, arrival_slot=slot,
                )
            if config.episode_trace:
                for step in outcome.step_records:
                    series.traces.append({
                        "slot": slot, "user": request.user, "j": step.j,
                        "action": step.action, "kind": step.kind, "node": step.node,
                        "vm": step.vm, "t_o": step.t_o, "phi": step.phi,
                        "reward": step.reward, "status": step.status,
                    })
            is_dqn = isinstance(policy, DqnAgent)
            series.records.append(
                EpisodeRecord(
                    iteration=len(series.records),
                    slot=slot,
                    user=request.user,
                    service_id=service.service_id,
                    accepted=outcome.accepted,
                    reason=outcome.reason,
                    cost=outcome.total_cost if outcome.accepted else None,
                    reward=outcome.reward,
                    steps=outcome.steps,
                    epsilon=policy.epsilon if is_dqn else None,
                    buffer_size=len(policy.buffer) if is_dqn else None,
                )
            )
            if config.max_episodes is not None and len(series.records) >= config.max_episodes:
                stop = True
                break
        if stop:
            break

    # End-of-run audit: all lifetimes elapsed must restore every capacity.
    horizon_end = max(
        [config.horizon] + [a.departure_slot for a in ledger._allocations.values()]
    )
    ledger.apply_departures(horizon_end)
    ledger.check_conservation()
    if not ledger.is_fully_available():
        raise InvariantViolation("ledger did not return to initial capacities after drain")

    series.compute_windows(mode=config.anuc_mode)
    return series


def run_simulation(config: RunConfig) -> SimulationResult:
    """All Monte Carlo repetitions for one configuration."""
    config.validate()
    topology = build_topology(config)
    weights_rng = _rng(config.master_seed, 1)
    weights = CostWeights.sample(topology, weights_rng, *config.weight_range)
    series = [
        run_repetition(config, topology, weights, rep)
        for rep in range(config.repetitions)
    ]
    return SimulationResult(config=config, series=series)


SWEEPABLE = ("arrival_mean", "lifetime_mean", "w_cost", "w_acc", "horizon", "max_steps")


@dataclass
class SweepResult:
    config: RunConfig
    parameter: str
    values: list
    results: list  # SimulationResult per value


def sweep(config: RunConfig, parameter: str, values) -> SweepResult:
    """Re-run the scenario once per parameter value, same master seed."""
    if parameter not in SWEEPABLE:
        raise ConfigError(f"parameter {parameter!r} is not sweepable; choose from {SWEEPABLE}")
    results = []
    for value in values:
        data = config.to_dict()
        data[parameter] = value
        results.append(run_simulation(RunConfig.from_dict(data)))
    return SweepResult(config=config, parameter=parameter, values=list(values), results=results)


# -- output emission -----------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def aggregate_finals(per_seed: list[dict]) -> dict:
    """Mean and sample std of the per-seed final window metrics."""
    def stats(key):
        vals = [row[key] for row in per_seed if row[key] is not None]
        if not vals:
            return None, None
        mean = sum(vals) / len(vals)
        if len(vals) > 1:
            var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
            std = math.sqrt(var)
        else:
            std = 0.0
        return mean, std

    aar_mean, aar_std = stats("final_aar")
    anuc_mean, anuc_std = stats("final_anuc")
    return {
        "final_aar_mean": aar_mean,
        "final_aar_std": aar_std,
        "final_anuc_mean": anuc_mean,
        "final_anuc_std": anuc_std,
    }


def emit_outputs(result: SimulationResult, out_dir, render_plots: bool = True) -> dict:
    """Write metrics.csv, episodes.jsonl, summary.json, and figure files."""
    os.makedirs(out_dir, exist_ok=True)
    metrics_path = os.path.join(out_dir, "metrics.csv")
    episodes_path = os.path.join(out_dir, "episodes.jsonl")
    summary_path = os.path.join(out_dir, "summary.json")

    with open(metrics_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["seed", "iteration", "aar", "anuc", "epsilon", "buffer_size"])
        for series in result.series:
            for rec, aar, anuc in zip(series.records, series.aar, series.anuc):
                writer.writerow([
                    series.rep, rec.iteration, _fmt(aar), _fmt(anuc),
                    _fmt(rec.epsilon), _fmt(rec.buffer_size),
                ])

    with open(episodes_path, "w") as handle:
        for series in result.series:
            for rec in series.records:
                handle.write(json.dumps({
                    "seed": series.rep,
                    "iteration": rec.iteration,
                    "slot": rec.slot,
                    "user": rec.user,
                    "service": rec.service_id,
                    "accepted": rec.accepted,
                    "reason": rec.reason,
                    "cost": rec.cost,
                    "reward": rec.reward,
                    "steps": rec.steps,
                }) + "\n")

    if any(series.traces for series in result.series):
        with open(os.path.join(out_dir, "traces.jsonl"), "w") as handle:
            for series in result.series:
                for trace in series.traces:
                    handle.write(json.dumps({"seed": series.rep, **trace}) + "\n")

    per_seed = [
        {
            "seed": series.rep,
            "offered": series.offered,
            "accepted": series.accepted,
            "rejected": series.rejected,
            "final_aar": series.final_aar(),
            "final_anuc": series.final_anuc(),
        }
        for series in result.series
    ]
    summary = {
        "config": result.config.to_dict(),
        "config_hash": result.config.config_hash(),
        "per_seed": per_seed,
        "aggregate": aggregate_finals(per_seed),
    }
    with open(summary_path, "w") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)

    written = {"metrics": metrics_path, "episodes": episodes_path, "summary": summary_path}
    if render_plots:
        from . import plotting

        written.update(plotting.render_run_plots(out_dir))
    return written


def emit_sweep_outputs(result: SweepResult, out_dir, render_plots: bool = True) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    sweep_path = os.path.join(out_dir, "sweep.csv")
    with open(sweep_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([result.parameter, "seed", "final_aar", "final_anuc"])
        for value, sim in zip(result.values, result.results):
            for series in sim.series:
                writer.writerow([
                    _fmt(value), series.rep,
                    _fmt(series.final_aar()), _fmt(series.final_anuc()),
                ])

    rows = []
    for value, sim in zip(result.values, result.results):
        per_seed = [
            {"final_aar": s.final_aar(), "final_anuc": s.final_anuc()}
            for s in sim.series
        ]
        agg = aggregate_finals(per_seed)
        agg[result.parameter] = value
        rows.append(agg)
    summary = {
        "config": result.config.to_dict(),
        "config_hash": result.config.config_hash(),
        "parameter": result.parameter,
        "rows": rows,
    }
    summary_path = os.path.join(out_dir, "sweep_summary.json")
    with open(summary_path, "w") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)

    written = {"sweep": sweep_path, "sweep_summary": summary_path}
    if render_plots:
        from . import plotting

        written.update(plotting.render_sweep_plots(out_dir, result.parameter))
    return written
