"""Online SFC provisioning simulator for NFV-enabled networks."""

__version__ = "0.1.0"

from .topology import Topology, Path, generate_random_connected, link_key
from .services import ServiceSpec, Request, default_catalog, sample_arrival_count, sample_lifetime
from .delay_cost import (
    CostWeights,
    DelayBreakdown,
    delay_breakdown,
    processing_delay,
    request_objective,
    step_cost,
    step_delay,
)
from .ledger import EncodeContext, ResourceLedger, state_vector_size
from .engine import (
    EngineConfig,
    Episode,
    PlacementOutcome,
    action_space_size,
    decode_action,
    encode_action,
    evaluate_plan,
    validate_outcome,
)
from .dqn import DqnAgent, DqnConfig, QNetwork, ReplayBuffer, Transition, select_action, train_step
from .policies import GreedyPolicy, OraclePolicy, TabuPolicy
from .harness import RunConfig, run_simulation, sweep, emit_outputs
