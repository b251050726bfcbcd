"""Value network, experience replay, and the learning placement policy.

The Q-network is a plain fully connected net: rectifier hidden layers,
identity output, trained by stochastic gradient descent on the squared
TD error of the selected action's output. No target network is used by
default; an optional frozen-target mode exists for stability experiments.
"""

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from .engine import Episode, EngineConfig, action_space_size
from .errors import SfcSimError, TrainingError
from .ledger import state_vector_size

CHECKPOINT_FORMAT_VERSION = 1

DEFAULT_BUFFER_CAPACITY = 2000
DEFAULT_BATCH_SIZE = 8
DEFAULT_ALPHA = 0.001
DEFAULT_GAMMA = 0.95
DEFAULT_EPSILON_START = 1.0
DEFAULT_EPSILON_DECAY = 0.9
DEFAULT_EPSILON_FLOOR = 0.1
DEFAULT_HIDDEN_LAYERS = 2
DEFAULT_HIDDEN_UNITS = 64


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool


class QNetwork:
    """Fully connected value network over encoded states.

    layer_sizes: [input, hidden..., output]. Weights start Glorot-uniform,
    biases zero; all math is float64 so gradients can be checked against
    central finite differences.
    """

    def __init__(self, layer_sizes, rng=None):
        if len(layer_sizes) < 2:
            raise SfcSimError("network needs at least input and output layers")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.layer_sizes = [int(s) for s in layer_sizes]
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.layer_sizes, self.layer_sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def forward(self, state: np.ndarray) -> np.ndarray:
        """Q-values for one state vector."""
        if state.shape != (self.input_size,):
            raise SfcSimError(
                f"state length {state.shape} does not match input size {self.input_size}"
            )
        return self.forward_batch(state[None, :])[0]

    def forward_batch(self, states: np.ndarray) -> np.ndarray:
        if states.shape[1] != self.input_size:
            raise SfcSimError("state width does not match input size")
        h = states
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i != last:
                np.maximum(h, 0.0, out=h)
        return h

    def _forward_cached(self, states):
        """Forward pass keeping layer activations for backprop."""
        activations = [states]
        h = states
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i != last:
                h = np.maximum(h, 0.0)
            activations.append(h)
        return activations

    def gradients(self, states, actions, targets):
        """Semi-gradient of the mean squared TD error w.r.t. all parameters.

        Only the selected actions' outputs carry error; targets are treated
        as constants. Returns (loss, weight grads, bias grads).
        """
        batch = states.shape[0]
        acts = self._forward_cached(states)
        q = acts[-1]
        idx = np.arange(batch)
        selected = q[idx, actions]
        err = selected - targets
        loss = float(np.mean(err ** 2))
        if not np.isfinite(loss):
            return loss, None, None

        delta = np.zeros_like(q)
        delta[idx, actions] = 2.0 * err / batch
        grad_w = [None] * len(self.weights)
        grad_b = [None] * len(self.biases)
        for layer in range(len(self.weights) - 1, -1, -1):
            grad_w[layer] = acts[layer].T @ delta
            grad_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (acts[layer] > 0.0)
        return loss, grad_w, grad_b

    def copy(self) -> "QNetwork":
        clone = QNetwork.__new__(QNetwork)
        clone.layer_sizes = list(self.layer_sizes)
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def flatten_parameters(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)


def select_action(q_values, epsilon: float, rng) -> int:
    """Epsilon-greedy over the q-vector: ties resolve to the lowest index."""
    n = len(q_values)
    if n == 0:
        raise SfcSimError("empty q-vector")
    if not 0.0 <= epsilon <= 1.0:
        raise SfcSimError("epsilon must be in [0, 1]")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(0, n))
    return int(np.argmax(q_values))


class ReplayBuffer:
    """FIFO transition store with uniform minibatch sampling."""

    def __init__(self, capacity: int = DEFAULT_BUFFER_CAPACITY):
        self._items = deque(maxlen=capacity)
        self.capacity = capacity

    def push(self, transition: Transition) -> None:
        self._items.append(transition)

    def __len__(self) -> int:
        return len(self._items)

    def sample(self, rng, batch_size: int = DEFAULT_BATCH_SIZE) -> list[Transition]:
        """Uniform sample without replacement (with, when underfull)."""
        if not self._items:
            raise SfcSimError("cannot sample from an empty buffer")
        replace = len(self._items) < batch_size
        idx = rng.choice(len(self._items), size=batch_size, replace=replace)
        return [self._items[int(i)] for i in idx]


def compute_targets(network: QNetwork, batch, gamma: float, target_mode: str = "td",
                    target_network: QNetwork | None = None) -> np.ndarray:
    """TD targets: reward plus discounted best next value on non-terminals.

    target_mode "reward_only" reproduces the literal squared-error-on-reward
    update; "td" is the default bootstrapped target.
    """
    rewards = np.array([t.reward for t in batch], dtype=np.float64)
    if target_mode == "reward_only":
        return rewards
    if target_mode != "td":
        raise SfcSimError(f"unknown target mode {target_mode!r}")
    net = target_network if target_network is not None else network
    next_states = np.stack([t.next_state for t in batch])
    next_q = net.forward_batch(next_states)
    terminal = np.array([t.terminal for t in batch])
    targets = rewards.copy()
    targets[~terminal] += gamma * next_q.max(axis=1)[~terminal]
    return targets


def train_step(network: QNetwork, batch, alpha: float = DEFAULT_ALPHA,
               gamma: float = DEFAULT_GAMMA, target_mode: str = "td",
               target_network: QNetwork | None = None) -> float:
    """One SGD update toward the TD targets; returns the pre-update loss."""
    if not batch:
        raise SfcSimError("empty training batch")
    states = np.stack([t.state for t in batch])
    actions = np.array([t.action for t in batch], dtype=np.intp)
    targets = compute_targets(network, batch, gamma, target_mode, target_network)
    loss, grad_w, grad_b = network.gradients(states, actions, targets)
    if grad_w is None or not np.isfinite(loss):
        raise TrainingError(f"non-finite loss {loss}; aborting training")
    for w, gw in zip(network.weights, grad_w):
        w -= alpha * gw
    for b, gb in zip(network.biases, grad_b):
        b -= alpha * gb
    return loss


@dataclass
class DqnConfig:
    alpha: float = DEFAULT_ALPHA
    gamma: float = DEFAULT_GAMMA
    epsilon_start: float = DEFAULT_EPSILON_START
    epsilon_decay: float = DEFAULT_EPSILON_DECAY
    epsilon_floor: float = DEFAULT_EPSILON_FLOOR
    buffer_capacity: int = DEFAULT_BUFFER_CAPACITY
    batch_size: int = DEFAULT_BATCH_SIZE
    hidden_layers: int = DEFAULT_HIDDEN_LAYERS
    hidden_units: int = DEFAULT_HIDDEN_UNITS
    target_mode: str = "td"
    use_frozen_target: bool = False
    target_sync_every: int = 100  # episodes, when the frozen target is enabled
    train_each_step: bool = True
    # Exploration branch: draw the random action from the possible set
    # instead of the whole action space. The greedy branch stays unmasked,
    # so impossible argmax choices still reject the request. Disable for
    # uniform exploration over the entire action space.
    explore_possible_only: bool = True
    # Store every transition of a rejected episode as terminal. A rejected
    # episode pays out nothing as a whole, so bootstrapping a continuation
    # value through its steps would inject value the walk never earned.
    reject_all_terminal: bool = True


class DqnAgent:
    """Epsilon-greedy learning policy driving placement episodes.

    Epsilon starts at epsilon_start and is multiplied by epsilon_decay
    after every episode, floored at epsilon_floor.
    """

    def __init__(self, topology, weights, catalog_size, engine_config: EngineConfig | None = None,
                 config: DqnConfig | None = None, rng=None):
        self.topology = topology
        self.weights = weights
        self.catalog_size = catalog_size
        self.engine_config = engine_config or EngineConfig()
        self.config = config or DqnConfig()
        self.rng = rng if rng is not None else np.random.default_rng(0)

        p_in = state_vector_size(topology)
        p_out = action_space_size(topology, self.engine_config.literal_action_space)
        sizes = [p_in] + [self.config.hidden_units] * self.config.hidden_layers + [p_out]
        self.network = QNetwork(sizes, rng=self.rng)
        self.target_network = self.network.copy() if self.config.use_frozen_target else None
        self.buffer = ReplayBuffer(self.config.buffer_capacity)
        self.epsilon = self.config.epsilon_start
        self.episodes_seen = 0
        self.losses: list[float] = []

    def _act(self, state, possible=None) -> int:
        q = self.network.forward(state)
        if possible is not None and self.engine_config.mask_invalid_actions:
            masked = np.full_like(q, -np.inf)
            masked[possible] = q[possible]
            if self.rng.random() < self.epsilon:
                return int(possible[self.rng.integers(0, len(possible))])
            return int(np.argmax(masked))
        if possible is not None and self.config.explore_possible_only:
            if self.rng.random() < self.epsilon:
                return int(possible[self.rng.integers(0, len(possible))])
            return int(np.argmax(q))
        return select_action(q, self.epsilon, self.rng)

    def place(self, request, service, ledger):
        """Run one request's episode, store its transitions, and train."""
        episode = Episode(
            request, service, self.topology, ledger, self.weights,
            self.engine_config, self.catalog_size,
        )
        steps: list[tuple[np.ndarray, int, np.ndarray]] = []
        state = episode.encode_state()
        need_possible = self.engine_config.mask_invalid_actions or self.config.explore_possible_only
        while not episode.done:
            possible = episode.possible_actions() if need_possible else None
            action = self._act(state, possible)
            episode.step(action)
            next_state = episode.encode_state()
            steps.append((state, action, next_state))
            state = next_state
            if self.config.train_each_step and len(self.buffer) > 0:
                loss = train_step(
                    self.network, self.buffer.sample(self.rng, self.config.batch_size),
                    self.config.alpha, self.config.gamma, self.config.target_mode,
                    self.target_network,
                )
                self.losses.append(loss)

        rewards = episode.transition_rewards
        rejected = not episode.outcome.accepted
        for i, (s, a, s_next) in enumerate(steps):
            # A rejected episode pays out nothing, so its transitions carry no
            # continuation value either: storing them all as terminal keeps the
            # zeroed rewards from being overwritten by bootstrapped targets.
            terminal = (i == len(steps) - 1) or (rejected and self.config.reject_all_terminal)
            self.buffer.push(
                Transition(
                    state=s, action=a, reward=rewards[i],
                    next_state=s_next, terminal=terminal,
                )
            )
        self.episodes_seen += 1
        self.epsilon = max(self.config.epsilon_floor, self.epsilon * self.config.epsilon_decay)
        if (
            self.target_network is not None
            and self.episodes_seen % self.config.target_sync_every == 0
        ):
            self.target_network = self.network.copy()
        return episode.outcome


def save_checkpoint(path, network: QNetwork, epsilon: float) -> None:
    """Persist layer sizes, parameters, and the exploration rate."""
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "layer_sizes": network.layer_sizes,
        "weights": [w.tolist() for w in network.weights],
        "biases": [b.tolist() for b in network.biases],
        "epsilon": epsilon,
    }
    with open(path, "w") as handle:
        json.dump(payload, handle)


def load_checkpoint(path, expected_input: int | None = None,
                    expected_output: int | None = None):
    """Load a checkpoint, validating shapes against the topology-derived sizes."""
    with open(path) as handle:
        payload = json.load(handle)
    if payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise SfcSimError("unsupported checkpoint format version")
    sizes = payload["layer_sizes"]
    if expected_input is not None and sizes[0] != expected_input:
        raise SfcSimError(f"checkpoint input size {sizes[0]} != expected {expected_input}")
    if expected_output is not None and sizes[-1] != expected_output:
        raise SfcSimError(f"checkpoint output size {sizes[-1]} != expected {expected_output}")
    network = QNetwork(sizes)
    weights = [np.array(w, dtype=np.float64) for w in payload["weights"]]
    biases = [np.array(b, dtype=np.float64) for b in payload["biases"]]
    for i, (w, b) in enumerate(zip(weights, biases)):
        if w.shape != network.weights[i].shape or b.shape != network.biases[i].shape:
            raise SfcSimError("checkpoint parameter shapes do not match layer sizes")
    network.weights = weights
    network.biases = biases
    return network, float(payload["epsilon"])
