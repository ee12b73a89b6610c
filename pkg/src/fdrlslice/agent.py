"""Per-(slice, BS) DDQN decision agent.

State construction, epsilon-greedy action selection over PRB chunks, the
reward/penalty shaping, replay buffer, the double-DQN training step and
target-network synchronization.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from . import neural
from .domain import SliceSpec
from .env import gamma


@dataclass(frozen=True)
class AgentState:
    snr_db: float
    offered_bits: int
    spare_prbs: int


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action_index: int
    reward: float
    next_state: np.ndarray


class ReplayBuffer:
    """Ring buffer of transitions with seed-reproducible batch sampling."""

    def __init__(self, capacity: int = 20000,
                 rng: np.random.Generator | None = None):
        self.capacity = capacity
        self.rng = rng if rng is not None else np.random.default_rng()
        self._data: list[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._data)

    def push(self, tr: Transition) -> None:
        if len(self._data) < self.capacity:
            self._data.append(tr)
        else:
            self._data[self._next] = tr
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int) -> list[Transition]:
        """Batch without replacement; requires len >= batch_size."""
        idx = self.rng.choice(len(self._data), size=batch_size, replace=False)
        return [self._data[i] for i in idx]


@dataclass
class AgentNet:
    online: neural.ModelParams
    target: neural.ModelParams
    opt: neural.OptState
    epsilon_greedy: float
    cumulative_reward_episode: float = 0.0
    episode_index: int = 0


def build_state(raw: AgentState, bs_capacity: int,
                demand_scale: float) -> np.ndarray:
    """Normalized 3-vector input, each component clamped to [0, 2]."""
    scale = max(demand_scale, 1.0)
    return np.array([
        min(max(raw.snr_db / 40.0, 0.0), 2.0),
        min(max(raw.offered_bits / scale, 0.0), 2.0),
        min(max(raw.spare_prbs / bs_capacity, 0.0), 2.0),
    ])


def action_space(bs_capacity: int, chunk: int) -> list[int]:
    """PRB values {0, chunk, 2*chunk, ..., capacity}."""
    return [chunk * k for k in range(bs_capacity // chunk + 1)]


def select_action(q_values: np.ndarray, epsilon_greedy: float,
                  rng: np.random.Generator) -> int:
    if rng.random() < epsilon_greedy:
        return int(rng.integers(len(q_values)))
    return int(np.argmax(q_values))  # lowest-index tie-break


def compute_reward(alloc_prbs: int, snr_db: float, offered_bits: int,
                   chunk: int, interval_s: float,
                   mode: str = "normalized") -> float:
    """Allocation-gap reward.

    gap = granted bits - offered bits over the interval; the boundaries are
    rho_low = -chunk capacity and rho_up = 2x chunk capacity. The middle
    branch (1 - gap/rho_up)(gap/rho_up) peaks at 0.25; the outer branches
    penalize under/over-provisioning linearly. In ``normalized`` mode the
    outer branches are divided by rho_up so rewards stay O(1); ``literal``
    mode keeps them in raw bits.
    """
    alpha = gamma(alloc_prbs, snr_db) * interval_s - offered_bits
    chunk_bits = gamma(chunk, snr_db) * interval_s
    rho_low = -chunk_bits
    rho_up = 2.0 * chunk_bits
    if alpha < rho_low:
        raw = alpha - 4.0 * rho_low
        return raw / rho_up if mode == "normalized" else raw
    if alpha <= rho_up:
        x = alpha / rho_up
        return (1.0 - x) * x
    raw = -(alpha - rho_up)
    return raw / rho_up if mode == "normalized" else raw


def apply_penalty(proposed_prbs: int, spare_prbs: int, eta: float,
                  reward_in: float) -> float:
    """Overrides the reward with -eta when the proposal exceeds spare PRBs."""
    if proposed_prbs > spare_prbs:
        return -eta
    return reward_in


def clip_to_spare(proposed_prbs: int, spare_prbs: int, chunk: int) -> int:
    """Largest feasible chunk multiple <= spare; the enforced allocation."""
    if proposed_prbs <= spare_prbs:
        return proposed_prbs
    return (spare_prbs // chunk) * chunk


def td_targets(net: AgentNet, batch: list[Transition], gamma_discount: float,
               *, double: bool = True) -> np.ndarray:
    """Bootstrap targets y = r + gamma * Q_next for a batch.

    Double mode: online network picks the argmax action, target network
    evaluates it. Single mode: the online network plays both roles.
    """
    next_states = np.stack([tr.next_state for tr in batch])
    rewards = np.array([tr.reward for tr in batch])
    q_next_online = neural.forward_batch(net.online, next_states)
    if double:
        best = np.argmax(q_next_online, axis=1)
        q_next_target = neural.forward_batch(net.target, next_states)
        bootstrap = q_next_target[np.arange(len(batch)), best]
    else:
        bootstrap = q_next_online.max(axis=1)
    return rewards + gamma_discount * bootstrap


def train_step(net: AgentNet, buffer: ReplayBuffer, batch_size: int,
               gamma_discount: float, lr: float, *, double: bool = True,
               optimizer: str = "adam") -> float | None:
    """One batched DDQN update of the online network; returns the batch mean
    squared TD error, or None when the buffer is too small.

    With ``double`` the online network selects the bootstrap action and the
    target network evaluates it; without it the online network plays both
    roles (vanilla DQN). Episodes are time slices, so the bootstrap term is
    always present.
    """
    if len(buffer) < batch_size:
        return None
    batch = buffer.sample(batch_size)
    states = np.stack([tr.state for tr in batch])
    actions = np.array([tr.action_index for tr in batch])
    y = td_targets(net, batch, gamma_discount, double=double)

    grads = neural.backward_batch(net.online, states, actions, y)
    step = neural.adam_update if optimizer == "adam" else neural.sgd_update
    net.online, net.opt = step(net.online, grads, net.opt, lr)

    q = neural.forward_batch(net.online, states)[np.arange(batch_size), actions]
    return float(np.mean((y - q) ** 2))


def sync_target(net: AgentNet) -> AgentNet:
    net.target = replace(net.online, vector=net.online.vector.copy())
    return net


def epsilon_at(episode_index: int, epsilon_start: float, epsilon_floor: float,
               total_episodes: int) -> float:
    """Exponential decay reaching the floor at half the horizon, then held."""
    half = max(total_episodes / 2.0, 1e-9)
    if episode_index >= half or epsilon_start <= epsilon_floor:
        return epsilon_floor
    k = math.log(epsilon_start / epsilon_floor) / half
    return max(epsilon_floor, epsilon_start * math.exp(-k * episode_index))


def decay_epsilon(net: AgentNet, episode_index: int, epsilon_start: float,
                  epsilon_floor: float, total_episodes: int) -> AgentNet:
    net.epsilon_greedy = epsilon_at(episode_index, epsilon_start,
                                    epsilon_floor, total_episodes)
    net.episode_index = episode_index
    return net


def new_agent(layer_sizes, rng: np.random.Generator,
              epsilon_start: float = 1.0) -> AgentNet:
    online = neural.init_params(layer_sizes, rng)
    net = AgentNet(
        online=online,
        target=replace(online, vector=online.vector.copy()),
        opt=neural.OptState.zeros(online.vector.size),
        epsilon_greedy=epsilon_start,
    )
    return net


# --- checkpoints -------------------------------------------------------------
#
# Agent checkpoint = network checkpoint + 8-byte trailer:
# float32 epsilon, uint32 episode index (little-endian).


def save_agent(net: AgentNet, path) -> None:
    with open(path, "wb") as f:
        f.write(neural.checkpoint_bytes(net.online))
        f.write(struct.pack("<fI", net.epsilon_greedy, net.episode_index))


def load_agent(path) -> AgentNet:
    with open(path, "rb") as f:
        data = f.read()
    params, off = neural.params_from_bytes(data)
    eps, episode = struct.unpack_from("<fI", data, off)
    net = AgentNet(
        online=params,
        target=replace(params, vector=params.vector.copy()),
        opt=neural.OptState.zeros(params.vector.size),
        epsilon_greedy=float(eps),
        episode_index=int(episode),
    )
    return net
