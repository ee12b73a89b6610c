"""Top-level simulation loop.

Wires mobility -> demand -> sequential per-slice agent decisions ->
environment step -> training -> periodic federation, and collects metrics.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import agent as agent_mod
from . import clustering, env, federation, mobility, neural
from .domain import ScenarioConfig, SliceSpec, slices_by_priority, validate_config

log = logging.getLogger(__name__)

LATENCY_RESERVOIR_SIZE = 100_000
DEMAND_SCALE_WINDOW = 1440  # intervals (one day at 60 s)
DEMAND_SCALE_REFRESH = 16


@dataclass(frozen=True)
class EpisodeRow:
    episode: int
    slice_id: int
    strategy: str
    mean_reward: float
    dropped_fraction: float
    offered_bits: int
    served_bits: int
    mean_latency_ms: float


@dataclass(frozen=True)
class ClusterRow:
    episode: int
    slice_id: int
    bs_id: int
    label: int


@dataclass
class SimulationMetrics:
    episodes: list[EpisodeRow] = field(default_factory=list)
    overhead: list[federation.OverheadRecord] = field(default_factory=list)
    cluster_rows: list[ClusterRow] = field(default_factory=list)
    latency_samples: dict[int, list[float]] = field(default_factory=dict)
    capacity_violations: int = 0
    conservation_violations: int = 0


def _stream(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng([int(master_seed), *map(int, key)])


class _AgentSlot:
    """Mutable per-(slice, BS) simulation state."""

    def __init__(self, slice_spec: SliceSpec, bs, layer_sizes, rng, cfg):
        self.slice = slice_spec
        self.bs = bs
        self.rng = rng
        self.actions = agent_mod.action_space(bs.capacity_prbs,
                                              slice_spec.chunk_prbs)
        self.net = agent_mod.new_agent(layer_sizes, rng,
                                       cfg.learning.epsilon_start)
        self.buffer = agent_mod.ReplayBuffer(cfg.learning.buffer_size, rng)
        self.queue = env.QueueState()
        self.pending = None  # (state_vec, action_idx, reward)
        self.offered_history: list[int] = []
        self.demand_series: list[int] = []
        self._scale_cache = 1.0

    def demand_scale(self, t: int) -> float:
        hist = self.offered_history
        if hist and (t % DEMAND_SCALE_REFRESH == 0 or self._scale_cache <= 1.0):
            window = hist[-DEMAND_SCALE_WINDOW:]
            self._scale_cache = max(float(np.percentile(window, 95)), 1.0)
        return self._scale_cache


class World:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = validate_config(cfg)
        if cfg.strategy != "NoFederation":
            caps = {b.capacity_prbs for b in cfg.base_stations}
            if len(caps) > 1:
                raise ValueError(
                    "federation requires identical BS capacities (agents of "
                    "a slice must share one action space)")
        self.slices = slices_by_priority(cfg)
        self.bs_list = sorted(cfg.base_stations, key=lambda b: b.id)
        self.n_intervals = cfg.total_episodes * cfg.epochs_per_episode
        seed = cfg.rng_seed
        self.snr_rng = _stream(seed, 2)
        self.demand_rng = _stream(seed, 3)
        self.federation_rng = _stream(seed, 4)
        self.reservoir_rng = _stream(seed, 5)
        self.peak_hours = mobility.bs_peak_hours(cfg)

        occupancy, _ = mobility.precompute_occupancy(
            cfg, max(self.n_intervals, 1), _stream(seed, 1))
        self.occupancy = occupancy
        self.slice_pos = {s.id: k for k, s in
                          enumerate(sorted(cfg.slices, key=lambda s: s.id))}
        self.bs_pos = {b.id: k for k, b in enumerate(self.bs_list)}

        self.slots: dict[tuple[int, int], _AgentSlot] = {}
        for s in self.slices:
            for b in self.bs_list:
                n_actions = b.capacity_prbs // s.chunk_prbs + 1
                layer_sizes = (3, *cfg.learning.hidden_sizes, n_actions)
                self.slots[(s.id, b.id)] = _AgentSlot(
                    s, b, layer_sizes, _stream(seed, 10 + s.id, b.id), cfg)

        self.metrics = SimulationMetrics(
            latency_samples={s.id: [] for s in self.slices})
        self._reservoir_seen = {s.id: 0 for s in self.slices}
        self.r_hat = {key: 0.0 for key in self.slots}
        self._ep_acc = None
        self._reset_episode_acc()

    def _reset_episode_acc(self):
        self._ep_acc = {
            s.id: {"reward_sum": 0.0, "reward_n": 0, "offered": 0,
                   "served": 0, "dropped": 0, "lat_weighted": 0.0}
            for s in self.slices
        }

    def model_bytes(self) -> int:
        any_slot = next(iter(self.slots.values()))
        return neural.model_bytes(any_slot.net.online.layer_sizes)


def run_decision_interval(world: World, t: int) -> None:
    cfg = world.cfg
    lc = cfg.learning
    for bs in world.bs_list:
        spare = bs.capacity_prbs
        for s in world.slices:
            slot = world.slots[(s.id, bs.id)]
            n_users = int(world.occupancy[t, world.slice_pos[s.id],
                                          world.bs_pos[bs.id]])
            offered = mobility.generate_demand(
                n_users, s, cfg.traffic.mean_bits_per_user[world.slice_pos[s.id]],
                t, world.demand_rng, cfg.decision_interval_s,
                world.peak_hours[bs.id])
            snr = env.sample_snr(world.snr_rng, cfg.traffic.snr_mean_db)

            slot.offered_history.append(offered)
            if len(slot.offered_history) > DEMAND_SCALE_WINDOW:
                del slot.offered_history[:-DEMAND_SCALE_WINDOW]
            slot.demand_series.append(offered)
            scale = slot.demand_scale(t)

            raw = agent_mod.AgentState(snr_db=snr, offered_bits=offered,
                                       spare_prbs=spare)
            state_vec = agent_mod.build_state(raw, bs.capacity_prbs, scale)

            if slot.pending is not None:
                prev_state, prev_action, prev_reward = slot.pending
                slot.buffer.push(agent_mod.Transition(
                    prev_state, prev_action, prev_reward, state_vec))
                if lc.algo != "random":
                    agent_mod.train_step(
                        slot.net, slot.buffer, lc.batch_size, lc.gamma,
                        lc.learning_rate, double=(lc.algo == "ddqn"),
                        optimizer=lc.optimizer)

            if lc.algo == "random":
                action_idx = int(slot.rng.integers(len(slot.actions)))
            else:
                q = neural.forward(slot.net.online, state_vec)
                action_idx = agent_mod.select_action(
                    q, slot.net.epsilon_greedy, slot.rng)
            proposed = slot.actions[action_idx]
            enforced = agent_mod.clip_to_spare(proposed, spare, s.chunk_prbs)

            backlog_start = slot.queue.backlog_bits
            slot.queue, outcome = env.step_interval(
                slot.queue, enforced, snr, offered, s,
                cfg.decision_interval_s)

            reward = agent_mod.compute_reward(
                enforced, snr, offered, s.chunk_prbs,
                cfg.decision_interval_s, lc.reward_mode)
            reward = agent_mod.apply_penalty(proposed, spare,
                                             s.penalty_coeff, reward)
            slot.pending = (state_vec, action_idx, reward)
            world.r_hat[(s.id, bs.id)] += reward

            spare -= enforced
            if spare < 0:
                world.metrics.capacity_violations += 1
            if (outcome.served_bits + outcome.dropped_bits
                    + outcome.backlog_bits_end - backlog_start
                    != outcome.offered_bits):
                world.metrics.conservation_violations += 1

            acc = world._ep_acc[s.id]
            acc["reward_sum"] += reward
            acc["reward_n"] += 1
            acc["offered"] += outcome.offered_bits
            acc["served"] += outcome.served_bits
            acc["dropped"] += outcome.dropped_bits
            acc["lat_weighted"] += outcome.mean_latency_ms * outcome.served_bits
            if outcome.served_bits > 0:
                _reservoir_push(world, s.id, outcome.mean_latency_ms)


def _reservoir_push(world: World, slice_id: int, sample: float) -> None:
    seen = world._reservoir_seen[slice_id]
    samples = world.metrics.latency_samples[slice_id]
    if seen < LATENCY_RESERVOIR_SIZE:
        samples.append(sample)
    else:
        j = int(world.reservoir_rng.integers(seen + 1))
        if j < LATENCY_RESERVOIR_SIZE:
            samples[j] = sample
    world._reservoir_seen[slice_id] = seen + 1


def _finish_episode(world: World, episode: int) -> None:
    cfg = world.cfg
    for s in world.slices:
        acc = world._ep_acc[s.id]
        offered = acc["offered"]
        world.metrics.episodes.append(EpisodeRow(
            episode=episode,
            slice_id=s.id,
            strategy=cfg.strategy,
            mean_reward=(acc["reward_sum"] / acc["reward_n"]
                         if acc["reward_n"] else 0.0),
            dropped_fraction=(acc["dropped"] / offered) if offered else 0.0,
            offered_bits=offered,
            served_bits=acc["served"],
            mean_latency_ms=(acc["lat_weighted"] / acc["served"]
                             if acc["served"] else 0.0),
        ))
    world._reset_episode_acc()
    for slot in world.slots.values():
        agent_mod.sync_target(slot.net)
        agent_mod.decay_epsilon(slot.net, episode + 1,
                                cfg.learning.epsilon_start,
                                cfg.learning.epsilon_floor,
                                cfg.total_episodes)


def _cluster_demand(world: World, slice_id: int):
    """Binned, lookback-limited demand series per BS for one slice."""
    cfg = world.cfg
    bin_n = max(cfg.clustering.bin_intervals, 1)
    series = {}
    for bs in world.bs_list:
        hist = world.slots[(slice_id, bs.id)].demand_series
        hist = hist[-cfg.clustering.lookback_intervals:]
        n_bins = len(hist) // bin_n
        if n_bins < 2:
            return None
        arr = np.asarray(hist[-n_bins * bin_n:], dtype=float)
        series[bs.id] = arr.reshape(n_bins, bin_n).mean(axis=1)
    return series


def run_federation_episode(world: World, fed_episode: int) -> None:
    cfg = world.cfg
    strategy = cfg.strategy
    n_bs = len(world.bs_list)
    mb = world.model_bytes()

    for s in world.slices:
        uploads = {
            bs.id: (replace(world.slots[(s.id, bs.id)].net.online,
                            vector=world.slots[(s.id, bs.id)].net.online.vector.copy()),
                    world.r_hat[(s.id, bs.id)])
            for bs in world.bs_list
        }
        clusters = None
        fallback = False
        new_models: dict[int, neural.ModelParams] = {}

        if strategy == "NoFederation":
            world.metrics.overhead.append(federation.account_overhead(
                strategy, None, n_bs, mb, fed_episode))
        elif strategy == "FDRL":
            omega = federation.fed_average([m for m, _ in uploads.values()])
            new_models = {bs.id: omega for bs in world.bs_list}
            world.metrics.overhead.append(federation.account_overhead(
                strategy, None, n_bs, mb, fed_episode))
        else:
            series = _cluster_demand(world, s.id)
            if series is not None:
                dist = clustering.distance_matrix(
                    series, cfg.clustering.dtw_window_samples)
                clusters = clustering.dbscan(dist, cfg.clustering.eps_d,
                                             cfg.clustering.n_min)
            else:
                clusters = clustering.ClusterAssignment(
                    labels={bs.id: clustering.NOISE for bs in world.bs_list},
                    n_clusters=0)
            rnd = federation.FederationRound(
                slice_id=s.id, episode_index=fed_episode, strategy=strategy,
                uploaded=uploads, clusters=clusters)
            if strategy == "FullCluster":
                per_cluster = federation.fed_full_cluster(rnd)
                for cid, model in per_cluster.items():
                    for bs_id in clusters.members(cid):
                        new_models[bs_id] = model
            else:
                mode = "Random" if strategy == "RandomRep" else "Best"
                omega, fallback = federation.fed_representative(
                    rnd, mode, world.federation_rng)
                if fallback:
                    log.info("slice %d episode %d: no clusters, falling back "
                             "to plain averaging", s.id, fed_episode)
                new_models = {bs.id: omega for bs in world.bs_list}
            world.metrics.overhead.append(federation.account_overhead(
                strategy, clusters, n_bs, mb, fed_episode, fallback))
            for bs in world.bs_list:
                world.metrics.cluster_rows.append(ClusterRow(
                    episode=fed_episode, slice_id=s.id, bs_id=bs.id,
                    label=clusters.labels[bs.id]))

        for bs_id, model in new_models.items():
            slot = world.slots[(s.id, bs_id)]
            slot.net.online = replace(model, vector=model.vector.copy())
            slot.net.target = replace(model, vector=model.vector.copy())
            # foreign parameters invalidate the optimizer moments
            slot.net.opt = neural.OptState.zeros(model.vector.size)

    for key in world.r_hat:
        world.r_hat[key] = 0.0


def run_simulation(cfg: ScenarioConfig) -> SimulationMetrics:
    world = World(cfg)
    fed_period = cfg.federation_period_episodes
    for episode in range(cfg.total_episodes):
        for epoch in range(cfg.epochs_per_episode):
            t = episode * cfg.epochs_per_episode + epoch
            run_decision_interval(world, t)
        _finish_episode(world, episode)
        if (episode + 1) % fed_period == 0:
            run_federation_episode(world, (episode + 1) // fed_period - 1)
    return world.metrics
