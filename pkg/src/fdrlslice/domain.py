"""Core data model: slices, base stations, scenario configuration, validation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

STRATEGIES = ("FDRL", "FullCluster", "RandomRep", "BestRep", "NoFederation")


class ConfigError(Exception):
    """Raised when a scenario configuration violates an invariant."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class SliceSpec:
    """Per-slice SLA and agent constants.

    Lower ``priority`` decides earlier within a decision interval.
    """

    id: int
    name: str
    latency_bound_ms: float
    penalty_coeff: float = 100.0
    chunk_prbs: int = 10
    priority: int = 0


@dataclass(frozen=True)
class BaseStation:
    id: int
    capacity_prbs: int
    position: tuple[float, float]


@dataclass(frozen=True)
class ClusteringConfig:
    eps_d: float = 0.06
    n_min: int = 2
    dtw_window_samples: int = 48
    lookback_intervals: int = 1440
    bin_intervals: int = 5


@dataclass(frozen=True)
class TrafficConfig:
    """Synthetic demand knobs: per-user Poisson means and diurnal profiles."""

    # Per-user per-interval Poisson means, one per slice. Defaults are
    # calibrated so ~20 users per (slice, BS) load a 100-PRB cell at
    # roughly half its mean Shannon capacity at 25 dB.
    n_users: int = 500
    mean_bits_per_user: tuple[float, ...] = (9.0e7, 2.2e8, 5.5e7)
    snr_mean_db: float = 25.0
    # d-EPR walker constants
    p_new: float = 0.6
    gamma_epr: float = 0.21
    # peak hours of the three diurnal profiles cycled over base stations
    profile_peak_hours: tuple[float, ...] = (20.0, 11.0, 15.0)


@dataclass(frozen=True)
class LearningConfig:
    algo: str = "ddqn"  # ddqn | dqn | random
    gamma: float = 0.99
    learning_rate: float = 0.001
    buffer_size: int = 20000
    batch_size: int = 32
    epsilon_start: float = 1.0
    epsilon_floor: float = 0.02
    hidden_sizes: tuple[int, ...] = (24, 24)
    optimizer: str = "adam"  # adam | sgd
    reward_mode: str = "normalized"  # normalized | literal


@dataclass(frozen=True)
class ScenarioConfig:
    base_stations: tuple[BaseStation, ...]
    slices: tuple[SliceSpec, ...]
    decision_interval_s: float = 60.0
    epochs_per_episode: int = 5
    federation_period_episodes: int = 5
    total_episodes: int = 100
    strategy: str = "FullCluster"
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    learning: LearningConfig = field(default_factory=LearningConfig)
    rng_seed: int = 0


@dataclass(frozen=True)
class AllocationDecision:
    slice_id: int
    bs_id: int
    prbs: int
    interval_index: int


def validate_config(cfg: ScenarioConfig) -> ScenarioConfig:
    """Check every invariant; return ``cfg`` unchanged or raise ConfigError.

    All violations are collected and reported together with a path to the
    offending field.
    """
    errors = []
    if not cfg.slices:
        errors.append("slices: empty slice set")
    if not cfg.base_stations:
        errors.append("base_stations: empty base station set")

    for i, s in enumerate(cfg.slices):
        if s.latency_bound_ms <= 0:
            errors.append(f"slices[{i}].latency_bound_ms: must be > 0")
        if s.penalty_coeff < 0:
            errors.append(f"slices[{i}].penalty_coeff: must be >= 0")
        if s.chunk_prbs < 1:
            errors.append(f"slices[{i}].chunk_prbs: must be >= 1")
    ids = [s.id for s in cfg.slices]
    if len(set(ids)) != len(ids):
        errors.append("slices: duplicate slice ids")
    priorities = [s.priority for s in cfg.slices]
    if len(set(priorities)) != len(priorities):
        errors.append("slices: duplicate priorities")

    bs_ids = [b.id for b in cfg.base_stations]
    if len(set(bs_ids)) != len(bs_ids):
        errors.append("base_stations: duplicate ids")
    for j, b in enumerate(cfg.base_stations):
        if b.capacity_prbs < 1:
            errors.append(f"base_stations[{j}].capacity_prbs: must be >= 1")
        else:
            for i, s in enumerate(cfg.slices):
                if s.chunk_prbs >= 1 and b.capacity_prbs % s.chunk_prbs != 0:
                    errors.append(
                        f"base_stations[{j}].capacity_prbs: capacity "
                        f"{b.capacity_prbs} not a multiple of chunk "
                        f"{s.chunk_prbs} (slices[{i}])"
                    )

    if cfg.decision_interval_s <= 0:
        errors.append("decision_interval_s: must be > 0")
    if cfg.epochs_per_episode < 1:
        errors.append("epochs_per_episode: must be >= 1")
    if cfg.federation_period_episodes < 1:
        errors.append("federation_period_episodes: must be >= 1")
    if cfg.total_episodes < 0:
        errors.append("total_episodes: must be >= 0")
    if cfg.strategy not in STRATEGIES:
        errors.append(f"strategy: unknown strategy {cfg.strategy!r}")
    lc = cfg.learning
    if not 0.0 <= lc.gamma <= 1.0:
        errors.append("learning.gamma: must be in [0, 1]")
    if not lc.epsilon_floor <= lc.epsilon_start <= 1.0:
        errors.append("learning.epsilon_floor: need epsilon_floor <= epsilon_start <= 1")
    if lc.algo not in ("ddqn", "dqn", "random"):
        errors.append(f"learning.algo: unknown algo {lc.algo!r}")
    if lc.reward_mode not in ("normalized", "literal"):
        errors.append(f"learning.reward_mode: unknown mode {lc.reward_mode!r}")
    if cfg.clustering.n_min < 1:
        errors.append("clustering.n_min: must be >= 1")
    tr = cfg.traffic
    if len(tr.mean_bits_per_user) < len(cfg.slices):
        errors.append("traffic.mean_bits_per_user: one value per slice required")

    if errors:
        raise ConfigError(errors)
    return cfg


def slices_by_priority(cfg: ScenarioConfig) -> list[SliceSpec]:
    return sorted(cfg.slices, key=lambda s: s.priority)


# --- serialization -----------------------------------------------------------


def config_to_dict(cfg: ScenarioConfig) -> dict:
    d = dataclasses.asdict(cfg)
    # tuples -> lists for clean YAML
    d["base_stations"] = [
        {"id": b.id, "capacity_prbs": b.capacity_prbs, "position": list(b.position)}
        for b in cfg.base_stations
    ]
    d["slices"] = [dataclasses.asdict(s) for s in cfg.slices]
    for key in ("mean_bits_per_user", "profile_peak_hours"):
        d["traffic"][key] = list(d["traffic"][key])
    d["learning"]["hidden_sizes"] = list(d["learning"]["hidden_sizes"])
    return d


def config_from_dict(d: dict) -> ScenarioConfig:
    d = dict(d)
    bs = tuple(
        BaseStation(id=int(b["id"]), capacity_prbs=int(b["capacity_prbs"]),
                    position=tuple(float(x) for x in b["position"]))
        for b in d.pop("base_stations", [])
    )
    slices = tuple(SliceSpec(**s) for s in d.pop("slices", []))
    clustering = ClusteringConfig(**d.pop("clustering", {}))
    tr = d.pop("traffic", {})
    for key in ("mean_bits_per_user", "profile_peak_hours"):
        if key in tr:
            tr[key] = tuple(tr[key])
    traffic = TrafficConfig(**tr)
    lc = d.pop("learning", {})
    if "hidden_sizes" in lc:
        lc["hidden_sizes"] = tuple(lc["hidden_sizes"])
    learning = LearningConfig(**lc)
    return ScenarioConfig(base_stations=bs, slices=slices, clustering=clustering,
                          traffic=traffic, learning=learning, **d)


def save_config(cfg: ScenarioConfig, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(config_to_dict(cfg), f, sort_keys=False)


def load_config(path) -> ScenarioConfig:
    with open(path) as f:
        return config_from_dict(yaml.safe_load(f))


def default_slices() -> tuple[SliceSpec, ...]:
    """URLLC / eMBB / mMTC with latency bounds 10 / 40 / 20 ms."""
    return (
        SliceSpec(id=0, name="URLLC", latency_bound_ms=10.0, priority=0),
        SliceSpec(id=1, name="eMBB", latency_bound_ms=40.0, priority=1),
        SliceSpec(id=2, name="mMTC", latency_bound_ms=20.0, priority=2),
    )
