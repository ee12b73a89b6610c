"""Synthetic user mobility and per-slice traffic demand.

Users walk over the base station layout with an exploration /
preferential-return process; per-interval demand at a BS is the Poisson sum
of its attached users' traffic, weighted by the diurnal profile of the BS.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import ScenarioConfig, SliceSpec, TrafficConfig


@dataclass
class UserTrajectory:
    user_id: int
    slice_id: int
    visits: list[tuple[int, int]] = field(default_factory=list)  # (bs, t)
    visit_counts: dict[int, int] = field(default_factory=dict)

    @property
    def current_bs(self) -> int:
        return self.visits[-1][0]

    def record(self, bs_id: int, interval_index: int) -> None:
        self.visits.append((bs_id, interval_index))
        self.visit_counts[bs_id] = self.visit_counts.get(bs_id, 0) + 1


def depr_step(user: UserTrajectory, relevance: dict[int, float],
              positions: dict[int, tuple[float, float]],
              rng: np.random.Generator, p_new: float = 0.6,
              gamma_epr: float = 0.21) -> int:
    """Next BS for one user.

    With probability p_new * |visited|^(-gamma_epr) the user explores an
    unvisited BS, sampled proportionally to relevance / distance^2 from the
    current location; otherwise it returns to a visited BS sampled
    proportionally to visit counts. With every BS already visited, the
    exploration branch degenerates to preferential return.
    """
    visited = user.visit_counts
    n_visited = len(visited)
    unvisited = [b for b in relevance if b not in visited]
    p_explore = p_new * n_visited ** (-gamma_epr) if n_visited else 1.0
    if unvisited and rng.random() < p_explore:
        cx, cy = positions[user.current_bs] if visited else (0.0, 0.0)
        weights = []
        total = 0.0
        for b in unvisited:
            bx, by = positions[b]
            d2 = (bx - cx) ** 2 + (by - cy) ** 2
            w = relevance[b] / max(d2, 1.0)
            weights.append(w)
            total += w
        if total > 0.0:
            return unvisited[_weighted_pick(weights, total, rng)]
    # preferential return
    known = sorted(visited)
    return known[_weighted_pick([float(visited[b]) for b in known],
                                float(sum(visited.values())), rng)]


def _weighted_pick(weights: list[float], total: float,
                   rng: np.random.Generator) -> int:
    r = rng.random() * total
    acc = 0.0
    for k, w in enumerate(weights):
        acc += w
        if r < acc:
            return k
    return len(weights) - 1


def radius_of_gyration(traj: UserTrajectory,
                       positions: dict[int, tuple[float, float]]) -> float:
    """RMS distance of visited positions from their visit-weighted centroid."""
    if not traj.visit_counts:
        raise ValueError("empty trajectory")
    pts = np.array([positions[b] for b in sorted(traj.visit_counts)])
    w = np.array([traj.visit_counts[b] for b in sorted(traj.visit_counts)],
                 dtype=float)
    w /= w.sum()
    centroid = w @ pts
    return float(np.sqrt(np.sum(w * np.sum((pts - centroid) ** 2, axis=1))))


def temporal_weight(interval_index: int, interval_s: float = 60.0,
                    peak_hour: float = 18.0) -> float:
    """Diurnal demand factor in [0.2, 1.0], 24-hour periodic sinusoid."""
    hour = (interval_index * interval_s / 3600.0) % 24.0
    return 0.6 + 0.4 * np.cos(2.0 * np.pi * (hour - peak_hour) / 24.0)


def generate_demand(n_users_at_bs: int, slice_spec: SliceSpec,
                    mean_bits_per_user: float, interval_index: int,
                    rng: np.random.Generator, interval_s: float = 60.0,
                    peak_hour: float = 18.0) -> int:
    """Offered bits this interval: Poisson user demand x diurnal weight."""
    if n_users_at_bs <= 0:
        return 0
    total = rng.poisson(n_users_at_bs * mean_bits_per_user)
    w = temporal_weight(interval_index, interval_s, peak_hour)
    return int(round(total * w))


def bs_peak_hours(cfg: ScenarioConfig) -> dict[int, float]:
    """Cycle the configured diurnal profiles over the BS list."""
    peaks = cfg.traffic.profile_peak_hours
    return {b.id: peaks[k % len(peaks)]
            for k, b in enumerate(cfg.base_stations)}


def bs_relevance(cfg: ScenarioConfig) -> dict[int, float]:
    """Location relevance: density of other BSs around each site."""
    pos = {b.id: b.position for b in cfg.base_stations}
    rel = {}
    for b in cfg.base_stations:
        acc = 1.0
        for other in cfg.base_stations:
            if other.id == b.id:
                continue
            d2 = ((other.position[0] - b.position[0]) ** 2
                  + (other.position[1] - b.position[1]) ** 2)
            acc += 1.0 / (1.0 + d2 / 1e6)
        rel[b.id] = acc
    return rel


def precompute_occupancy(cfg: ScenarioConfig, n_intervals: int,
                         rng: np.random.Generator,
                         keep_trajectories: bool = False):
    """Walk all users over the horizon; returns the (interval, slice, bs)
    occupancy array and, optionally, the trajectories.

    Users are spread evenly over slices and start at a relevance-sampled BS.
    The total user count is conserved by construction.
    """
    n_slices = len(cfg.slices)
    bs_ids = [b.id for b in cfg.base_stations]
    bs_index = {b: k for k, b in enumerate(bs_ids)}
    positions = {b.id: b.position for b in cfg.base_stations}
    relevance = bs_relevance(cfg)
    rel_arr = np.array([relevance[b] for b in bs_ids])
    rel_p = rel_arr / rel_arr.sum()

    occupancy = np.zeros((n_intervals, n_slices, len(bs_ids)), dtype=np.int64)
    users = []
    slice_ids = sorted(s.id for s in cfg.slices)
    for u in range(cfg.traffic.n_users):
        traj = UserTrajectory(user_id=u, slice_id=slice_ids[u % n_slices])
        start = bs_ids[int(rng.choice(len(bs_ids), p=rel_p))]
        traj.record(start, 0)
        users.append(traj)

    slice_pos = {sid: k for k, sid in enumerate(slice_ids)}
    for t in range(n_intervals):
        for traj in users:
            if t > 0:
                nxt = depr_step(traj, relevance, positions, rng,
                                cfg.traffic.p_new, cfg.traffic.gamma_epr)
                traj.record(nxt, t)
                if not keep_trajectories:
                    traj.visits = traj.visits[-1:]
            occupancy[t, slice_pos[traj.slice_id],
                      bs_index[traj.current_bs]] += 1
    return (occupancy, users) if keep_trajectories else (occupancy, None)
