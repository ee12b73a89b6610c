"""Model aggregation strategies and communication-overhead accounting."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .clustering import ClusterAssignment
from .neural import ModelParams

REWARD_SHIFT_DELTA = 1e-6


@dataclass(frozen=True)
class FederationRound:
    slice_id: int
    episode_index: int
    strategy: str
    uploaded: dict[int, tuple[ModelParams, float]]  # bs -> (theta, r_hat)
    clusters: ClusterAssignment


@dataclass(frozen=True)
class OverheadRecord:
    episode_index: int
    strategy: str
    uplink_bytes: int
    downlink_bytes: int
    fallback: bool = False


def _check_shapes(models: list[ModelParams]) -> None:
    if not models:
        raise ValueError("no models to aggregate")
    shape = models[0].layer_sizes
    for m in models[1:]:
        if m.layer_sizes != shape:
            raise ValueError(
                f"model shape mismatch: {m.layer_sizes} vs {shape}")


def fed_average(models: list[ModelParams]) -> ModelParams:
    """Elementwise mean of the incoming model weights."""
    _check_shapes(models)
    vec = np.mean([m.vector for m in models], axis=0)
    return replace(models[0], vector=vec)


def reward_weights(rewards) -> np.ndarray:
    """Normalize episode rewards to convex weights.

    If any reward is <= 0 the whole list is shifted by (-min + delta) first;
    equal rewards give uniform weights.
    """
    r = np.asarray(rewards, dtype=float)
    if r.size == 0:
        raise ValueError("no rewards")
    if np.all(r == r[0]):
        return np.full(r.size, 1.0 / r.size)
    if np.any(r <= 0.0):
        r = r - r.min() + REWARD_SHIFT_DELTA
    return r / r.sum()


def weighted_aggregate(models: list[ModelParams], rewards) -> ModelParams:
    _check_shapes(models)
    w = reward_weights(rewards)
    vec = np.einsum("i,ij->j", w, np.stack([m.vector for m in models]))
    return replace(models[0], vector=vec)


def fed_full_cluster(rnd: FederationRound,
                     literal: bool = False) -> dict[int, ModelParams]:
    """Per-cluster reward-weighted aggregation.

    Returns one aggregated model per cluster id; noise-labeled BSs keep
    their local model and receive no entry. ``literal`` additionally divides
    by the cluster cardinality (shrinks the model scale; kept only for
    comparison).
    """
    out: dict[int, ModelParams] = {}
    for cid in range(rnd.clusters.n_clusters):
        members = rnd.clusters.members(cid)
        missing = [b for b in members if b not in rnd.uploaded]
        if missing:
            raise ValueError(f"cluster {cid} references missing uploads {missing}")
        models = [rnd.uploaded[b][0] for b in members]
        rewards = [rnd.uploaded[b][1] for b in members]
        agg = weighted_aggregate(models, rewards)
        if literal:
            agg = replace(agg, vector=agg.vector / len(members))
        out[cid] = agg
    return out


def fed_representative(rnd: FederationRound, mode: str,
                       rng: np.random.Generator) -> tuple[ModelParams, bool]:
    """One delegate per cluster, aggregated into a single global model.

    ``mode`` is "Random" (uniform pick per cluster) or "Best" (argmax
    episode reward, lowest-id tie-break). Returns (model, fallback); when no
    clusters formed, falls back to the plain average of all uploads and
    flags it.
    """
    if rnd.clusters.n_clusters == 0:
        models = [rnd.uploaded[b][0] for b in sorted(rnd.uploaded)]
        return fed_average(models), True
    reps = []
    for cid in range(rnd.clusters.n_clusters):
        members = rnd.clusters.members(cid)
        if mode == "Random":
            reps.append(members[int(rng.integers(len(members)))])
        elif mode == "Best":
            rewards = [rnd.uploaded[b][1] for b in members]
            reps.append(members[int(np.argmax(rewards))])
        else:
            raise ValueError(f"unknown representative mode {mode!r}")
    models = [rnd.uploaded[b][0] for b in reps]
    rewards = [rnd.uploaded[b][1] for b in reps]
    return weighted_aggregate(models, rewards), False


def account_overhead(strategy: str, clusters: ClusterAssignment | None,
                     n_bs: int, model_bytes: int, episode_index: int = 0,
                     fallback: bool = False) -> OverheadRecord:
    """Bytes exchanged in one federation episode.

    FDRL moves every model both ways; FullCluster only clustered BSs both
    ways; Random/Best upload one model per cluster and downlink to all BSs.
    A representative round that fell back to plain averaging counts as an
    FDRL round.
    """
    if strategy in ("FDRL", "NoFederation"):
        up = down = 0 if strategy == "NoFederation" else n_bs
    elif strategy == "FullCluster":
        clustered = sum(len(c) for c in clusters.clusters())
        up = down = clustered
    elif strategy in ("RandomRep", "BestRep"):
        if fallback or clusters is None or clusters.n_clusters == 0:
            up = down = n_bs
        else:
            up = clusters.n_clusters
            down = n_bs
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return OverheadRecord(
        episode_index=episode_index,
        strategy=strategy,
        uplink_bytes=up * model_bytes,
        downlink_bytes=down * model_bytes,
        fallback=fallback,
    )
