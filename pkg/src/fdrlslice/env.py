"""Radio + queueing environment for one (slice, base station) pair.

PRB allocations and channel quality are turned into served traffic, queued
backlog, waiting latency and dropped bits, one decision interval at a time.
All traffic volumes are integer bits so that the conservation identity

    served + dropped + backlog_end - backlog_start == offered

holds exactly every interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import SliceSpec

PRB_BANDWIDTH_HZ = 180_000.0
SNR_FLOOR_DB = -30.0

# Mean of 10*log10(X) for X ~ Exp(1) is -10*euler_gamma/ln(10); adding this
# constant back makes the dB-domain sample mean of the Rayleigh power draw
# equal to the requested mean.
_DB_MEAN_OFFSET = 10.0 * np.euler_gamma / math.log(10.0)


def gamma(prbs: int, snr_db: float) -> float:
    """Shannon throughput in bits/s of ``prbs`` 180 kHz resource blocks."""
    if prbs <= 0:
        return 0.0
    snr_lin = 10.0 ** (snr_db / 10.0)
    return prbs * PRB_BANDWIDTH_HZ * math.log2(1.0 + snr_lin)


def sample_snr(rng: np.random.Generator, mean_db: float) -> float:
    """One interval-average SNR draw in dB.

    The linear amplitude is Rayleigh distributed; the power sample is mapped
    to dB and re-centred so the dB-domain sample mean equals ``mean_db``.
    Clamped below at the sampler floor.
    """
    amp = rng.rayleigh(scale=1.0 / math.sqrt(2.0))  # power ~ Exp(1)
    power = amp * amp
    if power <= 0.0:
        return SNR_FLOOR_DB
    snr = mean_db + 10.0 * math.log10(power) + _DB_MEAN_OFFSET
    return max(snr, SNR_FLOOR_DB)


@dataclass(frozen=True)
class QueueState:
    """FIFO backlog of (bits, arrival_sub_slot) buckets.

    ``slot_index`` is the global index of the next 1-second sub-slot.
    """

    buckets: tuple[tuple[int, int], ...] = ()
    slot_index: int = 0

    @property
    def backlog_bits(self) -> int:
        return sum(b for b, _ in self.buckets)


@dataclass(frozen=True)
class IntervalOutcome:
    served_bits: int
    dropped_bits: int
    offered_bits: int
    mean_latency_ms: float
    backlog_bits_end: int


def step_interval(
    queue: QueueState,
    alloc_prbs: int,
    snr_db: float,
    offered_bits: int,
    slice_spec: SliceSpec,
    interval_s: float,
) -> tuple[QueueState, IntervalOutcome]:
    """Simulate one decision interval at 1-second sub-slot granularity.

    Offered bits arrive uniformly across sub-slots (at sub-slot start);
    service is FIFO at ``gamma(alloc_prbs, snr_db)`` bits/s; at every sub-slot
    boundary, queued bits older than the slice latency bound are dropped.
    """
    n_sub = max(1, int(round(interval_s)))
    sub_dur = interval_s / n_sub
    rate = gamma(alloc_prbs, snr_db)
    lam_s = slice_spec.latency_bound_ms / 1000.0

    base, rem = divmod(int(offered_bits), n_sub)
    buckets = [list(b) for b in queue.buckets]  # [bits, arrival_slot]
    slot0 = queue.slot_index

    served = 0
    dropped = 0
    wait_sum_s = 0.0  # served-bit-weighted waiting time

    for s in range(n_sub):
        slot = slot0 + s
        # boundary drop: bits older than the latency bound leave the queue
        kept = []
        for bits, arr in buckets:
            if (slot - arr) * sub_dur > lam_s:
                dropped += bits
            else:
                kept.append([bits, arr])
        buckets = kept
        arrival = base + (1 if s < rem else 0)
        if arrival > 0:
            buckets.append([arrival, slot])
        if rate <= 0.0:
            continue
        budget = rate * sub_dur
        served_this_slot = 0.0
        i = 0
        while i < len(buckets) and budget >= 1.0:
            bits, arr = buckets[i]
            take = min(bits, int(budget))
            if take > 0:
                start_wait = (slot - arr) * sub_dur + served_this_slot / rate
                wait_sum_s += take * (start_wait + take / (2.0 * rate))
                served += take
                served_this_slot += take
                budget -= take
                buckets[i][0] = bits - take
            if buckets[i][0] == 0:
                buckets.pop(i)
            else:
                i += 1

    backlog_end = sum(b for b, _ in buckets)
    mean_latency_ms = (wait_sum_s / served * 1000.0) if served > 0 else 0.0
    new_queue = QueueState(
        buckets=tuple((b, a) for b, a in buckets),
        slot_index=slot0 + n_sub,
    )
    outcome = IntervalOutcome(
        served_bits=served,
        dropped_bits=dropped,
        offered_bits=int(offered_bits),
        mean_latency_ms=mean_latency_ms,
        backlog_bits_end=backlog_end,
    )
    return new_queue, outcome
