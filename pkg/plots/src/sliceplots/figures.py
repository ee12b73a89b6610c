"""Render figures from the simulator's CSV streams.

Consumes only the documented CSV headers:
  metrics.csv          episode,slice,strategy,mean_reward,dropped_fraction,
                       offered_bits,served_bits,mean_latency_ms
  overhead.csv         episode,strategy,uplink_bytes,downlink_bytes
  latency_samples.csv  slice,latency_ms
  clusters.csv         episode,slice,bs,label

Every function reads CSVs, writes one PNG, and returns the output path.
Inputs are never modified; identical inputs yield identical images.
"""

from __future__ import annotations

import csv
import logging
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

log = logging.getLogger(__name__)

DEFAULT_SMOOTHING = 10


class InputError(Exception):
    """A CSV is missing a required column."""


def _read_rows(path, required):
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise InputError(f"{path}: missing columns {missing}")
        return list(reader)


def moving_average(values, window: int) -> np.ndarray:
    """Trailing moving average; the first window-1 points average what is
    available so the curve has the same length as the input."""
    v = np.asarray(values, dtype=float)
    if window <= 1 or v.size == 0:
        return v
    sums = np.cumsum(v)
    out = np.empty_like(v)
    for i in range(v.size):
        lo = max(0, i - window + 1)
        out[i] = (sums[i] - (sums[lo - 1] if lo else 0.0)) / (i - lo + 1)
    return out


def ccdf_points(samples) -> tuple[np.ndarray, np.ndarray]:
    """Empirical P(X > x) evaluated at 0 and at each sorted sample."""
    s = np.sort(np.asarray(samples, dtype=float))
    n = s.size
    xs = np.concatenate(([0.0], s))
    ys = np.concatenate(([1.0], 1.0 - np.arange(1, n + 1) / n))
    return xs, ys


def _save(fig, out_path):
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def plot_rewards(metrics_csv, out_path,
                 smoothing: int = DEFAULT_SMOOTHING) -> Path:
    """Per-strategy mean reward (averaged over slices) versus episode."""
    rows = _read_rows(metrics_csv, ["episode", "slice", "strategy",
                                    "mean_reward"])
    per = defaultdict(lambda: defaultdict(list))
    for r in rows:
        per[r["strategy"]][int(r["episode"])].append(float(r["mean_reward"]))
    fig, ax = plt.subplots(figsize=(7, 4))
    if not per:
        log.warning("%s: no reward rows, rendering empty plot", metrics_csv)
    for strategy in sorted(per):
        episodes = sorted(per[strategy])
        curve = [np.mean(per[strategy][e]) for e in episodes]
        ax.plot(episodes, moving_average(curve, smoothing), label=strategy)
    ax.set_xlabel("episode")
    ax.set_ylabel(f"mean reward ({smoothing}-episode average)")
    ax.set_title("Reward per strategy")
    if per:
        ax.legend()
    return _save(fig, out_path)


def plot_dropped(metrics_csv, out_path,
                 smoothing: int = DEFAULT_SMOOTHING) -> Path:
    """Per-slice dropped-traffic fraction versus episode."""
    rows = _read_rows(metrics_csv, ["episode", "slice", "dropped_fraction"])
    per = defaultdict(dict)
    for r in rows:
        per[int(r["slice"])][int(r["episode"])] = float(r["dropped_fraction"])
    fig, ax = plt.subplots(figsize=(7, 4))
    if not per:
        log.warning("%s: no drop rows, rendering empty plot", metrics_csv)
    for slice_id in sorted(per):
        episodes = sorted(per[slice_id])
        curve = [per[slice_id][e] for e in episodes]
        ax.plot(episodes, moving_average(curve, smoothing),
                label=f"slice {slice_id}")
    ax.set_xlabel("episode")
    ax.set_ylabel(f"dropped fraction ({smoothing}-episode average)")
    ax.set_title("Dropped traffic per slice")
    if per:
        ax.legend()
    return _save(fig, out_path)


def plot_ccdf(latency_csv, out_path) -> Path:
    """Log-scale CCDF of packet latency per slice."""
    rows = _read_rows(latency_csv, ["slice", "latency_ms"])
    per = defaultdict(list)
    for r in rows:
        per[int(r["slice"])].append(float(r["latency_ms"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    if not per:
        log.warning("%s: no latency samples, rendering empty plot",
                    latency_csv)
    for slice_id in sorted(per):
        xs, ys = ccdf_points(per[slice_id])
        ax.step(xs, ys, where="post", label=f"slice {slice_id}")
    ax.set_yscale("log")
    ax.set_xlabel("latency (ms)")
    ax.set_ylabel("P(latency > x)")
    ax.set_title("Latency CCDF")
    if per:
        ax.legend()
    return _save(fig, out_path)


_UNITS = (("GB", 1e9), ("MB", 1e6), ("KB", 1e3), ("B", 1.0))


def _scale_unit(peak: float) -> tuple[str, float]:
    for unit, div in _UNITS:
        if peak >= div:
            return unit, div
    return "B", 1.0


def plot_overhead(overhead_csv, out_path) -> Path:
    """Mean uplink/downlink bytes per federation episode, one bar pair per
    strategy, unit auto-scaled to the largest mean."""
    rows = _read_rows(overhead_csv, ["episode", "strategy", "uplink_bytes",
                                     "downlink_bytes"])
    per = defaultdict(lambda: ([], []))
    for r in rows:
        up, down = per[r["strategy"]]
        up.append(float(r["uplink_bytes"]))
        down.append(float(r["downlink_bytes"]))
    strategies = [s for s in sorted(per) if per[s][0]]
    ups = [float(np.mean(per[s][0])) for s in strategies]
    downs = [float(np.mean(per[s][1])) for s in strategies]
    unit, div = _scale_unit(max(ups + downs, default=0.0))
    fig, ax = plt.subplots(figsize=(6, 4))
    if not strategies:
        log.warning("%s: no overhead rows, rendering empty plot",
                    overhead_csv)
    x = np.arange(len(strategies))
    ax.bar(x - 0.2, np.asarray(ups) / div, width=0.4, label="uplink")
    ax.bar(x + 0.2, np.asarray(downs) / div, width=0.4, label="downlink")
    ax.set_xticks(x, strategies)
    ax.set_ylabel(f"mean bytes per federation episode ({unit})")
    ax.set_title("Federation overhead")
    if strategies:
        ax.legend()
    return _save(fig, out_path)


def plot_clusters(clusters_csv, out_path) -> Path:
    """Cluster label heatmap, one panel per slice: federation episode on the
    x axis, base station on the y axis, noise shown as -1."""
    rows = _read_rows(clusters_csv, ["episode", "slice", "bs", "label"])
    per = defaultdict(dict)
    for r in rows:
        per[int(r["slice"])][(int(r["bs"]), int(r["episode"]))] = \
            int(r["label"])
    slices = sorted(per)
    fig, axes = plt.subplots(1, max(len(slices), 1),
                             figsize=(4 * max(len(slices), 1), 4),
                             squeeze=False)
    if not slices:
        log.warning("%s: no cluster rows, rendering empty plot", clusters_csv)
    for ax, slice_id in zip(axes[0], slices):
        cells = per[slice_id]
        bss = sorted({b for b, _ in cells})
        episodes = sorted({e for _, e in cells})
        grid = np.full((len(bss), len(episodes)), -1.0)
        for (b, e), label in cells.items():
            grid[bss.index(b), episodes.index(e)] = label
        im = ax.imshow(grid, aspect="auto", interpolation="nearest",
                       cmap="tab20", origin="lower",
                       extent=(episodes[0], episodes[-1] + 1,
                               bss[0] - 0.5, bss[-1] + 0.5))
        ax.set_title(f"slice {slice_id}")
        ax.set_xlabel("federation episode")
        ax.set_ylabel("base station")
        fig.colorbar(im, ax=ax, label="cluster label")
    return _save(fig, out_path)
