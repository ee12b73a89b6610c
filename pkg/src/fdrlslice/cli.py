"""Command-line entry point: run simulations, cluster external traces.

Outputs of ``run`` (all in the chosen output directory):
  manifest.json        config snapshot, seed, timestamps, output paths
  metrics.csv          episode,slice,strategy,mean_reward,dropped_fraction,
                       offered_bits,served_bits,mean_latency_ms
  overhead.csv         episode,strategy,uplink_bytes,downlink_bytes
  latency_samples.csv  slice,latency_ms
  clusters.csv         episode,slice,bs,label (cluster strategies only)
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
import sys
import time
from collections import defaultdict
from pathlib import Path

import click

from . import __version__
from .domain import (ConfigError, STRATEGIES, config_to_dict, load_config)
from .orchestrator import SimulationMetrics, run_simulation
from . import clustering

METRICS_HEADER = ["episode", "slice", "strategy", "mean_reward",
                  "dropped_fraction", "offered_bits", "served_bits",
                  "mean_latency_ms"]
OVERHEAD_HEADER = ["episode", "strategy", "uplink_bytes", "downlink_bytes"]
LATENCY_HEADER = ["slice", "latency_ms"]
CLUSTERS_HEADER = ["episode", "slice", "bs", "label"]


def _setup_logging():
    level = os.environ.get("FDRLSLICE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


@click.group()
def main():
    """Federated DDQN RAN slicing simulator."""
    _setup_logging()


def write_metrics(metrics: SimulationMetrics, out_dir: Path) -> dict[str, str]:
    paths = {}

    def _path(name):
        p = out_dir / name
        paths[name] = str(p)
        return p

    with open(_path("metrics.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(METRICS_HEADER)
        for row in metrics.episodes:
            w.writerow([row.episode, row.slice_id, row.strategy,
                        repr(row.mean_reward), repr(row.dropped_fraction),
                        row.offered_bits, row.served_bits,
                        repr(row.mean_latency_ms)])
    with open(_path("overhead.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(OVERHEAD_HEADER)
        for rec in metrics.overhead:
            w.writerow([rec.episode_index, rec.strategy, rec.uplink_bytes,
                        rec.downlink_bytes])
    with open(_path("latency_samples.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(LATENCY_HEADER)
        for slice_id in sorted(metrics.latency_samples):
            for sample in metrics.latency_samples[slice_id]:
                w.writerow([slice_id, repr(sample)])
    if metrics.cluster_rows:
        with open(_path("clusters.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(CLUSTERS_HEADER)
            for row in metrics.cluster_rows:
                w.writerow([row.episode, row.slice_id, row.bs_id, row.label])
    return paths


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=None, help="Override the file seed.")
@click.option("--strategy", type=click.Choice(STRATEGIES), default=None)
@click.option("--episodes", type=int, default=None,
              help="Override total_episodes.")
def run(config_path: Path, out_dir: Path, seed, strategy, episodes):
    """Validate a scenario file, run it, write the manifest and CSV streams."""
    if not config_path.exists():
        click.echo(f"error: config file not found: {config_path}", err=True)
        sys.exit(2)
    try:
        cfg = load_config(config_path)
        if seed is not None:
            cfg = dataclasses.replace(cfg, rng_seed=seed)
        if strategy is not None:
            cfg = dataclasses.replace(cfg, strategy=strategy)
        if episodes is not None:
            cfg = dataclasses.replace(cfg, total_episodes=episodes)
        from .domain import validate_config
        validate_config(cfg)
    except ConfigError as e:
        click.echo("error: invalid configuration:", err=True)
        for item in e.errors:
            click.echo(f"  - {item}", err=True)
        sys.exit(2)
    except Exception as e:  # malformed YAML, wrong field names, ...
        click.echo(f"error: cannot parse {config_path}: {e}", err=True)
        sys.exit(2)

    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": config_to_dict(cfg),
        "seed": cfg.rng_seed,
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "version": __version__,
        "outputs": {},
    }
    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=2)

    metrics = run_simulation(cfg)
    paths = write_metrics(metrics, out_dir)

    manifest["outputs"] = paths
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=2)

    click.echo(f"run complete: {len(metrics.episodes)} episode rows, "
               f"{metrics.capacity_violations} capacity violations, "
               f"{metrics.conservation_violations} conservation violations")
    sys.exit(0)


def read_demand_csv(path: Path) -> dict[int, dict[int, list[float]]]:
    """Long-format demand traces: interval_index,bs_id,slice_id,bits."""
    per_slice: dict[int, dict[int, list[tuple[int, float]]]] = defaultdict(
        lambda: defaultdict(list))
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            per_slice[int(row["slice_id"])][int(row["bs_id"])].append(
                (int(row["interval_index"]), float(row["bits"])))
    out: dict[int, dict[int, list[float]]] = {}
    for slice_id, per_bs in per_slice.items():
        out[slice_id] = {
            bs: [bits for _, bits in sorted(samples)]
            for bs, samples in per_bs.items()
        }
    return out


@main.command()
@click.option("--input", "input_path", required=True,
              type=click.Path(path_type=Path))
@click.option("--eps", "eps_d", required=True, type=float)
@click.option("--min", "n_min", required=True, type=int)
@click.option("--window", type=int, default=0, help="DTW band half-width; 0 = unbounded.")
@click.option("--out", "out_path", type=click.Path(path_type=Path),
              default=None, help="Labels CSV (default: stdout).")
def cluster(input_path: Path, eps_d, n_min, window, out_path):
    """Cluster external demand traces with the simulator's DTW + DBSCAN path."""
    if not input_path.exists():
        click.echo(f"error: input file not found: {input_path}", err=True)
        sys.exit(2)
    traces = read_demand_csv(input_path)
    rows = []
    for slice_id in sorted(traces):
        per_bs = traces[slice_id]
        lengths = {len(v) for v in per_bs.values()}
        if len(lengths) != 1:
            click.echo(f"error: slice {slice_id}: ragged series lengths "
                       f"{sorted(lengths)}", err=True)
            sys.exit(2)
        series = dict(per_bs)
        if n_min > len(series) or len(series) < 2:
            labels = {bs: clustering.NOISE for bs in series}
        else:
            dist = clustering.distance_matrix(series, window)
            labels = clustering.dbscan(dist, eps_d, n_min).labels
        for bs in sorted(labels):
            rows.append((slice_id, bs, labels[bs]))

    target = open(out_path, "w", newline="") if out_path else sys.stdout
    try:
        w = csv.writer(target)
        w.writerow(["slice_id", "bs_id", "label"])
        w.writerows(rows)
    finally:
        if out_path:
            target.close()


if __name__ == "__main__":
    main()
