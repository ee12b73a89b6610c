"""Render all figures for a simulation run directory."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from . import figures

log = logging.getLogger(__name__)


@click.group()
def main():
    """Figure rendering for slicing-simulator CSV outputs."""
    logging.basicConfig(level=logging.INFO, format="%(message)s")


@main.command()
@click.option("--run-dir", "run_dir", required=True,
              type=click.Path(path_type=Path),
              help="Directory holding the run's CSV files.")
@click.option("--out-dir", "out_dir", required=True,
              type=click.Path(path_type=Path))
@click.option("--smoothing", type=int, default=figures.DEFAULT_SMOOTHING,
              show_default=True, help="Moving-average window in episodes.")
def render(run_dir: Path, out_dir: Path, smoothing: int):
    """Render every figure whose input CSV exists in the run directory."""
    metrics = run_dir / "metrics.csv"
    if not metrics.exists():
        click.echo(f"error: {metrics} not found", err=True)
        sys.exit(2)

    written = []
    try:
        written.append(figures.plot_rewards(
            metrics, out_dir / "rewards.png", smoothing))
        written.append(figures.plot_dropped(
            metrics, out_dir / "dropped.png", smoothing))
        latency = run_dir / "latency_samples.csv"
        if latency.exists():
            written.append(figures.plot_ccdf(latency, out_dir / "ccdf.png"))
        overhead = run_dir / "overhead.csv"
        if overhead.exists():
            written.append(figures.plot_overhead(overhead,
                                                 out_dir / "overhead.png"))
        clusters = run_dir / "clusters.csv"
        if clusters.exists():
            written.append(figures.plot_clusters(clusters,
                                                 out_dir / "clusters.png"))
    except figures.InputError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)

    for path in written:
        click.echo(str(path))


if __name__ == "__main__":
    main()
