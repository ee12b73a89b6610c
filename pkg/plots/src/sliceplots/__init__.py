"""Offline figure rendering for slicing-simulator CSV outputs."""

__version__ = "0.1.0"

from .figures import (ccdf_points, moving_average, plot_ccdf, plot_clusters,
                      plot_dropped, plot_overhead, plot_rewards)

__all__ = [
    "ccdf_points",
    "moving_average",
    "plot_ccdf",
    "plot_clusters",
    "plot_dropped",
    "plot_overhead",
    "plot_rewards",
]
