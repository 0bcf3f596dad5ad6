"""Figure rendering for the gradient-flow solver's CSV and snapshot files."""

from .io import read_energy_csv, read_series_csv, read_snapshot
from .render import PlotJob, RenderResult, fit_loglog_slope, render

__all__ = [
    "PlotJob",
    "RenderResult",
    "fit_loglog_slope",
    "read_energy_csv",
    "read_series_csv",
    "read_snapshot",
    "render",
]

__version__ = "0.1.0"
