"""Render figures from solver output files.

Three figure kinds:

* loglog_error: one or more series CSVs on a log-log error-versus-dt
  plot; each legend entry carries the least-squares slope fitted over
  that series.
* energy_trace: modified (solid) and original (dashed) energy versus
  time, one pair of curves per energy CSV.
* heatmap_grid: snapshot files laid out in time order, four panels per
  row, with a per-panel time caption and a color scale fixed to
  [-1.2, 1.2] so frames are comparable.

Rendering is deterministic: a pinned style, no timestamps in the image
metadata, and inputs are never modified.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import read_energy_csv, read_series_csv, read_snapshot

KINDS = ("loglog_error", "energy_trace", "heatmap_grid")

_STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
}

HEATMAP_VLIM = 1.2
PANELS_PER_ROW = 4


@dataclass(frozen=True)
class PlotJob:
    """One rendering task: kind, input files, output image path."""

    kind: str
    inputs: list
    output: str
    title: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown plot kind {self.kind!r}; choose from {KINDS}")
        if not self.inputs:
            raise ValueError("at least one input file is required")
        missing = [p for p in self.inputs if not os.path.isfile(p)]
        if missing:
            raise FileNotFoundError(f"missing input files: {missing}")


@dataclass(frozen=True)
class RenderResult:
    """What was drawn: the image path plus per-series fit details."""

    path: str
    panels: int = 0
    slopes: dict = field(default_factory=dict)


def fit_loglog_slope(dts: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of log(value) against log(dt)."""
    if len(dts) < 2:
        raise ValueError("slope fit needs at least two rows")
    if np.any(values <= 0) or np.any(dts <= 0):
        raise ValueError("log-log fit needs positive dts and values")
    coeffs = np.polyfit(np.log(dts), np.log(values), 1)
    return float(coeffs[0])


def _save(fig, output: str):
    metadata = {"Software": "gradflow-plots"}
    if output.endswith(".svg"):
        metadata["Date"] = None
    fig.savefig(output, metadata=metadata)
    plt.close(fig)


def _render_loglog(job: PlotJob) -> RenderResult:
    slopes = {}
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.4))
        for path in job.inputs:
            series = read_series_csv(path)
            slope = fit_loglog_slope(series.dts, series.values)
            slopes[series.label] = slope
            ax.loglog(series.dts, series.values, "o-", label=f"{series.label}, slope={slope:.2f}")
        ref = read_series_csv(job.inputs[0])
        anchor = ref.values[0] / ref.dts[0]
        ax.loglog(ref.dts, anchor * ref.dts, "k--", linewidth=0.8, label="first order")
        ax.set_xlabel("time step size")
        ax.set_ylabel("error")
        if job.title:
            ax.set_title(job.title)
        ax.legend()
        fig.tight_layout()
        _save(fig, job.output)
    return RenderResult(path=job.output, panels=1, slopes=slopes)


def _render_energy(job: PlotJob) -> RenderResult:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.4))
        for path in job.inputs:
            data = read_energy_csv(path)
            (line,) = ax.plot(data.times, data.energy_modified, label=f"{data.label} (modified)")
            ax.plot(
                data.times, data.energy_original, "--",
                color=line.get_color(), linewidth=0.9, label=f"{data.label} (original)",
            )
        ax.set_xlabel("time")
        ax.set_ylabel("energy")
        if job.title:
            ax.set_title(job.title)
        ax.legend()
        fig.tight_layout()
        _save(fig, job.output)
    return RenderResult(path=job.output, panels=1)


def _render_heatmaps(job: PlotJob) -> RenderResult:
    snaps = sorted((read_snapshot(p) for p in job.inputs), key=lambda s: s.time)
    ncols = min(PANELS_PER_ROW, len(snaps))
    nrows = math.ceil(len(snaps) / ncols)
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(
            nrows, ncols, figsize=(2.2 * ncols, 2.0 * nrows), squeeze=False
        )
        image = None
        for idx, snap in enumerate(snaps):
            ax = axes[idx // ncols][idx % ncols]
            image = ax.imshow(
                snap.values, origin="lower", extent=(0, 2 * math.pi, 0, 2 * math.pi),
                vmin=-HEATMAP_VLIM, vmax=HEATMAP_VLIM, cmap="RdBu_r",
            )
            ax.set_title(f"t={snap.time:.2f}s", fontsize=8)
            ax.set_xticks([])
            ax.set_yticks([])
        for idx in range(len(snaps), nrows * ncols):
            axes[idx // ncols][idx % ncols].axis("off")
        fig.colorbar(image, ax=[a for row in axes for a in row], shrink=0.8)
        if job.title:
            fig.suptitle(job.title)
        _save(fig, job.output)
    return RenderResult(path=job.output, panels=len(snaps))


def render(job: PlotJob) -> RenderResult:
    """Render the job to its output image; returns what was drawn."""
    if job.kind == "loglog_error":
        return _render_loglog(job)
    if job.kind == "energy_trace":
        return _render_energy(job)
    return _render_heatmaps(job)
