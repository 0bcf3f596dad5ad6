"""Parsers for the solver's documented output files.

Two text formats are consumed, both defined by the solver package and
re-implemented here so this package never imports it:

* series CSV with header "scheme,aux,alpha,L,flow,dt,l2_error,order";
  one row per time step, order empty on the largest dt.  Accuracy sweeps,
  gap decays, and auxiliary-consistency decays all use this layout.
* energy CSV with header "step,time,energy_modified,energy_original,
  dissipation_sum,mass,residual"; one row per step.
* snapshot: line 1 "nx ny t", then nx*ny node values in row-major order
  (node (i, j) on line j*nx + i + 2).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

SERIES_HEADER = ["scheme", "aux", "alpha", "L", "flow", "dt", "l2_error", "order"]
ENERGY_HEADER = [
    "step", "time", "energy_modified", "energy_original",
    "dissipation_sum", "mass", "residual",
]


@dataclass(frozen=True)
class SeriesData:
    """One decay series: label plus (dt, value, order) columns."""

    label: str
    dts: np.ndarray
    values: np.ndarray
    orders: np.ndarray  # NaN where the column is empty


@dataclass(frozen=True)
class EnergyData:
    label: str
    times: np.ndarray
    energy_modified: np.ndarray
    energy_original: np.ndarray


@dataclass(frozen=True)
class SnapshotData:
    nx: int
    ny: int
    time: float
    values: np.ndarray  # (ny, nx)


def read_series_csv(path: str) -> SeriesData:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SERIES_HEADER:
            raise ValueError(
                f"{path}: expected header {','.join(SERIES_HEADER)}, got {reader.fieldnames}"
            )
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    dts = np.array([float(r["dt"]) for r in rows])
    values = np.array([float(r["l2_error"]) for r in rows])
    orders = np.array([float(r["order"]) if r["order"] else np.nan for r in rows])
    first = rows[0]
    label = f"{first['scheme']}/{first['aux']} ({first['flow']})"
    return SeriesData(label=label, dts=dts, values=values, orders=orders)


def read_energy_csv(path: str) -> EnergyData:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ENERGY_HEADER:
            raise ValueError(
                f"{path}: expected header {','.join(ENERGY_HEADER)}, got {reader.fieldnames}"
            )
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    stem = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return EnergyData(
        label=stem,
        times=np.array([float(r["time"]) for r in rows]),
        energy_modified=np.array([float(r["energy_modified"]) for r in rows]),
        energy_original=np.array([float(r["energy_original"]) for r in rows]),
    )


def read_snapshot(path: str) -> SnapshotData:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: malformed snapshot header")
        nx, ny, t = int(header[0]), int(header[1]), float(header[2])
        values = np.loadtxt(fh, dtype=np.float64)
    if values.size != nx * ny:
        raise ValueError(f"{path}: {values.size} values, expected {nx * ny}")
    return SnapshotData(nx=nx, ny=ny, time=t, values=values.reshape(ny, nx))
