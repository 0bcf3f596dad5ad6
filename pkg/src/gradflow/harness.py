"""Experiment drivers: accuracy sweeps, energy traces, gap decays, coarsening.

The drivers wrap the steppers into the standard measurement campaigns:

  * run_accuracy    -- forced runs against the reference solution
                       sin(x)cos(y)cos(t) to T_end, reporting the discrete
                       L2 error per time step size and the observed orders.
  * run_energy_trace -- unforced runs recording modified/original energy,
                       the dissipation partial sums, mass, and residuals,
                       and flagging any modified-energy increase beyond a
                       1e-9 slack.
  * run_energy_gap  -- decay of the auxiliary-consistency gap at a fixed
                       horizon as dt shrinks: |integral(c(r) - F(phi) - a1)|
                       for the convexified scheme, plus the L2 norms of
                       r - r(phi) and g - g(r(phi)) for the functionalized
                       one.
  * run_coarsening  -- conserved-flow phase separation from a two-circle or
                       seeded-random initial state, with snapshot files and
                       a connected-component count of {phi > 0} per frame.

File interfaces (consumed by the plotting package, which never imports this
code):

  accuracy CSV   header "scheme,aux,alpha,L,flow,dt,l2_error,order", one
                 row per dt, order empty on the largest dt.  Gap and
                 auxiliary-consistency decays are emitted in the same
                 layout with the measured quantity in the l2_error column,
                 so any (dt, value) series is plottable the same way.
  energy CSV     header "step,time,energy_modified,energy_original,
                 dissipation_sum,mass,residual", one row per step
                 including step 0.
  snapshots      the grid module's text format, "<run-id>_t<time>.snap".

All floats are written with 17 significant digits; identical configs and
seeds reproduce output files bitwise.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .grid import Field, GridSpec, inner, integrate, write_snapshot
from .model import Flow, free_energy, manufactured_state, potential
from .auxfun import aux_name, r_of_phi_mono
from .schemes import SchemeConfig, SchemeKind, init_state, modified_energy, step

ENERGY_SLACK = 1e-9


@dataclass(frozen=True)
class AccuracyRow:
    """One sweep entry: time step, L2 error at T_end, observed order."""

    dt: float
    l2_error: float
    order: Optional[float]

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.l2_error < 0:
            raise ValueError("error must be nonnegative")


@dataclass(frozen=True)
class GapRow:
    """Auxiliary-consistency gap at the fixed horizon for one dt.

    gap is the signed-integral measure |integral(c(r) - F(phi) - a1)|;
    gap_l1 is the pointwise one, integral(|c(r) - F(phi) - a1|), immune to
    spatial cancellation.  The functionalized scheme also reports the L2
    norms of r - r(phi) and g - g(r(phi)).
    """

    dt: float
    gap: float
    gap_l1: Optional[float] = None
    aux_gap_r: Optional[float] = None
    aux_gap_g: Optional[float] = None


@dataclass
class RunReport:
    """Per-step time series plus snapshot handles for one simulation."""

    times: np.ndarray
    energy_modified: np.ndarray
    energy_original: np.ndarray
    dissipation_sum: np.ndarray
    mass: np.ndarray
    residuals: np.ndarray
    snapshot_paths: list
    component_counts: list
    r_min: float
    r_max: float
    monotone_ok: bool
    max_energy_increase: float


def steps_for(t_end: float, dt: float) -> int:
    """Number of steps covering [0, t_end]; rejects non-divisible spans."""
    ratio = t_end / dt
    n = round(ratio)
    if n < 1 or abs(ratio - n) > 1e-8 * max(1.0, ratio):
        raise ValueError(f"t_end={t_end} is not an integer multiple of dt={dt}")
    return n


def observed_order(errors: Sequence[float], dts: Sequence[float]) -> list[float]:
    """Pairwise convergence orders log(e_i/e_{i+1}) / log(dt_i/dt_{i+1})."""
    if len(errors) != len(dts):
        raise ValueError("errors and dts must have the same length")
    if any(e <= 0 for e in errors):
        raise ValueError("errors must be positive to take logarithms")
    if any(b >= a for a, b in zip(dts, dts[1:])) or any(d <= 0 for d in dts):
        raise ValueError("dts must be positive and strictly decreasing")
    return [
        math.log(errors[i] / errors[i + 1]) / math.log(dts[i] / dts[i + 1])
        for i in range(len(errors) - 1)
    ]


def l2_norm(f: Field) -> float:
    return math.sqrt(inner(f, f))


def _accuracy_error(config: SchemeConfig, grid: GridSpec, dt: float, t_end: float) -> float:
    nsteps = steps_for(t_end, dt)
    cfg = replace(config, dt=dt, forcing_enabled=True)
    state = init_state(manufactured_state(0.0, grid), cfg)
    for _ in range(nsteps):
        state, _ = step(state, cfg)
    diff = Field(grid, state.phi.values - manufactured_state(t_end, grid).values)
    return l2_norm(diff)


def run_accuracy(
    config: SchemeConfig,
    grid: GridSpec,
    dts: Sequence[float],
    t_end: float = 1.0,
    jobs: int = 1,
) -> list[AccuracyRow]:
    """Forced runs to t_end for each dt (largest first); errors and orders."""
    dts = sorted(dts, reverse=True)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            errors = list(pool.map(lambda d: _accuracy_error(config, grid, d, t_end), dts))
    else:
        errors = [_accuracy_error(config, grid, d, t_end) for d in dts]
    orders = observed_order(errors, dts)
    rows = [AccuracyRow(dt=dts[0], l2_error=errors[0], order=None)]
    rows.extend(
        AccuracyRow(dt=d, l2_error=e, order=o)
        for d, e, o in zip(dts[1:], errors[1:], orders)
    )
    return rows


def run_energy_trace(config: SchemeConfig, ic: Field, t_end: float) -> RunReport:
    """Unforced run recording energies, dissipation sums, mass, residuals."""
    if config.forcing_enabled:
        raise ValueError("energy traces are defined for unforced runs")
    nsteps = steps_for(t_end, config.dt)
    state = init_state(ic, config)

    times = [state.time]
    e_mod = [modified_energy(state, config)]
    e_orig = [free_energy_of(state.phi, config)]
    diss = [0.0]
    mass = [integrate(state.phi)]
    resid = [0.0]
    r_lo, r_hi = _r_range(state)
    max_increase = 0.0

    for _ in range(nsteps):
        state, rep = step(state, config)
        times.append(state.time)
        e_mod.append(rep.energy_modified)
        e_orig.append(rep.energy_original)
        diss.append(diss[-1] + rep.dissipation_increment)
        mass.append(rep.mass)
        resid.append(rep.residual)
        r_lo, r_hi = min(r_lo, rep.r_min), max(r_hi, rep.r_max)
        max_increase = max(max_increase, e_mod[-1] - e_mod[-2])

    return RunReport(
        times=np.asarray(times),
        energy_modified=np.asarray(e_mod),
        energy_original=np.asarray(e_orig),
        dissipation_sum=np.asarray(diss),
        mass=np.asarray(mass),
        residuals=np.asarray(resid),
        snapshot_paths=[],
        component_counts=[],
        r_min=r_lo,
        r_max=r_hi,
        monotone_ok=max_increase <= ENERGY_SLACK,
        max_energy_increase=max_increase,
    )


def free_energy_of(phi: Field, config: SchemeConfig) -> float:
    return free_energy(phi, config.params)


def _r_range(state) -> tuple[float, float]:
    vals = state.r.values if isinstance(state.r, Field) else np.asarray([state.r])
    return float(vals.min()), float(vals.max())


def _gap_at_horizon(config: SchemeConfig, grid: GridSpec, dt: float, t_end: float) -> GapRow:
    cfg = replace(config, dt=dt)
    state = init_state(ic_sincos(grid), cfg)
    for _ in range(steps_for(t_end, dt)):
        state, _ = step(state, cfg)
    a1 = config.params.a1
    shifted = Field(grid, potential(state.phi.values) + a1)
    if config.scheme is SchemeKind.IEC:
        dev = config.aux.c(state.r.values) - shifted.values
        gap = abs(integrate(Field(grid, dev)))
        gap_l1 = integrate(Field(grid, np.abs(dev)))
        return GapRow(dt=dt, gap=gap, gap_l1=gap_l1)
    if config.scheme is SchemeKind.IEF:
        dev = state.g.values * state.r.values - shifted.values
        gap = abs(integrate(Field(grid, dev)))
        gap_l1 = integrate(Field(grid, np.abs(dev)))
        r_phi = r_of_phi_mono(state.phi, config.aux, a1)
        g_phi = config.aux.g(r_phi.values)
        gap_r = l2_norm(Field(grid, state.r.values - r_phi.values))
        gap_g = l2_norm(Field(grid, state.g.values - g_phi))
        return GapRow(dt=dt, gap=gap, gap_l1=gap_l1, aux_gap_r=gap_r, aux_gap_g=gap_g)
    e1 = integrate(Field(grid, potential(state.phi.values)))
    c_r = float(config.aux.c(np.asarray(float(state.r))))
    return GapRow(dt=dt, gap=abs(c_r - (e1 + config.params.a2)))


def run_energy_gap(
    config: SchemeConfig,
    grid: GridSpec,
    dts: Sequence[float],
    t_end: float = 5.0,
    jobs: int = 1,
) -> list[GapRow]:
    """Auxiliary-consistency gaps at t_end for each dt (unforced runs)."""
    if config.forcing_enabled:
        raise ValueError("gap decays are defined for unforced runs")
    dts = sorted(dts, reverse=True)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda d: _gap_at_horizon(config, grid, d, t_end), dts))
    return [_gap_at_horizon(config, grid, d, t_end) for d in dts]


# ---------------------------------------------------------------------------
# Initial conditions
# ---------------------------------------------------------------------------

def ic_sincos(grid: GridSpec) -> Field:
    """sin(x) cos(y), the standard smooth relaxation start."""
    return Field.from_function(grid, lambda x, y: np.sin(x) * np.cos(y))


def ic_two_circle(
    grid: GridSpec,
    epsilon: float,
    centers=((math.pi - 0.7, math.pi - 0.6), (math.pi + 1.65, math.pi + 1.6)),
    radii=(1.2, 0.8),
) -> Field:
    """Two tanh bubbles of opposite phase inside a -1 background.

    phi = 1 - sum_i tanh((dist_i - radius_i) / (1.2 eps)); the default radii
    make the first bubble the large one so the small one gets absorbed
    (the absorption-time observable calibrates the default).
    """
    def fn(x, y):
        acc = np.ones_like(x)
        for (cx, cy), rad in zip(centers, radii):
            dist = np.sqrt((x - cx) ** 2 + (y - cy) ** 2)
            acc = acc - np.tanh((dist - rad) / (1.2 * epsilon))
        return acc

    return Field.from_function(grid, fn)


def ic_random(grid: GridSpec, seed: int = 42) -> Field:
    """0.25 + 0.4 * uniform(-1, 1) i.i.d. per node from a seeded generator."""
    rng = np.random.default_rng(seed)
    vals = 0.25 + 0.4 * rng.uniform(-1.0, 1.0, size=grid.num_nodes)
    return Field(grid, vals)


def count_components(f: Field, threshold: float = 0.0) -> int:
    """Connected components of {phi > threshold}, 4-neighbor, periodic wrap."""
    mask = f.as_2d() > threshold
    ny, nx = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    count = 0
    for j0 in range(ny):
        for i0 in range(nx):
            if not mask[j0, i0] or seen[j0, i0]:
                continue
            count += 1
            stack = [(j0, i0)]
            seen[j0, i0] = True
            while stack:
                j, i = stack.pop()
                for jj, ii in ((j - 1, i), (j + 1, i), (j, i - 1), (j, i + 1)):
                    jj %= ny
                    ii %= nx
                    if mask[jj, ii] and not seen[jj, ii]:
                        seen[jj, ii] = True
                        stack.append((jj, ii))
    return count


def run_coarsening(
    config: SchemeConfig,
    grid: GridSpec,
    ic_kind: str,
    out_dir: str,
    run_id: str,
    seed: int = 42,
    r1: float = 1.2,
    t_end: Optional[float] = None,
    snapshot_every: Optional[float] = None,
) -> RunReport:
    """Conserved-flow coarsening run with periodic snapshots.

    ic_kind "two_circle" defaults to t_end 3.0 with frames every 0.25;
    "random" defaults to t_end 1.1 with frames every 0.1 and includes the
    initial frame.  Snapshots are written to out_dir as
    "<run-id>_t<time>.snap" and each frame's {phi > 0} component count is
    recorded.
    """
    if config.params.flow is not Flow.CAHN_HILLIARD:
        raise ValueError("coarsening runs use the conserved (Cahn-Hilliard) flow")
    if config.forcing_enabled:
        raise ValueError("coarsening runs are unforced")

    if ic_kind == "two_circle":
        ic = ic_two_circle(grid, config.params.epsilon, radii=(r1, 0.8))
        t_end = 3.0 if t_end is None else t_end
        snapshot_every = 0.25 if snapshot_every is None else snapshot_every
        snap_start = 1
    elif ic_kind == "random":
        ic = ic_random(grid, seed)
        t_end = 1.1 if t_end is None else t_end
        snapshot_every = 0.1 if snapshot_every is None else snapshot_every
        snap_start = 0
    else:
        raise ValueError(f"unknown coarsening initial condition {ic_kind!r}")

    stride = steps_for(snapshot_every, config.dt)
    nsteps = steps_for(t_end, config.dt)
    os.makedirs(out_dir, exist_ok=True)

    state = init_state(ic, config)
    times = [state.time]
    e_mod = [modified_energy(state, config)]
    e_orig = [free_energy_of(state.phi, config)]
    diss = [0.0]
    mass = [integrate(state.phi)]
    resid = [0.0]
    r_lo, r_hi = _r_range(state)
    max_increase = 0.0
    snapshot_paths: list[str] = []
    component_counts: list[int] = []

    def emit_frame(st):
        path = os.path.join(out_dir, f"{run_id}_t{st.time:.2f}.snap")
        write_snapshot(path, st.phi, st.time)
        snapshot_paths.append(path)
        component_counts.append(count_components(st.phi))

    if snap_start == 0:
        emit_frame(state)

    for k in range(1, nsteps + 1):
        state, rep = step(state, config)
        times.append(state.time)
        e_mod.append(rep.energy_modified)
        e_orig.append(rep.energy_original)
        diss.append(diss[-1] + rep.dissipation_increment)
        mass.append(rep.mass)
        resid.append(rep.residual)
        r_lo, r_hi = min(r_lo, rep.r_min), max(r_hi, rep.r_max)
        max_increase = max(max_increase, e_mod[-1] - e_mod[-2])
        if k % stride == 0:
            emit_frame(state)

    return RunReport(
        times=np.asarray(times),
        energy_modified=np.asarray(e_mod),
        energy_original=np.asarray(e_orig),
        dissipation_sum=np.asarray(diss),
        mass=np.asarray(mass),
        residuals=np.asarray(resid),
        snapshot_paths=snapshot_paths,
        component_counts=component_counts,
        r_min=r_lo,
        r_max=r_hi,
        monotone_ok=max_increase <= ENERGY_SLACK,
        max_energy_increase=max_increase,
    )


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    # shortest representation that round-trips the float64 exactly
    return repr(float(v))


def _series_header(config: SchemeConfig) -> str:
    return (
        f"{config.scheme.value},{aux_name(config.aux)},{_fmt(config.alpha)},"
        f"{_fmt(config.lipschitz)},{config.params.flow.value}"
    )


def write_accuracy_csv(path: str, config: SchemeConfig, rows: Sequence[AccuracyRow]):
    lines = ["scheme,aux,alpha,L,flow,dt,l2_error,order"]
    prefix = _series_header(config)
    for row in rows:
        order = "" if row.order is None else _fmt(row.order)
        lines.append(f"{prefix},{_fmt(row.dt)},{_fmt(row.l2_error)},{order}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_series_csv(path: str, config: SchemeConfig, dts: Sequence[float], values: Sequence[float]):
    """Any (dt, value) decay series in the accuracy-CSV layout."""
    orders = observed_order(values, dts)
    rows = [AccuracyRow(dt=dts[0], l2_error=values[0], order=None)]
    rows.extend(
        AccuracyRow(dt=d, l2_error=v, order=o)
        for d, v, o in zip(dts[1:], values[1:], orders)
    )
    write_accuracy_csv(path, config, rows)


def write_energy_csv(path: str, report: RunReport):
    lines = ["step,time,energy_modified,energy_original,dissipation_sum,mass,residual"]
    for i in range(len(report.times)):
        lines.append(
            f"{i},{_fmt(report.times[i])},{_fmt(report.energy_modified[i])},"
            f"{_fmt(report.energy_original[i])},{_fmt(report.dissipation_sum[i])},"
            f"{_fmt(report.mass[i])},{_fmt(report.residuals[i])}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
