"""Command-line frontend: config files, experiment dispatch, output files.

Config files are flat INI text with one section per concern ([grid],
[model], [scheme], [run], [output]); command-line flags override file
values.  Canonical configs for the standard experiments live in the
repository's configs/ directory and can be named without path or
extension (resolved against ./configs and $GRADFLOW_CONFIG_DIR).

Exit codes: 0 success, 2 configuration problem, 3 linear-solver failure,
4 invariant violation.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import harness, linalg, schemes
from .auxfun import AuxDomainError, MonoAux, builtin_convex, parse_aux
from .grid import Field, GridSpec, grad_sq_norm, inner, integrate, laplacian
from .model import Flow, ModelParams, manufactured_state
from .schemes import SchemeConfig, SchemeKind, init_state, step

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_INVARIANT = 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Validated union of config-file values and flag overrides."""

    nx: int = 40
    ny: int = 40
    m: float = 0.6
    epsilon: float = 0.4
    flow: str = "allen-cahn"
    a1: float = 1.0
    a2: float = 1.0
    scheme: str = "iec"
    aux: str = "softplus"
    alpha: float = 0.5
    lipschitz: float = 2.0
    solver_path: str = "eliminated"
    dt: float = 0.01
    dts: list = field(default_factory=list)
    t_end: float = 1.0
    ic: str = "sincos"
    seed: int = 42
    r1: float = 1.2
    snapshot_every: float = 0.0
    forcing: str = "discrete"
    label: str = ""
    out_root: str = ""
    jobs: int = 1

    def grid(self) -> GridSpec:
        return GridSpec(nx=self.nx, ny=self.ny)

    def params(self) -> ModelParams:
        return ModelParams(
            m=self.m,
            epsilon=self.epsilon,
            flow=Flow(self.flow),
            a1=self.a1,
            a2=self.a2,
        )

    def scheme_config(self, forcing_enabled: bool = False) -> SchemeConfig:
        return SchemeConfig(
            scheme=SchemeKind(self.scheme),
            aux=parse_aux(self.aux),
            dt=self.dt,
            params=self.params(),
            alpha=self.alpha,
            lipschitz=self.lipschitz,
            forcing_enabled=forcing_enabled,
            forcing_analytic=(self.forcing == "analytic"),
            solver_path=self.solver_path,
        )

    def validate(self, needs_dts: bool = False):
        if self.nx < 4 or self.ny < 4:
            raise ConfigError(f"grid must be at least 4x4, got {self.nx}x{self.ny}")
        if self.alpha < 0.5:
            raise ConfigError(
                f"alpha = {self.alpha} rejected: energy stability requires alpha >= 1/2"
            )
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.t_end <= 0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if self.forcing not in ("discrete", "analytic"):
            raise ConfigError(f"unknown forcing mode {self.forcing!r}")
        try:
            Flow(self.flow)
            SchemeKind(self.scheme)
            parse_aux(self.aux)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for d in [self.dt] + list(self.dts):
            harness.steps_for(self.t_end, d)  # raises on non-divisible spans
        if needs_dts and not self.dts:
            raise ConfigError("this experiment needs a 'dts' list in [run]")


_SECTION_FIELDS = {
    "grid": {"nx": int, "ny": int},
    "model": {"m": float, "epsilon": float, "flow": str, "a1": float, "a2": float},
    "scheme": {
        "kind": ("scheme", str),
        "aux": str,
        "alpha": float,
        "l": ("lipschitz", float),
        "solver_path": str,
    },
    "run": {
        "dt": float,
        "dts": ("dts", lambda s: [float(tok) for tok in s.split()]),
        "t_end": float,
        "ic": str,
        "seed": int,
        "r1": float,
        "snapshot_every": float,
        "forcing": str,
        "jobs": int,
    },
    "output": {"label": str, "out_root": str},
}


def resolve_config_path(name: str) -> str:
    candidates = [name, name + ".cfg"]
    for root in (os.path.join(os.getcwd(), "configs"), os.environ.get("GRADFLOW_CONFIG_DIR")):
        if root:
            candidates += [os.path.join(root, name), os.path.join(root, name + ".cfg")]
    for cand in candidates:
        if os.path.isfile(cand):
            return cand
    raise ConfigError(f"config {name!r} not found (tried {candidates})")


def load_config(path: str) -> RunConfig:
    import configparser

    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    cfg = RunConfig()
    for section, fields in _SECTION_FIELDS.items():
        if not parser.has_section(section):
            continue
        for key in parser.options(section):
            if key not in fields:
                raise ConfigError(f"unknown key {key!r} in [{section}] of {path}")
            spec = fields[key]
            attr, conv = spec if isinstance(spec, tuple) else (key, spec)
            raw = parser.get(section, key)
            try:
                setattr(cfg, attr, conv(raw))
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc
    return cfg


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    overrides = {
        "nx": args.grid,
        "ny": args.grid,
        "scheme": args.scheme,
        "aux": args.aux,
        "alpha": args.alpha,
        "lipschitz": args.lipschitz,
        "flow": args.flow,
        "dt": args.dt,
        "t_end": args.t_end,
        "seed": args.seed,
        "label": args.label,
        "out_root": args.out,
        "jobs": args.jobs,
        "solver_path": args.solver_path,
        "forcing": args.forcing,
    }
    if getattr(args, "dts", None):
        overrides["dts"] = [float(t) for t in args.dts]
    for attr, val in overrides.items():
        if val is not None:
            setattr(cfg, attr, val)
    return cfg


def out_dir_for(cfg: RunConfig, subcommand: str) -> str:
    root = cfg.out_root or os.environ.get("GRADFLOW_OUT", "out")
    aux_slug = cfg.aux.replace(":", "_").replace("=", "")
    label = cfg.label or time.strftime("%Y%m%d-%H%M%S")
    run_id = f"{subcommand}_{cfg.scheme}_{aux_slug}_{label}"
    path = os.path.join(root, run_id)
    os.makedirs(path, exist_ok=True)
    return path


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gradflow", description=__doc__)
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name, hlp in [
        ("accuracy", "forced convergence sweep against the reference solution"),
        ("energy", "unforced energy trace with monotonicity check"),
        ("energy-gap", "auxiliary-consistency gap decay at a fixed horizon"),
        ("coarsen", "conserved-flow coarsening run with snapshots"),
        ("step-debug", "one step on a tiny grid; dump system and solution"),
        ("validate", "run the structural invariant suite"),
    ]:
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", help="config file path or canonical name")
        p.add_argument("--grid", type=int, help="override nx = ny")
        p.add_argument("--scheme", choices=[k.value for k in SchemeKind])
        p.add_argument("--aux", help="auxiliary family name")
        p.add_argument("--alpha", type=float)
        p.add_argument("--L", dest="lipschitz", type=float)
        p.add_argument("--flow", choices=[f.value for f in Flow])
        p.add_argument("--dt", type=float)
        p.add_argument("--dts", nargs="+", help="time-step list for sweeps")
        p.add_argument("--t-end", dest="t_end", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--label", help="run label (used instead of a timestamp)")
        p.add_argument("--out", help="output root (default $GRADFLOW_OUT or ./out)")
        p.add_argument("--jobs", type=int, help="parallel sweep jobs")
        p.add_argument("--solver-path", dest="solver_path", choices=["block", "eliminated"])
        p.add_argument("--forcing", choices=["discrete", "analytic"])
    return ap


def cmd_accuracy(cfg: RunConfig) -> int:
    cfg.validate(needs_dts=True)
    config = cfg.scheme_config(forcing_enabled=True)
    rows = harness.run_accuracy(config, cfg.grid(), cfg.dts, t_end=cfg.t_end, jobs=cfg.jobs)
    out = out_dir_for(cfg, "accuracy")
    harness.write_accuracy_csv(os.path.join(out, "accuracy.csv"), config, rows)
    for row in rows:
        order = "-" if row.order is None else f"{row.order:.3f}"
        print(f"dt={row.dt:<10g} l2_error={row.l2_error:.6e} order={order}")
    print(f"wrote {os.path.join(out, 'accuracy.csv')}")
    return EXIT_OK


def cmd_energy(cfg: RunConfig) -> int:
    cfg.validate()
    config = cfg.scheme_config()
    ic = _initial_condition(cfg)
    report = harness.run_energy_trace(config, ic, cfg.t_end)
    out = out_dir_for(cfg, "energy")
    harness.write_energy_csv(os.path.join(out, "energy.csv"), report)
    print(
        f"steps={len(report.times) - 1} E_mod[0]={report.energy_modified[0]:.6f} "
        f"E_mod[end]={report.energy_modified[-1]:.6f} "
        f"max_increase={report.max_energy_increase:.3e} "
        f"monotone={'yes' if report.monotone_ok else 'NO'}"
    )
    print(f"wrote {os.path.join(out, 'energy.csv')}")
    if not report.monotone_ok:
        print("invariant violation: modified energy increased beyond slack", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_energy_gap(cfg: RunConfig) -> int:
    cfg.validate(needs_dts=True)
    config = cfg.scheme_config()
    rows = harness.run_energy_gap(config, cfg.grid(), cfg.dts, t_end=cfg.t_end, jobs=cfg.jobs)
    out = out_dir_for(cfg, "energy-gap")
    dts = [row.dt for row in rows]
    harness.write_series_csv(os.path.join(out, "gap.csv"), config, dts, [r.gap for r in rows])
    written = ["gap.csv"]
    if rows[0].aux_gap_r is not None:
        harness.write_series_csv(
            os.path.join(out, "gap_r.csv"), config, dts, [r.aux_gap_r for r in rows]
        )
        harness.write_series_csv(
            os.path.join(out, "gap_g.csv"), config, dts, [r.aux_gap_g for r in rows]
        )
        written += ["gap_r.csv", "gap_g.csv"]
    for row in rows:
        extra = (
            ""
            if row.aux_gap_r is None
            else f" |r-r(phi)|={row.aux_gap_r:.6e} |g-g(r(phi))|={row.aux_gap_g:.6e}"
        )
        print(f"dt={row.dt:<10g} gap={row.gap:.6e}{extra}")
    print(f"wrote {', '.join(os.path.join(out, w) for w in written)}")
    return EXIT_OK


def cmd_coarsen(cfg: RunConfig) -> int:
    cfg.validate()
    config = cfg.scheme_config()
    out = out_dir_for(cfg, "coarsen")
    report = harness.run_coarsening(
        config,
        cfg.grid(),
        cfg.ic,
        out,
        run_id=cfg.label or "coarsen",
        seed=cfg.seed,
        r1=cfg.r1,
        t_end=cfg.t_end,
        snapshot_every=cfg.snapshot_every or None,
    )
    harness.write_energy_csv(os.path.join(out, "energy.csv"), report)
    comp_path = os.path.join(out, "components.csv")
    with open(comp_path, "w") as fh:
        fh.write("snapshot,components\n")
        for path, count in zip(report.snapshot_paths, report.component_counts):
            fh.write(f"{os.path.basename(path)},{count}\n")
    mass_drift = float(np.max(np.abs(report.mass - report.mass[0])))
    print(
        f"frames={len(report.snapshot_paths)} components={report.component_counts} "
        f"mass_drift={mass_drift:.3e} monotone={'yes' if report.monotone_ok else 'NO'}"
    )
    print(f"wrote {len(report.snapshot_paths)} snapshots, energy.csv, components.csv under {out}")
    return EXIT_OK if report.monotone_ok else EXIT_INVARIANT


def cmd_step_debug(cfg: RunConfig) -> int:
    if not cfg.label:
        cfg.label = "debug"
    cfg.validate()
    grid = cfg.grid()
    config = cfg.scheme_config()
    if config.scheme is SchemeKind.CSAV:
        raise ConfigError("step-debug dumps block systems; use scheme iec or ief")
    phi0 = Field.from_function(grid, lambda x, y: np.sin(x))
    state = init_state(phi0, config)
    assemble = (
        schemes.assemble_iec_system
        if config.scheme is SchemeKind.IEC
        else schemes.assemble_ief_system
    )
    system = assemble(state, config)
    x = linalg.solve(system, tol=config.solve_tol, max_iter=config.max_iter)
    out = out_dir_for(cfg, "step-debug")
    dense = system.matrix.to_scipy().toarray()
    np.savetxt(os.path.join(out, "matrix.txt"), dense, fmt="%.17g")
    np.savetxt(os.path.join(out, "rhs.txt"), system.rhs, fmt="%.17g")
    np.savetxt(os.path.join(out, "solution.txt"), x, fmt="%.17g")
    print(
        f"system size {system.matrix.nrows}, residual "
        f"{linalg.residual_norm(system, x):.3e}; dumped matrix.txt/rhs.txt/solution.txt to {out}"
    )
    return EXIT_OK


def _initial_condition(cfg: RunConfig) -> Field:
    grid = cfg.grid()
    if cfg.ic == "sincos":
        return harness.ic_sincos(grid)
    if cfg.ic == "manufactured":
        return manufactured_state(0.0, grid)
    if cfg.ic == "two_circle":
        return harness.ic_two_circle(grid, cfg.epsilon, radii=(cfg.r1, 0.8))
    if cfg.ic == "random":
        return harness.ic_random(grid, cfg.seed)
    raise ConfigError(f"unknown initial condition {cfg.ic!r}")


def _check(name: str, ok: bool, detail: str = "") -> bool:
    print(f"{'PASS' if ok else 'FAIL'}  {name}{(' -- ' + detail) if detail else ''}")
    return ok


def cmd_validate(cfg: RunConfig) -> int:
    """Structural invariant suite: cheap, deterministic, no experiment I/O."""
    grid = GridSpec(nx=8, ny=8)
    params_ac = ModelParams(flow=Flow.ALLEN_CAHN)
    params_ch = ModelParams(flow=Flow.CAHN_HILLIARD)
    ok = True

    rng = np.random.default_rng(7)
    f = Field(grid, rng.uniform(-1, 1, grid.num_nodes))
    sbp = abs(grad_sq_norm(f) + inner(f, laplacian(f)))
    ok &= _check("summation-by-parts identity", sbp < 1e-10, f"|mismatch|={sbp:.2e}")

    ic = harness.ic_sincos(grid)
    for name, kind, aux in [
        ("iec/softplus", SchemeKind.IEC, builtin_convex("softplus")),
        ("ief/k=1", SchemeKind.IEF, MonoAux(k=1)),
        ("csav/quadratic", SchemeKind.CSAV, builtin_convex("quadratic")),
    ]:
        config = SchemeConfig(scheme=kind, aux=aux, dt=0.1, params=params_ac)
        stationary = True
        for value in (0.0, 1.0, -1.0):
            state = init_state(Field.full(grid, value), config)
            new, _ = step(state, config)
            stationary &= float(np.max(np.abs(new.phi.values - value))) < 1e-9
        ok &= _check(f"fixed points stationary ({name})", stationary)

    cfg_q = SchemeConfig(
        scheme=SchemeKind.IEC, aux=builtin_convex("quadratic"), dt=0.05,
        params=params_ac, alpha=1.0, lipschitz=2.0,
    )
    cfg_0 = SchemeConfig(scheme=SchemeKind.IEF, aux=MonoAux(k=0), dt=0.05, params=params_ac)
    s_q, _ = step(init_state(ic, cfg_q), cfg_q)
    s_0, _ = step(init_state(ic, cfg_0), cfg_0)
    gap = float(np.max(np.abs(s_q.phi.values - s_0.phi.values)))
    ok &= _check("quadratized-scheme equivalence (alpha=1 vs k=0)", gap < 1e-10, f"gap={gap:.2e}")

    config = SchemeConfig(
        scheme=SchemeKind.IEC, aux=builtin_convex("softplus"), dt=0.01, params=params_ch
    )
    state = init_state(ic, config)
    new, rep = step(state, config)
    drift = abs(rep.mass - integrate(ic))
    ok &= _check("conserved-flow mass per step", drift < 1e-9, f"drift={drift:.2e}")

    for name, kind, aux, params in [
        ("iec/softplus AC", SchemeKind.IEC, builtin_convex("softplus"), params_ac),
        ("ief/k=1 CH", SchemeKind.IEF, MonoAux(k=1), params_ch),
    ]:
        base = dict(scheme=kind, aux=aux, dt=0.05, params=params)
        blk = SchemeConfig(solver_path="block", **base)
        eli = SchemeConfig(solver_path="eliminated", **base)
        sb, _ = step(init_state(ic, blk), blk)
        se, _ = step(init_state(ic, eli), eli)
        gap = float(np.max(np.abs(sb.phi.values - se.phi.values)))
        ok &= _check(f"block/eliminated agreement ({name})", gap < 1e-10, f"gap={gap:.2e}")

    return EXIT_OK if ok else EXIT_INVARIANT


_COMMANDS = {
    "accuracy": cmd_accuracy,
    "energy": cmd_energy,
    "energy-gap": cmd_energy_gap,
    "coarsen": cmd_coarsen,
    "step-debug": cmd_step_debug,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(resolve_config_path(args.config)) if args.config else RunConfig()
        cfg = apply_overrides(cfg, args)
        code = _COMMANDS[args.subcommand](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except linalg.SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except AuxDomainError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return code


if __name__ == "__main__":
    sys.exit(main())
