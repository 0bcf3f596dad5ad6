"""First-order linear energy-stable time steppers for the gradient flows.

Three scheme families share the skeleton

    (phi^{n+1} - phi^n) / dt = G mu^{n+1}  (+ source),

with mu^{n+1} linear in the new unknowns thanks to an auxiliary variable:

Convexified stepper (field auxiliary r, convex c with c(r) = F(phi) + a1):

    mu^{n+1} = -eps^2 lap phi^{n+1} + [c'(r^n) + alpha*L*(r^{n+1}-r^n)] P^n,
    r^{n+1} - r^n = P^n (phi^{n+1} - phi^n),          P^n = f(phi^n)/c'(r(phi^n)).

With c(r) = r^2 and alpha = 1 this is exactly the classical quadratized
(square-root auxiliary) stepper.  alpha >= 1/2 together with L at least the
Lipschitz constant of c' on the visited branch gives the discrete energy law

    E^{n+1} <= E^n,    E^n = eps^2/2 ||grad phi^n||^2 + integral(c(r^n)).

Functionalized stepper (auxiliaries r and g, density r*g(r), g = r^(2k+1)):

    mu^{n+1} = -eps^2 lap phi^{n+1} + [g'(r^n) r^{n+1} + g^{n+1}] P^n,
    r^{n+1} - r^n = P^n (phi^{n+1} - phi^n),
    g^{n+1} - g^n = g'(r^n) (r^{n+1} - r^n),

energy-stable for Ehat^n = eps^2/2 ||grad phi^n||^2 + integral(g^n r^n)
because g' >= 0.  k = 0 forces g^{n+1} = r^{n+1} and reproduces the
quadratized stepper step for step.

Scalar-auxiliary stepper (scalar r(t), c(r) = integral(F) + a2):

    mu^{n+1} = -eps^2 lap phi^{n+1} + [c'(r^n) + alpha*L*(r^{n+1}-r^n)] b^n,
    r^{n+1} - r^n = (f(phi^n), phi^{n+1} - phi^n) / c'(r_phi^n),

with b^n = f(phi^n)/c'(r_phi^n) and r_phi^n = c^{-1}(integral(F(phi^n))+a2).
The scalar unknown is eliminated analytically (two solves with the same
field-sized operator), which is the standard implementation trick for
scalar-auxiliary methods; quadratic c with alpha*L = 2 reproduces the
classical scalar-auxiliary-variable step.

Each field stepper supports two solve paths that agree to 1e-10:

  * "block": assemble and solve the coupled block system in
    (phi, mu, r[, g]) exactly as written above.  This is the reference
    path; it keeps mu^{n+1} as a solver unknown.
  * "eliminated": substitute the auxiliary updates into the mu row and
    solve a single field-sized system for phi^{n+1}, then recover the
    auxiliaries and mu^{n+1} in closed form.  Much faster for long runs.

Block systems are assembled fresh every step (P^n changes); nothing is
cached across steps except the grid's constant Laplacian matrix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import linalg
from .auxfun import ConvexAux, MonoAux, p_of_phi, p_of_phi_mono, r_of_phi, r_of_phi_mono
from .grid import Field, GridSpec, grad_sq_norm, inner, integrate, laplacian_2d, laplacian_matrix
from .model import Flow, ModelParams, apply_flow_2d, dpotential, forcing, forcing_analytic, free_energy, potential


class SchemeKind(enum.Enum):
    IEC = "iec"     # convexified field auxiliary
    IEF = "ief"     # functionalized field auxiliary pair
    CSAV = "csav"   # convexified scalar auxiliary


@dataclass(frozen=True)
class SchemeConfig:
    """Everything a stepper needs besides the state itself.

    lipschitz is the smoothness constant L used by the convexified update;
    the default 2 covers every builtin family on the branches visited in
    practice (it is the exact constant for the quadratic family and an
    upper bound for softplus).  alpha >= 1/2 is required for the discrete
    energy law.
    """

    scheme: SchemeKind
    aux: Union[ConvexAux, MonoAux]
    dt: float
    params: ModelParams
    alpha: float = 0.5
    lipschitz: float = 2.0
    forcing_enabled: bool = False
    forcing_analytic: bool = False
    solver_path: str = "block"
    solve_tol: float = 1e-10
    max_iter: int = 10_000

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.alpha < 0.5:
            raise ValueError(
                f"alpha = {self.alpha} rejected: the discrete energy law requires alpha >= 1/2"
            )
        if self.lipschitz <= 0:
            raise ValueError("lipschitz constant must be positive")
        if self.solver_path not in ("block", "eliminated"):
            raise ValueError(f"unknown solver path {self.solver_path!r}")
        if self.scheme in (SchemeKind.IEC, SchemeKind.CSAV) and not isinstance(self.aux, ConvexAux):
            raise ValueError(f"{self.scheme.value} needs a convex auxiliary family")
        if self.scheme is SchemeKind.IEF and not isinstance(self.aux, MonoAux):
            raise ValueError("ief needs a monomial auxiliary family")


@dataclass(frozen=True)
class SchemeState:
    """Per-step unknowns: phi, the auxiliaries, and the clock."""

    phi: Field
    r: Union[Field, float]
    g: Optional[Field]
    step: int
    t0: float = 0.0
    dt: float = 0.0

    @property
    def time(self) -> float:
        return self.t0 + self.step * self.dt


@dataclass(frozen=True)
class StepReport:
    """Diagnostics from one accepted step (values at the new time level)."""

    residual: float
    energy_modified: float
    energy_original: float
    dissipation_increment: float
    mass: float
    r_min: float
    r_max: float


_LAP_CACHE: dict[GridSpec, sp.csr_matrix] = {}


def grid_laplacian(grid: GridSpec) -> sp.csr_matrix:
    """The grid's constant 5-point operator (structure cached per grid)."""
    m = _LAP_CACHE.get(grid)
    if m is None:
        m = laplacian_matrix(grid)
        _LAP_CACHE[grid] = m
    return m


def flow_matrix(params: ModelParams, grid: GridSpec) -> sp.csr_matrix:
    """Matrix of the flow operator G: -M*I or M*lap."""
    if params.flow is Flow.ALLEN_CAHN:
        return (-params.m) * sp.identity(grid.num_nodes, format="csr")
    return params.m * grid_laplacian(grid)


def init_state(phi0: Field, config: SchemeConfig, t0: float = 0.0) -> SchemeState:
    """Initialize the auxiliaries consistently: r0 = r(phi0), g0 = g(r0)."""
    a1, a2 = config.params.a1, config.params.a2
    if config.scheme is SchemeKind.IEC:
        r0 = r_of_phi(phi0, config.aux, a1)
        return SchemeState(phi=phi0, r=r0, g=None, step=0, t0=t0, dt=config.dt)
    if config.scheme is SchemeKind.IEF:
        r0 = r_of_phi_mono(phi0, config.aux, a1)
        g0 = Field(phi0.grid, config.aux.g(r0.values))
        return SchemeState(phi=phi0, r=r0, g=g0, step=0, t0=t0, dt=config.dt)
    e1 = integrate(Field(phi0.grid, potential(phi0.values)))
    y = np.asarray(e1 + a2)
    config.aux.check_invertible(y.reshape(1), context="integral(F)+a2 =")
    r0 = float(config.aux.cinv(y))
    return SchemeState(phi=phi0, r=r0, g=None, step=0, t0=t0, dt=config.dt)


def _source_values(config: SchemeConfig, grid: GridSpec, t_new: float) -> Optional[np.ndarray]:
    if not config.forcing_enabled:
        return None
    fn = forcing_analytic if config.forcing_analytic else forcing
    return fn(t_new, grid, config.params).values


def assemble_iec_system(state: SchemeState, config: SchemeConfig) -> linalg.LinearSystem:
    """Block system for one convexified step, unknowns [phi; mu; r]."""
    grid = state.phi.grid
    n = grid.num_nodes
    params = config.params
    lap = grid_laplacian(grid)
    gop = flow_matrix(params, grid)
    eye = sp.identity(n, format="csr")

    p = p_of_phi(state.phi, config.aux, params.a1).values
    al = config.alpha * config.lipschitz
    pdiag = sp.diags(p, format="csr")

    a = sp.bmat(
        [
            [eye / config.dt, -gop, None],
            [params.epsilon**2 * lap, eye, -al * pdiag],
            [-pdiag, None, eye],
        ],
        format="csr",
    )

    cpr = config.aux.cprime(state.r.values)
    rhs = np.concatenate(
        [
            state.phi.values / config.dt,
            cpr * p - al * state.r.values * p,
            state.r.values - p * state.phi.values,
        ]
    )
    src = _source_values(config, grid, state.time + config.dt)
    if src is not None:
        rhs[:n] += src
    return linalg.LinearSystem(linalg.SparseMatrix.from_scipy(a), rhs)


def assemble_ief_system(state: SchemeState, config: SchemeConfig) -> linalg.LinearSystem:
    """Block system for one functionalized step, unknowns [phi; mu; r; g]."""
    grid = state.phi.grid
    n = grid.num_nodes
    params = config.params
    lap = grid_laplacian(grid)
    gop = flow_matrix(params, grid)
    eye = sp.identity(n, format="csr")

    p = p_of_phi_mono(state.phi, config.aux, params.a1).values
    gp = config.aux.gprime(state.r.values)
    pdiag = sp.diags(p, format="csr")

    a = sp.bmat(
        [
            [eye / config.dt, -gop, None, None],
            [params.epsilon**2 * lap, eye, -sp.diags(gp * p), -pdiag],
            [-pdiag, None, eye, None],
            [None, None, -sp.diags(gp), eye],
        ],
        format="csr",
    )

    rhs = np.concatenate(
        [
            state.phi.values / config.dt,
            np.zeros(n),
            state.r.values - p * state.phi.values,
            state.g.values - gp * state.r.values,
        ]
    )
    src = _source_values(config, grid, state.time + config.dt)
    if src is not None:
        rhs[:n] += src
    return linalg.LinearSystem(linalg.SparseMatrix.from_scipy(a), rhs)


class _ElimOperator:
    """Field-sized implicit operator with its constant part factorized.

    The eliminated systems have the form

        A(w) = I - dt*G(-eps^2 lap + diag(w)),   w >= 0 varying per step,

    whose constant part A(0) = I + dt*m*eps^2*lap_or_biharmonic is
    factorized once per (grid, flow, m, eps, dt) and reused as an exact
    preconditioner: a defect-correction sweep contracts by roughly
    dt*m*||w|| per pass, so a handful of sweeps reach the solver
    tolerance.  If the sweeps stall (large dt), the full matrix is
    assembled and solved directly instead.  Either way the accepted
    solution satisfies the usual residual contract.
    """

    def __init__(self, grid: GridSpec, params: ModelParams, dt: float):
        self.grid = grid
        self.params = params
        self.dt = dt
        self.lap = grid_laplacian(grid)
        n = grid.num_nodes
        eye = sp.identity(n, format="csr")
        c_lap = dt * params.m * params.epsilon**2
        if params.flow is Flow.ALLEN_CAHN:
            base = eye - c_lap * self.lap
        else:
            base = eye + c_lap * (self.lap @ self.lap)
        self.base = base.tocsr()
        self.lu0 = spla.splu(base.tocsc(), permc_spec="MMD_AT_PLUS_A")

    def apply(self, weight: np.ndarray, x: np.ndarray) -> np.ndarray:
        """A(weight) @ x without assembling the matrix."""
        y = self.base @ x
        wx = self.dt * self.params.m * weight * x
        if self.params.flow is Flow.ALLEN_CAHN:
            return y + wx
        return y - self.lap @ wx

    def assemble(self, weight: np.ndarray) -> sp.csc_matrix:
        d = self.dt * self.params.m * weight
        if self.params.flow is Flow.ALLEN_CAHN:
            return (self.base + sp.diags(d)).tocsc()
        return (self.base - self.lap @ sp.diags(d)).tocsc()

    def solve(self, weight: np.ndarray, rhs: np.ndarray, tol: float) -> tuple[np.ndarray, float]:
        """Solve A(weight) x = rhs; returns (x, relative residual)."""
        scale = max(1.0, float(np.linalg.norm(rhs)))
        x = self.lu0.solve(rhs)
        prev = math.inf
        for _ in range(40):
            r = rhs - self.apply(weight, x)
            rn = float(np.linalg.norm(r))
            if rn <= tol * scale:
                return x, rn / scale
            if not np.isfinite(rn) or rn > 0.5 * prev:
                break  # stalled; go direct
            prev = rn
            x = x + self.lu0.solve(r)
        lu = spla.splu(self.assemble(weight), permc_spec="MMD_AT_PLUS_A")
        x = lu.solve(rhs)
        rn = float(np.linalg.norm(rhs - self.apply(weight, x)))
        for _ in range(5):
            if rn <= tol * scale:
                break
            x = x + lu.solve(rhs - self.apply(weight, x))
            rn = float(np.linalg.norm(rhs - self.apply(weight, x)))
        if rn > tol * scale or not np.isfinite(rn):
            raise linalg.SolverError(
                f"eliminated solve residual {rn / scale:.3e} above {tol:.1e}",
                residual=rn / scale,
            )
        return x, rn / scale


_ELIM_CACHE: dict[tuple, _ElimOperator] = {}


def _elim_operator(grid: GridSpec, params: ModelParams, dt: float) -> _ElimOperator:
    key = (grid, params.flow, params.m, params.epsilon, dt)
    op = _ELIM_CACHE.get(key)
    if op is None:
        op = _ElimOperator(grid, params, dt)
        if len(_ELIM_CACHE) > 32:
            _ELIM_CACHE.clear()
        _ELIM_CACHE[key] = op
    return op


def _eliminated_rhs(
    state: SchemeState,
    config: SchemeConfig,
    weight: np.ndarray,
    explicit: np.ndarray,
) -> np.ndarray:
    """Right-hand side of the mu row with the auxiliary updates substituted:

    phi^n + dt*G(explicit - weight*phi^n) + dt*src.
    """
    grid = state.phi.grid
    explicit_part = explicit - weight * state.phi.values
    gvec = apply_flow_2d(config.params, grid, explicit_part.reshape(grid.ny, grid.nx)).reshape(-1)
    rhs = state.phi.values + config.dt * gvec
    src = _source_values(config, grid, state.time + config.dt)
    if src is not None:
        rhs = rhs + config.dt * src
    return rhs


def _report(
    state_new: SchemeState,
    config: SchemeConfig,
    mu: np.ndarray,
    residual: float,
) -> StepReport:
    grid = state_new.phi.grid
    params = config.params
    mu2d = mu.reshape(grid.ny, grid.nx)
    gmu = apply_flow_2d(params, grid, mu2d).reshape(-1)
    diss = -float(np.sum(gmu * mu)) * grid.hx * grid.hy * config.dt
    rvals = state_new.r.values if isinstance(state_new.r, Field) else np.asarray([state_new.r])
    return StepReport(
        residual=residual,
        energy_modified=modified_energy(state_new, config),
        energy_original=free_energy(state_new.phi, params),
        dissipation_increment=diss,
        mass=integrate(state_new.phi),
        r_min=float(rvals.min()),
        r_max=float(rvals.max()),
    )


def step_iec(state: SchemeState, config: SchemeConfig) -> tuple[SchemeState, StepReport]:
    """Advance the convexified stepper by one dt."""
    grid = state.phi.grid
    n = grid.num_nodes
    if config.solver_path == "block":
        system = assemble_iec_system(state, config)
        x = linalg.solve(system, tol=config.solve_tol, max_iter=config.max_iter)
        resid = linalg.residual_norm(system, x)
        phi_new, mu_new, r_new = x[:n], x[n : 2 * n], x[2 * n :]
    else:
        p = p_of_phi(state.phi, config.aux, config.params.a1).values
        al = config.alpha * config.lipschitz
        cpr = config.aux.cprime(state.r.values)
        weight = al * p * p
        rhs = _eliminated_rhs(state, config, weight, explicit=cpr * p)
        op = _elim_operator(grid, config.params, config.dt)
        phi_new, resid = op.solve(weight, rhs, tol=config.solve_tol)
        r_new = state.r.values + p * (phi_new - state.phi.values)
        mu_new = (
            -config.params.epsilon**2
            * laplacian_2d(grid, phi_new.reshape(grid.ny, grid.nx)).reshape(-1)
            + (cpr + al * (r_new - state.r.values)) * p
        )
    new_state = SchemeState(
        phi=Field(grid, phi_new),
        r=Field(grid, r_new),
        g=None,
        step=state.step + 1,
        t0=state.t0,
        dt=state.dt,
    )
    return new_state, _report(new_state, config, mu_new, resid)


def step_ief(state: SchemeState, config: SchemeConfig) -> tuple[SchemeState, StepReport]:
    """Advance the functionalized stepper by one dt."""
    grid = state.phi.grid
    n = grid.num_nodes
    if config.solver_path == "block":
        system = assemble_ief_system(state, config)
        x = linalg.solve(system, tol=config.solve_tol, max_iter=config.max_iter)
        resid = linalg.residual_norm(system, x)
        phi_new, mu_new = x[:n], x[n : 2 * n]
        r_new, g_new = x[2 * n : 3 * n], x[3 * n :]
    else:
        p = p_of_phi_mono(state.phi, config.aux, config.params.a1).values
        gp = config.aux.gprime(state.r.values)
        explicit = (gp * state.r.values + state.g.values) * p
        weight = 2.0 * gp * p * p
        rhs = _eliminated_rhs(state, config, weight, explicit=explicit)
        op = _elim_operator(grid, config.params, config.dt)
        phi_new, resid = op.solve(weight, rhs, tol=config.solve_tol)
        dphi = phi_new - state.phi.values
        r_new = state.r.values + p * dphi
        g_new = state.g.values + gp * p * dphi
        mu_new = (
            -config.params.epsilon**2
            * laplacian_2d(grid, phi_new.reshape(grid.ny, grid.nx)).reshape(-1)
            + (gp * r_new + g_new) * p
        )
    new_state = SchemeState(
        phi=Field(grid, phi_new),
        r=Field(grid, r_new),
        g=Field(grid, g_new),
        step=state.step + 1,
        t0=state.t0,
        dt=state.dt,
    )
    return new_state, _report(new_state, config, mu_new, resid)


def step_csav(state: SchemeState, config: SchemeConfig) -> tuple[SchemeState, StepReport]:
    """Advance the scalar-auxiliary stepper by one dt.

    The scalar r^{n+1} couples to phi^{n+1} only through one inner product,
    so it is eliminated by solving the same field operator against two
    right-hand sides and closing a rank-one identity.
    """
    grid = state.phi.grid
    params = config.params
    aux = config.aux
    n = grid.num_nodes

    e1 = integrate(Field(grid, potential(state.phi.values)))
    y = np.asarray(e1 + params.a2)
    aux.check_invertible(y.reshape(1), context="integral(F)+a2 =")
    r_phi = float(aux.cinv(y))
    cp_phi = float(aux.cprime(np.asarray(r_phi)))
    if cp_phi == 0.0 or not math.isfinite(cp_phi):
        raise linalg.SolverError("c'(r(phi)) vanished; scalar transform is singular")

    f_vals = dpotential(state.phi.values)
    b = f_vals / cp_phi
    gamma = config.alpha * config.lipschitz / cp_phi
    cpr_n = float(aux.cprime(np.asarray(state.r)))
    w = grid.hx * grid.hy  # quadrature weight for the discrete inner product

    z = apply_flow_2d(params, grid, b.reshape(grid.ny, grid.nx)).reshape(-1)
    ip_phi_n = w * float(np.sum(f_vals * state.phi.values))
    rhs1 = state.phi.values + config.dt * (cpr_n - gamma * ip_phi_n) * z
    src = _source_values(config, grid, state.time + config.dt)
    if src is not None:
        rhs1 = rhs1 + config.dt * src

    op = _elim_operator(grid, params, config.dt)
    zero_w = np.zeros(n)
    u1, _ = op.solve(zero_w, rhs1, tol=config.solve_tol)
    u2, _ = op.solve(zero_w, z, tol=config.solve_tol)

    ip1 = w * float(np.sum(f_vals * u1))
    ip2 = w * float(np.sum(f_vals * u2))
    denom = 1.0 - config.dt * gamma * ip2
    if abs(denom) < 1e-14:
        raise linalg.SolverError("rank-one closure degenerate (denominator ~ 0)")
    ip_phi_new = ip1 / denom
    phi_new = u1 + config.dt * gamma * ip_phi_new * u2
    r_new = float(state.r) + (ip_phi_new - ip_phi_n) / cp_phi
    mu_new = (
        -params.epsilon**2 * laplacian_2d(grid, phi_new.reshape(grid.ny, grid.nx)).reshape(-1)
        + (cpr_n + config.alpha * config.lipschitz * (r_new - float(state.r))) * b
    )

    # end-to-end residual of the phi row, (phi^{n+1}-phi^n)/dt - G mu - src
    gmu = apply_flow_2d(params, grid, mu_new.reshape(grid.ny, grid.nx)).reshape(-1)
    row1 = (phi_new - state.phi.values) / config.dt - gmu
    if src is not None:
        row1 -= src
    resid = float(np.linalg.norm(row1)) / max(1.0, float(np.linalg.norm(rhs1)) / config.dt)

    new_state = SchemeState(
        phi=Field(grid, phi_new),
        r=r_new,
        g=None,
        step=state.step + 1,
        t0=state.t0,
        dt=state.dt,
    )
    return new_state, _report(new_state, config, mu_new, resid)


def step(state: SchemeState, config: SchemeConfig) -> tuple[SchemeState, StepReport]:
    """Dispatch one step of whichever scheme the config selects."""
    if config.scheme is SchemeKind.IEC:
        return step_iec(state, config)
    if config.scheme is SchemeKind.IEF:
        return step_ief(state, config)
    return step_csav(state, config)


def modified_energy_iec(state: SchemeState, config: SchemeConfig) -> float:
    """eps^2/2 ||grad phi||^2 + integral(c(r))."""
    bulk = Field(state.phi.grid, config.aux.c(state.r.values))
    return 0.5 * config.params.epsilon**2 * grad_sq_norm(state.phi) + integrate(bulk)


def modified_energy_ief(state: SchemeState, config: SchemeConfig) -> float:
    """eps^2/2 ||grad phi||^2 + integral(g * r)."""
    bulk = Field(state.phi.grid, state.g.values * state.r.values)
    return 0.5 * config.params.epsilon**2 * grad_sq_norm(state.phi) + integrate(bulk)


def modified_energy_csav(state: SchemeState, config: SchemeConfig) -> float:
    """eps^2/2 ||grad phi||^2 + c(r), r scalar."""
    c_r = float(config.aux.c(np.asarray(float(state.r))))
    return 0.5 * config.params.epsilon**2 * grad_sq_norm(state.phi) + c_r


def modified_energy(state: SchemeState, config: SchemeConfig) -> float:
    if config.scheme is SchemeKind.IEC:
        return modified_energy_iec(state, config)
    if config.scheme is SchemeKind.IEF:
        return modified_energy_ief(state, config)
    return modified_energy_csav(state, config)
