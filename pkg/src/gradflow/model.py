"""Physical model: double-well free energy and the two gradient-flow kinds.

The free energy is

    E(phi) = integral( eps^2/2 * |grad phi|^2 + F(phi) ),
    F(phi) = (phi^2 - 1)^2 / 4,     f(phi) = dF/dphi = phi^3 - phi.

Evolution is phi_t = G mu with mu = -eps^2 lap(phi) + f(phi), where the flow
operator G is -M*I for the L2 flow (Allen-Cahn) and M*lap for the H^-1 flow
(Cahn-Hilliard).  eps^2 multiplies the Laplacian inside mu throughout; all
steppers and energies use this weighted form.

For time-accuracy studies the module also provides the reference state
phi(x, y, t) = sin(x) cos(y) cos(t) and the compensating source term that
makes it an exact solution of the *space-discretized* system, so measured
errors are purely temporal.  An analytic-operator variant of the source is
available for comparison; it leaves an O(h^2) spatial floor in the errors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .grid import Field, GridSpec, grad_sq_norm, integrate, laplacian_2d


class Flow(enum.Enum):
    """Gradient-flow kind: L2 (Allen-Cahn) or H^-1 (Cahn-Hilliard)."""

    ALLEN_CAHN = "allen-cahn"
    CAHN_HILLIARD = "cahn-hilliard"


@dataclass(frozen=True)
class ModelParams:
    """Mobility, interface width, flow kind, and the two energy shifts.

    a1 shifts the pointwise density (F + a1 > 0 keeps the auxiliary
    transforms away from their branch ends); a2 plays the same role for the
    scalar auxiliary variable built on integral(F) + a2.
    """

    m: float = 0.6
    epsilon: float = 0.4
    flow: Flow = Flow.ALLEN_CAHN
    a1: float = 1.0
    a2: float = 1.0

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError(f"mobility must be positive, got {self.m}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.a1 <= 0 or self.a2 <= 0:
            raise ValueError("energy shifts a1, a2 must be positive")


def potential(phi):
    """Double-well density F(phi) = (phi^2 - 1)^2 / 4; scalar or array."""
    q = np.square(phi) - 1.0
    return 0.25 * q * q


def dpotential(phi):
    """f(phi) = F'(phi) = phi^3 - phi; scalar or array."""
    return phi * (np.square(phi) - 1.0)


def free_energy(phi: Field, params: ModelParams) -> float:
    """E(phi) = eps^2/2 * grad_sq_norm(phi) + integral(F(phi))."""
    bulk = Field(phi.grid, potential(phi.values))
    return 0.5 * params.epsilon**2 * grad_sq_norm(phi) + integrate(bulk)


def apply_flow_2d(params: ModelParams, grid: GridSpec, arr: np.ndarray) -> np.ndarray:
    """Apply the flow operator G to a (ny, nx) array: -M*v or M*lap(v)."""
    if params.flow is Flow.ALLEN_CAHN:
        return -params.m * arr
    return params.m * laplacian_2d(grid, arr)


def manufactured_state(t: float, grid: GridSpec) -> Field:
    """Reference solution sin(x) cos(y) cos(t) sampled at the nodes."""
    c = math.cos(t)
    return Field.from_function(grid, lambda x, y: np.sin(x) * np.cos(y) * c)


def manufactured_rate(t: float, grid: GridSpec) -> Field:
    """Time derivative of the reference solution, -sin(x) cos(y) sin(t)."""
    s = -math.sin(t)
    return Field.from_function(grid, lambda x, y: np.sin(x) * np.cos(y) * s)


def forcing(t: float, grid: GridSpec, params: ModelParams) -> Field:
    """Source S(t) making the reference state solve the semi-discrete system.

    S = d/dt phi_ref - G_h[ -eps^2 lap_h(phi_ref) + f(phi_ref) ] with the
    grid's discrete operators, so that inserting the exact nodal state into
    phi_t = G_h mu + S leaves zero residual at every node.
    """
    phi = manufactured_state(t, grid).as_2d()
    mu = -params.epsilon**2 * laplacian_2d(grid, phi) + dpotential(phi)
    rate = manufactured_rate(t, grid).as_2d()
    return Field.from_2d(grid, rate - apply_flow_2d(params, grid, mu))


def forcing_analytic(t: float, grid: GridSpec, params: ModelParams) -> Field:
    """Source built from analytic spatial derivatives of the reference state.

    Uses lap(phi_ref) = -2 phi_ref and the closed form for lap(phi_ref^3);
    with this variant, errors measured on a fixed grid bottom out at the
    spatial truncation level instead of decaying with dt.
    """
    xx, yy = grid.coords()
    ct, st = math.cos(t), math.sin(t)
    phi = np.sin(xx) * np.cos(yy) * ct
    rate = -np.sin(xx) * np.cos(yy) * st
    mu = 2.0 * params.epsilon**2 * phi + phi**3 - phi
    if params.flow is Flow.ALLEN_CAHN:
        return Field.from_2d(grid, rate + params.m * mu)
    grad_sq = ct**2 * (
        np.cos(xx) ** 2 * np.cos(yy) ** 2 + np.sin(xx) ** 2 * np.sin(yy) ** 2
    )
    lap_phi3 = -6.0 * phi**3 + 6.0 * phi * grad_sq
    lap_mu = -4.0 * params.epsilon**2 * phi + lap_phi3 + 2.0 * phi
    return Field.from_2d(grid, rate - params.m * lap_mu)
