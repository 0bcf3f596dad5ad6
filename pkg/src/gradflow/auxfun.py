"""Auxiliary-function families and the pointwise transforms they induce.

The convexified steppers replace the energy density F(phi) + a1 by c(r)
for a smooth, increasing, convex c whose derivative is Lipschitz with
constant L on the working branch.  The induced transforms are

    r(phi) = c^{-1}(F(phi) + a1),
    P(phi) = dr/dphi = f(phi) / c'(r(phi)),

and they are what the steppers evaluate explicitly each step.  Builtin
families:

    quadratic    c(r) = r^2            (branch r >= 0, L = 2)
    softplus     c(r) = ln(1 + e^r)    (all of R, L = 1/4)
    logsquare    c(r) = (ln r)^2       (branch r >= 1, |c''| <= 2 there)
    exponential  c(r) = e^r            (locally Lipschitz only)

The functionalized family writes the density as r*g(r) with g(r) = r^(2k+1),
so g'(r) = (2k+1) r^(2k) >= 0 everywhere and

    r(phi) = (F(phi) + a1)^(1/(2k+2)),
    P(phi) = f(phi) / ((2k+2) (F(phi) + a1)^((2k+1)/(2k+2))).

k = 0 collapses to the quadratic transform r = sqrt(F + a1).

logsquare and exponential are only locally L-smooth; the steppers take a
user-supplied constant (default 2) and report the visited r-range so the
sampled Lipschitz bound can be checked after a run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .grid import Field
from .model import dpotential, potential


class AuxDomainError(ValueError):
    """An energy value left the valid branch of the auxiliary function."""


@dataclass(frozen=True)
class ConvexAux:
    """A convex increasing auxiliary function c with derivative and inverse.

    cinv inverts c on its increasing branch [domain_lo, inf); lipschitz is
    the constant bounding |c'(x) - c'(y)| / |x - y| there (for the locally
    smooth families it is the conventional value used by the steppers, not
    a global bound).
    """

    name: str
    c: Callable[[np.ndarray], np.ndarray]
    cprime: Callable[[np.ndarray], np.ndarray]
    cinv: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    domain_lo: float

    def check_invertible(self, y: np.ndarray, context: str = ""):
        """Raise AuxDomainError naming the first bad node if y is outside c's range."""
        bad = ~np.isfinite(y) | (y <= self._range_lo())
        if np.any(bad):
            idx = int(np.argmax(bad))
            raise AuxDomainError(
                f"{context or 'value'} {y.flat[idx]!r} at node {idx} is outside "
                f"the invertible range of c={self.name}"
            )

    def _range_lo(self) -> float:
        # c evaluated at the left end of the branch; values at or below it
        # cannot be inverted.
        if math.isinf(self.domain_lo):
            return 0.0  # softplus: c > 0 on R
        return float(self.c(np.asarray(self.domain_lo)))


@dataclass(frozen=True)
class MonoAux:
    """Odd-monomial multiplier family g(r) = r^(2k+1)."""

    k: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"monomial index must be nonnegative, got {self.k}")

    @property
    def exponent(self) -> int:
        return 2 * self.k + 1

    def g(self, r):
        return np.power(r, self.exponent)

    def gprime(self, r):
        return float(self.exponent) * np.power(r, 2 * self.k)


def _softplus(r):
    return np.logaddexp(0.0, r)


def _softplus_inv(y):
    # ln(e^y - 1): log(expm1(y)) overflows for large y, so switch to the
    # asymptotic form y + log(1 - e^-y) there.
    arr = np.atleast_1d(np.asarray(y, dtype=np.float64))
    out = np.empty_like(arr)
    big = arr > 30.0
    out[big] = arr[big] + np.log1p(-np.exp(-arr[big]))
    out[~big] = np.log(np.expm1(arr[~big]))
    return out.reshape(np.shape(y))


_BUILTINS: dict[str, ConvexAux] = {
    "quadratic": ConvexAux(
        name="quadratic",
        c=lambda r: np.square(r),
        cprime=lambda r: 2.0 * r,
        cinv=np.sqrt,
        lipschitz=2.0,
        domain_lo=0.0,
    ),
    "softplus": ConvexAux(
        name="softplus",
        c=_softplus,
        cprime=special.expit,
        cinv=_softplus_inv,
        lipschitz=0.25,
        domain_lo=-math.inf,
    ),
    "logsquare": ConvexAux(
        name="logsquare",
        c=lambda r: np.square(np.log(r)),
        cprime=lambda r: 2.0 * np.log(r) / r,
        cinv=lambda y: np.exp(np.sqrt(y)),
        lipschitz=2.0,
        domain_lo=1.0,
    ),
    "exponential": ConvexAux(
        name="exponential",
        c=np.exp,
        cprime=np.exp,
        cinv=np.log,
        lipschitz=2.0,
        domain_lo=-math.inf,
    ),
}


def builtin_convex(name: str) -> ConvexAux:
    """Look up a builtin convex family by name."""
    try:
        return _BUILTINS[name]
    except KeyError:
        raise ValueError(
            f"unknown auxiliary function {name!r}; "
            f"choose from {sorted(_BUILTINS)} or 'monomial:k=<int>'"
        ) from None


def parse_aux(spec: str):
    """Parse an auxiliary-family name: a builtin or 'monomial:k=<int>'."""
    if spec.startswith("monomial:"):
        tail = spec.split(":", 1)[1]
        if not tail.startswith("k="):
            raise ValueError(f"monomial family must be written 'monomial:k=<int>', got {spec!r}")
        return MonoAux(k=int(tail[2:]))
    return builtin_convex(spec)


def aux_name(aux) -> str:
    """Config-file spelling of an auxiliary family."""
    if isinstance(aux, MonoAux):
        return f"monomial:k={aux.k}"
    return aux.name


def r_of_phi(phi: Field, aux: ConvexAux, a1: float) -> Field:
    """Nodewise r = c^{-1}(F(phi) + a1) on the increasing branch of c."""
    y = potential(phi.values) + a1
    aux.check_invertible(y, context="F(phi)+a1 =")
    return Field(phi.grid, aux.cinv(y))


def p_of_phi(phi: Field, aux: ConvexAux, a1: float) -> Field:
    """Nodewise P = dr/dphi = f(phi) / c'(r(phi))."""
    y = potential(phi.values) + a1
    aux.check_invertible(y, context="F(phi)+a1 =")
    cp = aux.cprime(aux.cinv(y))
    if np.any(cp == 0.0) or not np.all(np.isfinite(cp)):
        idx = int(np.argmax((cp == 0.0) | ~np.isfinite(cp)))
        raise AuxDomainError(
            f"c'({aux.name}) vanishes or blows up at node {idx}; "
            "the pointwise transform P is singular there"
        )
    return Field(phi.grid, dpotential(phi.values) / cp)


def r_of_phi_mono(phi: Field, mono: MonoAux, a1: float) -> Field:
    """Nodewise r = (F(phi) + a1)^(1/(2k+2)); requires F + a1 > 0."""
    y = potential(phi.values) + a1
    if np.any(y <= 0.0):
        idx = int(np.argmax(y <= 0.0))
        raise AuxDomainError(
            f"F(phi)+a1 = {y[idx]!r} at node {idx} is not positive; "
            "the monomial transform needs a positive radicand"
        )
    return Field(phi.grid, np.power(y, 1.0 / (2 * mono.k + 2)))


def p_of_phi_mono(phi: Field, mono: MonoAux, a1: float) -> Field:
    """Nodewise P = f(phi) / ((2k+2) (F(phi) + a1)^((2k+1)/(2k+2)))."""
    y = potential(phi.values) + a1
    if np.any(y <= 0.0):
        idx = int(np.argmax(y <= 0.0))
        raise AuxDomainError(
            f"F(phi)+a1 = {y[idx]!r} at node {idx} is not positive; "
            "the monomial transform needs a positive radicand"
        )
    denom = (2 * mono.k + 2) * np.power(y, (2 * mono.k + 1) / (2 * mono.k + 2))
    return Field(phi.grid, dpotential(phi.values) / denom)
