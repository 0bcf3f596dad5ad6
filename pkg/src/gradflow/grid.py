"""Uniform periodic 2-D grid with second-order finite-difference operators.

The computational domain is the square [0, lx) x [0, ly) with periodic
boundary conditions, discretized by nx x ny nodes at (i*hx, j*hy).  Nodal
fields are stored flat in row-major order: node (i, j) lives at index
j*nx + i.  This ordering is normative; sparse operators and snapshot files
depend on it.

Discrete operators:

  * laplacian      -- classical 5-point stencil with periodic wrap,
                      (f[i+1,j] + f[i-1,j] - 2 f[i,j]) / hx^2 + (y analogue).
  * grad_sq_norm   -- squared L2 norm of the forward-difference gradient.
  * inner          -- discrete L2 inner product, sum(f * g) * hx * hy.
  * integrate      -- discrete integral, sum(f) * hx * hy.

The forward-difference gradient and the 5-point Laplacian are compatible
under summation by parts: grad_sq_norm(f) == -inner(f, laplacian(f)) up to
rounding, which is what makes the discrete energy estimates of the time
steppers exact rather than approximate.

Reductions use NumPy's pairwise summation, so results are reproducible to
better than 1e-13 relative across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

TWO_PI = 2.0 * math.pi


class GridMismatchError(ValueError):
    """Raised when a binary operation receives fields on different grids."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [0, lx) x [0, ly).

    nx, ny are node counts (>= 4 so the 5-point stencil never self-wraps
    onto the center node twice); hx = lx/nx and hy = ly/ny.
    """

    nx: int
    ny: int
    lx: float = TWO_PI
    ly: float = TWO_PI

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid must be at least 4x4, got {self.nx}x{self.ny}")
        if self.lx <= 0 or self.ly <= 0:
            raise ValueError("domain lengths must be positive")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def num_nodes(self) -> int:
        return self.nx * self.ny

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates as (ny, nx) arrays X, Y with X[j, i] = i*hx."""
        x = np.arange(self.nx) * self.hx
        y = np.arange(self.ny) * self.hy
        return np.meshgrid(x, y, indexing="xy")


@dataclass(frozen=True)
class Field:
    """Nodal scalar field, flat row-major storage (node (i,j) at j*nx+i)."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.shape != (self.grid.num_nodes,):
            raise ValueError(
                f"field length {vals.size} does not match grid "
                f"{self.grid.nx}x{self.grid.ny}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def as_2d(self) -> np.ndarray:
        """(ny, nx) view; entry [j, i] is the value at node (i, j)."""
        return self.values.reshape(self.grid.ny, self.grid.nx)

    @classmethod
    def from_2d(cls, grid: GridSpec, arr: np.ndarray) -> "Field":
        return cls(grid, np.asarray(arr, dtype=np.float64).reshape(-1))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "Field":
        return cls(grid, np.zeros(grid.num_nodes))

    @classmethod
    def full(cls, grid: GridSpec, value: float) -> "Field":
        return cls(grid, np.full(grid.num_nodes, float(value)))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "Field":
        """Sample fn(X, Y) at the nodes; fn must accept array arguments."""
        xx, yy = grid.coords()
        return cls.from_2d(grid, np.asarray(fn(xx, yy), dtype=np.float64))


def _check_same_grid(f: Field, g: Field):
    if f.grid != g.grid:
        raise GridMismatchError(f"grids differ: {f.grid} vs {g.grid}")


def laplacian_2d(grid: GridSpec, arr: np.ndarray) -> np.ndarray:
    """5-point periodic Laplacian applied to a (ny, nx) array."""
    out = (np.roll(arr, -1, axis=1) + np.roll(arr, 1, axis=1) - 2.0 * arr) / grid.hx**2
    out += (np.roll(arr, -1, axis=0) + np.roll(arr, 1, axis=0) - 2.0 * arr) / grid.hy**2
    return out


def laplacian(f: Field) -> Field:
    """Discrete Laplacian; annihilates constants, sums to zero over the grid."""
    return Field.from_2d(f.grid, laplacian_2d(f.grid, f.as_2d()))


def inner(f: Field, g: Field) -> float:
    """Discrete L2 inner product sum(f*g)*hx*hy; symmetric, positive on f=g."""
    _check_same_grid(f, g)
    return float(np.sum(f.values * g.values)) * f.grid.hx * f.grid.hy


def grad_sq_norm(f: Field) -> float:
    """Squared norm of the forward-difference gradient with periodic wrap.

    Satisfies the summation-by-parts identity
    grad_sq_norm(f) == -inner(f, laplacian(f)) to rounding.
    """
    a = f.as_2d()
    dx = (np.roll(a, -1, axis=1) - a) / f.grid.hx
    dy = (np.roll(a, -1, axis=0) - a) / f.grid.hy
    return float(np.sum(dx * dx) + np.sum(dy * dy)) * f.grid.hx * f.grid.hy


def integrate(f: Field) -> float:
    """Discrete integral over the periodic domain, sum(f)*hx*hy."""
    return float(np.sum(f.values)) * f.grid.hx * f.grid.hy


def laplacian_matrix(grid: GridSpec) -> sp.csr_matrix:
    """Sparse CSR matrix of the 5-point periodic Laplacian.

    Acts on flat row-major fields; built from circulant second-difference
    blocks so that matrix @ f.values == laplacian(f).values to rounding.
    """
    def second_diff(n: int, h: float) -> sp.csr_matrix:
        main = -2.0 * np.ones(n)
        off = np.ones(n - 1)
        d = sp.diags([off, main, off], offsets=[-1, 0, 1], format="lil")
        d[0, n - 1] = 1.0
        d[n - 1, 0] = 1.0
        return (d / h**2).tocsr()

    dxx = second_diff(grid.nx, grid.hx)
    dyy = second_diff(grid.ny, grid.hy)
    ix = sp.identity(grid.nx, format="csr")
    iy = sp.identity(grid.ny, format="csr")
    return (sp.kron(iy, dxx) + sp.kron(dyy, ix)).tocsr()


def write_snapshot(path, f: Field, t: float):
    """Write a field snapshot as text.

    Line 1 is "nx ny t"; the following nx*ny lines hold one value each in
    row-major order, printed with 17 significant digits so that reading the
    file back reproduces the float64 values bitwise.
    """
    lines = [f"{f.grid.nx} {f.grid.ny} {t:.17g}"]
    lines.extend(f"{v:.17g}" for v in f.values)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_snapshot(path, lx: float = TWO_PI, ly: float = TWO_PI) -> tuple[Field, float]:
    """Read a snapshot written by write_snapshot; returns (field, time)."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"malformed snapshot header in {path}")
        nx, ny, t = int(header[0]), int(header[1]), float(header[2])
        values = np.loadtxt(fh, dtype=np.float64)
    grid = GridSpec(nx=nx, ny=ny, lx=lx, ly=ly)
    if values.size != grid.num_nodes:
        raise ValueError(
            f"snapshot {path} holds {values.size} values, expected {grid.num_nodes}"
        )
    return Field(grid, values), t
