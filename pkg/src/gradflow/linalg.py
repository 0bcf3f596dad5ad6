"""Sparse matrices and the per-step linear-solve contract.

The implicit steppers produce one sparse block system per time step.  The
blocks couple a Laplacian to pointwise-multiplication diagonals, so the
operator is structurally nonsymmetric; it is solved by a sparse LU
factorization (SuperLU via SciPy), which is deterministic and comfortably
inside the residual contract for systems of this size (a 40x40 grid gives
4800-6400 unknowns).

Every accepted solution x satisfies ||A x - b||_2 <= tol * max(1, ||b||_2);
a solve that cannot reach that after iterative refinement raises
SolverError carrying the achieved residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    """Linear solve failed (singular matrix or residual contract violated)."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SparseMatrix:
    """Compressed-sparse-row matrix (row offsets, column indices, values)."""

    nrows: int
    ncols: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @classmethod
    def from_scipy(cls, m) -> "SparseMatrix":
        csr = sp.csr_matrix(m)
        csr.sort_indices()
        csr.sum_duplicates()
        return cls(
            nrows=csr.shape[0],
            ncols=csr.shape[1],
            indptr=csr.indptr.copy(),
            indices=csr.indices.copy(),
            data=csr.data.copy(),
        )

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.data, self.indices, self.indptr), shape=(self.nrows, self.ncols)
        )

    def validate(self):
        """Check CSR structure: sorted in-bounds columns, finite values."""
        if len(self.indptr) != self.nrows + 1:
            raise ValueError("indptr length must be nrows + 1")
        if self.indptr[0] != 0 or self.indptr[-1] != len(self.indices):
            raise ValueError("indptr must start at 0 and end at nnz")
        if np.any(np.diff(self.indptr) < 0):
            raise ValueError("indptr must be nondecreasing")
        if len(self.indices) and (
            self.indices.min() < 0 or self.indices.max() >= self.ncols
        ):
            raise ValueError("column index out of bounds")
        for row in range(self.nrows):
            cols = self.indices[self.indptr[row] : self.indptr[row + 1]]
            if np.any(np.diff(cols) <= 0):
                raise ValueError(f"columns not strictly increasing in row {row}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("matrix contains non-finite values")


@dataclass(frozen=True)
class LinearSystem:
    """One implicit step: sparse operator plus right-hand side."""

    matrix: SparseMatrix
    rhs: np.ndarray

    def __post_init__(self):
        if self.matrix.nrows != self.matrix.ncols:
            raise ValueError("system matrix must be square")
        if len(self.rhs) != self.matrix.nrows:
            raise ValueError(
                f"rhs length {len(self.rhs)} != matrix size {self.matrix.nrows}"
            )


def matvec(m: SparseMatrix, x: np.ndarray) -> np.ndarray:
    """y = M x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (m.ncols,):
        raise ValueError(f"vector length {x.shape} incompatible with {m.nrows}x{m.ncols}")
    return m.to_scipy() @ x


def residual_norm(system: LinearSystem, x: np.ndarray) -> float:
    """||A x - b||_2 / max(1, ||b||_2) for a candidate solution."""
    r = matvec(system.matrix, x) - system.rhs
    return float(np.linalg.norm(r)) / max(1.0, float(np.linalg.norm(system.rhs)))


def solve(system: LinearSystem, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Solve A x = b by sparse LU with iterative refinement.

    Returns x with ||A x - b|| <= tol * max(1, ||b||); deterministic for
    identical inputs (fixed column ordering, single-threaded factorization).
    max_iter caps the refinement sweeps (direct solves rarely need any).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = system.matrix.to_scipy().tocsc()
    b = np.asarray(system.rhs, dtype=np.float64)
    try:
        lu = spla.splu(a)
        x = lu.solve(b)
    except RuntimeError as exc:  # SuperLU signals singularity this way
        raise SolverError(f"factorization failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("solver produced non-finite values")
    scale = max(1.0, float(np.linalg.norm(b)))
    resid = np.linalg.norm(a @ x - b) / scale
    sweeps = 0
    while resid > tol and sweeps < min(max_iter, 5):
        x = x + lu.solve(b - a @ x)
        resid = np.linalg.norm(a @ x - b) / scale
        sweeps += 1
    if resid > tol or not np.isfinite(resid):
        raise SolverError(
            f"residual {resid:.3e} above tolerance {tol:.1e} after {sweeps} refinements",
            residual=float(resid),
        )
    return x
