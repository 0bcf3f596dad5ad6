import numpy as np
import pytest
import scipy.sparse as sp

from gradflow.auxfun import builtin_convex
from gradflow.grid import Field
from gradflow.linalg import LinearSystem, SolverError, SparseMatrix, matvec, residual_norm, solve
from gradflow.model import ModelParams
from gradflow.schemes import SchemeConfig, SchemeKind, assemble_iec_system, init_state

import oracles


def _identity_system(n, rhs):
    return LinearSystem(SparseMatrix.from_scipy(sp.identity(n)), np.asarray(rhs, dtype=float))


def test_solve_identity():
    b = np.arange(1.0, 6.0)
    assert np.array_equal(solve(_identity_system(5, b)), b)


def test_solve_diagonal():
    m = SparseMatrix.from_scipy(sp.diags([2.0] * 6))
    x = solve(LinearSystem(m, np.full(6, 4.0)))
    assert np.allclose(x, 2.0, atol=1e-14)


def test_solve_matches_dense_oracle_on_iec_block(grid4, params_ac):
    config = SchemeConfig(
        scheme=SchemeKind.IEC, aux=builtin_convex("quadratic"), dt=0.1, params=params_ac
    )
    phi0 = Field.from_function(grid4, lambda x, y: np.sin(x))
    state = init_state(phi0, config)
    system = assemble_iec_system(state, config)
    x = solve(system)
    dense = system.matrix.to_scipy().toarray()
    expected = np.linalg.solve(dense, system.rhs)
    assert np.max(np.abs(x - expected)) < 1e-10


def test_solve_residual_contract(grid4, params_ch):
    config = SchemeConfig(
        scheme=SchemeKind.IEC, aux=builtin_convex("softplus"), dt=0.01, params=params_ch
    )
    phi0 = Field.from_function(grid4, lambda x, y: np.sin(x) * np.cos(y))
    system = assemble_iec_system(init_state(phi0, config), config)
    x = solve(system, tol=1e-10)
    assert residual_norm(system, x) <= 1e-10


def test_solve_determinism():
    rng = np.random.default_rng(3)
    a = sp.random(50, 50, density=0.2, random_state=7) + sp.identity(50) * 5.0
    system = LinearSystem(SparseMatrix.from_scipy(a), rng.uniform(-1, 1, 50))
    x1 = solve(system)
    x2 = solve(system)
    assert np.array_equal(x1, x2)


def test_solve_singular_fails():
    a = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SolverError):
        solve(LinearSystem(SparseMatrix.from_scipy(a), np.array([1.0, 1.0])))


def test_solve_rejects_bad_tolerance():
    with pytest.raises(ValueError):
        solve(_identity_system(3, np.ones(3)), tol=0.0)


def test_matvec_identity_and_zero():
    x = np.arange(4.0)
    assert np.array_equal(matvec(SparseMatrix.from_scipy(sp.identity(4)), x), x)
    zero = SparseMatrix.from_scipy(sp.csr_matrix((4, 4)))
    assert np.array_equal(matvec(zero, x), np.zeros(4))


def test_matvec_matches_dense(rng):
    dense = rng.uniform(-1, 1, (10, 10)) * (rng.uniform(0, 1, (10, 10)) > 0.6)
    m = SparseMatrix.from_scipy(sp.csr_matrix(dense))
    x = rng.uniform(-1, 1, 10)
    assert np.max(np.abs(matvec(m, x) - dense @ x)) < 1e-13


def test_matvec_dimension_mismatch():
    m = SparseMatrix.from_scipy(sp.identity(4))
    with pytest.raises(ValueError):
        matvec(m, np.ones(5))


def test_sparse_matrix_validation():
    m = SparseMatrix.from_scipy(sp.random(20, 20, density=0.3, random_state=1))
    m.validate()

    bad = SparseMatrix(
        nrows=2,
        ncols=2,
        indptr=np.array([0, 1, 2]),
        indices=np.array([0, 5]),  # out of bounds
        data=np.array([1.0, 1.0]),
    )
    with pytest.raises(ValueError):
        bad.validate()

    nonfinite = SparseMatrix(
        nrows=2,
        ncols=2,
        indptr=np.array([0, 1, 2]),
        indices=np.array([0, 1]),
        data=np.array([1.0, np.inf]),
    )
    with pytest.raises(ValueError):
        nonfinite.validate()


def test_linear_system_shape_checks():
    m = SparseMatrix.from_scipy(sp.identity(3))
    with pytest.raises(ValueError):
        LinearSystem(m, np.ones(4))
    rect = SparseMatrix.from_scipy(sp.csr_matrix(np.ones((2, 3))))
    with pytest.raises(ValueError):
        LinearSystem(rect, np.ones(2))


def test_block_system_structure_matches_dense_oracle(grid4, params_ac):
    # assembled blocks equal the oracle's dense layout entry by entry
    config = SchemeConfig(
        scheme=SchemeKind.IEC, aux=builtin_convex("quadratic"), dt=0.1,
        params=params_ac, alpha=1.0,
    )
    phi0 = Field.from_function(grid4, lambda x, y: np.sin(x))
    state = init_state(phi0, config)
    system = assemble_iec_system(state, config)

    phi, r = phi0.values, state.r.values
    _, mu_o, _ = oracles.dense_iec_step(
        phi, r, "allen-cahn", params_ac.m, params_ac.epsilon,
        0.1, 1.0, 2.0, params_ac.a1, "quadratic",
    )
    x = solve(system)
    n = grid4.num_nodes
    assert np.max(np.abs(x[n : 2 * n] - mu_o)) < 1e-10
