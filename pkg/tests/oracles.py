"""Independent reference implementations used to check the library.

Everything here is written directly from the mathematical definitions with
plain loops and dense linear algebra (or a self-contained sparse driver for
the long quadratized-scheme runs), deliberately avoiding the library's own
operator and assembly code paths.
"""

import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


def dense_laplacian(nx, ny, hx, hy):
    """N x N dense 5-point periodic Laplacian from the stencil definition."""
    n = nx * ny
    mat = np.zeros((n, n))
    for j in range(ny):
        for i in range(nx):
            row = j * nx + i
            mat[row, row] += -2.0 / hx**2 - 2.0 / hy**2
            mat[row, j * nx + (i + 1) % nx] += 1.0 / hx**2
            mat[row, j * nx + (i - 1) % nx] += 1.0 / hx**2
            mat[row, ((j + 1) % ny) * nx + i] += 1.0 / hy**2
            mat[row, ((j - 1) % ny) * nx + i] += 1.0 / hy**2
    return mat


def dense_flow(flow, m, nx, ny, hx, hy):
    if flow == "allen-cahn":
        return -m * np.eye(nx * ny)
    return m * dense_laplacian(nx, ny, hx, hy)


def double_well(phi):
    return 0.25 * (phi**2 - 1.0) ** 2


def double_well_prime(phi):
    return phi**3 - phi


def free_energy_direct(values2d, hx, hy, epsilon):
    """Direct-summation free energy with forward differences."""
    ny, nx = values2d.shape
    total = 0.0
    for j in range(ny):
        for i in range(nx):
            v = values2d[j, i]
            dx = (values2d[j, (i + 1) % nx] - v) / hx
            dy = (values2d[(j + 1) % ny, i] - v) / hy
            total += (0.5 * epsilon**2 * (dx * dx + dy * dy) + double_well(v)) * hx * hy
    return total


# Pointwise auxiliary transforms written out per family.

def quad_transform(phi, a1):
    y = double_well(phi) + a1
    r = np.sqrt(y)
    cprime_at_r = 2.0 * r
    p = double_well_prime(phi) / cprime_at_r
    return r, p


def softplus_transform(phi, a1):
    y = double_well(phi) + a1
    r = np.log(np.expm1(y))
    p = double_well_prime(phi) * np.exp(y) / np.expm1(y)
    return r, p


def softplus_cprime(r):
    return np.exp(r) / (1.0 + np.exp(r))


def mono_transform(phi, k, a1):
    y = double_well(phi) + a1
    r = y ** (1.0 / (2 * k + 2))
    p = double_well_prime(phi) / ((2 * k + 2) * y ** ((2 * k + 1) / (2 * k + 2)))
    return r, p


def dense_iec_step(phi, r, flow, m, epsilon, dt, alpha, lsmooth, a1, family, src=None):
    """One convexified step via a dense 3N x 3N Gaussian elimination.

    family is "quadratic" or "softplus"; the transforms and c' are written
    inline above.  Returns (phi_new, mu_new, r_new).
    """
    nx = ny = int(math.isqrt(len(phi)))
    hx = hy = 2.0 * math.pi / nx
    n = nx * ny
    lap = dense_laplacian(nx, ny, hx, hy)
    gop = dense_flow(flow, m, nx, ny, hx, hy)
    eye = np.eye(n)

    if family == "quadratic":
        _, p = quad_transform(phi, a1)
        cpr_rn = 2.0 * r
    else:
        _, p = softplus_transform(phi, a1)
        cpr_rn = softplus_cprime(r)
    al = alpha * lsmooth

    a = np.zeros((3 * n, 3 * n))
    a[0:n, 0:n] = eye / dt
    a[0:n, n : 2 * n] = -gop
    a[n : 2 * n, 0:n] = epsilon**2 * lap
    a[n : 2 * n, n : 2 * n] = eye
    a[n : 2 * n, 2 * n :] = -al * np.diag(p)
    a[2 * n :, 0:n] = -np.diag(p)
    a[2 * n :, 2 * n :] = eye

    b = np.concatenate([phi / dt, cpr_rn * p - al * r * p, r - p * phi])
    if src is not None:
        b[:n] += src
    x = np.linalg.solve(a, b)
    return x[:n], x[n : 2 * n], x[2 * n :]


def dense_ief_step(phi, r, g, flow, m, epsilon, dt, k, a1, src=None):
    """One functionalized step via a dense 4N x 4N Gaussian elimination."""
    nx = ny = int(math.isqrt(len(phi)))
    hx = hy = 2.0 * math.pi / nx
    n = nx * ny
    lap = dense_laplacian(nx, ny, hx, hy)
    gop = dense_flow(flow, m, nx, ny, hx, hy)
    eye = np.eye(n)

    _, p = mono_transform(phi, k, a1)
    gp = (2 * k + 1) * r ** (2 * k)

    a = np.zeros((4 * n, 4 * n))
    a[0:n, 0:n] = eye / dt
    a[0:n, n : 2 * n] = -gop
    a[n : 2 * n, 0:n] = epsilon**2 * lap
    a[n : 2 * n, n : 2 * n] = eye
    a[n : 2 * n, 2 * n : 3 * n] = -np.diag(gp * p)
    a[n : 2 * n, 3 * n :] = -np.diag(p)
    a[2 * n : 3 * n, 0:n] = -np.diag(p)
    a[2 * n : 3 * n, 2 * n : 3 * n] = eye
    a[3 * n :, 2 * n : 3 * n] = -np.diag(gp)
    a[3 * n :, 3 * n :] = eye

    b = np.concatenate([phi / dt, np.zeros(n), r - p * phi, g - gp * r])
    if src is not None:
        b[:n] += src
    x = np.linalg.solve(a, b)
    return x[:n], x[n : 2 * n], x[2 * n : 3 * n], x[3 * n :]


def ieq_step_dense(phi, r, flow, m, epsilon, dt, a1, src=None):
    """One classical quadratized-auxiliary step (dense).

    mu^{n+1} = -eps^2 lap phi^{n+1} + 2 r^{n+1} P^n with
    P^n = f(phi^n) / (2 sqrt(F(phi^n) + a1)).
    """
    nx = ny = int(math.isqrt(len(phi)))
    hx = hy = 2.0 * math.pi / nx
    n = nx * ny
    lap = dense_laplacian(nx, ny, hx, hy)
    gop = dense_flow(flow, m, nx, ny, hx, hy)
    eye = np.eye(n)
    _, p = quad_transform(phi, a1)

    a = np.zeros((3 * n, 3 * n))
    a[0:n, 0:n] = eye / dt
    a[0:n, n : 2 * n] = -gop
    a[n : 2 * n, 0:n] = epsilon**2 * lap
    a[n : 2 * n, n : 2 * n] = eye
    a[n : 2 * n, 2 * n :] = -2.0 * np.diag(p)
    a[2 * n :, 0:n] = -np.diag(p)
    a[2 * n :, 2 * n :] = eye

    b = np.concatenate([phi / dt, np.zeros(n), r - p * phi])
    if src is not None:
        b[:n] += src
    x = np.linalg.solve(a, b)
    return x[:n], x[n : 2 * n], x[2 * n :]


def _sparse_periodic_laplacian(nx, ny, hx, hy):
    def second_diff(nn, h):
        rows, cols, vals = [], [], []
        for i in range(nn):
            rows += [i, i, i]
            cols += [i, (i + 1) % nn, (i - 1) % nn]
            vals += [-2.0 / h**2, 1.0 / h**2, 1.0 / h**2]
        return sp.csr_matrix((vals, (rows, cols)), shape=(nn, nn))

    return sp.kron(sp.identity(ny), second_diff(nx, hx)) + sp.kron(
        second_diff(ny, hy), sp.identity(nx)
    )


def ieq_accuracy_error(nx, dt, t_end, m=0.6, epsilon=0.4, a1=1.0):
    """L2 error of the quadratized stepper on the forced L2-flow problem.

    Self-contained sparse driver: reference state sin(x)cos(y)cos(t),
    analytic source S = phi_t + m*(2 eps^2 phi + phi^3 - phi) at t^{n+1}.
    """
    ny = nx
    hx = hy = 2.0 * math.pi / nx
    n = nx * ny
    x = np.arange(nx) * hx
    y = np.arange(ny) * hy
    xx, yy = np.meshgrid(x, y, indexing="xy")
    sincos = (np.sin(xx) * np.cos(yy)).reshape(-1)

    lap = _sparse_periodic_laplacian(nx, ny, hx, hy).tocsr()
    eye = sp.identity(n, format="csr")

    nsteps = round(t_end / dt)
    assert abs(nsteps * dt - t_end) < 1e-9
    phi = sincos * math.cos(0.0)
    r = np.sqrt(double_well(phi) + a1)

    for step_idx in range(nsteps):
        t_new = (step_idx + 1) * dt
        p = double_well_prime(phi) / (2.0 * np.sqrt(double_well(phi) + a1))
        src = -sincos * math.sin(t_new) + m * (
            2.0 * epsilon**2 * sincos * math.cos(t_new)
            + (sincos * math.cos(t_new)) ** 3
            - sincos * math.cos(t_new)
        )
        pdiag = sp.diags(p)
        a = sp.bmat(
            [
                [eye / dt, m * eye, None],
                [epsilon**2 * lap, eye, -2.0 * pdiag],
                [-pdiag, None, eye],
            ],
            format="csc",
        )
        b = np.concatenate([phi / dt + src, np.zeros(n), r - p * phi])
        sol = spla.splu(a).solve(b)
        phi, r = sol[:n], sol[2 * n :]

    diff = phi - sincos * math.cos(t_end)
    return math.sqrt(float(np.sum(diff * diff)) * hx * hy)


def sav_step_literal(phi, r_scalar, flow, m, epsilon, dt, a2):
    """One classical scalar-auxiliary step, transcribed as a dense system.

    Unknowns (phi, mu, r) with scalar r:
        phi/dt - G mu = phi^n/dt
        eps^2 lap phi + mu - f^n/sqrt(E1+a2) * r = 0
        -(1/(2 sqrt(E1+a2))) (f^n, .) phi + r = r^n - (...)(f^n, phi^n)
    """
    nx = ny = int(math.isqrt(len(phi)))
    hx = hy = 2.0 * math.pi / nx
    n = nx * ny
    w = hx * hy
    lap = dense_laplacian(nx, ny, hx, hy)
    gop = dense_flow(flow, m, nx, ny, hx, hy)
    eye = np.eye(n)

    f = double_well_prime(phi)
    e1 = float(np.sum(double_well(phi))) * w
    root = math.sqrt(e1 + a2)

    a = np.zeros((2 * n + 1, 2 * n + 1))
    a[0:n, 0:n] = eye / dt
    a[0:n, n : 2 * n] = -gop
    a[n : 2 * n, 0:n] = epsilon**2 * lap
    a[n : 2 * n, n : 2 * n] = eye
    a[n : 2 * n, 2 * n] = -f / root
    a[2 * n, 0:n] = -w * f / (2.0 * root)
    a[2 * n, 2 * n] = 1.0

    b = np.zeros(2 * n + 1)
    b[0:n] = phi / dt
    b[2 * n] = r_scalar - w * float(np.sum(f * phi)) / (2.0 * root)
    x = np.linalg.solve(a, b)
    return x[:n], x[n : 2 * n], float(x[2 * n])
