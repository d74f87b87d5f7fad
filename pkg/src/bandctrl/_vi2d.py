"""Assembly helpers for the 2-D variational-inequality solver.

Branches: interior PDE row (inner nodes, central stencils, tilted seven-point
cross term), four one-sided gradient rows, and a diagonal-invariance row
u(i,j) = u(i+1,j+1) available on the truncation ring when the running cost
depends on x1 - x2 only.  The diagonal row closes the domain where the
continuation region is an unbounded strip along the diagonal and would
otherwise be cut by the truncation.
"""

import numpy as np
from scipy import sparse

INTERIOR = 0
GRAD_X_UP = 1   # d1 u = L1 K1-
GRAD_X_DN = 2   # -d1 u = L1 K1+
GRAD_Y_UP = 3
GRAD_Y_DN = 4
DIAG = 5

_NEG = -1e300


def diagonal_neighbor(i, j, n1, n2):
    """Inward neighbor along the (1,1) direction for a ring node, or None."""
    if i == 0 or j == 0:
        if i + 1 <= n1 - 1 and j + 1 <= n2 - 1:
            return i + 1, j + 1
        return None
    if i == n1 - 1 or j == n2 - 1:
        if i - 1 >= 0 and j - 1 >= 0:
            return i - 1, j - 1
        return None
    return None


def is_diagonal_invariant(Hv, rtol=1e-12):
    scale = 1.0 + float(np.max(np.abs(Hv)))
    return bool(np.max(np.abs(Hv[1:, 1:] - Hv[:-1, :-1])) <= rtol * scale)


def gradient_residuals(u2, g, dx):
    """Residuals of the four gradient branches (one-sided toward the interior)."""
    n1, n2 = u2.shape
    r = np.full((4, n1, n2), _NEG)
    r[0, 1:, :] = (u2[1:, :] - u2[:-1, :]) / dx - g[0, 0]      # GRAD_X_UP
    r[1, :-1, :] = -(u2[1:, :] - u2[:-1, :]) / dx - g[0, 1]    # GRAD_X_DN
    r[2, :, 1:] = (u2[:, 1:] - u2[:, :-1]) / dx - g[1, 0]      # GRAD_Y_UP
    r[3, :, :-1] = -(u2[:, 1:] - u2[:, :-1]) / dx - g[1, 1]    # GRAD_Y_DN
    return r


def interior_residual(u2, Hv, rho, mu, a11, a22, a12, dx):
    """rho u - L u - H on inner nodes (ring stays _NEG)."""
    n1, n2 = u2.shape
    out = np.full((n1, n2), _NEG)
    inner = np.s_[1:-1, 1:-1]
    d11 = (u2[2:, 1:-1] - 2 * u2[1:-1, 1:-1] + u2[:-2, 1:-1]) / dx**2
    d22 = (u2[1:-1, 2:] - 2 * u2[1:-1, 1:-1] + u2[1:-1, :-2]) / dx**2
    if a12 > 0:
        d12 = (u2[2:, 2:] + u2[:-2, :-2] + 2 * u2[1:-1, 1:-1]
               - u2[2:, 1:-1] - u2[:-2, 1:-1] - u2[1:-1, 2:] - u2[1:-1, :-2]) / (2 * dx**2)
    elif a12 < 0:
        d12 = -(u2[2:, :-2] + u2[:-2, 2:] + 2 * u2[1:-1, 1:-1]
                - u2[2:, 1:-1] - u2[:-2, 1:-1] - u2[1:-1, 2:] - u2[1:-1, :-2]) / (2 * dx**2)
    else:
        d12 = 0.0
    if mu[0] >= 0:
        d1 = (u2[2:, 1:-1] - u2[1:-1, 1:-1]) / dx
    else:
        d1 = (u2[1:-1, 1:-1] - u2[:-2, 1:-1]) / dx
    if mu[1] >= 0:
        d2 = (u2[1:-1, 2:] - u2[1:-1, 1:-1]) / dx
    else:
        d2 = (u2[1:-1, 1:-1] - u2[1:-1, :-2]) / dx
    out[inner] = (rho * u2[inner] - mu[0] * d1 - mu[1] * d2
                  - a11 * d11 - a22 * d22 - a12 * d12 - Hv[inner])
    return out


def assemble_system(policy, Hv, g, rho, mu, a11, a22, a12, dx):
    n1, n2 = policy.shape
    idx = np.arange(n1 * n2).reshape(n1, n2)
    rows, cols, vals = [], [], []
    rhs = np.zeros(n1 * n2)

    def put(rr, cc, vv):
        rows.append(rr)
        cols.append(cc)
        vals.append(np.broadcast_to(vv, rr.shape).astype(float))

    m_int = policy == INTERIOR
    if np.any(m_int[0, :]) or np.any(m_int[-1, :]) or \
       np.any(m_int[:, 0]) or np.any(m_int[:, -1]):
        raise ValueError("interior branch is confined to inner nodes")
    ii, jj = np.nonzero(m_int)
    r = idx[ii, jj]
    s = 1.0 / dx**2
    put(r, r, rho + 2 * (a11 + a22) * s - abs(a12) * s
        + (abs(mu[0]) + abs(mu[1])) / dx)
    put(r, idx[ii + 1, jj], -a11 * s + 0.5 * abs(a12) * s
        - (mu[0] / dx if mu[0] > 0 else 0.0))
    put(r, idx[ii - 1, jj], -a11 * s + 0.5 * abs(a12) * s
        + (mu[0] / dx if mu[0] < 0 else 0.0))
    put(r, idx[ii, jj + 1], -a22 * s + 0.5 * abs(a12) * s
        - (mu[1] / dx if mu[1] > 0 else 0.0))
    put(r, idx[ii, jj - 1], -a22 * s + 0.5 * abs(a12) * s
        + (mu[1] / dx if mu[1] < 0 else 0.0))
    if a12 > 0:
        put(r, idx[ii + 1, jj + 1], -0.5 * a12 * s)
        put(r, idx[ii - 1, jj - 1], -0.5 * a12 * s)
    elif a12 < 0:
        put(r, idx[ii + 1, jj - 1], 0.5 * a12 * s)
        put(r, idx[ii - 1, jj + 1], 0.5 * a12 * s)
    rhs[r] = Hv[ii, jj]

    for br, (oi, oj), rv in (
            (GRAD_X_UP, (-1, 0), g[0, 0]),
            (GRAD_X_DN, (1, 0), g[0, 1]),
            (GRAD_Y_UP, (0, -1), g[1, 0]),
            (GRAD_Y_DN, (0, 1), g[1, 1])):
        ii, jj = np.nonzero(policy == br)
        if len(ii):
            r = idx[ii, jj]
            put(r, r, 1.0 / dx)
            put(r, idx[ii + oi, jj + oj], -1.0 / dx)
            rhs[r] = rv

    ii, jj = np.nonzero(policy == DIAG)
    for i, j in zip(ii, jj):
        nb = diagonal_neighbor(i, j, n1, n2)
        if nb is None:
            raise ValueError(f"diagonal closure unavailable at ring node ({i}, {j})")
        rows.append(np.array([idx[i, j], idx[i, j]]))
        cols.append(np.array([idx[i, j], idx[nb]]))
        vals.append(np.array([1.0 / dx, -1.0 / dx]))
        rhs[idx[i, j]] = 0.0

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sparse.csc_matrix((vals, (rows, cols)), shape=(n1 * n2, n1 * n2)), rhs
