"""Finite-difference solver for the gradient-constrained HJB variational inequality.

Howard (policy) iteration over the branches of

    max{ rho u - mu u' - (sigma^2/2) u'' - h,  u' - K-,  -u' - K+ } = 0

in one dimension, and the analogous five-branch problem with the weighted
gradient bounds -L_i K_i^+ <= d_i u <= L_i K_i^- in two dimensions.  Each
policy induces a sparse linear system (central second differences, upwinded
drift, one-sided differences on the gradient branches) solved directly.

Truncation closure: gradient rows act as Neumann conditions with the exact
far-field slopes; in 1-D the edge nodes may instead select a one-sided
interior row, so problems whose continuation region never closes (constant
running cost) still solve to the flat solution with no active constraints.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from . import _vi2d
from .errors import BandCtrlError, BoundaryNotFoundError, ConvergenceError

__all__ = [
    "Grid1D",
    "Grid2D",
    "VISolution",
    "FreeBoundary1D",
    "solve_vi_1d",
    "solve_vi_2d",
    "extract_free_boundary",
    "antidiagonal_band_width",
]

# branch labels
INTERIOR = 0
GRAD_X_UP = 1    # d1 u = L1 K1-   (act by pushing x1 down)
GRAD_X_DN = 2    # d1 u = -L1 K1+
GRAD_Y_UP = 3
GRAD_Y_DN = 4
DIAG = 5      # ring closure u(i,j) = u(i+1,j+1) for diagonal-invariant costs

_NEG = -1e300    # sentinel for unavailable branches


@dataclass(frozen=True)
class Grid1D:
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if self.n < 5 or self.hi <= self.lo:
            raise ValueError("grid needs hi > lo and at least 5 nodes")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)


@dataclass(frozen=True)
class Grid2D:
    x: Grid1D
    y: Grid1D

    def __post_init__(self):
        if abs(self.x.dx - self.y.dx) > 1e-12 * max(self.x.dx, self.y.dx):
            raise ValueError("2-D solver requires equal spacing on both axes")

    @property
    def dx(self) -> float:
        return self.x.dx

    @classmethod
    def square(cls, lo, hi, n):
        g = Grid1D(lo, hi, n)
        return cls(x=g, y=g)


@dataclass
class VISolution:
    u: np.ndarray
    labels: np.ndarray
    xs: np.ndarray
    dim: int
    iterations: int
    converged: bool
    residual_history: list = field(default_factory=list)
    x2s: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else float("nan")


@dataclass(frozen=True)
class FreeBoundary1D:
    lower: Optional[float]
    upper: Optional[float]


# ---------------------------------------------------------------------------
# 1-D solver
# ---------------------------------------------------------------------------

def _residuals_1d(u, xs, hv, sigma, rho, K_plus, K_minus, mu):
    n = len(xs)
    dx = xs[1] - xs[0]
    du_b = np.empty(n)
    du_f = np.empty(n)
    du_b[1:] = (u[1:] - u[:-1]) / dx
    du_b[0] = _NEG
    du_f[:-1] = (u[1:] - u[:-1]) / dx
    du_f[-1] = _NEG

    d2u = np.empty(n)
    d2u[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / dx**2
    d2u[0] = (u[2] - 2 * u[1] + u[0]) / dx**2
    d2u[-1] = (u[-1] - 2 * u[-2] + u[-3]) / dx**2
    du_up = np.empty(n)
    if mu >= 0:
        du_up[:-1] = (u[1:] - u[:-1]) / dx
        du_up[-1] = (u[-1] - u[-2]) / dx
    else:
        du_up[1:] = (u[1:] - u[:-1]) / dx
        du_up[0] = (u[1] - u[0]) / dx
    r_int = rho * u - mu * du_up - 0.5 * sigma**2 * d2u - hv

    r_up = np.where(du_b > _NEG / 2, du_b - K_minus, _NEG)
    r_dn = np.where(du_f > _NEG / 2, -du_f - K_plus, _NEG)
    return r_int, r_up, r_dn


def _assemble_1d(policy, xs, hv, sigma, rho, K_plus, K_minus, mu):
    n = len(xs)
    dx = xs[1] - xs[0]
    s = 0.5 * sigma**2 / dx**2
    rows, cols, vals = [], [], []
    rhs = np.empty(n)

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    for i in range(n):
        b = policy[i]
        if b == INTERIOR:
            if 0 < i < n - 1:
                diag = rho + 2 * s + abs(mu) / dx
                add(i, i, diag)
                add(i, i + 1, -s - (mu / dx if mu > 0 else 0.0))
                add(i, i - 1, -s - (-mu / dx if mu < 0 else 0.0))
            elif i == 0:
                # one-sided interior closure at the truncation edge
                add(i, 0, rho + mu / dx - s)
                add(i, 1, -mu / dx + 2 * s)
                add(i, 2, -s)
            else:
                add(i, n - 1, rho - mu / dx - s)
                add(i, n - 2, mu / dx + 2 * s)
                add(i, n - 3, -s)
            rhs[i] = hv[i]
        elif b == GRAD_X_UP:
            add(i, i, 1.0 / dx)
            add(i, i - 1, -1.0 / dx)
            rhs[i] = K_minus
        else:
            add(i, i, 1.0 / dx)
            add(i, i + 1, -1.0 / dx)
            rhs[i] = K_plus
    A = sparse.csc_matrix((vals, (rows, cols)), shape=(n, n))
    return A, rhs


def solve_vi_1d(grid: Grid1D, h, sigma: float, rho: float, K_plus: float,
                K_minus: float, mu: float = 0.0, tol: float = 1e-10,
                max_iter: int = 500) -> VISolution:
    """Policy iteration for the 1-D variational inequality on a truncated line.

    ``h`` may be a callable or an array sampled on the grid.  Returns the
    nodal values, per-node active-branch labels, and the residual history;
    at convergence every branch residual is <= tol with the active one ~0.
    """
    if rho <= 0:
        raise BandCtrlError("rho must be positive")
    if K_plus <= 0 or K_minus <= 0:
        raise BandCtrlError("gradient bounds must be positive")
    xs = grid.xs
    hv = np.asarray(h(xs) if callable(h) else h, dtype=float)
    if hv.shape != xs.shape:
        raise BandCtrlError("h sample must match the grid")
    n = grid.n

    policy = np.zeros(n, dtype=np.int64)
    history = []
    for it in range(1, max_iter + 1):
        A, rhs = _assemble_1d(policy, xs, hv, sigma, rho, K_plus, K_minus, mu)
        u = splu(A).solve(rhs)
        r_int, r_up, r_dn = _residuals_1d(u, xs, hv, sigma, rho, K_plus, K_minus, mu)
        stack = np.stack([r_int, r_up, r_dn])
        best = np.argmax(stack, axis=0)
        viol = float(np.max(np.abs(stack[best, np.arange(n)])))
        history.append(viol)
        scale = 1.0 + float(np.max(np.abs(hv)))
        if viol <= tol * scale:
            return VISolution(u=u, labels=policy.copy(), xs=xs, dim=1,
                              iterations=it, converged=True, residual_history=history,
                              meta={"K_plus": K_plus, "K_minus": K_minus,
                                    "sigma": sigma, "rho": rho, "mu": mu})
        new_policy = best.astype(np.int64)
        if not np.any(new_policy == INTERIOR):
            new_policy[int(np.argmin(hv))] = INTERIOR
        if np.array_equal(new_policy, policy):
            raise ConvergenceError(
                f"policy stable but residual {viol:.3e} above tolerance",
                residual_history=history)
        policy = new_policy
    raise ConvergenceError(f"no convergence in {max_iter} policy iterations",
                           residual_history=history)


# ---------------------------------------------------------------------------
# 2-D solver
# ---------------------------------------------------------------------------

def solve_vi_2d(grid: Grid2D, H, mu, sigma_rows, rho: float, K_plus, K_minus,
                L, tol: float = 1e-10, max_iter: int = 500,
                strip_closure: str = "auto") -> VISolution:
    """Policy iteration for the two-player variational inequality on a square grid.

    Branches per node: the interior PDE row (inner nodes; central stencils,
    tilted seven-point cross term, upwinded drift) and the four weighted
    gradient rows d_i u = L_i K_i^- / -d_i u = L_i K_i^+.

    Truncation: ring nodes normally close with a gradient row (the exact
    far-field slope when the continuation region is bounded).  Costs that
    depend on x1 - x2 only leave an unbounded strip along the diagonal where
    no constraint is active; ring nodes inside the strip then carry the
    diagonal-invariance row u(i,j) = u(i+1,j+1), selected by inheriting the
    classification of the inward diagonal neighbor.  ``strip_closure``
    "auto" detects translation invariance from the sampled cost; "on"/"off"
    force the choice.
    """
    sigma_rows = np.atleast_2d(np.asarray(sigma_rows, dtype=float))
    mu = np.asarray(mu, dtype=float)
    K_plus = np.asarray(K_plus, dtype=float)
    K_minus = np.asarray(K_minus, dtype=float)
    L = np.asarray(L, dtype=float)
    a11 = 0.5 * float(sigma_rows[0] @ sigma_rows[0])
    a22 = 0.5 * float(sigma_rows[1] @ sigma_rows[1])
    a12 = float(sigma_rows[0] @ sigma_rows[1])
    if abs(a12) > 1e-14 and abs(a12) / 2.0 > min(a11, a22):
        warnings.warn("cross-derivative dominates the diagonal: stencil not monotone; "
                      "results may be unreliable", RuntimeWarning)

    x1 = grid.x.xs
    x2 = grid.y.xs
    n1, n2 = grid.x.n, grid.y.n
    dx = grid.dx
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    Hv = np.asarray(H(X1, X2) if callable(H) else H, dtype=float)
    if Hv.shape != (n1, n2):
        raise BandCtrlError("H sample must be shaped (n1, n2)")

    if strip_closure == "auto":
        diag_ok = _vi2d.is_diagonal_invariant(Hv)
    elif strip_closure in ("on", "off"):
        diag_ok = strip_closure == "on"
    else:
        raise BandCtrlError("strip_closure must be auto, on, or off")

    g = np.array([[L[0] * K_minus[0], L[0] * K_plus[0]],
                  [L[1] * K_minus[1], L[1] * K_plus[1]]])

    ring = np.zeros((n1, n2), dtype=bool)
    ring[0, :] = ring[-1, :] = True
    ring[:, 0] = ring[:, -1] = True
    inner = ~ring

    diag_nb = {}
    if diag_ok:
        for i, j in zip(*np.nonzero(ring)):
            nb = _vi2d.diagonal_neighbor(i, j, n1, n2)
            if nb is not None and not ring[nb]:
                diag_nb[(i, j)] = nb

    grad_allowed = np.zeros((4, n1, n2), dtype=bool)
    grad_allowed[0, 1:, :] = True    # GRAD_X_UP needs i-1
    grad_allowed[1, :-1, :] = True   # GRAD_X_DN needs i+1
    grad_allowed[2, :, 1:] = True    # GRAD_Y_UP needs j-1
    grad_allowed[3, :, :-1] = True   # GRAD_Y_DN needs j+1

    # equivalent constraint of the other player, used when the inherited
    # branch's one-sided stencil is unavailable on this ring segment
    partner = {GRAD_X_UP: GRAD_Y_DN, GRAD_Y_DN: GRAD_X_UP,
               GRAD_X_DN: GRAD_Y_UP, GRAD_Y_UP: GRAD_X_DN}

    def ring_default(i, j):
        if i == n1 - 1:
            return GRAD_X_UP
        if i == 0:
            return GRAD_X_DN
        if j == n2 - 1:
            return GRAD_Y_UP
        return GRAD_Y_DN

    def ring_policy(pol, best_grad=None, r_best_grad=None):
        """Ring nodes inherit the inward diagonal classification; nodes with
        no usable diagonal neighbor follow the best gradient residual."""
        out = pol.copy()
        for i, j in zip(*np.nonzero(ring)):
            nb = diag_nb.get((i, j))
            if nb is None:
                if best_grad is not None and r_best_grad[i, j] > 0:
                    out[i, j] = best_grad[i, j] + 1
                continue
            b = pol[nb]
            if b == INTERIOR or b == DIAG:
                out[i, j] = DIAG
            elif grad_allowed[b - 1, i, j]:
                out[i, j] = b
            elif grad_allowed[partner[b] - 1, i, j]:
                out[i, j] = partner[b]
            elif best_grad is not None:
                out[i, j] = best_grad[i, j] + 1
        return out

    policy = np.full((n1, n2), INTERIOR, dtype=np.int64)
    for i, j in zip(*np.nonzero(ring)):
        policy[i, j] = ring_default(i, j)
    if diag_ok:
        policy = ring_policy(policy)

    history = []
    scale = 1.0 + float(np.max(np.abs(Hv)))
    for it in range(1, max_iter + 1):
        A, rhs = _vi2d.assemble_system(policy, Hv, g, rho, mu, a11, a22, a12, dx)
        u = splu(A).solve(rhs)
        u2 = u.reshape(n1, n2)

        r_grad = np.where(grad_allowed, _vi2d.gradient_residuals(u2, g, dx), _NEG)
        r_int = _vi2d.interior_residual(u2, Hv, rho, mu, a11, a22, a12, dx)
        best_grad = np.argmax(r_grad, axis=0)
        r_best_grad = np.take_along_axis(r_grad, best_grad[None], axis=0)[0]
        M = np.where(inner, np.maximum(r_int, r_best_grad), r_best_grad)
        viol = max(float(np.max(np.abs(M[inner]))),
                   float(np.max(np.maximum(M[ring], 0.0), initial=0.0)))
        history.append(viol)
        if viol <= tol * scale:
            return VISolution(u=u2, labels=policy.copy(), xs=x1, x2s=x2, dim=2,
                              iterations=it, converged=True, residual_history=history,
                              meta={"g": g, "a12": a12, "diag_closure": bool(diag_ok)})

        new_policy = policy.copy()
        switch = inner & (M > tol * scale)
        argmax_inner = np.where(r_int >= r_best_grad, INTERIOR, best_grad + 1)
        new_policy[switch] = argmax_inner[switch]
        if diag_ok:
            new_policy = ring_policy(new_policy, best_grad, r_best_grad)
        else:
            ring_switch = ring & (r_best_grad > tol * scale)
            new_policy[ring_switch] = (best_grad + 1)[ring_switch]
        if np.array_equal(new_policy, policy):
            raise ConvergenceError(
                f"policy stable but residual {viol:.3e} above tolerance",
                residual_history=history)
        policy = new_policy
    raise ConvergenceError(f"no convergence in {max_iter} policy iterations",
                           residual_history=history)


# ---------------------------------------------------------------------------
# Free-boundary extraction
# ---------------------------------------------------------------------------

def _interp_zero(x0, x1, f0, f1):
    if f1 == f0:
        return x0
    return x0 + (x1 - x0) * (-f0) / (f1 - f0)


def extract_free_boundary(sol: VISolution):
    """Band edges from the active-set labels, refined by gradient interpolation.

    1-D: returns FreeBoundary1D(lower, upper) with a missing side reported as
    None; raises BoundaryNotFoundError when no gradient node is active.
    2-D: returns per-row interior extents as an (n2, 3) array of
    (x2, x1_low, x1_high), NaN where a row has no interior nodes.
    """
    if sol.dim == 1:
        xs = sol.xs
        u = sol.u
        dx = xs[1] - xs[0]
        du = np.gradient(u, dx)
        K_minus = sol.meta.get("K_minus", None)
        K_plus = sol.meta.get("K_plus", None)
        upper = lower = None
        up_nodes = np.nonzero(sol.labels == GRAD_X_UP)[0]
        if len(up_nodes):
            i = int(up_nodes[0])
            target = K_minus if K_minus is not None else (u[i] - u[i - 1]) / dx
            g = du - target
            if i > 0 and g[i - 1] < 0 <= g[i]:
                upper = _interp_zero(xs[i - 1], xs[i], g[i - 1], g[i])
            else:
                # u' meets the bound tangentially at the edge; settle for the cell midpoint
                upper = xs[i] - 0.5 * dx
        dn_nodes = np.nonzero(sol.labels == GRAD_X_DN)[0]
        if len(dn_nodes):
            i = int(dn_nodes[-1])
            target = K_plus if K_plus is not None else -(u[i + 1] - u[i]) / dx
            g = -du - target
            if i < len(xs) - 1 and g[i + 1] < 0 <= g[i]:
                lower = _interp_zero(xs[i], xs[i + 1], g[i], g[i + 1])
            else:
                lower = xs[i] + 0.5 * dx
        if upper is None and lower is None:
            raise BoundaryNotFoundError("no active gradient nodes on the grid")
        return FreeBoundary1D(lower=lower, upper=upper)

    # 2-D: per-row interior extent
    n1, n2 = sol.u.shape
    out = np.full((n2, 3), np.nan)
    out[:, 0] = sol.x2s
    interior = sol.labels == INTERIOR
    if not interior.any():
        raise BoundaryNotFoundError("no interior nodes in the 2-D solution")
    for j in range(n2):
        rows = np.nonzero(interior[:, j])[0]
        if len(rows):
            out[j, 1] = sol.xs[rows[0]]
            out[j, 2] = sol.xs[rows[-1]]
    return out


def antidiagonal_band_width(sol: VISolution):
    """Interior width measured in y = x1 - x2 units along the antidiagonal.

    Walks the grid's antidiagonal nodes (x, -x), locates the interior run,
    and interpolates half a cell beyond the last interior nodes on each side.
    """
    if sol.dim != 2:
        raise BandCtrlError("antidiagonal width needs a 2-D solution")
    n1, n2 = sol.u.shape
    if n1 != n2:
        raise BandCtrlError("antidiagonal width assumes a square grid")
    nodes = [(i, n1 - 1 - i) for i in range(n1)]
    ys = np.array([sol.xs[i] - sol.x2s[j] for i, j in nodes])
    lab = np.array([sol.labels[i, j] for i, j in nodes])
    inside = np.nonzero(lab == INTERIOR)[0]
    if len(inside) == 0:
        raise BoundaryNotFoundError("antidiagonal has no interior nodes")
    y_lo = ys[inside[0]]
    y_hi = ys[inside[-1]]
    step = abs(ys[1] - ys[0])
    return float(abs(y_hi - y_lo) + step)  # half-cell beyond each last interior node
