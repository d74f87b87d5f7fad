"""Domain types for the game, its one-dimensional reductions, and the Brownian resolvent.

All types are immutable after construction; evaluators are pure functions and safe
to share across threads or processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .errors import AccuracyError, DegenerateDiffusionError

__all__ = [
    "RunningCost",
    "JointQuadraticCost",
    "GameSpec",
    "InvestmentSpec",
    "ReducedProblem1D",
    "Resolvent",
    "AssumptionReport",
    "effective_volatility",
    "resolvent_build",
    "interbank_running_cost",
    "validate_assumptions",
    "fd_derivative_check",
]


# ---------------------------------------------------------------------------
# Running costs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunningCost:
    """Convex running cost h of a scalar state.

    Two kinds are supported:
      * ``quadratic``: h(y) = curvature*(y - center)**2 + offset, with the closed-form
        resolvent available.
      * ``custom``: user-supplied (h, h', h'') callables plus curvature bounds
        0 < c_lo <= h''(y) <= c_hi.  Callables must accept numpy arrays.
    """

    kind: str
    curvature: float = 1.0
    center: float = 0.0
    offset: float = 0.0
    h: Optional[Callable] = None
    dh: Optional[Callable] = None
    d2h: Optional[Callable] = None
    c_lo: float = 0.0
    c_hi: float = float("inf")

    def __post_init__(self):
        if self.kind == "quadratic":
            if self.curvature <= 0:
                raise ValueError("quadratic cost needs curvature > 0")
            if self.offset < 0:
                raise ValueError("h(center) = offset must be nonnegative")
            object.__setattr__(self, "c_lo", 2.0 * self.curvature)
            object.__setattr__(self, "c_hi", 2.0 * self.curvature)
        elif self.kind == "custom":
            if self.h is None or self.dh is None or self.d2h is None:
                raise ValueError("custom cost needs (h, h', h'') callables")
            if not (0.0 < self.c_lo <= self.c_hi < float("inf")):
                raise ValueError("custom cost needs 0 < c_lo <= c_hi < inf")
        else:
            raise ValueError(f"unknown cost kind {self.kind!r}")

    @classmethod
    def quadratic(cls, curvature=1.0, center=0.0, offset=0.0) -> "RunningCost":
        return cls(kind="quadratic", curvature=curvature, center=center, offset=offset)

    @classmethod
    def custom(cls, h, dh, d2h, c_lo, c_hi) -> "RunningCost":
        return cls(kind="custom", h=h, dh=dh, d2h=d2h, c_lo=c_lo, c_hi=c_hi)

    # -- evaluation ---------------------------------------------------------

    def value(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "quadratic":
            return self.curvature * (y - self.center) ** 2 + self.offset
        return np.asarray(self.h(y), dtype=float)

    def d1(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "quadratic":
            return 2.0 * self.curvature * (y - self.center)
        return np.asarray(self.dh(y), dtype=float)

    def d2(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "quadratic":
            return np.full_like(y, 2.0 * self.curvature)
        return np.asarray(self.d2h(y), dtype=float)

    def curvature_bounds(self):
        return self.c_lo, self.c_hi

    def is_symmetric(self, halfwidth=5.0, n=41, rtol=1e-8) -> bool:
        """Sampled check of h(center+d) == h(center-d)."""
        d = np.linspace(0.0, halfwidth, n)
        lhs = self.value(self.center + d)
        rhs = self.value(self.center - d)
        scale = 1.0 + np.abs(lhs)
        return bool(np.all(np.abs(lhs - rhs) <= rtol * scale))

    def check_invariants(self, halfwidth=5.0, n=81):
        """Sampled invariant check: h(center) >= 0 and c_lo <= h'' <= c_hi."""
        if float(self.value(self.center)) < 0:
            raise ValueError("h(center) must be nonnegative")
        ys = self.center + np.linspace(-halfwidth, halfwidth, n)
        curv = self.d2(ys)
        if np.any(curv < self.c_lo - 1e-12) or np.any(curv > self.c_hi + 1e-12):
            bad = ys[(curv < self.c_lo - 1e-12) | (curv > self.c_hi + 1e-12)]
            raise ValueError(f"h'' outside [{self.c_lo}, {self.c_hi}] near y={bad[0]:.4g}")


def fd_derivative_check(cost: RunningCost, ys, step=1e-6, step2=1e-4):
    """Finite-difference cross-check of user-supplied derivatives.

    Returns the max abs mismatch of (h', h'') against central differences of h
    (the second difference uses the larger step2 to stay above the rounding
    floor).  Validation utility only; solvers always use the supplied callables.
    """
    ys = np.asarray(ys, dtype=float)
    d1_fd = (cost.value(ys + step) - cost.value(ys - step)) / (2 * step)
    d2_fd = (cost.value(ys + step2) - 2 * cost.value(ys) + cost.value(ys - step2)) / step2**2
    e1 = float(np.max(np.abs(d1_fd - cost.d1(ys))))
    e2 = float(np.max(np.abs(d2_fd - cost.d2(ys))))
    return e1, e2


# ---------------------------------------------------------------------------
# Effective volatility
# ---------------------------------------------------------------------------

def effective_volatility(sigma_rows, mode: str = "joint") -> float:
    """Scalar volatility of the reduced one-dimensional problem.

    ``joint``      sqrt(sum_ij sigma_ij**2) over all rows (default convention).
    ``difference`` l2 norm of row0 - row1 (volatility of the pairwise spread);
                   requires exactly two rows.

    The two modes agree when the rows are orthogonal.  Raises
    DegenerateDiffusionError when the result is zero.
    """
    rows = np.atleast_2d(np.asarray(sigma_rows, dtype=float))
    if rows.size == 0:
        raise ValueError("sigma_rows must be nonempty")
    if not np.all(np.isfinite(rows)):
        raise ValueError("sigma_rows must be finite")
    if mode == "joint":
        out = float(np.sqrt(np.sum(rows**2)))
    elif mode == "difference":
        if rows.shape[0] != 2:
            raise ValueError("difference mode needs exactly two volatility rows")
        out = float(np.linalg.norm(rows[0] - rows[1]))
    else:
        raise ValueError(f"unknown volatility mode {mode!r}")
    if out == 0.0:
        raise DegenerateDiffusionError(f"effective volatility is zero in mode {mode!r}")
    return out


# ---------------------------------------------------------------------------
# Resolvent: expected discounted running cost of the uncontrolled diffusion
# ---------------------------------------------------------------------------

class Resolvent:
    """p(x) = E int_0^inf e^{-rho t} h(x + sigma_tilde B_t) dt and its derivatives.

    Solves rho*p - (sigma_tilde**2/2) p'' = h.  Quadratic costs use the closed
    form; custom costs are evaluated by adaptive quadrature against the kernel
    exp(-sqrt(2 rho)|x-z|/sigma_tilde) / (sigma_tilde sqrt(2 rho)).
    """

    def __init__(self, cost: RunningCost, sigma_tilde: float, rho: float, quad_tol: float = 1e-10):
        if sigma_tilde <= 0:
            raise DegenerateDiffusionError("sigma_tilde must be positive")
        if rho <= 0:
            raise ValueError("rho must be positive")
        self.cost = cost
        self.sigma_tilde = float(sigma_tilde)
        self.rho = float(rho)
        self.quad_tol = float(quad_tol)
        self.kappa = np.sqrt(2.0 * rho) / sigma_tilde  # kernel decay rate

    # -- closed form for quadratic costs ------------------------------------

    def _quad_p(self, x, order):
        a, s0, off = self.cost.curvature, self.cost.center, self.cost.offset
        rho, sig = self.rho, self.sigma_tilde
        if order == 0:
            return a * (x - s0) ** 2 / rho + a * sig**2 / rho**2 + off / rho
        if order == 1:
            return 2.0 * a * (x - s0) / rho
        return np.full_like(np.asarray(x, dtype=float), 2.0 * a / rho)

    # -- Green-kernel convolution for custom costs --------------------------

    def _truncation(self, x):
        # Tail of int_U^inf g(x +/- u) e^{-k u} du bounded via the quadratic
        # growth g(y) <= g(x) + |g'(x)| u + c_hi u^2 / 2.
        k = self.kappa
        g0 = abs(float(self.cost.value(x)))
        g1 = abs(float(self.cost.d1(x)))
        c_hi = self.cost.c_hi
        U = 1.0
        for _ in range(200):
            tail = np.exp(-k * U) * (g0 + g1 * (U + 1 / k) + c_hi * (U + 1 / k) ** 2) / k
            if tail < 0.1 * self.quad_tol:
                return U
            U *= 1.5
        raise AccuracyError("kernel truncation did not reach tolerance", achieved=tail,
                            target=self.quad_tol)

    def _kernel_apply(self, fn, x):
        """(1/(sig sqrt(2 rho))) int fn(z) e^{-k|x-z|} dz for scalar x."""
        k = self.kappa
        U = self._truncation(x)
        pref = 1.0 / (self.sigma_tilde * np.sqrt(2.0 * self.rho))
        tol = 0.5 * self.quad_tol / pref
        up, err_up = integrate.quad(lambda u: fn(x + u) * np.exp(-k * u), 0.0, U,
                                    epsabs=tol, epsrel=0.0, limit=400)
        dn, err_dn = integrate.quad(lambda u: fn(x - u) * np.exp(-k * u), 0.0, U,
                                    epsabs=tol, epsrel=0.0, limit=400)
        err = pref * (err_up + err_dn)
        if err > self.quad_tol:
            raise AccuracyError("resolvent quadrature above tolerance",
                                achieved=err, target=self.quad_tol)
        return pref * (up + dn)

    def _custom_eval(self, x, order):
        fn = (self.cost.value, self.cost.d1, self.cost.d2)[order]
        xs = np.asarray(x, dtype=float)
        out = np.array([self._kernel_apply(fn, float(xi)) for xi in np.atleast_1d(xs)])
        return out.reshape(xs.shape)

    # -- public evaluators ---------------------------------------------------

    def p(self, x):
        x = np.asarray(x, dtype=float)
        v = self._quad_p(x, 0) if self.cost.kind == "quadratic" else self._custom_eval(x, 0)
        return float(v) if v.ndim == 0 else v

    def dp(self, x):
        x = np.asarray(x, dtype=float)
        v = self._quad_p(x, 1) if self.cost.kind == "quadratic" else self._custom_eval(x, 1)
        return float(v) if v.ndim == 0 else v

    def d2p(self, x):
        x = np.asarray(x, dtype=float)
        v = self._quad_p(x, 2) if self.cost.kind == "quadratic" else self._custom_eval(x, 2)
        return float(v) if v.ndim == 0 else v

    def curvature_bounds(self):
        """Bounds c_lo/rho <= p'' <= c_hi/rho inherited from the cost."""
        return self.cost.c_lo / self.rho, self.cost.c_hi / self.rho


def resolvent_build(cost: RunningCost, sigma_tilde: float, rho: float,
                    quad_tol: float = 1e-10) -> Resolvent:
    """Build the resolvent of ``cost`` for the scalar diffusion (sigma_tilde, rho)."""
    cost.check_invariants()
    return Resolvent(cost, sigma_tilde, rho, quad_tol)


# ---------------------------------------------------------------------------
# Joint quadratic cost (interbank payoff)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JointQuadraticCost:
    """H(x) = x^T M x with constant Hessian 2M (positive semidefinite)."""

    M: np.ndarray

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(x @ self.M @ x)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * (self.M @ x)

    def hess(self, x=None):
        return 2.0 * self.M


def interbank_running_cost(kappa, nu, a, L) -> JointQuadraticCost:
    """Aggregate quadratic payoff for N banks around a weighted benchmark.

    H(x) = sum_i L_i [ kappa_i (x_i - sum_{j != i} a_j x_j)^2 + nu_i x_i^2 ].
    Returns an evaluator exposing value, gradient, and (constant) Hessian.
    """
    kappa = np.asarray(kappa, dtype=float)
    nu = np.asarray(nu, dtype=float)
    a = np.asarray(a, dtype=float)
    L = np.asarray(L, dtype=float)
    n = len(kappa)
    if not (len(nu) == len(a) == len(L) == n):
        raise ValueError("kappa, nu, a, L must share length")
    if np.any(kappa <= 0) or np.any(nu < 0):
        raise ValueError("need kappa_i > 0 and nu_i >= 0")
    _check_weights(L, "L")
    _check_weights(a, "benchmark weights")
    M = np.zeros((n, n))
    for i in range(n):
        r = -a.copy()
        r[i] = 1.0  # own spread minus the others' weighted average
        M += L[i] * (kappa[i] * np.outer(r, r) + nu[i] * np.outer(_e(n, i), _e(n, i)))
    return JointQuadraticCost(M=M)


def _e(n, i):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def _check_weights(w, name):
    if np.any(np.asarray(w) < 0) or abs(float(np.sum(w)) - 1.0) > 1e-10:
        raise ValueError(f"{name} must be nonnegative and sum to 1")


# ---------------------------------------------------------------------------
# Game specification
# ---------------------------------------------------------------------------

JointCost = Union[JointQuadraticCost]


@dataclass(frozen=True)
class GameSpec:
    """Full N-player problem data.

    ``difference_cost`` models the two-player running cost h(x1 - x2); for
    general N supply ``joint_cost`` instead (e.g. from interbank_running_cost).
    """

    mu: np.ndarray              # (N,) drifts
    sigma: np.ndarray           # (N, D) volatility rows
    rho: float
    K_plus: np.ndarray          # (N,) cost per unit upward control
    K_minus: np.ndarray         # (N,) cost per unit downward control
    L: np.ndarray               # (N,) welfare weights, sum to 1
    benchmark_weights: np.ndarray
    difference_cost: Optional[RunningCost] = None
    joint_cost: Optional[JointCost] = None
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        n = len(mu)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        for name in ("K_plus", "K_minus", "L", "benchmark_weights"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if len(v) != n:
                raise ValueError(f"{name} must have length N={n}")
            object.__setattr__(self, name, v)
        if sigma.shape[0] != n:
            raise ValueError("sigma must have one row per player")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if np.any(self.K_plus <= 0) or np.any(self.K_minus <= 0):
            raise ValueError("intervention costs must be positive")
        if np.any(self.L <= 0):
            raise ValueError("welfare weights must be positive")
        _check_weights(self.L, "L")
        _check_weights(self.benchmark_weights, "benchmark weights")
        lam = float(np.linalg.eigvalsh(sigma @ sigma.T).min())
        if lam <= 0:
            raise DegenerateDiffusionError(
                f"sigma sigma^T must be uniformly elliptic (min eigenvalue {lam:.3g})")
        if self.difference_cost is not None and n != 2:
            raise ValueError("difference_cost form requires N = 2")
        if self.difference_cost is None and self.joint_cost is None:
            raise ValueError("one of difference_cost / joint_cost is required")
        if self.x0 is not None:
            x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
            if len(x0) != n:
                raise ValueError("x0 must have length N")
            object.__setattr__(self, "x0", x0)

    @property
    def n_players(self) -> int:
        return len(self.mu)

    def aggregate_cost_value(self, x):
        """H(x) = sum_i L_i h^i(x) at a state vector."""
        x = np.asarray(x, dtype=float)
        if self.joint_cost is not None:
            return self.joint_cost.value(x)
        # both players share h(x1 - x2); L sums to one
        return float(self.difference_cost.value(x[0] - x[1]))


# ---------------------------------------------------------------------------
# Partially reversible investment specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InvestmentSpec:
    """M investors producing P products under stochastic demand.

    ``costs[i][j]`` is investor i's running cost h_ij of product j's
    production-demand gap (separable form).
    """

    y0: np.ndarray              # (M, P) initial capacities
    mu: np.ndarray              # (M, P) capacity drifts
    sigma: np.ndarray           # (M, P, D) capacity volatility rows
    p: np.ndarray               # (M, P) expansion costs
    q: np.ndarray               # (M, P) contraction costs
    r: np.ndarray               # (P,) unit profits
    demand_drift: np.ndarray    # (P,) alpha_j
    demand_vol: np.ndarray      # (P,) gamma_j
    d0: np.ndarray              # (P,) initial demands
    rho: float                  # discount rate
    costs: Optional[Sequence[Sequence[RunningCost]]] = None

    def __post_init__(self):
        y0 = np.atleast_2d(np.asarray(self.y0, dtype=float))
        M, P = y0.shape
        object.__setattr__(self, "y0", y0)
        for name, shape in (("mu", (M, P)), ("p", (M, P)), ("q", (M, P))):
            v = np.asarray(getattr(self, name), dtype=float).reshape(shape)
            object.__setattr__(self, name, v)
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.ndim == 2:
            sigma = sigma[:, :, None]
        if sigma.shape[:2] != (M, P):
            raise ValueError("sigma must be shaped (M, P, D)")
        object.__setattr__(self, "sigma", sigma)
        for name in ("r", "demand_drift", "demand_vol", "d0"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if len(v) != P:
                raise ValueError(f"{name} must have length P={P}")
            object.__setattr__(self, name, v)
        if self.rho <= 0:
            raise ValueError("discount rate must be positive")
        if np.any(self.p <= 0) or np.any(self.q <= 0):
            raise ValueError("expansion/contraction costs must be positive")
        row_norms = np.linalg.norm(sigma, axis=2)
        if np.any(row_norms <= 0):
            raise DegenerateDiffusionError("each capacity volatility row needs positive norm")
        if self.costs is not None:
            costs = tuple(tuple(row) for row in self.costs)
            if len(costs) != M or any(len(row) != P for row in costs):
                raise ValueError("costs must be an (M, P) table of RunningCost")
            object.__setattr__(self, "costs", costs)

    @property
    def n_investors(self) -> int:
        return self.y0.shape[0]

    @property
    def n_products(self) -> int:
        return self.y0.shape[1]

    @property
    def brownian_dim(self) -> int:
        return self.sigma.shape[2]


# ---------------------------------------------------------------------------
# Reduced one-dimensional problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedProblem1D:
    """One-dimensional band problem: state, volatility, discount, one-sided cost."""

    sigma_tilde: float
    rho: float
    K_eff: float
    cost: RunningCost
    x0: float = 0.0

    def __post_init__(self):
        if self.sigma_tilde <= 0:
            raise DegenerateDiffusionError("sigma_tilde must be positive")
        if self.K_eff <= 0:
            raise ValueError("K_eff must be positive")
        if self.rho <= 0:
            raise ValueError("rho must be positive")

    def resolvent(self, quad_tol=1e-10) -> Resolvent:
        return resolvent_build(self.cost, self.sigma_tilde, self.rho, quad_tol)


# ---------------------------------------------------------------------------
# Assumption validation (report only)
# ---------------------------------------------------------------------------

@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    witness: Optional[str] = None
    detail: Optional[str] = None


@dataclass
class AssumptionReport:
    checks: list = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, passed, witness=None, detail=None):
        self.checks.append(AssumptionCheck(name, bool(passed), witness, detail))

    def __iter__(self):
        return iter(self.checks)


def validate_assumptions(spec: GameSpec, halfwidth: float = 6.0, n: int = 13) -> AssumptionReport:
    """Sample the aggregate cost H and report the standing structural assumptions.

    Checks nonnegativity, the quadratic growth envelope, and directional
    curvature bounds 0 < c <= dzz H <= C.  Report only; nothing raises.
    """
    rep = AssumptionReport()
    N = spec.n_players

    if spec.joint_cost is not None:
        axes = [np.linspace(-halfwidth, halfwidth, n)] * N
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, N)
        vals = np.array([spec.joint_cost.value(x) for x in pts])
        hess = spec.joint_cost.hess()
        eigs = np.linalg.eigvalsh(hess)
        vmin = float(vals.min())
        rep.add("nonnegative", vmin >= -1e-12,
                witness=f"min H = {vmin:.4g}")
        ratio = vals / (1.0 + np.sum(pts**2, axis=1))
        rep.add("quadratic_growth", np.isfinite(ratio).all(),
                witness=f"fitted envelope C = {float(ratio.max()):.4g}")
        rep.add("curvature_lower", eigs.min() > 1e-12,
                witness=f"min directional curvature = {eigs.min():.4g}")
        rep.add("curvature_upper", np.isfinite(eigs.max()),
                witness=f"max directional curvature = {eigs.max():.4g}")
        return rep

    # difference-cost form: sample h on the spread coordinate
    cost = spec.difference_cost
    ys = cost.center + np.linspace(-halfwidth, halfwidth, 201)
    hv = cost.value(ys)
    curv = cost.d2(ys)
    rep.add("nonnegative", float(hv.min()) >= -1e-12,
            witness=f"min h = {float(hv.min()):.4g}")
    ratio = hv / (1.0 + ys**2)
    rep.add("quadratic_growth", np.isfinite(ratio).all(),
            witness=f"fitted envelope C = {float(ratio.max()):.4g}")
    lo_ok = bool(np.all(curv >= cost.c_lo - 1e-12)) and cost.c_lo > 0
    i_lo = int(np.argmin(curv))
    rep.add("curvature_lower", lo_ok,
            witness=f"h''({ys[i_lo]:.3g}) = {curv[i_lo]:.4g} vs floor {cost.c_lo:.4g}")
    hi_ok = bool(np.all(curv <= cost.c_hi + 1e-12))
    i_hi = int(np.argmax(curv))
    rep.add("curvature_upper", hi_ok,
            witness=f"h''({ys[i_hi]:.3g}) = {curv[i_hi]:.4g} vs cap {cost.c_hi:.4g}")
    sym = cost.is_symmetric(halfwidth=halfwidth)
    rep.add("symmetric", sym, witness=f"about center {cost.center:g}")
    return rep
