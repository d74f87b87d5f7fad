"""Closed-form piecewise value functions and their analytic verification.

Inside the band the value is A cosh(kappa x) + p(x) with
A = -sigma^2 p''(c) / (2 rho cosh(kappa c)) < 0; outside it continues
linearly with slope K_eff.  The cosh coefficient makes the one-sided second
derivative vanish at the band edge, which is the threshold equation itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import InvestmentSpec, Resolvent
from . import reduction, thresholds

__all__ = [
    "PiecewiseValue",
    "NashValue2P",
    "value_eval",
    "interior_eval",
    "hjb_residual_1d",
    "pareto_value_2p",
    "nash_value_pair",
    "nash_value_eval",
    "separable_value",
    "outside_band_value",
    "value_grid",
]


@dataclass(frozen=True)
class PiecewiseValue:
    """Even, convex, globally C1 value with linear continuation of slope K_eff."""

    c: float
    A: float
    res: Resolvent
    K_eff: float
    sigma_tilde: float
    rho: float

    def __post_init__(self):
        if self.A >= 0:
            raise ValueError("cosh coefficient must be negative (p'' > 0)")

    @classmethod
    def build(cls, res: Resolvent, K_eff: float, c: Optional[float] = None,
              tol: float = thresholds.DEFAULT_TOL) -> "PiecewiseValue":
        if c is None:
            c = thresholds.solve_threshold(res, K_eff, tol).c
        kappa = np.sqrt(2.0 * res.rho) / res.sigma_tilde
        A = -res.sigma_tilde**2 * res.d2p(c) / (2.0 * res.rho * np.cosh(kappa * c))
        return cls(c=float(c), A=float(A), res=res, K_eff=float(K_eff),
                   sigma_tilde=res.sigma_tilde, rho=res.rho)

    @property
    def kappa(self) -> float:
        return np.sqrt(2.0 * self.rho) / self.sigma_tilde

    # -- evaluation ----------------------------------------------------------

    def interior(self, x):
        """Smooth cosh-branch extension (valid formula for any x)."""
        x = np.asarray(x, dtype=float)
        k = self.kappa
        v = self.A * np.cosh(k * x) + self.res.p(x)
        dv = self.A * k * np.sinh(k * x) + self.res.dp(x)
        d2v = self.A * k * k * np.cosh(k * x) + self.res.d2p(x)
        return v, dv, d2v

    def __call__(self, x):
        return value_eval(self, x)[0]


def value_eval(pv: PiecewiseValue, x):
    """(v, v', v'') of the piecewise value at x (scalar or array).

    |x| <= c: cosh branch; |x| > c: v(c) + K_eff (|x| - c) with slope
    sign(x) K_eff and zero curvature.  Even extension throughout.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    ax = np.abs(x)
    v_in, dv_in, d2v_in = pv.interior(ax)
    vc = pv.interior(pv.c)[0]
    out = ax > pv.c
    v = np.where(out, vc + pv.K_eff * (ax - pv.c), v_in)
    dv_abs = np.where(out, pv.K_eff, dv_in)
    dv = np.sign(x) * dv_abs          # odd derivative of an even function
    d2v = np.where(out, 0.0, d2v_in)
    if scalar:
        return float(v[0]), float(dv[0]), float(d2v[0])
    return v, dv, d2v


def interior_eval(pv: PiecewiseValue, x):
    """Cosh-branch (v, v', v'') without banding; used for pasting diagnostics."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    v, dv, d2v = pv.interior(np.atleast_1d(x))
    if scalar:
        return float(v[0]), float(dv[0]), float(d2v[0])
    return v, dv, d2v


def branch_id(pv: PiecewiseValue, x):
    """0 on the cosh branch, +1/-1 on the upper/lower linear branch."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.where(np.abs(x) <= pv.c, 0, np.sign(x)).astype(int)


def pasting_gaps(pv: PiecewiseValue, step: float = 1e-5):
    """|v'(c-) - K_eff| and |v''(c-)| by central differences at the band edge.

    The stencil sits on the smooth interior branch extended across c.  At
    step 1e-5 the second difference cancels ~10 digits, so quadratic costs
    are evaluated in extended precision to keep the check meaningful; custom
    costs fall back to float64.
    """
    if pv.res.cost.kind == "quadratic" and np.finfo(np.longdouble).eps < 1e-18:
        ld = np.longdouble
        c, h = ld(pv.c), ld(step)
        kappa = np.sqrt(ld(2) * ld(pv.rho)) / ld(pv.sigma_tilde)
        a, s0 = ld(pv.res.cost.curvature), ld(pv.res.cost.center)
        off, rho = ld(pv.res.cost.offset), ld(pv.rho)
        sig = ld(pv.sigma_tilde)

        def v(x):
            p = a * (x - s0) ** 2 / rho + a * sig**2 / rho**2 + off / rho
            return ld(pv.A) * np.cosh(kappa * x) + p

        vm, v0, vp = v(c - h), v(c), v(c + h)
        dv = (vp - vm) / (2 * h)
        d2v = (vp - 2 * v0 + vm) / h**2
        return float(abs(dv - ld(pv.K_eff))), float(abs(d2v))
    c, h = pv.c, step
    vm = interior_eval(pv, c - h)[0]
    v0 = interior_eval(pv, c)[0]
    vp = interior_eval(pv, c + h)[0]
    return (abs((vp - vm) / (2 * h) - pv.K_eff), abs((vp - 2 * v0 + vm) / h**2))


def hjb_residual_1d(pv: PiecewiseValue, x):
    """Signed residuals of both branches of max{rho v - h - (s^2/2) v'', |v'| - K}.

    Inside the band the interior residual vanishes and the gradient residual
    is <= 0; outside, the gradient residual vanishes and the interior one is
    <= 0.  Complementarity: max of the two is ~0 everywhere.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    v, dv, d2v = value_eval(pv, x)
    interior = pv.rho * v - pv.res.cost.value(x) - 0.5 * pv.sigma_tilde**2 * d2v
    gradient = np.abs(dv) - pv.K_eff
    if scalar:
        return float(interior[0]), float(gradient[0])
    return interior, gradient


# ---------------------------------------------------------------------------
# Two-player values
# ---------------------------------------------------------------------------

def pareto_value_2p(x1, x2, res: Resolvent, K1: float, K2: float,
                    tol: float = thresholds.DEFAULT_TOL):
    """Regulator value of the two-player game at (x1, x2).

    Only the spread y = x1 - x2 matters; the effective one-sided cost is
    min(K1, K2)/2 under equal welfare weights (relabel players if needed).
    """
    if K1 <= 0 or K2 <= 0:
        raise ValueError("intervention costs must be positive")
    K_eff = min(K1, K2) / 2.0
    pv = PiecewiseValue.build(res, K_eff, tol=tol)
    return value_eval(pv, np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float))[0]


@dataclass(frozen=True)
class NashValue2P:
    """Nash equilibrium value pair for equal intervention costs K."""

    c2: float
    A2: float
    res: Resolvent
    K: float
    sigma_tilde: float
    rho: float

    @classmethod
    def build(cls, res: Resolvent, K: float, tol: float = thresholds.DEFAULT_TOL):
        c2 = thresholds.solve_threshold(res, K, tol).c
        kappa = np.sqrt(2.0 * res.rho) / res.sigma_tilde
        A2 = -res.sigma_tilde**2 * res.d2p(c2) / (2.0 * res.rho * np.cosh(kappa * c2))
        return cls(c2=float(c2), A2=float(A2), res=res, K=float(K),
                   sigma_tilde=res.sigma_tilde, rho=res.rho)

    def _mid(self, y):
        kappa = np.sqrt(2.0 * self.rho) / self.sigma_tilde
        return self.A2 * np.cosh(kappa * y) + self.res.p(y)

    def eval(self, x1, x2):
        """(v1, v2) at (x1, x2); arrays broadcast.

        v1 is frozen in the x1 direction below x2 - c2 (the opponent's action
        edge, where its own marginal value is zero) and continues with slope K
        above x2 + c2.  v2 mirrors the roles.
        """
        y = np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        mid_lo = self._mid(-self.c2)
        mid_hi = self._mid(self.c2)
        v1 = np.where(y < -self.c2, mid_lo,
                      np.where(y > self.c2, mid_hi + self.K * (y - self.c2),
                               self._mid(y)))
        z = -y  # player 2 sees the reflected spread
        v2 = np.where(z < -self.c2, mid_lo,
                      np.where(z > self.c2, mid_hi + self.K * (z - self.c2),
                               self._mid(z)))
        if scalar:
            return float(v1[0]), float(v2[0])
        return v1, v2


def nash_value_pair(res: Resolvent, K: float, tol: float = thresholds.DEFAULT_TOL) -> NashValue2P:
    return NashValue2P.build(res, K, tol)


def nash_value_eval(x1, x2, res: Resolvent, K: float, tol: float = thresholds.DEFAULT_TOL):
    """Convenience wrapper: (v1, v2) of the Nash equilibrium at (x1, x2)."""
    return NashValue2P.build(res, K, tol).eval(x1, x2)


# ---------------------------------------------------------------------------
# Separable multi-product value
# ---------------------------------------------------------------------------

def separable_pieces(inv: InvestmentSpec, tol: float = thresholds.DEFAULT_TOL,
                     quad_tol: float = 1e-10):
    """Per-product PiecewiseValue list for the separable investment game."""
    red = reduction.reduce_central(inv)
    sols = thresholds.product_thresholds(inv, tol, quad_tol)
    pieces = []
    for prod, sol in zip(red, sols):
        res = Resolvent(prod.avg_cost, prod.sigma_tilde, inv.rho, quad_tol)
        pieces.append(PiecewiseValue.build(res, sol.K_used, c=sol.c))
    return pieces


def separable_value(inv: InvestmentSpec, x, tol: float = thresholds.DEFAULT_TOL,
                    quad_tol: float = 1e-10):
    """v(x) = sum_j v_j(x_j) for the separable game; returns (total, per-product)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    pieces = separable_pieces(inv, tol, quad_tol)
    if len(x) != len(pieces):
        raise ValueError(f"state must have one coordinate per product ({len(pieces)})")
    parts = np.array([value_eval(pv, xi)[0] for pv, xi in zip(pieces, x)])
    return float(parts.sum()), parts


# ---------------------------------------------------------------------------
# Jump-to-band value outside the continuation region
# ---------------------------------------------------------------------------

def band_cost_value(res: Resolvent, band: float, K_eff: float, x):
    """Expected discounted cost of reflecting at +/-band (not necessarily optimal).

    Solves rho w - (s^2/2) w'' = h on the band with w'(+/-band) = +/-K_eff
    (the fixed-policy pricing of both local-time legs), linear continuation
    outside.  At the smooth-pasting threshold this coincides with the value
    function; elsewhere it sits above it.
    """
    if band <= 0:
        raise ValueError("band must be positive")
    kappa = np.sqrt(2.0 * res.rho) / res.sigma_tilde
    a = (K_eff - res.dp(band)) / (kappa * np.sinh(kappa * band))
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    ax = np.abs(np.atleast_1d(x))
    wc = a * np.cosh(kappa * band) + res.p(band)
    w = np.where(ax > band, wc + K_eff * (ax - band),
                 a * np.cosh(kappa * ax) + res.p(ax))
    if scalar:
        return float(w[0])
    return w


def outside_band_value(y, pv: PiecewiseValue, K_plus_eff: Optional[float] = None,
                       K_minus_eff: Optional[float] = None):
    """v(y) = v(pi(y)) + l(y - pi(y)) with pi the clamp onto [-c, c].

    l prices the initial jump displacement d at the proportional legs:
    K_minus_eff * d for d >= 0 (push down) and -K_plus_eff * d for d < 0.
    Both legs default to the symmetric K_eff.
    """
    kp = pv.K_eff if K_plus_eff is None else K_plus_eff
    km = pv.K_eff if K_minus_eff is None else K_minus_eff
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    proj = np.clip(y, -pv.c, pv.c)
    d = y - proj
    leg = np.where(d >= 0, km * d, -kp * d)
    v = value_eval(pv, proj)[0] + leg
    if scalar:
        return float(v[0])
    return v


# ---------------------------------------------------------------------------
# Grid evaluation for export
# ---------------------------------------------------------------------------

def value_grid(pv: PiecewiseValue, xs):
    """Columns (x, v, dv, d2v, branch) ready for delimited export."""
    xs = np.asarray(xs, dtype=float)
    v, dv, d2v = value_eval(pv, xs)
    return {
        "x": xs,
        "v": v,
        "dv": dv,
        "d2v": d2v,
        "branch": branch_id(pv, xs),
    }
