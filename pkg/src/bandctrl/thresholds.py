"""Free-boundary (smooth-pasting) threshold equations and their solvers.

The interior value A cosh(kappa x) + p(x) pastes C1/C2 onto the linear
continuation of slope K_eff exactly when

    (p'(x) - K_eff) / p''(x) = (sigma/sqrt(2 rho)) tanh(sqrt(2 rho) x / sigma),

so the smoothing residual F below vanishes only at the optimal band edge.
Pareto, Nash, and per-product thresholds differ only in K_eff:
K/2 for the equal-weight regulator, K for the Nash equilibrium, and
k*/M for M investors sharing one product.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateCurvatureError, NoRootError, AccuracyError, BandCtrlError
from .model import InvestmentSpec, Resolvent
from . import reduction

__all__ = [
    "ThresholdSolution",
    "ThresholdComparison",
    "smoothing_residual",
    "solve_threshold",
    "compare_nash_pareto",
    "product_thresholds",
]

DEFAULT_TOL = 1e-12
MAX_DOUBLINGS = 64


@dataclass(frozen=True)
class ThresholdSolution:
    """A solved free boundary with residual diagnostics."""

    c: float
    K_used: float
    residual: float
    bracket: Tuple[float, float]
    iterations: int

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("threshold must be positive")


def smoothing_residual(x: float, res: Resolvent, K_eff: float) -> float:
    """F(x) = (p'(x) - K_eff)/p''(x) - (sigma/sqrt(2 rho)) tanh(sqrt(2 rho) x/sigma).

    Negative at 0 for a symmetric cost with K_eff > 0, eventually positive,
    so the unique positive root is the band half-width.
    """
    if x < 0:
        raise ValueError("residual is defined for x >= 0")
    curv = res.d2p(x)
    floor, _ = res.curvature_bounds()
    if curv < 0.5 * floor:
        raise DegenerateCurvatureError(
            f"p''({x:.4g}) = {curv:.4g} below the curvature floor {floor:.4g}")
    kappa = np.sqrt(2.0 * res.rho) / res.sigma_tilde
    return (res.dp(x) - K_eff) / curv - np.tanh(kappa * x) / kappa


def solve_threshold(res: Resolvent, K_eff: float, tol: float = DEFAULT_TOL) -> ThresholdSolution:
    """Unique positive root of the smoothing residual.

    Bracketing expands hi geometrically from max(K_eff, sigma/sqrt(2 rho));
    the root is then pinned by a bisection/inverse-quadratic hybrid and
    certified to |F(c)| < tol.
    """
    if K_eff <= 0:
        raise ValueError("K_eff must be positive")
    if res.cost.center != 0 or not res.cost.is_symmetric():
        raise BandCtrlError("the closed-form threshold needs a cost symmetric about 0; "
                            "shift coordinates or use the FD solver")
    F = lambda x: smoothing_residual(x, res, K_eff)
    f0 = F(0.0)
    if f0 >= 0:
        raise BandCtrlError(
            "F(0) >= 0: cost must be symmetric about the origin (p'(0) = 0) with K_eff > 0")
    lo, flo = 0.0, f0
    hi = max(K_eff, res.sigma_tilde / np.sqrt(2.0 * res.rho))
    n_iter = 0
    for _ in range(MAX_DOUBLINGS):
        fhi = F(hi)
        n_iter += 1
        if fhi > 0:
            break
        lo, flo = hi, fhi
        hi *= 2.0
    else:
        raise NoRootError(f"no sign change within {MAX_DOUBLINGS} doublings (hi={hi:.3g})")
    bracket = (lo, hi)

    c, info = brentq(F, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                     maxiter=200, full_output=True)
    n_iter += info.iterations
    fc = F(c)
    # polish by bisection if the hybrid stopped on interval width alone
    blo, bhi = lo, hi
    while abs(fc) > tol and bhi - blo > 1e-17:
        mid = 0.5 * (blo + bhi)
        fmid = F(mid)
        n_iter += 1
        if fmid == 0.0:
            c, fc = mid, fmid
            break
        if (fmid < 0) == (flo < 0):
            blo = mid
        else:
            bhi = mid
        c, fc = mid, fmid
    if abs(fc) > tol:
        raise AccuracyError("threshold residual above tolerance", achieved=abs(fc), target=tol)
    return ThresholdSolution(c=float(c), K_used=float(K_eff), residual=float(fc),
                             bracket=bracket, iterations=n_iter)


@dataclass(frozen=True)
class ThresholdComparison:
    pareto: ThresholdSolution
    nash: ThresholdSolution

    @property
    def c1(self) -> float:
        return self.pareto.c

    @property
    def c2(self) -> float:
        return self.nash.c

    @property
    def gap(self) -> float:
        return self.nash.c - self.pareto.c


def compare_nash_pareto(res: Resolvent, K: float, tol: float = DEFAULT_TOL) -> ThresholdComparison:
    """Solve the regulator band (K/2) and the Nash band (K) for equal player costs.

    The Nash band is strictly wider: the two residuals differ by K/(2 p'') > 0.
    """
    if K <= 0:
        raise ValueError("K must be positive")
    cmp = ThresholdComparison(
        pareto=solve_threshold(res, K / 2.0, tol),
        nash=solve_threshold(res, K, tol),
    )
    if not cmp.gap > 0:
        raise BandCtrlError(f"threshold ordering violated: c2={cmp.c2} <= c1={cmp.c1}")
    return cmp


def product_thresholds(inv: InvestmentSpec, tol: float = DEFAULT_TOL,
                       quad_tol: float = 1e-10):
    """Band half-widths b_j for the separable multi-product investment game.

    Each product reduces to a one-dimensional problem with the investor-average
    running cost, the aggregated volatility, and K_eff = k_j*/M.  Requires the
    symmetric shape: zero reduced drift, r_j = 0, and p_j* = q_j*.
    """
    if inv.costs is None:
        raise BandCtrlError("separable thresholds need per-investor running costs")
    red = reduction.reduce_central(inv)
    out = []
    errors = []
    for prod in red:
        try:
            if prod.k_star is None:
                raise BandCtrlError(
                    f"p*={prod.p_star} != q*={prod.q_star}: no symmetric closed form")
            if abs(prod.mu) > 1e-14 or inv.r[prod.index] != 0:
                raise BandCtrlError("closed form needs zero reduced drift and r_j = 0")
            res = Resolvent(prod.avg_cost, prod.sigma_tilde, inv.rho, quad_tol)
            out.append(solve_threshold(res, prod.k_star / inv.n_investors, tol))
        except BandCtrlError as exc:
            errors.append(f"product {prod.index}: {exc}")
    if errors:
        raise BandCtrlError("; ".join(errors))
    return out
