"""Structural problem transformations.

Central-controller aggregation of the investment game, lifting of aggregate
controls back to individual investors, the two-player difference reduction,
and the deterministic demand-profit offset between the two formulations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BandCtrlError
from .model import GameSpec, InvestmentSpec, ReducedProblem1D, RunningCost, effective_volatility

__all__ = [
    "ControlPath",
    "ReducedProduct",
    "CentralReduction",
    "TwoPlayerReduction",
    "reduce_central",
    "lift_control",
    "reduce_two_player",
    "demand_constant",
    "discounted_demand_term",
    "full_investment_cost",
    "reduced_investment_cost",
    "full_product_states",
    "reduced_product_states",
]


# ---------------------------------------------------------------------------
# Control paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ControlPath:
    """Nondecreasing controls sampled on a time grid.

    ``dL`` / ``dM`` hold increments aligned with ``t`` (entry k books at t_k,
    so index 0 is the initial jump).  Leading dimensions identify the owner:
    (P, n+1) for an aggregate path, (M, P, n+1) for the full game.
    """

    t: np.ndarray
    dL: np.ndarray
    dM: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        dL = np.asarray(self.dL, dtype=float)
        dM = np.asarray(self.dM, dtype=float)
        if dL.shape != dM.shape or dL.shape[-1] != len(t):
            raise ValueError("dL and dM must share shape (..., len(t))")
        if np.any(dL < 0) or np.any(dM < 0):
            raise ValueError("control increments must be nonnegative")
        if np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "dL", dL)
        object.__setattr__(self, "dM", dM)

    def cumulative(self):
        return np.cumsum(self.dL, axis=-1), np.cumsum(self.dM, axis=-1)

    @classmethod
    def zero(cls, t, shape):
        t = np.asarray(t, dtype=float)
        z = np.zeros(tuple(shape) + (len(t),))
        return cls(t=t, dL=z, dM=z.copy())


# ---------------------------------------------------------------------------
# Central-controller reduction of the investment game
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedProduct:
    """Per-product data of the aggregated (central-controller) problem."""

    index: int
    x0: float
    mu: float
    sigma_row: np.ndarray      # joint row over (capacity noise, demand noise)
    sigma_tilde: float
    p_star: float
    q_star: float
    i_plus: int                # argmin expansion cost (lowest index on ties)
    i_minus: int               # argmin contraction cost
    avg_cost: Optional[RunningCost] = None

    @property
    def k_star(self) -> Optional[float]:
        return self.p_star if self.p_star == self.q_star else None


@dataclass(frozen=True)
class CentralReduction:
    spec: InvestmentSpec
    products: tuple

    def __iter__(self):
        return iter(self.products)

    def __getitem__(self, j):
        return self.products[j]


def _average_cost(costs) -> RunningCost:
    """Arithmetic mean of the investors' running costs for one product."""
    if all(c.kind == "quadratic" for c in costs):
        centers = {c.center for c in costs}
        if len(centers) == 1:
            return RunningCost.quadratic(
                curvature=float(np.mean([c.curvature for c in costs])),
                center=costs[0].center,
                offset=float(np.mean([c.offset for c in costs])),
            )
    m = len(costs)
    return RunningCost.custom(
        h=lambda y, _c=costs: sum(c.value(y) for c in _c) / m,
        dh=lambda y, _c=costs: sum(c.d1(y) for c in _c) / m,
        d2h=lambda y, _c=costs: sum(c.d2(y) for c in _c) / m,
        c_lo=float(np.mean([c.c_lo for c in costs])),
        c_hi=float(np.mean([c.c_hi for c in costs])),
    )


def reduce_central(inv: InvestmentSpec) -> CentralReduction:
    """Aggregate the M-investor game into one controlled gap process per product.

    Product j's state is x_j = sum_i y_ij - d_j driven by the stacked row
    (sum_i sigma_ij, -gamma_j e_j) over the joint Brownian space; control costs
    collapse to p_j* = min_i p_ij and q_j* = min_i q_ij, with ties broken
    toward the lowest investor index.
    """
    M, P, D = inv.n_investors, inv.n_products, inv.brownian_dim
    products = []
    for j in range(P):
        row = np.zeros(D + P)
        row[:D] = inv.sigma[:, j, :].sum(axis=0)
        row[D + j] = -inv.demand_vol[j]
        products.append(ReducedProduct(
            index=j,
            x0=float(inv.y0[:, j].sum() - inv.d0[j]),
            mu=float(inv.mu[:, j].sum() - inv.demand_drift[j]),
            sigma_row=row,
            sigma_tilde=effective_volatility(row[None, :], mode="joint"),
            p_star=float(inv.p[:, j].min()),
            q_star=float(inv.q[:, j].min()),
            i_plus=int(np.argmin(inv.p[:, j])),
            i_minus=int(np.argmin(inv.q[:, j])),
            avg_cost=_average_cost([inv.costs[i][j] for i in range(M)])
            if inv.costs is not None else None,
        ))
    return CentralReduction(spec=inv, products=tuple(products))


def lift_control(reduced: ControlPath, red: CentralReduction) -> ControlPath:
    """Assign each product's aggregate control to its argmin-cost investors.

    Expansion goes entirely to i_plus(j), contraction to i_minus(j); everyone
    else stays idle.  The lifted control reproduces the aggregate state path
    and prices control at p_j*, q_j*.
    """
    M = red.spec.n_investors
    P = red.spec.n_products
    if reduced.dL.shape[:-1] != (P,):
        raise ValueError("reduced control must be shaped (P, n+1)")
    n1 = reduced.dL.shape[-1]
    dL = np.zeros((M, P, n1))
    dM = np.zeros((M, P, n1))
    for prod in red:
        dL[prod.i_plus, prod.index] = reduced.dL[prod.index]
        dM[prod.i_minus, prod.index] = reduced.dM[prod.index]
    return ControlPath(t=reduced.t, dL=dL, dM=dM)


def demand_constant(inv: InvestmentSpec) -> float:
    """Deterministic profit-of-demand offset sum_j (r_j/M)(alpha_j/rho^2 + d_j/rho).

    This is the infinite-horizon expectation of the discounted demand profit
    flow.  Note the bookkeeping direction: on any shared noise path,
    full-model cost = reduced-model cost - (discounted demand term), so the
    reduced value sits exactly this far above the full one when demand is
    deterministic.
    """
    M = inv.n_investors
    rho = inv.rho
    return float(np.sum(inv.r / M * (inv.demand_drift / rho**2 + inv.d0 / rho)))


# ---------------------------------------------------------------------------
# Discounted quadratures shared by the cost evaluators
# ---------------------------------------------------------------------------

def _disc_trapz(fvals, t, rho):
    """Trapezoidal int e^{-rho t} f(t) dt along the last axis."""
    w = np.exp(-rho * t)
    return np.trapezoid(fvals * w, t, axis=-1)


def _disc_left(increments, t, rho):
    """Sum e^{-rho t_k} * inc_k (cadlag booking at the left endpoint)."""
    w = np.exp(-rho * t)
    return np.sum(increments * w, axis=-1)


def _demand_paths(inv, t, dW=None):
    """Demand paths D_t^j on the grid; deterministic when dW is None."""
    base = inv.d0[None, :] + np.outer(t, inv.demand_drift)        # (n+1, P)
    if dW is None:
        return base[None, :, :]
    W = np.concatenate([np.zeros((dW.shape[0], 1, dW.shape[2])), np.cumsum(dW, axis=1)], axis=1)
    return base[None, :, :] + inv.demand_vol[None, None, :] * W


def discounted_demand_term(inv: InvestmentSpec, t, dW=None):
    """Per-path grid quadrature of sum_j (r_j/M) int e^{-rho t} D_t^j dt.

    Converges to demand_constant as the horizon and grid refine; on a fixed
    grid it is the exact offset between the two cost functionals.
    """
    t = np.asarray(t, dtype=float)
    D = _demand_paths(inv, t, dW)                                  # (paths, n+1, P)
    flows = np.einsum("j,pkj->pk", inv.r / inv.n_investors, D)
    out = _disc_trapz(flows, t, inv.rho)
    return out if dW is not None else float(out[0])


def full_product_states(inv: InvestmentSpec, ctrl: ControlPath, dB, dW=None):
    """Gap paths X^j = sum_i Y^{i,j} - D^j under a full (M, P) control."""
    t = ctrl.t
    n_paths = dB.shape[0]
    B = np.concatenate([np.zeros((n_paths, 1, dB.shape[2])), np.cumsum(dB, axis=1)], axis=1)
    L, Mc = ctrl.cumulative()                                      # (M, P, n+1)
    # capacity paths per investor/product: (paths, M, P, n+1)
    drift = inv.mu[None, :, :, None] * t[None, None, None, :]
    noise = np.einsum("ijd,pkd->pijk", inv.sigma, B)
    Y = inv.y0[None, :, :, None] + drift + noise + (L - Mc)[None, :, :, :]
    D = _demand_paths(inv, t, dW)                                  # (paths, n+1, P)
    X = Y.sum(axis=1) - np.transpose(D, (0, 2, 1))                 # (paths, P, n+1)
    return X, Y, D


def reduced_product_states(inv: InvestmentSpec, red: CentralReduction,
                           ctrl: ControlPath, dB, dW=None):
    """Gap paths from the aggregated dynamics on the same noise."""
    t = ctrl.t
    n_paths = dB.shape[0]
    B = np.concatenate([np.zeros((n_paths, 1, dB.shape[2])), np.cumsum(dB, axis=1)], axis=1)
    if dW is None:
        W = np.zeros((n_paths, len(t), inv.n_products))
    else:
        W = np.concatenate([np.zeros((n_paths, 1, inv.n_products)), np.cumsum(dW, axis=1)], axis=1)
    L, Mc = ctrl.cumulative()                                      # (P, n+1)
    X = np.empty((n_paths, inv.n_products, len(t)))
    for prod in red:
        j = prod.index
        sig_cap = inv.sigma[:, j, :].sum(axis=0)
        noise = B @ sig_cap - inv.demand_vol[j] * W[:, :, j]
        X[:, j, :] = prod.x0 + prod.mu * t[None, :] + noise + (L[j] - Mc[j])[None, :]
    return X


def _running_cost_full(inv, X):
    """(1/M) sum_i H^i(X) with separable H^i = sum_j h_ij(x_j)."""
    if inv.costs is None:
        raise BandCtrlError("investment spec carries no running costs")
    M = inv.n_investors
    out = np.zeros(X.shape[0::2])
    for i in range(M):
        for j in range(inv.n_products):
            out += inv.costs[i][j].value(X[:, j, :]) / M
    return out


def full_investment_cost(inv: InvestmentSpec, ctrl: ControlPath, dB, dW=None):
    """Per-path discounted cost of the full M-investor model: (1/M) sum_i J^i."""
    t = ctrl.t
    X, Y, _ = full_product_states(inv, ctrl, dB, dW)
    run = _running_cost_full(inv, X)
    profit = np.einsum("j,pijk->pk", inv.r, Y) / inv.n_investors
    cost = _disc_trapz(run - profit, t, inv.rho)
    ctrl_cost = (_disc_left(np.einsum("ij,ijk->k", inv.p, ctrl.dL)[None, :], t, inv.rho)
                 + _disc_left(np.einsum("ij,ijk->k", inv.q, ctrl.dM)[None, :], t, inv.rho))
    return cost + ctrl_cost / inv.n_investors


def reduced_investment_cost(inv: InvestmentSpec, red: CentralReduction,
                            ctrl: ControlPath, dB, dW=None):
    """Per-path discounted cost of the aggregated model (p*, q* pricing)."""
    t = ctrl.t
    X = reduced_product_states(inv, red, ctrl, dB, dW)
    run = _running_cost_full(inv, X)
    gap_profit = np.einsum("j,pjk->pk", inv.r / inv.n_investors, X)
    cost = _disc_trapz(run - gap_profit, t, inv.rho)
    p_star = np.array([prod.p_star for prod in red])
    q_star = np.array([prod.q_star for prod in red])
    ctrl_cost = (_disc_left(np.einsum("j,jk->k", p_star, ctrl.dL)[None, :], t, inv.rho)
                 + _disc_left(np.einsum("j,jk->k", q_star, ctrl.dM)[None, :], t, inv.rho))
    return cost + ctrl_cost / inv.n_investors


# ---------------------------------------------------------------------------
# Two-player difference reduction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoPlayerReduction:
    problem: ReducedProblem1D
    zero_player: Optional[int]   # index of the player whose control vanishes
    unique_split: bool           # False when K1 == K2 (policy split not unique)
    cheap_player: int
    K_cheap: float


def reduce_two_player(spec: GameSpec, sigma_convention: str = "joint") -> TwoPlayerReduction:
    """Collapse the symmetric two-player game to a band problem in y = x1 - x2.

    Requires the difference-cost shape with zero drift, equal welfare weights,
    and symmetric per-player costs K_i^+ = K_i^-.  The effective one-sided
    cost is min(K1, K2)/2; when the costs differ the expensive player's
    control is identically zero under the optimal policy.
    """
    if spec.n_players != 2 or spec.difference_cost is None:
        raise BandCtrlError("two-player reduction needs N = 2 with a difference cost")
    if np.any(spec.mu != 0):
        raise BandCtrlError("closed-form reduction assumes zero drift; use the FD solver")
    if not np.allclose(spec.K_plus, spec.K_minus):
        raise BandCtrlError(
            "asymmetric intervention costs (K+ != K-) have no closed form; use the FD solver")
    if abs(spec.L[0] - spec.L[1]) > 1e-12:
        raise BandCtrlError("only equal welfare weights are supported in the reduction")
    if not spec.difference_cost.is_symmetric():
        raise BandCtrlError("difference cost must be symmetric for the closed-form solvers")

    K = spec.K_plus
    cheap = int(np.argmin(K))
    sigma_tilde = effective_volatility(spec.sigma, mode=sigma_convention)
    y0 = 0.0 if spec.x0 is None else float(spec.x0[0] - spec.x0[1])
    problem = ReducedProblem1D(
        sigma_tilde=sigma_tilde,
        rho=spec.rho,
        K_eff=float(K[cheap]) / 2.0,
        cost=spec.difference_cost,
        x0=y0,
    )
    tie = bool(abs(K[0] - K[1]) <= 1e-15)
    return TwoPlayerReduction(
        problem=problem,
        zero_player=None if tie else 1 - cheap,
        unique_split=not tie,
        cheap_player=cheap,
        K_cheap=float(K[cheap]),
    )
