"""Reflected-path simulation, Monte Carlo cost estimation, benchmark analytics.

Paths are driven by counter-based Philox streams keyed on (seed, path index),
so batch statistics do not depend on chunking or scheduling.  The two-sided
band is enforced by per-step projection, which books each overshoot into the
matching local time; for increments smaller than the band width this equals
the exact Skorokhod map of the piecewise-linear driver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from . import _kernels, thresholds
from .errors import BandCtrlError
from .model import GameSpec, InvestmentSpec, Resolvent, RunningCost
from .reduction import demand_constant, reduce_central, reduce_two_player

__all__ = [
    "SimConfig",
    "ReflectedPathBatch",
    "CostEstimate",
    "TwoPlayerBatch",
    "SeparableBatch",
    "default_horizon",
    "path_rng",
    "skorokhod_map_1d",
    "estimate_cost",
    "simulate_two_player",
    "simulate_separable",
    "benchmark_series",
]

_CHUNK_BUDGET = 2**25  # noise doubles held per chunk (~256 MB)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    """Time grid, batch size, and RNG policy of one simulation run."""

    dt: float
    T: float
    n_paths: int
    seed: int
    antithetic: bool = False
    keep_paths: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.T < self.dt:
            raise ValueError("horizon must cover at least one step")
        if self.n_paths < 1:
            raise ValueError("need at least one path")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit in 64 bits")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic batches need an even path count")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))

    @property
    def horizon(self) -> float:
        """Effective horizon n_steps * dt (T rounded to the grid)."""
        return self.n_steps * self.dt

    def time_grid(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    def discount_truncation(self, rho: float) -> float:
        return float(np.exp(-rho * self.horizon))


def default_horizon(rho: float, dt: float, eps: float = 1e-5) -> float:
    """Smallest grid-aligned T with e^{-rho T} <= eps."""
    T = -np.log(eps) / rho
    return float(np.ceil(T / dt) * dt)


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for one path: Philox keyed on (seed, index)."""
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _chunks(n: int, size: int):
    for lo in range(0, n, size):
        yield lo, min(lo + size, n)


def _noise_block(seed, lo, hi, n_steps, antithetic, width=1):
    """Stacked per-path normals for paths [lo, hi); antithetic pairs share a key."""
    shape = (n_steps, width) if width > 1 else (n_steps,)
    rows = np.empty((hi - lo,) + shape)
    for i in range(lo, hi):
        if antithetic:
            z = path_rng(seed, i // 2).standard_normal(shape)
            rows[i - lo] = z if i % 2 == 0 else -z
        else:
            rows[i - lo] = path_rng(seed, i).standard_normal(shape)
    return rows


def _mean_stderr(per_path, antithetic):
    """Batch mean and standard error; antithetic pairs collapse to pair means."""
    vals = per_path
    if antithetic:
        vals = 0.5 * (per_path[0::2] + per_path[1::2])
    mean = float(np.mean(vals))
    if len(vals) < 2:
        return mean, float("nan")
    return mean, float(np.std(vals, ddof=1) / np.sqrt(len(vals)))


# ---------------------------------------------------------------------------
# Skorokhod map
# ---------------------------------------------------------------------------

def skorokhod_map_1d(w, c: float, x0: float = 0.0):
    """Two-sided Skorokhod solution for a sampled driver path.

    ``w`` holds driver values on the grid (w[0] is the t=0 driver level,
    normally 0); the reflected state starts at x0 projected into [-c, c] with
    the initial jump booked at t=0.  Returns (x, xi_plus, xi_minus) with the
    local times cumulative.  Per-step single projection; exact while driver
    increments stay below 2c.
    """
    if c <= 0:
        raise BandCtrlError("band half-width must be positive")
    w = np.asarray(w, dtype=float)
    n = len(w)
    x = np.empty(n)
    xp = np.empty(n)
    xm = np.empty(n)
    state = x0
    up = dn = 0.0
    if state > c:
        dn += state - c
        state = c
    elif state < -c:
        up += -c - state
        state = -c
    x[0], xp[0], xm[0] = state, up, dn
    for k in range(1, n):
        state += w[k] - w[k - 1]
        if state > c:
            dn += state - c
            state = c
        elif state < -c:
            up += -c - state
            state = -c
        x[k], xp[k], xm[k] = state, up, dn
    return x, xp, xm


# ---------------------------------------------------------------------------
# Cost estimation under a fixed band policy
# ---------------------------------------------------------------------------

@dataclass
class ReflectedPathBatch:
    """Stored sample paths plus per-path cost statistics of a batch."""

    t: np.ndarray
    band: float
    costs: np.ndarray                   # per-path discounted cost, all paths
    xi_plus_total: np.ndarray
    xi_minus_total: np.ndarray
    max_abs_state: float                # after the t=0 projection
    mean: float
    stderr: float
    states: Optional[np.ndarray] = None      # (kept, n_steps+1)
    xi_plus: Optional[np.ndarray] = None
    xi_minus: Optional[np.ndarray] = None

    def confined(self, tol: float = 1e-12) -> bool:
        return self.max_abs_state <= self.band + tol


@dataclass(frozen=True)
class CostEstimate:
    mean: float
    stderr: float
    truncation_bound: float
    discount_truncation: float
    batch: ReflectedPathBatch

    def within(self, target: float, n_se: float = 3.0, extra: float = 0.0) -> bool:
        return abs(self.mean - target) <= n_se * self.stderr + self.truncation_bound + extra


def _generic_band_chunk(z, x0, c, sig, dt, cost, disc):
    """Numpy fallback of the band kernel for non-quadratic running costs."""
    npaths, nsteps = z.shape
    sq = sig * np.sqrt(dt)
    x = np.full(npaths, float(x0))
    up_d = np.zeros(npaths)
    dn_d = np.zeros(npaths)
    up_t = np.zeros(npaths)
    dn_t = np.zeros(npaths)
    over = x - c
    np.clip(over, 0.0, None, out=over)
    dn_d += over
    dn_t += over
    x -= over
    under = -c - x
    np.clip(under, 0.0, None, out=under)
    up_d += under
    up_t += under
    x += under
    run = np.zeros(npaths)
    f_prev = disc[0] * cost.value(x)
    mx = np.zeros(npaths)
    for k in range(nsteps):
        x += sq * z[:, k]
        over = np.maximum(x - c, 0.0)
        dn_d += disc[k] * over
        dn_t += over
        x -= over
        under = np.maximum(-c - x, 0.0)
        up_d += disc[k] * under
        up_t += under
        x += under
        np.maximum(mx, np.abs(x), out=mx)
        f_new = disc[k + 1] * cost.value(x)
        run += 0.5 * dt * (f_prev + f_new)
        f_prev = f_new
    out = np.empty((npaths, 6))
    out[:, _kernels.RUN] = run
    out[:, _kernels.UP_D] = up_d
    out[:, _kernels.DN_D] = dn_d
    out[:, _kernels.UP_T] = up_t
    out[:, _kernels.DN_T] = dn_t
    out[:, _kernels.MAXABS] = mx
    return out


def estimate_cost(cfg: SimConfig, band: float, cost: RunningCost, rho: float,
                  K_plus: float, K_minus: float, x0: float = 0.0,
                  sigma_tilde: float = 1.0) -> CostEstimate:
    """Monte Carlo discounted cost of reflecting at +/-band.

    Per path: trapezoidal int e^{-rho t} h(X_t) dt plus K+ dxi+ and K- dxi-
    discounted at each step's left endpoint.  The reported truncation bound
    sup_{[-c,c]} h * e^{-rho T} / rho covers the discarded tail of the
    running cost.
    """
    if band <= 0:
        raise BandCtrlError("band half-width must be positive")
    n_steps = cfg.n_steps
    t = cfg.time_grid()
    disc = np.exp(-rho * t)
    per = np.empty((cfg.n_paths, 6))
    chunk = max(1, min(cfg.n_paths, _CHUNK_BUDGET // max(1, n_steps)))
    if cfg.antithetic and chunk % 2:
        chunk += 1
    quadratic = cost.kind == "quadratic"
    for lo, hi in _chunks(cfg.n_paths, chunk):
        z = _noise_block(cfg.seed, lo, hi, n_steps, cfg.antithetic)
        if quadratic:
            _kernels.band_costs_quadratic(z, x0, band, sigma_tilde, cfg.dt,
                                          cost.curvature, cost.center, cost.offset,
                                          disc, per[lo:hi])
        else:
            per[lo:hi] = _generic_band_chunk(z, x0, band, sigma_tilde, cfg.dt, cost, disc)

    costs = (per[:, _kernels.RUN]
             + K_plus * per[:, _kernels.UP_D]
             + K_minus * per[:, _kernels.DN_D])
    mean, stderr = _mean_stderr(costs, cfg.antithetic)

    states = xi_p = xi_m = None
    if cfg.keep_paths > 0:
        k = min(cfg.keep_paths, cfg.n_paths)
        states = np.empty((k, n_steps + 1))
        xi_p = np.empty((k, n_steps + 1))
        xi_m = np.empty((k, n_steps + 1))
        for i in range(k):
            z = _noise_block(cfg.seed, i, i + 1, n_steps, cfg.antithetic)[0]
            w = np.concatenate([[0.0], np.cumsum(sigma_tilde * np.sqrt(cfg.dt) * z)])
            states[i], xi_p[i], xi_m[i] = skorokhod_map_1d(w, band, x0)

    edge = max(float(cost.value(band)), float(cost.value(-band)))
    batch = ReflectedPathBatch(
        t=t, band=band, costs=costs,
        xi_plus_total=per[:, _kernels.UP_T], xi_minus_total=per[:, _kernels.DN_T],
        max_abs_state=float(per[:, _kernels.MAXABS].max()),
        mean=mean, stderr=stderr, states=states, xi_plus=xi_p, xi_minus=xi_m)
    return CostEstimate(
        mean=mean, stderr=stderr,
        truncation_bound=edge * cfg.discount_truncation(rho) / rho,
        discount_truncation=cfg.discount_truncation(rho),
        batch=batch)


# ---------------------------------------------------------------------------
# Two-player simulation
# ---------------------------------------------------------------------------

@dataclass
class TwoPlayerBatch:
    """Joint paths of both players under a band policy on the spread."""

    policy: str
    band: float
    t: np.ndarray
    J1: np.ndarray                      # per-path discounted cost, player 1
    J2: np.ndarray
    aggregate: np.ndarray               # L-weighted welfare cost per path
    reduced_cost: np.ndarray            # same paths priced at K_eff (regulator form)
    run_cost: np.ndarray
    xi1_total: np.ndarray               # per-path total control of player 1
    xi2_total: np.ndarray
    max_abs_spread: float
    mean: float
    stderr: float
    y_window_mean: np.ndarray
    y_window_sq: np.ndarray
    xbar_window_mean: np.ndarray
    xbar_window_sq: np.ndarray
    kept: Dict[str, np.ndarray] = field(default_factory=dict)

    def spread_variance(self):
        """Stationary-window variance of the spread with its standard error."""
        var = self.y_window_sq - self.y_window_mean**2
        return float(np.mean(var)), float(np.std(var, ddof=1) / np.sqrt(len(var)))

    def benchmark_variance(self):
        var = self.xbar_window_sq - self.xbar_window_mean**2
        return float(np.mean(var)), float(np.std(var, ddof=1) / np.sqrt(len(var)))


def _two_player_kept_paths(cfg, k, x1_0, x2_0, l11, l21, l22, band, policy_code):
    """Re-drive the first k paths storing full trajectories and control legs."""
    n = cfg.n_steps
    out = {name: np.zeros((k, n + 1)) for name in
           ("x1", "x2", "xi1_plus", "xi1_minus", "xi2_plus", "xi2_minus")}
    sqdt = np.sqrt(cfg.dt)
    for i in range(k):
        z = _noise_block(cfg.seed, i, i + 1, n, cfg.antithetic, width=2)[0]
        x1, x2 = x1_0, x2_0
        x1p = x1m = x2p = x2m = 0.0
        y = x1 - x2
        if y > band:
            e = y - band
            if policy_code == 0:
                x2p += e
                x2 = x1 - band
            else:
                x1m += e
                x1 = x2 + band
        elif y < -band:
            e = -band - y
            x2m += e
            x2 = x1 + band
        for name, v in (("x1", x1), ("x2", x2), ("xi1_plus", x1p), ("xi1_minus", x1m),
                        ("xi2_plus", x2p), ("xi2_minus", x2m)):
            out[name][i, 0] = v
        for s in range(n):
            x1 += l11 * z[s, 0] * sqdt
            x2 += (l21 * z[s, 0] + l22 * z[s, 1]) * sqdt
            y = x1 - x2
            if y > band:
                e = y - band
                if policy_code == 0:
                    x2p += e
                    x2 = x1 - band
                else:
                    x1m += e
                    x1 = x2 + band
            elif y < -band:
                e = -band - y
                x2m += e
                x2 = x1 + band
            for name, v in (("x1", x1), ("x2", x2), ("xi1_plus", x1p),
                            ("xi1_minus", x1m), ("xi2_plus", x2p), ("xi2_minus", x2m)):
                out[name][i, s + 1] = v
    return out


def simulate_two_player(spec: GameSpec, policy: str, cfg: SimConfig,
                        band: Optional[float] = None,
                        sigma_convention: str = "joint",
                        split: str = "paper") -> TwoPlayerBatch:
    """Drive the spread y = X1 - X2 through the band policy and attribute control.

    policy ``pareto`` uses the regulator band (K_eff = min K / 2); with
    K1 > K2 all control falls on player 2, with K1 = K2 the default split puts
    player 1 at the upper edge and player 2 at the lower one (``split="single"``
    selects the equivalent all-on-player-2 variant).  policy ``nash`` needs
    K1 = K2 and uses the wider equilibrium band with each player contracting
    at its own edge.  policy ``band`` reflects at a caller-supplied half-width.
    """
    red = reduce_two_player(spec, sigma_convention)
    problem = red.problem
    res = Resolvent(problem.cost, problem.sigma_tilde, problem.rho)
    K1, K2 = float(spec.K_plus[0]), float(spec.K_plus[1])
    tie = red.zero_player is None

    if policy == "pareto":
        c = thresholds.solve_threshold(res, problem.K_eff).c
        code = 1 if (tie and split == "paper") else 0
        price = problem.K_eff
    elif policy == "nash":
        if not tie:
            raise BandCtrlError("the Nash comparison is defined for K1 = K2")
        c = thresholds.solve_threshold(res, red.K_cheap).c
        code = 1
        price = problem.K_eff
    elif policy == "band":
        if band is None or band <= 0:
            raise BandCtrlError("custom band policy needs a positive half-width")
        c = float(band)
        code = 1 if (tie and split == "paper") else 0
        price = problem.K_eff
    else:
        raise BandCtrlError(f"unknown policy {policy!r}")

    if not tie and code == 1:
        code = 0  # unequal costs: the cheap player must do all the work
    if red.zero_player == 1:
        raise BandCtrlError("relabel players so that K1 >= K2 for simulation")

    cost = problem.cost
    if cost.kind != "quadratic":
        raise BandCtrlError("two-player simulation currently supports quadratic costs")

    S = spec.sigma @ spec.sigma.T
    l11 = np.sqrt(S[0, 0])
    l21 = S[0, 1] / l11
    l22 = np.sqrt(max(S[1, 1] - l21**2, 0.0))
    x0 = spec.x0 if spec.x0 is not None else np.zeros(2)

    n_steps = cfg.n_steps
    t = cfg.time_grid()
    disc = np.exp(-spec.rho * t)
    win_start = n_steps // 2
    per = np.empty((cfg.n_paths, 10))
    chunk = max(1, min(cfg.n_paths, _CHUNK_BUDGET // max(1, 2 * n_steps)))
    if cfg.antithetic and chunk % 2:
        chunk += 1
    a1, a2 = spec.benchmark_weights
    for lo, hi in _chunks(cfg.n_paths, chunk):
        z = _noise_block(cfg.seed, lo, hi, n_steps, cfg.antithetic, width=2)
        _kernels.two_player_band_quadratic(
            z, float(x0[0]), float(x0[1]), l11, l21, l22, c, cfg.dt,
            cost.curvature, cost.center, cost.offset,
            float(a1), float(a2), code, win_start, disc, per[lo:hi])

    run = per[:, _kernels.TP_RUN]
    up_d = per[:, _kernels.TP_UP_D]
    dn_d = per[:, _kernels.TP_DN_D]
    if code == 0:
        J1 = run.copy()
        J2 = run + K2 * (dn_d + up_d)
        xi1_tot = np.zeros(cfg.n_paths)
        xi2_tot = per[:, _kernels.TP_UP_T] + per[:, _kernels.TP_DN_T]
    else:
        J1 = run + K1 * dn_d
        J2 = run + K2 * up_d
        xi1_tot = per[:, _kernels.TP_DN_T]
        xi2_tot = per[:, _kernels.TP_UP_T]
    aggregate = spec.L[0] * J1 + spec.L[1] * J2
    reduced = run + price * (dn_d + up_d)
    mean, stderr = _mean_stderr(aggregate, cfg.antithetic)

    kept = {}
    if cfg.keep_paths > 0:
        kept = _two_player_kept_paths(cfg, min(cfg.keep_paths, cfg.n_paths),
                                      float(x0[0]), float(x0[1]), l11, l21, l22, c, code)
        kept["t"] = t

    return TwoPlayerBatch(
        policy=policy, band=c, t=t, J1=J1, J2=J2, aggregate=aggregate,
        reduced_cost=reduced, run_cost=run, xi1_total=xi1_tot, xi2_total=xi2_tot,
        max_abs_spread=float(per[:, _kernels.TP_MAXABS].max()),
        mean=mean, stderr=stderr,
        y_window_mean=per[:, _kernels.TP_Y_MEAN],
        y_window_sq=per[:, _kernels.TP_Y2_MEAN],
        xbar_window_mean=per[:, _kernels.TP_XBAR_MEAN],
        xbar_window_sq=per[:, _kernels.TP_XBAR2_MEAN],
        kept=kept)


# ---------------------------------------------------------------------------
# Separable multi-product simulation
# ---------------------------------------------------------------------------

@dataclass
class SeparableBatch:
    estimates: list
    total_mean: float
    total_stderr: float
    demand_offset: float

    @property
    def full_model_mean(self):
        """Reduced total restated for the full model (demand profit added back)."""
        return self.total_mean - self.demand_offset


def simulate_separable(inv: InvestmentSpec, cfg: SimConfig, sols=None,
                       include_demand_offset: bool = False) -> SeparableBatch:
    """Independent per-product band simulations of the separable game.

    Product j reflects at its threshold b_j with both control legs priced at
    k_j*/M; expected costs add across products.  Streams are keyed on
    (seed + j, path), keeping products independent and runs reproducible.
    """
    red = reduce_central(inv)
    if sols is None:
        sols = thresholds.product_thresholds(inv)
    estimates = []
    totals = np.zeros(cfg.n_paths)
    for prod, sol in zip(red, sols):
        sub = SimConfig(dt=cfg.dt, T=cfg.T, n_paths=cfg.n_paths,
                        seed=(cfg.seed + 0x9E3779B97F4A7C15 * (prod.index + 1)) % 2**64,
                        antithetic=cfg.antithetic, keep_paths=cfg.keep_paths)
        est = estimate_cost(sub, sol.c, prod.avg_cost, inv.rho,
                            K_plus=sol.K_used, K_minus=sol.K_used,
                            x0=prod.x0, sigma_tilde=prod.sigma_tilde)
        estimates.append(est)
        totals += est.batch.costs
    mean, stderr = _mean_stderr(totals, cfg.antithetic)
    offset = demand_constant(inv) if include_demand_offset else 0.0
    return SeparableBatch(estimates=estimates, total_mean=mean,
                          total_stderr=stderr, demand_offset=offset)


def simulate_uncontrolled(spec: GameSpec, cfg: SimConfig) -> np.ndarray:
    """Uncontrolled N-player spread paths (n_paths, n_steps+1, N).

    Used for benchmark analytics when no band policy applies (general N).
    Paths are stored in full; keep n_paths moderate.
    """
    n = cfg.n_steps
    N, D = spec.sigma.shape
    t = cfg.time_grid()
    x0 = spec.x0 if spec.x0 is not None else np.zeros(N)
    states = np.empty((cfg.n_paths, n + 1, N))
    sqdt = np.sqrt(cfg.dt)
    for i in range(cfg.n_paths):
        z = path_rng(cfg.seed, i).standard_normal((n, D))
        B = np.vstack([np.zeros(D), np.cumsum(z * sqdt, axis=0)])
        states[i] = x0[None, :] + np.outer(t, spec.mu) + B @ spec.sigma.T
    return states


# ---------------------------------------------------------------------------
# Benchmark-rate analytics
# ---------------------------------------------------------------------------

def benchmark_series(states: np.ndarray, weights):
    """Weighted benchmark path and dispersion summary for stored spread paths.

    ``states`` is (n_paths, n_steps+1, N).  Returns (xbar, stats) where xbar
    is (n_paths, n_steps+1) and stats summarizes the benchmark mean/variance
    and the per-player deviation variance over all post-0 samples.
    """
    states = np.asarray(states, dtype=float)
    if states.ndim == 2:
        states = states[None, :, :]
    w = np.asarray(weights, dtype=float)
    if states.shape[2] != len(w):
        raise ValueError("weights must match the number of players")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
        raise ValueError("weights must be nonnegative and sum to 1")
    xbar = states @ w
    dev = states - xbar[:, :, None]
    body = slice(1, None)  # skip the possibly-jumped initial point
    stats = {
        "xbar_mean": float(np.mean(xbar[:, body])),
        "xbar_var": float(np.var(xbar[:, body])),
    }
    for i in range(len(w)):
        stats[f"spread_var_{i + 1}"] = float(np.var(dev[:, body, i]))
    return xbar, stats
