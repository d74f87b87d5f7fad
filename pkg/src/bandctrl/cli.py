"""Command-line front end.

Commands: solve | simulate | compare | verify | sweep.  Every command reads a
YAML config (see config.py), applies SCK_* environment and flag overrides,
and writes CSV reports plus companion PNG figures into the output directory
together with the fully resolved configuration.

Exit codes: 0 all diagnostics pass, 1 a diagnostic check failed,
2 configuration/schema error, 3 solver error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import hjb_fd, reports, sde, thresholds, valuefn
from .config import RunConfig, load_config, _parse_cost
from .errors import BandCtrlError, ConfigError
from .model import Resolvent, RunningCost, resolvent_build, validate_assumptions
from .reduction import reduce_central, reduce_two_player
from .valuefn import PiecewiseValue, value_eval, value_grid

EXIT_OK = 0
EXIT_DIAG = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _build_parser():
    p = argparse.ArgumentParser(prog="bandctrl",
                                description="band-policy solvers and simulators "
                                            "for singular control games")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
            ("solve", "thresholds, value function grid, pasting diagnostics"),
            ("simulate", "Monte Carlo cost estimates under the band policy"),
            ("compare", "Nash vs Pareto thresholds, costs, and dispersion"),
            ("verify", "finite-difference cross-check against the closed form"),
            ("sweep", "threshold sweep over a parameter grid")):
        q = sub.add_parser(name, help=help_)
        q.add_argument("--config", required=True, help="YAML problem configuration")
        q.add_argument("--out", default=None, help="output directory")
        q.add_argument("--seed", type=int, default=None, help="RNG seed override")
        q.add_argument("--paths", type=int, default=None, help="Monte Carlo path count")
        q.add_argument("--dt", type=float, default=None, help="simulation step")
        q.add_argument("--grid", type=int, default=None, help="FD node count")
        q.add_argument("--tol", type=float, default=None, help="solver tolerance")
    return p


def _overrides(args) -> dict:
    out = {}
    if args.seed is not None:
        out.setdefault("simulate", {})["seed"] = args.seed
    if args.paths is not None:
        out.setdefault("simulate", {})["n_paths"] = args.paths
    if args.dt is not None:
        out.setdefault("simulate", {})["dt"] = args.dt
    if args.grid is not None:
        out.setdefault("fd", {})["nodes"] = args.grid
    if args.tol is not None:
        out.setdefault("solver", {})["tol"] = args.tol
    if args.out is not None:
        out.setdefault("output", {})["dir"] = args.out
    return out


def _prepare(cfg: RunConfig):
    out = reports.ensure_dir(cfg.out_dir)
    reports.write_text(os.path.join(out, "resolved_config.yaml"), cfg.dump_yaml())
    return out


def _closed_form_pieces(cfg: RunConfig):
    """(resolvent, K_eff, y0, extras) for the kinds with a 1-D closed form."""
    tol = cfg.solver["tol"]
    if cfg.kind == "two_player":
        red = reduce_two_player(cfg.game_spec(), cfg.solver["sigma_convention"])
        res = resolvent_build(red.problem.cost, red.problem.sigma_tilde,
                              red.problem.rho, cfg.solver["quad_tol"])
        return res, red.problem.K_eff, red.problem.x0, {"reduction": red, "tol": tol}
    if cfg.kind == "reduced1d":
        prob = cfg.reduced_problem()
        res = resolvent_build(prob.cost, prob.sigma_tilde, prob.rho, cfg.solver["quad_tol"])
        return res, prob.K_eff, prob.x0, {"reduction": None, "tol": tol}
    raise ConfigError(f"problem kind {cfg.kind!r} has no 1-D closed form here")


def _pasting_diagnostics(pv: PiecewiseValue, step=1e-5):
    """Central-difference pasting checks on the smooth interior branch at c."""
    return valuefn.pasting_gaps(pv, step)


def _hjb_diagnostics(pv: PiecewiseValue, n=1001):
    xs = np.linspace(-3 * pv.c, 3 * pv.c, n)
    interior, gradient = valuefn.hjb_residual_1d(pv, xs)
    inside = np.abs(xs) <= pv.c
    return {
        "interior_abs_inside": float(np.max(np.abs(interior[inside]))),
        "gradient_abs_outside": float(np.max(np.abs(gradient[~inside]))),
        "offbranch_max": float(np.max(np.minimum(interior, gradient))),
    }


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def cmd_solve(cfg: RunConfig) -> int:
    out = _prepare(cfg)
    if cfg.kind == "interbank":
        report = validate_assumptions(cfg.game_spec())
        rows = [(c.name, c.passed, c.witness or "") for c in report]
        reports.write_csv(os.path.join(out, "assumptions.csv"),
                          ["assumption", "passed", "witness"], rows)
        for name, passed, witness in rows:
            print(f"{'PASS' if passed else 'FAIL'} {name}: {witness}")
        return EXIT_OK if report.all_passed else EXIT_DIAG

    if cfg.kind == "investment":
        inv = cfg.investment_spec()
        sols = thresholds.product_thresholds(inv, cfg.solver["tol"], cfg.solver["quad_tol"])
        pieces = valuefn.separable_pieces(inv, cfg.solver["tol"], cfg.solver["quad_tol"])
        reports.write_csv(os.path.join(out, "thresholds.csv"),
                          ["product", "b", "K_eff", "residual", "iterations"],
                          [(j, s.c, s.K_used, s.residual, s.iterations)
                           for j, s in enumerate(sols)])
        rows = []
        ok = True
        for j, pv in enumerate(pieces):
            xs = np.linspace(-3 * pv.c, 3 * pv.c, 401)
            cols = value_grid(pv, xs)
            rows += [(j, x, v, dv, d2v, b) for x, v, dv, d2v, b in
                     zip(cols["x"], cols["v"], cols["dv"], cols["d2v"], cols["branch"])]
            e1, e2 = _pasting_diagnostics(pv)
            ok &= e1 < 1e-8 and e2 < 1e-6
            print(f"product {j}: b = {pv.c:.12g}, pasting |v'-K| = {e1:.2e}, |v''| = {e2:.2e}")
        reports.write_csv(os.path.join(out, "value_grid.csv"),
                          ["product", "x", "v", "dv", "d2v", "branch"], rows)
        reports.fig_value_function(value_grid(pieces[0], np.linspace(-3 * pieces[0].c,
                                                                     3 * pieces[0].c, 401)),
                                   pieces[0].c, os.path.join(out, "value_function.png"),
                                   title="product 0 value")
        return EXIT_OK if ok else EXIT_DIAG

    res, K_eff, y0, extra = _closed_form_pieces(cfg)
    tol = extra["tol"]
    pv = PiecewiseValue.build(res, K_eff, tol=tol)
    rows = [("c1", pv.c), ("K_eff", K_eff), ("sigma_tilde", res.sigma_tilde),
            ("rho", res.rho), ("A", pv.A), ("v_at_x0", value_eval(pv, y0)[0])]
    red = extra.get("reduction")
    if red is not None and red.zero_player is None:
        cmp_ = thresholds.compare_nash_pareto(res, red.K_cheap, tol)
        rows += [("c2", cmp_.c2), ("gap", cmp_.gap)]
    reports.write_csv(os.path.join(out, "thresholds.csv"), ["name", "value"], rows)

    xs = np.linspace(-3 * pv.c, 3 * pv.c, 1201)
    cols = value_grid(pv, xs)
    reports.write_csv(os.path.join(out, "value_grid.csv"),
                      ["x", "v", "dv", "d2v", "branch"],
                      zip(cols["x"], cols["v"], cols["dv"], cols["d2v"], cols["branch"]))
    reports.fig_value_function(cols, pv.c, os.path.join(out, "value_function.png"))

    e1, e2 = _pasting_diagnostics(pv)
    hjb = _hjb_diagnostics(pv)
    diag_rows = [
        ("smooth_pasting_slope", e1, 1e-8, e1 < 1e-8),
        ("smooth_pasting_curvature", e2, 1e-6, e2 < 1e-6),
        ("hjb_interior_inside", hjb["interior_abs_inside"], 1e-8,
         hjb["interior_abs_inside"] < 1e-8),
        ("hjb_gradient_outside", hjb["gradient_abs_outside"], 1e-10,
         hjb["gradient_abs_outside"] < 1e-10),
        ("hjb_offbranch", hjb["offbranch_max"], 1e-8, hjb["offbranch_max"] <= 1e-8),
    ]
    reports.write_csv(os.path.join(out, "diagnostics.csv"),
                      ["check", "value", "tolerance", "passed"], diag_rows)
    for name, value, tolr, passed in diag_rows:
        print(f"{'PASS' if passed else 'FAIL'} {name}: {value:.3e} (tol {tolr:g})")
    print(f"threshold c1 = {pv.c:.12g}")
    if red is not None and red.zero_player is None:
        print(f"threshold c2 = {cmp_.c2:.12g} (gap {cmp_.gap:.12g})")
    return EXIT_OK if all(r[3] for r in diag_rows) else EXIT_DIAG


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _stats_rows(mean, stderr, analytic, extra_budget=0.0):
    delta = abs(mean - analytic)
    ok_se = stderr and np.isfinite(stderr) and stderr > 0
    se_cell = stderr if np.isfinite(stderr) else "n/a"
    return [
        ("mc_mean", mean, se_cell),
        ("analytic_value", analytic, ""),
        ("abs_delta", delta, ""),
        ("delta_in_se_units", delta / stderr if ok_se else "n/a", ""),
        ("discretization_budget", extra_budget, ""),
    ]


def cmd_simulate(cfg: RunConfig) -> int:
    out = _prepare(cfg)
    if cfg.kind == "interbank":
        spec = cfg.game_spec()
        sim = cfg.sim_config()
        if sim.n_paths > 512:
            raise ConfigError("interbank simulation stores full paths; use n_paths <= 512")
        states = sde.simulate_uncontrolled(spec, sim)
        xbar, stats = sde.benchmark_series(states, spec.benchmark_weights)
        reports.write_csv(os.path.join(out, "benchmark_stats.csv"),
                          ["stat", "value"], sorted(stats.items()))
        reports.fig_benchmark(sim.time_grid(), xbar[: min(16, len(xbar))],
                              os.path.join(out, "benchmark.png"))
        print("\n".join(f"{k} = {v:.6g}" for k, v in sorted(stats.items())))
        return EXIT_OK

    if cfg.kind == "investment":
        inv = cfg.investment_spec()
        sim = cfg.sim_config(rho=inv.rho)
        batch = sde.simulate_separable(inv, sim)
        x = np.array([prod.x0 for prod in reduce_central(inv)])
        analytic, _parts = valuefn.separable_value(inv, x, cfg.solver["tol"],
                                                   cfg.solver["quad_tol"])
        rows = _stats_rows(batch.total_mean, batch.total_stderr, analytic)
        rows += [(f"product_{j}_mean", est.mean, est.stderr)
                 for j, est in enumerate(batch.estimates)]
        reports.write_csv(os.path.join(out, "sim_stats.csv"),
                          ["stat", "value", "stderr"], rows)
        est0 = batch.estimates[0]
        if est0.batch.states is not None:
            _write_paths_csv(out, est0.batch)
            reports.fig_paths(est0.batch.t, est0.batch.states, est0.batch.band,
                              os.path.join(out, "paths.png"))
        print(f"total MC {batch.total_mean:.6f} vs analytic {analytic:.6f} "
              f"(stderr {batch.total_stderr:.2e})")
        return EXIT_OK

    res, K_eff, y0, extra = _closed_form_pieces(cfg)
    pv = PiecewiseValue.build(res, K_eff, tol=extra["tol"])
    sim = cfg.sim_config(rho=res.rho)
    policy = cfg.simulate["policy"]
    red = extra.get("reduction")
    if cfg.kind == "two_player":
        spec = cfg.game_spec()
        band = cfg.simulate["band"]
        batch = sde.simulate_two_player(spec, policy, sim, band=band,
                                        sigma_convention=cfg.solver["sigma_convention"])
        if policy == "pareto":
            analytic = value_eval(pv, red.problem.x0)[0]
        else:
            # fixed-band pricing of the simulated policy under the welfare functional
            analytic = valuefn.band_cost_value(res, batch.band, K_eff, red.problem.x0)
        rows = _stats_rows(batch.mean, batch.stderr, analytic)
        n = len(batch.J1)
        rows += [("band", batch.band, ""),
                 ("max_abs_spread", batch.max_abs_spread, ""),
                 ("player1_max_total_control", float(batch.xi1_total.max()), ""),
                 ("player2_max_total_control", float(batch.xi2_total.max()), ""),
                 ("J1_mean", float(batch.J1.mean()),
                  float(batch.J1.std(ddof=1) / np.sqrt(n)) if n > 1 else "n/a"),
                 ("J2_mean", float(batch.J2.mean()),
                  float(batch.J2.std(ddof=1) / np.sqrt(n)) if n > 1 else "n/a")]
        reports.write_csv(os.path.join(out, "sim_stats.csv"),
                          ["stat", "value", "stderr"], rows)
        if batch.kept:
            _write_two_player_paths(out, batch)
            reports.fig_paths(batch.t, batch.kept["x1"] - batch.kept["x2"], batch.band,
                              os.path.join(out, "paths.png"), ylabel="spread x1 - x2")
        print(f"policy {policy}: band {batch.band:.6f}, MC {batch.mean:.6f} "
              f"(stderr {batch.stderr if np.isfinite(batch.stderr) else float('nan'):.2e})")
        return EXIT_OK

    # reduced1d
    est = sde.estimate_cost(sim, pv.c, res.cost, res.rho, K_plus=K_eff, K_minus=K_eff,
                            x0=y0, sigma_tilde=res.sigma_tilde)
    analytic = value_eval(pv, y0)[0]
    rows = _stats_rows(est.mean, est.stderr, analytic, est.truncation_bound)
    rows += [("band", pv.c, ""), ("truncation_bound", est.truncation_bound, ""),
             ("discount_truncation", est.discount_truncation, "")]
    reports.write_csv(os.path.join(out, "sim_stats.csv"), ["stat", "value", "stderr"], rows)
    if est.batch.states is not None:
        _write_paths_csv(out, est.batch)
        reports.fig_paths(est.batch.t, est.batch.states, est.batch.band,
                          os.path.join(out, "paths.png"))
    stderr_str = f"{est.stderr:.2e}" if np.isfinite(est.stderr) else "n/a"
    print(f"MC {est.mean:.6f} vs analytic {analytic:.6f} (stderr {stderr_str})")
    return EXIT_OK


def _write_paths_csv(out, batch):
    rows = []
    stride = max(1, (len(batch.t) - 1) // 1000)
    for pid in range(batch.states.shape[0]):
        for k in range(0, len(batch.t), stride):
            rows.append((pid, batch.t[k], batch.states[pid, k],
                         batch.xi_plus[pid, k], batch.xi_minus[pid, k]))
    reports.write_csv(os.path.join(out, "paths_sample.csv"),
                      ["path_id", "t", "state", "xi_plus", "xi_minus"], rows)


def _write_two_player_paths(out, batch):
    kept = batch.kept
    rows = []
    stride = max(1, (len(batch.t) - 1) // 1000)
    n_kept = kept["x1"].shape[0]
    for pid in range(n_kept):
        for k in range(0, len(batch.t), stride):
            rows.append((pid, batch.t[k], kept["x1"][pid, k], kept["x2"][pid, k],
                         kept["xi1_plus"][pid, k], kept["xi1_minus"][pid, k],
                         kept["xi2_plus"][pid, k], kept["xi2_minus"][pid, k]))
    reports.write_csv(os.path.join(out, "paths_sample.csv"),
                      ["path_id", "t", "x1", "x2", "xi1_plus", "xi1_minus",
                       "xi2_plus", "xi2_minus"], rows)


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

def cmd_compare(cfg: RunConfig) -> int:
    out = _prepare(cfg)
    if cfg.kind != "two_player":
        raise ConfigError("compare requires a two_player problem")
    spec = cfg.game_spec()
    red = reduce_two_player(spec, cfg.solver["sigma_convention"])
    if red.zero_player is not None:
        raise ConfigError("compare needs K1 = K2 (the Nash band is defined for equal costs)")
    tol = cfg.solver["tol"]
    res = resolvent_build(red.problem.cost, red.problem.sigma_tilde, red.problem.rho,
                          cfg.solver["quad_tol"])
    cmp_ = thresholds.compare_nash_pareto(res, red.K_cheap, tol)
    pv = PiecewiseValue.build(res, red.problem.K_eff, c=cmp_.c1)
    nash = valuefn.nash_value_pair(res, red.K_cheap, tol)

    sim = cfg.sim_config()
    pareto_batch = sde.simulate_two_player(spec, "pareto", sim,
                                           sigma_convention=cfg.solver["sigma_convention"])
    nash_batch = sde.simulate_two_player(spec, "nash", sim,
                                         sigma_convention=cfg.solver["sigma_convention"])
    diff = nash_batch.aggregate - pareto_batch.aggregate
    diff_mean = float(diff.mean())
    diff_se = float(diff.std(ddof=1) / np.sqrt(len(diff))) if len(diff) > 1 else float("nan")
    var_p, var_p_se = pareto_batch.spread_variance()
    var_n, var_n_se = nash_batch.spread_variance()

    rows = [
        ("c1", cmp_.c1, ""),
        ("c2", cmp_.c2, ""),
        ("gap", cmp_.gap, ""),
        ("pareto_aggregate_mean", pareto_batch.mean, pareto_batch.stderr),
        ("nash_aggregate_mean", nash_batch.mean, nash_batch.stderr),
        ("welfare_gap_mean", diff_mean, diff_se),
        ("welfare_gap_se_units", diff_mean / diff_se if diff_se > 0 else float("nan"), ""),
        ("pareto_J1_mean", float(pareto_batch.J1.mean()), ""),
        ("pareto_J2_mean", float(pareto_batch.J2.mean()), ""),
        ("nash_J1_mean", float(nash_batch.J1.mean()), ""),
        ("nash_J2_mean", float(nash_batch.J2.mean()), ""),
        ("spread_var_pareto", var_p, var_p_se),
        ("spread_var_nash", var_n, var_n_se),
    ]
    reports.write_csv(os.path.join(out, "compare_stats.csv"),
                      ["stat", "value", "stderr"], rows)

    ys = np.linspace(-1.5 * cmp_.c2, 1.5 * cmp_.c2, 801)
    v_par = value_eval(pv, ys)[0]
    v1, v2 = nash.eval(ys, np.zeros_like(ys))
    v_avg = 0.5 * (v1 + v2)
    reports.write_csv(os.path.join(out, "compare_curves.csv"),
                      ["y", "v_pareto", "v_nash_1", "v_nash_2", "v_nash_avg"],
                      zip(ys, v_par, v1, v2, v_avg))
    reports.fig_compare(ys, v_par, v_avg, cmp_.c1, cmp_.c2,
                        os.path.join(out, "comparison.png"))

    ok = cmp_.gap > 0
    print(f"c1 = {cmp_.c1:.12g}, c2 = {cmp_.c2:.12g}, gap = {cmp_.gap:.12g}")
    print(f"welfare gap (nash - pareto) = {diff_mean:.6f} ({diff_mean / diff_se:.1f} SE)"
          if diff_se > 0 else "welfare gap stderr n/a")
    return EXIT_OK if ok else EXIT_DIAG


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def cmd_verify(cfg: RunConfig) -> int:
    out = _prepare(cfg)
    fd = cfg.fd
    symmetric = True
    if cfg.kind == "reduced1d":
        p = cfg.problem
        symmetric = abs(float(p["K_plus"]) - float(p["K_minus"])) <= 1e-15
    if cfg.kind not in ("two_player", "reduced1d"):
        raise ConfigError("verify requires a two_player or reduced1d problem")

    if cfg.kind == "reduced1d" and not symmetric:
        # asymmetric costs: FD is the only solver; report the two band edges
        p = cfg.problem
        cost = _parse_cost(p["cost"], "problem.cost")
        grid = hjb_fd.Grid1D(fd["lo"], fd["hi"], fd["nodes"])
        sol = hjb_fd.solve_vi_1d(grid, lambda x: cost.value(x), float(p["sigma_tilde"]),
                                 float(p["rho"]), K_plus=float(p["K_plus"]),
                                 K_minus=float(p["K_minus"]), tol=fd["tol"],
                                 max_iter=fd["max_iter"])
        fb = hjb_fd.extract_free_boundary(sol)
        reports.write_csv(os.path.join(out, "fd_solution.csv"),
                          ["x", "u", "branch"],
                          zip(sol.xs, sol.u, sol.labels))
        reports.write_csv(os.path.join(out, "fd_boundaries.csv"),
                          ["side", "boundary"],
                          [("lower", fb.lower), ("upper", fb.upper)])
        print(f"asymmetric-cost boundaries: lower {fb.lower:.6f}, upper {fb.upper:.6f}")
        return EXIT_OK

    res, K_eff, _, extra = _closed_form_pieces(cfg)
    pv = PiecewiseValue.build(res, K_eff, tol=extra["tol"])
    levels = fd["levels"]
    if len(levels) < 3:
        raise ConfigError("fd.levels needs at least three grid levels")
    rows = []
    errs = []
    for n in levels:
        grid = hjb_fd.Grid1D(fd["lo"], fd["hi"], int(n))
        sol = hjb_fd.solve_vi_1d(grid, lambda x: res.cost.value(x), res.sigma_tilde,
                                 res.rho, K_plus=K_eff, K_minus=K_eff,
                                 tol=fd["tol"], max_iter=fd["max_iter"])
        exact = value_eval(pv, sol.xs)[0]
        err = float(np.max(np.abs(sol.u - exact)))
        fb = hjb_fd.extract_free_boundary(sol)
        rows.append((int(n), grid.dx, err, fb.upper, abs(fb.upper - pv.c), sol.iterations))
        errs.append(err)
    reports.write_csv(os.path.join(out, "fd_solution.csv"), ["x", "u", "branch"],
                      zip(sol.xs, sol.u, sol.labels))
    reports.write_csv(os.path.join(out, "fd_boundaries.csv"), ["side", "boundary"],
                      [("lower", fb.lower), ("upper", fb.upper)])
    reports.write_csv(os.path.join(out, "fd_convergence.csv"),
                      ["nodes", "dx", "sup_error", "boundary", "boundary_error",
                       "iterations"], rows)
    reports.fig_convergence([r[0] for r in rows], errs,
                            os.path.join(out, "fd_convergence.png"))
    decreasing = all(errs[i + 1] < errs[i] for i in range(len(errs) - 1))
    fb_ok = rows[-1][4] <= 2 * rows[-1][1]
    for n, dx, err, b, berr, iters in rows:
        print(f"nodes {n}: sup error {err:.3e}, boundary {b:.6f} "
              f"(|err| {berr:.2e}, dx {dx:.2e}, {iters} iterations)")

    if fd["two_d"] and cfg.kind == "two_player":
        spec = cfg.game_spec()
        red = extra["reduction"]
        grid2 = hjb_fd.Grid2D.square(fd["lo"], fd["hi"], int(fd["nodes_2d"]))
        cost = red.problem.cost
        sol2 = hjb_fd.solve_vi_2d(grid2, lambda a, b: cost.value(a - b), spec.mu,
                                  spec.sigma, spec.rho, spec.K_plus, spec.K_minus,
                                  spec.L, tol=fd["tol"], max_iter=fd["max_iter"])
        X1, X2 = np.meshgrid(sol2.xs, sol2.x2s, indexing="ij")
        exact2 = value_eval(pv, (X1 - X2).ravel())[0].reshape(X1.shape)
        err2 = float(np.max(np.abs(sol2.u - exact2)))
        width = hjb_fd.antidiagonal_band_width(sol2)
        reports.write_csv(os.path.join(out, "fd2d_stats.csv"), ["stat", "value"],
                          [("sup_error", err2), ("band_width", width),
                           ("band_width_expected", 2 * pv.c),
                           ("iterations", sol2.iterations)])
        sol_rows = ((x1v, x2v, uv, bv) for x1v, row_u, row_b in
                    zip(sol2.xs, sol2.u, sol2.labels)
                    for x2v, uv, bv in zip(sol2.x2s, row_u, row_b))
        reports.write_csv(os.path.join(out, "fd2d_solution.csv"),
                          ["x1", "x2", "u", "branch"], sol_rows)
        frontier = hjb_fd.extract_free_boundary(sol2)
        reports.write_csv(os.path.join(out, "fd2d_boundary.csv"),
                          ["x2", "x1_low", "x1_high"], frontier)
        reports.fig_surface(sol2.xs, sol2.x2s, sol2.u,
                            os.path.join(out, "fd2d_value.png"))
        print(f"2-D sup error {err2:.3e}; antidiagonal width {width:.4f} "
              f"(expected {2 * pv.c:.4f})")
    return EXIT_OK if decreasing and fb_ok else EXIT_DIAG


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def cmd_sweep(cfg: RunConfig) -> int:
    out = _prepare(cfg)
    res, K_eff, _, extra = _closed_form_pieces(cfg)
    parameter = cfg.sweep["parameter"]
    values = [float(v) for v in cfg.sweep["values"]]
    tol = extra["tol"]
    rows = []
    for v in values:
        if parameter == "K":
            r = res
            K = v
        elif parameter == "sigma":
            r = Resolvent(res.cost, v, res.rho, res.quad_tol)
            K = 2 * K_eff
        elif parameter == "curvature":
            r = Resolvent(RunningCost.quadratic(curvature=v), res.sigma_tilde,
                          res.rho, res.quad_tol)
            K = 2 * K_eff
        else:
            raise ConfigError("sweep.parameter must be K, sigma, or curvature")
        cmp_ = thresholds.compare_nash_pareto(r, K, tol)
        rows.append((parameter, v, cmp_.c1, cmp_.c2, cmp_.gap))
    reports.write_csv(os.path.join(out, "sweep.csv"),
                      ["parameter", "value", "c1", "c2", "gap"], rows)
    reports.fig_sweep(values, [r[2] for r in rows], [r[3] for r in rows], parameter,
                      os.path.join(out, "sweep.png"))
    bad = [r for r in rows if not r[4] > 0]
    print(f"swept {len(rows)} values of {parameter}; gap > 0 in "
          f"{len(rows) - len(bad)}/{len(rows)} cells")
    return EXIT_OK if not bad else EXIT_DIAG


_COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, overrides=_overrides(args))
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BandCtrlError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
