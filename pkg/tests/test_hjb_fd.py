import numpy as np
import pytest

from bandctrl.errors import BandCtrlError, BoundaryNotFoundError
from bandctrl.hjb_fd import (
    DIAG,
    GRAD_X_DN,
    GRAD_X_UP,
    INTERIOR,
    FreeBoundary1D,
    Grid1D,
    Grid2D,
    VISolution,
    antidiagonal_band_width,
    extract_free_boundary,
    solve_vi_1d,
    solve_vi_2d,
)
from bandctrl.model import RunningCost, resolvent_build
from bandctrl.valuefn import PiecewiseValue, value_eval

C1_DEMO = 0.835423348595224
RT2INV = 2**-0.5


@pytest.fixture(scope="module")
def pv(quad_res):
    return PiecewiseValue.build(quad_res, 0.5)


def quad_h(x):
    return np.asarray(x, dtype=float) ** 2


# ---------------------------------------------------------------------------
# 1-D solver
# ---------------------------------------------------------------------------

def test_1d_recovers_band_and_value(pv):
    grid = Grid1D(-4, 4, 801)
    sol = solve_vi_1d(grid, quad_h, 1.0, 1.0, K_plus=0.5, K_minus=0.5)
    assert sol.converged
    err = np.max(np.abs(sol.u - value_eval(pv, sol.xs)[0]))
    assert err < 5e-3
    fb = extract_free_boundary(sol)
    assert abs(fb.upper - C1_DEMO) <= 2 * grid.dx
    assert abs(fb.lower + C1_DEMO) <= 2 * grid.dx


def test_1d_refinement_reduces_error(pv):
    errs = []
    for n in (201, 401, 801):
        sol = solve_vi_1d(Grid1D(-4, 4, n), quad_h, 1.0, 1.0, 0.5, 0.5)
        errs.append(np.max(np.abs(sol.u - value_eval(pv, sol.xs)[0])))
    assert errs[1] < errs[0] / 1.5
    assert errs[2] < errs[1] / 1.5


def test_1d_complementarity_and_labels(pv):
    sol = solve_vi_1d(Grid1D(-4, 4, 401), quad_h, 1.0, 1.0, 0.5, 0.5)
    # inside the band interior labels, outside gradient labels
    inside = np.abs(sol.xs) < pv.c - 2 * (8 / 400)
    outside_up = sol.xs > pv.c + 2 * (8 / 400)
    assert np.all(sol.labels[inside] == INTERIOR)
    assert np.all(sol.labels[outside_up] == GRAD_X_UP)
    assert sol.max_residual <= 1e-10 * (1 + 16.0)


def test_1d_discrete_convexity_and_gradient_bounds():
    sol = solve_vi_1d(Grid1D(-4, 4, 401), quad_h, 1.0, 1.0, 0.5, 0.5)
    dx = 8 / 400
    second = np.diff(sol.u, 2)
    assert second.min() >= -1e-9
    du = np.diff(sol.u) / dx
    assert np.all(du <= 0.5 + 1e-9)
    assert np.all(du >= -0.5 - 1e-9)


def test_1d_constant_cost_flat_solution():
    # constant h violates the curvature assumptions; the solver itself has no
    # business rejecting it and must return the flat uncontrolled solution
    sol = solve_vi_1d(Grid1D(-4, 4, 101), lambda x: np.full_like(x, 3.0),
                      1.0, 1.0, 0.5, 0.5)
    assert np.allclose(sol.u, 3.0, atol=1e-9)
    assert not np.any(sol.labels != INTERIOR)


def test_1d_drift_shifts_band_against_drift():
    sol0 = solve_vi_1d(Grid1D(-4, 4, 801), quad_h, 1.0, 1.0, 0.5, 0.5, mu=0.0)
    sol1 = solve_vi_1d(Grid1D(-4, 4, 801), quad_h, 1.0, 1.0, 0.5, 0.5, mu=0.5)
    fb0 = extract_free_boundary(sol0)
    fb1 = extract_free_boundary(sol1)
    mid0 = 0.5 * (fb0.lower + fb0.upper)
    mid1 = 0.5 * (fb1.lower + fb1.upper)
    assert abs(mid0) < 0.05
    assert mid1 < -0.05  # positive drift pushes the band down


def test_1d_asymmetric_costs_band_ordering():
    # cheaper downward control: intervene earlier on the upper side
    sol = solve_vi_1d(Grid1D(-4, 4, 801), quad_h, 1.0, 1.0, K_plus=1.0, K_minus=0.5)
    fb = extract_free_boundary(sol)
    assert abs(fb.upper) < abs(fb.lower)


def test_1d_boundary_not_found_for_huge_cost():
    sol = solve_vi_1d(Grid1D(-2, 2, 201), quad_h, 1.0, 1.0, K_plus=50.0, K_minus=50.0)
    with pytest.raises(BoundaryNotFoundError):
        extract_free_boundary(sol)


def test_1d_input_validation():
    with pytest.raises(BandCtrlError):
        solve_vi_1d(Grid1D(-4, 4, 101), quad_h, 1.0, -1.0, 0.5, 0.5)
    with pytest.raises(BandCtrlError):
        solve_vi_1d(Grid1D(-4, 4, 101), quad_h, 1.0, 1.0, 0.0, 0.5)
    with pytest.raises(BandCtrlError):
        solve_vi_1d(Grid1D(-4, 4, 101), np.zeros(7), 1.0, 1.0, 0.5, 0.5)


def test_extract_on_analytic_piecewise_value(pv):
    # direct construction: sample the analytic value, label by branch
    grid = Grid1D(-4, 4, 401)
    xs = grid.xs
    u = value_eval(pv, xs)[0]
    labels = np.full(len(xs), INTERIOR, dtype=np.int64)
    labels[xs > pv.c] = GRAD_X_UP
    labels[xs < -pv.c] = GRAD_X_DN
    sol = VISolution(u=u, labels=labels, xs=xs, dim=1, iterations=0, converged=True,
                     meta={"K_plus": 0.5, "K_minus": 0.5})
    fb = extract_free_boundary(sol)
    assert abs(fb.upper - pv.c) <= grid.dx
    assert abs(fb.lower + pv.c) <= grid.dx


# ---------------------------------------------------------------------------
# 2-D solver
# ---------------------------------------------------------------------------

def test_2d_matches_reduced_solution(pv):
    grid = Grid2D.square(-4, 4, 81)
    sol = solve_vi_2d(grid, lambda a, b: quad_h(a - b), [0, 0],
                      [[RT2INV, 0], [0, RT2INV]], 1.0, [1, 1], [1, 1], [0.5, 0.5])
    assert sol.converged
    X1, X2 = np.meshgrid(sol.xs, sol.x2s, indexing="ij")
    exact = value_eval(pv, (X1 - X2).ravel())[0].reshape(X1.shape)
    assert np.max(np.abs(sol.u - exact)) < 5e-3
    width = antidiagonal_band_width(sol)
    assert abs(width - 2 * pv.c) <= 3 * grid.dx


def test_2d_translation_invariance_along_diagonal():
    sol = solve_vi_2d(Grid2D.square(-4, 4, 61), lambda a, b: quad_h(a - b), [0, 0],
                      [[RT2INV, 0], [0, RT2INV]], 1.0, [1, 1], [1, 1], [0.5, 0.5])
    mid = 30
    diag_vals = [sol.u[mid + k, mid + k] for k in range(-15, 16)]
    assert np.max(np.abs(np.diff(diag_vals))) < 1e-10


def test_2d_free_rider_band(quad_res):
    # K1 > K2: only player 2's constraints activate; band from K_eff = K2/2
    pv2 = PiecewiseValue.build(quad_res, 0.5)
    sol = solve_vi_2d(Grid2D.square(-4, 4, 81), lambda a, b: quad_h(a - b), [0, 0],
                      [[RT2INV, 0], [0, RT2INV]], 1.0, [2, 1], [2, 1], [0.5, 0.5])
    X1, X2 = np.meshgrid(sol.xs, sol.x2s, indexing="ij")
    exact = value_eval(pv2, (X1 - X2).ravel())[0].reshape(X1.shape)
    assert np.max(np.abs(sol.u - exact)) < 5e-3
    assert not np.any(sol.labels == GRAD_X_UP)   # player 1 never binds
    assert not np.any(sol.labels == GRAD_X_DN)


def test_2d_cross_terms_supported(pv):
    # correlated rows with |a12| below the monotonicity bound
    rows = np.array([[0.7, 0.1], [0.1, 0.7]])
    sigma_y = np.linalg.norm(rows[0] - rows[1])
    res = resolvent_build(RunningCost.quadratic(), sigma_y, 1.0)
    pv_corr = PiecewiseValue.build(res, 0.5)
    sol = solve_vi_2d(Grid2D.square(-4, 4, 81), lambda a, b: quad_h(a - b), [0, 0],
                      rows, 1.0, [1, 1], [1, 1], [0.5, 0.5])
    X1, X2 = np.meshgrid(sol.xs, sol.x2s, indexing="ij")
    exact = value_eval(pv_corr, (X1 - X2).ravel())[0].reshape(X1.shape)
    assert np.max(np.abs(sol.u - exact)) < 8e-3


def test_2d_monotonicity_warning():
    rows = np.array([[1.0, 0.0], [0.9, 0.1]])  # a12 = 0.9 > a22 = 0.41
    with pytest.warns(RuntimeWarning):
        try:
            solve_vi_2d(Grid2D.square(-2, 2, 21), lambda a, b: quad_h(a - b), [0, 0],
                        rows, 1.0, [1, 1], [1, 1], [0.5, 0.5], max_iter=5)
        except BandCtrlError:
            pass  # only the warning is under test


def test_2d_boundary_extraction_rows():
    sol = solve_vi_2d(Grid2D.square(-4, 4, 41), lambda a, b: quad_h(a - b), [0, 0],
                      [[RT2INV, 0], [0, RT2INV]], 1.0, [1, 1], [1, 1], [0.5, 0.5])
    rows = extract_free_boundary(sol)
    assert rows.shape == (41, 3)
    j = 20  # x2 = 0: interior extent approximates [-c, c]
    assert rows[j, 1] == pytest.approx(-C1_DEMO, abs=0.25)
    assert rows[j, 2] == pytest.approx(C1_DEMO, abs=0.25)


def test_2d_bounded_region_strictly_convex_cost():
    # nu > 0 makes the aggregate payoff strictly convex in every direction, so
    # the continuation region is bounded and the ring closes with gradients
    from bandctrl.model import interbank_running_cost
    jc = interbank_running_cost([1.0, 1.0], [0.3, 0.3], [0.5, 0.5], [0.5, 0.5])
    M = jc.M
    H = lambda a, b: M[0, 0] * a * a + (M[0, 1] + M[1, 0]) * a * b + M[1, 1] * b * b
    sol = solve_vi_2d(Grid2D.square(-4, 4, 61), H, [0, 0],
                      [[RT2INV, 0], [0, RT2INV]], 1.0, [1, 1], [1, 1], [0.5, 0.5])
    assert sol.converged
    assert not sol.meta["diag_closure"]
    labels = sol.labels
    assert (labels == INTERIOR).any()
    assert not np.any(labels[0, :] == INTERIOR) and not np.any(labels[:, 0] == INTERIOR)
    # interior region is bounded well inside the domain
    rows = extract_free_boundary(sol)
    finite = ~np.isnan(rows[:, 1])
    assert rows[finite, 1].min() > -4.0 and rows[finite, 2].max() < 4.0
    # discrete convexity along both axes
    assert np.diff(sol.u, 2, axis=0).min() > -1e-9
    assert np.diff(sol.u, 2, axis=1).min() > -1e-9
    # gradient bounds hold everywhere
    dx = sol.xs[1] - sol.xs[0]
    d1 = np.diff(sol.u, axis=0) / dx
    d2 = np.diff(sol.u, axis=1) / dx
    assert np.all(np.abs(d1) <= 0.5 + 1e-9) and np.all(np.abs(d2) <= 0.5 + 1e-9)


def test_2d_drift_shifts_region_against_drift():
    from bandctrl.model import interbank_running_cost
    jc = interbank_running_cost([1.0, 1.0], [0.3, 0.3], [0.5, 0.5], [0.5, 0.5])
    M = jc.M
    H = lambda a, b: M[0, 0] * a * a + (M[0, 1] + M[1, 0]) * a * b + M[1, 1] * b * b

    def centroid(mu):
        sol = solve_vi_2d(Grid2D.square(-4, 4, 61), H, mu,
                          [[RT2INV, 0], [0, RT2INV]], 1.0, [1, 1], [1, 1], [0.5, 0.5])
        ii, jj = np.nonzero(sol.labels == INTERIOR)
        return float(sol.xs[ii].mean()), float(sol.x2s[jj].mean())

    c0 = centroid([0.0, 0.0])
    c1 = centroid([0.4, 0.0])
    assert abs(c0[0]) < 0.05
    assert c1[0] < -0.05  # drift up in x1 moves the region down in x1


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid1D(1.0, -1.0, 101)
    with pytest.raises(ValueError):
        Grid2D(x=Grid1D(-4, 4, 101), y=Grid1D(-4, 4, 51))
