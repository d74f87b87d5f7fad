import pytest

from bandctrl.model import GameSpec, InvestmentSpec, RunningCost, resolvent_build

RT2INV = 2**-0.5


@pytest.fixture(scope="session")
def quad_cost():
    return RunningCost.quadratic()


@pytest.fixture(scope="session")
def quad_res(quad_cost):
    """Resolvent of h(y) = y^2 with sigma_tilde = 1, rho = 1."""
    return resolvent_build(quad_cost, 1.0, 1.0)


@pytest.fixture(scope="session")
def demo_spec(quad_cost):
    """Symmetric two-player demo: effective volatility 1, K1 = K2 = 1."""
    return GameSpec(
        mu=[0.0, 0.0],
        sigma=[[RT2INV, 0.0], [0.0, RT2INV]],
        rho=1.0,
        K_plus=[1.0, 1.0],
        K_minus=[1.0, 1.0],
        L=[0.5, 0.5],
        benchmark_weights=[0.5, 0.5],
        difference_cost=quad_cost,
        x0=[0.0, 0.0],
    )


@pytest.fixture(scope="session")
def freerider_spec(quad_cost):
    """Two players with K1 > K2: player 1 never acts under the Pareto policy."""
    return GameSpec(
        mu=[0.0, 0.0],
        sigma=[[RT2INV, 0.0], [0.0, RT2INV]],
        rho=1.0,
        K_plus=[2.0, 1.0],
        K_minus=[2.0, 1.0],
        L=[0.5, 0.5],
        benchmark_weights=[0.5, 0.5],
        difference_cost=quad_cost,
        x0=[0.4, -0.3],
    )


def make_investment(r=(0.0, 0.0), demand_drift=(0.0, 0.0), demand_vol=(0.0, 0.0),
                    p=None, q=None, curvature=1.0):
    """Two investors, two products, separable quadratic costs."""
    p = [[1.0, 2.0], [1.5, 1.6]] if p is None else p
    q = [[1.0, 1.6], [1.5, 2.0]] if q is None else q
    cost = RunningCost.quadratic(curvature=curvature)
    return InvestmentSpec(
        y0=[[1.0, 2.0], [1.5, 1.0]],
        mu=[[0.0, 0.0], [0.0, 0.0]],
        sigma=[[[0.6, 0.0], [0.0, 0.8]], [[0.0, 0.6], [0.4, 0.0]]],
        p=p,
        q=q,
        r=r,
        demand_drift=demand_drift,
        demand_vol=demand_vol,
        d0=[2.0, 2.5],
        rho=1.0,
        costs=[[cost, cost], [cost, cost]],
    )


@pytest.fixture()
def investment_spec():
    return make_investment()
