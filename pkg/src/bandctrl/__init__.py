"""Threshold (band) policies for N-player singular control games.

Closed-form Pareto and Nash band solvers where they exist, reflected-path
Monte Carlo for the induced policies, structural reductions of the investment
game, and a finite-difference variational-inequality solver as the numerical
oracle for asymmetric or drifted cases.
"""

from .errors import (
    AccuracyError,
    BandCtrlError,
    BoundaryNotFoundError,
    ConfigError,
    ConvergenceError,
    DegenerateCurvatureError,
    DegenerateDiffusionError,
    NoRootError,
)
from .model import (
    GameSpec,
    InvestmentSpec,
    ReducedProblem1D,
    Resolvent,
    RunningCost,
    effective_volatility,
    interbank_running_cost,
    resolvent_build,
    validate_assumptions,
)
from .reduction import (
    ControlPath,
    demand_constant,
    lift_control,
    reduce_central,
    reduce_two_player,
)
from .thresholds import (
    ThresholdSolution,
    compare_nash_pareto,
    product_thresholds,
    smoothing_residual,
    solve_threshold,
)
from .valuefn import (
    PiecewiseValue,
    hjb_residual_1d,
    nash_value_eval,
    outside_band_value,
    pareto_value_2p,
    separable_value,
    value_eval,
)
from .sde import (
    SimConfig,
    benchmark_series,
    estimate_cost,
    simulate_separable,
    simulate_two_player,
    skorokhod_map_1d,
)
from .hjb_fd import (
    Grid1D,
    Grid2D,
    VISolution,
    extract_free_boundary,
    solve_vi_1d,
    solve_vi_2d,
)

__version__ = "0.1.0"
