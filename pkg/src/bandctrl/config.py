"""Run configuration: YAML schema, validation, and flag/env overrides.

The file is a nested key-value document with sections problem / solver /
simulate / fd / sweep / output.  Validation is strict: unknown keys are
rejected, required fields must be present, and every report embeds the fully
resolved configuration for reproducibility.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
import yaml

from .errors import ConfigError
from .model import GameSpec, InvestmentSpec, ReducedProblem1D, RunningCost, interbank_running_cost
from .sde import SimConfig, default_horizon

__all__ = ["RunConfig", "load_config", "parse_config_dict", "ENV_PREFIX"]

ENV_PREFIX = "SCK_"

_COST_KEYS = {"kind", "curvature", "center", "offset"}
_PROBLEM_KEYS = {
    "two_player": {"kind", "rho", "sigma", "mu", "K_plus", "K_minus", "L",
                   "benchmark_weights", "x0", "cost"},
    "interbank": {"kind", "rho", "sigma", "mu", "K_plus", "K_minus", "L",
                  "benchmark_weights", "x0", "kappa", "nu"},
    "investment": {"kind", "rho", "investors", "products", "cost", "costs"},
    "reduced1d": {"kind", "rho", "sigma_tilde", "K_plus", "K_minus", "x0", "cost"},
}
_INVESTOR_KEYS = {"y0", "mu", "sigma", "p", "q"}
_PRODUCT_KEYS = {"r", "demand_drift", "demand_vol", "d0"}
_SOLVER_DEFAULTS = {"tol": 1e-12, "sigma_convention": "joint", "quad_tol": 1e-10}
_SIMULATE_DEFAULTS = {"dt": 1e-3, "horizon": None, "n_paths": 10000, "seed": 12345,
                      "antithetic": False, "keep_paths": 5, "policy": "pareto",
                      "band": None}
_FD_DEFAULTS = {"lo": -4.0, "hi": 4.0, "nodes": 1601, "tol": 1e-10, "max_iter": 500,
                "levels": [401, 801, 1601], "two_d": False, "nodes_2d": 101}
_SWEEP_DEFAULTS = {"parameter": "K", "values": [0.25, 0.5, 1.0, 2.0, 4.0]}
_OUTPUT_DEFAULTS = {"dir": "out"}
_SECTIONS = {"problem", "solver", "simulate", "fd", "sweep", "output"}


def _reject_unknown(d, allowed, path):
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {path}")


def _require(d, key, path):
    if key not in d or d[key] is None:
        raise ConfigError(f"missing required key {path}.{key}")
    return d[key]


def _merge_defaults(section, defaults, path):
    if section is None:
        section = {}
    if not isinstance(section, dict):
        raise ConfigError(f"{path} must be a mapping")
    _reject_unknown(section, defaults, path)
    out = copy.deepcopy(defaults)
    out.update({k: v for k, v in section.items() if v is not None})
    return out


def _parse_cost(d, path):
    if not isinstance(d, dict):
        raise ConfigError(f"{path} must be a mapping")
    _reject_unknown(d, _COST_KEYS, path)
    kind = d.get("kind", "quadratic")
    if kind != "quadratic":
        raise ConfigError(f"{path}.kind: only 'quadratic' costs are configurable; "
                          "custom costs go through the library API")
    try:
        return RunningCost.quadratic(
            curvature=float(d.get("curvature", 1.0)),
            center=float(d.get("center", 0.0)),
            offset=float(d.get("offset", 0.0)))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


@dataclass
class RunConfig:
    """Validated run configuration; ``resolved`` reserializes round-trip clean."""

    problem: dict
    solver: dict
    simulate: dict
    fd: dict
    sweep: dict
    output: dict

    @property
    def kind(self) -> str:
        return self.problem["kind"]

    @property
    def seed(self) -> int:
        return int(self.simulate["seed"])

    @property
    def out_dir(self) -> str:
        return self.output["dir"]

    def resolved(self) -> dict:
        return {
            "problem": copy.deepcopy(self.problem),
            "solver": copy.deepcopy(self.solver),
            "simulate": copy.deepcopy(self.simulate),
            "fd": copy.deepcopy(self.fd),
            "sweep": copy.deepcopy(self.sweep),
            "output": copy.deepcopy(self.output),
        }

    def dump_yaml(self) -> str:
        return yaml.safe_dump(self.resolved(), sort_keys=True)

    # -- model builders ------------------------------------------------------

    def game_spec(self) -> GameSpec:
        p = self.problem
        if p["kind"] not in ("two_player", "interbank"):
            raise ConfigError(f"problem kind {p['kind']} does not define a game spec")
        sigma = np.asarray(p["sigma"], dtype=float)
        n = sigma.shape[0] if sigma.ndim == 2 else 1
        kwargs = dict(
            mu=p.get("mu") if p.get("mu") is not None else np.zeros(n),
            sigma=sigma,
            rho=float(p["rho"]),
            K_plus=p["K_plus"],
            K_minus=p["K_minus"],
            L=p.get("L") if p.get("L") is not None else np.full(n, 1.0 / n),
            benchmark_weights=(p.get("benchmark_weights")
                               if p.get("benchmark_weights") is not None
                               else np.full(n, 1.0 / n)),
            x0=p.get("x0"),
        )
        try:
            if p["kind"] == "two_player":
                return GameSpec(difference_cost=_parse_cost(p["cost"], "problem.cost"), **kwargs)
            joint = interbank_running_cost(p["kappa"], p["nu"],
                                           kwargs["benchmark_weights"], kwargs["L"])
            return GameSpec(joint_cost=joint, **kwargs)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"problem: {exc}") from exc

    def investment_spec(self) -> InvestmentSpec:
        p = self.problem
        if p["kind"] != "investment":
            raise ConfigError("problem kind is not 'investment'")
        inv = p["investors"]
        prod = p["products"]
        y0 = np.asarray(inv["y0"], dtype=float)
        M, P = np.atleast_2d(y0).shape
        if p.get("costs") is not None:
            costs = [[_parse_cost(c, f"problem.costs[{i}][{j}]")
                      for j, c in enumerate(row)] for i, row in enumerate(p["costs"])]
        else:
            shared = _parse_cost(p["cost"], "problem.cost")
            costs = [[shared] * P for _ in range(M)]
        try:
            return InvestmentSpec(
                y0=y0,
                mu=np.asarray(inv.get("mu") if inv.get("mu") is not None
                              else np.zeros((M, P)), dtype=float),
                sigma=np.asarray(inv["sigma"], dtype=float),
                p=np.asarray(inv["p"], dtype=float),
                q=np.asarray(inv["q"], dtype=float),
                r=prod.get("r") if prod.get("r") is not None else np.zeros(P),
                demand_drift=(prod.get("demand_drift")
                              if prod.get("demand_drift") is not None else np.zeros(P)),
                demand_vol=(prod.get("demand_vol")
                            if prod.get("demand_vol") is not None else np.zeros(P)),
                d0=prod.get("d0") if prod.get("d0") is not None else np.zeros(P),
                rho=float(p["rho"]),
                costs=costs,
            )
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"problem: {exc}") from exc

    def reduced_problem(self) -> ReducedProblem1D:
        p = self.problem
        if p["kind"] != "reduced1d":
            raise ConfigError("problem kind is not 'reduced1d'")
        if abs(float(p["K_plus"]) - float(p["K_minus"])) > 1e-15:
            raise ConfigError("reduced1d with K+ != K- has no closed form; run 'verify' "
                              "(the FD solver handles asymmetric costs)")
        try:
            return ReducedProblem1D(
                sigma_tilde=float(p["sigma_tilde"]),
                rho=float(p["rho"]),
                K_eff=float(p["K_plus"]),
                cost=_parse_cost(p["cost"], "problem.cost"),
                x0=float(p.get("x0") or 0.0),
            )
        except ValueError as exc:
            raise ConfigError(f"problem: {exc}") from exc

    def sim_config(self, rho: Optional[float] = None) -> SimConfig:
        s = self.simulate
        horizon = s["horizon"]
        if horizon is None:
            if rho is None:
                rho = float(self.problem["rho"])
            horizon = default_horizon(rho, float(s["dt"]))
        try:
            return SimConfig(dt=float(s["dt"]), T=float(horizon),
                             n_paths=int(s["n_paths"]), seed=int(s["seed"]),
                             antithetic=bool(s["antithetic"]),
                             keep_paths=int(s["keep_paths"]))
        except ValueError as exc:
            raise ConfigError(f"simulate: {exc}") from exc


def parse_config_dict(raw: dict) -> RunConfig:
    """Validate a raw config mapping and fill in defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    _reject_unknown(raw, _SECTIONS, "config")
    problem = raw.get("problem")
    if not isinstance(problem, dict):
        raise ConfigError("config needs a 'problem' section")
    kind = _require(problem, "kind", "problem")
    if kind not in _PROBLEM_KEYS:
        raise ConfigError(f"problem.kind must be one of {sorted(_PROBLEM_KEYS)}")
    _reject_unknown(problem, _PROBLEM_KEYS[kind], "problem")
    _require(problem, "rho", "problem")
    if kind in ("two_player", "interbank"):
        for key in ("sigma", "K_plus", "K_minus"):
            _require(problem, key, "problem")
        sigma = np.asarray(problem["sigma"], dtype=float)
        if sigma.ndim != 2:
            raise ConfigError("problem.sigma must be a matrix (one row per player)")
        n = sigma.shape[0]
        for key in ("K_plus", "K_minus", "mu", "L", "benchmark_weights", "x0",
                    "kappa", "nu"):
            if problem.get(key) is not None and len(problem[key]) != n:
                raise ConfigError(f"problem.{key} must have length N={n}")
        if kind == "two_player":
            if n != 2:
                raise ConfigError("two_player problems need exactly 2 volatility rows")
            _require(problem, "cost", "problem")
        else:
            _require(problem, "kappa", "problem")
            _require(problem, "nu", "problem")
    elif kind == "investment":
        inv = _require(problem, "investors", "problem")
        _reject_unknown(inv, _INVESTOR_KEYS, "problem.investors")
        for key in ("y0", "sigma", "p", "q"):
            _require(inv, key, "problem.investors")
        prod = _require(problem, "products", "problem")
        _reject_unknown(prod, _PRODUCT_KEYS, "problem.products")
        if problem.get("cost") is None and problem.get("costs") is None:
            raise ConfigError("investment problems need problem.cost or problem.costs")
    else:  # reduced1d
        for key in ("sigma_tilde", "K_plus", "K_minus", "cost"):
            _require(problem, key, "problem")

    cfg = RunConfig(
        problem=copy.deepcopy(problem),
        solver=_merge_defaults(raw.get("solver"), _SOLVER_DEFAULTS, "solver"),
        simulate=_merge_defaults(raw.get("simulate"), _SIMULATE_DEFAULTS, "simulate"),
        fd=_merge_defaults(raw.get("fd"), _FD_DEFAULTS, "fd"),
        sweep=_merge_defaults(raw.get("sweep"), _SWEEP_DEFAULTS, "sweep"),
        output=_merge_defaults(raw.get("output"), _OUTPUT_DEFAULTS, "output"),
    )
    if cfg.solver["sigma_convention"] not in ("joint", "difference"):
        raise ConfigError("solver.sigma_convention must be 'joint' or 'difference'")
    if cfg.simulate["policy"] not in ("pareto", "nash", "band"):
        raise ConfigError("simulate.policy must be pareto, nash, or band")
    return cfg


def _env_overrides(env=None) -> dict:
    env = os.environ if env is None else env
    out = {}
    mapping = {
        "SEED": ("simulate", "seed", int),
        "PATHS": ("simulate", "n_paths", int),
        "DT": ("simulate", "dt", float),
        "GRID": ("fd", "nodes", int),
        "TOL": ("solver", "tol", float),
        "OUT": ("output", "dir", str),
    }
    for suffix, (section, key, conv) in mapping.items():
        name = ENV_PREFIX + suffix
        if name in env:
            try:
                out.setdefault(section, {})[key] = conv(env[name])
            except ValueError as exc:
                raise ConfigError(f"environment override {name}: {exc}") from exc
    return out


def load_config(path: str, overrides: Optional[dict] = None, env=None) -> RunConfig:
    """Read, override (flags > env > file), validate.

    ``overrides`` is a nested partial mapping from the command line.
    """
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    if raw is None:
        raise ConfigError(f"empty config: {path}")
    for source in (_env_overrides(env), overrides or {}):
        for section, upd in source.items():
            base = raw.setdefault(section, {})
            if not isinstance(base, dict):
                raise ConfigError(f"section {section} must be a mapping")
            base.update(upd)
    return parse_config_dict(raw)
