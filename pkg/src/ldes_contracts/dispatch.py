"""Scenario dispatch as a welfare-maximising linear program.

Each scenario clears an energy-only market over the time grid: inelastic
demand valued at the price cap, a flexible demand tier valued at its bid,
linear generation costs, renewable output limited by capacity factors and
storage with a cyclic state of charge. Prices are the duals of the hourly
balance rows.

The same assembly serves the two-stage expansion model: when a technology
is marked investable its capacity becomes a first-stage variable shared by
all scenarios and the objective is expected welfare minus investment cost.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .config import Scenario, SystemConfig, Technology, DemandModel
from .lp import LinearProgram, LPBuilder, LPSolution, solve_lp

ACTIVE_EPS = 1e-6  # MW threshold for "charging or discharging"


@dataclass(frozen=True)
class StorageStats:
    sigma: float  # realised spread, $/MWh
    v: float  # discharged energy per MW installed, MWh/MW
    tau: float  # share of weighted hours charging or discharging


@dataclass
class DispatchProblem:
    config: SystemConfig
    scenarios: tuple[Scenario, ...]
    probabilities: np.ndarray
    lp: LinearProgram
    capacities: dict[str, float]
    investable: tuple[str, ...]
    cols: dict[tuple[str, str], np.ndarray]
    cap_cols: dict[str, int]
    balance_rows: np.ndarray
    marginal_costs: dict[str, np.ndarray]

    @property
    def scenario_id(self) -> str:
        return self.scenarios[0].id


@dataclass
class DispatchResult:
    scenario_id: str
    probability: float
    weights: np.ndarray
    prices: np.ndarray
    dispatch: dict[str, np.ndarray]
    charge: dict[str, np.ndarray]
    soc: dict[str, np.ndarray]
    served_inelastic: np.ndarray
    served_flex: np.ndarray
    demand: np.ndarray
    available: dict[str, np.ndarray]
    capacities: dict[str, float]
    marginal_costs: dict[str, float]
    welfare: float
    price_cap: float
    flexible_bid: float
    net_revenue_per_mw: dict[str, float] = field(default_factory=dict)
    storage_stats: dict[str, StorageStats] = field(default_factory=dict)
    consumer_surplus: float = 0.0

    @property
    def served_demand(self) -> np.ndarray:
        return self.served_inelastic + self.served_flex

    @property
    def unmet_demand_mwh(self) -> float:
        return float(self.weights @ np.maximum(self.demand - self.served_inelastic, 0.0))

    def balance_residual(self) -> float:
        supply = sum(self.dispatch.values()) - sum(self.charge.values(), np.zeros_like(self.prices))
        return float(np.max(np.abs(supply - self.served_demand)))


@dataclass
class DispatchSolution:
    problem: DispatchProblem
    lp_solution: LPSolution
    results: list[DispatchResult]
    capacities: dict[str, float]

    @property
    def expected_welfare(self) -> float:
        return -self.lp_solution.objective


def resolve_capacities(config: SystemConfig, capacities: Mapping[str, float]) -> dict[str, float]:
    names = set(config.tech_names)
    for name, value in capacities.items():
        if name not in names:
            raise KeyError(f"unknown resource {name!r}")
        if value < 0:
            raise ValueError(f"negative capacity for {name!r}")
    caps = {}
    for tech in config.technologies:
        if tech.cap_fixed is not None:
            caps[tech.name] = float(tech.cap_fixed)
        else:
            caps[tech.name] = float(capacities.get(tech.name, 0.0))
    return caps


def _check_profiles(config: SystemConfig, scenarios: Sequence[Scenario]) -> None:
    steps = config.time_grid.steps
    for s in scenarios:
        if len(s.demand_profile) != steps:
            raise ValueError(f"scenario {s.id}: demand profile length {len(s.demand_profile)} != {steps}")
        for tech in config.technologies:
            if tech.is_renewable:
                prof = s.vre_profiles.get(tech.name)
                if prof is None or len(prof) != steps:
                    raise ValueError(f"scenario {s.id}: profile for {tech.name} missing or wrong length")


def _assemble(config: SystemConfig, scenarios: Sequence[Scenario], probabilities: np.ndarray,
              fixed: dict[str, float], investable: Sequence[str]) -> DispatchProblem:
    _check_profiles(config, scenarios)
    grid = config.time_grid
    w = np.asarray(grid.weights, dtype=float)
    h = grid.step_hours
    T = grid.steps
    S = len(scenarios)
    cap, bid = config.demand.price_cap, config.demand.flexible_bid
    lpb = LPBuilder()
    cols: dict[tuple[str, str], np.ndarray] = {}
    cap_cols: dict[str, int] = {}
    mcs: dict[str, np.ndarray] = {}

    for name in investable:
        tech = config.technology(name)
        cap_cols[name] = int(lpb.add_vars(1, cost=tech.invest_cost_annualized, lb=0.0,
                                          ub=tech.cap_max, name=f"cap_{name}")[0])

    pw = probabilities[:, None] * w[None, :]  # (S, T) objective scaling
    demand = np.array([s.demand_profile for s in scenarios], dtype=float)

    def block(name, cost, ub):
        return lpb.add_vars(S * T, cost=np.ravel(cost), lb=0.0, ub=np.ravel(ub), name=name).reshape(S, T)

    cols[("inelastic", "")] = block("d_inel", -cap * pw, demand)
    cols[("flex", "")] = block("d_flex", -bid * pw, np.full((S, T), config.demand.flexible_mw))

    for tech in config.technologies:
        name = tech.name
        mc = np.array([tech.marginal_cost(s.gas_price) for s in scenarios])
        mcs[name] = mc
        free = name in cap_cols
        c = fixed.get(name, 0.0)
        if tech.is_storage:
            E = tech.storage_duration
            ub_p = np.inf if free else c
            dis = block(f"dis_{name}", mc[:, None] * pw, np.full((S, T), ub_p))
            ch = block(f"ch_{name}", 0.0, np.full((S, T), ub_p))
            soc = block(f"soc_{name}", 0.0, np.full((S, T), np.inf if free else c * E))
            cols[("discharge", name)] = dis
            cols[("charge", name)] = ch
            cols[("soc", name)] = soc
            eta = tech.round_trip_efficiency
            prev = np.roll(soc, 1, axis=1)
            f0 = config.initial_soc_fraction
            if f0 is None:
                lpb.add_rows("eq", np.stack([soc, prev, ch, dis], -1).reshape(-1, 4),
                             np.array([1.0, -1.0, -h * eta, h]), 0.0, name=f"soc_{name}")
            else:
                inner = np.stack([soc[:, 1:], prev[:, 1:], ch[:, 1:], dis[:, 1:]], -1).reshape(-1, 4)
                lpb.add_rows("eq", inner, np.array([1.0, -1.0, -h * eta, h]), 0.0, name=f"soc_{name}")
                first = np.stack([soc[:, 0], ch[:, 0], dis[:, 0]], -1)
                last = soc[:, -1:]
                if free:
                    k = cap_cols[name]
                    kk = np.full((S, 1), k)
                    lpb.add_rows("eq", np.hstack([first, kk]), np.array([1.0, -h * eta, h, -f0 * E]), 0.0,
                                 name=f"soc0_{name}")
                    lpb.add_rows("eq", np.hstack([last, kk]), np.array([1.0, -f0 * E]), 0.0, name=f"socT_{name}")
                else:
                    lpb.add_rows("eq", first, np.array([1.0, -h * eta, h]), f0 * E * c, name=f"soc0_{name}")
                    lpb.add_rows("eq", last, 1.0, f0 * E * c, name=f"socT_{name}")
            if free:
                k = cap_cols[name]
                for var, coef in ((dis, 1.0), (ch, 1.0), (soc, E)):
                    flat = var.reshape(-1, 1)
                    lpb.add_rows("ub", np.hstack([flat, np.full_like(flat, k)]),
                                 np.array([1.0, -coef]), 0.0, name=f"bound_{name}")
        else:
            if tech.is_renewable:
                cf = np.array([s.vre_profiles[name] for s in scenarios], dtype=float)
            else:
                cf = np.ones((S, T))
            gen = block(f"gen_{name}", mc[:, None] * pw, np.inf if free else cf * c)
            cols[("gen", name)] = gen
            if free:
                k = cap_cols[name]
                flat = gen.reshape(-1, 1)
                lpb.add_rows("ub", np.hstack([flat, np.full_like(flat, k)]),
                             np.column_stack([np.ones(S * T), -cf.ravel()]), 0.0, name=f"avail_{name}")

    supply = [cols[("gen", t.name)] for t in config.technologies if not t.is_storage]
    supply += [cols[("discharge", t.name)] for t in config.technologies if t.is_storage]
    sinks = [cols[("charge", t.name)] for t in config.technologies if t.is_storage]
    sinks += [cols[("inelastic", "")], cols[("flex", "")]]
    balance_cols = np.stack(supply + sinks, -1).reshape(S * T, -1)
    coefs = np.array([1.0] * len(supply) + [-1.0] * len(sinks))
    balance_rows = lpb.add_rows("eq", balance_cols, coefs, 0.0, name="balance").reshape(S, T)

    lp = lpb.build()
    return DispatchProblem(
        config=config, scenarios=tuple(scenarios), probabilities=probabilities, lp=lp,
        capacities=dict(fixed), investable=tuple(investable), cols=cols, cap_cols=cap_cols,
        balance_rows=balance_rows, marginal_costs=mcs,
    )


def build_dispatch(config: SystemConfig, capacities: Mapping[str, float], scenario: Scenario) -> DispatchProblem:
    """Single-scenario dispatch with every capacity fixed."""
    caps = resolve_capacities(config, capacities)
    return _assemble(config, [scenario], np.ones(1), caps, ())


def build_expansion(config: SystemConfig, fixed: Mapping[str, float],
                    scenarios: Optional[Sequence[Scenario]] = None) -> DispatchProblem:
    """Two-stage problem: technologies absent from ``fixed`` (and without a
    configured fixed capacity) become investment variables."""
    scenarios = tuple(scenarios or config.scenarios)
    probs = np.array([s.probability for s in scenarios], dtype=float)
    if np.any(probs <= 0):
        raise ValueError("expansion problems need strictly positive scenario probabilities")
    caps = resolve_capacities(config, fixed)
    investable = tuple(t.name for t in config.technologies
                       if t.cap_fixed is None and t.name not in fixed)
    for name in investable:
        caps.pop(name)
    return _assemble(config, scenarios, probs, caps, investable)


def _extract(problem: DispatchProblem, sol: LPSolution) -> DispatchSolution:
    config = problem.config
    x = sol.x
    w = np.asarray(config.time_grid.weights, dtype=float)
    caps = dict(problem.capacities)
    for name, k in problem.cap_cols.items():
        caps[name] = float(x[k])
    n_eq = len(problem.lp.b_eq)
    duals = sol.eq_duals if len(sol.eq_duals) == n_eq else np.zeros(n_eq)
    results = []
    for i, scen in enumerate(problem.scenarios):
        p = problem.probabilities[i]
        prices = duals[problem.balance_rows[i]] / (p * w) + 0.0  # no negative zeros
        dispatch, charge, soc, available = {}, {}, {}, {}
        mc = {}
        for tech in config.technologies:
            name = tech.name
            mc[name] = float(problem.marginal_costs[name][i])
            if tech.is_storage:
                dispatch[name] = x[problem.cols[("discharge", name)][i]]
                charge[name] = x[problem.cols[("charge", name)][i]]
                soc[name] = x[problem.cols[("soc", name)][i]]
            else:
                dispatch[name] = x[problem.cols[("gen", name)][i]]
                if tech.is_renewable:
                    available[name] = np.asarray(scen.vre_profiles[name]) * caps[name]
        d_in = x[problem.cols[("inelastic", "")][i]]
        d_fx = x[problem.cols[("flex", "")][i]]
        cost = sum(w @ (mc[n] * dispatch[n]) for n in dispatch)
        welfare = float(w @ (config.demand.price_cap * d_in + config.demand.flexible_bid * d_fx) - cost)
        res = DispatchResult(
            scenario_id=scen.id, probability=float(scen.probability), weights=w, prices=prices,
            dispatch=dispatch, charge=charge, soc=soc, served_inelastic=d_in, served_flex=d_fx,
            demand=np.asarray(scen.demand_profile, dtype=float), available=available,
            capacities=caps, marginal_costs=mc, welfare=welfare,
            price_cap=config.demand.price_cap, flexible_bid=config.demand.flexible_bid,
        )
        for tech in config.technologies:
            if caps[tech.name] > 0:
                res.net_revenue_per_mw[tech.name] = net_revenue(res, tech, caps[tech.name])
                if tech.is_storage:
                    res.storage_stats[tech.name] = storage_stats(res, tech, caps[tech.name])
        res.consumer_surplus = consumer_surplus(res, config.demand)
        results.append(res)
    return DispatchSolution(problem=problem, lp_solution=sol, results=results, capacities=caps)


def solve_problem(problem: DispatchProblem, backend: str = "highs") -> DispatchSolution:
    return _extract(problem, solve_lp(problem.lp, backend=backend))


def solve_dispatch(problem: DispatchProblem, backend: str = "highs") -> DispatchResult:
    """Solve a single-scenario problem and return its result."""
    if len(problem.scenarios) != 1:
        raise ValueError("solve_dispatch expects a single-scenario problem; use solve_problem")
    return solve_problem(problem, backend).results[0]


def net_revenue(result: DispatchResult, resource: Technology, capacity: float) -> float:
    """Market net revenue per MW installed, $/MW-yr."""
    if capacity <= 0:
        raise ValueError("net revenue per MW is undefined at zero capacity")
    w, lam = result.weights, result.prices
    q = result.dispatch[resource.name]
    mc = result.marginal_costs.get(resource.name, resource.var_cost)
    if resource.is_storage:
        ch = result.charge[resource.name]
        return float((w @ (lam * q) - w @ (lam * ch) - mc * (w @ q)) / capacity)
    return float(w @ ((lam - mc) * q) / capacity)


def storage_stats(result: DispatchResult, resource: Technology, capacity: float) -> StorageStats:
    if not resource.is_storage:
        raise ValueError(f"{resource.name} is not a storage resource")
    if capacity <= 0:
        raise ValueError("storage statistics are undefined at zero capacity")
    w, lam = result.weights, result.prices
    dis = result.dispatch[resource.name]
    ch = result.charge[resource.name]
    energy = float(w @ dis)
    spread_revenue = float(w @ (lam * dis) - w @ (lam * ch))
    sigma = spread_revenue / energy if energy > 0 else 0.0
    active = (ch + dis) > ACTIVE_EPS * max(capacity, 1.0)
    tau = float(w[active].sum() / w.sum())
    return StorageStats(sigma=sigma, v=energy / capacity, tau=tau)


def consumer_surplus(result: DispatchResult, demand: DemandModel) -> float:
    w, lam = result.weights, result.prices
    return float(w @ ((demand.price_cap - lam) * result.served_inelastic
                      + (demand.flexible_bid - lam) * result.served_flex))


def write_results_csv(results: Sequence[DispatchResult], path: str | Path) -> None:
    """Tidy per-step export: one row per scenario and step."""
    if not results:
        Path(path).write_text("")
        return
    names = list(results[0].dispatch)
    storage = list(results[0].charge)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scenario", "step", "price", "served", "unmet", "flex"]
                        + [f"q_{n}" for n in names] + [f"charge_{n}" for n in storage])
        for res in results:
            unmet = np.maximum(res.demand - res.served_inelastic, 0.0)
            for t in range(len(res.prices)):
                writer.writerow([res.scenario_id, t, f"{res.prices[t]:.10g}",
                                 f"{res.served_demand[t]:.10g}", f"{unmet[t]:.10g}",
                                 f"{res.served_flex[t]:.10g}"]
                                + [f"{res.dispatch[n][t]:.10g}" for n in names]
                                + [f"{res.charge[n][t]:.10g}" for n in storage])
