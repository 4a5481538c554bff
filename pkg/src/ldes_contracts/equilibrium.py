"""Capacity equilibria with a single contracted, risk-averse storage investor.

All other investable technologies are risk-neutral. For a given contracted
capacity their zero-profit capacities coincide with the expected-welfare
maximum, so they come from one two-stage LP. The contracted capacity is then
searched on a grid: risk-adjusted profit is evaluated at each grid point,
sign changes are refined by bisection, and the largest stable zero crossing
is reported.

Prices are LP duals, so profit is piecewise constant in capacity and jumps
where the supporting prices change. Brackets are bisected down to the
capacity tolerance and the two end states are then blended with the weight
that zeroes the risk-adjusted profit, which also selects supporting prices
at a breakpoint. States are solved by interior point without crossover so
that, where duals are not unique, the central ones are used.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .config import InvestorProfile, SystemConfig
from .contracts import Contract, ScenarioExposure, payoff
from .dispatch import DispatchSolution, build_expansion, solve_problem
from .risk import CashflowDistribution, implied_wacc, risk_adjusted_profit

logger = logging.getLogger(__name__)

PROFIT_RTOL = 1e-3  # complementarity tolerance as a fraction of annualised fixed cost
BOUND_RTOL = 1e-6  # capacities this close to a bound (fraction of cap_max) count as at the bound


def _bound_tol(tech) -> float:
    # interior-point solutions stop short of bounds by an amount that scales with the problem
    return max(1e-3, BOUND_RTOL * tech.cap_max)


class EquilibriumError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    points: int = 21
    capacity_tol: float = 10.0  # MW
    probe_fraction: float = 1e-4  # zero-capacity probe, fraction of cap_max


@dataclass(frozen=True)
class ScenarioSummary:
    scenario_id: str
    probability: float
    exposure: ScenarioExposure
    consumer_surplus: float
    welfare: float
    price_energy: float  # sum of weighted price x served demand, $
    served_mwh: float
    unmet_mwh: float
    generation_mwh: Mapping[str, float]
    curtailment_mwh: float
    storage_throughput_mwh: float = 0.0

    @property
    def average_price(self) -> float:
        return self.price_energy / self.served_mwh if self.served_mwh else 0.0

    def blend(self, other: "ScenarioSummary", theta: float) -> "ScenarioSummary":
        a = 1.0 - theta
        mix = lambda x, y: a * x + theta * y
        return replace(
            self,
            exposure=self.exposure.blend(other.exposure, theta),
            consumer_surplus=mix(self.consumer_surplus, other.consumer_surplus),
            welfare=mix(self.welfare, other.welfare),
            price_energy=mix(self.price_energy, other.price_energy),
            served_mwh=mix(self.served_mwh, other.served_mwh),
            unmet_mwh=mix(self.unmet_mwh, other.unmet_mwh),
            generation_mwh={k: mix(v, other.generation_mwh[k]) for k, v in self.generation_mwh.items()},
            curtailment_mwh=mix(self.curtailment_mwh, other.curtailment_mwh),
            storage_throughput_mwh=mix(self.storage_throughput_mwh, other.storage_throughput_mwh),
        )


@dataclass(frozen=True)
class CapacityState:
    """Outcome of the risk-neutral sub-equilibrium at one contracted capacity."""

    capacity: float
    capacities: Mapping[str, float]
    summaries: tuple[ScenarioSummary, ...]
    profit_gaps: Mapping[str, float]  # expected net revenue minus fixed cost, free technologies
    expected_welfare: float
    blend: Optional[tuple[float, float, float]] = None  # (low capacity, high capacity, weight)

    @property
    def exposures(self) -> tuple[ScenarioExposure, ...]:
        return tuple(s.exposure for s in self.summaries)

    @property
    def probabilities(self) -> tuple[float, ...]:
        return tuple(s.probability for s in self.summaries)

    def mix(self, other: "CapacityState", theta: float) -> "CapacityState":
        a = 1.0 - theta
        return CapacityState(
            capacity=a * self.capacity + theta * other.capacity,
            capacities={k: a * v + theta * other.capacities[k] for k, v in self.capacities.items()},
            summaries=tuple(s.blend(o, theta) for s, o in zip(self.summaries, other.summaries)),
            profit_gaps={k: a * v + theta * other.profit_gaps[k] for k, v in self.profit_gaps.items()},
            expected_welfare=a * self.expected_welfare + theta * other.expected_welfare,
            blend=(self.capacity, other.capacity, theta),
        )


def cashflows(config: SystemConfig, state: CapacityState, contract: Optional[Contract]) -> CashflowDistribution:
    """Per-MW scenario net cashflow of the contracted technology."""
    tech = config.contract_tech
    F = tech.annualized_fixed_cost
    values = []
    for e in state.exposures:
        kappa = payoff(contract, e, tech) if contract is not None else 0.0
        values.append(e.net_revenue - F + kappa)
    return CashflowDistribution(tuple(values), state.probabilities)


def payoffs(config: SystemConfig, state: CapacityState, contract: Optional[Contract]) -> CashflowDistribution:
    tech = config.contract_tech
    values = [payoff(contract, e, tech) if contract is not None else 0.0 for e in state.exposures]
    return CashflowDistribution(tuple(values), state.probabilities)


def revenues(config: SystemConfig, state: CapacityState, contract: Optional[Contract]) -> CashflowDistribution:
    """Market net revenue plus contract payoff, $/MW-yr."""
    tech = config.contract_tech
    values = [e.net_revenue + (payoff(contract, e, tech) if contract is not None else 0.0)
              for e in state.exposures]
    return CashflowDistribution(tuple(values), state.probabilities)


def _marginal_values(solution: DispatchSolution) -> dict[str, float]:
    """Expected marginal revenue of each investment variable, from LP duals."""
    problem = solution.problem
    lp = problem.lp
    sol = solution.lp_solution
    out = {}
    for name, k in problem.cap_cols.items():
        dual_term = lp.A_ub[:, k].T @ sol.ub_duals + lp.A_eq[:, k].T @ sol.eq_duals
        reduced = lp.c[k] - float(np.ravel(dual_term)[0])
        out[name] = lp.c[k] - reduced
    return out


def _zero_profit_gaps(config: SystemConfig, solution: DispatchSolution) -> dict[str, float]:
    marginal = _marginal_values(solution)
    gaps = {}
    for name in solution.problem.investable:
        tech = config.technology(name)
        c = solution.capacities[name]
        if c > _bound_tol(tech):
            expected = sum(r.probability * r.net_revenue_per_mw[name] for r in solution.results)
        else:
            expected = marginal[name]
        gaps[name] = expected - tech.annualized_fixed_cost
    return gaps


def _verify_gaps(config: SystemConfig, capacities: Mapping[str, float], gaps: Mapping[str, float]) -> None:
    bad = {}
    for name, gap in gaps.items():
        tech = config.technology(name)
        tol = PROFIT_RTOL * max(tech.annualized_fixed_cost, 1.0)
        c = capacities[name]
        eps = _bound_tol(tech)
        if c <= eps:
            ok = gap <= tol
        elif c >= tech.cap_max - eps:
            ok = gap >= -tol
        else:
            # also admits slivers left near zero by the interior point solver
            ok = complementarity_residual(c, tech.cap_max, gap) <= tol
        if not ok:
            bad[name] = (c, gap)
    if bad:
        detail = ", ".join(f"{n}: capacity {c:.3f} MW, profit gap {g:.3f} $/MW-yr" for n, (c, g) in bad.items())
        raise EquilibriumError(f"zero-profit verification failed ({detail})")


def _summaries(config: SystemConfig, solution: DispatchSolution, probe: Optional[float]) -> tuple[ScenarioSummary, ...]:
    tech = config.contract_tech
    name = tech.name
    out = []
    for r in solution.results:
        w = r.weights
        if name in r.storage_stats:
            st = r.storage_stats[name]
            exposure = ScenarioExposure(r.net_revenue_per_mw[name], st.sigma, st.v, st.tau)
        else:
            exposure = ScenarioExposure(r.net_revenue_per_mw.get(name, 0.0))
        gen = {t.name: float(w @ r.dispatch[t.name]) for t in config.technologies}
        curtail = sum(float(w @ (r.available[n] - r.dispatch[n])) for n in r.available)
        scale = 0.0 if probe else 1.0  # the probe capacity stands in for zero in system totals
        gen[name] *= scale
        out.append(ScenarioSummary(
            scenario_id=r.scenario_id,
            probability=r.probability,
            exposure=exposure,
            consumer_surplus=r.consumer_surplus,
            welfare=r.welfare,
            price_energy=float(w @ (r.prices * r.served_demand)),
            served_mwh=float(w @ r.served_demand),
            unmet_mwh=r.unmet_demand_mwh,
            generation_mwh=gen,
            curtailment_mwh=curtail,
            storage_throughput_mwh=float(w @ r.dispatch[name]) * scale if tech.is_storage else 0.0,
        ))
    return tuple(out)


def solve_state(config: SystemConfig, capacity: float, grid: GridSpec = GridSpec(),
                backend: str = "central") -> CapacityState:
    tech = config.contract_tech
    probe = None
    c_eval = capacity
    if capacity <= 0:
        probe = grid.probe_fraction * max(tech.cap_max, 1.0)
        c_eval = probe
    solution = solve_problem(build_expansion(config, {tech.name: c_eval}), backend=backend)
    gaps = _zero_profit_gaps(config, solution)
    _verify_gaps(config, solution.capacities, gaps)
    caps = dict(solution.capacities)
    caps[tech.name] = float(capacity)
    return CapacityState(
        capacity=float(capacity),
        capacities=caps,
        summaries=_summaries(config, solution, probe),
        profit_gaps=gaps,
        expected_welfare=solution.expected_welfare,
    )


def _solve_state_job(args):
    config, capacity, grid, backend = args
    return solve_state(config, capacity, grid, backend)


class ProfitModel:
    """Caches sub-equilibrium states by contracted capacity.

    States do not depend on the contract or on risk preferences, so one
    model can serve sweeps and calibrations on the same configuration.
    """

    def __init__(self, config: SystemConfig, grid: GridSpec = GridSpec(), backend: str = "central",
                 parallel: int = 1):
        self.config = config
        self.grid = grid
        self.backend = backend
        self.parallel = parallel
        self._cache: dict[float, CapacityState] = {}
        self.solves = 0

    def state(self, capacity: float) -> CapacityState:
        key = float(capacity)
        if key not in self._cache:
            self._cache[key] = solve_state(self.config, key, self.grid, self.backend)
            self.solves += 1
        return self._cache[key]

    def pin(self, state: CapacityState) -> None:
        """Use ``state`` whenever its capacity is requested, e.g. to keep the
        supporting prices of a previously found equilibrium."""
        self._cache[float(state.capacity)] = state

    def states(self, capacities: Iterable[float]) -> list[CapacityState]:
        keys = [float(c) for c in capacities]
        missing = [c for c in dict.fromkeys(keys) if c not in self._cache]
        if self.parallel > 1 and len(missing) > 1:
            jobs = [(self.config, c, self.grid, self.backend) for c in missing]
            with ProcessPoolExecutor(max_workers=self.parallel) as pool:
                for c, st in zip(missing, pool.map(_solve_state_job, jobs)):
                    self._cache[c] = st
                    self.solves += 1
        return [self.state(c) for c in keys]

    def profit(self, capacity: float, contract: Optional[Contract], profile: InvestorProfile) -> float:
        return state_profit(self.config, self.state(capacity), contract, profile)


def state_profit(config: SystemConfig, state: CapacityState, contract: Optional[Contract],
                 profile: InvestorProfile) -> float:
    return risk_adjusted_profit(cashflows(config, state, contract), profile)


def risk_neutral_expansion(config: SystemConfig, fixed: Mapping[str, float] | None = None,
                           backend: str = "central") -> dict[str, float]:
    """Zero-profit capacities for all investable technologies not in ``fixed``."""
    solution = solve_problem(build_expansion(config, dict(fixed or {})), backend=backend)
    gaps = _zero_profit_gaps(config, solution)
    _verify_gaps(config, solution.capacities, gaps)
    return dict(solution.capacities)


def ldes_profit(config: SystemConfig, contract: Optional[Contract], ldes_capacity: float,
                profile: Optional[InvestorProfile] = None, model: Optional[ProfitModel] = None) -> float:
    """Risk-adjusted profit per MW of the contracted technology at a fixed capacity."""
    if ldes_capacity <= 0:
        raise ValueError("ldes_capacity must be positive")
    model = model or ProfitModel(config)
    return model.profit(ldes_capacity, contract, profile or config.investor())


@dataclass
class Crossing:
    capacity: float
    kind: str  # "lower", "upper", "down", "up", "zero", "target"
    stable: bool


@dataclass
class EquilibriumResult:
    capacities: dict[str, float]
    profits: dict[str, float]
    contract: Optional[Contract]
    profile: InvestorProfile
    state: CapacityState
    residuals: dict[str, float]
    grid_trace: list[tuple[float, float]]
    crossings: list[Crossing]
    selected: str
    flags: list[str] = field(default_factory=list)

    @property
    def capacity(self) -> float:
        return self.state.capacity

    @property
    def per_scenario(self) -> tuple[ScenarioSummary, ...]:
        return self.state.summaries

    @property
    def profit(self) -> float:
        return self.profits["__contracted__"]

    def metrics(self, config: SystemConfig) -> dict[str, float]:
        """System and financing indicators in the layout of the risk-aversion table."""
        tech = config.contract_tech
        rev = revenues(config, self.state, self.contract)
        wacc = implied_wacc(rev, tech, self.profile.risk_free_rate)
        p = np.array(self.state.probabilities)
        S = self.per_scenario
        expect = lambda f: float(sum(pi * f(s) for pi, s in zip(p, S)))
        thermal = [t.name for t in config.technologies if t.fuel_indexed]
        vre = [t.name for t in config.technologies if t.is_renewable]
        served = expect(lambda s: s.served_mwh)
        return {
            "implied_wacc_pct": 100.0 * wacc.rate,
            "ldes_gw": self.capacity / 1e3,
            "avg_price": expect(lambda s: s.price_energy) / served if served else 0.0,
            "unmet_gwh": expect(lambda s: s.unmet_mwh) / 1e3,
            "gen_ccgt_twh": expect(lambda s: sum(s.generation_mwh[n] for n in thermal)) / 1e6,
            "gen_vre_twh": expect(lambda s: sum(s.generation_mwh[n] for n in vre)) / 1e6,
            "curtailment_twh": expect(lambda s: s.curtailment_mwh) / 1e6,
        }


def _classify(rho: float, tol: float) -> int:
    if rho > tol:
        return 1
    if rho < -tol:
        return -1
    return 0


def _refine(model: ProfitModel, contract, profile, lo: float, hi: float, sign_lo: int) -> CapacityState:
    """Bisect a sign-changing bracket down to the capacity tolerance, then
    blend the end states with the weight that zeroes the profit."""
    config = model.config
    s_lo, s_hi = model.state(lo), model.state(hi)
    while hi - lo > model.grid.capacity_tol:
        mid = 0.5 * (lo + hi)
        s_mid = model.state(mid)
        r = state_profit(config, s_mid, contract, profile)
        if r == 0.0:
            return s_mid
        if (r > 0) == (sign_lo > 0):
            lo, s_lo = mid, s_mid
        else:
            hi, s_hi = mid, s_mid
    f = lambda th: state_profit(config, s_lo.mix(s_hi, th), contract, profile)
    a, b = 0.0, 1.0
    fa = f(a)
    scale = config.contract_tech.annualized_fixed_cost
    for _ in range(200):
        m = 0.5 * (a + b)
        fm = f(m)
        if abs(fm) <= 1e-12 * max(scale, 1.0) or b - a < 1e-15:
            break
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return s_lo.mix(s_hi, 0.5 * (a + b))


def complementarity_residual(c: float, c_max: float, rho: float) -> float:
    """Violation of the box condition: positive profit only at the upper
    bound, negative profit only at zero."""
    return max(min(c, max(-rho, 0.0)), min(c_max - c, max(rho, 0.0)))


def find_equilibrium(config: SystemConfig, contract: Optional[Contract] = None,
                     profile: Optional[InvestorProfile] = None, grid: GridSpec | None = None,
                     target: Optional[float] = None, model: Optional[ProfitModel] = None) -> EquilibriumResult:
    """Equilibrium capacity of the contracted technology.

    ``target``, when given and itself a zero-profit point, is selected among
    multiple equilibria (a fully hedged contract leaves every capacity at
    zero profit, so the contracted quantity decides).
    """
    profile = profile or config.investor()
    model = model or ProfitModel(config, grid or GridSpec())
    grid = model.grid
    tech = config.contract_tech
    c_max = tech.cap_max
    tol = PROFIT_RTOL * tech.annualized_fixed_cost
    if grid.points < 2:
        raise ValueError("grid needs at least two points")
    points = np.linspace(0.0, c_max, grid.points)
    states = model.states(points)
    rhos = [state_profit(config, s, contract, profile) for s in states]
    signs = [_classify(r, tol) for r in rhos]
    trace = [(float(c), float(r)) for c, r in zip(points, rhos)]

    found: list[tuple[Crossing, CapacityState]] = []
    n = len(points)
    if signs[0] <= 0:
        found.append((Crossing(0.0, "lower", True), states[0]))
    for i in range(n - 1):
        a, b = signs[i], signs[i + 1]
        if a != 0 and b != 0 and a != b:
            st = _refine(model, contract, profile, points[i], points[i + 1], a)
            kind = "down" if a > 0 else "up"
            found.append((Crossing(st.capacity, kind, a > 0), st))
    for i in range(1, n - 1):
        if signs[i] == 0:
            stable = signs[i - 1] >= 0 and signs[i + 1] <= 0
            found.append((Crossing(float(points[i]), "zero", stable), states[i]))
    if signs[-1] >= 0:
        found.append((Crossing(float(c_max), "upper", True), states[-1]))

    flags = []
    chosen = None
    if target is not None:
        st = model.state(target)
        if _classify(state_profit(config, st, contract, profile), tol) == 0:
            chosen = (Crossing(float(target), "target", True), st)
            found.append(chosen)
    stable = [f for f in found if f[0].stable]
    if len(stable) > 1:
        flags.append("multiple-equilibria")
    if chosen is None:
        if not stable:
            raise EquilibriumError("no stable equilibrium on the capacity grid")
        chosen = max(stable, key=lambda f: f[0].capacity)
    crossing, state = chosen
    if crossing.kind == "upper" and signs[-1] > 0:
        flags.append("capacity-bound-binding")
    if state.blend is not None:
        flags.append("price-blend")

    rho = state_profit(config, state, contract, profile)
    profits = {"__contracted__": rho, tech.name: rho}
    residuals = {tech.name: complementarity_residual(state.capacity, c_max, rho)}
    for name, gap in state.profit_gaps.items():
        t = config.technology(name)
        profits[name] = gap
        residuals[name] = complementarity_residual(state.capacities[name], t.cap_max, gap)
    found.sort(key=lambda f: f[0].capacity)
    return EquilibriumResult(
        capacities=dict(state.capacities), profits=profits, contract=contract, profile=profile,
        state=state, residuals=residuals, grid_trace=trace, crossings=[f[0] for f in found],
        selected=crossing.kind, flags=flags,
    )


def sweep_risk_aversion(config: SystemConfig, contract: Optional[Contract], deltas: Sequence[float],
                        grid: GridSpec | None = None, model: Optional[ProfitModel] = None,
                        target: Optional[float] = None) -> list[EquilibriumResult]:
    model = model or ProfitModel(config, grid or GridSpec())
    base = config.investor()
    out = []
    for d in deltas:
        if not 0 <= d <= 1:
            raise ValueError(f"delta {d} outside [0, 1]")
        out.append(find_equilibrium(config, contract, replace(base, delta=float(d)), model=model, target=target))
    return out
