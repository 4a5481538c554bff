"""Small synthetic systems shared by the equilibrium and calibration tests."""

from __future__ import annotations

from ldes_contracts.config import (DemandModel, InvestorProfile, Scenario, SystemConfig, Technology, TimeGrid,
                                   validate)
from ldes_contracts.equilibrium import GridSpec

YEAR = 8760.0
# the storage bound is 40 MW, so the default 10 MW tolerance would exceed a grid step
SMALL_GRID = GridSpec(points=21, capacity_tol=0.05)


def three_scenario_system(store_cost: float = 60_000.0, store_cap: float = 40.0) -> SystemConfig:
    """Fixed baseload, an investable peaker and investable 2-hour storage
    under three demand and fuel-price scenarios."""
    techs = (
        Technology("base", "thermal", invest_cost_annualized=0.0, var_cost=5.0, cap_max=90.0,
                   fuel_indexed=True, cap_fixed=90.0),
        Technology("peak", "thermal", invest_cost_annualized=40_000.0, var_cost=150.0, cap_max=100.0),
        Technology("store", "storage", invest_cost_annualized=store_cost, var_cost=1.0, cap_max=store_cap,
                   storage_duration=2.0, round_trip_efficiency=0.8),
    )
    cases = [(20.0, (50, 70, 95, 110)), (40.0, (55, 75, 100, 115)), (60.0, (45, 65, 90, 120))]
    scenarios = tuple(Scenario(f"s{i + 1}", 1 / 3, tuple(float(x) for x in dem), {}, gas)
                      for i, (gas, dem) in enumerate(cases))
    return validate(SystemConfig(
        technologies=techs,
        scenarios=scenarios,
        time_grid=TimeGrid((YEAR / 4,) * 4),
        demand=DemandModel(price_cap=20_000.0, flexible_mw=10.0, flexible_bid=500.0),
        investors={"store": InvestorProfile(delta=1.0, psi=0.2, risk_free_rate=0.071)},
        contract_technology="store",
        name="three-scenario",
    ))


def two_block_system(costs, fixed, durations_h, loads_mw, voll: float = 20_000.0) -> SystemConfig:
    """Base and peak thermal plant facing a two-level load duration curve."""
    techs = (
        Technology("base", "thermal", invest_cost_annualized=fixed[0], var_cost=costs[0], cap_max=1_000.0),
        Technology("peak", "thermal", invest_cost_annualized=fixed[1], var_cost=costs[1], cap_max=1_000.0),
    )
    return validate(SystemConfig(
        technologies=techs,
        scenarios=(Scenario("s1", 1.0, tuple(float(x) for x in loads_mw)),),
        time_grid=TimeGrid(tuple(float(h) for h in durations_h)),
        demand=DemandModel(price_cap=voll, flexible_mw=0.0, flexible_bid=voll / 2),
        investors={"peak": InvestorProfile()},
        contract_technology="peak",
        name="two-block",
    ))


def single_peaker(fixed_cost: float, demand: float = 100.0, var_cost: float = 10.0,
                  voll: float = 20_000.0) -> SystemConfig:
    tech = Technology("peaker", "thermal", invest_cost_annualized=fixed_cost, var_cost=var_cost, cap_max=1_000.0)
    return validate(SystemConfig(
        technologies=(tech,),
        scenarios=(Scenario("s1", 1.0, (demand,)),),
        time_grid=TimeGrid((YEAR,)),
        demand=DemandModel(price_cap=voll, flexible_mw=0.0, flexible_bid=voll / 2),
        investors={"peaker": InvestorProfile()},
        contract_technology="peaker",
        name="single-peaker",
    ))
