"""Small dispatch instances (at most 3 steps and 2 supply resources).

They are small enough for exhaustive checks and double as worked examples.
The 2-step storage instance keeps 1-hour weights, so it is built without
the full-year weight check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .config import DemandModel, InvestorProfile, Scenario, SystemConfig, Technology, TimeGrid, validate

PRICE_CAP = 20_000.0


@dataclass(frozen=True)
class MicroInstance:
    name: str
    config: SystemConfig
    capacities: Mapping[str, float]
    prices: tuple[float, ...] | None = None  # expected prices where they are unique
    notes: str = ""

    @property
    def scenario(self) -> Scenario:
        return self.config.scenarios[0]


def single_scenario_system(name: str, techs, demand, weights, vre=None, flexible_mw=0.0,
                           flexible_bid=2_000.0, check=True) -> SystemConfig:
    """One-scenario system; the last technology is the contract technology."""
    techs = tuple(techs)
    config = SystemConfig(
        technologies=techs,
        scenarios=(Scenario("s1", 1.0, tuple(float(x) for x in demand),
                            {k: tuple(v) for k, v in (vre or {}).items()}),),
        time_grid=TimeGrid(tuple(float(w) for w in weights)),
        demand=DemandModel(price_cap=PRICE_CAP, flexible_mw=flexible_mw, flexible_bid=flexible_bid),
        investors={techs[-1].name: InvestorProfile()},
        contract_technology=techs[-1].name,
        name=name,
    )
    return validate(config) if check else config


def thermal(name, cost, cap):
    return Technology(name, "thermal", invest_cost_annualized=0.0, var_cost=cost, cap_max=cap)


def micro_instances() -> dict[str, MicroInstance]:
    year = 8760.0
    out = [
        MicroInstance(
            "thermal-interior",
            single_scenario_system("thermal-interior", [thermal("gen", 10.0, 100.0)], [80.0], [year]),
            {"gen": 100.0}, prices=(10.0,),
        ),
        MicroInstance(
            "thermal-scarcity",
            single_scenario_system("thermal-scarcity", [thermal("gen", 10.0, 100.0)], [120.0], [year]),
            {"gen": 100.0}, prices=(PRICE_CAP,),
        ),
        MicroInstance(
            "merit-order",
            single_scenario_system("merit-order", [thermal("base", 10.0, 50.0), thermal("peak", 30.0, 50.0)],
                    [40.0, 80.0, 120.0], [year / 3] * 3),
            {"base": 50.0, "peak": 50.0}, prices=(10.0, 30.0, PRICE_CAP),
        ),
        MicroInstance(
            "flexible-tier",
            single_scenario_system("flexible-tier", [thermal("gen", 10.0, 50.0)], [40.0, 45.0], [year / 2] * 2,
                    flexible_mw=20.0, flexible_bid=500.0),
            {"gen": 50.0}, prices=(500.0, 500.0),
        ),
        MicroInstance(
            "wind-thermal",
            single_scenario_system("wind-thermal",
                    [Technology("wind", "renewable", invest_cost_annualized=0.0, var_cost=0.0, cap_max=60.0),
                     thermal("gen", 20.0, 40.0)],
                    [30.0, 60.0, 52.0], [year / 3] * 3, vre={"wind": (1.0, 0.5, 0.25)},
                    flexible_mw=5.0, flexible_bid=300.0),
            {"wind": 60.0, "gen": 40.0}, prices=(0.0, 20.0, 300.0),
        ),
        MicroInstance(
            "storage-arbitrage",
            single_scenario_system("storage-arbitrage",
                    [thermal("gen", 10.0, 100.0),
                     Technology("store", "storage", invest_cost_annualized=0.0, var_cost=0.0, cap_max=1.0,
                                storage_duration=1.0, round_trip_efficiency=0.8)],
                    [50.0, 105.0], [1.0, 1.0], check=False),
            {"gen": 100.0, "store": 1.0}, prices=(10.0, PRICE_CAP),
            notes="1-hour weights; charge 1 MWh then discharge 0.8 MWh",
        ),
        MicroInstance(
            "storage-peak-shift",
            single_scenario_system("storage-peak-shift",
                    [thermal("gen", 10.0, 100.0),
                     Technology("store", "storage", invest_cost_annualized=0.0, var_cost=0.0, cap_max=1.5,
                                storage_duration=2.0, round_trip_efficiency=0.8)],
                    [60.0, 100.0, 101.0], [year / 3] * 3),
            {"gen": 100.0, "store": 1.5},
        ),
    ]
    return {m.name: m for m in out}
