"""Seeded synthetic weather/demand profiles and the stylised GB 2035 system.

Weather inputs behind the GB case are not public, so profiles are built from
seasonal and diurnal base shapes with autocorrelated noise and rescaled to
typical GB mean capacity factors. Cost figures marked ``assumed`` below are
desk-scale placeholders, not published values.
"""

from __future__ import annotations

import math

import numpy as np

from .config import (DemandModel, InvestorProfile, Scenario, SystemConfig, Technology,
                     TimeGrid, validate)

GAS_PRICES = (78.0, 150.0, 220.0)
PEAK_DEMAND_MW = 65_000.0
MEAN_CF = {"solar": 0.11, "onshore": 0.30, "offshore": 0.45}


def gb_technologies() -> tuple[Technology, ...]:
    return (
        # fixed fleet
        Technology("ccgt", "thermal", invest_cost_annualized=0.0, var_cost=4.0, fuel_indexed=True,
                   heat_rate=1.8, cap_max=35_000.0, cap_fixed=35_000.0),
        Technology("nuclear", "nuclear-fixed", invest_cost_annualized=0.0, var_cost=10.0,
                   cap_max=5_000.0, cap_fixed=5_000.0),
        # investable; annualised costs and storage variable O&M assumed
        Technology("solar", "renewable", invest_cost_annualized=90_000.0, var_cost=0.0, cap_max=150_000.0,
                   lifetime_years=30),
        Technology("onshore", "renewable", invest_cost_annualized=130_000.0, var_cost=0.0,
                   cap_max=30_000.0, lifetime_years=30),
        Technology("offshore", "renewable", invest_cost_annualized=300_000.0, var_cost=0.0,
                   cap_max=150_000.0, lifetime_years=30),
        Technology("battery", "storage", invest_cost_annualized=70_000.0, var_cost=1.0, cap_max=40_000.0,
                   storage_duration=2.0, round_trip_efficiency=0.85, lifetime_years=15),
        Technology("ldes", "storage", invest_cost_annualized=130_000.0, var_cost=1.0, cap_max=30_000.0,
                   storage_duration=12.0, round_trip_efficiency=0.64, lifetime_years=40),
    )


def _ar1(rng: np.random.Generator, n: int, rho: float) -> np.ndarray:
    eps = rng.standard_normal(n)
    out = np.empty(n)
    out[0] = eps[0]
    scale = math.sqrt(1 - rho * rho)
    for k in range(1, n):
        out[k] = rho * out[k - 1] + scale * eps[k]
    return out


def _rescale_mean(x: np.ndarray, target: float) -> np.ndarray:
    # multiplicative rescale with clipping; a few passes converge for targets well below 1
    y = np.clip(x, 0.0, None)
    for _ in range(50):
        m = y.mean()
        if m <= 0 or abs(m - target) < 1e-9:
            break
        y = np.clip(y * target / m, 0.0, 1.0)
    return y


def synthetic_profiles(n_weather: int, steps: int, seed: int) -> list[dict[str, np.ndarray]]:
    """One dict of hourly profiles (demand in relative units, capacity
    factors in [0, 1]) per weather draw, for ``steps`` representative hours
    taken from days spread evenly across the year."""
    rng = np.random.default_rng(seed)
    n_days = math.ceil(steps / 24)
    k = np.arange(steps)
    hour = k % 24
    doy = ((k // 24) + 0.5) * 365.0 / n_days
    season = np.cos(2 * np.pi * (doy - 15) / 365.0)  # +1 mid-January
    diurnal_demand = 0.85 + 0.1 * np.sin(np.pi * (hour - 6) / 12).clip(0) + 0.1 * np.exp(-((hour - 18) ** 2) / 4)
    sun = np.sin(np.pi * (hour - 6) / 12).clip(0) ** 1.3
    draws = []
    for _ in range(n_weather):
        cold = _ar1(rng, steps, 0.97)
        wind_latent = _ar1(rng, steps, 0.95) + 0.6 * _ar1(rng, steps, 0.995)
        offshore_latent = 0.7 * wind_latent + 0.5 * _ar1(rng, steps, 0.95)
        cloud = _ar1(rng, steps, 0.9)
        level = rng.normal(0.0, 0.25)  # draw-wide windiness anomaly
        demand = (1.0 + 0.18 * season + 0.03 * cold) * diurnal_demand
        solar = sun * (1.0 - 0.55 * season) * np.clip(0.75 + 0.2 * cloud, 0.1, 1.0)
        onshore = 1 / (1 + np.exp(-(wind_latent + 0.4 * season + level - 0.6) * 1.6))
        offshore = 1 / (1 + np.exp(-(offshore_latent + 0.3 * season + level) * 1.6))
        draws.append({"demand": demand, "solar": solar, "onshore": onshore, "offshore": offshore})

    peak = max(d["demand"].max() for d in draws)
    for name, target in MEAN_CF.items():
        stacked = _rescale_mean(np.concatenate([d[name] for d in draws]), target)
        for i, d in enumerate(draws):
            d[name] = stacked[i * steps:(i + 1) * steps]
    for d in draws:
        d["demand"] = d["demand"] / peak * PEAK_DEMAND_MW
    return draws


def default_gb_config(n_weather: int = 20, steps: int = 1440, seed: int = 1) -> SystemConfig:
    """Stylised GB 2035 system: every weather draw crossed with the three gas
    price levels, all scenarios equiprobable."""
    if n_weather < 1 or steps < 2:
        raise ValueError("need n_weather >= 1 and steps >= 2")
    draws = synthetic_profiles(n_weather, steps, seed)
    prob = 1.0 / (n_weather * len(GAS_PRICES))
    scenarios = []
    for w, d in enumerate(draws):
        for gas in GAS_PRICES:
            scenarios.append(Scenario(
                id=f"w{w + 1:02d}-g{int(gas):03d}",
                probability=prob,
                gas_price=gas,
                demand_profile=tuple(round(float(x), 3) for x in d["demand"]),
                vre_profiles={n: tuple(round(float(x), 6) for x in d[n]) for n in MEAN_CF},
            ))
    config = SystemConfig(
        technologies=gb_technologies(),
        scenarios=tuple(scenarios),
        time_grid=TimeGrid.uniform(steps),
        demand=DemandModel(price_cap=20_000.0, flexible_mw=2_000.0, flexible_bid=2_000.0),
        investors={"ldes": InvestorProfile(delta=1.0, psi=0.2, risk_free_rate=0.071)},
        contract_technology="ldes",
        name=f"gb2035-synthetic-{n_weather}x{steps}",
        seed=seed,
    )
    return validate(config)


def desk_config(seed: int = 1) -> SystemConfig:
    """The 6-scenario x 48-step instance used for desk-scale studies."""
    return default_gb_config(n_weather=2, steps=48, seed=seed)
