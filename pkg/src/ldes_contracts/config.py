"""System data model, configuration file I/O and validation.

A configuration is a TOML file (system, time grid, demand, technology,
scenario and investor blocks) plus a CSV table of scenario profiles with
header ``scenario_id,step,demand_mw,cf_<tech>...``. Currency is $/MWh for
energy prices and $/MW-yr for annualised costs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional

import tomli
import tomli_w

HOURS_PER_YEAR = 8760.0
KINDS = ("thermal", "renewable", "storage", "nuclear-fixed")


class ConfigError(ValueError):
    """Malformed or invalid configuration; ``field`` names the offending path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class Technology:
    name: str
    kind: str
    invest_cost_annualized: float
    var_cost: float
    cap_max: float
    fuel_indexed: bool = False
    heat_rate: float = 1.0
    cap_fixed: Optional[float] = None
    storage_duration: Optional[float] = None
    round_trip_efficiency: float = 1.0
    lifetime_years: int = 40
    fixed_om: float = 0.0

    @property
    def is_storage(self) -> bool:
        return self.kind == "storage"

    @property
    def is_renewable(self) -> bool:
        return self.kind == "renewable"

    @property
    def annualized_fixed_cost(self) -> float:
        """F: annualised investment cost plus fixed O&M, in $/MW-yr."""
        return self.invest_cost_annualized + self.fixed_om

    def marginal_cost(self, gas_price: float) -> float:
        if self.fuel_indexed:
            return self.var_cost + self.heat_rate * gas_price
        return self.var_cost


@dataclass(frozen=True)
class Scenario:
    id: str
    probability: float
    demand_profile: tuple[float, ...]
    vre_profiles: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    gas_price: float = 0.0


@dataclass(frozen=True)
class TimeGrid:
    weights: tuple[float, ...]
    step_hours: float = 1.0

    @property
    def steps(self) -> int:
        return len(self.weights)

    @classmethod
    def uniform(cls, steps: int, step_hours: float = 1.0) -> "TimeGrid":
        return cls(weights=(HOURS_PER_YEAR / steps,) * steps, step_hours=step_hours)


@dataclass(frozen=True)
class DemandModel:
    price_cap: float = 20_000.0
    flexible_mw: float = 2_000.0
    flexible_bid: float = 2_000.0


@dataclass(frozen=True)
class InvestorProfile:
    delta: float = 1.0
    psi: float = 0.2
    risk_free_rate: float = 0.071


@dataclass(frozen=True)
class SystemConfig:
    technologies: tuple[Technology, ...]
    scenarios: tuple[Scenario, ...]
    time_grid: TimeGrid
    demand: DemandModel
    investors: Mapping[str, InvestorProfile]
    contract_technology: str
    name: str = "system"
    # None keeps the storage state cyclic with a free starting level
    initial_soc_fraction: Optional[float] = None
    contracts: Mapping[str, Mapping] = field(default_factory=dict)
    seed: Optional[int] = None

    def technology(self, name: str) -> Technology:
        for tech in self.technologies:
            if tech.name == name:
                return tech
        raise KeyError(name)

    @property
    def tech_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.technologies)

    @property
    def contract_tech(self) -> Technology:
        return self.technology(self.contract_technology)

    @property
    def probabilities(self) -> tuple[float, ...]:
        return tuple(s.probability for s in self.scenarios)

    def investor(self, name: Optional[str] = None) -> InvestorProfile:
        return self.investors.get(name or self.contract_technology, InvestorProfile())

    def with_investor(self, profile: InvestorProfile, name: Optional[str] = None) -> "SystemConfig":
        investors = dict(self.investors)
        investors[name or self.contract_technology] = profile
        return replace(self, investors=investors)


def validate(config: SystemConfig) -> SystemConfig:
    techs = config.technologies
    names = [t.name for t in techs]
    if len(set(names)) != len(names):
        raise ConfigError("technology.name", "duplicate technology names")
    for i, t in enumerate(techs):
        path = f"technology[{i}]"
        if t.kind not in KINDS:
            raise ConfigError(f"{path}.kind", f"unknown kind {t.kind!r}")
        if t.invest_cost_annualized < 0:
            raise ConfigError(f"{path}.invest_cost_annualized", "must be >= 0")
        if t.var_cost < 0:
            raise ConfigError(f"{path}.var_cost", "must be >= 0")
        if t.fixed_om < 0:
            raise ConfigError(f"{path}.fixed_om", "must be >= 0")
        if not 0 < t.round_trip_efficiency <= 1:
            raise ConfigError(f"{path}.round_trip_efficiency", "must lie in (0, 1]")
        if t.cap_max < 0:
            raise ConfigError(f"{path}.cap_max", "must be >= 0")
        if t.cap_fixed is not None and not 0 <= t.cap_fixed <= t.cap_max:
            raise ConfigError(f"{path}.cap_fixed", "must lie in [0, cap_max]")
        if t.is_storage:
            if t.storage_duration is None or t.storage_duration <= 0:
                raise ConfigError(f"{path}.storage_duration", "storage needs a positive duration")
        elif t.storage_duration is not None:
            raise ConfigError(f"{path}.storage_duration", "only storage has a duration")
        if t.lifetime_years < 1:
            raise ConfigError(f"{path}.lifetime_years", "must be >= 1")

    grid = config.time_grid
    if grid.steps < 1:
        raise ConfigError("time_grid.weights", "empty time grid")
    if any(w <= 0 for w in grid.weights):
        raise ConfigError("time_grid.weights", "weights must be positive")
    if abs(sum(grid.weights) - HOURS_PER_YEAR) > 1e-6:
        raise ConfigError("time_grid.weights", f"weights sum to {sum(grid.weights)}, expected 8760")
    if grid.step_hours <= 0:
        raise ConfigError("time_grid.step_hours", "must be positive")

    d = config.demand
    if not 0 < d.flexible_bid < d.price_cap:
        raise ConfigError("demand.flexible_bid", "must lie strictly between 0 and price_cap")
    if d.flexible_mw < 0:
        raise ConfigError("demand.flexible_mw", "must be >= 0")

    if not config.scenarios:
        raise ConfigError("scenarios", "empty scenario set")
    ids = [s.id for s in config.scenarios]
    if len(set(ids)) != len(ids):
        raise ConfigError("scenarios.id", "duplicate scenario ids")
    total = math.fsum(s.probability for s in config.scenarios)
    if abs(total - 1.0) > 1e-9 or any(s.probability < 0 for s in config.scenarios):
        raise ConfigError("scenarios.probability", f"probabilities sum to {total}, expected 1")
    vre = [t.name for t in techs if t.is_renewable]
    for s in config.scenarios:
        path = f"scenarios[{s.id}]"
        if len(s.demand_profile) != grid.steps:
            raise ConfigError(f"{path}.demand_profile", "length differs from the time grid")
        if any(x < 0 for x in s.demand_profile):
            raise ConfigError(f"{path}.demand_profile", "negative demand")
        if s.gas_price < 0:
            raise ConfigError(f"{path}.gas_price", "must be >= 0")
        for name in vre:
            if name not in s.vre_profiles:
                raise ConfigError(f"{path}.vre_profiles", f"missing profile for {name}")
        for name, prof in s.vre_profiles.items():
            if name not in vre:
                raise ConfigError(f"{path}.vre_profiles", f"{name} is not a renewable technology")
            if len(prof) != grid.steps:
                raise ConfigError(f"{path}.vre_profiles.{name}", "length differs from the time grid")
            if any(not 0.0 <= x <= 1.0 for x in prof):
                raise ConfigError(f"{path}.vre_profiles.{name}", "capacity factors must lie in [0, 1]")

    if config.contract_technology not in names:
        raise ConfigError("system.contract_technology", f"unknown technology {config.contract_technology!r}")
    for name, inv in config.investors.items():
        if name not in names:
            raise ConfigError(f"investor.{name}", "unknown technology")
        if not 0 <= inv.delta <= 1:
            raise ConfigError(f"investor.{name}.delta", "must lie in [0, 1]")
        if not 0 < inv.psi <= 1:
            raise ConfigError(f"investor.{name}.psi", "must lie in (0, 1]")
    if config.initial_soc_fraction is not None and not 0 <= config.initial_soc_fraction <= 1:
        raise ConfigError("system.initial_soc_fraction", "must lie in [0, 1]")
    return config


_TECH_FLOATS = ("invest_cost_annualized", "var_cost", "cap_max", "heat_rate",
                "round_trip_efficiency", "fixed_om")


def _technology(i: int, raw: dict) -> Technology:
    raw = dict(raw)
    try:
        for key in _TECH_FLOATS:
            if key in raw:
                raw[key] = float(raw[key])
        for key in ("cap_fixed", "storage_duration"):
            if raw.get(key) is not None:
                raw[key] = float(raw[key])
        if "lifetime_years" in raw:
            raw["lifetime_years"] = int(raw["lifetime_years"])
        return Technology(**raw)
    except TypeError as exc:
        raise ConfigError(f"technology[{i}]", str(exc)) from exc


def _read_profiles(path: Path, steps: int) -> dict[str, dict[str, list]]:
    profiles: dict[str, dict[str, list]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if header[:3] != ["scenario_id", "step", "demand_mw"]:
            raise ConfigError("profiles", "header must start with scenario_id,step,demand_mw")
        cf_cols = [h for h in header[3:] if h.startswith("cf_")]
        for row in reader:
            sid = row["scenario_id"]
            entry = profiles.setdefault(sid, {"demand": [None] * steps,
                                              **{c[3:]: [None] * steps for c in cf_cols}})
            step = int(row["step"])
            if not 0 <= step < steps:
                raise ConfigError("profiles.step", f"step {step} outside the time grid")
            entry["demand"][step] = float(row["demand_mw"])
            for c in cf_cols:
                entry[c[3:]][step] = float(row[c])
    for sid, entry in profiles.items():
        for key, values in entry.items():
            if any(v is None for v in values):
                raise ConfigError(f"profiles[{sid}].{key}", "missing steps")
    return profiles


def load_config(path: str | Path) -> SystemConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError("file", f"parse failure: {exc}") from exc
    try:
        system = raw["system"]
        grid_raw = raw["time_grid"]
    except KeyError as exc:
        raise ConfigError(str(exc.args[0]), "missing block") from exc

    weights = grid_raw.get("weights")
    if isinstance(weights, (int, float)):
        weights = [float(weights)] * int(grid_raw["steps"])
    grid = TimeGrid(weights=tuple(float(w) for w in weights),
                    step_hours=float(grid_raw.get("step_hours", 1.0)))
    demand = DemandModel(**{k: float(v) for k, v in raw.get("demand", {}).items()})
    techs = tuple(_technology(i, t) for i, t in enumerate(raw.get("technology", [])))

    profiles_path = path.parent / system.get("profiles", path.stem + "_profiles.csv")
    profiles = _read_profiles(profiles_path, grid.steps) if profiles_path.exists() else {}
    vre = [t.name for t in techs if t.is_renewable]
    scenarios = []
    for i, s in enumerate(raw.get("scenario", [])):
        sid = str(s["id"])
        if sid not in profiles:
            raise ConfigError(f"scenarios[{sid}]", "no profile rows")
        prof = profiles[sid]
        scenarios.append(Scenario(
            id=sid,
            probability=float(s["probability"]),
            gas_price=float(s.get("gas_price", 0.0)),
            demand_profile=tuple(prof["demand"]),
            vre_profiles={n: tuple(prof[n]) for n in vre if n in prof},
        ))
    investors = {name: InvestorProfile(**{k: float(v) for k, v in inv.items()})
                 for name, inv in raw.get("investor", {}).items()}
    config = SystemConfig(
        technologies=techs,
        scenarios=tuple(scenarios),
        time_grid=grid,
        demand=demand,
        investors=investors,
        contract_technology=system.get("contract_technology", ""),
        name=system.get("name", path.stem),
        initial_soc_fraction=system.get("initial_soc_fraction"),
        contracts=raw.get("contract", {}),
        seed=system.get("seed"),
    )
    return validate(config)


def config_to_dict(config: SystemConfig, profiles_name: str) -> dict:
    system = {"name": config.name, "contract_technology": config.contract_technology,
              "profiles": profiles_name}
    if config.initial_soc_fraction is not None:
        system["initial_soc_fraction"] = config.initial_soc_fraction
    if config.seed is not None:
        system["seed"] = config.seed
    techs = []
    for t in config.technologies:
        entry = {k: v for k, v in t.__dict__.items() if v is not None}
        techs.append(entry)
    doc = {
        "system": system,
        "time_grid": {"step_hours": config.time_grid.step_hours,
                      "weights": list(config.time_grid.weights)},
        "demand": dict(config.demand.__dict__),
        "technology": techs,
        "scenario": [{"id": s.id, "probability": s.probability, "gas_price": s.gas_price}
                     for s in config.scenarios],
        "investor": {k: dict(v.__dict__) for k, v in config.investors.items()},
    }
    if config.contracts:
        doc["contract"] = {k: dict(v) for k, v in config.contracts.items()}
    return doc


def write_config(config: SystemConfig, path: str | Path) -> Path:
    """Write ``config`` as TOML next to a ``<stem>_profiles.csv`` table."""
    path = Path(path)
    profiles_name = path.stem + "_profiles.csv"
    path.write_text(tomli_w.dumps(config_to_dict(config, profiles_name)))
    vre = [t.name for t in config.technologies if t.is_renewable]
    with open(path.parent / profiles_name, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scenario_id", "step", "demand_mw"] + [f"cf_{n}" for n in vre])
        for s in config.scenarios:
            for t in range(config.time_grid.steps):
                writer.writerow([s.id, t, repr(s.demand_profile[t])]
                                + [repr(s.vre_profiles[n][t]) for n in vre])
    return path
