"""Contract payoff designs for the contracted storage technology.

Payoffs are per MW installed per year and may be positive (paid to the
asset) or negative (clawed back). Contracts cover the full installed
capacity and carry no premium.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Union

from .config import Technology
from .risk import CashflowDistribution, annuity_factor

RATE_BASES = ("cost_of_capital", "fraction")


@dataclass(frozen=True)
class CapFloor:
    """Collar on annual net revenue.

    With ``basis="cost_of_capital"`` the rates are discount rates: each level
    is the annuity at that rate of the capital implied by the annualised
    fixed cost at ``risk_free_rate``. With ``basis="fraction"`` they are
    plain fractions of the annualised fixed cost.
    """

    floor_rate: float
    cap_rate: float = 0.14
    basis: str = "cost_of_capital"
    risk_free_rate: float = 0.071

    key = "cf"
    parameter = "floor_rate"

    def __post_init__(self):
        if self.basis not in RATE_BASES:
            raise ValueError(f"basis must be one of {RATE_BASES}")
        if self.floor_rate < 0 or self.cap_rate < 0:
            raise ValueError("rates must be >= 0")
        if self.floor_rate > self.cap_rate:
            raise ValueError("floor_rate must not exceed cap_rate")

    def level(self, rate: float, tech: Technology) -> float:
        F = tech.annualized_fixed_cost
        if self.basis == "fraction":
            return rate * F
        L = tech.lifetime_years
        return F * annuity_factor(rate, L) / annuity_factor(self.risk_free_rate, L)

    def levels(self, tech: Technology) -> tuple[float, float]:
        return self.level(self.floor_rate, tech), self.level(self.cap_rate, tech)


@dataclass(frozen=True)
class RevenueCfD:
    strike_rate: float  # fraction of annualised fixed cost

    key = "rcfd"
    parameter = "strike_rate"

    def __post_init__(self):
        if self.strike_rate < 0:
            raise ValueError("strike_rate must be >= 0")


@dataclass(frozen=True)
class SpreadCfD:
    strike_spread: float  # $/MWh

    key = "scfd"
    parameter = "strike_spread"

    def __post_init__(self):
        if self.strike_spread < 0:
            raise ValueError("strike_spread must be >= 0")


@dataclass(frozen=True)
class Availability:
    payment_rate: float  # fraction of annualised fixed cost at full availability

    key = "avc"
    parameter = "payment_rate"

    def __post_init__(self):
        if self.payment_rate < 0:
            raise ValueError("payment_rate must be >= 0")


Contract = Union[CapFloor, RevenueCfD, SpreadCfD, Availability]
FAMILIES: dict[str, type] = {"cf": CapFloor, "rcfd": RevenueCfD, "scfd": SpreadCfD, "avc": Availability}
LABELS = {"avc": "AvC", "cf": "C&F", "rcfd": "R-CfD", "scfd": "S-CfD"}
_ALIASES = {"cap_floor": "cf", "capfloor": "cf", "c&f": "cf", "revenue_cfd": "rcfd", "r-cfd": "rcfd",
            "spread_cfd": "scfd", "s-cfd": "scfd", "availability": "avc"}


def family_key(name: str) -> str:
    key = name.lower()
    key = _ALIASES.get(key, key)
    if key not in FAMILIES:
        raise ValueError(f"unknown mechanism {name!r}; expected one of {sorted(FAMILIES)}")
    return key


@dataclass(frozen=True)
class ScenarioExposure:
    net_revenue: float  # $/MW-yr
    sigma: float = 0.0  # $/MWh
    v: float = 0.0  # MWh/MW
    tau: float = 0.0  # fraction

    def __post_init__(self):
        if self.v < 0:
            raise ValueError("v must be >= 0")
        if not 0 <= self.tau <= 1:
            raise ValueError("tau must lie in [0, 1]")

    @property
    def spread_revenue(self) -> float:
        return self.sigma * self.v

    def blend(self, other: "ScenarioExposure", theta: float) -> "ScenarioExposure":
        """Convex combination of the additive quantities behind two exposures."""
        a = 1.0 - theta
        v = a * self.v + theta * other.v
        spread = a * self.spread_revenue + theta * other.spread_revenue
        return ScenarioExposure(
            net_revenue=a * self.net_revenue + theta * other.net_revenue,
            sigma=spread / v if v > 0 else 0.0,
            v=v,
            tau=min(max(a * self.tau + theta * other.tau, 0.0), 1.0),
        )


def payoff(contract: Contract, exposure: ScenarioExposure, tech: Technology) -> float:
    """Contract payment per MW-yr for one scenario."""
    pi = exposure.net_revenue
    if isinstance(contract, CapFloor):
        floor, cap = contract.levels(tech)
        return max(floor - pi, 0.0) - max(pi - cap, 0.0)
    if isinstance(contract, RevenueCfD):
        return contract.strike_rate * tech.annualized_fixed_cost - pi
    if isinstance(contract, SpreadCfD):
        return (contract.strike_spread - exposure.sigma) * exposure.v
    if isinstance(contract, Availability):
        return exposure.tau * contract.payment_rate * tech.annualized_fixed_cost
    raise TypeError(f"unsupported contract {contract!r}")


def template_contract(family: str, cap_rate: float = 0.14, risk_free_rate: float = 0.071,
                      basis: str = "cost_of_capital") -> Contract:
    """Contract of ``family`` with its free parameter at the bottom of its range
    (strike 100% of F for the revenue CfD)."""
    key = family_key(family)
    if key == "cf":
        return CapFloor(0.0, cap_rate, basis=basis, risk_free_rate=risk_free_rate)
    if key == "rcfd":
        return RevenueCfD(1.0)
    if key == "scfd":
        return SpreadCfD(0.0)
    return Availability(0.0)


def parameter_value(contract: Contract) -> float:
    return getattr(contract, contract.parameter)


def with_parameter(contract: Contract, value: float) -> Contract:
    return replace(contract, **{contract.parameter: value})


def contract_from_dict(raw: Mapping) -> Contract:
    raw = dict(raw)
    key = family_key(str(raw.pop("type")))
    cls = FAMILIES[key]
    return cls(**raw)


def contract_to_dict(contract: Contract) -> dict:
    out = {"type": contract.key}
    out.update(contract.__dict__)
    return out


@dataclass(frozen=True)
class MechanismCost:
    per_mw_installed: float  # fraction of annualised fixed cost
    per_mw_incentivized: float
    incentivized_defined: bool = True


def expected_mechanism_cost(payoffs: CashflowDistribution, capacity: float, baseline_capacity: float,
                            tech: Technology) -> MechanismCost:
    F = tech.annualized_fixed_cost
    installed = payoffs.mean / F
    if capacity <= baseline_capacity:
        return MechanismCost(installed, float("nan"), False)
    return MechanismCost(installed, payoffs.mean * capacity / ((capacity - baseline_capacity) * F))
