"""Risk measures and financing metrics over discrete scenario cashflows."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .config import InvestorProfile, Technology

IRR_BRACKET = (-0.99, 10.0)
IRR_TOL = 1e-9


@dataclass(frozen=True)
class CashflowDistribution:
    values: tuple[float, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValueError("empty distribution")
        if len(self.values) != len(self.probabilities):
            raise ValueError("values and probabilities differ in length")
        if abs(math.fsum(self.probabilities) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {math.fsum(self.probabilities)}")
        if any(p < 0 for p in self.probabilities):
            raise ValueError("negative probability")

    @classmethod
    def of(cls, values: Sequence[float], probabilities: Sequence[float] | None = None) -> "CashflowDistribution":
        values = tuple(float(v) for v in values)
        if probabilities is None:
            probabilities = (1.0 / len(values),) * len(values) if values else ()
        return cls(values, tuple(float(p) for p in probabilities))

    @property
    def mean(self) -> float:
        return float(np.dot(self.values, self.probabilities))

    def map(self, fn) -> "CashflowDistribution":
        return CashflowDistribution(tuple(float(fn(v)) for v in self.values), self.probabilities)


def cvar(dist: CashflowDistribution, psi: float) -> float:
    """Expected value over the worst ``psi`` probability mass.

    The boundary scenario contributes the fraction of its probability that
    is needed to fill the tail exactly.
    """
    if not 0 < psi <= 1:
        raise ValueError("psi must lie in (0, 1]")
    values = np.asarray(dist.values)
    probs = np.asarray(dist.probabilities)
    order = np.argsort(values, kind="stable")
    remaining = psi
    total = 0.0
    for k in order:
        take = min(probs[k], remaining)
        total += take * values[k]
        remaining -= take
        if remaining <= 0:
            break
    # rounding in the probabilities can leave a sliver of the tail unfilled
    if remaining > 0:
        total += remaining * values[order[-1]]
    return float(total / psi)


def risk_adjusted_profit(dist: CashflowDistribution, profile: InvestorProfile) -> float:
    return (1 - profile.delta) * cvar(dist, profile.psi) + profile.delta * dist.mean


def annuity_factor(rate: float, lifetime: int) -> float:
    """Capital recovery factor: annual payment per unit of present value."""
    if lifetime < 1:
        raise ValueError("lifetime must be >= 1")
    if rate <= -1:
        raise ValueError("rate must exceed -1")
    if abs(rate) < 1e-12:
        return 1.0 / lifetime
    return rate / (1.0 - (1.0 + rate) ** (-lifetime))


def implied_capital(tech: Technology, risk_free: float) -> float:
    """Upfront cost per MW whose annuity at ``risk_free`` is the annualised fixed cost."""
    return tech.annualized_fixed_cost / annuity_factor(risk_free, tech.lifetime_years)


class IrrResult(NamedTuple):
    rate: float
    finite: bool


def scenario_irr(annual_revenue: float, tech: Technology, risk_free: float) -> IrrResult:
    """Rate at which a level annual revenue over the lifetime repays the
    implied capital. Non-positive or out-of-bracket revenues return the
    nearest bracket end with ``finite=False``."""
    lo, hi = IRR_BRACKET
    K = implied_capital(tech, risk_free)
    L = tech.lifetime_years
    if annual_revenue <= 0 or K <= 0:
        return IrrResult(lo, False)
    f = lambda r: K * annuity_factor(r, L) - annual_revenue
    if f(lo) > 0:
        return IrrResult(lo, False)
    if f(hi) < 0:
        return IrrResult(hi, False)
    return IrrResult(float(brentq(f, lo, hi, xtol=IRR_TOL, rtol=4 * np.finfo(float).eps)), True)


def implied_wacc(dist: CashflowDistribution, tech: Technology, risk_free: float) -> IrrResult:
    return scenario_irr(dist.mean, tech, risk_free)


@dataclass(frozen=True)
class RevenueStats:
    cv: float
    min_irr: float
    cvar_irr: float
    cv_defined: bool = True


def revenue_stats(revenues: CashflowDistribution, irrs: Sequence[float], psi: float = 0.2) -> RevenueStats:
    """Coefficient of variation of revenues plus the minimum and CVaR of the
    matching scenario IRRs."""
    if len(irrs) != len(revenues.values):
        raise ValueError("one IRR per revenue scenario required")
    probs = np.asarray(revenues.probabilities)
    vals = np.asarray(revenues.values)
    mean = float(probs @ vals)
    std = float(np.sqrt(probs @ (vals - mean) ** 2))
    if mean == 0:
        cv, defined = float("nan"), False
    else:
        cv, defined = std / abs(mean), True
    irr_dist = CashflowDistribution(tuple(float(r) for r in irrs), revenues.probabilities)
    return RevenueStats(cv=cv, min_irr=float(min(irrs)), cvar_irr=cvar(irr_dist, psi), cv_defined=defined)
