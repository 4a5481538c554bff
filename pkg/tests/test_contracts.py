import pytest
from hypothesis import given
from hypothesis import strategies as st

from ldes_contracts.config import Technology
from ldes_contracts.contracts import (Availability, CapFloor, RevenueCfD, ScenarioExposure, SpreadCfD,
                                      contract_from_dict, contract_to_dict, expected_mechanism_cost,
                                      family_key, payoff, template_contract)
from ldes_contracts.risk import CashflowDistribution, annuity_factor

F = 100.0
TECH = Technology("ldes", "storage", F, 0.0, 1.0, storage_duration=12.0)


def fraction_cf(floor, cap):
    return CapFloor(floor, cap, basis="fraction")


def exp(pi, sigma=0.0, v=0.0, tau=0.0):
    return ScenarioExposure(pi, sigma, v, tau)


exposures = st.builds(ScenarioExposure, st.floats(-1e6, 1e6), st.floats(-1e4, 1e5), st.floats(0, 1e4),
                      st.floats(0, 1))


def test_cap_and_floor_examples():
    c = fraction_cf(0.7, 1.4)
    assert payoff(c, exp(50), TECH) == pytest.approx(20)
    assert payoff(c, exp(150), TECH) == pytest.approx(-10)
    assert payoff(c, exp(100), TECH) == 0


def test_revenue_cfd_examples():
    c = RevenueCfD(1.0)
    assert payoff(c, exp(80), TECH) == pytest.approx(20)
    assert payoff(c, exp(130), TECH) == pytest.approx(-30)


def test_spread_cfd_example():
    assert payoff(SpreadCfD(463.7), exp(0, 400, 500), TECH) == pytest.approx(31_850)


def test_availability_example():
    tech = Technology("ldes", "storage", 130_000.0, 0.0, 1.0, storage_duration=12.0)
    assert payoff(Availability(0.311), exp(0, tau=0.9), tech) == pytest.approx(0.2799 * 130_000)


def test_cost_of_capital_levels():
    c = CapFloor(0.053, 0.14, risk_free_rate=0.071)
    tech = Technology("ldes", "storage", 130_000.0, 0.0, 1.0, storage_duration=12.0, lifetime_years=40)
    floor, cap = c.levels(tech)
    K = 130_000.0 / annuity_factor(0.071, 40)
    assert floor == pytest.approx(K * annuity_factor(0.053, 40))
    assert cap == pytest.approx(K * annuity_factor(0.14, 40))
    assert CapFloor(0.071, 0.14).levels(tech)[0] == pytest.approx(130_000.0)


@given(exposures, st.floats(0, 3))
def test_collar_with_equal_bounds_is_revenue_cfd(e, x):
    for basis in ("fraction", "cost_of_capital"):
        collar = CapFloor(x, x, basis=basis)
        strike = collar.levels(TECH)[0] / F
        assert payoff(collar, e, TECH) == pytest.approx(payoff(RevenueCfD(strike), e, TECH), abs=1e-12 * max(1, abs(e.net_revenue)))


@given(exposures, st.floats(0, 3))
def test_revenue_cfd_fixes_total(e, x):
    assert e.net_revenue + payoff(RevenueCfD(x), e, TECH) == pytest.approx(x * F, abs=1e-9 * max(1, abs(e.net_revenue)))


@given(st.floats(-1e5, 1e5), st.floats(-1e5, 1e5), st.floats(0, 2), st.floats(0, 2))
def test_payoff_monotone_in_revenue(a, b, f, c):
    lo, hi = sorted((a, b))
    f, c = sorted((f, c))
    for contract in (fraction_cf(f, c), RevenueCfD(c)):
        assert payoff(contract, exp(lo), TECH) >= payoff(contract, exp(hi), TECH)


@given(st.floats(0, 1e4), st.floats(0, 1e4), st.floats(0, 1e4), st.floats(0, 500))
def test_spread_payoff_monotone(s1, s2, v, strike):
    lo, hi = sorted((s1, s2))
    assert payoff(SpreadCfD(strike), exp(0, lo, v), TECH) >= payoff(SpreadCfD(strike), exp(0, hi, v), TECH)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(-1e5, 1e5), st.floats(0, 2))
def test_availability_monotone_and_revenue_blind(t1, t2, pi, rate):
    lo, hi = sorted((t1, t2))
    c = Availability(rate)
    assert payoff(c, exp(0, tau=lo), TECH) <= payoff(c, exp(0, tau=hi), TECH)
    assert payoff(c, exp(pi, tau=lo), TECH) == payoff(c, exp(0, tau=lo), TECH)


@pytest.mark.parametrize("make", [
    lambda: CapFloor(0.2, 0.1), lambda: CapFloor(-0.1), lambda: RevenueCfD(-1), lambda: SpreadCfD(-1),
    lambda: Availability(-0.1), lambda: CapFloor(0.1, basis="irr"),
    lambda: ScenarioExposure(0, v=-1), lambda: ScenarioExposure(0, tau=1.2),
])
def test_invalid_contracts(make):
    with pytest.raises(ValueError):
        make()


def test_exposure_blend_is_additive():
    a, b = exp(100, 50, 10, 0.2), exp(300, 20, 30, 0.6)
    m = a.blend(b, 0.25)
    assert m.net_revenue == pytest.approx(150)
    assert m.spread_revenue == pytest.approx(0.75 * 500 + 0.25 * 600)
    assert m.v == pytest.approx(15) and m.tau == pytest.approx(0.3)


def test_dict_round_trip_and_aliases():
    for c in (CapFloor(0.05), RevenueCfD(1.0), SpreadCfD(120.0), Availability(0.3)):
        assert contract_from_dict(contract_to_dict(c)) == c
    assert family_key("C&F") == "cf" and family_key("R-CfD") == "rcfd"
    assert template_contract("rcfd") == RevenueCfD(1.0)
    with pytest.raises(ValueError):
        family_key("premium")


def test_mechanism_cost_examples():
    zero = CashflowDistribution.of([10.0, -10.0])
    cost = expected_mechanism_cost(zero, 16.0, 7.26, TECH)
    assert (cost.per_mw_installed, cost.per_mw_incentivized) == (0.0, 0.0)
    avc = CashflowDistribution.of([0.3 * F] * 3)
    cost = expected_mechanism_cost(avc, 16.0, 7.26, TECH)
    assert cost.per_mw_installed == pytest.approx(0.30)
    assert cost.per_mw_incentivized == pytest.approx(0.30 * 16 / 8.74)
    flagged = expected_mechanism_cost(avc, 7.26, 7.26, TECH)
    assert not flagged.incentivized_defined
