import os
import sys
from dataclasses import replace

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

from ldes_contracts import desk_config  # noqa: E402
from ldes_contracts.equilibrium import ProfitModel, find_equilibrium  # noqa: E402


@pytest.fixture(scope="session")
def desk():
    return desk_config()


@pytest.fixture(scope="session")
def desk_model(desk):
    """Shared capacity-state cache with the risk-neutral equilibrium pinned."""
    model = ProfitModel(desk)
    rn = find_equilibrium(desk, None, replace(desk.investor(), delta=1.0), model=model)
    model.pin(rn.state)
    return model


@pytest.fixture(scope="session")
def desk_rn(desk, desk_model):
    return find_equilibrium(desk, None, replace(desk.investor(), delta=1.0), model=desk_model)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
