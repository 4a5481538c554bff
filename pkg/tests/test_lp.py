import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from ldes_contracts.lp import BACKENDS, LinearProgram, LPBuilder, SolverError, solve_lp, write_lp_file


def random_lp(seed: int, n: int = 8, m_ub: int = 5, m_eq: int = 2) -> LinearProgram:
    """Feasible, bounded LP built around a known interior point."""
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(0.5, 2.0, n)
    A_ub = rng.normal(size=(m_ub, n))
    A_eq = rng.normal(size=(m_eq, n))
    ub = x0 + rng.uniform(0.5, 3.0, n)
    ub[rng.random(n) < 0.3] = np.inf
    return LinearProgram(
        c=rng.normal(size=n), A_ub=sp.csr_matrix(A_ub), b_ub=A_ub @ x0 + rng.uniform(0.1, 1.0, m_ub),
        A_eq=sp.csr_matrix(A_eq), b_eq=A_eq @ x0, lb=np.zeros(n), ub=ub,
    )


def _dual_objective(lp, sol):
    """Objective recovered from duals and bound multipliers."""
    reduced = lp.c - lp.A_ub.T @ sol.ub_duals - lp.A_eq.T @ sol.eq_duals
    at_lb = np.where(reduced > 0, reduced * lp.lb, 0.0)
    at_ub = np.where(reduced < 0, reduced * np.where(np.isinf(lp.ub), 0.0, lp.ub), 0.0)
    return lp.b_ub @ sol.ub_duals + lp.b_eq @ sol.eq_duals + at_lb.sum() + at_ub.sum()


@given(st.integers(0, 10_000))
@settings(max_examples=60)
def test_simplex_matches_highs(seed):
    lp = random_lp(seed)
    try:
        ref = solve_lp(lp, "highs")
    except SolverError:
        with pytest.raises(SolverError):
            solve_lp(lp, "simplex")
        return
    ours = solve_lp(lp, "simplex")
    assert ours.objective == pytest.approx(ref.objective, rel=1e-7, abs=1e-7)
    assert np.all(lp.A_ub @ ours.x <= lp.b_ub + 1e-7)
    assert np.allclose(lp.A_eq @ ours.x, lp.b_eq, atol=1e-7)
    assert _dual_objective(lp, ours) == pytest.approx(ours.objective, rel=1e-6, abs=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_central_backend_is_optimal(seed):
    lp = random_lp(seed, n=12, m_ub=6, m_eq=3)
    ref = solve_lp(lp, "highs")
    sol = solve_lp(lp, "central")
    assert sol.objective == pytest.approx(ref.objective, rel=1e-6, abs=1e-6)
    assert _dual_objective(lp, sol) == pytest.approx(sol.objective, rel=1e-5, abs=1e-5)


def test_degenerate_central_duals_are_interior():
    # min -x s.t. x <= 1 twice: any split of the unit dual is optimal
    b = LPBuilder()
    x = b.add_vars(1, cost=-1.0)
    b.add_row("ub", x, 1.0, 1.0)
    b.add_row("ub", x, 1.0, 1.0)
    sol = solve_lp(b.build(), "central")
    assert sol.ub_duals == pytest.approx([-0.5, -0.5], abs=1e-6)


@pytest.mark.parametrize("backend", BACKENDS)
def test_infeasible_raises(backend):
    b = LPBuilder()
    x = b.add_vars(1, cost=1.0, ub=1.0)
    b.add_row("eq", x, 1.0, 2.0)
    with pytest.raises(SolverError):
        solve_lp(b.build(), backend)


@pytest.mark.parametrize("backend", ["highs", "simplex"])
def test_unbounded_raises(backend):
    b = LPBuilder()
    x = b.add_vars(2, cost=[-1.0, 0.0])
    b.add_row("ub", x, [1.0, -1.0], 1.0)
    with pytest.raises(SolverError):
        solve_lp(b.build(), backend)


def test_unknown_backend():
    with pytest.raises(ValueError):
        solve_lp(random_lp(0), "glpk")


def test_lp_file_solves_to_same_objective(tmp_path):
    import highspy

    lp = random_lp(1)
    path = tmp_path / "m.lp"
    write_lp_file(lp, path)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(path))
    h.run()
    assert h.getInfo().objective_function_value == pytest.approx(solve_lp(lp).objective, rel=1e-9)
