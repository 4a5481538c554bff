"""Dense bounded-variable primal simplex.

Intended for desk-scale problems and for cross-checking the HiGHS backend.
Nonbasic variables sit at either bound; ties in pricing and in the ratio
test are broken by lowest index, so repeated solves of the same problem
return identical primal and dual vectors.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .lp import LinearProgram, LPSolution, SolverError

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-11
DEGENERATE_STREAK = 50


class _Tableau:
    def __init__(self, A: np.ndarray, b: np.ndarray, ub: np.ndarray):
        self.A = A
        self.b = b
        self.ub = ub
        self.m, self.n = A.shape

    def basic_values(self, basis, at_upper):
        xN = np.where(at_upper, self.ub, 0.0)
        xN[basis] = 0.0
        rhs = self.b - self.A @ xN
        lu = lu_factor(self.A[:, basis])
        return lu, lu_solve(lu, rhs), xN


def _iterate(tab: _Tableau, cost: np.ndarray, basis: list[int], at_upper: np.ndarray,
             max_iter: int) -> tuple[list[int], np.ndarray, int]:
    A, ub = tab.A, tab.ub
    n = tab.n
    fixed = ub <= 0.0
    degenerate = 0
    for it in range(max_iter):
        lu, xB, _ = tab.basic_values(basis, at_upper)
        y = lu_solve(lu, cost[basis], trans=1)
        d = cost - A.T @ y
        is_basic = np.zeros(n, dtype=bool)
        is_basic[basis] = True
        improving = ~is_basic & ~fixed & (
            (~at_upper & (d < -OPT_TOL)) | (at_upper & (d > OPT_TOL))
        )
        candidates = np.flatnonzero(improving)
        if candidates.size == 0:
            return basis, at_upper, it
        if degenerate >= DEGENERATE_STREAK:
            j = int(candidates[0])
        else:
            j = int(candidates[np.argmax(np.abs(d[candidates]))])
        direction = -1.0 if at_upper[j] else 1.0
        alpha = lu_solve(lu, A[:, j]) * direction
        # x_B(t) = xB - t * alpha, t >= 0
        step = ub[j]
        leave = -1
        leave_to_upper = False
        ub_B = ub[basis]
        for i in range(tab.m):
            a = alpha[i]
            if a > PIVOT_TOL:
                t = max(xB[i], 0.0) / a
                to_upper = False
            elif a < -PIVOT_TOL and np.isfinite(ub_B[i]):
                t = max(ub_B[i] - xB[i], 0.0) / -a
                to_upper = True
            else:
                continue
            if t < step - 1e-14 or (leave >= 0 and abs(t - step) <= 1e-14 and basis[i] < basis[leave]):
                step, leave, leave_to_upper = t, i, to_upper
        if not np.isfinite(step):
            raise SolverError("LP is unbounded", status=3, iterations=it)
        degenerate = degenerate + 1 if step <= FEAS_TOL else 0
        if leave < 0:
            at_upper[j] = not at_upper[j]
            continue
        out = basis[leave]
        at_upper[out] = leave_to_upper
        at_upper[j] = False
        basis[leave] = j
    raise SolverError("simplex iteration limit reached", status=1, iterations=max_iter)


def solve_bounded_simplex(lp: LinearProgram, max_iter: int = 50_000) -> LPSolution:
    if np.any(~np.isfinite(lp.lb)):
        raise SolverError("internal simplex requires finite lower bounds", status=4)
    A_eq = lp.A_eq.toarray()
    A_ub = lp.A_ub.toarray()
    m_eq, m_ub, n = A_eq.shape[0], A_ub.shape[0], lp.n_vars
    m = m_eq + m_ub

    # shift x = lb + x' and add slacks to the <= rows
    A = np.zeros((m, n + m_ub))
    A[:m_eq, :n] = A_eq
    A[m_eq:, :n] = A_ub
    A[m_eq:, n:] = np.eye(m_ub)
    b = np.concatenate([lp.b_eq, lp.b_ub]) - A[:, :n] @ lp.lb
    ub = np.concatenate([lp.ub - lp.lb, np.full(m_ub, np.inf)])
    cost = np.concatenate([lp.c, np.zeros(m_ub)])
    if np.any(ub < -FEAS_TOL):
        raise SolverError("inconsistent variable bounds", status=2)
    ub = np.maximum(ub, 0.0)

    # phase 1: one artificial per row, signed so it starts nonnegative
    sign = np.where(b >= 0, 1.0, -1.0)
    A1 = np.hstack([A, np.diag(sign)])
    ub1 = np.concatenate([ub, np.full(m, np.inf)])
    n_total = A1.shape[1]
    cost1 = np.concatenate([np.zeros(n + m_ub), np.ones(m)])
    basis = list(range(n + m_ub, n_total))
    at_upper = np.zeros(n_total, dtype=bool)
    tab = _Tableau(A1, b, ub1)
    basis, at_upper, it1 = _iterate(tab, cost1, basis, at_upper, max_iter)
    _, xB, xN = tab.basic_values(basis, at_upper)
    x = xN.copy()
    x[basis] = xB
    if x[n + m_ub:].sum() > 1e-7 * max(1.0, np.abs(b).max()):
        raise SolverError("LP is infeasible", status=2, iterations=it1)

    # phase 2: artificials pinned to zero
    tab.ub = np.concatenate([ub, np.zeros(m)])
    cost2 = np.concatenate([cost, np.zeros(m)])
    basis, at_upper, it2 = _iterate(tab, cost2, basis, at_upper, max_iter)
    lu, xB, xN = tab.basic_values(basis, at_upper)
    x = xN.copy()
    x[basis] = xB
    y = lu_solve(lu, cost2[basis], trans=1)
    x_struct = x[:n] + lp.lb
    return LPSolution(
        x=x_struct,
        objective=float(lp.c @ x_struct),
        eq_duals=y[:m_eq].copy(),
        ub_duals=y[m_eq:].copy(),
        iterations=it1 + it2,
        backend="simplex",
    )
