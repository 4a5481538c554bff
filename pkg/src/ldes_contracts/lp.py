"""Linear-programming interface shared by the dispatch and expansion models.

Problems are stored in minimisation form::

    min  c @ x
    s.t. A_ub @ x <= b_ub
         A_eq @ x == b_eq
         lb <= x <= ub

Dual values follow the sensitivity convention ``d(objective)/d(rhs)`` for
both row blocks, independent of the backend that produced them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

logger = logging.getLogger(__name__)

BACKENDS = ("highs", "central", "simplex")


class SolverError(RuntimeError):
    """Raised when an LP cannot be solved to optimality."""

    def __init__(self, message: str, status: int | None = None, iterations: int | None = None):
        super().__init__(message)
        self.status = status
        self.iterations = iterations


@dataclass
class LinearProgram:
    c: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    var_names: list[str] = field(default_factory=list)
    ub_names: list[str] = field(default_factory=list)
    eq_names: list[str] = field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def n_rows(self) -> int:
        return len(self.b_ub) + len(self.b_eq)


@dataclass
class LPSolution:
    x: np.ndarray
    objective: float
    eq_duals: np.ndarray
    ub_duals: np.ndarray
    iterations: int
    backend: str


class LPBuilder:
    """Incremental sparse LP assembly with named variables and rows."""

    def __init__(self):
        self._c: list[float] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self.var_names: list[str] = []
        self._rows = {"eq": ([], [], [], [], []), "ub": ([], [], [], [], [])}

    def add_vars(self, n: int, cost=0.0, lb=0.0, ub=np.inf, name: str = "x") -> np.ndarray:
        start = len(self._c)
        self._c.extend(np.broadcast_to(np.asarray(cost, dtype=float), (n,)).tolist())
        self._lb.extend(np.broadcast_to(np.asarray(lb, dtype=float), (n,)).tolist())
        self._ub.extend(np.broadcast_to(np.asarray(ub, dtype=float), (n,)).tolist())
        self.var_names.extend(f"{name}[{k}]" for k in range(n))
        return np.arange(start, start + n)

    def add_row(self, kind: str, cols, coefs, rhs: float, name: str = "r") -> int:
        rows, cols_l, vals, rhs_l, names = self._rows[kind]
        r = len(rhs_l)
        cols = np.atleast_1d(cols)
        coefs = np.broadcast_to(np.asarray(coefs, dtype=float), cols.shape)
        rows.extend([r] * len(cols))
        cols_l.extend(cols.tolist())
        vals.extend(coefs.tolist())
        rhs_l.append(float(rhs))
        names.append(name)
        return r

    def add_rows(self, kind: str, cols: np.ndarray, coefs: np.ndarray, rhs: np.ndarray,
                 name: str = "r") -> np.ndarray:
        """Add ``k`` rows at once; ``cols`` and ``coefs`` have shape (k, nnz_per_row)."""
        rows, cols_l, vals, rhs_l, names = self._rows[kind]
        cols = np.atleast_2d(np.asarray(cols))
        coefs = np.broadcast_to(np.asarray(coefs, dtype=float), cols.shape)
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), (cols.shape[0],))
        start = len(rhs_l)
        idx = np.arange(start, start + cols.shape[0])
        rows.extend(np.repeat(idx, cols.shape[1]).tolist())
        cols_l.extend(cols.ravel().tolist())
        vals.extend(coefs.ravel().tolist())
        rhs_l.extend(rhs.tolist())
        names.extend(f"{name}[{k}]" for k in range(cols.shape[0]))
        return idx

    def build(self) -> LinearProgram:
        n = len(self._c)

        def matrix(kind):
            rows, cols, vals, rhs, names = self._rows[kind]
            A = sp.csr_matrix((vals, (rows, cols)), shape=(len(rhs), n))
            A.sum_duplicates()
            return A, np.array(rhs, dtype=float), list(names)

        A_ub, b_ub, ub_names = matrix("ub")
        A_eq, b_eq, eq_names = matrix("eq")
        return LinearProgram(
            c=np.array(self._c), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
            lb=np.array(self._lb), ub=np.array(self._ub),
            var_names=list(self.var_names), ub_names=ub_names, eq_names=eq_names,
        )


def solve_lp(lp: LinearProgram, backend: str = "highs") -> LPSolution:
    if backend == "highs":
        return _solve_highs(lp)
    if backend == "central":
        return _solve_central(lp)
    if backend == "simplex":
        from .simplex import solve_bounded_simplex
        return solve_bounded_simplex(lp)
    raise ValueError(f"unknown LP backend {backend!r}; expected one of {BACKENDS}")


def _solve_highs(lp: LinearProgram) -> LPSolution:
    bounds = np.column_stack([lp.lb, np.where(np.isinf(lp.ub), np.nan, lp.ub)])
    res = linprog(
        lp.c,
        A_ub=lp.A_ub if lp.A_ub.shape[0] else None,
        b_ub=lp.b_ub if lp.A_ub.shape[0] else None,
        A_eq=lp.A_eq if lp.A_eq.shape[0] else None,
        b_eq=lp.b_eq if lp.A_eq.shape[0] else None,
        bounds=[(lo, None if np.isnan(hi) else hi) for lo, hi in bounds],
        method="highs-ds",
        options={"presolve": True, "primal_feasibility_tolerance": 1e-9,
                 "dual_feasibility_tolerance": 1e-9},
    )
    if res.status != 0:
        raise SolverError(f"HiGHS failed: {res.message}", status=res.status, iterations=res.nit)
    eq_duals = np.asarray(res.eqlin.marginals) if lp.A_eq.shape[0] else np.zeros(0)
    ub_duals = np.asarray(res.ineqlin.marginals) if lp.A_ub.shape[0] else np.zeros(0)
    return LPSolution(
        x=np.asarray(res.x), objective=float(res.fun), eq_duals=eq_duals,
        ub_duals=ub_duals, iterations=int(res.nit), backend="highs",
    )


def _solve_central(lp: LinearProgram) -> LPSolution:
    """Interior point without crossover.

    When the optimal face is not a single vertex the iterates converge to
    its analytic centre, which gives a canonical choice among alternative
    optimal duals and dispatches instead of an arbitrary vertex.
    """
    import highspy

    A = sp.vstack([lp.A_ub, lp.A_eq]).tocsc()
    model = highspy.HighsLp()
    model.num_col_ = lp.n_vars
    model.num_row_ = A.shape[0]
    # HiGHS checks dual residuals in absolute terms, so solve with unit-scale costs
    scale = float(np.abs(lp.c).max()) if lp.n_vars else 1.0
    scale = scale if scale > 0 else 1.0
    model.col_cost_ = np.asarray(lp.c, dtype=float) / scale
    model.col_lower_ = np.asarray(lp.lb, dtype=float)
    model.col_upper_ = np.where(np.isinf(lp.ub), highspy.kHighsInf, lp.ub).astype(float)
    n_ub = lp.A_ub.shape[0]
    model.row_lower_ = np.concatenate([np.full(n_ub, -highspy.kHighsInf), lp.b_eq]).astype(float)
    model.row_upper_ = np.concatenate([lp.b_ub, lp.b_eq]).astype(float)
    model.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    model.a_matrix_.start_ = A.indptr
    model.a_matrix_.index_ = A.indices
    model.a_matrix_.value_ = A.data
    status = None
    # presolve reductions can land on a vertex, so it is only a fallback for
    # the rare problems where the plain interior point run stalls
    for presolve in ("off", "on"):
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("solver", "ipm")
        h.setOptionValue("run_crossover", "off")
        h.setOptionValue("presolve", presolve)
        h.setOptionValue("ipm_optimality_tolerance", 1e-10)
        h.setOptionValue("primal_feasibility_tolerance", 1e-9)
        h.setOptionValue("threads", 1)
        h.passModel(model)
        h.run()
        status = h.getModelStatus()
        if status == highspy.HighsModelStatus.kOptimal:
            break
        logger.debug("interior point stalled (%s, presolve %s)", h.modelStatusToString(status), presolve)
    else:
        raise SolverError(f"HiGHS interior point failed: {h.modelStatusToString(status)}")
    sol = h.getSolution()
    duals = scale * np.asarray(sol.row_dual, dtype=float)
    info = h.getInfo()
    return LPSolution(
        x=np.asarray(sol.col_value, dtype=float), objective=scale * float(info.objective_function_value),
        eq_duals=duals[n_ub:], ub_duals=duals[:n_ub], iterations=int(info.ipm_iteration_count),
        backend="central",
    )


def _fmt(v: float) -> str:
    return repr(float(v))


def write_lp_file(lp: LinearProgram, path: str | Path) -> None:
    """Write the problem in CPLEX LP text format for external cross-checks."""
    names = lp.var_names or [f"x{j}" for j in range(lp.n_vars)]
    names = [n.replace("[", "(").replace("]", ")") for n in names]

    def expr(coefs):
        terms = [f"{'+' if a >= 0 else '-'} {_fmt(abs(a))} {names[j]}" for j, a in coefs if a != 0.0]
        return " ".join(terms) if terms else "0 " + names[0]

    lines = ["\\ generated by ldes_contracts", "Minimize", " obj: " + expr(enumerate(lp.c)), "Subject To"]
    for kind, A, b, rnames, op in (("e", lp.A_eq, lp.b_eq, lp.eq_names, "="),
                                    ("u", lp.A_ub, lp.b_ub, lp.ub_names, "<=")):
        A = A.tocsr()
        for i in range(A.shape[0]):
            row = A.getrow(i)
            label = (rnames[i] if i < len(rnames) else f"{kind}{i}").replace("[", "(").replace("]", ")")
            lines.append(f" {label}_{kind}{i}: {expr(zip(row.indices, row.data))} {op} {_fmt(b[i])}")
    lines.append("Bounds")
    for j in range(lp.n_vars):
        hi = "+inf" if np.isinf(lp.ub[j]) else _fmt(lp.ub[j])
        lines.append(f" {_fmt(lp.lb[j])} <= {names[j]} <= {hi}")
    lines.append("End")
    Path(path).write_text("\n".join(lines) + "\n")
