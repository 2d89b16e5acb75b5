"""Linear programs in canonical sparse form, and the solvers behind them.

Every planning subproblem (path programs, the lifted relaxation, polytope
support queries) is expressed as::

    minimize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                lower <= x <= upper

``solve_lp`` defaults to HiGHS through ``scipy.optimize.linprog``. A dense
two-phase tableau simplex is kept alongside it as an independent
implementation for cross-checking.
"""

from __future__ import annotations

import enum
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from gcs_planner.errors import SolverError

logger = logging.getLogger(__name__)

Terms = Iterable[tuple[int, float]]

HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-9,
    "dual_feasibility_tolerance": 1e-9,
}


class LPStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    n_vars: int
    objective: np.ndarray
    ub_rows: np.ndarray
    ub_cols: np.ndarray
    ub_vals: np.ndarray
    b_ub: np.ndarray
    eq_rows: np.ndarray
    eq_cols: np.ndarray
    eq_vals: np.ndarray
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    ub_families: tuple[str, ...] = ()
    eq_families: tuple[str, ...] = ()

    def __post_init__(self):
        n = self.n_vars
        if self.objective.shape != (n,) or self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("objective and bounds must have one entry per variable")
        if not (len(self.ub_rows) == len(self.ub_cols) == len(self.ub_vals)):
            raise ValueError("inequality triplets have mismatched lengths")
        if not (len(self.eq_rows) == len(self.eq_cols) == len(self.eq_vals)):
            raise ValueError("equality triplets have mismatched lengths")
        for name in ("objective", "ub_vals", "b_ub", "eq_vals", "b_eq"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite coefficients")
        if len(self.ub_cols) and (self.ub_cols.max() >= n or self.ub_rows.max() >= len(self.b_ub)):
            raise ValueError("inequality triplet index out of range")
        if len(self.eq_cols) and (self.eq_cols.max() >= n or self.eq_rows.max() >= len(self.b_eq)):
            raise ValueError("equality triplet index out of range")
        if np.any(self.lower > self.upper):
            raise ValueError("variable lower bound exceeds upper bound")

    @property
    def n_ub(self) -> int:
        return len(self.b_ub)

    @property
    def n_eq(self) -> int:
        return len(self.b_eq)

    def a_ub(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(
            (self.ub_vals, (self.ub_rows, self.ub_cols)), shape=(self.n_ub, self.n_vars)
        )

    def a_eq(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(
            (self.eq_vals, (self.eq_rows, self.eq_cols)), shape=(self.n_eq, self.n_vars)
        )

    def max_violation(self, x: np.ndarray) -> float:
        """Largest violation of any row or bound at *x* (0 when feasible)."""
        worst = 0.0
        if self.n_ub:
            worst = max(worst, float(np.max(self.a_ub() @ x - self.b_ub, initial=0.0)))
        if self.n_eq:
            worst = max(worst, float(np.max(np.abs(self.a_eq() @ x - self.b_eq))))
        worst = max(worst, float(np.max(self.lower - x, initial=0.0)))
        worst = max(worst, float(np.max(x - self.upper, initial=0.0)))
        return worst


@dataclass
class _Rows:
    rows: list[int] = field(default_factory=list)
    cols: list[int] = field(default_factory=list)
    vals: list[float] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)
    families: list[str] = field(default_factory=list)

    def add(self, terms: Terms, rhs: float, family: str, scale: int | None) -> int:
        row = len(self.rhs)
        for col, val in terms:
            if val != 0.0:
                self.rows.append(row)
                self.cols.append(int(col))
                self.vals.append(float(val))
        if scale is not None and rhs != 0.0:
            # homogenized form: terms <= rhs * y
            self.rows.append(row)
            self.cols.append(int(scale))
            self.vals.append(-float(rhs))
            rhs = 0.0
        self.rhs.append(float(rhs))
        self.families.append(family)
        return row


class ProgramBuilder:
    """Incrementally assembles a :class:`LinearProgram`.

    Rows may be homogenized by passing ``scale``: the right-hand side is then
    multiplied by that variable, which is how the lifted relaxation writes
    ``A z <= b y``.
    """

    def __init__(self) -> None:
        self._lower: list[float] = []
        self._upper: list[float] = []
        self._cost: list[float] = []
        self._ub = _Rows()
        self._eq = _Rows()

    @property
    def n_vars(self) -> int:
        return len(self._cost)

    def add_variables(self, count: int, *, lower: float = -np.inf,
                      upper: float = np.inf, cost: float = 0.0) -> np.ndarray:
        start = self.n_vars
        self._lower.extend([lower] * count)
        self._upper.extend([upper] * count)
        self._cost.extend([cost] * count)
        return np.arange(start, start + count)

    def add_cost(self, index: int, value: float) -> None:
        self._cost[int(index)] += value

    def add_le(self, terms: Terms, rhs: float, family: str, *, scale: int | None = None) -> int:
        return self._ub.add(terms, rhs, family, scale)

    def add_ge(self, terms: Terms, rhs: float, family: str, *, scale: int | None = None) -> int:
        return self._ub.add(((c, -v) for c, v in terms), -rhs, family, scale)

    def add_eq(self, terms: Terms, rhs: float, family: str, *, scale: int | None = None) -> int:
        return self._eq.add(terms, rhs, family, scale)

    def build(self) -> LinearProgram:
        return LinearProgram(
            n_vars=self.n_vars,
            objective=np.asarray(self._cost, dtype=float),
            ub_rows=np.asarray(self._ub.rows, dtype=int),
            ub_cols=np.asarray(self._ub.cols, dtype=int),
            ub_vals=np.asarray(self._ub.vals, dtype=float),
            b_ub=np.asarray(self._ub.rhs, dtype=float),
            eq_rows=np.asarray(self._eq.rows, dtype=int),
            eq_cols=np.asarray(self._eq.cols, dtype=int),
            eq_vals=np.asarray(self._eq.vals, dtype=float),
            b_eq=np.asarray(self._eq.rhs, dtype=float),
            lower=np.asarray(self._lower, dtype=float),
            upper=np.asarray(self._upper, dtype=float),
            ub_families=tuple(self._ub.families),
            eq_families=tuple(self._eq.families),
        )


@dataclass(frozen=True)
class LPSolution:
    status: LPStatus
    x: np.ndarray | None = None
    objective: float | None = None
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL


def solve_lp(program: LinearProgram, method: str = "highs") -> LPSolution:
    """Solve *program*, distinguishing infeasible and unbounded outcomes.

    ``method`` is ``"highs"`` (dual simplex through SciPy) or ``"tableau"``
    (the dense reimplementation in this module).
    """
    if method == "highs":
        return _solve_highs(program)
    if method == "tableau":
        return _solve_tableau(program)
    raise ValueError(f"Unknown LP method '{method}'. Choose from: highs, tableau")


# ====================================================================
# HiGHS backend
# ====================================================================

def _bounds(program: LinearProgram) -> list[tuple[float | None, float | None]]:
    return [
        (lo if np.isfinite(lo) else None, hi if np.isfinite(hi) else None)
        for lo, hi in zip(program.lower, program.upper)
    ]


def _solve_highs(program: LinearProgram) -> LPSolution:
    logger.debug(
        "HiGHS solve: %d variables, %d inequalities, %d equalities",
        program.n_vars, program.n_ub, program.n_eq,
    )
    res = linprog(
        program.objective,
        A_ub=program.a_ub() if program.n_ub else None,
        b_ub=program.b_ub if program.n_ub else None,
        A_eq=program.a_eq() if program.n_eq else None,
        b_eq=program.b_eq if program.n_eq else None,
        bounds=_bounds(program),
        method="highs-ds",
        options=HIGHS_OPTIONS,
    )
    if res.status == 0:
        return LPSolution(LPStatus.OPTIMAL, np.asarray(res.x, dtype=float), float(res.fun), res.message)
    if res.status == 2:
        return LPSolution(LPStatus.INFEASIBLE, message=res.message)
    if res.status == 3:
        return LPSolution(LPStatus.UNBOUNDED, message=res.message)
    raise SolverError(f"HiGHS stopped with status {res.status}: {res.message}")


def elastic_residuals(program: LinearProgram) -> dict[str, float]:
    """Phase-I residual per constraint family for an infeasible program.

    Every row receives a non-negative slack and the total slack is minimized;
    the optimal slacks are then summed per family. Families with zero
    residual are omitted and the rest are ordered largest first.
    """
    builder = ProgramBuilder()
    for lo, hi in zip(program.lower, program.upper):
        builder.add_variables(1, lower=lo, upper=hi)
    a_ub = program.a_ub().tocsr()
    a_eq = program.a_eq().tocsr()
    slack_rows: list[tuple[str, np.ndarray]] = []
    for r in range(program.n_ub):
        s = builder.add_variables(1, lower=0.0, cost=1.0)
        row = a_ub.getrow(r)
        terms = list(zip(row.indices, row.data)) + [(s[0], -1.0)]
        builder.add_le(terms, program.b_ub[r], program.ub_families[r])
        slack_rows.append((program.ub_families[r], s))
    for r in range(program.n_eq):
        s = builder.add_variables(2, lower=0.0, cost=1.0)
        row = a_eq.getrow(r)
        terms = list(zip(row.indices, row.data)) + [(s[0], 1.0), (s[1], -1.0)]
        builder.add_eq(terms, program.b_eq[r], program.eq_families[r])
        slack_rows.append((program.eq_families[r], s))

    sol = _solve_highs(builder.build())
    if not sol.optimal:
        return {"bounds": float("inf")}
    totals: dict[str, float] = defaultdict(float)
    for family, idx in slack_rows:
        totals[family] += float(sol.x[idx].sum())
    return dict(sorted(((f, v) for f, v in totals.items() if v > 1e-9), key=lambda kv: -kv[1]))


# ====================================================================
# Dense two-phase tableau simplex
# ====================================================================

_STALL_LIMIT = 50


def _to_standard_form(program: LinearProgram):
    """Rewrite *program* as min c z s.t. A z = b, z >= 0.

    Returns (A, b, c, shift, transform) with x = shift + transform @ z.
    """
    n = program.n_vars
    columns: list[tuple[int, float]] = []
    shift = np.zeros(n)
    bound_rows: list[tuple[int, float]] = []
    for j in range(n):
        lo, hi = program.lower[j], program.upper[j]
        if np.isfinite(lo):
            shift[j] = lo
            columns.append((j, 1.0))
            if np.isfinite(hi):
                bound_rows.append((len(columns) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            columns.append((j, -1.0))
        else:
            columns.append((j, 1.0))
            columns.append((j, -1.0))

    k = len(columns)
    transform = np.zeros((n, k))
    for col, (j, sign) in enumerate(columns):
        transform[j, col] = sign

    a_ub = program.a_ub().toarray() @ transform
    b_ub = program.b_ub - program.a_ub().toarray() @ shift
    if bound_rows:
        extra = np.zeros((len(bound_rows), k))
        for r, (col, width) in enumerate(bound_rows):
            extra[r, col] = 1.0
        a_ub = np.vstack([a_ub, extra])
        b_ub = np.concatenate([b_ub, [w for _, w in bound_rows]])
    a_eq = program.a_eq().toarray() @ transform
    b_eq = program.b_eq - program.a_eq().toarray() @ shift

    m_ub, m_eq = a_ub.shape[0], a_eq.shape[0]
    a = np.zeros((m_ub + m_eq, k + m_ub))
    a[:m_ub, :k] = a_ub
    a[:m_ub, k:] = np.eye(m_ub)
    a[m_ub:, :k] = a_eq
    b = np.concatenate([b_ub, b_eq])
    negative = b < 0
    a[negative] *= -1.0
    b[negative] *= -1.0

    c = np.concatenate([program.objective @ transform, np.zeros(m_ub)])
    return a, b, c, shift, transform


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    for i in range(tab.shape[0]):
        if i != row and tab[i, col] != 0.0:
            tab[i] -= tab[i, col] * tab[row]


def _run_simplex(tab: np.ndarray, basis: list[int], allowed: int, tol: float, max_iter: int) -> LPStatus:
    """Minimize over the tableau whose last row holds reduced costs."""
    m = tab.shape[0] - 1
    stall = 0
    for _ in range(max_iter):
        costs = tab[m, :allowed]
        candidates = np.flatnonzero(costs < -tol)
        if candidates.size == 0:
            return LPStatus.OPTIMAL
        if stall > _STALL_LIMIT:
            col = int(candidates[0])  # Bland's rule
        else:
            col = int(candidates[np.argmin(costs[candidates])])

        column = tab[:m, col]
        rows = np.flatnonzero(column > tol)
        if rows.size == 0:
            return LPStatus.UNBOUNDED
        ratios = tab[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))

        stall = stall + 1 if best <= tol else 0
        _pivot(tab, row, col)
        basis[row] = col
    raise SolverError(f"Tableau simplex did not converge in {max_iter} iterations")


def _solve_tableau(program: LinearProgram, tol: float = 1e-9, max_iter: int = 50_000) -> LPSolution:
    a, b, c, shift, transform = _to_standard_form(program)
    m, n = a.shape

    # Phase I: one artificial per row.
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = a
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[m, :n] = -a.sum(axis=0)
    tab[m, -1] = -b.sum()
    basis = list(range(n, n + m))
    _run_simplex(tab, basis, n + m, tol, max_iter)
    if -tab[m, -1] > 1e-8 * max(1.0, float(np.abs(b).max(initial=0.0))):
        return LPSolution(LPStatus.INFEASIBLE, message="phase I residual is positive")

    # Drive artificials out of the basis; drop redundant rows.
    keep = []
    for i in range(m):
        if basis[i] >= n:
            nonzero = np.flatnonzero(np.abs(tab[i, :n]) > tol)
            if nonzero.size == 0:
                continue
            _pivot(tab, i, int(nonzero[0]))
            basis[i] = int(nonzero[0])
        keep.append(i)
    tab = np.vstack([tab[keep][:, list(range(n)) + [n + m]], np.zeros((1, n + 1))])
    basis = [basis[i] for i in keep]
    m = len(keep)

    # Phase II
    tab[m, :n] = c
    for i, j in enumerate(basis):
        tab[m] -= c[j] * tab[i]
    status = _run_simplex(tab, basis, n, tol, max_iter)
    if status is LPStatus.UNBOUNDED:
        return LPSolution(LPStatus.UNBOUNDED, message="objective decreases along an extreme ray")

    z = np.zeros(n)
    for i, j in enumerate(basis):
        z[j] = tab[i, -1]
    x = shift + transform @ z[:transform.shape[1]]
    return LPSolution(LPStatus.OPTIMAL, x, float(program.objective @ x), "optimal")
