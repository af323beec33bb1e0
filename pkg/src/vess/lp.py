"""Linear program container and deterministic tie-broken solving.

The container keeps every constraint row tagged with its origin (structural
row, sampled row with its sample index, or perturbation-hull row with the
sample and hull-point indices) so downstream code can map rows back to data.
Solving is delegated to the HiGHS dual simplex through scipy, which returns
vertex (basic) solutions; determinism across input row orderings is obtained
by sorting rows into a canonical content-derived order before handing the
matrix to the solver.

`solve_unique` removes vertex ambiguity on degenerate optimal faces with a
two-stage lexicographic pass: minimize the objective, then fix it to within
tie_tol and minimize the sum of all variables, returning the canonical
minimal representative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import NumericalFailureError, ValidationError

__all__ = [
    "LinearProgram",
    "RowTag",
    "SolveReport",
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
    "STRUCTURAL",
    "SAMPLE",
    "HULL",
    "solve",
    "solve_unique",
    "diagnose_infeasible",
]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

STRUCTURAL = "structural"
SAMPLE = "sample"
HULL = "hull"

_KIND_NAMES = (STRUCTURAL, SAMPLE, HULL)
_SENSE_CODE = {"<=": 0, ">=": 1, "==": 2}
_SENSE_NAMES = ("<=", ">=", "==")

FEAS_TOL = 1e-8
OPT_TOL = 1e-8

_HIGHS_OPTIONS = {
    "presolve": True,
    "primal_feasibility_tolerance": 1e-9,
    "dual_feasibility_tolerance": 1e-9,
}


@dataclass(frozen=True)
class RowTag:
    """Origin of one constraint row."""

    kind: str
    family: str
    sample: int | None = None
    hull: int | None = None
    step: int | None = None

    def label(self) -> str:
        parts = []
        if self.sample is not None:
            parts.append(f"i={self.sample}")
        if self.hull is not None:
            parts.append(f"j={self.hull}")
        if self.step is not None:
            parts.append(f"k={self.step}")
        inner = ",".join(parts)
        return f"{self.family}[{inner}]" if inner else self.family


@dataclass
class SolveReport:
    """Outcome of one LP solve.

    activity and slack are reported in the LP's original row order; slack is
    the signed satisfaction margin (non-negative iff the row holds).
    """

    status: str
    x: np.ndarray | None
    objective: float | None
    activity: np.ndarray | None
    slack: np.ndarray | None
    iterations: int
    primal_residual: float
    duality_gap: float
    tie_broken: bool = False
    message: str = ""


class _RowChunk:
    __slots__ = ("cols", "vals", "sense", "rhs", "kind", "family", "sample", "hull", "step")

    def __init__(self, cols, vals, sense, rhs, kind, family, sample, hull, step):
        self.cols = cols
        self.vals = vals
        self.sense = sense
        self.rhs = rhs
        self.kind = kind
        self.family = family
        self.sample = sample
        self.hull = hull
        self.step = step


class LinearProgram:
    """Sparse LP in row form with origin-tagged constraint rows.

    Variables carry box bounds; the objective is minimized.  Rows are added
    either singly (`add_row`) or as homogeneous chunks (`add_rows`) whose
    columns arrays share a fixed width.
    """

    def __init__(self, n_var: int, objective, lower, upper, var_names=None):
        objective = np.asarray(objective, dtype=float)
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if objective.shape != (n_var,) or lower.shape != (n_var,) or upper.shape != (n_var,):
            raise ValidationError("objective/bounds length disagrees with n_var")
        if np.any(lower > upper):
            raise ValidationError("variable lower bound above upper bound")
        if var_names is not None and len(var_names) != n_var:
            raise ValidationError("var_names length disagrees with n_var")
        self.n_var = int(n_var)
        self.objective = objective
        self.lower = lower
        self.upper = upper
        self.var_names = list(var_names) if var_names is not None else [f"x{j}" for j in range(n_var)]
        self._chunks: list[_RowChunk] = []
        self._n_rows = 0

    @property
    def n_rows(self) -> int:
        return self._n_rows

    def add_row(self, cols, vals, sense: str, rhs: float, kind: str = STRUCTURAL,
                family: str = "row", sample: int | None = None, hull: int | None = None,
                step: int | None = None) -> None:
        cols = np.asarray(cols, dtype=np.int64).reshape(1, -1)
        vals = np.asarray(vals, dtype=float).reshape(1, -1)
        self.add_rows(cols, vals, sense, np.asarray([rhs], dtype=float), kind, family,
                      None if sample is None else np.asarray([sample]),
                      None if hull is None else np.asarray([hull]),
                      None if step is None else np.asarray([step]))

    def add_rows(self, cols, vals, sense: str, rhs, kind: str = STRUCTURAL,
                 family: str = "rows", sample=None, hull=None, step=None) -> None:
        """Append a chunk of rows sharing one sense and one tag family.

        cols/vals are (m, w) arrays; unused trailing slots are marked with
        column -1.  sample/hull/step are optional (m,) index arrays.
        """
        if sense not in _SENSE_CODE:
            raise ValidationError(f"unknown row sense {sense!r}")
        if kind not in _KIND_NAMES:
            raise ValidationError(f"unknown row kind {kind!r}")
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        rhs = np.asarray(rhs, dtype=float)
        if cols.ndim != 2 or cols.shape != vals.shape or rhs.shape != (cols.shape[0],):
            raise ValidationError("row chunk shapes disagree")
        live = cols >= 0
        if np.any(cols[live] >= self.n_var):
            raise ValidationError("row references a variable outside the program")
        m = cols.shape[0]

        def _idx(a):
            if a is None:
                return None
            a = np.asarray(a, dtype=np.int64)
            if a.shape != (m,):
                raise ValidationError("tag index array length disagrees with chunk")
            return a

        self._chunks.append(_RowChunk(cols, vals, _SENSE_CODE[sense], rhs, kind, family,
                                      _idx(sample), _idx(hull), _idx(step)))
        self._n_rows += m

    def row_tag(self, idx: int) -> RowTag:
        if idx < 0 or idx >= self._n_rows:
            raise IndexError(idx)
        base = 0
        for ch in self._chunks:
            m = ch.rhs.shape[0]
            if idx < base + m:
                r = idx - base
                return RowTag(
                    kind=ch.kind,
                    family=ch.family,
                    sample=None if ch.sample is None else int(ch.sample[r]),
                    hull=None if ch.hull is None else int(ch.hull[r]),
                    step=None if ch.step is None else int(ch.step[r]),
                )
            base += m
        raise IndexError(idx)

    def row_tags(self) -> list[RowTag]:
        return [self.row_tag(i) for i in range(self._n_rows)]

    def _padded(self):
        """Concatenate chunks into fixed-width padded row arrays."""
        if not self._chunks:
            w = 1
            return (np.empty((0, w), dtype=np.int64), np.empty((0, w)), np.empty(0, dtype=np.int8),
                    np.empty(0))
        w = max(ch.cols.shape[1] for ch in self._chunks)
        cols = np.full((self._n_rows, w), -1, dtype=np.int64)
        vals = np.zeros((self._n_rows, w))
        sense = np.empty(self._n_rows, dtype=np.int8)
        rhs = np.empty(self._n_rows)
        base = 0
        for ch in self._chunks:
            m, cw = ch.cols.shape
            cols[base:base + m, :cw] = ch.cols
            vals[base:base + m, :cw] = ch.vals
            sense[base:base + m] = ch.sense
            rhs[base:base + m] = ch.rhs
            base += m
        return cols, vals, sense, rhs

    def row_matrix(self) -> sp.csr_matrix:
        """All rows, original order, one sparse matrix (senses not applied)."""
        cols, vals, _, _ = self._padded()
        return _to_csr(cols, vals, self.n_var)

    def to_text(self) -> str:
        """Debug dump in an LP-format-like plain text layout."""
        cols, vals, sense, rhs = self._padded()
        lines = ["\\ vess LP debug dump", "Minimize"]
        lines.append(" obj: " + _lincomb(self.objective_cols(), self.objective_vals(), self.var_names))
        lines.append("Subject To")
        for i in range(self._n_rows):
            live = cols[i] >= 0
            expr = _lincomb(cols[i][live], vals[i][live], self.var_names)
            op = {0: "<=", 1: ">=", 2: "="}[int(sense[i])]
            lines.append(f" {self.row_tag(i).label()}: {expr} {op} {float(rhs[i])!r}")
        lines.append("Bounds")
        for j in range(self.n_var):
            lo, hi = self.lower[j], self.upper[j]
            lo_s = "-inf" if np.isneginf(lo) else repr(float(lo))
            hi_s = "+inf" if np.isposinf(hi) else repr(float(hi))
            lines.append(f" {lo_s} <= {self.var_names[j]} <= {hi_s}")
        lines.append("End")
        return "\n".join(lines) + "\n"

    def objective_cols(self):
        return np.nonzero(self.objective)[0]

    def objective_vals(self):
        return self.objective[np.nonzero(self.objective)[0]]


def _lincomb(cols, vals, names) -> str:
    if len(cols) == 0:
        return "0"
    parts = []
    for c, v in zip(cols, vals):
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {abs(float(v))!r} {names[int(c)]}")
    out = " ".join(parts)
    return out[2:] if out.startswith("+ ") else out


def _to_csr(cols, vals, n_var) -> sp.csr_matrix:
    live = cols >= 0
    nnz_per_row = live.sum(axis=1)
    indptr = np.concatenate([[0], np.cumsum(nnz_per_row)])
    data = vals[live]
    indices = cols[live]
    return sp.csr_matrix((data, indices, indptr), shape=(cols.shape[0], n_var))


def _canonical_order(cols, vals, sense, rhs):
    """Deterministic row order derived from row content only."""
    m = cols.shape[0]
    if m == 0:
        return np.empty(0, dtype=np.int64)
    keys = [rhs]
    for j in range(cols.shape[1] - 1, -1, -1):
        keys.append(vals[:, j])
        keys.append(cols[:, j])
    keys.append((cols >= 0).sum(axis=1))
    keys.append(sense)
    return np.lexsort(keys)


def _assemble(lp: LinearProgram):
    cols, vals, sense, rhs = lp._padded()
    order = _canonical_order(cols, vals, sense, rhs)
    cols, vals, sense, rhs = cols[order], vals[order], sense[order], rhs[order]

    le = sense == 0
    ge = sense == 1
    eq = sense == 2
    # GE rows are negated into LE form for the solver.
    ub_cols = np.concatenate([cols[le], cols[ge]])
    ub_vals = np.concatenate([vals[le], -vals[ge]])
    b_ub = np.concatenate([rhs[le], -rhs[ge]])
    A_ub = _to_csr(ub_cols, ub_vals, lp.n_var) if ub_cols.shape[0] else None
    A_eq = _to_csr(cols[eq], vals[eq], lp.n_var) if eq.any() else None
    b_eq = rhs[eq] if eq.any() else None
    return A_ub, b_ub if A_ub is not None else None, A_eq, b_eq


def _dual_value(res, b_ub, b_eq, lower, upper) -> float:
    """LP optimal value reconstructed from the solver's sensitivities."""
    total = 0.0
    if b_ub is not None and res.ineqlin is not None:
        total += float(np.dot(res.ineqlin.marginals, b_ub))
    if b_eq is not None and res.eqlin is not None:
        total += float(np.dot(res.eqlin.marginals, b_eq))
    zl = np.asarray(res.lower.marginals)
    zu = np.asarray(res.upper.marginals)
    finite_l = np.isfinite(lower)
    finite_u = np.isfinite(upper)
    total += float(np.dot(zl[finite_l], lower[finite_l]))
    total += float(np.dot(zu[finite_u], upper[finite_u]))
    return total


def _report_geometry(lp: LinearProgram, x: np.ndarray):
    """Activity, signed slack, and worst primal violation in original row order."""
    cols, vals, sense, rhs = lp._padded()
    A = _to_csr(cols, vals, lp.n_var)
    activity = A @ x
    slack = np.empty_like(activity)
    le = sense == 0
    ge = sense == 1
    eq = sense == 2
    slack[le] = rhs[le] - activity[le]
    slack[ge] = activity[ge] - rhs[ge]
    slack[eq] = -np.abs(rhs[eq] - activity[eq])
    row_viol = float(max(0.0, -slack.min())) if slack.size else 0.0
    bound_viol = float(max(np.max(np.maximum(lp.lower - x, 0.0), initial=0.0),
                           np.max(np.maximum(x - lp.upper, 0.0), initial=0.0)))
    return activity, slack, max(row_viol, bound_viol)


def solve(lp: LinearProgram, feas_tol: float = FEAS_TOL, opt_tol: float = OPT_TOL,
          _objective_override: np.ndarray | None = None,
          _extra_le: tuple | None = None) -> SolveReport:
    """Solve the LP deterministically.

    Returns a report with status optimal/infeasible/unbounded; raises
    NumericalFailureError when residuals cannot be met after a refinement
    retry.  Identical row content yields identical output regardless of the
    order rows were added in.
    """
    c = lp.objective if _objective_override is None else np.asarray(_objective_override, float)
    A_ub, b_ub, A_eq, b_eq = _assemble(lp)
    if _extra_le is not None:
        e_cols, e_vals, e_rhs = _extra_le
        extra = sp.csr_matrix((np.asarray(e_vals, float), (np.zeros(len(e_cols), dtype=np.int64),
                                                           np.asarray(e_cols, dtype=np.int64))),
                              shape=(1, lp.n_var))
        A_ub = extra if A_ub is None else sp.vstack([A_ub, extra], format="csr")
        b_ub = np.asarray([e_rhs]) if b_ub is None else np.concatenate([b_ub, [e_rhs]])

    bounds = np.column_stack([lp.lower, lp.upper])
    last_message = ""
    for options in (_HIGHS_OPTIONS, {**_HIGHS_OPTIONS, "presolve": False}):
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                      method="highs-ds", options=options)
        last_message = res.message
        if res.status == 2:
            return SolveReport(INFEASIBLE, None, None, None, None, int(res.nit or 0),
                               np.inf, np.inf, message=res.message)
        if res.status == 3:
            return SolveReport(UNBOUNDED, None, None, None, None, int(res.nit or 0),
                               np.inf, np.inf, message=res.message)
        if res.status != 0:
            continue
        x = np.asarray(res.x, dtype=float)
        activity, slack, primal_residual = _report_geometry(lp, x)
        if _extra_le is not None:
            e_cols, e_vals, e_rhs = _extra_le
            extra_act = float(np.dot(np.asarray(e_vals), x[np.asarray(e_cols, dtype=np.int64)]))
            primal_residual = max(primal_residual, max(0.0, extra_act - e_rhs))
        gap = abs(float(res.fun) - _dual_value(res, b_ub, b_eq, lp.lower, lp.upper))
        if primal_residual <= feas_tol and gap <= opt_tol * (1.0 + abs(float(res.fun))):
            return SolveReport(OPTIMAL, x, float(np.dot(lp.objective, x)), activity, slack,
                               int(res.nit or 0), primal_residual, gap, message=res.message)
    raise NumericalFailureError(f"LP residuals not met after refinement: {last_message}")


def solve_unique(lp: LinearProgram, feas_tol: float = FEAS_TOL, opt_tol: float = OPT_TOL,
                 tie_tol: float | None = None) -> SolveReport:
    """Two-stage lexicographic solve returning a canonical optimizer.

    Stage 1 minimizes the objective; stage 2 constrains the objective to
    J* + tie_tol (default 1e-7 * (1 + |J*|)) and minimizes the sum of all
    variables.  On the row content of the program the result is a pure
    function, invariant to the order rows were added in.
    """
    rep1 = solve(lp, feas_tol, opt_tol)
    if rep1.status != OPTIMAL:
        return rep1
    j_star = rep1.objective
    tt = tie_tol if tie_tol is not None else 1e-7 * (1.0 + abs(j_star))
    obj_cols = np.nonzero(lp.objective)[0]
    if obj_cols.size == 0:
        extra = None
    else:
        extra = (obj_cols, lp.objective[obj_cols], j_star + tt)
    rep2 = solve(lp, feas_tol, opt_tol, _objective_override=np.ones(lp.n_var), _extra_le=extra)
    if rep2.status != OPTIMAL:
        raise NumericalFailureError(
            f"tie-break stage infeasible at tie_tol={tt!r}: {rep2.message}")
    rep2.objective = float(np.dot(lp.objective, rep2.x))
    rep2.iterations += rep1.iterations
    rep2.tie_broken = True
    return rep2


def diagnose_infeasible(lp: LinearProgram, tol: float = 1e-7) -> list:
    """Minimum-total-violation witness for an infeasible row system.

    Every row receives an elastic slack in its violated direction (equality
    rows in both); the total slack is minimized over the original variable
    box.  Returns (RowTag, deficit) pairs for the rows that stay violated at
    that optimum, worst first.  An empty list means the rows are satisfiable
    within tol, i.e. a reported infeasibility was numerical.
    """
    n_rows = lp.n_rows
    if n_rows == 0:
        return []
    cols, vals, sense, rhs = lp._padded()
    A = _to_csr(cols, vals, lp.n_var)
    le, ge, eq = sense == 0, sense == 1, sense == 2
    n_eq = int(eq.sum())
    n_slack = n_rows + n_eq
    n_tot = lp.n_var + n_slack
    rows_idx = np.arange(n_rows)
    # One slack per row, relaxing toward feasibility; equality rows get a
    # second slack for the opposite direction.
    sign = np.where(le, -1.0, 1.0)
    elastic = sp.csr_matrix((sign, (rows_idx, lp.n_var + rows_idx)),
                            shape=(n_rows, n_tot))
    if n_eq:
        elastic = elastic + sp.csr_matrix(
            (-np.ones(n_eq), (rows_idx[eq], lp.n_var + n_rows + np.arange(n_eq))),
            shape=(n_rows, n_tot))
    full = sp.hstack([A, sp.csr_matrix((n_rows, n_slack))], format="csr") + elastic

    ub_rows = np.concatenate([np.nonzero(le)[0], np.nonzero(ge)[0]])
    ub_sign = np.concatenate([np.ones(int(le.sum())), -np.ones(int(ge.sum()))])
    A_ub = sp.diags(ub_sign) @ full[ub_rows] if ub_rows.size else None
    b_ub = ub_sign * rhs[ub_rows] if ub_rows.size else None
    A_eq = full[np.nonzero(eq)[0]] if n_eq else None
    b_eq = rhs[eq] if n_eq else None

    c = np.concatenate([np.zeros(lp.n_var), np.ones(n_slack)])
    bounds = np.column_stack([
        np.concatenate([lp.lower, np.zeros(n_slack)]),
        np.concatenate([lp.upper, np.full(n_slack, np.inf)]),
    ])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs-ds", options=_HIGHS_OPTIONS)
    if res.status != 0:
        raise NumericalFailureError(f"elastic diagnosis failed: {res.message}")
    s = np.asarray(res.x, dtype=float)[lp.n_var:]
    deficit = s[:n_rows].copy()
    if n_eq:
        deficit[eq] += s[n_rows:]
    hits = [(lp.row_tag(i), float(deficit[i])) for i in np.nonzero(deficit > tol)[0]]
    hits.sort(key=lambda pair: -pair[1])
    return hits
