"""Embedded LP/MILP solver.

A dense two-phase tableau simplex handles the LP relaxations; a best-bound
branch-and-bound on top of it handles binary and integer variables.  This
is meant for small models (tests, teaching, quick checks).  Larger models
should be written out with :func:`esmgen.lpfile.export_lp` and handed to an
external solver.
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import NumericalError
from .model import EQ, LE, Model, VariableRef

DENSE_NNZ_LIMIT = 10_000
FEASIBILITY_TOL = 1e-6
INTEGRALITY_TOL = 1e-5
GAP_TOL = 1e-6
MAX_PIVOTS = 50_000
MAX_NODES = 100_000
BLAND_AFTER = 1_000

_PIVOT_TOL = 1e-9
_COST_TOL = 1e-9


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class StandardForm:
    """``min c@x  s.t.  A x (sense) b,  lb <= x <= ub``, some x integral."""

    A: object  # ndarray or scipy.sparse.csr_matrix
    c: np.ndarray
    senses: list
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    binary: Optional[np.ndarray] = None

    @property
    def shape(self):
        return self.A.shape

    def dense(self) -> np.ndarray:
        return self.A.toarray() if sp.issparse(self.A) else np.asarray(self.A)

    def equals(self, other: "StandardForm") -> bool:
        """Exact, coefficient-for-coefficient comparison."""
        if self.shape != other.shape or list(self.senses) != list(other.senses):
            return False
        pairs = [
            (self.dense(), other.dense()),
            (self.c, other.c),
            (self.b, other.b),
            (self.lb, other.lb),
            (self.ub, other.ub),
            (self.integer, other.integer),
        ]
        return all(np.array_equal(a, b) for a, b in pairs)


def to_standard_form(model: Model) -> StandardForm:
    n = len(model.variables)
    m = len(model.constraints)
    rows, cols, vals = [], [], []
    b = np.zeros(m)
    senses = []
    for i, row in enumerate(model.constraints):
        for a, ref in row.terms:
            rows.append(i)
            cols.append(model.index(ref))
            vals.append(a)
        b[i] = 0.0 - row.constant
        senses.append(row.sense)
    A = sp.coo_matrix((vals, (rows, cols)), shape=(m, n)).tocsr()
    A.sum_duplicates()
    if A.nnz <= DENSE_NNZ_LIMIT:
        A = A.toarray()
    c = np.zeros(n)
    for coef, ref in model.objective:
        c[model.index(ref)] += coef
    lb = np.array([v.lower for v in model.variables], dtype=float)
    ub = np.array([v.upper for v in model.variables], dtype=float)
    integer = np.array([v.domain.integral for v in model.variables], dtype=bool)
    binary = np.array([v.domain.value == "binary" for v in model.variables], dtype=bool)
    return StandardForm(A, c, senses, b, lb, ub, integer,
                        [v.name for v in model.variables], [r.name for r in model.constraints], binary)


@dataclass
class Solution:
    status: Status
    objective_value: Optional[float]
    assignment: dict
    iterations: int = 0
    nodes: int = 0
    x: Optional[np.ndarray] = None

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def __getitem__(self, ref: VariableRef) -> float:
        return self.assignment[ref]

    @property
    def solve_stats(self) -> dict:
        return {"iterations": self.iterations, "branch_nodes": self.nodes}


# --------------------------------------------------------------------------
# simplex on arrays
# --------------------------------------------------------------------------


@dataclass
class LPResult:
    status: Status
    x: Optional[np.ndarray]
    objective: Optional[float]
    iterations: int


class _Tableau:
    def __init__(self, T, basis, max_pivots):
        self.T = T
        self.basis = basis
        self.iterations = 0
        self.degenerate = 0
        self.bland = False
        self.max_pivots = max_pivots

    def pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        nz = np.nonzero(col)[0]
        if nz.size:
            T[nz] -= np.outer(col[nz], T[r])
        self.basis[r] = j
        self.iterations += 1

    def run(self, ncols):
        """Minimize the cost row (last row) over the first ``ncols`` columns.

        Returns ``"optimal"``, ``"unbounded"`` or ``"limit"``.
        """
        T = self.T
        m = T.shape[0] - 1
        if ncols == 0:
            return "optimal"
        while True:
            if self.iterations >= self.max_pivots:
                return "limit"
            d = T[-1, :ncols]
            if self.bland:
                candidates = np.nonzero(d < -_COST_TOL)[0]
                if candidates.size == 0:
                    return "optimal"
                j = int(candidates[0])
            else:
                j = int(np.argmin(d))
                if d[j] >= -_COST_TOL:
                    return "optimal"
            col = T[:m, j]
            positive = np.nonzero(col > _PIVOT_TOL)[0]
            if positive.size == 0:
                return "unbounded"
            ratios = T[positive, -1] / col[positive]
            best = ratios.min()
            ties = positive[ratios <= best + 1e-12]
            if self.bland:
                r = int(min(ties, key=lambda i: self.basis[i]))
            else:
                r = int(ties[np.argmax(col[ties])])
            if best <= 1e-12:
                self.degenerate += 1
                if self.degenerate >= BLAND_AFTER:
                    self.bland = True
            self.pivot(r, j)


def simplex(A, senses, b, c, lb, ub, max_pivots=MAX_PIVOTS) -> LPResult:
    """Two-phase simplex for ``min c@x, A x (<=|=) b, lb <= x <= ub``.

    Variables with ``lb == ub`` are substituted out; finite upper bounds
    become extra rows.
    """
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    c = np.asarray(c, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if np.any(lb > ub):
        return LPResult(Status.INFEASIBLE, None, None, 0)

    free = np.nonzero(ub - lb > 0)[0]
    rhs = b - A @ lb
    Af = A[:, free]
    cf = c[free]
    span = (ub - lb)[free]
    bounded = np.nonzero(np.isfinite(span))[0]
    nf = free.size

    # rows: original rows, then y_j <= span_j
    eq = np.array([s == EQ for s in senses] + [False] * bounded.size, dtype=bool)
    R = np.zeros((m + bounded.size, nf))
    R[:m] = Af
    R[m + np.arange(bounded.size), bounded] = 1.0
    r = np.concatenate([rhs, span[bounded]])
    rows = R.shape[0]

    slack_rows = np.nonzero(~eq)[0]
    ns = slack_rows.size
    S = np.zeros((rows, ns))
    S[slack_rows, np.arange(ns)] = 1.0

    flip = r < 0
    R[flip] *= -1
    S[flip] *= -1
    r[flip] *= -1

    # a row can start with its slack in the basis if the slack coefficient is +1
    slack_basic = np.full(rows, -1)
    for k, i in enumerate(slack_rows):
        if S[i, k] > 0:
            slack_basic[i] = nf + k
    need_art = np.nonzero(slack_basic < 0)[0]
    na = need_art.size
    Aart = np.zeros((rows, na))
    Aart[need_art, np.arange(na)] = 1.0

    ncols = nf + ns + na
    T = np.zeros((rows + 1, ncols + 1))
    T[:rows, :nf] = R
    T[:rows, nf:nf + ns] = S
    T[:rows, nf + ns:ncols] = Aart
    T[:rows, -1] = r
    basis = slack_basic.copy()
    basis[need_art] = nf + ns + np.arange(na)

    tab = _Tableau(T, list(int(x) for x in basis), max_pivots)

    if na:
        T[-1, :] = 0.0
        T[-1, nf + ns:ncols] = 1.0
        T[-1] -= T[need_art].sum(axis=0)
        outcome = tab.run(ncols)
        if outcome == "limit":
            return LPResult(Status.ITERATION_LIMIT, None, None, tab.iterations)
        scale = max(1.0, float(np.abs(r).max(initial=0.0)))
        if -T[-1, -1] > 1e-9 * scale:
            return LPResult(Status.INFEASIBLE, None, None, tab.iterations)
        # drive artificials out of the basis, dropping redundant rows
        keep = []
        for i in range(rows):
            if tab.basis[i] >= nf + ns:
                row = T[i, :nf + ns]
                j = int(np.argmax(np.abs(row))) if row.size else 0
                if row.size and abs(row[j]) > 1e-9:
                    tab.pivot(i, j)
                    keep.append(i)
            else:
                keep.append(i)
        keep_rows = keep + [rows]
        T = T[keep_rows][:, list(range(nf + ns)) + [ncols]]
        tab.T = T
        tab.basis = [tab.basis[i] for i in keep]
        ncols = nf + ns

    T = tab.T
    T[-1, :] = 0.0
    T[-1, :nf] = cf
    for i, j in enumerate(tab.basis):
        if j < nf and cf[j] != 0:
            T[-1] -= cf[j] * T[i]
    outcome = tab.run(ncols)
    if outcome == "limit":
        return LPResult(Status.ITERATION_LIMIT, None, None, tab.iterations)
    if outcome == "unbounded":
        return LPResult(Status.UNBOUNDED, None, None, tab.iterations)

    y = np.zeros(nf)
    for i, j in enumerate(tab.basis):
        if j < nf:
            y[j] = T[i, -1]
    x = lb.copy()
    x[free] += np.maximum(y, 0.0)
    x = np.minimum(x, ub)
    return LPResult(Status.OPTIMAL, x, float(c @ x), tab.iterations)


def _max_violation(sf: StandardForm, x: np.ndarray) -> float:
    if sf.shape[0] == 0:
        rows = 0.0
    else:
        lhs = sf.A @ x
        diff = lhs - sf.b
        eq = np.array([s == EQ for s in sf.senses], dtype=bool)
        viol = np.where(eq, np.abs(diff), np.maximum(diff, 0.0))
        rows = float(viol.max(initial=0.0))
    bounds = float(np.maximum(sf.lb - x, 0).max(initial=0.0))
    finite = np.isfinite(sf.ub)
    bounds = max(bounds, float(np.maximum(x[finite] - sf.ub[finite], 0).max(initial=0.0)))
    return max(rows, bounds)


def _solution(model, sf, status, x, iterations, nodes, feasibility_tol):
    if status is not Status.OPTIMAL:
        return Solution(status, None, {}, iterations, nodes, None)
    worst = _max_violation(sf, x)
    if worst > feasibility_tol:
        raise NumericalError(f"solver point violates a row by {worst:.3g}")
    assignment = {v: float(x[i]) for i, v in enumerate(model.variables)}
    return Solution(status, float(sf.c @ x), assignment, iterations, nodes, x)


def solve_lp(model: Model, *, max_iterations: int = MAX_PIVOTS,
             feasibility_tol: float = FEASIBILITY_TOL) -> Solution:
    """Solve the LP relaxation (integrality is ignored)."""
    sf = to_standard_form(model)
    res = simplex(sf.A, sf.senses, sf.b, sf.c, sf.lb, sf.ub, max_iterations)
    return _solution(model, sf, res.status, res.x, res.iterations, 0, feasibility_tol)


def branch_and_bound(sf: StandardForm, *, gap: float = GAP_TOL,
                     integrality_tol: float = INTEGRALITY_TOL, max_nodes: int = MAX_NODES,
                     max_iterations: int = MAX_PIVOTS):
    """Best-bound branch and bound on ``sf``.

    Returns ``(status, x, iterations, nodes)``.  Branches on the most
    fractional integral variable, lowest column index on ties.
    """
    A, senses, b, c = sf.A, sf.senses, sf.b, sf.c
    if sp.issparse(A):
        A = A.toarray()
    integer = np.nonzero(sf.integer)[0]
    iterations = 0

    def relax(lb, ub):
        nonlocal iterations
        res = simplex(A, senses, b, c, lb, ub, max_iterations)
        iterations += res.iterations
        return res

    lb0 = sf.lb.copy()
    ub0 = sf.ub.copy()
    lb0[integer] = np.ceil(lb0[integer] - integrality_tol)
    ub0[integer] = np.floor(ub0[integer] + integrality_tol)
    root = relax(lb0, ub0)
    if root.status is not Status.OPTIMAL:
        return root.status, None, iterations, 0

    counter = 0
    heap = [(root.objective, 0, counter, lb0, ub0, root.x)]
    best_x, best_obj = None, math.inf
    nodes = 0
    while heap:
        bound, neg_depth, _, lb, ub, x = heapq.heappop(heap)
        if bound >= best_obj - gap:
            break
        nodes += 1
        if nodes > max_nodes:
            return Status.ITERATION_LIMIT, best_x, iterations, nodes - 1
        xi = x[integer]
        frac = np.abs(xi - np.round(xi))
        if integer.size == 0 or frac.max() <= integrality_tol:
            if bound < best_obj:
                best_obj, best_x = bound, x
            continue
        k = int(np.argmax(frac))
        j = int(integer[k])
        for side in ("down", "up"):
            clb, cub = lb.copy(), ub.copy()
            if side == "down":
                cub[j] = math.floor(x[j])
            else:
                clb[j] = math.ceil(x[j])
            res = relax(clb, cub)
            if res.status is Status.ITERATION_LIMIT:
                return Status.ITERATION_LIMIT, best_x, iterations, nodes
            if res.status is Status.OPTIMAL and res.objective < best_obj - gap:
                counter += 1
                heapq.heappush(heap, (res.objective, neg_depth - 1, counter, clb, cub, res.x))

    if best_x is None:
        return Status.INFEASIBLE, None, iterations, nodes

    # polish: fix integers at their rounded values and re-solve the continuous part
    lb, ub = sf.lb.copy(), sf.ub.copy()
    lb[integer] = ub[integer] = np.round(best_x[integer])
    res = relax(lb, ub)
    if res.status is Status.OPTIMAL and res.objective <= best_obj + gap:
        best_x = res.x
    return Status.OPTIMAL, best_x, iterations, nodes


def solve_milp(model: Model, *, gap: float = GAP_TOL, integrality_tol: float = INTEGRALITY_TOL,
               max_nodes: int = MAX_NODES, max_iterations: int = MAX_PIVOTS,
               feasibility_tol: float = FEASIBILITY_TOL) -> Solution:
    sf = to_standard_form(model)
    status, x, iterations, nodes = branch_and_bound(
        sf, gap=gap, integrality_tol=integrality_tol, max_nodes=max_nodes,
        max_iterations=max_iterations,
    )
    return _solution(model, sf, status, x, iterations, nodes, feasibility_tol)


def solve(model: Model, **options) -> Solution:
    """Pick the MILP path when the model has integral variables."""
    if model.integral_variables:
        return solve_milp(model, **options)
    lp_options = {k: v for k, v in options.items() if k in ("max_iterations", "feasibility_tol")}
    return solve_lp(model, **lp_options)
