"""Dense two-phase primal simplex over nonnegative variables.

Solves  min c'x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.

Pricing is Dantzig (most-negative reduced cost) for speed; after a run of
degenerate pivots the pivot rule switches to Bland's rule, which guarantees
termination (no cycling). Pure-numpy tableau implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_TOL = 1e-9
_PIVOT_TOL = 1e-7
_DEGENERATE_LIMIT = 40


@dataclass
class LpResult:
    status: str          # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    obj: float


def _pivot(tableau: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    colvals = tableau[:, col].copy()
    colvals[row] = 0.0
    tableau -= np.outer(colvals, tableau[row])
    basis[row] = col


def _run_simplex(tableau: np.ndarray, basis: np.ndarray, n_cols: int,
                 max_iter: int) -> str:
    """Iterate to optimality on the given tableau; returns status."""
    degenerate_run = 0
    for _ in range(max_iter):
        costs = tableau[-1, :n_cols]
        if degenerate_run < _DEGENERATE_LIMIT:
            col = int(np.argmin(costs))
            if costs[col] >= -_TOL:
                return "optimal"
        else:
            # Bland's rule: lowest-index negative reduced cost
            neg = np.flatnonzero(costs < -_TOL)
            if neg.size == 0:
                return "optimal"
            col = int(neg[0])
        column = tableau[:-1, col]
        rhs = tableau[:-1, -1]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(column > _TOL, rhs / column, np.inf)
        row = int(np.argmin(ratios))
        if not np.isfinite(ratios[row]):
            return "unbounded"
        best = ratios[row]
        cand = np.flatnonzero(np.abs(ratios - best) <= _TOL * (1 + abs(best)))
        if degenerate_run >= _DEGENERATE_LIMIT:
            # Bland tie-break on the leaving variable: lowest basis index
            row = int(min(cand, key=lambda r: basis[r]))
        elif cand.size > 1:
            # stability tie-break: largest pivot magnitude
            row = int(cand[np.argmax(column[cand])])
        if ratios[row] <= _TOL:
            degenerate_run += 1
        else:
            degenerate_run = 0
        _pivot(tableau, basis, row, col)
    return "iteration_limit"


def solve_lp(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None,
             max_iter: int = 20000) -> LpResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    rows = []
    rhs = []
    senses = []
    if a_ub is not None and len(a_ub):
        for a, b in zip(np.asarray(a_ub, dtype=float),
                        np.asarray(b_ub, dtype=float)):
            rows.append(a)
            rhs.append(b)
            senses.append("<=")
    if a_eq is not None and len(a_eq):
        for a, b in zip(np.asarray(a_eq, dtype=float),
                        np.asarray(b_eq, dtype=float)):
            rows.append(a)
            rhs.append(b)
            senses.append("==")
    # keep the originals for final residual verification
    orig = [(r.copy(), rr, s) for r, rr, s in zip(rows, rhs, senses)]
    # row equilibration: scale every row to unit max-magnitude
    for i in range(len(rows)):
        scale = np.max(np.abs(rows[i]))
        if scale > 0:
            rows[i] = rows[i] / scale
            rhs[i] = rhs[i] / scale

    m = len(rows)
    if m == 0:
        # unconstrained nonnegative LP: bounded iff c >= 0
        if np.any(c < -_TOL):
            return LpResult("unbounded", None, -np.inf)
        return LpResult("optimal", np.zeros(n), 0.0)

    a = np.array(rows, dtype=float)
    b = np.array(rhs, dtype=float)

    # slack for every <= row; flip rows to b >= 0 afterwards
    n_slack = sum(1 for s in senses if s == "<=")
    a_full = np.zeros((m, n + n_slack))
    a_full[:, :n] = a
    slack_col = {}
    k = n
    for i, s in enumerate(senses):
        if s == "<=":
            a_full[i, k] = 1.0
            slack_col[i] = k
            k += 1
    flip = b < 0
    a_full[flip] *= -1.0
    b = np.abs(b)

    # basis: slack column where it survived the flip with +1, else artificial
    basis = np.full(m, -1, dtype=int)
    need_art = []
    for i in range(m):
        j = slack_col.get(i)
        if j is not None and a_full[i, j] > 0.5:
            basis[i] = j
        else:
            need_art.append(i)
    n_art = len(need_art)
    total = n + n_slack + n_art
    tableau = np.zeros((m + 1, total + 1))
    tableau[:m, :n + n_slack] = a_full
    tableau[:m, -1] = b
    for t, i in enumerate(need_art):
        tableau[i, n + n_slack + t] = 1.0
        basis[i] = n + n_slack + t

    if n_art:
        # phase 1: minimize the artificial sum
        tableau[-1, n + n_slack:total] = 1.0
        for i in range(m):
            if basis[i] >= n + n_slack:
                tableau[-1] -= tableau[i]
        status = _run_simplex(tableau, basis, total, max_iter)
        if status == "iteration_limit":
            return LpResult("numerical", None, np.nan)
        if status != "optimal" or tableau[-1, -1] < -1e-7:
            return LpResult("infeasible", None, np.inf)
        # drive leftover artificials out of the basis when possible
        for i in range(m):
            if basis[i] >= n + n_slack:
                row = tableau[i, :n + n_slack]
                cand = np.flatnonzero(np.abs(row) > _TOL)
                if cand.size:
                    _pivot(tableau, basis, i, int(cand[0]))
        tableau = np.delete(tableau, np.s_[n + n_slack:total], axis=1)
        total = n + n_slack
        tableau[-1, :] = 0.0

    # phase 2
    tableau[-1, :n] = c
    for i in range(m):
        if basis[i] < n and abs(c[basis[i]]) > 0:
            tableau[-1] -= c[basis[i]] * tableau[i]
    status = _run_simplex(tableau, basis, total, max_iter)
    if status == "unbounded":
        return LpResult("unbounded", None, -np.inf)
    if status != "optimal":
        return LpResult("numerical", None, np.nan)
    x = np.zeros(total)
    for i in range(m):
        if basis[i] < total:
            x[basis[i]] = tableau[i, -1]
    xs = x[:n]
    # residual verification against the unscaled system: a solve corrupted
    # by accumulated pivot error must not be reported as optimal
    for row, b_i, sense in orig:
        lhs = float(row @ xs)
        tol = 1e-6 * (1.0 + abs(b_i))
        if sense == "<=" and lhs > b_i + tol:
            return LpResult("numerical", None, np.nan)
        if sense == "==" and abs(lhs - b_i) > tol:
            return LpResult("numerical", None, np.nan)
    if np.any(xs < -1e-6):
        return LpResult("numerical", None, np.nan)
    return LpResult("optimal", xs, float(c @ xs))
