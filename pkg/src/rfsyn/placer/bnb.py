"""Branch-and-bound over the placement MILP's binaries and integers.

Each node solves the LP relaxation with the in-house primal simplex.
Branching picks the most-fractional integral variable (ties by lowest
index); exploration is depth-first with a best-bound reorder every 1000
nodes. The reported gap is (incumbent - best bound) / |incumbent|.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import Infeasible
from .milp import MilpModel, SIDES, rotated_dims, rotated_pin_offset
from .simplex import solve_lp

_INT_TOL = 1e-6


@dataclass
class PlacementSolution:
    positions: dict                 # id -> (x, y, rotation, variant_index)
    pad_sides: dict                 # id -> (side, k)
    objective: float
    gap: float
    status: str                     # "optimal" | "time_limit"
    nodes: int = 0
    x: np.ndarray | None = None


class _Arrays:
    """Dense immutable base matrices for one model."""

    def __init__(self, model: MilpModel):
        n = model.n_vars
        self.n = n
        self.c = np.zeros(n)
        for j, v in model.obj.items():
            self.c[j] = v
        ub_rows, ub_rhs = [], []
        eq_rows, eq_rhs = [], []
        for coeffs, sense, rhs, _tag in model.rows:
            row = np.zeros(n)
            for j, v in coeffs.items():
                row[j] = v
            if sense == "<=":
                ub_rows.append(row)
                ub_rhs.append(rhs)
            elif sense == ">=":
                ub_rows.append(-row)
                ub_rhs.append(-rhs)
            else:
                eq_rows.append(row)
                eq_rhs.append(rhs)
        for j, ub in enumerate(model.var_ub):
            if ub is not None:
                row = np.zeros(n)
                row[j] = 1.0
                ub_rows.append(row)
                ub_rhs.append(float(ub))
        self.a_ub = np.array(ub_rows) if ub_rows else np.zeros((0, n))
        self.b_ub = np.array(ub_rhs)
        self.a_eq = np.array(eq_rows) if eq_rows else None
        self.b_eq = np.array(eq_rhs) if eq_rows else None

    def solve_node(self, bounds: dict):
        """LP with extra per-variable bounds {j: (lb, ub)}."""
        extra_rows, extra_rhs = [], []
        for j, (lb, ub) in bounds.items():
            if lb is not None and lb > 0:
                row = np.zeros(self.n)
                row[j] = -1.0
                extra_rows.append(row)
                extra_rhs.append(-lb)
            if ub is not None:
                row = np.zeros(self.n)
                row[j] = 1.0
                extra_rows.append(row)
                extra_rhs.append(ub)
        if extra_rows:
            a_ub = np.vstack([self.a_ub, extra_rows])
            b_ub = np.concatenate([self.b_ub, extra_rhs])
        else:
            a_ub, b_ub = self.a_ub, self.b_ub
        return solve_lp(self.c, a_ub, b_ub, self.a_eq, self.b_eq)


def _most_fractional(x: np.ndarray, int_vars: list):
    best_j, best_f = None, _INT_TOL
    for j in int_vars:
        frac = abs(x[j] - round(x[j]))
        if frac > best_f + 1e-12:
            best_f, best_j = frac, j
    return best_j


def extract_solution(model: MilpModel, x: np.ndarray, objective: float,
                     gap: float, status: str,
                     nodes: int = 0) -> PlacementSolution:
    meta = model.meta
    positions = {}
    for bid in meta["block_ids"]:
        choice = None
        for (zbid, vi, rot), j in meta["z"].items():
            if zbid == bid and x[j] > 0.5:
                choice = (vi, rot)
                break
        vi, rot = choice if choice else (0, 0)
        positions[bid] = (float(x[meta["x"][bid]]),
                          float(x[meta["y"][bid]]), rot, vi)
    pad_sides = {}
    for bid, us in meta["u"].items():
        side = next((s for s, j in us.items() if x[j] > 0.5), None)
        pad_sides[bid] = (side, int(round(x[meta["k"][bid]])))
    return PlacementSolution(positions=positions, pad_sides=pad_sides,
                             objective=float(objective), gap=float(gap),
                             status=status, nodes=nodes, x=x)


def _first_violated_exactly_one(model: MilpModel) -> str | None:
    for coeffs, sense, rhs, tag in model.rows:
        if sense == "==" and tag.startswith(("one[", "disj[", "padside[")):
            cap = sum(model.var_ub[j] if model.var_ub[j] is not None
                      else math.inf for j in coeffs)
            if cap < rhs - 1e-9:
                return tag
    return None


def solve(model: MilpModel, gap: float = 1e-3,
          time_limit: float | None = None,
          incumbent: PlacementSolution | None = None) -> PlacementSolution:
    """Exact solve to the requested gap, or best-found at the time limit."""
    arrays = _Arrays(model)
    int_vars = model.integral_vars()
    t0 = time.monotonic()

    root = arrays.solve_node({})
    if root.status == "infeasible":
        hint = _first_violated_exactly_one(model)
        raise Infeasible(
            "placement model infeasible"
            + (f" (exactly-one set {hint} cannot reach 1)" if hint
               else " (LP relaxation has no feasible point)"))
    if root.status == "unbounded":
        raise Infeasible("placement model is unbounded; missing extents")

    best_x = incumbent.x if incumbent is not None else None
    best_obj = incumbent.objective if incumbent is not None else math.inf

    if root.status == "numerical":
        # the relaxation could not be solved reliably: no valid bound exists
        if best_x is None:
            raise Infeasible(
                "root relaxation numerically unresolved and no warm start")
        return extract_solution(model, best_x, best_obj, math.inf,
                                "time_limit", 0)

    # stack entries: (lp_bound, depth, bounds); DFS on the tail
    stack = [(root.obj, 0, {})]
    nodes = 0
    dropped_bounds = []   # parent bounds of numerically unresolved nodes

    def current_gap():
        if not math.isfinite(best_obj):
            return math.inf
        open_bounds = [b for b, _, _ in stack] + dropped_bounds
        bound = min(open_bounds, default=best_obj)
        bound = min(bound, best_obj)
        denom = max(abs(best_obj), 1e-12)
        return max(0.0, (best_obj - bound) / denom)

    status = "optimal"
    while stack:
        if time_limit is not None and time.monotonic() - t0 > time_limit:
            status = "time_limit"
            break
        if nodes and nodes % 1000 == 0:
            stack.sort(key=lambda e: -e[0])  # best bound explored next
        bound, depth, nb = stack.pop()
        if bound >= best_obj - 1e-9:
            continue
        res = arrays.solve_node(nb)
        nodes += 1
        if res.status == "numerical":
            # cannot bound this subtree; keep its parent bound so the
            # reported gap stays valid
            dropped_bounds.append(bound)
            continue
        if res.status != "optimal":
            continue
        if res.obj >= best_obj - 1e-9:
            continue
        j = _most_fractional(res.x, int_vars)
        if j is None:
            best_obj = res.obj
            best_x = res.x
            if current_gap() <= gap:
                break
            continue
        lo = math.floor(res.x[j] + _INT_TOL)
        # children pushed so the more promising round is explored first
        up = dict(nb)
        up[j] = (lo + 1.0, nb.get(j, (None, None))[1])
        down = dict(nb)
        down[j] = (nb.get(j, (None, None))[0], float(lo))
        frac = res.x[j] - lo
        order = [(down, up) if frac < 0.5 else (up, down)][0]
        stack.append((res.obj, depth + 1, order[1]))
        stack.append((res.obj, depth + 1, order[0]))
        if current_gap() <= gap:
            break

    if best_x is None:
        raise Infeasible("no integral solution found within the limits")
    final_gap = current_gap()
    if final_gap > gap:
        status = "time_limit"
    sol = extract_solution(model, best_x, best_obj, final_gap, status,
                           nodes)
    return sol
