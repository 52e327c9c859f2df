"""Independent legality re-verification from raw coordinates, plus a greedy
shelf constructor used as the branch-and-bound warm start."""

from __future__ import annotations

import math

import numpy as np

from .bnb import PlacementSolution
from .milp import MilpModel, rotated_dims, rotated_pin_offset

_TOL = 1e-6


def placed_rect(block, x: float, y: float, rot: int, vi: int) -> tuple:
    var = block.variants[vi]
    w, h = rotated_dims(var.width, var.height, rot)
    return (x, y, x + w, y + h)


def placed_pin_center(block, x: float, y: float, rot: int, vi: int,
                      pin_name: str) -> tuple:
    var = block.variants[vi]
    pin = next(p for p in var.pins if p.name == pin_name)
    ox, oy = rotated_pin_offset(*pin.center, var.width, var.height, rot)
    return (x + ox, y + oy)


def evaluate_objective(blocks, nets, sol: PlacementSolution, weights=None,
                       d_halo: float = 2.0) -> float:
    """Objective recomputed from geometry: extents + weighted HPWL."""
    weights = dict(weights or {})
    by_id = {b.id: b for b in blocks}
    xmax = ymax = 0.0
    for bid, (x, y, rot, vi) in sol.positions.items():
        rect = placed_rect(by_id[bid], x, y, rot, vi)
        xmax = max(xmax, rect[2])
        ymax = max(ymax, rect[3])
    total = xmax + ymax
    for net in sorted(nets):
        pins = nets[net]
        if len(pins) < 2:
            continue
        pts = [placed_pin_center(by_id[bid], *sol.positions[bid], pn)
               for bid, pn in pins]
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        total += float(weights.get(net, 1.0)) * (
            max(xs) - min(xs) + max(ys) - min(ys))
    return total


def check_legal(sol: PlacementSolution, blocks, d_halo: float = 2.0,
                p_io: float = 70.0, pad_rules=None) -> list:
    """Re-verify non-overlap, extents, rotation/variant legality, and pad
    edge/pitch rules straight from coordinates. Empty list iff legal."""
    violations = []
    pad_rules = dict(pad_rules or {})
    by_id = {b.id: b for b in blocks}

    rects = {}
    for bid, (x, y, rot, vi) in sol.positions.items():
        blk = by_id.get(bid)
        if blk is None:
            violations.append(f"unknown block {bid!r}")
            continue
        if not (0 <= vi < len(blk.variants)):
            violations.append(f"{bid}: variant index {vi} out of range")
            continue
        if rot not in blk.rotations:
            violations.append(f"{bid}: rotation {rot} not allowed")
        if x < -_TOL or y < -_TOL:
            violations.append(f"{bid}: negative coordinate ({x:.3f},{y:.3f})")
        rects[bid] = placed_rect(blk, x, y, rot, vi)

    ids = sorted(rects)
    for i, a in enumerate(ids):
        ax0, ay0, ax1, ay1 = rects[a]
        for b in ids[i + 1:]:
            bx0, by0, bx1, by1 = rects[b]
            gap = 2.0 * d_halo
            sep_x = ax1 + gap <= bx0 + _TOL or bx1 + gap <= ax0 + _TOL
            sep_y = ay1 + gap <= by0 + _TOL or by1 + gap <= ay0 + _TOL
            if not (sep_x or sep_y):
                violations.append(f"overlap: {a} and {b} (halo-expanded)")

    xmax = max((r[2] for r in rects.values()), default=0.0)
    ymax = max((r[3] for r in rects.values()), default=0.0)

    for bid, (side, k) in sol.pad_sides.items():
        blk = by_id.get(bid)
        if blk is None or bid not in rects:
            continue
        allowed = tuple(pad_rules.get(bid, ("N", "E", "S", "W")))
        if side not in allowed:
            violations.append(f"pad {bid}: side {side} not in {allowed}")
            continue
        x0, y0, x1, y1 = rects[bid]
        if side in ("N", "S"):
            coord = x0
            edge_ok = (abs(y1 - ymax) <= _TOL if side == "N"
                       else abs(y0) <= _TOL)
        else:
            coord = y0
            edge_ok = (abs(x1 - xmax) <= _TOL if side == "E"
                       else abs(x0) <= _TOL)
        if not edge_ok:
            violations.append(f"pad {bid}: not flush with the {side} edge")
        if abs(coord - k * p_io) > _TOL:
            violations.append(
                f"pad {bid}: offset {coord:.3f} is not the pitch multiple "
                f"{k}*{p_io}")
    return violations


def _connectivity_order(core, nets, weights):
    """Breadth-first order over the shared-net graph so connected blocks
    land on adjacent shelf slots."""
    weights = dict(weights or {})
    adj = {b.id: set() for b in core}
    core_ids = set(adj)
    score = {bid: 0.0 for bid in adj}
    for net, pins in nets.items():
        members = [bid for bid, _ in pins if bid in core_ids]
        w = float(weights.get(net, 1.0))
        for bid in members:
            score[bid] += w
        for a in members:
            for b in members:
                if a != b:
                    adj[a].add(b)
    order = []
    seen = set()
    remaining = sorted(adj, key=lambda b: (-score[b], b))
    for start in remaining:
        if start in seen:
            continue
        queue = [start]
        seen.add(start)
        while queue:
            cur = queue.pop(0)
            order.append(cur)
            for nxt in sorted(adj[cur]):
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
    by_id = {b.id: b for b in core}
    return [by_id[bid] for bid in order]


def greedy_shelf(model: MilpModel, blocks, nets, weights=None) -> \
        PlacementSolution | None:
    """Deterministic shelf packing plus edge pads: a feasible warm start.

    Tries a few block orders and shelf widths, keeps the best construction
    that verifies against the model row by row; returns None when none do.
    """
    meta = model.meta
    gap = 2.0 * meta["d_halo"]
    core = [b for b in blocks if b.kind != "pad"]
    dims = {}
    for b in blocks:
        rot = b.rotations[0]
        w, h = rotated_dims(b.variants[0].width, b.variants[0].height, rot)
        dims[b.id] = (w, h, rot)
    area = sum((dims[b.id][0] + gap) * (dims[b.id][1] + gap) for b in core)
    w_floor = max((dims[b.id][0] for b in core), default=1.0)
    orders = [sorted(core, key=lambda b: (-dims[b.id][1], b.id)),
              _connectivity_order(core, nets, weights)]
    best = None
    for order in orders:
        for mult in (1.0, 1.4, 2.0):
            shelf_w = max(math.sqrt(area) * mult, w_floor)
            sol = _shelf_construct(model, blocks, nets, order, dims,
                                   shelf_w)
            if sol is not None and (best is None
                                    or sol.objective < best.objective):
                best = sol
    return best


def _shelf_construct(model: MilpModel, blocks, nets, order, dims,
                     shelf_w) -> PlacementSolution | None:
    meta = model.meta
    d_halo = meta["d_halo"]
    p_io = meta["p_io"]
    gap = 2.0 * d_halo
    by_id = {b.id: b for b in blocks}
    pads = [b for b in blocks if b.kind == "pad"]
    core = [b for b in blocks if b.kind != "pad"]

    pad_side_of = {}
    for b in pads:
        us = meta["u"].get(b.id, {})
        pad_side_of[b.id] = next(iter(us)) if us else "N"
    pad_size = pads[0].variants[0].width if pads else 0.0
    off_x = pad_size + gap if any(s == "W" for s in pad_side_of.values()) \
        else 0.0
    off_y = pad_size + gap if any(s == "S" for s in pad_side_of.values()) \
        else 0.0

    positions = {}
    cx, cy, shelf_h = 0.0, 0.0, 0.0
    for b in order:
        w, h, rot = dims[b.id]
        if cx > 0.0 and cx + w > shelf_w:
            cx = 0.0
            cy += shelf_h + gap
            shelf_h = 0.0
        positions[b.id] = (off_x + cx, off_y + cy, rot, 0)
        cx += w + gap
        shelf_h = max(shelf_h, h)

    core_x1 = max((positions[b.id][0] + dims[b.id][0] for b in core),
                  default=off_x)
    core_y1 = max((positions[b.id][1] + dims[b.id][1] for b in core),
                  default=off_y)

    # pitch slots start at k=1 so corner pads cannot collide
    counters = {s: 1 for s in ("N", "E", "S", "W")}
    k_of = {}
    for b in sorted(pads, key=lambda b: b.id):
        side = pad_side_of[b.id]
        k_of[b.id] = counters[side]
        counters[side] += 1

    need_x = max(core_x1 + (gap + pad_size
                            if any(s == "E" for s in pad_side_of.values())
                            else 0.0),
                 max((k_of[b.id] * p_io + pad_size for b in pads
                      if pad_side_of[b.id] in ("N", "S")), default=0.0))
    need_y = max(core_y1 + (gap + pad_size
                            if any(s == "N" for s in pad_side_of.values())
                            else 0.0),
                 max((k_of[b.id] * p_io + pad_size for b in pads
                      if pad_side_of[b.id] in ("E", "W")), default=0.0))

    pad_assign = {}
    for b in pads:
        side, k = pad_side_of[b.id], k_of[b.id]
        if side == "N":
            positions[b.id] = (k * p_io, need_y - pad_size, 0, 0)
        elif side == "S":
            positions[b.id] = (k * p_io, 0.0, 0, 0)
        elif side == "E":
            positions[b.id] = (need_x - pad_size, k * p_io, 0, 0)
        else:
            positions[b.id] = (0.0, k * p_io, 0, 0)
        pad_assign[b.id] = (side, k)

    # assemble the full variable vector and verify it against the model
    x = np.zeros(model.n_vars)
    for bid, (px, py, rot, vi) in positions.items():
        x[meta["x"][bid]] = px
        x[meta["y"][bid]] = py
        x[meta["z"][(bid, vi, rot)]] = 1.0
    x[meta["xmax"]] = need_x
    x[meta["ymax"]] = need_y
    for (a, b), ds in meta["d"].items():
        ra = placed_rect(by_id[a], *positions[a])
        rb = placed_rect(by_id[b], *positions[b])
        if ra[2] + gap <= rb[0] + _TOL:
            x[ds[0]] = 1.0
        elif rb[2] + gap <= ra[0] + _TOL:
            x[ds[1]] = 1.0
        elif ra[3] + gap <= rb[1] + _TOL:
            x[ds[2]] = 1.0
        elif rb[3] + gap <= ra[1] + _TOL:
            x[ds[3]] = 1.0
        else:
            return None
    for bid, us in meta["u"].items():
        side, k = pad_assign[bid]
        if side not in us:
            return None
        x[us[side]] = 1.0
        x[meta["k"][bid]] = k
    for net, (lox, hix, loy, hiy) in meta["hpwl"].items():
        pts = [placed_pin_center(by_id[bid], *positions[bid], pn)
               for bid, pn in nets[net]]
        x[lox] = min(p[0] for p in pts)
        x[hix] = max(p[0] for p in pts)
        x[loy] = min(p[1] for p in pts)
        x[hiy] = max(p[1] for p in pts)

    for coeffs, sense, rhs, _tag in model.rows:
        lhs = sum(v * x[j] for j, v in coeffs.items())
        if sense == "<=" and lhs > rhs + 1e-6:
            return None
        if sense == ">=" and lhs < rhs - 1e-6:
            return None
        if sense == "==" and abs(lhs - rhs) > 1e-6:
            return None

    obj = float(sum(v * x[j] for j, v in model.obj.items()))
    return PlacementSolution(positions=positions, pad_sides=pad_assign,
                             objective=obj, gap=math.inf,
                             status="greedy", x=x)

def refine_shelf(model: MilpModel, blocks, nets, weights=None,
                 max_evals: int = 600) -> PlacementSolution | None:
    """Deterministic first-improvement local search around the shelf
    constructor: swaps shelf order, flips block rotations, and re-packs at
    a few shelf widths, keeping the best model-verified construction."""
    meta = model.meta
    gap = 2.0 * meta["d_halo"]
    core = [b for b in blocks if b.kind != "pad"]
    if not core:
        return greedy_shelf(model, blocks, nets, weights)
    by_id = {b.id: b for b in core}

    def dims_for(rots):
        d = {}
        for b in core:
            rot = rots[b.id]
            w, h = rotated_dims(b.variants[0].width, b.variants[0].height,
                                rot)
            d[b.id] = (w, h, rot)
        return d

    evals = 0

    def construct(order_ids, rots):
        nonlocal evals
        dims = dims_for(rots)
        area = sum((dims[bid][0] + gap) * (dims[bid][1] + gap)
                   for bid in order_ids)
        w_floor = max(dims[bid][0] for bid in order_ids)
        best = None
        for mult in (1.0, 1.4, 2.0):
            evals += 1
            shelf_w = max(math.sqrt(area) * mult, w_floor)
            sol = _shelf_construct(model, blocks, nets,
                                   [by_id[bid] for bid in order_ids],
                                   dims, shelf_w)
            if sol is not None and (best is None
                                    or sol.objective < best.objective):
                best = sol
        return best

    order = [b.id for b in _connectivity_order(core, nets, weights)]
    rots = {b.id: b.rotations[0] for b in core}
    best = construct(order, rots)
    improved = True
    while improved and evals < max_evals:
        improved = False
        for i in range(len(order)):
            for j in range(i + 1, len(order)):
                if evals >= max_evals:
                    break
                cand = list(order)
                cand[i], cand[j] = cand[j], cand[i]
                sol = construct(cand, rots)
                if sol is not None and (best is None
                                        or sol.objective
                                        < best.objective - _TOL):
                    best, order, improved = sol, cand, True
        for bid in order:
            for rot in by_id[bid].rotations[1:]:
                if evals >= max_evals:
                    break
                cand = dict(rots)
                cand[bid] = rot
                sol = construct(order, cand)
                if sol is not None and (best is None
                                        or sol.objective
                                        < best.objective - _TOL):
                    best, rots, improved = sol, cand, True
    return best
