"""0-1 MILP placement model: variant/rotation selection, big-M non-overlap
with halos, chip-extent area proxy, weighted HPWL, pad edge/pitch rules.

Objective: (X_max + Y_max) + sum_n w_n * HPWL(n). Internal blocks place on
continuous coordinates; pads snap to pitch multiples along their edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import InfeasibleConstraint

CONT, BINARY, INTEGER = "c", "b", "i"
SIDES = ("N", "E", "S", "W")


@dataclass
class MilpModel:
    """Sparse linear model: min c'x s.t. rows, with typed variables x >= lb."""

    var_names: list = field(default_factory=list)
    var_kinds: list = field(default_factory=list)
    var_ub: list = field(default_factory=list)      # None = unbounded
    obj: dict = field(default_factory=dict)          # idx -> coefficient
    rows: list = field(default_factory=list)         # (coeffs, sense, rhs, tag)
    meta: dict = field(default_factory=dict)

    def add_var(self, name: str, kind: str = CONT, ub=None) -> int:
        self.var_names.append(name)
        self.var_kinds.append(kind)
        self.var_ub.append(1.0 if kind == BINARY else ub)
        return len(self.var_names) - 1

    def add_constr(self, coeffs: dict, sense: str, rhs: float,
                   tag: str = "") -> None:
        if sense not in ("<=", ">=", "=="):
            raise ValueError(f"bad sense {sense!r}")
        self.rows.append((dict(coeffs), sense, rhs, tag))

    def set_obj(self, idx: int, coef: float) -> None:
        if coef:
            self.obj[idx] = self.obj.get(idx, 0.0) + coef

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_constrs(self) -> int:
        return len(self.rows)

    def integral_vars(self) -> list:
        return [j for j, k in enumerate(self.var_kinds) if k != CONT]


def rotated_dims(width: float, height: float, rot: int) -> tuple:
    return (height, width) if rot in (90, 270) else (width, height)


def rotated_pin_offset(cx: float, cy: float, width: float, height: float,
                       rot: int) -> tuple:
    """Pin center offset after rotating the footprint into the first
    quadrant."""
    if rot == 0:
        return cx, cy
    if rot == 90:
        return height - cy, cx
    if rot == 180:
        return width - cx, height - cy
    if rot == 270:
        return cy, width - cx
    raise ValueError(f"illegal rotation {rot}")


def big_m_value(blocks, d_halo: float, p_io: float = 70.0) -> float:
    """Chip-extent cap: sum of maximum block dimensions plus one halo gap
    per block, plus a pad-pitch allowance (all pads on one side at pitch
    slots 1..n needs n*p_io + pad size of edge length). A single-row
    arrangement with pads strung along one edge always fits, so capping the
    extents at this value never cuts off the optimum; it also makes the
    big-M disjunction coefficients (cap + gap) valid deactivators."""
    total = 0.0
    pad_size = 0.0
    n_pads = 0
    for blk in blocks:
        total += max(max(v.width, v.height) for v in blk.variants)
        if blk.kind == "pad":
            n_pads += 1
            pad_size = max(pad_size, blk.variants[0].width)
    return total + 2.0 * d_halo * len(blocks) + n_pads * p_io + pad_size


def build_milp(blocks, nets, weights=None, d_halo: float = 2.0,
               p_io: float = 70.0, pad_rules=None) -> MilpModel:
    """Assemble the placement MILP.

    blocks: list of PrimitiveBlock. nets: dict net -> [(block_id, pin_name)].
    weights: dict net -> omega (default 1). pad_rules: dict block_id ->
    iterable of allowed sides for pad blocks.
    """
    if not blocks:
        raise ValueError("at least one block required")
    weights = dict(weights or {})
    pad_rules = dict(pad_rules or {})
    model = MilpModel()
    m_ext = big_m_value(blocks, d_halo, p_io)  # extent / coordinate cap
    m_big = m_ext + 2.0 * d_halo              # disjunction deactivator
    by_id = {blk.id: blk for blk in blocks}
    if len(by_id) != len(blocks):
        raise ValueError("duplicate block ids")

    # coordinates and chip extents
    x_var, y_var = {}, {}
    for blk in blocks:
        x_var[blk.id] = model.add_var(f"x[{blk.id}]")
        y_var[blk.id] = model.add_var(f"y[{blk.id}]")
    xmax = model.add_var("X_max", ub=m_ext)
    ymax = model.add_var("Y_max", ub=m_ext)
    model.set_obj(xmax, 1.0)
    model.set_obj(ymax, 1.0)

    # variant x rotation selection binaries; effective dims as expressions
    z_var = {}       # (id, vi, rot) -> var idx
    eff_w = {}       # id -> dict idx -> coef
    eff_h = {}
    for blk in blocks:
        sel = {}
        wexpr, hexpr = {}, {}
        for vi, var in enumerate(blk.variants):
            for rot in blk.rotations:
                j = model.add_var(f"z[{blk.id},{vi},{rot}]", BINARY)
                z_var[(blk.id, vi, rot)] = j
                sel[j] = 1.0
                w_eff, h_eff = rotated_dims(var.width, var.height, rot)
                wexpr[j] = w_eff
                hexpr[j] = h_eff
        model.add_constr(sel, "==", 1.0, tag=f"one[{blk.id}]")
        eff_w[blk.id] = wexpr
        eff_h[blk.id] = hexpr

    # chip extents dominate every block's far edge; near edge >= 0 is
    # implied by x, y >= 0
    for blk in blocks:
        row = {x_var[blk.id]: 1.0, xmax: -1.0}
        for j, w in eff_w[blk.id].items():
            row[j] = row.get(j, 0.0) + w
        model.add_constr(row, "<=", 0.0, tag=f"extx[{blk.id}]")
        row = {y_var[blk.id]: 1.0, ymax: -1.0}
        for j, h in eff_h[blk.id].items():
            row[j] = row.get(j, 0.0) + h
        model.add_constr(row, "<=", 0.0, tag=f"exty[{blk.id}]")

    # pairwise four-way big-M non-overlap; footprints expanded by d_halo
    gap = 2.0 * d_halo
    d_var = {}
    pairs = [(blocks[i].id, blocks[j].id)
             for i in range(len(blocks)) for j in range(i + 1, len(blocks))]
    for a, b in pairs:
        ds = [model.add_var(f"d[{a},{b},{k}]", BINARY) for k in range(4)]
        d_var[(a, b)] = ds
        model.add_constr({d: 1.0 for d in ds}, "==", 1.0,
                         tag=f"disj[{a},{b}]")
        # k=0: a left of b;  x_a + W_a + gap <= x_b + M(1 - d0)
        row = {x_var[a]: 1.0, x_var[b]: -1.0, ds[0]: m_big}
        for j, w in eff_w[a].items():
            row[j] = row.get(j, 0.0) + w
        model.add_constr(row, "<=", m_big - gap, tag=f"nov0[{a},{b}]")
        # k=1: b left of a
        row = {x_var[b]: 1.0, x_var[a]: -1.0, ds[1]: m_big}
        for j, w in eff_w[b].items():
            row[j] = row.get(j, 0.0) + w
        model.add_constr(row, "<=", m_big - gap, tag=f"nov1[{a},{b}]")
        # k=2: a below b
        row = {y_var[a]: 1.0, y_var[b]: -1.0, ds[2]: m_big}
        for j, h in eff_h[a].items():
            row[j] = row.get(j, 0.0) + h
        model.add_constr(row, "<=", m_big - gap, tag=f"nov2[{a},{b}]")
        # k=3: b below a
        row = {y_var[b]: 1.0, y_var[a]: -1.0, ds[3]: m_big}
        for j, h in eff_h[b].items():
            row[j] = row.get(j, 0.0) + h
        model.add_constr(row, "<=", m_big - gap, tag=f"nov3[{a},{b}]")

    # pin-coordinate expressions: x_i + sum_z z * rotated_offset
    def pin_exprs(block_id: str, pin_name: str):
        blk = by_id[block_id]
        ex = {x_var[block_id]: 1.0}
        ey = {y_var[block_id]: 1.0}
        for vi, var in enumerate(blk.variants):
            pin = next(p for p in var.pins if p.name == pin_name)
            cx, cy = pin.center
            for rot in blk.rotations:
                ox, oy = rotated_pin_offset(cx, cy, var.width, var.height,
                                            rot)
                j = z_var[(block_id, vi, rot)]
                if ox:
                    ex[j] = ex.get(j, 0.0) + ox
                if oy:
                    ey[j] = ey.get(j, 0.0) + oy
        return ex, ey

    # HPWL bound variables per net
    hpwl_vars = {}
    for net in sorted(nets):
        pins = nets[net]
        if len(pins) < 2:
            continue
        w_n = float(weights.get(net, 1.0))
        lox = model.add_var(f"hx-[{net}]")
        hix = model.add_var(f"hx+[{net}]")
        loy = model.add_var(f"hy-[{net}]")
        hiy = model.add_var(f"hy+[{net}]")
        hpwl_vars[net] = (lox, hix, loy, hiy)
        model.set_obj(lox, -w_n)
        model.set_obj(hix, w_n)
        model.set_obj(loy, -w_n)
        model.set_obj(hiy, w_n)
        for block_id, pin_name in pins:
            ex, ey = pin_exprs(block_id, pin_name)
            model.add_constr({lox: 1.0, **{k: -v for k, v in ex.items()}},
                             "<=", 0.0, tag=f"hpwl[{net}]")
            model.add_constr({hix: -1.0, **ex}, "<=", 0.0,
                             tag=f"hpwl[{net}]")
            model.add_constr({loy: 1.0, **{k: -v for k, v in ey.items()}},
                             "<=", 0.0, tag=f"hpwl[{net}]")
            model.add_constr({hiy: -1.0, **ey}, "<=", 0.0,
                             tag=f"hpwl[{net}]")

    # pad side one-hots + pitch integers
    u_var, k_var = {}, {}
    for blk in blocks:
        if blk.kind != "pad":
            continue
        allowed = tuple(pad_rules.get(blk.id, SIDES))
        if not allowed:
            raise InfeasibleConstraint(
                f"pad {blk.id!r} has an empty allowed-side set")
        size = blk.variants[0].width
        us = {}
        for side in SIDES:
            if side not in allowed:
                continue
            u = model.add_var(f"u[{blk.id},{side}]", BINARY)
            us[side] = u
        u_var[blk.id] = us
        model.add_constr({u: 1.0 for u in us.values()}, "==", 1.0,
                         tag=f"padside[{blk.id}]")
        kx = model.add_var(f"k[{blk.id}]", INTEGER,
                           ub=float(math.floor(m_ext / p_io)))
        k_var[blk.id] = kx
        for side, u in us.items():
            if side in ("N", "S"):
                # x pitch-snapped; y flush with the chip edge
                coord, far, ext = x_var[blk.id], y_var[blk.id], ymax
            else:
                coord, far, ext = y_var[blk.id], x_var[blk.id], xmax
            model.add_constr({coord: 1.0, kx: -p_io, u: m_big}, "<=", m_big,
                             tag=f"pitch+[{blk.id},{side}]")
            model.add_constr({coord: -1.0, kx: p_io, u: m_big}, "<=", m_big,
                             tag=f"pitch-[{blk.id},{side}]")
            if side in ("N", "E"):
                # far edge flush with the extent: far + size = ext
                model.add_constr({far: 1.0, ext: -1.0, u: m_big}, "<=",
                                 m_big - size, tag=f"edge+[{blk.id},{side}]")
                model.add_constr({far: -1.0, ext: 1.0, u: m_big}, "<=",
                                 m_big + size, tag=f"edge-[{blk.id},{side}]")
            else:
                # near edge at the origin axis
                model.add_constr({far: 1.0, u: m_big}, "<=", m_big,
                                 tag=f"edge0[{blk.id},{side}]")

    model.meta = {
        "x": x_var, "y": y_var, "z": z_var, "d": d_var,
        "xmax": xmax, "ymax": ymax, "hpwl": hpwl_vars,
        "u": u_var, "k": k_var, "big_m": m_big,
        "d_halo": d_halo, "p_io": p_io,
        "block_ids": [blk.id for blk in blocks],
        "weights": {n: float(weights.get(n, 1.0)) for n in nets},
    }
    return model
