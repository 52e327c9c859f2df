"""Placement engine tests: simplex kernel, MILP model shape, exact small
instances against hand geometry and exhaustive enumeration, legality
re-verification, and determinism.

Expected-value provenance
-------------------------
[TRIVIAL]  direct consequences of the definitions (hand geometry).
[DERIVED]  frozen from independent oracles: scipy.optimize.linprog for the
           LP kernel, and full enumeration of all discrete assignments with
           a scipy coordinate LP per assignment for small placements.
"""

import math

import numpy as np
import pytest
from scipy.optimize import linprog

from rfsyn.errors import Infeasible, InfeasibleConstraint
from rfsyn.placer import bnb, legal, milp, simplex
from rfsyn.primitives import Pin, PrimitiveBlock, Variant


# ---------------------------------------------------------------------------
# helpers


def simple_block(bid, w, h, kind="capacitor", rotations=(0,), pins=(),
                 variants_dims=None):
    """Rectangular block with optional extra variants and named pins."""
    def make_variant(wv, hv, tag):
        pv = tuple(Pin(name, "M7", min(cx, wv - 0.5) - 0.5,
                       min(cy, hv - 0.5) - 0.5,
                       min(cx, wv - 0.5) + 0.5, min(cy, hv - 0.5) + 0.5)
                   for name, cx, cy in pins)
        return Variant(wv, hv, pv, tag=tag)
    dims = [(w, h)] + list(variants_dims or [])
    variants = tuple(make_variant(wv, hv, f"v{i}")
                     for i, (wv, hv) in enumerate(dims))
    return PrimitiveBlock(id=bid, kind=kind, variants=variants,
                          rotations=rotations)


def pad_block(bid):
    pin = Pin("PAD", "M9", 20.0, 20.0, 50.0, 50.0)
    return PrimitiveBlock(id=bid, kind="pad",
                          variants=(Variant(70.0, 70.0, (pin,), tag="pad"),),
                          rotations=(0,))


def solve_instance(blocks, nets=None, weights=None, d_halo=2.0,
                   p_io=70.0, pad_rules=None, gap=1e-3, time_limit=None):
    model = milp.build_milp(blocks, nets or {}, weights, d_halo=d_halo,
                            p_io=p_io, pad_rules=pad_rules)
    warm = legal.greedy_shelf(model, blocks, nets or {}, weights)
    return model, bnb.solve(model, gap=gap, time_limit=time_limit,
                            incumbent=warm)


# ---------------------------------------------------------------------------
# simplex kernel vs scipy linprog  [DERIVED]


class TestSimplex:
    def test_fuzz_against_scipy(self):
        """Random small LPs: status agreement and objective to 1e-6."""
        rng = np.random.default_rng(0)
        agree = 0
        for _ in range(300):
            n = int(rng.integers(2, 7))
            m = int(rng.integers(1, 9))
            c = rng.normal(size=n)
            a_ub = rng.normal(size=(m, n))
            b_ub = rng.normal(size=m) + 1.0
            use_eq = rng.random() < 0.4
            a_eq = rng.normal(size=(1, n)) if use_eq else None
            b_eq = rng.normal(size=1) if use_eq else None
            ours = simplex.solve_lp(c, a_ub, b_ub, a_eq, b_eq)
            ref = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                          bounds=(0, None), method="highs")
            if ref.status == 0:
                assert ours.status == "optimal", \
                    f"scipy optimal but ours {ours.status}"
                assert ours.obj == pytest.approx(ref.fun, abs=1e-6, rel=1e-6)
            elif ref.status == 2:
                assert ours.status == "infeasible"
            elif ref.status == 3:
                assert ours.status == "unbounded"
            agree += 1
        assert agree == 300

    def test_degenerate_lp_terminates(self):
        """Highly degenerate LP must terminate (Bland fallback)."""
        # classic cycling-prone structure (Beale-like)
        c = np.array([-0.75, 150.0, -0.02, 6.0])
        a_ub = np.array([[0.25, -60.0, -0.04, 9.0],
                         [0.5, -90.0, -0.02, 3.0],
                         [0.0, 0.0, 1.0, 0.0]])
        b_ub = np.array([0.0, 0.0, 1.0])
        ours = simplex.solve_lp(c, a_ub, b_ub)
        ref = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=(0, None),
                      method="highs")
        assert ours.status == "optimal"
        assert ours.obj == pytest.approx(ref.fun, abs=1e-9)

    def test_infeasible(self):
        res = simplex.solve_lp([1.0], a_ub=[[-1.0]], b_ub=[-5.0],
                               a_eq=[[1.0]], b_eq=[1.0])
        assert res.status == "infeasible"

    def test_unbounded(self):
        res = simplex.solve_lp([-1.0], a_ub=[[0.0]], b_ub=[1.0])
        assert res.status == "unbounded"

    def test_no_constraints(self):
        res = simplex.solve_lp([1.0, 2.0])
        assert res.status == "optimal"
        assert res.obj == 0.0


# ---------------------------------------------------------------------------
# model construction


class TestModelShape:
    def test_rotated_pin_offset(self):
        # [TRIVIAL] pin at (1, 2) in a 10x4 footprint
        assert milp.rotated_pin_offset(1, 2, 10, 4, 0) == (1, 2)
        assert milp.rotated_pin_offset(1, 2, 10, 4, 90) == (2, 1)
        assert milp.rotated_pin_offset(1, 2, 10, 4, 180) == (9, 2)
        assert milp.rotated_pin_offset(1, 2, 10, 4, 270) == (2, 9)

    def test_big_m_is_extent_cap(self):
        # [TRIVIAL] sum of max dims + 2*d_halo per block
        blocks = [simple_block("a", 10, 4), simple_block("b", 3, 7)]
        assert milp.big_m_value(blocks, 2.0) == 10 + 7 + 2 * 2.0 * 2

    def test_disjunction_binaries_count(self):
        """[TRIVIAL] 3 blocks -> 3 pairs x 4 disjunction binaries."""
        blocks = [simple_block(f"b{i}", 10, 10) for i in range(3)]
        model = milp.build_milp(blocks, {})
        d_names = [n for n in model.var_names if n.startswith("d[")]
        assert len(d_names) == 3 * 4
        one_rows = [r for r in model.rows if r[3].startswith("disj[")]
        assert len(one_rows) == 3

    def test_size_scaling_28_blocks(self):
        """28 blocks with a handful of nets lands near the expected model
        size for this formulation (~2.3K vars / ~3.3K constraints)."""
        pins = (("X", 1.5, 1.5),)
        blocks = [simple_block(f"b{i}", 10 + i % 5, 8 + i % 3, pins=pins)
                  for i in range(24)]
        blocks += [pad_block(f"p{i}") for i in range(4)]
        nets = {f"n{i}": [(f"b{i}", "X"), (f"b{i + 1}", "X")]
                for i in range(10)}
        model = milp.build_milp(blocks, nets)
        assert 1.0e3 < model.n_vars < 4.6e3
        assert 1.6e3 < model.n_constrs < 6.6e3

    def test_empty_pad_sides_rejected(self):
        blocks = [pad_block("p0")]
        with pytest.raises(InfeasibleConstraint):
            milp.build_milp(blocks, {}, pad_rules={"p0": ()})


# ---------------------------------------------------------------------------
# exact small placements


class TestSmallPlacements:
    def test_single_block_extents(self):
        """[TRIVIAL] one 10x10 block at the origin: objective 20."""
        blocks = [simple_block("a", 10, 10)]
        _, sol = solve_instance(blocks)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(20.0, abs=1e-6)
        x, y, _, _ = sol.positions["a"]
        assert (x, y) == pytest.approx((0.0, 0.0), abs=1e-6)

    def test_two_block_abutment(self):
        """[DERIVED] two 10x10 blocks, d_halo=2: optimal side-by-side with a
        4 um halo gap -> extent 24x10, objective 34 + HPWL. With a single
        2-pin net at the block centers HPWL = 14 (center spacing)."""
        pins = (("X", 5.0, 5.0),)
        blocks = [simple_block("a", 10, 10, pins=pins),
                  simple_block("b", 10, 10, pins=pins)]
        nets = {"n": [("a", "X"), ("b", "X")]}
        _, sol = solve_instance(blocks, nets)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(48.0, abs=1e-6)
        (xa, ya, _, _), (xb, yb, _, _) = (sol.positions["a"],
                                          sol.positions["b"])
        spacing = abs((xa + 5) - (xb + 5)) + abs((ya + 5) - (yb + 5))
        assert spacing == pytest.approx(14.0, abs=1e-6)

    def test_lp_bound_below_incumbent(self):
        """Root LP relaxation is a valid lower bound on the MILP optimum."""
        blocks = [simple_block("a", 10, 6), simple_block("b", 8, 8),
                  simple_block("c", 5, 12)]
        model = milp.build_milp(blocks, {})
        root = bnb._Arrays(model).solve_node({})
        assert root.status == "optimal"
        sol = bnb.solve(model, gap=1e-6)
        assert root.obj <= sol.objective + 1e-9

    def test_enumeration_oracle_with_variants(self):
        """[DERIVED] 2 blocks x 2 variants x rotations vs exhaustive
        enumeration (scipy coordinate LP per discrete assignment)."""
        pins = (("X", 2.0, 1.0),)
        blocks = [
            simple_block("a", 12, 6, pins=pins, rotations=(0, 90),
                         variants_dims=[(8, 9)]),
            simple_block("b", 10, 5, pins=pins, rotations=(0, 90),
                         variants_dims=[(6, 8)]),
        ]
        nets = {"n": [("a", "X"), ("b", "X")]}
        weights = {"n": 3.0}
        _, sol = solve_instance(blocks, nets, weights, gap=1e-6)
        ref = enumerate_optimum(blocks, nets, weights, d_halo=2.0)
        assert sol.status == "optimal"
        assert abs(sol.objective - ref) / abs(ref) <= 1e-3

    def test_pad_instance_legal_and_pitched(self):
        blocks = [simple_block("core", 30, 30),
                  pad_block("p_in"), pad_block("p_out")]
        pad_rules = {"p_in": ("W",), "p_out": ("E",)}
        nets = {}
        model, sol = solve_instance(blocks, nets, d_halo=2.0, p_io=70.0,
                                    pad_rules=pad_rules, gap=1e-3,
                                    time_limit=20.0)
        viol = legal.check_legal(sol, blocks, d_halo=2.0, p_io=70.0,
                                 pad_rules=pad_rules)
        assert viol == []
        assert sol.pad_sides["p_in"][0] == "W"
        assert sol.pad_sides["p_out"][0] == "E"

    def test_determinism(self):
        pins = (("X", 5.0, 5.0),)
        blocks = [simple_block("a", 10, 10, pins=pins),
                  simple_block("b", 10, 10, pins=pins),
                  simple_block("c", 6, 14, pins=pins)]
        nets = {"n": [("a", "X"), ("b", "X"), ("c", "X")]}
        _, s1 = solve_instance(blocks, nets)
        _, s2 = solve_instance(blocks, nets)
        assert s1.positions == s2.positions
        assert s1.objective == s2.objective
        assert s1.nodes == s2.nodes


def enumerate_optimum(blocks, nets, weights, d_halo):
    """Independent oracle: enumerate every (variant, rotation) choice and
    every pairwise disjunct assignment; solve the remaining coordinate LP
    with scipy; return the best objective."""
    import itertools

    from rfsyn.placer.milp import rotated_dims, rotated_pin_offset

    choices = []
    for b in blocks:
        opts = [(vi, rot) for vi in range(len(b.variants))
                for rot in b.rotations]
        choices.append(opts)
    pairs = [(i, j) for i in range(len(blocks))
             for j in range(i + 1, len(blocks))]
    gap = 2.0 * d_halo
    best = math.inf
    net_list = sorted(nets)
    for combo in itertools.product(*choices):
        dims = []
        pin_off = []
        for b, (vi, rot) in zip(blocks, combo):
            var = b.variants[vi]
            dims.append(rotated_dims(var.width, var.height, rot))
            offs = {}
            for p in var.pins:
                offs[p.name] = rotated_pin_offset(*p.center, var.width,
                                                  var.height, rot)
            pin_off.append(offs)
        idx = {b.id: i for i, b in enumerate(blocks)}
        # vars: x_i, y_i, xmax, ymax, then hx-,hx+,hy-,hy+ per net
        nb = len(blocks)
        nv = 2 * nb + 2 + 4 * len(net_list)
        c = np.zeros(nv)
        c[2 * nb] = 1.0
        c[2 * nb + 1] = 1.0
        for t, net in enumerate(net_list):
            w = float(weights.get(net, 1.0))
            base = 2 * nb + 2 + 4 * t
            c[base:base + 4] = [-w, w, -w, w]
        a_ub, b_ub = [], []
        for i in range(nb):
            row = np.zeros(nv)
            row[2 * i] = 1.0
            row[2 * nb] = -1.0
            a_ub.append(row)
            b_ub.append(-dims[i][0])
            row = np.zeros(nv)
            row[2 * i + 1] = 1.0
            row[2 * nb + 1] = -1.0
            a_ub.append(row)
            b_ub.append(-dims[i][1])
        for t, net in enumerate(net_list):
            base = 2 * nb + 2 + 4 * t
            for bid, pn in nets[net]:
                i = idx[bid]
                ox, oy = pin_off[i][pn]
                row = np.zeros(nv)
                row[base] = 1.0
                row[2 * i] = -1.0
                a_ub.append(row)
                b_ub.append(ox)
                row = np.zeros(nv)
                row[base + 1] = -1.0
                row[2 * i] = 1.0
                a_ub.append(row)
                b_ub.append(-ox)
                row = np.zeros(nv)
                row[base + 2] = 1.0
                row[2 * i + 1] = -1.0
                a_ub.append(row)
                b_ub.append(oy)
                row = np.zeros(nv)
                row[base + 3] = -1.0
                row[2 * i + 1] = 1.0
                a_ub.append(row)
                b_ub.append(-oy)
        for disj in itertools.product(range(4), repeat=len(pairs)):
            rows = [r.copy() for r in a_ub]
            rhs = list(b_ub)
            ok = True
            for (i, j), k in zip(pairs, disj):
                row = np.zeros(nv)
                if k == 0:
                    row[2 * i] = 1.0
                    row[2 * j] = -1.0
                    rhs_v = -dims[i][0] - gap
                elif k == 1:
                    row[2 * j] = 1.0
                    row[2 * i] = -1.0
                    rhs_v = -dims[j][0] - gap
                elif k == 2:
                    row[2 * i + 1] = 1.0
                    row[2 * j + 1] = -1.0
                    rhs_v = -dims[i][1] - gap
                else:
                    row[2 * j + 1] = 1.0
                    row[2 * i + 1] = -1.0
                    rhs_v = -dims[j][1] - gap
                rows.append(row)
                rhs.append(rhs_v)
            res = linprog(c, A_ub=np.array(rows), b_ub=np.array(rhs),
                          bounds=(0, None), method="highs")
            if res.status == 0 and res.fun < best:
                best = res.fun
            ok = ok  # keep flake quiet
    return best


# ---------------------------------------------------------------------------
# legality re-verification and failure modes


class TestLegality:
    def test_hand_overlap_detected(self):
        blocks = [simple_block("a", 10, 10), simple_block("b", 10, 10)]
        sol = bnb.PlacementSolution(
            positions={"a": (0.0, 0.0, 0, 0), "b": (8.0, 0.0, 0, 0)},
            pad_sides={}, objective=0.0, gap=0.0, status="optimal")
        viol = legal.check_legal(sol, blocks, d_halo=2.0)
        assert any("overlap" in v for v in viol)

    def test_pad_off_pitch_detected(self):
        blocks = [pad_block("p0")]
        sol = bnb.PlacementSolution(
            positions={"p0": (105.0, 0.0, 0, 0)},    # 1.5 * p_io
            pad_sides={"p0": ("S", 1)}, objective=0.0, gap=0.0,
            status="optimal")
        viol = legal.check_legal(sol, blocks, d_halo=2.0, p_io=70.0)
        assert any("pitch" in v for v in viol)

    def test_bad_rotation_detected(self):
        blocks = [simple_block("a", 10, 4, rotations=(0,))]
        sol = bnb.PlacementSolution(
            positions={"a": (0.0, 0.0, 90, 0)},
            pad_sides={}, objective=0.0, gap=0.0, status="optimal")
        viol = legal.check_legal(sol, blocks, d_halo=2.0)
        assert any("rotation" in v for v in viol)

    def test_infeasible_reports_exactly_one_hint(self):
        blocks = [simple_block("a", 10, 10)]
        model = milp.build_milp(blocks, {})
        for (bid, _, _), j in model.meta["z"].items():
            model.var_ub[j] = 0.0     # no selectable variant
        with pytest.raises(Infeasible, match=r"one\[a\]"):
            bnb.solve(model, gap=1e-3)

    def test_greedy_shelf_feasible_and_verified(self):
        pins = (("X", 5.0, 5.0),)
        blocks = [simple_block(f"b{i}", 10 + i, 8 + i, pins=pins)
                  for i in range(4)]
        blocks.append(pad_block("p0"))
        nets = {"n": [("b0", "X"), ("b1", "X")]}
        model = milp.build_milp(blocks, nets, pad_rules={"p0": ("N",)})
        warm = legal.greedy_shelf(model, blocks, nets)
        assert warm is not None
        assert warm.status == "greedy"
        viol = legal.check_legal(warm, blocks, d_halo=2.0, p_io=70.0,
                                 pad_rules={"p0": ("N",)})
        assert viol == []
        recomputed = legal.evaluate_objective(blocks, nets, warm)
        assert recomputed == pytest.approx(warm.objective, rel=1e-9)
