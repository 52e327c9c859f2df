"""Layout primitive generators: footprints, pins, variants, self-DRC."""

import math

import pytest

from rfsyn import em_oracle as em
from rfsyn import primitives as pr
from rfsyn.errors import InvalidDevice


class TestPinAndVariant:
    def test_pin_requires_area(self):
        with pytest.raises(ValueError):
            pr.Pin("X", "M4", 1.0, 1.0, 1.0, 2.0)

    def test_pin_must_fit_footprint(self):
        pin = pr.Pin("X", "M4", 0.0, 0.0, 5.0, 1.0)
        with pytest.raises(ValueError):
            pr.Variant(4.0, 4.0, (pin,))

    def test_block_validation(self):
        pin = pr.Pin("X", "M4", 0.0, 0.0, 1.0, 1.0)
        var = pr.Variant(2.0, 2.0, (pin,))
        with pytest.raises(ValueError):
            pr.PrimitiveBlock("b", "varactor", (var,))
        with pytest.raises(ValueError):
            pr.PrimitiveBlock("b", "resistor", ())
        with pytest.raises(ValueError):
            pr.PrimitiveBlock("b", "resistor", (var,), rotations=(45,))


class TestGenMos:
    def test_footprint_nf8(self, tech):
        """Hand arithmetic: width = pitch*8 + 2*guard = 0.8*8 + 2 = 8.4;
        cascode height = 2*(finger_height + w_f) + 2*guard = 2*4 + 2 = 10."""
        blk = pr.gen_mos("m", 8, 2.0, tech)
        v = blk.variants[0]
        assert v.width == pytest.approx(8.4)
        assert v.height == pytest.approx(10.0)

    def test_area_monotone_in_nf(self, tech):
        areas = [pr.gen_mos("m", n, 2.0, tech).variants[0].area
                 for n in range(1, 6)]
        assert all(a < b for a, b in zip(areas, areas[1:]))

    def test_rotations_restricted(self, tech):
        assert pr.gen_mos("m", 4, 2.0, tech).rotations == (0, 180)
        assert pr.gen_mos("m", 4, 2.0, tech,
                          kind="bias_mos").rotations == (0, 180)

    def test_pins_gdsb(self, tech):
        blk = pr.gen_mos("m", 4, 2.0, tech)
        assert set(blk.pin_names()) == {"G", "D", "S", "B"}
        v = blk.variants[0]
        g = next(p for p in v.pins if p.name == "G")
        d = next(p for p in v.pins if p.name == "D")
        # RF path crosses the block: gate on west edge, drain on east edge
        assert g.center[0] < 0.5 * v.width < d.center[0]

    def test_bias_is_single_stack(self, tech):
        casc = pr.gen_mos("m", 4, 2.0, tech).variants[0]
        bias = pr.gen_mos("m", 4, 2.0, tech, kind="bias_mos").variants[0]
        assert bias.height < casc.height

    def test_invalid_finger_width(self, tech):
        with pytest.raises(InvalidDevice):
            pr.gen_mos("m", 4, 100.0, tech)
        with pytest.raises(ValueError):
            pr.gen_mos("m", 0, 2.0, tech)

    def test_mos_from_width_splits_fingers(self, tech):
        blk = pr.mos_from_width("m", 18.0, tech)
        n_f, w_f = blk.meta["n_f"], blk.meta["w_f"]
        assert n_f * w_f == pytest.approx(18.0)
        assert tech.mos["wf_min_um"] <= w_f <= tech.mos["wf_max_um"]


class TestGenResistor:
    def test_unit_sheet_gives_square(self, tech):
        blk = pr.gen_resistor("r", tech.resistor["sheet_res_ohm_sq"], tech)
        assert any(v.width == pytest.approx(v.height) for v in blk.variants)

    def test_variants_reevaluate_to_target(self, tech):
        rs = tech.resistor["sheet_res_ohm_sq"]
        for r_target in (25.0, 50.0, 200.0, 1000.0):
            blk = pr.gen_resistor("r", r_target, tech)
            assert len(blk.variants) >= 3
            for v in blk.variants:
                got = rs * v.width / v.height  # l = width, w = height
                assert got == pytest.approx(r_target, rel=0.01)

    def test_doubling_r_doubles_length_at_fixed_width(self, tech):
        rs = tech.resistor["sheet_res_ohm_sq"]
        w = 1.0
        l1 = 100.0 / rs * w
        l2 = 200.0 / rs * w
        assert l2 == pytest.approx(2.0 * l1)

    def test_unrealizable(self, tech):
        with pytest.raises(InvalidDevice):
            pr.gen_resistor("r", 1e9, tech)
        with pytest.raises(ValueError):
            pr.gen_resistor("r", -5.0, tech)


class TestGenCapacitor:
    def test_degenerate_parallel_plate(self, tech):
        # with only the bilinear term, l*w = C/alpha_lw
        c = tech.capacitor
        l = pr._solve_cap_length(480.5, 20.0, tech)
        got_ff = (c["alpha_l_ff_um"] * l + c["alpha_w_ff_um"] * 20.0
                  + c["alpha_lw_ff_um2"] * l * 20.0 + c["alpha_0_ff"])
        assert got_ff == pytest.approx(480.5, rel=1e-12)

    def test_500ff_substitution(self, tech):
        blk = pr.gen_capacitor("c", 500e-15, tech)
        assert len(blk.variants) >= 3
        for v in blk.variants:
            got = pr.capacitor_value(v.width, v.height, tech)
            assert got == pytest.approx(500e-15, rel=0.01)

    def test_variants_distinct(self, tech):
        blk = pr.gen_capacitor("c", 200e-15, tech)
        shapes = {(round(v.width, 6), round(v.height, 6))
                  for v in blk.variants}
        assert len(shapes) == len(blk.variants)

    def test_unrealizable(self, tech):
        with pytest.raises(InvalidDevice):
            pr.gen_capacitor("c", 1.0, tech)  # 1 F

    def test_decap_fixed_size(self, tech):
        blk = pr.gen_decap("d", tech)
        assert blk.kind == "decap"
        assert len(blk.variants) == 1
        assert blk.rotations == (0,)
        v = blk.variants[0]
        assert pr.capacitor_value(v.width, v.height, tech) == pytest.approx(
            tech.pdn["decap_c_f"], rel=0.01)
        assert {p.net for p in v.pins} == {"VDD", "GND"}


class TestSpirals:
    def test_footprint_side_hand_check(self, tech):
        """side = d_out + 2*margin = (2r + 2t(w+s)) + 2*margin
        = 80 + 2*2.75*8 + 8 = 132."""
        g = em.InductorGeometry(2.75, 6.0, 2.0, 40.0)
        blk = pr.gen_spiral("l", g, tech)
        assert blk.variants[0].width == pytest.approx(132.0)
        assert blk.variants[0].height == pytest.approx(132.0)

    def test_half_turn_pins_opposite_edges(self, tech):
        g = em.InductorGeometry(2.5, 6.0, 2.0, 40.0)
        assert g.frac_class == "1/2T"
        v = pr.gen_spiral("l", g, tech).variants[0]
        ys = sorted(p.center[1] for p in v.pins)
        assert ys[0] < 0.1 * v.height and ys[1] > 0.9 * v.height

    def test_quarter_turn_pins_adjacent_edges(self, tech):
        g = em.InductorGeometry(2.25, 6.0, 2.0, 40.0)
        assert g.frac_class == "1/4T"
        v = pr.gen_spiral("l", g, tech).variants[0]
        p1, p2 = v.pins
        assert p1.center[1] < 0.1 * v.height        # south edge
        assert p2.center[0] > 0.9 * v.width         # east edge

    def test_blockage_flag(self, tech):
        g = em.InductorGeometry(2.0, 6.0, 2.0, 40.0)
        assert pr.gen_spiral("l", g, tech).is_routing_blockage

    def test_variant_set_to_blocks(self, tech, sizing_bundle):
        vset = sizing_bundle.synthesizer.query(5e-10)
        blocks = pr.gen_inductor_variants("ld", vset, tech)
        assert len(blocks) == len(vset.choices)
        # classwise inductances stay inside the query band of each other
        ls = [b.meta["l_henry"] for b in blocks]
        assert max(ls) / min(ls) <= (1.05 / 0.95) + 1e-9
        merged = pr.merge_variant_blocks("ld", blocks)
        assert len(merged.variants) == len(blocks)
        assert merged.is_routing_blockage

    def test_empty_variant_set_rejected(self, tech):
        from rfsyn.surrogate import VariantSet
        with pytest.raises(ValueError):
            pr.gen_inductor_variants("l", VariantSet(1e-9, 0.05, {}), tech)


class TestLinesAndPads:
    def test_tline_footprint_scales(self, tech):
        a = pr.gen_tline("t", em.TlineGeometry(100.0, 5.0), tech).variants[0]
        b = pr.gen_tline("t", em.TlineGeometry(200.0, 5.0), tech).variants[0]
        assert b.width == pytest.approx(2.0 * a.width)
        assert b.height == a.height

    def test_tline_end_pins_on_signal_layer(self, tech):
        geom = em.TlineGeometry(100.0, 5.0)
        v = pr.gen_tline("t", geom, tech).variants[0]
        p1, p2 = v.pins
        assert p1.layer == p2.layer == tech.tline["layer"]
        assert p1.center[0] < 0.05 * geom.l
        assert p2.center[0] > 0.95 * geom.l

    def test_cpw_footprint_width(self, tech):
        """width = w + 2s + 2*w_gnd = 20 + 20 + 10 = 50."""
        geom = em.CpwGeometry(500.0, 20.0, 10.0)
        v = pr.gen_cpw("c", geom, tech).variants[0]
        assert v.height == pytest.approx(50.0)
        assert v.width == pytest.approx(500.0)

    def test_pad_fixed_square(self, tech):
        blk = pr.gen_pad("p", "IN", tech)
        v = blk.variants[0]
        assert v.width == v.height == tech.pad["size_um"]
        assert v.pins[0].net == "IN"
        assert blk.rotations == (0,)


class TestSelfDrc:
    def test_generated_library_is_clean(self, tech):
        blocks = [
            pr.gen_mos("m1", 8, 2.0, tech),
            pr.gen_mos("m2", 2, 1.0, tech, kind="bias_mos"),
            pr.gen_resistor("r1", 200.0, tech),
            pr.gen_capacitor("c1", 500e-15, tech),
            pr.gen_decap("d1", tech),
            pr.gen_spiral("l1", em.InductorGeometry(2.75, 6, 2, 40), tech),
            pr.gen_tline("t1", em.TlineGeometry(100.0, 5.0), tech),
            pr.gen_cpw("w1", em.CpwGeometry(500.0, 20.0, 10.0), tech),
            pr.gen_pad("p1", "IN", tech),
        ]
        for blk in blocks:
            assert pr.self_drc(blk, tech) == []

    def test_flags_unknown_layer(self, tech):
        pin = pr.Pin("X", "M42", 0.0, 0.0, 2.0, 2.0)
        blk = pr.PrimitiveBlock("b", "resistor",
                                (pr.Variant(4.0, 4.0, (pin,)),))
        issues = pr.self_drc(blk, tech)
        assert issues and "unknown" in issues[0]

    def test_flags_subminimum_pin(self, tech):
        pin = pr.Pin("X", "M9", 0.0, 0.0, 0.5, 0.5)  # M9 min width 2.0
        blk = pr.PrimitiveBlock("b", "resistor",
                                (pr.Variant(4.0, 4.0, (pin,)),))
        issues = pr.self_drc(blk, tech)
        assert issues and "min" in issues[0]

    def test_determinism(self, tech):
        a = pr.gen_resistor("r", 137.0, tech)
        b = pr.gen_resistor("r", 137.0, tech)
        assert a == b
