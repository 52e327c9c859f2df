"""Nodal-analysis S-parameter engine and post-layout verification tests.

Closed-form two-port fixtures (series/shunt/line) are recomputed inline as
independent oracles; passivity, reciprocity, and KCL residuals are checked
on randomized passive networks; the LNA verification model is validated
against the sizing module's analytic input match.
"""

import cmath
import json
import math
from pathlib import Path

import numpy as np
import pytest

from rfsyn import sizing as sz
from rfsyn import verify as vf
from rfsyn.errors import SingularNetwork, SweepCoverage, ExtractionError
from rfsyn.mna import (Capacitor, Inductor, Network, Port, Resistor, Tank,
                       Tline, Vccs, kcl_residual, solve_point, sparams,
                       stability_delta, stability_kappa)
from rfsyn.router import RouteTree, RouteVia, WireSegment

Z0 = 50.0
SPEC_DIR = Path(__file__).resolve().parents[1] / "src" / "rfsyn" / "data" / "specs"


def two_port(*elements, p1="p1", p2="p2"):
    net = Network(ports=[Port(1, p1, Z0), Port(2, p2, Z0)])
    net.add(*elements)
    return net


def series_s(z):
    """Closed-form S of a series impedance between matched ports."""
    s11 = z / (z + 2 * Z0)
    s21 = 2 * Z0 / (z + 2 * Z0)
    return s11, s21


def shunt_s(z):
    """Closed-form S of a shunt impedance at a through connection."""
    s11 = -Z0 / (2 * z + Z0)
    s21 = 2 * z / (2 * z + Z0)
    return s11, s21


class TestClosedForms:
    def test_ideal_through(self):
        net = two_port(p1="a", p2="a")
        s, _ = solve_point(net, 1e9)
        assert abs(s[0, 0]) < 1e-12
        assert abs(s[1, 0] - 1.0) < 1e-12

    def test_series_resistor(self):
        s, _ = solve_point(two_port(Resistor("p1", "p2", 100.0)), 5e9)
        s11, s21 = series_s(100.0)
        assert abs(s[0, 0] - s11) < 1e-9
        assert abs(s[1, 0] - s21) < 1e-9

    def test_series_capacitor(self):
        f, c = 10e9, 50e-15
        z = 1.0 / (1j * 2 * math.pi * f * c)
        s, _ = solve_point(two_port(Capacitor("p1", "p2", c)), f)
        s11, s21 = series_s(z)
        assert abs(s[0, 0] - s11) < 1e-9
        assert abs(s[1, 0] - s21) < 1e-9

    def test_series_inductor(self):
        f, l = 25e9, 300e-12
        z = 1j * 2 * math.pi * f * l
        s, _ = solve_point(two_port(Inductor("p1", "p2", l)), f)
        s11, s21 = series_s(z)
        assert abs(s[0, 0] - s11) < 1e-9
        assert abs(s[1, 0] - s21) < 1e-9

    def test_shunt_resistor(self):
        s, _ = solve_point(two_port(Resistor("a", "0", 75.0),
                                    p1="a", p2="a"), 1e9)
        s11, s21 = shunt_s(75.0)
        assert abs(s[0, 0] - s11) < 1e-9
        assert abs(s[1, 0] - s21) < 1e-9

    def test_tank_equals_parallel_rlc(self):
        # tank between the ports behaves as (R+jwL) || 1/(jwC) in series
        f = 20e9
        tank = Tank("p1", "p2", l=200e-12, r_dc=2.0, c_par=10e-15,
                    f_skin=40e9)
        w = 2 * math.pi * f
        z = 1.0 / (1.0 / complex(2.0, w * 200e-12) + 1j * w * 10e-15)
        s, _ = solve_point(two_port(tank), f)
        s11, s21 = series_s(z)
        assert abs(s[0, 0] - s11) < 1e-9
        assert abs(s[1, 0] - s21) < 1e-9

    def test_tank_skin_effect_resistance(self):
        tank = Tank("a", "0", l=1e-9, r_dc=3.0, c_par=1e-15, f_skin=10e9)
        assert tank.r_at(5e9) == 3.0                       # below corner
        assert tank.r_at(40e9) == pytest.approx(6.0)       # sqrt(4) * r_dc

    def test_matched_line_is_pure_delay(self):
        # a z0-matched lossless line: S11 = 0, S21 = exp(-j theta)
        for theta in (0.3, math.pi / 2, 1.9):
            line = Tline("p1", "p2", Z0, theta, 10e9)
            s, _ = solve_point(two_port(line), 10e9)
            assert abs(s[0, 0]) < 1e-9
            assert abs(s[1, 0] - cmath.exp(-1j * theta)) < 1e-9

    def test_line_matches_impedance_transform(self):
        # line + load reproduces the sizing module's line_transform oracle
        f, zline, theta, rload = 25e9, 35.0, 0.8, 20.0
        net = Network(ports=[Port(1, "p1", Z0)])
        net.add(Tline("p1", "x", zline, theta, f),
                Resistor("x", "0", rload))
        s, _ = solve_point(net, f)
        z_in = sz.line_transform(complex(rload), zline, theta)
        gamma = (z_in - Z0) / (z_in + Z0)
        assert abs(s[0, 0] - gamma) < 1e-9

    def test_line_theta_scales_with_frequency(self):
        line = Tline("p1", "p2", 30.0, 1.0, 10e9)
        assert line.theta(20e9) == pytest.approx(2.0)


class TestNetworkProperties:
    def random_passive(self, rng):
        """Random ladder of R/L/C between p1, p2, and internal nodes."""
        net = two_port()
        nodes = ["p1", "p2", "0", "m1", "m2"]
        for _ in range(8):
            a, b = rng.choice(nodes, size=2, replace=False)
            kind = rng.integers(3)
            if kind == 0:
                net.add(Resistor(a, b, float(rng.uniform(5, 500))))
            elif kind == 1:
                net.add(Capacitor(a, b, float(rng.uniform(1e-15, 1e-13))))
            else:
                net.add(Inductor(a, b, float(rng.uniform(1e-11, 1e-9))))
        # guarantee both ports see a dc path so fixtures stay connected
        net.add(Resistor("p1", "m1", 50.0), Resistor("m1", "p2", 50.0))
        return net

    def test_reciprocity_random_passive(self, rng):
        for _ in range(20):
            net = self.random_passive(rng)
            f = float(rng.uniform(1e9, 60e9))
            s, _ = solve_point(net, f)
            assert abs(s[0, 1] - s[1, 0]) < 1e-9

    def test_passivity_random_passive(self, rng):
        for _ in range(20):
            net = self.random_passive(rng)
            f = float(rng.uniform(1e9, 60e9))
            s, _ = solve_point(net, f)
            assert np.linalg.svd(s, compute_uv=False).max() <= 1 + 1e-9

    def test_kcl_residual_small(self, rng):
        for _ in range(10):
            net = self.random_passive(rng)
            assert kcl_residual(net, float(rng.uniform(1e9, 60e9))) < 1e-9

    def test_singular_network_raises(self):
        # control node with no element connection -> zero matrix row
        net = two_port(Vccs("p1", "0", "floating", "0", 0.01),
                       Resistor("p1", "p2", 100.0))
        with pytest.raises(SingularNetwork) as exc:
            solve_point(net, 1e9)
        assert exc.value.freq == 1e9

    def test_nonpositive_frequency_rejected(self):
        with pytest.raises(ValueError):
            solve_point(two_port(Resistor("p1", "p2", 1.0)), 0.0)

    def test_element_validation(self):
        with pytest.raises(ValueError):
            Resistor("a", "b", 0.0)
        with pytest.raises(ValueError):
            Inductor("a", "b", -1e-9)

    def test_sparams_shape_and_match(self):
        net = two_port(Resistor("p1", "p2", 100.0))
        freqs = [1e9, 2e9, 4e9]
        out = sparams(net, freqs)
        assert out.shape == (3, 2, 2)
        for i, f in enumerate(freqs):
            s, _ = solve_point(net, f)
            assert np.allclose(out[i], s, atol=1e-12)


class TestStability:
    def test_unilateral_kappa_infinite(self):
        assert stability_kappa([[0.5, 0.0], [2.0, 0.3]]) == math.inf

    def test_attenuator_kappa(self):
        # hand evaluation: (1 - 0 - 0 + |0 - 0.25|^2) / (2 * 0.25) = 2.125
        s = [[0.0, 0.5], [0.5, 0.0]]
        assert stability_kappa(s) == pytest.approx(2.125, abs=1e-12)
        assert stability_delta(s) == pytest.approx(0.25, abs=1e-12)

    def test_matched_isolator_kappa(self):
        # |S12 S21| = 0.1, numerator 1 + 0.01
        s = [[0.0, 0.1], [1.0, 0.0]]
        assert stability_kappa(s) == pytest.approx((0.01 + 1 - 1) / 0.2
                                                   + 1 / 0.2, abs=1e-12)


# ---------------------------------------------------------------------------
# extraction


def seg(layer, x0, y0, x1, y1, net="N", width=None):
    w = width if width is not None else min(x1 - x0, y1 - y0)
    return WireSegment(net, layer, w, x0, y0, x1, y1)


def tree(segments, vias=(), net="N"):
    return RouteTree(net=net, segments=list(segments), vias=list(vias),
                     cost=0.0, pins={})


class TestExtraction:
    def test_sheet_resistance_formula(self, tech):
        # 10 um x 1 um on M3 (0.1 ohm/sq) -> exactly 1 ohm
        r, c, nv = vf.wire_parasitics(tree([seg("M3", 0, 0, 10, 1)]), tech)
        assert r == pytest.approx(1.0, abs=1e-12)
        assert nv == 0
        m3 = tech.layer("M3")
        expect_c = (10.0 * m3.c_area_ff_um2
                    + 20.0 * m3.c_fringe_ff_um) * 1e-15
        assert c == pytest.approx(expect_c, rel=1e-12)

    def test_split_additivity(self, tech):
        whole = tree([seg("M5", 0, 0, 20, 2)])
        halves = tree([seg("M5", 0, 0, 10, 2), seg("M5", 10, 0, 20, 2)])
        rw, cw, _ = vf.wire_parasitics(whole, tech)
        rh, ch, _ = vf.wire_parasitics(halves, tech)
        assert rw == pytest.approx(rh, rel=1e-9)
        assert cw == pytest.approx(ch, rel=1e-9)

    def test_vertical_equals_horizontal(self, tech):
        h = tree([seg("M4", 0, 0, 12, 2)])
        v = tree([seg("M4", 0, 0, 2, 12)])
        assert vf.wire_parasitics(h, tech) == vf.wire_parasitics(v, tech)

    def test_via_resistance(self, tech):
        vias = [RouteVia("N", 5.0, 5.0, "M8", "M9", 2.0)] * 3
        r0, _, _ = vf.wire_parasitics(tree([seg("M9", 0, 4, 10, 6)]), tech)
        r3, _, n3 = vf.wire_parasitics(
            tree([seg("M9", 0, 4, 10, 6)], vias), tech)
        assert n3 == 3
        assert r3 - r0 == pytest.approx(
            3 * tech.routing["via_res_ohm"], rel=1e-12)


# ---------------------------------------------------------------------------
# LNA verification model


@pytest.fixture(scope="module")
def lna_spec():
    doc = json.loads((SPEC_DIR / "lna25.json").read_text())
    return sz.CircuitSpec.from_dict(doc)


@pytest.fixture(scope="module")
def lna_design(lna_spec, tech, sizing_bundle):
    return sz.size_lna(lna_spec, tech, sizing_bundle)


class TestLnaModel:
    def test_ideal_model_matches_analytic_s11(self, lna_design, lna_spec,
                                              tech):
        # consistency between the sizing prediction and the field solver:
        # with parasitics zeroed, S11 equals the analytic input match
        # within 1% across the whole sweep
        freqs = vf.default_sweep(lna_spec.f0)
        net = vf.build_lna_network(lna_design, lna_spec, tech, ideal=True)
        smats, kcl = vf.sweep_network(net, freqs)
        assert kcl < 1e-9
        for f, s in zip(freqs, smats):
            z = sz.lna_input_impedance(lna_design, f, tech)
            gamma = sz.reflection(z, tech.z0_ohm)
            assert abs(s[0, 0] - gamma) <= 0.01 * max(abs(gamma), 1e-3)

    def test_parasitics_shift_the_match(self, lna_design, lna_spec, tech):
        ideal = vf.build_lna_network(lna_design, lna_spec, tech, ideal=True)
        loaded = vf.build_lna_network(
            lna_design, lna_spec, tech,
            slot_r={"in": 2.0, "gate": 1.5}, slot_c={"in": 5e-15},
            ideal=False)
        f0 = lna_spec.f0
        s_i, _ = solve_point(ideal, f0)
        s_l, _ = solve_point(loaded, f0)
        assert abs(s_i[0, 0] - s_l[0, 0]) > 1e-4

    def test_extracted_model_kappa_finite(self, lna_design, lna_spec, tech):
        net = vf.build_lna_network(lna_design, lna_spec, tech, ideal=False)
        s, _ = solve_point(net, lna_spec.f0)
        k = stability_kappa(s)
        assert math.isfinite(k) and k > 1.0

    def test_extract_parasitics_maps_all_nets(self, lna_design, lna_spec,
                                              tech):
        routed_trees = {
            "IN": tree([seg("M9", 0, 0, 30, 2)], net="IN"),
            "G": tree([seg("M9", 0, 0, 20, 2)], net="G"),
            "BIAS": tree([seg("M4", 0, 0, 15, 2)], net="BIAS"),
        }

        class FakeRouted:
            trees = routed_trees
        slots = {"IN": "in", "G": "gate", "BIAS": "bias"}
        pn = vf.extract_parasitics(lna_design, lna_spec, FakeRouted(), tech,
                                   slots)
        assert set(pn.per_net) == set(routed_trees)
        assert pn.slot_r["in"] > 0 and pn.slot_c["gate"] > 0
        # bias wiring recorded but not stamped
        assert pn.slot_r["bias"] > 0
        assert all("bias" not in getattr(e, "n1", "")
                   for e in pn.network.elements)
        # input-path loss includes wire R plus the gate passive loss
        assert pn.r_loss > pn.slot_r["in"] + pn.slot_r["gate"]

    def test_extract_unmapped_net_raises(self, lna_design, lna_spec, tech):
        class FakeRouted:
            trees = {"MYSTERY": tree([seg("M9", 0, 0, 5, 2)])}
        with pytest.raises(ExtractionError):
            vf.extract_parasitics(lna_design, lna_spec, FakeRouted(), tech,
                                  {})

    def test_nf_reduces_to_sizing_formula(self, lna_design, lna_spec, tech):
        # with the technology default loss, the extracted-NF closed form is
        # identical to the sizing-stage noise equation
        r_loss = tech.device["rloss_ohm"]
        got = vf.nf_db_with_rloss(lna_design, lna_spec, tech, r_loss)
        expect = 10 * math.log10(
            sz.nf_linear(lna_design.n, lna_design.r_in, lna_spec, tech))
        assert got == pytest.approx(expect, rel=1e-12)

    def test_nf_zero_loss_below_default(self, lna_design, lna_spec, tech):
        # R_loss = 0 strips the b-term loss contribution
        nf0 = vf.nf_db_with_rloss(lna_design, lna_spec, tech, 0.0)
        nf5 = vf.nf_db_with_rloss(lna_design, lna_spec, tech, 5.0)
        assert nf0 < nf5
        d = tech.device
        fr = lna_spec.f0 / d["ft_hz"]
        skin = 4.0 / ((1.0 / fr) ** 2 + 1.0) + 1.0
        expect = 1.0 \
            + d["gamma"] * d["gm_s"] * lna_design.r_in * fr ** 2 * skin \
            * lna_design.n \
            + 4.0 * lna_design.r_in * fr ** 2 / d["rd_ohm"] \
            + d["rg_ohm"] / lna_design.r_in / lna_design.n
        assert nf0 == pytest.approx(10 * math.log10(expect), rel=1e-12)


# ---------------------------------------------------------------------------
# performance report


def pa_like_spec(**over):
    kw = dict(topology="PA", f0=25e9, g_db=0.0, bw=1e9, c_load=20e-15,
              s11_max_db=-1.0, p_sat_dbm=8.0)
    kw.update(over)
    return sz.CircuitSpec(**kw)


class TestPerfReport:
    def test_default_sweep_covers_octaves(self):
        f = vf.default_sweep(25e9)
        assert len(f) == 201
        assert f[0] == pytest.approx(12.5e9, rel=1e-12)
        assert f[-1] == pytest.approx(50e9, rel=1e-12)
        assert f[100] == pytest.approx(25e9, rel=1e-12)

    def test_flat_sweep_unbounded_bw(self):
        spec = pa_like_spec()
        freqs = vf.default_sweep(spec.f0)
        smats = np.array([[[0.0, 0.5], [0.5, 0.0]]] * len(freqs))
        rep = vf.perf_report(freqs, smats, None, spec, vf_tech())
        assert rep.bw_unbounded
        assert rep.bw_hz == pytest.approx(freqs[-1] - freqs[0])
        assert rep.passes["bw"]
        assert rep.g_db == pytest.approx(20 * math.log10(0.5), abs=1e-9)
        assert rep.kappa_min == pytest.approx(2.125)

    def test_second_order_bandwidth(self, tech):
        # series RLC between matched ports: analytic -3 dB width
        # (R + 2 Z0) / (2 pi L) around the resonance
        f0 = 25e9
        r, l = 50.0, 150.0 / (2 * math.pi * 5e9)
        c = 1.0 / ((2 * math.pi * f0) ** 2 * l)
        net = two_port(Resistor("p1", "m", r), Inductor("m", "m2", l),
                       Capacitor("m2", "p2", c))
        freqs = vf.default_sweep(f0, 801)
        smats, _ = vf.sweep_network(net, freqs)
        spec = pa_like_spec(bw=4e9)
        rep = vf.perf_report(freqs, smats, None, spec, tech)
        expect_bw = (r + 2 * Z0) / (2 * math.pi * l)
        assert not rep.bw_unbounded
        assert rep.bw_hz == pytest.approx(expect_bw, rel=1e-3)
        assert rep.f_center_hz == pytest.approx(f0, rel=1e-3)
        assert rep.passes["bw"]

    def test_sweep_coverage_error(self, tech):
        spec = pa_like_spec(f0=25e9)
        freqs = np.linspace(1e9, 10e9, 11)
        smats = np.zeros((11, 2, 2), dtype=complex)
        with pytest.raises(SweepCoverage):
            vf.perf_report(freqs, smats, None, spec, tech)

    def test_pass_flags_recomputable(self, tech):
        spec = pa_like_spec(g_db=-7.0)
        freqs = vf.default_sweep(spec.f0, 21)
        smats = np.array([[[0.0, 0.5], [0.5, 0.0]]] * len(freqs))
        rep = vf.perf_report(freqs, smats, None, spec, tech)
        s = np.array(rep.s)
        g = 20 * math.log10(abs(s[10, 1, 0]))
        assert rep.passes["gain"] == (g >= spec.g_db)


def vf_tech():
    from rfsyn.tech import default_tech
    return default_tech()


# ---------------------------------------------------------------------------
# respin


def make_report(spec, tech, **over):
    freqs = vf.default_sweep(spec.f0, 5)
    smats = np.array([[[0.1, 0.01], [3.0, 0.1]]] * 5)
    rep = vf.perf_report(freqs, smats, None, spec, tech)
    for k, v in over.items():
        setattr(rep, k, v)
    return rep


class TestRespin:
    def test_all_pass_done(self, tech):
        spec = pa_like_spec(g_db=5.0, bw=1e9)
        rep = make_report(spec, tech)
        rep.passes = {k: True for k in rep.passes}
        dec = vf.respin(spec, rep, 0)
        assert dec.status == "done"
        assert dec.spec == spec

    def test_gain_shortfall_margin(self, tech):
        # 1 dB short -> target raised by 1.05 dB
        spec = pa_like_spec(g_db=10.0)
        rep = make_report(spec, tech)
        rep.g_db = 9.0
        rep.passes = {k: True for k in rep.passes}
        rep.passes["gain"] = False
        dec = vf.respin(spec, rep, 0)
        assert dec.status == "respin"
        assert dec.iteration == 1
        assert dec.spec.g_db == pytest.approx(11.05, abs=1e-12)
        assert dec.spec.bw == spec.bw  # untouched items stay

    def test_s11_and_bw_tightening(self, tech):
        spec = pa_like_spec(s11_max_db=-10.0, bw=5e9)
        rep = make_report(spec, tech)
        rep.s11_db = -8.0
        rep.bw_hz = 4e9
        rep.bw_unbounded = False
        rep.passes = {k: True for k in rep.passes}
        rep.passes["s11"] = False
        rep.passes["bw"] = False
        dec = vf.respin(spec, rep, 0)
        assert dec.spec.s11_max_db == pytest.approx(-12.1, abs=1e-9)
        assert dec.spec.bw == pytest.approx(5e9 + 1.05e9, rel=1e-12)

    def test_give_up_after_three(self, tech):
        spec = pa_like_spec(g_db=10.0)
        rep = make_report(spec, tech)
        rep.passes = {k: True for k in rep.passes}
        rep.passes["gain"] = False
        it = 0
        for _ in range(3):
            dec = vf.respin(spec, rep, it)
            if dec.status == "give_up":
                break
            spec, it = dec.spec, dec.iteration
        assert dec.status == "give_up"
        assert dec.iteration == 3
