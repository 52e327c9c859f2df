"""Post-layout verification: rule-based parasitic extraction, S-parameter
evaluation of the sized amplifier with its layout parasitics back-annotated,
performance scoring against the specification, and the constraint-
tightening respin decision.

Extraction model: every wire segment contributes R = sheet_R * l / w and
C = area * C_area + perimeter * C_fringe on its layer; vias contribute the
technology via resistance; realized passives enter as their one-port
RLC tank equivalents; the MOS devices as width-scaled small-signal models.
Net-level lumping is deliberate (series R, shunt C per net) — field-solver
fidelity is out of scope.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import em_oracle as em
from .errors import ExtractionError, SweepCoverage
from .mna import (GROUND, Capacitor, Inductor, Network, Port, Resistor,
                  Tank, Tline, Vccs, solve_point, stability_kappa)
from .sizing import CircuitSpec, LNADesign
from .tech import TechParams

MAX_RESPIN = 3

#: slot names a routed net may be lumped into; "bias" nets are recorded in
#: the extraction but carry no AC signal and are not stamped
NET_SLOTS = ("in", "gate", "src", "out", "vdd", "gnd", "bias")


@dataclass(frozen=True)
class NetParasitics:
    net: str
    slot: str
    r_ohm: float
    c_f: float
    n_vias: int


@dataclass
class ParasiticNetlist:
    network: Network
    per_net: dict                 # net name -> NetParasitics
    slot_r: dict                  # slot -> summed series R (ohm)
    slot_c: dict                  # slot -> summed shunt C (F)
    r_loss: float                 # input-path series loss for the NF model


def wire_parasitics(tree, tech: TechParams):
    """(R_ohm, C_f, n_vias) of one routed tree, lumped."""
    r_total = 0.0
    c_total = 0.0
    for seg in tree.segments:
        dx = seg.x1 - seg.x0
        dy = seg.y1 - seg.y0
        length, width = (dx, dy) if dx >= dy else (dy, dx)
        layer = tech.layer(seg.layer)
        if width > 0.0:
            r_total += layer.sheet_res_ohm_sq * length / width
        # fringe counts the two long edges so C is additive under splits,
        # matching the passive oracle's convention
        c_total += (dx * dy * layer.c_area_ff_um2
                    + 2.0 * length * layer.c_fringe_ff_um) * 1e-15
    via_r = float(tech.routing["via_res_ohm"])
    for via in tree.vias:
        r_total += via_r / _via_cuts(via.size, tech)
    return r_total, c_total, len(tree.vias)


def _via_cuts(size: float, tech: TechParams) -> int:
    """A via spanning a wide wire is a square array of parallel cuts on a
    2*s_min pitch; via_res_ohm is the single-cut resistance."""
    pitch = 2.0 * float(tech.routing["s_min_um"])
    return max(1, int(size / pitch)) ** 2


def tree_path_resistance(tree, a, b, tech: TechParams) -> float:
    """Series resistance along the route-tree path between two pin points
    (x, y, layer).

    Branch spurs off the path (for example a bias tap on a ground net) do
    not carry the through current, so they contribute no series
    resistance. Falls back to the full-tree lump when either point cannot
    be located on the tree.
    """
    tol = 1e-6

    def key(x, y, layer):
        return (layer, round(x, 3), round(y, 3))

    def inside(rect, x, y):
        x0, y0, x1, y1 = rect
        return x0 - tol <= x <= x1 + tol and y0 - tol <= y <= y1 + tol

    adj = {}

    def edge(k1, k2, r):
        adj.setdefault(k1, []).append((k2, r))
        adj.setdefault(k2, []).append((k1, r))

    segs = list(tree.segments)
    for i, seg in enumerate(segs):
        dx = seg.x1 - seg.x0
        dy = seg.y1 - seg.y0
        horiz = dx >= dy
        width = dy if horiz else dx
        cx, cy = 0.5 * (seg.x0 + seg.x1), 0.5 * (seg.y0 + seg.y1)
        r_per = (tech.layer(seg.layer).sheet_res_ohm_sq / width
                 if width > 0.0 else 0.0)
        rect = (seg.x0, seg.y0, seg.x1, seg.y1)
        if horiz:
            pts = [(seg.x0, key(seg.x0, cy, seg.layer)),
                   (seg.x1, key(seg.x1, cy, seg.layer))]
        else:
            pts = [(seg.y0, key(cx, seg.y0, seg.layer)),
                   (seg.y1, key(cx, seg.y1, seg.layer))]
        for via in tree.vias:
            if seg.layer in (via.lower, via.upper) \
                    and inside(rect, via.x, via.y):
                pts.append((via.x if horiz else via.y,
                            key(via.x, via.y, seg.layer)))
        for px, py, pl in tree.pins:
            if pl == seg.layer and inside(rect, px, py):
                pts.append((px if horiz else py, key(px, py, seg.layer)))
        for j, other in enumerate(segs):
            if j == i or other.layer != seg.layer:
                continue
            ox0 = max(seg.x0, other.x0)
            oy0 = max(seg.y0, other.y0)
            ox1 = min(seg.x1, other.x1)
            oy1 = min(seg.y1, other.y1)
            if ox0 <= ox1 + tol and oy0 <= oy1 + tol:
                jx, jy = 0.5 * (ox0 + ox1), 0.5 * (oy0 + oy1)
                pts.append((jx if horiz else jy, key(jx, jy, seg.layer)))
        pts.sort()
        for (t1, k1), (t2, k2) in zip(pts, pts[1:]):
            edge(k1, k2, abs(t2 - t1) * r_per)

    via_r = float(tech.routing["via_res_ohm"])
    for via in tree.vias:
        edge(key(via.x, via.y, via.lower), key(via.x, via.y, via.upper),
             via_r / _via_cuts(via.size, tech))

    ka = key(*a)
    kb = key(*b)
    if ka not in adj or kb not in adj:
        return wire_parasitics(tree, tech)[0]
    dist = {ka: 0.0}
    heap = [(0.0, ka)]
    while heap:
        d, k = heapq.heappop(heap)
        if k == kb:
            return d
        if d > dist.get(k, math.inf):
            continue
        for k2, r in adj.get(k, ()):
            nd = d + r
            if nd < dist.get(k2, math.inf):
                dist[k2] = nd
                heapq.heappush(heap, (nd, k2))
    return wire_parasitics(tree, tech)[0]


def build_lna_network(design: LNADesign, spec: CircuitSpec,
                      tech: TechParams, slot_r=None, slot_c=None,
                      ideal: bool = False) -> Network:
    """Two-port small-signal model of the sized LNA.

    Signal path: port 1 -> CPW section -> gate passive (line model) ->
    gate resistance -> C_gs with inductive source degeneration -> cascode
    transconductance into the drain tank -> port 2. With ideal=True the
    passives are lossless inductors and no layout parasitics are stamped,
    which must reproduce the sizing module's analytical input match.
    """
    d = tech.device
    z0 = tech.z0_ohm
    slot_r = dict(slot_r or {})
    slot_c = dict(slot_c or {})
    net = Network()

    def lump(node: str, slot: str, tag: str) -> str:
        """Insert the slot's series R (new node) and shunt C after `node`."""
        r = slot_r.get(slot, 0.0)
        c = slot_c.get(slot, 0.0)
        out = node
        if r > 0.0:
            out = f"_{tag}"
            net.add(Resistor(node, out, r))
        if c > 0.0 and out != GROUND:
            net.add(Capacitor(out, GROUND, c))
        return out

    def passive_tank(choice, n1: str, n2: str):
        model = (em.inductor_tank(choice.geometry, tech)
                 if choice.kind == "spiral"
                 else em.tline_tank(choice.geometry, tech))
        net.add(Tank(n1, n2, model.L, model.r_dc, model.c_par,
                     model.f_skin))

    n_cpw = lump("p1", "in", "inw")
    net.add(Tline(n_cpw, "a", design.cpw.z, design.cpw.theta, design.f0))
    n_g = lump("a", "gate", "gw")
    net.add(Tline(n_g, "g", design.z_g, design.theta_g, design.f0))
    net.add(Resistor("g", "gp", d["rg_ohm"] / design.n))
    net.add(Capacitor("gp", "s", design.n * d["cgs_f"]))

    # source degeneration to ground, with src/gnd wiring in the path
    n_src = lump("s", "src", "sw")
    n_sg = "sg" if slot_r.get("gnd", 0.0) > 0.0 else GROUND
    l_s_eff = (design.passives["s"].l_realized if design.em_aware
               else design.l_s)
    if ideal:
        net.add(Inductor(n_src, n_sg, l_s_eff))
    else:
        passive_tank(design.passives["s"], n_src, n_sg)
    if n_sg != GROUND:
        net.add(Resistor(n_sg, GROUND, slot_r["gnd"]))

    gm_t = design.n * d["gm_s"]
    # common-source loop: drain current returns through the source node
    net.add(Vccs(GROUND, "s", "gp", "s", gm_t))
    # cascode output: the same signal current is delivered to the tank
    net.add(Vccs("dr", GROUND, "gp", "s", gm_t))

    net.add(Resistor("dr", GROUND, d["rd_ohm"]))
    net.add(Capacitor("dr", GROUND, design.n * d["cd_f"] + spec.c_load))
    if not ideal:
        net.add(Capacitor("gp", "dr",
                          design.n * d["cgd_f"] * d["cgd_isolation"]))

    # drain tank to the AC-grounded supply, with vdd wiring in the path
    n_vt = "vt" if slot_r.get("vdd", 0.0) > 0.0 else GROUND
    if ideal:
        net.add(Inductor("dr", n_vt, design.l_d))
    else:
        passive_tank(design.passives["d"], "dr", n_vt)
    if n_vt != GROUND:
        net.add(Resistor(n_vt, GROUND, slot_r["vdd"]))
        c_vdd = slot_c.get("vdd", 0.0)
        if c_vdd > 0.0:
            net.add(Capacitor(n_vt, GROUND, c_vdd))

    n_out = lump("dr", "out", "ow")
    net.ports = [Port(1, "p1", z0), Port(2, n_out, z0)]
    return net


def extract_parasitics(design: LNADesign, spec: CircuitSpec, routed,
                       tech: TechParams, net_slots: dict,
                       mesh=None, terminals=None) -> ParasiticNetlist:
    """Back-annotate the routed layout into the LNA verification network.

    net_slots maps every routed net name onto a signal-path slot; a routed
    net missing from the map raises ExtractionError. The PDN mesh, when
    given, contributes extra supply decoupling capacitance on the vdd slot.
    terminals may map a net onto its two signal endpoints (x, y, layer);
    the slot series resistance then follows the tree path between them
    (branch spurs keep their capacitance but carry no through current).
    """
    per_net = {}
    slot_r = {s: 0.0 for s in NET_SLOTS}
    slot_c = {s: 0.0 for s in NET_SLOTS}
    for name in sorted(routed.trees):
        if name not in net_slots:
            raise ExtractionError(name)
        slot = net_slots[name]
        if slot not in NET_SLOTS:
            raise ExtractionError(name)
        r, c, nv = wire_parasitics(routed.trees[name], tech)
        per_net[name] = NetParasitics(name, slot, r, c, nv)
        if terminals and name in terminals:
            a, b = terminals[name]
            r = tree_path_resistance(routed.trees[name], a, b, tech)
        slot_r[slot] += r
        slot_c[slot] += c
    if mesh is not None:
        slot_c["vdd"] += mesh.decap_total_c

    # bias wiring carries no AC signal: recorded, not stamped
    stamped_r = {s: r for s, r in slot_r.items() if s != "bias" and r > 0.0}
    stamped_c = {s: c for s, c in slot_c.items() if s != "bias" and c > 0.0}

    # input-path series loss drives the noise figure: interconnect R of the
    # in/gate nets plus the gate passive's own series resistance at f0
    p_g = design.passives["g"]
    t_g = em.inductor_tank(p_g.geometry, tech) if p_g.kind == "spiral" \
        else em.tline_tank(p_g.geometry, tech)
    r_loss = slot_r["in"] + slot_r["gate"] + t_g.r_series(design.f0)

    network = build_lna_network(design, spec, tech, stamped_r, stamped_c,
                                ideal=False)
    return ParasiticNetlist(network=network, per_net=per_net,
                            slot_r=slot_r, slot_c=slot_c, r_loss=r_loss)


# ---------------------------------------------------------------------------
# performance evaluation


def default_sweep(f0: float, n: int = 201) -> np.ndarray:
    """Log-spaced sweep over [f0/2, 2 f0]; the midpoint lands on f0."""
    return f0 * np.logspace(math.log10(0.5), math.log10(2.0), n)


def nf_db_with_rloss(design: LNADesign, spec: CircuitSpec,
                     tech: TechParams, r_loss: float) -> float:
    """Closed-form noise figure with the extracted input-path loss
    substituted for the technology's default loss estimate."""
    d = tech.device
    fr = spec.f0 / d["ft_hz"]
    skin = 4.0 / ((1.0 / fr) ** 2 + 1.0) + 1.0
    a = d["gamma"] * d["gm_s"] * design.r_in * fr ** 2 * skin
    b = 4.0 * design.r_in * fr ** 2 / d["rd_ohm"] + r_loss / design.r_in
    c = d["rg_ohm"] / design.r_in
    nf_lin = 1.0 + a * design.n + b + c / design.n
    return 10.0 * math.log10(nf_lin)


@dataclass
class PerfReport:
    f0: float
    freqs: list
    s: list                       # per-frequency 2x2 complex S (nested)
    g_db: float
    s11_db: float
    nf_db: float | None
    bw_hz: float
    bw_unbounded: bool
    f_center_hz: float
    kappa_min: float
    kcl_residual: float
    r_loss: float
    passes: dict
    iteration: int = 0

    @property
    def all_pass(self) -> bool:
        return all(self.passes.values())


def _interp_crossing(f_lo, f_hi, v_lo, v_hi, level):
    """Log-frequency linear interpolation of a level crossing."""
    t = (level - v_lo) / (v_hi - v_lo)
    return math.exp(math.log(f_lo) + t * (math.log(f_hi) - math.log(f_lo)))


def perf_report(freqs, smats, design: LNADesign | None, spec: CircuitSpec,
                tech: TechParams, r_loss: float = 0.0,
                kcl: float = 0.0, iteration: int = 0) -> PerfReport:
    """Score a swept 2-port against the specification. design may be None
    when the spec carries no NF target (the NF model needs N and R_in)."""
    if design is None and spec.nf_db is not None:
        raise ValueError("NF target requires the sized design")
    freqs = np.asarray(freqs, dtype=float)
    smats = np.asarray(smats, dtype=complex)
    if spec.f0 < freqs[0] * (1 - 1e-9) or spec.f0 > freqs[-1] * (1 + 1e-9):
        raise SweepCoverage(
            f"f0 = {spec.f0:.4g} Hz outside sweep "
            f"[{freqs[0]:.4g}, {freqs[-1]:.4g}] Hz")
    i0 = int(np.argmin(np.abs(np.log(freqs) - math.log(spec.f0))))

    s21_db = 20.0 * np.log10(np.maximum(np.abs(smats[:, 1, 0]), 1e-300))
    s11_mag = np.abs(smats[:, 0, 0])
    s11_db_f0 = (-math.inf if s11_mag[i0] == 0.0
                 else 20.0 * math.log10(s11_mag[i0]))
    g_db = float(s21_db[i0])

    # center frequency: |S21| peak, parabolic refinement in log f
    ic = int(np.argmax(s21_db))
    if 0 < ic < len(freqs) - 1:
        y0, y1, y2 = s21_db[ic - 1], s21_db[ic], s21_db[ic + 1]
        denom = y0 - 2.0 * y1 + y2
        off = 0.0 if denom == 0.0 else 0.5 * (y0 - y2) / denom
        lf = np.log(freqs)
        step = lf[ic + 1] - lf[ic]
        f_center = float(np.exp(lf[ic] + off * step))
    else:
        f_center = float(freqs[ic])

    # half-power (-3 dB) bandwidth around f0, referenced to |S21(f0)|
    ref = g_db - 10.0 * math.log10(2.0)
    lo_f, hi_f = float(freqs[0]), float(freqs[-1])
    unbounded_lo = unbounded_hi = True
    for i in range(i0, 0, -1):
        if s21_db[i - 1] < ref <= s21_db[i]:
            lo_f = _interp_crossing(freqs[i - 1], freqs[i],
                                    s21_db[i - 1], s21_db[i], ref)
            unbounded_lo = False
            break
    for i in range(i0, len(freqs) - 1):
        if s21_db[i + 1] < ref <= s21_db[i]:
            hi_f = _interp_crossing(freqs[i], freqs[i + 1],
                                    s21_db[i], s21_db[i + 1], ref)
            unbounded_hi = False
            break
    bw = hi_f - lo_f
    bw_unbounded = unbounded_lo or unbounded_hi

    kappa_min = min(stability_kappa(smats[i]) for i in range(len(freqs)))
    nf = (nf_db_with_rloss(design, spec, tech, r_loss)
          if spec.nf_db is not None else None)

    passes = {
        "gain": bool(g_db >= spec.g_db),
        "s11": bool(s11_db_f0 <= spec.s11_max_db),
        "bw": bool(bw_unbounded or bw >= spec.bw),
        "stability": bool(kappa_min > 1.0),
    }
    if spec.nf_db is not None:
        passes["nf"] = bool(nf <= spec.nf_db)

    return PerfReport(
        f0=spec.f0, freqs=freqs.tolist(),
        s=[[[complex(v) for v in row] for row in m] for m in smats],
        g_db=g_db, s11_db=s11_db_f0, nf_db=nf, bw_hz=float(bw),
        bw_unbounded=bw_unbounded, f_center_hz=f_center,
        kappa_min=float(kappa_min), kcl_residual=float(kcl),
        r_loss=float(r_loss), passes=dict(passes), iteration=iteration)


def sweep_network(network: Network, freqs):
    """(S matrices, worst KCL residual) over the sweep."""
    smats = []
    worst = 0.0
    for f in freqs:
        s, res = solve_point(network, float(f))
        smats.append(s)
        worst = max(worst, res)
    return np.array(smats), worst


# ---------------------------------------------------------------------------
# respin


@dataclass(frozen=True)
class RespinDecision:
    status: str                   # "done" | "respin" | "give_up"
    spec: CircuitSpec
    iteration: int
    adjustments: dict = field(default_factory=dict)


def respin(spec: CircuitSpec, report: PerfReport,
           iteration: int) -> RespinDecision:
    """All-pass -> done. Otherwise tighten each failed item by its full
    shortfall plus a 5% margin so the next sizing pass overshoots the
    miss; after MAX_RESPIN failed iterations, give up."""
    if report.all_pass:
        return RespinDecision("done", spec, iteration)
    if iteration + 1 >= MAX_RESPIN:
        return RespinDecision("give_up", spec, iteration + 1)

    adjust = {}
    g_db, nf_db, bw, s11 = spec.g_db, spec.nf_db, spec.bw, spec.s11_max_db
    if not report.passes["gain"]:
        short = spec.g_db - report.g_db
        g_db = spec.g_db + 1.05 * short
        adjust["g_db"] = g_db
    if spec.nf_db is not None and not report.passes.get("nf", True):
        excess = report.nf_db - spec.nf_db
        nf_db = spec.nf_db - 1.05 * excess
        adjust["nf_db"] = nf_db
    if not report.passes["bw"]:
        deficit = spec.bw - report.bw_hz
        bw = spec.bw + 1.05 * deficit
        adjust["bw_hz"] = bw
    if not report.passes["s11"]:
        excess = report.s11_db - spec.s11_max_db
        s11 = spec.s11_max_db - 1.05 * excess
        adjust["s11_max_db"] = s11

    new_spec = CircuitSpec(
        topology=spec.topology, f0=spec.f0, g_db=g_db, bw=bw,
        c_load=spec.c_load, s11_max_db=s11, nf_db=nf_db,
        p_sat_dbm=spec.p_sat_dbm, pad_sides=spec.pad_sides,
        critical_nets=spec.critical_nets, d_halo=spec.d_halo)
    return RespinDecision("respin", new_spec, iteration + 1, adjust)
