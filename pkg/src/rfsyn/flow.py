"""End-to-end amplifier synthesis flow.

Stage 1 sizes the circuit from closed forms plus the passive surrogate
(dataset generation and forest training are cached preparation, reported
separately from stage timing). Stage 2 realizes the sized devices as layout
primitives and a netlist. Stage 3 places, routes, and synthesizes the power
grid. Stage 4 extracts parasitics, sweeps the S-parameters, scores the
result, and either finishes or tightens the specification and re-enters
Stage 1. Every artifact is a deterministic JSON or SVG document; the
manifest lists each file with a content digest.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import dataset as ds
from . import em_oracle as em
from . import pdn as pdn_mod
from . import plots
from . import primitives as pr
from . import router as rt
from . import sizing as sz
from . import surrogate as su
from . import verify as vf
from .errors import Infeasible
from .placer import bnb, legal, milp
from .tech import TechParams, default_tech, load_tech

SCHEMA_PREFIX = "rfsyn"

#: default pad nets for an LNA when the spec names no pad sides
DEFAULT_PAD_SIDES = {"IN": "W", "OUT": "E", "VDD": "N", "BIAS": "N",
                     "GND": "S"}

#: routed net -> verification lumping slot
LNA_NET_SLOTS = {"IN": "in", "n1": "gate", "G": "gate", "S": "src",
                 "OUT": "out", "VDD": "vdd", "GND": "gnd", "BIAS": "bias"}


@dataclass
class RunConfig:
    spec_path: str
    out_dir: str
    tech_path: str | None = None
    seed: int = 0
    stages: int = 4                  # run stages 1..stages
    ablation: bool = False
    gap: float = 0.05                # placement optimality gap target
    time_limit: float = 5.0          # placement solve budget, seconds
    dataset_path: str | None = None  # inductor dataset cache
    model_path: str | None = None    # forest cache

    def __post_init__(self):
        if self.stages not in (1, 2, 3, 4):
            raise ValueError("stages must select a contiguous prefix 1..4")


def load_spec_doc(doc: dict) -> tuple:
    """(CircuitSpec, pdn overrides). Accepts the user-facing schema
    (f0_ghz / gain_db / bw_ghz / cload_ff / halo_um) or the internal one
    (f0_hz / g_db / ...)."""
    if "f0_hz" in doc:
        return sz.CircuitSpec.from_dict(doc), dict(doc.get("pdn", {}))
    conv = {
        "topology": doc["topology"],
        "f0_hz": float(doc["f0_ghz"]) * 1e9,
        "g_db": float(doc["gain_db"]),
        "bw_hz": float(doc["bw_ghz"]) * 1e9,
        "c_load_f": float(doc["cload_ff"]) * 1e-15,
        "s11_max_db": float(doc["s11_max_db"]),
        "pad_sides": doc.get("pad_sides", {}),
        "critical_nets": doc.get("critical_nets", []),
    }
    if "nf_db" in doc:
        conv["nf_db"] = float(doc["nf_db"])
    if "psat_dbm" in doc:
        conv["p_sat_dbm"] = float(doc["psat_dbm"])
    if "halo_um" in doc:
        conv["d_halo_um"] = float(doc["halo_um"])
    return sz.CircuitSpec.from_dict(conv), dict(doc.get("pdn", {}))


def load_spec(path) -> tuple:
    return load_spec_doc(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# preparation (cached): datasets + surrogate


def prepare_bundle(spec: sz.CircuitSpec, tech: TechParams, seed: int,
                   dataset_path=None, model_path=None):
    """Surrogate bundle for the sizer; inductor dataset and forest are
    loadable from/saved to cache paths when given."""
    ind = None
    if dataset_path and Path(dataset_path).exists():
        ind = ds.load(dataset_path)
    if ind is None:
        geoms = ds.sample_geometries("inductor", None, 3000,
                                     seed=seed + 11, tech=tech)
        ind = ds.generate_dataset(geoms, tech, seed=seed + 11)
        if dataset_path:
            ds.save(ind, dataset_path)

    model = None
    if model_path and Path(model_path).exists():
        model = su.EmForestModel.load(model_path)
    if model is None:
        model = su.EmForestModel(n_estimators=40, random_state=seed + 5)
        model.fit(ind.features(), ind.targets())
        if model_path:
            model.save(model_path)

    tl = ds.generate_dataset(
        ds.sample_geometries("tline", None, 800, seed=seed + 9, tech=tech),
        tech, seed=seed + 9)
    cpw = ds.generate_dataset(
        ds.sample_geometries("cpw", None, 2000, seed=seed + 9, tech=tech),
        tech, f0=spec.f0, seed=seed + 9)
    return sz.SurrogateBundle(su.InductorSynthesizer(ind, model), tl, cpw)


# ---------------------------------------------------------------------------
# stage 2: primitives + netlist


def build_lna_blocks(design: sz.LNADesign, spec: sz.CircuitSpec,
                     tech: TechParams):
    """(blocks, nets, weights, pad_rules). The drain node and the OUT pad
    are one electrical net and are merged before routing."""

    def passive_block(bid: str, choice):
        if choice.kind == "spiral":
            return pr.gen_spiral(bid, choice.geometry, tech)
        return pr.gen_tline(bid, choice.geometry, tech)

    # generous finger count and width: the gate/source/drain pins must
    # clear each other's keep-out even when their nets route at the
    # doubled critical width
    n_f = max(8, design.n)
    blocks = [
        pr.gen_mos("M1", n_f, 6.0, tech),
        pr.gen_mos("MB", max(4, n_f // 2), 6.0, tech, kind="bias_mos"),
        passive_block("LS", design.passives["s"]),
        passive_block("LG", design.passives["g"]),
        passive_block("LD", design.passives["d"]),
        pr.gen_cpw("CW", design.cpw.geometry, tech),
    ]
    pad_sides = dict(DEFAULT_PAD_SIDES)
    pad_sides.update(spec.pad_sides)
    pad_rules = {}
    for net in sorted(pad_sides):
        blocks.append(pr.gen_pad(f"P_{net}", net, tech))
        pad_rules[f"P_{net}"] = (pad_sides[net],)

    nets = {
        "IN": [("P_IN", "PAD"), ("CW", "P1")],
        "n1": [("CW", "P2"), ("LG", "P1")],
        "G": [("LG", "P2"), ("M1", "G")],
        "S": [("M1", "S"), ("LS", "P1")],
        "GND": [("LS", "P2"), ("P_GND", "PAD"), ("MB", "S")],
        "OUT": [("M1", "D"), ("LD", "P1"), ("P_OUT", "PAD")],
        "VDD": [("LD", "P2"), ("P_VDD", "PAD")],
        "BIAS": [("P_BIAS", "PAD"), ("MB", "G")],
    }
    critical = set(spec.critical_nets) & set(nets) or {"IN", "G", "OUT",
                                                       "S"}
    # the full RF chain is length-weighted so the placer keeps it compact;
    # supply and bias wiring matters less
    weights = {"IN": 10.0, "n1": 10.0, "G": 10.0, "S": 10.0, "OUT": 10.0,
               "GND": 5.0, "VDD": 2.0, "BIAS": 1.0}
    for net in critical:
        weights[net] = 10.0
    return blocks, nets, weights, pad_rules


#: through-path endpoints of the multi-pin nets: branch spurs (the bias
#: mirror tap on GND, the output pad stub junction) carry no RF current
LNA_NET_TERMINALS = {
    "GND": (("LS", "P2"), ("P_GND", "PAD")),
    "OUT": (("M1", "D"), ("P_OUT", "PAD")),
}


def net_terminal_points(blocks, solution, nets) -> dict:
    """Resolve LNA_NET_TERMINALS to placed (x, y, layer) points."""
    by_id = {b.id: b for b in blocks}
    out = {}
    for net, ((b1, p1), (b2, p2)) in LNA_NET_TERMINALS.items():
        if net not in nets:
            continue
        pts = []
        for bid, pname in ((b1, p1), (b2, p2)):
            blk = by_id[bid]
            x, y, rot, vi = solution.positions[bid]
            px, py = legal.placed_pin_center(blk, x, y, rot, vi, pname)
            layer = next(p.layer for p in blk.variants[vi].pins
                         if p.name == pname)
            pts.append((px, py, layer))
        out[net] = tuple(pts)
    return out


# ---------------------------------------------------------------------------
# stage 3: place / route / pdn


def place(blocks, nets, weights, pad_rules, d_halo: float,
          gap: float, time_limit: float):
    """Greedy constructive placement, improved by branch-and-bound within
    the time budget; the returned solution is always legality-checked."""
    model = milp.build_milp(blocks, nets, weights, d_halo=d_halo,
                            p_io=70.0, pad_rules=pad_rules)
    greedy = legal.greedy_shelf(model, blocks, nets, weights)
    refined = legal.refine_shelf(model, blocks, nets, weights)
    candidates = [s for s in (greedy, refined) if s is not None]
    if not candidates:
        raise Infeasible("greedy constructor found no legal placement")
    sol = min(candidates, key=lambda s: s.objective)
    if time_limit > 0.0:
        improved = bnb.solve(model, gap=gap, time_limit=time_limit,
                             incumbent=sol)
        if improved.objective < sol.objective - 1e-9:
            sol = improved
    violations = legal.check_legal(sol, blocks, d_halo=d_halo, p_io=70.0,
                                   pad_rules=pad_rules)
    if violations:
        raise Infeasible(f"placement legality check failed: "
                             f"{violations[:3]}")
    return sol


#: bias toward straight routes: every layer change costs real resistance
ROUTE_VIA_COST = 20.0


def route(blocks, solution, nets, weights, tech: TechParams,
          critical) -> rt.RoutedLayout:
    grid = rt.build_grid(blocks, solution, nets, tech,
                         via_cost=ROUTE_VIA_COST)
    return rt.route_all(grid, weights, critical=set(critical) & set(nets))


# ---------------------------------------------------------------------------
# document serialization


def _geom_doc(geom) -> dict:
    if isinstance(geom, em.InductorGeometry):
        return {"type": "spiral", "t": geom.t, "w": geom.w, "s": geom.s,
                "r": geom.r}
    if isinstance(geom, em.TlineGeometry):
        return {"type": "tline", "l": geom.l, "w": geom.w}
    if isinstance(geom, em.CpwGeometry):
        return {"type": "cpw", "l": geom.l, "w": geom.w, "s": geom.s}
    raise TypeError(type(geom).__name__)


def sized_design_doc(design: sz.LNADesign, spec: sz.CircuitSpec) -> dict:
    passives = {}
    for role in sorted(design.passives):
        p = design.passives[role]
        passives[role] = {
            "kind": p.kind, "geometry": _geom_doc(p.geometry),
            "l_target_h": p.l_target, "l_realized_h": p.response.L,
            "f_srf_hz": p.response.f_srf, "q_peak": p.response.q_peak,
            "z_eff_ohm": p.z_eff,
        }
    traj = sz.input_match_trajectory(design)
    return {
        "schema": f"{SCHEMA_PREFIX}.sized_design/1",
        "topology": spec.topology,
        "f0_hz": design.f0,
        "em_aware": design.em_aware,
        "n": design.n,
        "r_in_ohm": design.r_in,
        "l_s_h": design.l_s, "l_g_h": design.l_g, "l_d_h": design.l_d,
        "passives": passives,
        "cpw": {"z_ohm": design.cpw.z, "theta_rad": design.cpw.theta,
                "geometry": _geom_doc(design.cpw.geometry),
                "z_realized_ohm": design.cpw.z_realized,
                "theta_realized_rad": design.cpw.theta_realized},
        "match_trajectory": [[g.real, g.imag] for g in traj],
        "predicted": dict(design.predicted),
    }


def layout_doc(blocks, solution, routed) -> dict:
    by_id = {b.id: b for b in blocks}
    placed = {}
    for bid in sorted(solution.positions):
        x, y, rot, vi = solution.positions[bid]
        r = legal.placed_rect(by_id[bid], x, y, rot, vi)
        placed[bid] = {"kind": by_id[bid].kind, "x": x, "y": y,
                       "rot": rot, "variant": vi,
                       "w": r[2] - r[0], "h": r[3] - r[1]}
    routes = {}
    if routed is not None:
        for net in sorted(routed.trees):
            tree = routed.trees[net]
            routes[net] = {
                "cost": tree.cost,
                "segments": [{"layer": s.layer, "width": s.width,
                              "x0": s.x0, "y0": s.y0,
                              "x1": s.x1, "y1": s.y1}
                             for s in tree.segments],
                "vias": [{"x": v.x, "y": v.y, "lower": v.lower,
                          "upper": v.upper, "size": v.size}
                         for v in tree.vias],
            }
    return {
        "schema": f"{SCHEMA_PREFIX}.layout/1",
        "placement_status": solution.status,
        "objective": solution.objective,
        "gap": (None if math.isinf(solution.gap) else solution.gap),
        "extent": (list(routed.extent) if routed is not None else None),
        "blocks": placed,
        "routes": routes,
    }


def pdn_doc(mesh) -> dict:
    return {
        "schema": f"{SCHEMA_PREFIX}.pdn/1",
        "straps": [{"net": s.net, "layer": s.layer, "x0": s.x0,
                    "y0": s.y0, "x1": s.x1, "y1": s.y1}
                   for s in mesh.straps],
        "n_vias": len(mesh.vias),
        "decaps": [{"x": d.x, "y": d.y, "size": d.size, "c_f": d.c_f}
                   for d in mesh.decaps],
        "decap_total_c_f": mesh.decap_total_c,
    }


def report_doc(report: vf.PerfReport) -> dict:
    return {
        "schema": f"{SCHEMA_PREFIX}.perf_report/1",
        "f0_hz": report.f0,
        "g_db": report.g_db,
        "s11_db": report.s11_db,
        "nf_db": report.nf_db,
        "bw_hz": report.bw_hz,
        "bw_unbounded": report.bw_unbounded,
        "f_center_hz": report.f_center_hz,
        "kappa_min": report.kappa_min,
        "kcl_residual": report.kcl_residual,
        "r_loss_ohm": report.r_loss,
        "passes": report.passes,
        "iteration": report.iteration,
        "freqs_hz": list(report.freqs),
        "s_ri": [[[[v.real, v.imag] for v in row] for row in m]
                 for m in report.s],
    }


def write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# flow


@dataclass
class FlowResult:
    status: str                    # "done" | "give_up" | "partial"
    manifest: dict
    design: object = None
    report: object = None
    spec: object = None


def run_flow(config: RunConfig, em_aware: bool = True,
             subdir: str = "") -> FlowResult:
    out = Path(config.out_dir) / subdir
    out.mkdir(parents=True, exist_ok=True)
    tech = (load_tech(config.tech_path) if config.tech_path
            else default_tech())
    spec, pdn_over = load_spec(config.spec_path)
    if spec.topology != "LNA":
        raise ValueError("the end-to-end flow currently drives LNA specs")

    files = {}
    stage_times = {}
    manifest = {"schema": f"{SCHEMA_PREFIX}.manifest/1",
                "seed": config.seed, "stages": config.stages,
                "em_aware": em_aware, "status": "partial",
                "iterations": 0, "stage_times_s": stage_times,
                "files": files}

    t_prep = time.monotonic()
    bundle = prepare_bundle(spec, tech, config.seed,
                            config.dataset_path, config.model_path)
    stage_times["prep"] = round(time.monotonic() - t_prep, 3)

    pdn_cfg = pdn_mod.PdnConfig.from_tech(tech)
    if pdn_over:
        base = tech.pdn | pdn_over
        pdn_cfg = pdn_mod.PdnConfig(
            tuple(base["gnd_layers"]), tuple(base["vdd_layers"]),
            float(base["strap_width_um"]), float(base["strap_pitch_um"]),
            float(base["decap_c_f"]))

    status = "partial"
    design = report = None
    cur_spec = spec
    iteration = 0

    def emit(name: str, doc_or_text):
        path = out / name
        if isinstance(doc_or_text, dict):
            write_json(path, doc_or_text)
        else:
            path.write_text(doc_or_text)
        files[name] = _digest(path)

    while True:
        t1 = time.monotonic()
        design = sz.size_lna(cur_spec, tech, bundle, em_aware=em_aware)
        stage_times["1_size"] = round(time.monotonic() - t1, 3)
        emit("sized_design.json", sized_design_doc(design, cur_spec))
        emit("smith.svg",
             plots.smith_chart_svg(sz.input_match_trajectory(design)))
        if config.stages < 2:
            status = "done" if config.stages < 4 else status
            break

        t2 = time.monotonic()
        blocks, nets, weights, pad_rules = build_lna_blocks(
            design, cur_spec, tech)
        stage_times["2_primitives"] = round(time.monotonic() - t2, 3)
        emit("netlist.json", {
            "schema": f"{SCHEMA_PREFIX}.netlist/1",
            "nets": {n: [list(p) for p in pins]
                     for n, pins in sorted(nets.items())},
            "blocks": {b.id: b.kind for b in blocks},
            "weights": weights,
        })
        if config.stages < 3:
            status = "done"
            break

        t3 = time.monotonic()
        solution = place(blocks, nets, weights, pad_rules,
                         cur_spec.d_halo, config.gap, config.time_limit)
        routed = route(blocks, solution, nets, weights, tech,
                       cur_spec.critical_nets or set(weights))
        mesh = pdn_mod.synthesize_pdn(blocks, solution, routed, tech,
                                      pdn_cfg)
        pdn_mod.fill_decaps(blocks, solution, routed, mesh, tech, pdn_cfg)
        stage_times["3_layout"] = round(time.monotonic() - t3, 3)
        emit("layout.json", layout_doc(blocks, solution, routed))
        emit("pdn.json", pdn_doc(mesh))
        emit("layout.svg", plots.layout_svg(blocks, solution, routed,
                                            mesh))
        if config.stages < 4:
            status = "done"
            break

        t4 = time.monotonic()
        pn = vf.extract_parasitics(
            design, cur_spec, routed, tech, LNA_NET_SLOTS, mesh,
            terminals=net_terminal_points(blocks, solution, nets))
        freqs = vf.default_sweep(cur_spec.f0)
        smats, kcl = vf.sweep_network(pn.network, freqs)
        report = vf.perf_report(freqs, smats, design, cur_spec, tech,
                                r_loss=pn.r_loss, kcl=kcl,
                                iteration=iteration)
        stage_times["4_verify"] = round(time.monotonic() - t4, 3)
        emit("perf_report.json", report_doc(report))
        s21_db = [20 * math.log10(max(abs(m[1][0]), 1e-300))
                  for m in report.s]
        s11_db = [20 * math.log10(max(abs(m[0][0]), 1e-300))
                  for m in report.s]
        emit("s21.svg", plots.sweep_plot_svg(report.freqs, s21_db,
                                             cur_spec.f0, "|S21| (dB)"))
        emit("s11.svg", plots.sweep_plot_svg(report.freqs, s11_db,
                                             cur_spec.f0, "|S11| (dB)"))

        decision = vf.respin(cur_spec, report, iteration)
        if decision.status == "done":
            status = "done"
            break
        if decision.status == "give_up":
            status = "give_up"
            iteration = decision.iteration
            break
        cur_spec = decision.spec
        iteration = decision.iteration
        manifest["respins"] = manifest.get("respins", [])
        manifest["respins"].append(decision.adjustments)

    manifest["status"] = status
    manifest["iterations"] = iteration
    write_json(out / "manifest.json", manifest)
    return FlowResult(status=status, manifest=manifest, design=design,
                      report=report, spec=cur_spec)


def ablation_mode(config: RunConfig) -> dict:
    """Run the flow with and without EM-awareness and compare the verified
    center frequencies."""
    aware = run_flow(config, em_aware=True, subdir="em_aware")
    blind = run_flow(config, em_aware=False, subdir="oblivious")
    doc = {
        "schema": f"{SCHEMA_PREFIX}.ablation/1",
        "em_aware": {"status": aware.status,
                     "report": report_doc(aware.report)
                     if aware.report else None},
        "oblivious": {"status": blind.status,
                      "report": report_doc(blind.report)
                      if blind.report else None},
    }
    if aware.report and blind.report:
        fa = aware.report.f_center_hz
        fb = blind.report.f_center_hz
        doc["delta_f_center_hz"] = fb - fa
        doc["shift_pct"] = 100.0 * (fb - fa) / fa
    write_json(Path(config.out_dir) / "ablation.json", doc)
    return doc
