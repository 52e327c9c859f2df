"""Analytical amplifier sizing: closed-form gain/noise/matching equations
coupled to the passive surrogate.

The LNA path sweeps (multiplier N, input resistance R_in) pairs, realizes
the three matching inductors through the inverse synthesizer, then sweeps a
CPW (Z, theta) grid for the input match and keeps the candidate with the
smallest normalized shortfall against the specification. The PA path sizes
a cascode chain from saturation-power and load-line relations and builds
per-interface conjugate L-matches.

Unit convention: the unit device is 1 um of gate width, so the LNA
multiplier N is also a width in um and all per-unit device constants
(g_m, C_gs, C_gd, C_d) are per um of width.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

from . import em_oracle as em
from . import surrogate as su
from .dataset import EmDataset
from .errors import (MatchInfeasible, NoFeasibleInductor, NoFeasibleSize,
                     PowerInfeasible)
from .tech import TechParams

R_IN_MIN = 40.0
R_IN_MAX = 60.0
R_IN_STEP = 5.0
Z_CPW_MIN = 18.0
Z_CPW_MAX = 50.0
Z_CPW_STEP = 2.0
THETA_STEP = math.pi / 36.0


@dataclass(frozen=True)
class CircuitSpec:
    """Performance targets for one amplifier."""

    topology: str                 # "LNA" or "PA"
    f0: float                     # Hz
    g_db: float
    bw: float                     # Hz
    c_load: float                 # F
    s11_max_db: float
    nf_db: float | None = None    # LNA only
    p_sat_dbm: float | None = None  # PA only
    pad_sides: dict = field(default_factory=dict)   # net -> N/E/S/W
    critical_nets: tuple = ()
    d_halo: float = 2.0           # um

    def __post_init__(self):
        if self.topology not in ("LNA", "PA"):
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.f0 <= 0:
            raise ValueError("f0 must be positive")
        if self.s11_max_db >= 0:
            raise ValueError("S11_max must be negative (dB)")
        if self.topology == "LNA" and self.nf_db is None:
            raise ValueError("LNA spec requires NF")
        if self.topology == "PA" and self.p_sat_dbm is None:
            raise ValueError("PA spec requires P_sat")

    @classmethod
    def from_dict(cls, doc: dict) -> "CircuitSpec":
        return cls(
            topology=doc["topology"],
            f0=float(doc["f0_hz"]),
            g_db=float(doc["g_db"]),
            bw=float(doc["bw_hz"]),
            c_load=float(doc["c_load_f"]),
            s11_max_db=float(doc["s11_max_db"]),
            nf_db=(float(doc["nf_db"]) if "nf_db" in doc else None),
            p_sat_dbm=(float(doc["p_sat_dbm"]) if "p_sat_dbm" in doc else None),
            pad_sides=dict(doc.get("pad_sides", {})),
            critical_nets=tuple(doc.get("critical_nets", ())),
            d_halo=float(doc.get("d_halo_um", 2.0)),
        )


@dataclass(frozen=True)
class PassiveChoice:
    """A realized inductive passive: target value, geometry, EM signature."""

    kind: str                 # "spiral" or "tline"
    geometry: object          # InductorGeometry or TlineGeometry
    response: em.EmResponse
    l_target: float
    z_eff: float              # SRF-aware impedance at f0
    c_eq: float               # 1 / (omega0 * z_eff)

    @property
    def l_realized(self) -> float:
        return self.response.L

    @property
    def c_par(self) -> float:
        """Tank parasitic capacitance back-solved from (L, f_SRF)."""
        return 1.0 / ((2.0 * math.pi * self.response.f_srf) ** 2
                      * self.response.L)


@dataclass(frozen=True)
class CpwChoice:
    z: float
    theta: float
    geometry: em.CpwGeometry
    z_realized: float
    theta_realized: float


@dataclass
class SurrogateBundle:
    """Everything the sizer needs from the learning stage."""

    synthesizer: su.InductorSynthesizer
    tline_dataset: EmDataset
    cpw_dataset: EmDataset


@dataclass
class LNADesign:
    n: int
    r_in: float
    l_s: float
    l_g: float
    l_d: float
    passives: dict            # "s"/"g"/"d" -> PassiveChoice
    c_in: float
    c_d: float
    c_out: float
    cpw: CpwChoice
    z_in_mos: complex
    z_g: float
    theta_g: float
    z_in_lna: complex
    q_out: float
    predicted: dict           # G_db, NF_db, BW_hz, S11_db, P_w
    f0: float
    em_aware: bool = True


@dataclass
class PAStageMatch:
    """Interstage conjugate L-match between stage i and stage i+1."""

    l_d: float                # shunt drain inductor (ideal target, H)
    l_g: float                # shunt gate inductor (ideal target, H)
    c_series: float           # series capacitor, F
    c_d: float                # effective drain-side capacitance record, F
    drain_passive: PassiveChoice
    gate_passive: PassiveChoice
    z_drain: complex
    z_gate: complex


@dataclass
class PADesign:
    n_stages: int
    widths: list              # um, input to output
    matches: list             # PAStageMatch per interface
    predicted: dict           # G_db, P_sat_out_dbm, BW_hz
    f0: float


# ---------------------------------------------------------------------------
# LNA closed forms


def _noise_terms(r_in: float, spec: CircuitSpec, tech: TechParams):
    """Coefficients of NF(N) = 1 + A*N + B + C/N at the given R_in."""
    d = tech.device
    fr = spec.f0 / d["ft_hz"]
    skin = 4.0 / ((1.0 / fr) ** 2 + 1.0) + 1.0
    a = d["gamma"] * d["gm_s"] * r_in * fr ** 2 * skin
    b = 4.0 * r_in * fr ** 2 / d["rd_ohm"] + d["rloss_ohm"] / r_in
    c = d["rg_ohm"] / r_in
    return a, b, c


def nf_linear(n: int, r_in: float, spec: CircuitSpec, tech: TechParams) -> float:
    a, b, c = _noise_terms(r_in, spec, tech)
    return 1.0 + a * n + b + c / n


def min_nf_multiplier(spec: CircuitSpec, tech: TechParams,
                      r_in: float = 50.0) -> float:
    """Continuous minimum-noise width multiplier."""
    d = tech.device
    fr = spec.f0 / d["ft_hz"]
    skin = 4.0 / ((1.0 / fr) ** 2 + 1.0) + 1.0
    return (d["ft_hz"] / (spec.f0 * r_in)) \
        * math.sqrt(d["rg_ohm"] / (d["gamma"] * d["gm_s"] * skin))


def candidate_multipliers(spec: CircuitSpec, tech: TechParams,
                          r_in: float = 50.0) -> list:
    """Candidate width multipliers: the integer minimum-noise value plus the
    integer neighbors of the NF-target quadratic's real roots.

    NF(N) = 1 + A N + B + C/N rearranges to A N^2 + (1 + B - NF) N + C = 0;
    each real root contributes its floor and ceiling so the brute-force
    integer optimum is never lost to rounding. Candidates outside
    [1, n_max] are dropped; an empty set raises NoFeasibleSize.
    """
    n_max = int(tech.device["n_max"])
    cands = set()

    n_nf = min_nf_multiplier(spec, tech, r_in)
    # NF(N) is convex in N, so the integer minimizer is whichever of
    # floor/ceil has the lower NF; neighbors outside [1, n_max] are dropped
    neigh = {v for v in (math.floor(n_nf), math.ceil(n_nf))
             if 1 <= v <= n_max}
    if neigh:
        cands.add(int(min(neigh, key=lambda v: nf_linear(v, r_in, spec, tech))))

    if spec.nf_db is not None:
        nf_lin = 10.0 ** (spec.nf_db / 10.0)
        a, b, c = _noise_terms(r_in, spec, tech)
        disc = (1.0 + b - nf_lin) ** 2 - 4.0 * a * c
        if disc >= 0.0:
            for sign in (-1.0, 1.0):
                root = ((nf_lin - 1.0 - b) + sign * math.sqrt(disc)) / (2.0 * a)
                for cand in (math.floor(root), math.ceil(root)):
                    if 1 <= cand <= n_max:
                        cands.add(int(cand))

    if not cands:
        raise NoFeasibleSize(
            f"no width multiplier in [1, {n_max}] for f0={spec.f0:.3g} Hz")
    return sorted(cands)


def degeneration_inductor(n: int, r_in: float, tech: TechParams) -> float:
    """Source inductance realizing Re(Z_in) = R_in by inductive degeneration:
    L_s = (R_in - R_g/N) * C_gs / g_m (per-unit C_gs/g_m ratio)."""
    d = tech.device
    return (r_in - d["rg_ohm"] / n) * d["cgs_f"] / d["gm_s"]


def matching_inductors(n: int, r_in: float, spec: CircuitSpec,
                       tech: TechParams) -> tuple[float, float, float]:
    """(L_s, L_g, L_d) ideal values for one (N, R_in) candidate."""
    d = tech.device
    w0 = 2.0 * math.pi * spec.f0
    l_s = degeneration_inductor(n, r_in, tech)
    l_d = 1.0 / ((n * d["cd_f"] + spec.c_load) * w0 ** 2)
    l_g = 1.0 / (n * d["cgs_f"] * w0 ** 2) - l_s
    return l_s, l_g, l_d


def z_in_mos(n: int, l_s: float, f0: float, tech: TechParams) -> complex:
    """Degenerated-MOS input impedance; Re equals R_in when l_s is the ideal
    degeneration value, and tracks the realized inductor otherwise."""
    w0 = 2.0 * math.pi * f0
    d = tech.device
    re = d["gm_s"] / d["cgs_f"] * l_s + d["rg_ohm"] / n
    return complex(re, l_s * w0 - 1.0 / (n * d["cgs_f"] * w0))


def line_transform(z_load: complex, z0_line: float, theta: float) -> complex:
    """Lossless-line input impedance for a load z_load."""
    t = math.tan(theta)
    return z0_line * (z_load + 1j * z0_line * t) / (z0_line + 1j * z_load * t)


def z_in_lna(z_mos: complex, z_g: float, theta_g: float,
             z_cpw: float, theta_cpw: float) -> complex:
    inner = line_transform(z_mos, z_g, theta_g)
    return line_transform(inner, z_cpw, theta_cpw)


def reflection(z: complex, z0: float = 50.0) -> complex:
    return (z - z0) / (z + z0)


def s11_db(z: complex, z0: float = 50.0) -> float:
    gamma = abs(reflection(z, z0))
    if gamma == 0.0:
        return -math.inf
    return 20.0 * math.log10(gamma)


def realize_inductor(l_target: float, bundle: SurrogateBundle,
                     tech: TechParams, f0: float) -> PassiveChoice:
    """Map an ideal inductance to a spiral or T-line geometry."""
    w0 = 2.0 * math.pi * f0
    kind = su.select_passive_kind(l_target, tech)
    if kind == "tline":
        geom = su.inverse_tline(l_target, bundle.tline_dataset)
        resp = em.tline_em(geom, tech)
    else:
        try:
            choice = bundle.synthesizer.query(l_target)
        except NoFeasibleInductor:
            choice = bundle.synthesizer.query(l_target, eps=0.10)
        geom, resp = choice.best.geometry, choice.best.predicted
    z_eff = em.effective_impedance(resp.L, resp.f_srf, f0)
    c_eq = math.inf if z_eff == 0.0 else 1.0 / (w0 * z_eff)
    return PassiveChoice(kind=kind, geometry=geom, response=resp,
                         l_target=l_target, z_eff=z_eff, c_eq=c_eq)


def _lna_candidate(n: int, r_in: float, spec: CircuitSpec, tech: TechParams,
                   bundle: SurrogateBundle, em_aware: bool):
    """Realize passives for one (N, R_in); None when L_g is non-positive."""
    d = tech.device
    w0 = 2.0 * math.pi * spec.f0
    l_s, l_g, l_d = matching_inductors(n, r_in, spec, tech)
    if l_g <= 0.0 or l_s <= 0.0 or l_d <= 0.0:
        return None

    p_s = realize_inductor(l_s, bundle, tech, spec.f0)
    p_g = realize_inductor(l_g, bundle, tech, spec.f0)
    p_d = realize_inductor(l_d, bundle, tech, spec.f0)

    if em_aware:
        # the realized drain tank adds its own parasitic capacitance; retarget
        # L_d once so the output tank still resonates at f0
        l_d_comp = 1.0 / ((n * d["cd_f"] + spec.c_load + p_d.c_par) * w0 ** 2)
        p_d = realize_inductor(l_d_comp, bundle, tech, spec.f0)
        l_d = l_d_comp

    return l_s, l_g, l_d, p_s, p_g, p_d


def size_lna(spec: CircuitSpec, tech: TechParams, bundle: SurrogateBundle,
             em_aware: bool = True) -> LNADesign:
    """Full LNA sweep; returns the minimum-shortfall passing design.

    With em_aware=False the sizer ignores every layout-induced effect:
    ideal inductances feed the matching equations directly and the drain
    tank is not retargeted for parasitic capacitance.
    """
    if spec.topology != "LNA":
        raise ValueError("size_lna requires an LNA spec")
    d = tech.device
    w0 = 2.0 * math.pi * spec.f0
    z0 = tech.z0_ohm
    nf_spec_lin = 10.0 ** (spec.nf_db / 10.0)
    g_spec_lin = 10.0 ** (spec.g_db / 10.0)

    n_r = int(round((R_IN_MAX - R_IN_MIN) / R_IN_STEP))
    r_grid = [R_IN_MIN + i * R_IN_STEP for i in range(n_r + 1)]
    z_grid = [Z_CPW_MIN + 2.0 * i
              for i in range(int((Z_CPW_MAX - Z_CPW_MIN) / Z_CPW_STEP) + 1)]
    theta_grid = [THETA_STEP * k for k in range(1, 18)]  # (0, pi/2) exclusive

    best = None
    best_key = None
    best_s11 = math.inf

    for n in candidate_multipliers(spec, tech):
        for r_in in r_grid:
            cand = _lna_candidate(n, r_in, spec, tech, bundle, em_aware)
            if cand is None:
                continue
            l_s, l_g, l_d, p_s, p_g, p_d = cand

            # gate passive as an equivalent line section: impedance from the
            # SRF-aware closed form, phase from its electrical length at f0
            if em_aware:
                z_g = p_g.z_eff
                theta_g = 0.5 * math.pi * spec.f0 / p_g.response.f_srf
                l_s_eff = p_s.l_realized
            else:
                theta_g = 0.5 * math.pi * spec.f0 / p_g.response.f_srf
                z_g = l_g * w0 / math.tan(theta_g)
                l_s_eff = l_s
            z_mos = z_in_mos(n, l_s_eff, spec.f0, tech)

            cpw_best = None
            for z_cpw in z_grid:
                for theta in theta_grid:
                    z_total = z_in_lna(z_mos, z_g, theta_g, z_cpw, theta)
                    s11 = s11_db(z_total, z0)
                    best_s11 = min(best_s11, s11)
                    if s11 > spec.s11_max_db:
                        continue
                    key = (s11, z_cpw, theta)
                    if cpw_best is None or key < cpw_best[0]:
                        cpw_best = (key, z_cpw, theta, z_total)
            if cpw_best is None:
                continue
            _, z_cpw, theta_cpw, z_total = cpw_best

            g_lin = (d["rd_ohm"] / (4.0 * r_in)) * (d["ft_hz"] / spec.f0) ** 2
            nf_lin = nf_linear(n, r_in, spec, tech)
            q_out = d["rd_ohm"] * w0 * (n * d["cd_f"] + spec.c_load)
            bw = spec.f0 / q_out
            perf = {
                "G_db": 10.0 * math.log10(g_lin),
                "NF_db": 10.0 * math.log10(nf_lin),
                "BW_hz": bw,
                "S11_db": s11_db(z_total, z0),
                "P_w": n * d["p_unit_w"],
            }
            # shortfall-only normalized deviation: overshooting a spec is free
            dev = (max(0.0, nf_lin - nf_spec_lin) / nf_spec_lin
                   + max(0.0, g_spec_lin - g_lin) / g_spec_lin
                   + max(0.0, spec.bw - bw) / spec.bw)
            key = (dev, n, r_in, z_cpw)
            if best_key is not None and key >= best_key:
                continue
            best_key = key
            best = (n, r_in, l_s, l_g, l_d, p_s, p_g, p_d, z_g, theta_g,
                    z_mos, z_cpw, theta_cpw, z_total, q_out, perf)

    if best is None:
        raise MatchInfeasible(
            f"no (N, R_in, CPW) candidate reaches S11 <= "
            f"{spec.s11_max_db:.1f} dB (best {best_s11:.2f} dB)",
            best_s11_db=best_s11)

    (n, r_in, l_s, l_g, l_d, p_s, p_g, p_d, z_g, theta_g,
     z_mos, z_cpw, theta_cpw, z_total, q_out, perf) = best

    cpw_geom = su.inverse_cpw(z_cpw, theta_cpw, bundle.cpw_dataset)
    cpw_resp = em.cpw_em(cpw_geom, spec.f0, tech)
    cpw = CpwChoice(z=z_cpw, theta=theta_cpw, geometry=cpw_geom,
                    z_realized=cpw_resp.z0, theta_realized=cpw_resp.theta)

    # positional (s, g, d) -> (C_in, C_d, C_out) equivalent-capacitance record
    return LNADesign(
        n=n, r_in=r_in, l_s=l_s, l_g=l_g, l_d=l_d,
        passives={"s": p_s, "g": p_g, "d": p_d},
        c_in=p_s.c_eq, c_d=p_g.c_eq, c_out=p_d.c_eq,
        cpw=cpw, z_in_mos=z_mos, z_g=z_g, theta_g=theta_g,
        z_in_lna=z_total, q_out=q_out, predicted=perf, f0=spec.f0,
        em_aware=em_aware)


def lna_input_impedance(design: LNADesign, f: float,
                        tech: TechParams) -> complex:
    """Input impedance of the sized LNA at an arbitrary frequency.

    Element values are frozen at their design values; line phases scale
    linearly with frequency. This is the reference the field verification
    must reproduce when wire parasitics are excluded.
    """
    d = tech.device
    w = 2.0 * math.pi * f
    scale = f / design.f0
    l_s_eff = (design.passives["s"].l_realized if design.em_aware
               else design.l_s)
    re = d["gm_s"] / d["cgs_f"] * l_s_eff + d["rg_ohm"] / design.n
    z_mos = complex(re, l_s_eff * w - 1.0 / (design.n * d["cgs_f"] * w))
    inner = line_transform(z_mos, design.z_g, design.theta_g * scale)
    return line_transform(inner, design.cpw.z, design.cpw.theta * scale)


def input_match_trajectory(design: LNADesign, z0: float = 50.0) -> list:
    """Reflection coefficients along the match: bare MOS (A), after the gate
    passive (B), after the CPW (C)."""
    a = design.z_in_mos
    b = line_transform(a, design.z_g, design.theta_g)
    c = line_transform(b, design.cpw.z, design.cpw.theta)
    return [reflection(a, z0), reflection(b, z0), reflection(c, z0)]


# ---------------------------------------------------------------------------
# PA sizing


def stage_gain_linear(spec: CircuitSpec, tech: TechParams) -> float:
    d = tech.device
    return (d["rd_ohm"] / (4.0 * d["rg_ohm"])) * (d["ft_hz"] / spec.f0) ** 2


def n_stages(spec: CircuitSpec, tech: TechParams) -> int:
    g_stage_db = 10.0 * math.log10(stage_gain_linear(spec, tech))
    return max(1, math.ceil(spec.g_db / g_stage_db))


def stage_widths(w_out: float, n: int, tech: TechParams) -> list:
    """Geometric width progression from W_in to W_out."""
    w_in = tech.device["w_in_um"]
    if n == 1:
        return [w_out]
    ratio = (w_in / w_out) ** (1.0 / (n - 1))
    widths = [0.0] * n
    widths[-1] = w_out
    for i in range(n - 2, -1, -1):
        widths[i] = widths[i + 1] * ratio
    return widths


def psat_watts(width_um: float, tech: TechParams) -> float:
    d = tech.device
    return width_um * d["jopt_a_per_um"] * (d["vdd_v"] - d["vdsat_v"]) / 4.0


def chain_psat_out(w_out: float, n: int, spec: CircuitSpec,
                   tech: TechParams) -> float:
    """Output saturation power of the full chain for a given W_out."""
    g = stage_gain_linear(spec, tech)
    widths = stage_widths(w_out, n, tech)
    inv = 0.0
    for i, w in enumerate(widths):  # i = 0 .. n-1; stage i+1 in 1-based terms
        inv += 1.0 / (psat_watts(w, tech) * g ** (n - 1 - i))
    return 1.0 / inv


def solve_w_out(spec: CircuitSpec, tech: TechParams) -> float:
    """Bisection for the output-stage width meeting the P_sat target."""
    d = tech.device
    n = n_stages(spec, tech)
    p_target = 10.0 ** ((spec.p_sat_dbm - 30.0) / 10.0)
    lo, hi = d["w_in_um"], d["w_max_um"]
    if chain_psat_out(hi, n, spec, tech) < p_target:
        raise PowerInfeasible(
            f"P_sat {spec.p_sat_dbm} dBm needs W_out beyond "
            f"{d['w_max_um']} um")
    if chain_psat_out(lo, n, spec, tech) >= p_target:
        return lo
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if chain_psat_out(mid, n, spec, tech) >= p_target:
            hi = mid
        else:
            lo = mid
    return hi


def drain_admittance(width_um: float, f0: float, tech: TechParams) -> complex:
    d = tech.device
    w0 = 2.0 * math.pi * f0
    return complex(width_um * d["jopt_a_per_um"]
                   / (2.0 * (d["vdd_v"] - d["vdsat_v"])),
                   w0 * width_um * d["cd_f"])


def gate_impedance(width_um: float, f0: float, tech: TechParams) -> complex:
    d = tech.device
    w0 = 2.0 * math.pi * f0
    return d["rg_ohm"] / width_um + 1.0 / (1j * w0 * width_um * d["cgs_f"])


def _solve_l_match(y_drain: complex, r_load: float, f0: float):
    """Shunt-L / series-C match presenting conj(y_drain) at the drain plane.

    The series branch (C in series with the real load r_load) is solved from
    the real-part condition; the shunt inductor absorbs the remaining
    susceptance. Returns (l_shunt, c_series).
    """
    w0 = 2.0 * math.pi * f0
    g_d = y_drain.real
    if r_load * g_d > 1.0:
        raise MatchInfeasible("L-match load exceeds drain parallel resistance")
    x = -math.sqrt(r_load / g_d - r_load ** 2)
    y_branch = 1.0 / complex(r_load, x)
    # need: -1/(w0 L) + Im(y_branch) = -Im(y_drain)
    b_l = y_branch.imag + y_drain.imag
    if b_l <= 0.0:
        raise MatchInfeasible("L-match requires a capacitive shunt element")
    l_shunt = 1.0 / (w0 * b_l)
    c_series = -1.0 / (w0 * x)
    return l_shunt, c_series


def size_pa(spec: CircuitSpec, tech: TechParams,
            bundle: SurrogateBundle) -> PADesign:
    """Class-A cascode chain: stage count, widths, interstage matches."""
    if spec.topology != "PA":
        raise ValueError("size_pa requires a PA spec")
    d = tech.device
    w0 = 2.0 * math.pi * spec.f0
    n = n_stages(spec, tech)
    w_out = solve_w_out(spec, tech)
    widths = stage_widths(w_out, n, tech)

    matches = []
    for i in range(n - 1):
        w_i, w_next = widths[i], widths[i + 1]
        y_d = drain_admittance(w_i, spec.f0, tech)
        z_gate = gate_impedance(w_next, spec.f0, tech)

        # shunt gate inductor resonates the gate capacitance, leaving the
        # parallel-equivalent real part as the match load
        r_s, x_s = z_gate.real, z_gate.imag
        q_gate = -x_s / r_s
        r_par = r_s * (1.0 + q_gate ** 2)
        l_g = 1.0 / (w0 ** 2 * w_next * d["cgs_f"])

        l_d, c_series = _solve_l_match(y_d, r_par, spec.f0)

        p_d = realize_inductor(l_d, bundle, tech, spec.f0)
        p_g = realize_inductor(l_g, bundle, tech, spec.f0)

        # one refinement pass: fold the realized drain tank's parasitic
        # susceptance into the drain admittance, re-solve the match, realize
        # the new target, then re-solve once more against the final
        # realization so the stored ideal values are self-consistent
        try:
            l_d2, _ = _solve_l_match(y_d + 1j * w0 * p_d.c_par, r_par,
                                     spec.f0)
            p_d2 = realize_inductor(l_d2, bundle, tech, spec.f0)
            l_d, c_series = _solve_l_match(y_d + 1j * w0 * p_d2.c_par,
                                           r_par, spec.f0)
            p_d = p_d2
        except MatchInfeasible:
            pass  # keep the uncorrected solution

        matches.append(PAStageMatch(
            l_d=l_d, l_g=l_g, c_series=c_series,
            c_d=w_i * d["cd_f"] + p_d.c_par,
            drain_passive=p_d, gate_passive=p_g,
            z_drain=1.0 / y_d, z_gate=z_gate))

    g_stage_db = 10.0 * math.log10(stage_gain_linear(spec, tech))
    p_out = chain_psat_out(w_out, n, spec, tech)
    predicted = {
        "G_db": n * g_stage_db,
        "P_sat_out_dbm": 10.0 * math.log10(p_out) + 30.0,
        "BW_hz": spec.bw,
    }
    return PADesign(n_stages=n, widths=widths, matches=matches,
                    predicted=predicted, f0=spec.f0)
