"""Analytical electromagnetic models for spiral inductors, T-lines, and CPWs.

These closed forms stand in for a full-wave field solver: they generate the
labeled dataset the surrogate trains on and serve as the post-layout
verification reference. Every formula is documented in ``docs/em_oracle.md``
so expected test values can be recomputed by hand.

All functions are pure: identical inputs give bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import ellipk

from .errors import InvalidGeometry, OutOfModelRange
from .tech import TechParams

MU0 = 4.0e-7 * math.pi
C_LIGHT = 2.99792458e8

# Current-sheet coefficients for a square spiral.
WHEELER_K1 = 2.34
WHEELER_K2 = 2.75

FRAC_CLASSES = ("1/4T", "1/2T", "3/4T", "1T")

_FRAC_OF_CLASS = {"1/4T": 0.25, "1/2T": 0.5, "3/4T": 0.75, "1T": 0.0}


def frac_class_of_turns(t: float) -> str:
    """Map turn count (quarter-turn resolution) to its terminal class."""
    quarters = round(t * 4.0)
    if abs(t * 4.0 - quarters) > 1e-9 or quarters < 1:
        raise InvalidGeometry(f"turn count {t} is not a positive quarter-turn multiple")
    return FRAC_CLASSES[(quarters - 1) % 4]


@dataclass(frozen=True)
class InductorGeometry:
    """Square spiral: t turns of width w spaced s around inner radius r (um)."""

    t: float
    w: float
    s: float
    r: float

    @property
    def frac_class(self) -> str:
        return frac_class_of_turns(self.t)

    @property
    def d_in(self) -> float:
        return 2.0 * self.r

    @property
    def d_out(self) -> float:
        return self.d_in + 2.0 * self.t * (self.w + self.s)

    @property
    def d_avg(self) -> float:
        return 0.5 * (self.d_in + self.d_out)

    @property
    def unwound_length(self) -> float:
        """Total conductor length (um), square-spiral perimeter approximation."""
        return 4.0 * self.t * self.d_avg


@dataclass(frozen=True)
class EmResponse:
    """Electrical signature of an inductive passive."""

    L: float        # inductance, H
    q_peak: float   # peak quality factor
    f_peak_q: float  # frequency of peak Q, Hz
    f_srf: float    # self-resonant frequency, Hz


@dataclass(frozen=True)
class TankModel:
    """One-port equivalent: series R(f)-L shunted by C_par."""

    L: float
    r_dc: float
    c_par: float
    f_skin: float

    def r_series(self, f: float) -> float:
        return self.r_dc * max(1.0, math.sqrt(f / self.f_skin))

    def q(self, f: float) -> float:
        fs = tank_response(self).f_srf
        return (2.0 * math.pi * f * self.L / self.r_series(f)) * (1.0 - (f / fs) ** 2)


@dataclass(frozen=True)
class CpwGeometry:
    """Coplanar waveguide: length l, signal width w, signal-ground gap s (um)."""

    l: float
    w: float
    s: float


@dataclass(frozen=True)
class CpwResponse:
    z0: float     # characteristic impedance, ohm
    theta: float  # electrical phase at the evaluation frequency, rad


@dataclass(frozen=True)
class TlineGeometry:
    """Shielded microstrip T-line: length l, width w (um)."""

    l: float
    w: float


def _check_inductor(geom: InductorGeometry, tech: TechParams) -> None:
    ind = tech.inductor
    frac_class_of_turns(geom.t)  # raises on non-quarter multiples
    if not ind["t_min"] <= geom.t <= ind["t_max"]:
        raise InvalidGeometry(f"t={geom.t} outside [{ind['t_min']}, {ind['t_max']}]")
    if not ind["w_min_um"] <= geom.w <= ind["w_max_um"]:
        raise InvalidGeometry(f"w={geom.w} outside tech bounds")
    if not ind["s_min_um"] <= geom.s <= ind["s_max_um"]:
        raise InvalidGeometry(f"s={geom.s} outside tech bounds")
    if not ind["r_min_um"] <= geom.r <= ind["r_max_um"]:
        raise InvalidGeometry(f"r={geom.r} outside tech bounds")


def inductor_tank(geom: InductorGeometry, tech: TechParams) -> TankModel:
    """Lumped equivalent of a spiral: Wheeler L, sheet-resistance R, area/fringe C."""
    _check_inductor(geom, tech)
    ind = tech.inductor
    layer = tech.layer(ind["layer"])

    rho = (geom.d_out - geom.d_in) / (geom.d_out + geom.d_in)
    L = WHEELER_K1 * MU0 * geom.t ** 2 * (geom.d_avg * 1e-6) / (1.0 + WHEELER_K2 * rho)

    length = geom.unwound_length
    r_dc = layer.sheet_res_ohm_sq * length / geom.w
    c_par = (layer.c_area_ff_um2 * length * geom.w
             + layer.c_fringe_ff_um * 2.0 * length) * 1e-15
    return TankModel(L=L, r_dc=r_dc, c_par=c_par, f_skin=float(ind["f_skin_hz"]))


def tank_response(tank: TankModel) -> EmResponse:
    """EmResponse of a series R-L / shunt C one-port.

    f_SRF is the Im(Z_in) = 0 crossing, computed with one fixed-point
    refinement of the skin-effect resistance:
        f_lc  = 1 / (2 pi sqrt(L C))
        f_SRF = (1/2 pi) sqrt(1/(L C) - R(f_lc)^2 / L^2)
    Q(f) = (2 pi f L / R(f)) (1 - (f/f_SRF)^2), maximized in closed form:
    the peak sits at f_SRF/sqrt(3) below the skin corner and f_SRF/sqrt(5)
    above it (boundary value between the regimes).
    """
    L, C = tank.L, tank.c_par
    f_lc = 1.0 / (2.0 * math.pi * math.sqrt(L * C))
    r_at = tank.r_series(f_lc)
    arg = 1.0 / (L * C) - (r_at / L) ** 2
    if arg <= 0.0:
        raise OutOfModelRange("tank is overdamped; no self-resonance")
    f_srf = math.sqrt(arg) / (2.0 * math.pi)

    cand_low = f_srf / math.sqrt(3.0)
    cand_high = f_srf / math.sqrt(5.0)
    if tank.f_skin >= cand_low:
        f_peak = cand_low
    elif tank.f_skin <= cand_high:
        f_peak = cand_high
    else:
        f_peak = tank.f_skin

    q_peak = (2.0 * math.pi * f_peak * L / tank.r_series(f_peak)) \
        * (1.0 - (f_peak / f_srf) ** 2)
    return EmResponse(L=L, q_peak=q_peak, f_peak_q=f_peak, f_srf=f_srf)


def inductor_em(geom: InductorGeometry, tech: TechParams) -> EmResponse:
    """Closed-form EM response of a square spiral inductor."""
    return tank_response(inductor_tank(geom, tech))


def cpw_em(geom: CpwGeometry, f0: float, tech: TechParams) -> CpwResponse:
    """Conformal-mapping CPW impedance and electrical phase at f0."""
    if f0 <= 0.0:
        raise OutOfModelRange(f"f0={f0} must be positive")
    cpw = tech.cpw
    if geom.w < cpw["w_min_um"] or geom.w > cpw["w_max_um"]:
        raise InvalidGeometry(f"CPW w={geom.w} outside tech bounds")
    if geom.s < cpw["s_min_um"] or geom.s > cpw["s_max_um"]:
        raise InvalidGeometry(f"CPW s={geom.s} outside tech bounds")
    if geom.l < 0.0 or geom.l > cpw["l_max_um"]:
        raise InvalidGeometry(f"CPW l={geom.l} outside tech bounds")

    eps_eff = 0.5 * (cpw["eps_r"] + 1.0)
    k = geom.w / (geom.w + 2.0 * geom.s)
    kp = math.sqrt(1.0 - k * k)
    z0 = (30.0 * math.pi / math.sqrt(eps_eff)) * float(ellipk(kp * kp) / ellipk(k * k))
    theta = 2.0 * math.pi * f0 * (geom.l * 1e-6) * math.sqrt(eps_eff) / C_LIGHT
    return CpwResponse(z0=z0, theta=theta)


def cpw_eps_eff(tech: TechParams) -> float:
    return 0.5 * (tech.cpw["eps_r"] + 1.0)


def tline_z0_eps(w: float, tech: TechParams) -> tuple[float, float]:
    """Microstrip characteristic impedance and effective permittivity."""
    tl = tech.tline
    h = tl["h_um"]
    eps_r = tl["eps_r"]
    u = w / h
    eps_eff = 0.5 * (eps_r + 1.0) + 0.5 * (eps_r - 1.0) / math.sqrt(1.0 + 12.0 / u)
    if u <= 1.0:
        z0 = (60.0 / math.sqrt(eps_eff)) * math.log(8.0 / u + 0.25 * u)
    else:
        z0 = (120.0 * math.pi / math.sqrt(eps_eff)) \
            / (u + 1.393 + 0.667 * math.log(u + 1.444))
    return z0, eps_eff


def tline_tank(geom: TlineGeometry, tech: TechParams) -> TankModel:
    tl = tech.tline
    if not tl["l_min_um"] <= geom.l <= tl["l_max_um"]:
        raise InvalidGeometry(f"T-line l={geom.l} outside tech bounds")
    if not tl["w_min_um"] <= geom.w <= tl["w_max_um"]:
        raise InvalidGeometry(f"T-line w={geom.w} outside tech bounds")
    z0, eps_eff = tline_z0_eps(geom.w, tech)
    l_m = geom.l * 1e-6
    lpul = z0 * math.sqrt(eps_eff) / C_LIGHT   # H/m
    cpul = math.sqrt(eps_eff) / (C_LIGHT * z0)  # F/m
    layer = tech.layer(tl["layer"])
    r_dc = layer.sheet_res_ohm_sq * geom.l / geom.w
    return TankModel(L=lpul * l_m, r_dc=r_dc, c_par=cpul * l_m,
                     f_skin=float(tl["f_skin_hz"]))


def tline_em(geom: TlineGeometry, tech: TechParams) -> EmResponse:
    """Per-unit-length model of a shielded T-line, same response contract."""
    return tank_response(tline_tank(geom, tech))


def effective_impedance(L: float, f_srf: float, f0: float) -> float:
    """SRF-aware impedance magnitude of an inductive passive at f0.

        Z = 2 pi f0 L / tan(2 pi f0 / (4 f_SRF))

    Decreases monotonically from 4 L f_SRF (f0 -> 0) to 0 at f0 = f_SRF.
    """
    if f0 <= 0.0:
        raise OutOfModelRange(f"f0={f0} must be positive")
    if f0 >= 2.0 * f_srf:
        raise OutOfModelRange(f"f0={f0:.4g} beyond 2*f_SRF={2 * f_srf:.4g}")
    x = 2.0 * math.pi * f0 / (4.0 * f_srf)
    if abs(x - 0.5 * math.pi) < 1e-12:
        return 0.0  # tangent pole: limit value
    return 2.0 * math.pi * f0 * L / math.tan(x)
