"""Layout primitives: rectangular blocks with pins, variants, and rotations.

Stage 2 of the flow translates sized devices and realized passives into an
abstract layout library the placer consumes: every primitive is a set of
(width, height, pins) variants plus an allowed-rotation set and a routing
blockage flag. Mask-level polygon detail is out of scope; footprints carry
just enough geometry for placement, routing, and parasitic extraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import em_oracle as em
from .errors import InvalidDevice
from .surrogate import VariantSet
from .tech import TechParams

ROT_ALL = (0, 90, 180, 270)
ROT_MOS = (0, 180)

BLOCK_KINDS = ("cascode_mos", "bias_mos", "resistor", "capacitor",
               "spiral", "tline", "cpw", "pad", "decap")


@dataclass(frozen=True)
class Pin:
    """Named pin rectangle in variant-local coordinates (um)."""

    name: str
    layer: str
    x0: float
    y0: float
    x1: float
    y1: float
    net: str = ""

    def __post_init__(self):
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise ValueError(f"pin {self.name!r} has empty area")

    @property
    def center(self) -> tuple:
        return (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def with_net(self, net: str) -> "Pin":
        return Pin(self.name, self.layer, self.x0, self.y0,
                   self.x1, self.y1, net)


@dataclass(frozen=True)
class Variant:
    """One realizable footprint: width x height with pins inside."""

    width: float
    height: float
    pins: tuple
    tag: str = ""

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("variant footprint must have positive area")
        for p in self.pins:
            if p.x0 < -1e-9 or p.y0 < -1e-9 \
                    or p.x1 > self.width + 1e-9 or p.y1 > self.height + 1e-9:
                raise ValueError(
                    f"pin {p.name!r} outside {self.width}x{self.height}"
                    " footprint")

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class PrimitiveBlock:
    """A placeable block: >= 1 variant, allowed rotations, blockage flag."""

    id: str
    kind: str
    variants: tuple
    rotations: tuple = ROT_ALL
    is_routing_blockage: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise ValueError(f"unknown block kind {self.kind!r}")
        if not self.variants:
            raise ValueError("block needs at least one variant")
        if not self.rotations:
            raise ValueError("block needs at least one allowed rotation")
        for r in self.rotations:
            if r not in ROT_ALL:
                raise ValueError(f"illegal rotation {r}")

    def pin_names(self) -> tuple:
        return tuple(p.name for p in self.variants[0].pins)


def _pin_square(name: str, layer: str, cx: float, cy: float,
                half: float, net: str = "") -> Pin:
    return Pin(name, layer, cx - half, cy - half, cx + half, cy + half, net)


# ---------------------------------------------------------------------------
# Devices


def gen_mos(block_id: str, n_f: int, w_f: float, tech: TechParams,
            kind: str = "cascode_mos") -> PrimitiveBlock:
    """Multi-finger (cascode or bias) MOS block.

    The footprint is a finger array (pitch x N_f) plus guard margin; the
    cascode stacks two devices sharing the intermediate node, presenting
    gate/source pins on the west edge and the drain pin on the east edge so
    the RF path crosses the block (staircase abstraction). Rotations are
    restricted to {0, 180}.
    """
    mos = tech.mos
    if n_f < 1:
        raise ValueError("N_f must be >= 1")
    if not (mos["wf_min_um"] <= w_f <= mos["wf_max_um"]):
        raise InvalidDevice(
            f"finger width {w_f} um outside "
            f"[{mos['wf_min_um']}, {mos['wf_max_um']}]")
    if kind not in ("cascode_mos", "bias_mos"):
        raise ValueError(f"gen_mos kind must be a MOS kind, got {kind!r}")

    guard = mos["guard_um"]
    core_w = mos["finger_pitch_um"] * n_f
    n_stack = 2 if kind == "cascode_mos" else 1
    core_h = (mos["finger_height_um"] + w_f) * n_stack
    width = core_w + 2.0 * guard
    height = core_h + 2.0 * guard
    layer = mos["pin_layer"]
    half = min(0.4, 0.25 * guard, 0.25 * width, 0.25 * height)

    pins = [
        _pin_square("G", layer, half, 0.25 * height, half),
        _pin_square("S", layer, half, 0.75 * height, half),
        _pin_square("D", layer, width - half, 0.5 * height, half),
        _pin_square("B", layer, 0.5 * width, half, half),
    ]
    return PrimitiveBlock(id=block_id, kind=kind, variants=(
        Variant(width, height, tuple(pins), tag=f"nf{n_f}"),),
        rotations=ROT_MOS,
        meta={"n_f": n_f, "w_f": w_f})


def mos_from_width(block_id: str, total_width_um: float, tech: TechParams,
                   kind: str = "cascode_mos") -> PrimitiveBlock:
    """Split a total gate width into legal fingers (fewest fingers wins)."""
    mos = tech.mos
    n_f = max(1, math.ceil(total_width_um / mos["wf_max_um"]))
    w_f = total_width_um / n_f
    if w_f < mos["wf_min_um"]:
        w_f = mos["wf_min_um"]
    return gen_mos(block_id, n_f, w_f, tech, kind=kind)


def gen_resistor(block_id: str, r_target: float,
                 tech: TechParams) -> PrimitiveBlock:
    """Sheet resistor R = R_s * l / w at several aspect ratios."""
    res = tech.resistor
    if r_target <= 0:
        raise ValueError("R_target must be positive")
    squares = r_target / res["sheet_res_ohm_sq"]
    # widths on a geometric ladder across the range where both w and
    # l = squares * w are legal; each rung is one aspect-ratio variant
    w_lo = max(res["w_min_um"], res["l_min_um"] / squares)
    w_hi = min(res["w_max_um"], res["l_max_um"] / squares)
    if w_hi < w_lo:
        raise InvalidDevice(f"resistor {r_target} ohm outside l/w bounds")
    variants = []
    seen = set()
    for i in range(4):
        w = w_lo * (w_hi / w_lo) ** (i / 3.0) if w_hi > w_lo else w_lo
        l = squares * w
        key = (round(l, 9), round(w, 9))
        if key in seen:
            continue
        seen.add(key)
        layer = res["pin_layer"]
        half = max(0.5 * tech.layer(layer).min_width_um,
                   min(0.2, 0.25 * w, 0.25 * l))
        pins = (
            _pin_square("P1", layer, half, 0.5 * w, half),
            _pin_square("P2", layer, l - half, 0.5 * w, half),
        )
        variants.append(Variant(l, w, pins, tag=f"ar{l / w:.3g}"))
    if len(variants) < 3:
        raise InvalidDevice(
            f"resistor {r_target} ohm unrealizable at >= 3 aspect ratios")
    return PrimitiveBlock(id=block_id, kind="resistor",
                          variants=tuple(variants),
                          meta={"r_ohm": r_target})


def capacitor_value(l: float, w: float, tech: TechParams) -> float:
    """Bilinear MOM-style capacitance model, fF in / fF out per tech units."""
    cap = tech.capacitor
    return (cap["alpha_l_ff_um"] * l + cap["alpha_w_ff_um"] * w
            + cap["alpha_lw_ff_um2"] * l * w + cap["alpha_0_ff"]) * 1e-15


def _solve_cap_length(c_target_ff: float, w: float, tech: TechParams) -> float:
    cap = tech.capacitor
    denom = cap["alpha_l_ff_um"] + cap["alpha_lw_ff_um2"] * w
    return (c_target_ff - cap["alpha_w_ff_um"] * w - cap["alpha_0_ff"]) / denom


def gen_capacitor(block_id: str, c_target: float, tech: TechParams,
                  kind: str = "capacitor") -> PrimitiveBlock:
    """Bilinear-model capacitor solved for (l, w) at >= 3 aspect ratios."""
    cap = tech.capacitor
    if c_target <= 0:
        raise ValueError("C_target must be positive")
    c_ff = c_target * 1e15
    # nominal square: alpha_lw l^2 ~ c  ->  seed width, then exact solve in l
    seed = math.sqrt(max(c_ff - cap["alpha_0_ff"], 1e-6)
                     / cap["alpha_lw_ff_um2"])
    variants = []
    seen = set()
    for ratio in (0.5, 1.0, 2.0, 4.0):
        w = min(max(seed / math.sqrt(ratio), cap["w_min_um"]),
                cap["w_max_um"])
        l = _solve_cap_length(c_ff, w, tech)
        if not (cap["l_min_um"] <= l <= cap["l_max_um"]):
            continue
        key = (round(l, 9), round(w, 9))
        if key in seen:
            continue
        seen.add(key)
        layer = cap["pin_layer"]
        half = max(0.5 * tech.layer(layer).min_width_um,
                   min(0.4, 0.25 * w, 0.25 * l))
        pins = (
            _pin_square("P1", layer, half, 0.5 * w, half),
            _pin_square("P2", layer, l - half, 0.5 * w, half),
        )
        variants.append(Variant(l, w, pins, tag=f"ar{ratio:g}"))
    if len(variants) < 3:
        raise InvalidDevice(
            f"capacitor {c_target:.3g} F unrealizable at >= 3 aspect ratios")
    return PrimitiveBlock(id=block_id, kind=kind, variants=tuple(variants),
                          meta={"c_f": c_target})


def gen_decap(block_id: str, tech: TechParams) -> PrimitiveBlock:
    """Fixed-size precharacterized decoupling capacitor."""
    block = gen_capacitor(block_id, tech.pdn["decap_c_f"], tech,
                          kind="capacitor")
    square = min(block.variants, key=lambda v: abs(v.width - v.height))
    pins = tuple(p.with_net("VDD" if p.name == "P1" else "GND")
                 for p in square.pins)
    return PrimitiveBlock(
        id=block_id, kind="decap",
        variants=(Variant(square.width, square.height, pins, tag="decap"),),
        rotations=(0,), meta={"c_f": tech.pdn["decap_c_f"]})


# ---------------------------------------------------------------------------
# Passives


def spiral_side(geom: em.InductorGeometry, tech: TechParams) -> float:
    """Footprint side: outer diameter plus keep-out margin on each side."""
    return geom.d_out + 2.0 * tech.inductor["margin_um"]


# pin-edge convention per fractional-turn class: terminal positions on the
# footprint boundary as (x-fraction, y-fraction) of the side length.
_SPIRAL_PIN_FRACS = {
    "1/4T": ((0.5, 0.0), (1.0, 0.5)),    # adjacent edges (quarter turn)
    "1/2T": ((0.5, 0.0), (0.5, 1.0)),    # opposite edges
    "3/4T": ((0.5, 0.0), (0.0, 0.5)),    # adjacent edges, far corner
    "1T":   ((0.35, 0.0), (0.65, 0.0)),  # same edge, side-by-side leads
}


def gen_spiral(block_id: str, geom: em.InductorGeometry, tech: TechParams,
               response: em.EmResponse | None = None) -> PrimitiveBlock:
    """Square footprint spiral inductor; routing blockage."""
    side = spiral_side(geom, tech)
    layer = tech.inductor["layer"]
    half = min(1.0, 0.5 * geom.w)
    fracs = _SPIRAL_PIN_FRACS[geom.frac_class]
    pins = []
    for name, (fx, fy) in zip(("P1", "P2"), fracs):
        cx = min(max(fx * side, half), side - half)
        cy = min(max(fy * side, half), side - half)
        pins.append(_pin_square(name, layer, cx, cy, half))
    meta = {"l_henry": response.L if response else None,
            "frac_class": geom.frac_class,
            "geometry": {"t": geom.t, "w": geom.w, "s": geom.s, "r": geom.r}}
    return PrimitiveBlock(
        id=block_id, kind="spiral",
        variants=(Variant(side, side, tuple(pins), tag=geom.frac_class),),
        rotations=ROT_ALL, is_routing_blockage=True, meta=meta)


def gen_inductor_variants(block_id: str, variant_set: VariantSet,
                          tech: TechParams) -> list:
    """One spiral block per fractional-turn class in the variant set,
    merged into a single multi-variant placeable block by the caller or
    consumed as alternatives; returned in class order."""
    if not variant_set.choices:
        raise ValueError("empty variant set")
    blocks = []
    for cls in em.FRAC_CLASSES:
        if cls not in variant_set.choices:
            continue
        ch = variant_set.choices[cls]
        blocks.append(gen_spiral(f"{block_id}@{cls}", ch.geometry, tech,
                                 response=ch.predicted))
    return blocks


def merge_variant_blocks(block_id: str, blocks: list) -> PrimitiveBlock:
    """Collapse per-class spiral blocks into one multi-variant block so the
    placer's exactly-one-variant constraint selects the class."""
    variants = tuple(b.variants[0] for b in blocks)
    meta = {"classes": [b.meta["frac_class"] for b in blocks],
            "l_henry": blocks[0].meta["l_henry"],
            "per_class": {b.meta["frac_class"]: b.meta for b in blocks}}
    return PrimitiveBlock(id=block_id, kind="spiral", variants=variants,
                          rotations=ROT_ALL, is_routing_blockage=True,
                          meta=meta)


def gen_tline(block_id: str, geom: em.TlineGeometry,
              tech: TechParams) -> PrimitiveBlock:
    """Straight shielded line: footprint l x w, end pins, blockage."""
    layer = tech.tline["layer"]
    half = min(0.5 * geom.w, 1.0)
    pins = (
        _pin_square("P1", layer, half, 0.5 * geom.w, half),
        _pin_square("P2", layer, geom.l - half, 0.5 * geom.w, half),
    )
    return PrimitiveBlock(
        id=block_id, kind="tline",
        variants=(Variant(geom.l, geom.w, pins, tag="tline"),),
        rotations=ROT_ALL, is_routing_blockage=True,
        meta={"geometry": {"l": geom.l, "w": geom.w}})


def cpw_footprint(geom: em.CpwGeometry, tech: TechParams) -> tuple:
    """(length, width): signal + two gaps + two ground rails."""
    width = geom.w + 2.0 * geom.s + 2.0 * tech.cpw["w_gnd_um"]
    return geom.l, width


def gen_cpw(block_id: str, geom: em.CpwGeometry,
            tech: TechParams) -> PrimitiveBlock:
    """CPW section with ground rails; signal pins at x=0 and x=l."""
    length, width = cpw_footprint(geom, tech)
    layer = tech.cpw["layer"]
    half = min(0.5 * geom.w, 1.0)
    cy = 0.5 * width
    pins = (
        _pin_square("P1", layer, half, cy, half),
        _pin_square("P2", layer, length - half, cy, half),
    )
    return PrimitiveBlock(
        id=block_id, kind="cpw",
        variants=(Variant(length, width, pins, tag="cpw"),),
        rotations=ROT_ALL, is_routing_blockage=True,
        meta={"geometry": {"l": geom.l, "w": geom.w, "s": geom.s}})


def gen_pad(block_id: str, net: str, tech: TechParams) -> PrimitiveBlock:
    """Bond pad: fixed square on the top routing layer."""
    size = tech.pad["size_um"]
    layer = tech.pad["pin_layer"]
    pin = Pin("PAD", layer, 0.25 * size, 0.25 * size,
              0.75 * size, 0.75 * size, net)
    return PrimitiveBlock(
        id=block_id, kind="pad",
        variants=(Variant(size, size, (pin,), tag="pad"),),
        rotations=(0,), meta={"net": net})


# ---------------------------------------------------------------------------
# Self-DRC


def self_drc(block: PrimitiveBlock, tech: TechParams) -> list:
    """Internal design-rule screen; returns a list of violation strings."""
    issues = []
    layer_names = {ly.name for ly in tech.layers}
    for vi, var in enumerate(block.variants):
        for p in var.pins:
            if p.layer not in layer_names:
                issues.append(f"{block.id}[{vi}]: pin {p.name} on unknown "
                              f"layer {p.layer}")
                continue
            lyr = tech.layer(p.layer)
            pw = min(p.x1 - p.x0, p.y1 - p.y0)
            if pw < lyr.min_width_um - 1e-9:
                issues.append(f"{block.id}[{vi}]: pin {p.name} width {pw:.3g}"
                              f" < min {lyr.min_width_um} on {p.layer}")
            if p.x0 < -1e-9 or p.y0 < -1e-9 or p.x1 > var.width + 1e-9 \
                    or p.y1 > var.height + 1e-9:
                issues.append(f"{block.id}[{vi}]: pin {p.name} outside "
                              "footprint")
        names = [p.name for p in var.pins]
        if len(names) != len(set(names)):
            issues.append(f"{block.id}[{vi}]: duplicate pin names")
    return issues
