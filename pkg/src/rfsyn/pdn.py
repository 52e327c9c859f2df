"""Power-delivery network synthesis: uniform strap mesh on the allocated
layer sets, clipped against exclusion zones, stitched with via arrays, and
greedy decap fill over the remaining whitespace.

GND straps live on the lower layer set and VDD straps on the upper set
(from the technology file). Strap direction follows the layer parity used
by the router: odd metal index horizontal, even vertical. Exclusion zones
are the footprints of shielded passives (spiral/tline/cpw) projected across
every layer, other blocks on their pin layers, pads on the pad layer, and
all routed signal wires on their own layers — everything inflated by s_min.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .errors import PdnDisconnected
from .placer.legal import placed_rect
from .primitives import gen_decap
from .tech import TechParams

_TOL = 1e-9


@dataclass(frozen=True)
class PdnConfig:
    gnd_layers: tuple
    vdd_layers: tuple
    strap_width: float
    strap_pitch: float
    decap_c: float

    @classmethod
    def from_tech(cls, tech: TechParams) -> "PdnConfig":
        p = tech.pdn
        return cls(tuple(p["gnd_layers"]), tuple(p["vdd_layers"]),
                   float(p["strap_width_um"]), float(p["strap_pitch_um"]),
                   float(p["decap_c_f"]))

    def __post_init__(self):
        if set(self.gnd_layers) & set(self.vdd_layers):
            raise ValueError("GND and VDD layer sets must be disjoint")
        if self.strap_pitch <= self.strap_width:
            raise ValueError("strap pitch must exceed strap width")


@dataclass(frozen=True)
class Strap:
    net: str
    layer: str
    x0: float
    y0: float
    x1: float
    y1: float


@dataclass(frozen=True)
class PdnVia:
    net: str
    lower: str
    upper: str
    x0: float
    y0: float
    x1: float
    y1: float          # overlap rectangle carrying the via array


@dataclass(frozen=True)
class Decap:
    x: float
    y: float
    size: float
    c_f: float
    vdd_strap: int      # index into mesh.straps
    gnd_strap: int


@dataclass
class PdnMesh:
    straps: list
    vias: list
    decaps: list = field(default_factory=list)

    @property
    def decap_total_c(self) -> float:
        return sum(d.c_f for d in self.decaps)


def _orientation(tech: TechParams, layer: str) -> str:
    omap = tech.routing.get("orientation", {})
    if layer in omap:
        return omap[layer]
    return "H" if tech.layer(layer).index % 2 == 1 else "V"


def exclusion_zones(blocks, solution, routed, tech: TechParams) -> list:
    """(layer-or-None, rect) keep-outs, uninflated."""
    zones = []
    by_id = {b.id: b for b in blocks}
    for bid in sorted(solution.positions):
        blk = by_id[bid]
        rect = placed_rect(blk, *solution.positions[bid])
        if blk.is_routing_blockage:
            zones.append((None, rect))
        else:
            for layer in sorted({p.layer
                                 for p in blk.variants
                                 [solution.positions[bid][3]].pins}):
                zones.append((layer, rect))
    if routed is not None:
        for net in sorted(routed.trees):
            tree = routed.trees[net]
            for seg in tree.segments:
                zones.append((seg.layer, (seg.x0, seg.y0, seg.x1, seg.y1)))
            for via in tree.vias:
                h = 0.5 * via.size
                r = (via.x - h, via.y - h, via.x + h, via.y + h)
                zones.append((via.lower, r))
                zones.append((via.upper, r))
    return zones


def _clip_interval(lo, hi, cuts):
    """Subtract sorted cut intervals from [lo, hi]; return kept pieces."""
    pieces = []
    cur = lo
    for c0, c1 in sorted(cuts):
        if c1 <= cur + _TOL:
            continue
        if c0 >= hi - _TOL:
            break
        if c0 > cur + _TOL:
            pieces.append((cur, min(c0, hi)))
        cur = max(cur, c1)
        if cur >= hi - _TOL:
            break
    if cur < hi - _TOL:
        pieces.append((cur, hi))
    return pieces


def _rects_overlap(a, b):
    return a[0] < b[2] - _TOL and b[0] < a[2] - _TOL and \
        a[1] < b[3] - _TOL and b[1] < a[3] - _TOL


def _overlap_rect(a, b):
    return (max(a[0], b[0]), max(a[1], b[1]),
            min(a[2], b[2]), min(a[3], b[3]))


def _chip_extent(blocks, solution, routed, extent):
    if extent is not None:
        return float(extent[0]), float(extent[1])
    if routed is not None:
        return routed.extent
    by_id = {b.id: b for b in blocks}
    ext_x = ext_y = 0.0
    for bid, pos in solution.positions.items():
        r = placed_rect(by_id[bid], *pos)
        ext_x, ext_y = max(ext_x, r[2]), max(ext_y, r[3])
    return ext_x, ext_y


def synthesize_pdn(blocks, solution, routed, tech: TechParams,
                   config: PdnConfig | None = None,
                   extent=None) -> PdnMesh:
    """Uniform strap mesh clipped against exclusions; via arrays at
    same-net crossings on stack-adjacent layers; connectivity verified per
    net (PdnDisconnected on failure)."""
    config = config or PdnConfig.from_tech(tech)
    s_min = float(tech.routing["s_min_um"])
    ext_x, ext_y = _chip_extent(blocks, solution, routed, extent)

    zones = exclusion_zones(blocks, solution, routed, tech)
    w = config.strap_width
    pitch = config.strap_pitch

    straps = []
    for net, layer_set in (("GND", config.gnd_layers),
                           ("VDD", config.vdd_layers)):
        for layer in layer_set:
            horiz = _orientation(tech, layer) == "H"
            span = ext_y if horiz else ext_x
            length = ext_x if horiz else ext_y
            n_straps = int(math.floor(span / pitch)) + 1
            for k in range(n_straps):
                c = k * pitch
                if horiz:
                    rect = (0.0, c, length, min(c + w, ext_y))
                else:
                    rect = (c, 0.0, min(c + w, ext_x), ext_y)
                if rect[2] - rect[0] < w - _TOL and not horiz:
                    continue
                if rect[3] - rect[1] < w - _TOL and horiz:
                    continue
                cuts = []
                for lz, zr in zones:
                    if lz is not None and lz != layer:
                        continue
                    zi = (zr[0] - s_min, zr[1] - s_min,
                          zr[2] + s_min, zr[3] + s_min)
                    if not _rects_overlap(rect, zi):
                        continue
                    cuts.append((zi[0], zi[2]) if horiz else (zi[1], zi[3]))
                lo, hi = (rect[0], rect[2]) if horiz else (rect[1], rect[3])
                for p0, p1 in _clip_interval(lo, hi, cuts):
                    if p1 - p0 < w - _TOL:
                        continue          # fragment shorter than the width
                    if horiz:
                        straps.append(Strap(net, layer,
                                            p0, rect[1], p1, rect[3]))
                    else:
                        straps.append(Strap(net, layer,
                                            rect[0], p0, rect[2], p1))

    # Clipping inevitably leaves short orphan fragments (e.g. between two
    # pads) that no crossing strap can reach; prune islands whose total
    # length is a sliver (<= 2 pitch). Substantial islands still raise.
    probe = PdnMesh(straps=straps, vias=[])
    keep = set()
    for net in ("GND", "VDD"):
        for grp in mesh_islands(probe, net, tech):
            length = sum(max(straps[i].x1 - straps[i].x0,
                             straps[i].y1 - straps[i].y0) for i in grp)
            if length > 2.0 * pitch:
                keep.update(grp)
    straps = [s for i, s in enumerate(straps) if i in keep]

    # via arrays at same-net crossings on stack-adjacent layers of the set
    order = {ly.name: ly.index for ly in tech.layers}
    vias = []
    for net, layer_set in (("GND", config.gnd_layers),
                           ("VDD", config.vdd_layers)):
        ordered = sorted(layer_set, key=lambda n: order[n])
        for lo_name, hi_name in zip(ordered, ordered[1:]):
            lows = [s for s in straps if s.net == net and s.layer == lo_name]
            highs = [s for s in straps
                     if s.net == net and s.layer == hi_name]
            for a in lows:
                ra = (a.x0, a.y0, a.x1, a.y1)
                for b in highs:
                    rb = (b.x0, b.y0, b.x1, b.y1)
                    if _rects_overlap(ra, rb):
                        vias.append(PdnVia(net, lo_name, hi_name,
                                           *_overlap_rect(ra, rb)))

    mesh = PdnMesh(straps=straps, vias=vias)
    for net in ("GND", "VDD"):
        islands = mesh_islands(mesh, net, tech)
        if len(islands) > 1:
            raise PdnDisconnected(net, islands)
    return mesh


def mesh_islands(mesh: PdnMesh, net: str, tech: TechParams) -> list:
    """Connected components of one net's straps: same-layer touching pieces
    plus stack-adjacent pieces joined by a via overlap."""
    idx = [i for i, s in enumerate(mesh.straps) if s.net == net]
    parent = {i: i for i in idx}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        parent[find(i)] = find(j)

    order = {ly.name: ly.index for ly in tech.layers}
    for ai in range(len(idx)):
        i = idx[ai]
        a = mesh.straps[i]
        ra = (a.x0, a.y0, a.x1, a.y1)
        for bi in range(ai + 1, len(idx)):
            j = idx[bi]
            b = mesh.straps[j]
            gap = abs(order[a.layer] - order[b.layer])
            if gap == 0:
                touch = a.x0 <= b.x1 + _TOL and b.x0 <= a.x1 + _TOL and \
                    a.y0 <= b.y1 + _TOL and b.y0 <= a.y1 + _TOL
                if touch:
                    union(i, j)
            elif gap == 1:
                if _rects_overlap(ra, (b.x0, b.y0, b.x1, b.y1)):
                    union(i, j)
    groups = {}
    for i in idx:
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values())


def fill_decaps(blocks, solution, routed, mesh: PdnMesh,
                tech: TechParams,
                config: PdnConfig | None = None,
                extent=None, cell_size=None) -> list:
    """Greedy row-scan packing of the precharacterized decap cell into
    whitespace (chip minus inflated blocks, exclusions, pads, straps);
    each decap records its nearest VDD and GND strap."""
    config = config or PdnConfig.from_tech(tech)
    s_min = float(tech.routing["s_min_um"])
    if cell_size is None:
        cell = gen_decap("_decap", tech)
        cell_size = max(cell.variants[0].width, cell.variants[0].height)
    size = float(cell_size)
    ext_x, ext_y = _chip_extent(blocks, solution, routed, extent)

    keepouts = []
    by_id = {b.id: b for b in blocks}
    for bid in sorted(solution.positions):
        r = placed_rect(by_id[bid], *solution.positions[bid])
        keepouts.append((r[0] - s_min, r[1] - s_min,
                         r[2] + s_min, r[3] + s_min))
    if routed is not None:
        for net in sorted(routed.trees):
            for seg in routed.trees[net].segments:
                keepouts.append((seg.x0 - s_min, seg.y0 - s_min,
                                 seg.x1 + s_min, seg.y1 + s_min))
    for s in mesh.straps:
        keepouts.append((s.x0 - s_min, s.y0 - s_min,
                         s.x1 + s_min, s.y1 + s_min))

    vdd_idx = [i for i, s in enumerate(mesh.straps) if s.net == "VDD"]
    gnd_idx = [i for i, s in enumerate(mesh.straps) if s.net == "GND"]

    def nearest(ix_list, cx, cy):
        best, best_d = -1, math.inf
        for i in ix_list:
            s = mesh.straps[i]
            dx = max(s.x0 - cx, cx - s.x1, 0.0)
            dy = max(s.y0 - cy, cy - s.y1, 0.0)
            d = math.hypot(dx, dy)
            if d < best_d - _TOL:
                best, best_d = i, d
        return best

    decaps = []
    step = size + s_min
    if not (vdd_idx and gnd_idx):
        mesh.decaps = decaps
        return decaps

    # Bottom-left row scan. Candidate rows start at 0 and at keep-out top
    # edges; within a row, x jumps past the nearest blocking keep-out so no
    # feasible slot between obstacles is skipped.
    rows = sorted({0.0} | {k[3] for k in keepouts if 0.0 < k[3] < ext_y})
    heapq.heapify(rows)
    seen_rows = set(rows)
    while rows:
        y = heapq.heappop(rows)
        if y + size > ext_y + _TOL:
            continue
        x = 0.0
        placed_in_row = False
        while x + size <= ext_x + _TOL:
            rect = (x, y, x + size, y + size)
            blockers = [k for k in keepouts if _rects_overlap(rect, k)]
            if not blockers:
                cx, cy = x + 0.5 * size, y + 0.5 * size
                decaps.append(Decap(x, y, size, config.decap_c,
                                    nearest(vdd_idx, cx, cy),
                                    nearest(gnd_idx, cx, cy)))
                keepouts.append((rect[0] - s_min, rect[1] - s_min,
                                 rect[2] + s_min, rect[3] + s_min))
                placed_in_row = True
                x += step
            else:
                x = min(k[2] for k in blockers)
        if placed_in_row:
            nxt = round(y + step, 9)
            if nxt not in seen_rows and nxt + size <= ext_y + _TOL:
                seen_rows.add(nxt)
                heapq.heappush(rows, nxt)
    decaps.sort(key=lambda d: (d.y, d.x))
    mesh.decaps = decaps
    return decaps
