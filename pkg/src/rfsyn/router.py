"""Hanan-grid maze routing: MST net decomposition and A* pathfinding over a
multi-layer Manhattan grid with inflated obstacles.

Grid coordinates come from pin locations, inflated obstacle boundaries, and
the chip edges. Each routing layer has a preferred orientation (from the
technology file); layer changes cost a fixed via penalty expressed in
microns of top-layer wire. Obstacles are inflated by (w/2 + s_min) for the
width w of the net being routed, so a legal centerline implies s_min
clearance. Nets flagged critical are restricted to the designated
upper-layer set and routed at twice the default width.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .errors import PinBlocked, Unroutable
from .placer.legal import placed_rect
from .placer.milp import rotated_pin_offset
from .tech import TechParams

_TOL = 1e-9


@dataclass(frozen=True)
class WireSegment:
    net: str
    layer: str
    width: float
    x0: float
    y0: float
    x1: float
    y1: float          # rectangle of the drawn metal (centerline +- w/2)


@dataclass(frozen=True)
class RouteVia:
    net: str
    x: float
    y: float
    lower: str
    upper: str
    size: float


@dataclass
class RouteTree:
    net: str
    segments: list
    vias: list
    cost: float
    pins: list          # (x, y, layer)


@dataclass
class RoutedLayout:
    trees: dict         # net -> RouteTree
    order: list         # nets in routing order
    extent: tuple       # (x, y)


@dataclass
class _Obstacle:
    rect: tuple         # (x0, y0, x1, y1)
    layer: str | None   # None = blocks every routing layer
    net: str            # "" for block footprints
    owner: str          # block id, "" for wires


class HananGrid:
    """Multi-layer Hanan grid with dynamic obstacles.

    Coordinates are stored as sorted lists and extended when routed wires
    are added, so later nets can detour around earlier ones.
    """

    def __init__(self, tech: TechParams, extent: tuple,
                 w_route: float | None = None,
                 via_cost: float | None = None):
        routing = tech.routing
        self.tech = tech
        self.extent = (float(extent[0]), float(extent[1]))
        self.w_route = float(w_route if w_route is not None
                             else routing["w_route_um"])
        self.s_min = float(routing["s_min_um"])
        self.via_cost = float(via_cost if via_cost is not None
                              else routing["via_cost_wire_um"])
        self.layers = list(routing["layers"])
        self.critical_layers = list(routing["critical_layers"])
        self.orientation = dict(routing["orientation"])
        self.stack_pos = {ly.name: i for i, ly in enumerate(tech.layers)}
        top = tech.layer(self.layers[-1]).sheet_res_ohm_sq
        self.res_factor = {name: tech.layer(name).sheet_res_ohm_sq / top
                           for name in self.layers}
        self.obstacles: list[_Obstacle] = []
        self.pins: dict[str, list] = {}      # net -> [(x, y, layer, owner)]
        self.critical_nets: set = set()      # nets routed at 2x width
        self._xs: set = set()
        self._ys: set = set()

    # -- construction -------------------------------------------------------

    def _inflations(self):
        """Boundary offsets for both width classes (default and 2x)."""
        return (0.5 * self.w_route + self.s_min,
                self.w_route + self.s_min)

    def add_obstacle(self, rect, layer=None, net="", owner=""):
        self.obstacles.append(_Obstacle(tuple(map(float, rect)), layer,
                                        net, owner))
        for infl in self._inflations():
            self._xs.update((rect[0] - infl, rect[2] + infl))
            self._ys.update((rect[1] - infl, rect[3] + infl))

    def add_pin(self, net, x, y, layer, owner=""):
        self.pins.setdefault(net, []).append((float(x), float(y), layer,
                                              owner))
        # pin center plus keep-out boundaries so other nets can hug them
        offs = [0.0] + [half + infl
                        for half in (0.5 * self.w_route, self.w_route)
                        for infl in self._inflations()]
        for off in offs:
            self._xs.update((float(x) - off, float(x) + off))
            self._ys.update((float(y) - off, float(y) + off))

    def net_width(self, net: str) -> float:
        return 2.0 * self.w_route if net in self.critical_nets \
            else self.w_route

    @property
    def xs(self):
        return sorted(c for c in self._xs
                      if -_TOL <= c <= self.extent[0] + _TOL)

    @property
    def ys(self):
        return sorted(c for c in self._ys
                      if -_TOL <= c <= self.extent[1] + _TOL)

    def node_count(self):
        return len(self.xs) * len(self.ys) * len(self.layers)

    # -- legality -----------------------------------------------------------

    def _skip(self, obs: _Obstacle, net: str, pin_owners: set) -> bool:
        return (obs.net == net and obs.net != "") or \
            (obs.owner != "" and obs.owner in pin_owners)

    def _rects(self, layer, net, pin_owners):
        """Obstacle rectangles relevant to routing `net` on `layer`,
        including keep-outs around other nets' pins (a pin anchors that
        net's future wire plus its escape via stack on every layer)."""
        for obs in self.obstacles:
            if obs.layer is not None and obs.layer != layer:
                continue
            if self._skip(obs, net, pin_owners):
                continue
            yield obs.rect
        for other, pts in self.pins.items():
            if other == net:
                continue
            half = 0.5 * self.net_width(other)
            for x, y, _layer, _owner in pts:
                yield (x - half, y - half, x + half, y + half)

    def point_blocked(self, x, y, layer, width, net, pin_owners=frozenset()):
        infl = 0.5 * width + self.s_min
        for x0, y0, x1, y1 in self._rects(layer, net, pin_owners):
            if x0 - infl + _TOL < x < x1 + infl - _TOL and \
                    y0 - infl + _TOL < y < y1 + infl - _TOL:
                return True
        return False

    def edge_blocked(self, p, q, layer, width, net, pin_owners=frozenset()):
        """Centerline segment p-q (axis-aligned) vs inflated obstacles."""
        infl = 0.5 * width + self.s_min
        (ax, ay), (bx, by) = p, q
        lo_x, hi_x = min(ax, bx), max(ax, bx)
        lo_y, hi_y = min(ay, by), max(ay, by)
        for x0, y0, x1, y1 in self._rects(layer, net, pin_owners):
            if lo_x < x1 + infl - _TOL and hi_x > x0 - infl + _TOL and \
                    lo_y < y1 + infl - _TOL and hi_y > y0 - infl + _TOL:
                return True
        return False


def build_grid(blocks, solution, nets, tech: TechParams,
               w_route: float | None = None,
               via_cost: float | None = None) -> HananGrid:
    """Grid from a legal placement: blockage blocks obstruct every layer,
    other blocks obstruct their pin layers; pins register at their placed
    centers."""
    by_id = {b.id: b for b in blocks}
    ext_x = ext_y = 0.0
    for bid, (x, y, rot, vi) in solution.positions.items():
        r = placed_rect(by_id[bid], x, y, rot, vi)
        ext_x = max(ext_x, r[2])
        ext_y = max(ext_y, r[3])
    grid = HananGrid(tech, (ext_x, ext_y), w_route, via_cost)

    for bid, (x, y, rot, vi) in solution.positions.items():
        blk = by_id[bid]
        rect = placed_rect(blk, x, y, rot, vi)
        if blk.is_routing_blockage:
            grid.add_obstacle(rect, layer=None, owner=bid)
        else:
            for layer in sorted({p.layer for p in blk.variants[vi].pins}):
                if layer in grid.layers:
                    grid.add_obstacle(rect, layer=layer, owner=bid)

    for net in sorted(nets):
        for bid, pin_name in nets[net]:
            blk = by_id[bid]
            x, y, rot, vi = solution.positions[bid]
            var = blk.variants[vi]
            pin = next(p for p in var.pins if p.name == pin_name)
            ox, oy = rotated_pin_offset(*pin.center, var.width, var.height,
                                        rot)
            grid.add_pin(net, x + ox, y + oy, pin.layer, owner=bid)
    return grid


# ---------------------------------------------------------------------------
# A* search


def _prim_mst(points):
    """Prim MST over Manhattan distances; returns edges as index pairs,
    deterministic (lowest index first on ties)."""
    n = len(points)
    if n < 2:
        return []
    in_tree = {0}
    edges = []
    while len(in_tree) < n:
        best = None
        for i in sorted(in_tree):
            xi, yi = points[i][0], points[i][1]
            for j in range(n):
                if j in in_tree:
                    continue
                d = abs(xi - points[j][0]) + abs(yi - points[j][1])
                key = (d, i, j)
                if best is None or key < best:
                    best = key
        _, i, j = best
        edges.append((i, j))
        in_tree.add(j)
    return edges


def _escape_cost(grid: HananGrid, pin_layer: str, route_layer: str) -> float:
    """Via-stack cost from the pin's layer up/down to a routing layer."""
    steps = abs(grid.stack_pos[pin_layer] - grid.stack_pos[route_layer])
    return steps * grid.via_cost


_GOAL = (-1, -1, -1)


def _astar(grid: HananGrid, sources: dict, targets: dict, target_pts: list,
           layers: list, width: float, net: str, pin_owners: set):
    """Multi-source multi-target A*. sources: state -> start cost; targets:
    state -> exit cost (escape vias down to the pin layer); returns
    (total cost, path list of states) or None.

    A state is (layer_index_into_layers, xi, yi). Exit costs are modeled as
    edges to a virtual goal so the minimum of path + exit cost is exact."""
    xs, ys = grid.xs, grid.ys
    min_factor = min(grid.res_factor[name] for name in layers)

    def heuristic(xi, yi):
        x, y = xs[xi], ys[yi]
        return min_factor * min(abs(x - tx) + abs(y - ty)
                                for tx, ty in target_pts)

    open_heap = []
    g_cost = {}
    came = {}
    for state, g0 in sorted(sources.items()):
        g_cost[state] = g0
        heapq.heappush(open_heap, (g0 + heuristic(state[1], state[2]), g0,
                                   state))
    closed = set()
    while open_heap:
        f, g, state = heapq.heappop(open_heap)
        if state in closed:
            continue
        closed.add(state)
        if state == _GOAL:
            path = [came[state]]
            while path[-1] in came:
                path.append(came[path[-1]])
            path.reverse()
            return g, path
        if state in targets:
            ng = g + targets[state]
            if ng < g_cost.get(_GOAL, math.inf) - _TOL:
                g_cost[_GOAL] = ng
                came[_GOAL] = state
                heapq.heappush(open_heap, (ng, ng, _GOAL))
        li, xi, yi = state
        layer = layers[li]
        x, y = xs[xi], ys[yi]
        moves = []
        if grid.orientation[layer] == "H":
            if xi > 0:
                moves.append(((li, xi - 1, yi),
                              (x - xs[xi - 1]) * grid.res_factor[layer]))
            if xi < len(xs) - 1:
                moves.append(((li, xi + 1, yi),
                              (xs[xi + 1] - x) * grid.res_factor[layer]))
        else:
            if yi > 0:
                moves.append(((li, xi, yi - 1),
                              (y - ys[yi - 1]) * grid.res_factor[layer]))
            if yi < len(ys) - 1:
                moves.append(((li, xi, yi + 1),
                              (ys[yi + 1] - y) * grid.res_factor[layer]))
        for dl in (-1, 1):
            lj = li + dl
            if 0 <= lj < len(layers):
                steps = abs(grid.stack_pos[layers[lj]]
                            - grid.stack_pos[layer])
                moves.append(((lj, xi, yi), steps * grid.via_cost))
        for nxt, step in moves:
            if nxt in closed:
                continue
            lj, xj, yj = nxt
            nx, ny = xs[xj], ys[yj]
            if lj == li:
                if grid.edge_blocked((x, y), (nx, ny), layer, width, net,
                                     pin_owners):
                    continue
            else:
                if grid.point_blocked(nx, ny, layers[lj], width, net,
                                      pin_owners):
                    continue
            ng = g + step
            if ng < g_cost.get(nxt, math.inf) - _TOL:
                g_cost[nxt] = ng
                came[nxt] = state
                heapq.heappush(open_heap, (ng + heuristic(xj, yj), ng, nxt))
    return None


def _path_geometry(grid: HananGrid, path, layers, width, net):
    """Compress a state path into wire segments and vias."""
    xs, ys = grid.xs, grid.ys
    segments = []
    vias = []
    half = 0.5 * width
    i = 0
    while i < len(path) - 1:
        li, xi, yi = path[i]
        lj, xj, yj = path[i + 1]
        if li != lj:
            lo, hi = sorted((layers[li], layers[lj]),
                            key=lambda n: grid.stack_pos[n])
            vias.append(RouteVia(net, xs[xi], ys[yi], lo, hi, width))
            i += 1
            continue
        j = i + 1
        if xj != xi:       # horizontal run
            while j + 1 < len(path) and path[j + 1][0] == li \
                    and path[j + 1][2] == yi:
                j += 1
            x_a, x_b = sorted((xs[xi], xs[path[j][1]]))
            segments.append(WireSegment(net, layers[li], width,
                                        x_a - half, ys[yi] - half,
                                        x_b + half, ys[yi] + half))
        else:              # vertical run
            while j + 1 < len(path) and path[j + 1][0] == li \
                    and path[j + 1][1] == xi:
                j += 1
            y_a, y_b = sorted((ys[yi], ys[path[j][2]]))
            segments.append(WireSegment(net, layers[li], width,
                                        xs[xi] - half, y_a - half,
                                        xs[xi] + half, y_b + half))
        i = j
    return segments, vias


def route_net(grid: HananGrid, net: str, priority: float = 1.0,
              critical: bool = False) -> RouteTree:
    """Route one net: Prim MST over its pins, each pair by A* with the
    already-routed part of the tree reusable at zero cost."""
    pins = grid.pins.get(net, [])
    if not pins:
        raise Unroutable(net)
    if critical:
        grid.critical_nets.add(net)
    layers = grid.critical_layers if critical else grid.layers
    width = grid.net_width(net) if critical else grid.w_route
    pin_owners = {owner for _, _, _, owner in pins if owner}
    xs, ys = grid.xs, grid.ys
    xi_of = {x: i for i, x in enumerate(xs)}
    yi_of = {y: i for i, y in enumerate(ys)}

    pin_nodes = []
    for x, y, layer, owner in pins:
        if grid.point_blocked(x, y, layer if layer in layers else layers[0],
                              width, net, pin_owners):
            raise PinBlocked(
                f"pin of net {net!r} at ({x:.2f}, {y:.2f}) lies inside an "
                "inflated obstacle of another net")
        pin_nodes.append((xi_of[x], yi_of[y], layer))

    tree_states = {}      # state -> accumulated entry cost 0 (reuse)
    tree_cost = 0.0
    segments = []
    vias = []

    def pin_states(k):
        xi, yi, pin_layer = pin_nodes[k]
        return {(li, xi, yi): _escape_cost(grid, pin_layer, layers[li])
                for li in range(len(layers))}

    def record_escape(state, k):
        """Vias from the pin layer to the entry routing layer."""
        li, xi, yi = state
        pin_layer = pin_nodes[k][2]
        lo, hi = sorted((pin_layer, layers[li]),
                        key=lambda n: grid.stack_pos[n])
        if lo != hi:
            vias.append(RouteVia(net, xs[xi], ys[yi], lo, hi, width))

    mst = _prim_mst([(p[0], p[1]) for p in pins])
    if not mst:
        return RouteTree(net, [], [], 0.0,
                         [(p[0], p[1], p[2]) for p in pins])

    for a, b in mst:
        if not tree_states:
            sources = dict(pin_states(a))
            src_pin = a
        else:
            sources = {s: 0.0 for s in tree_states}
            for s, c in pin_states(a).items():
                if s not in sources or c < sources[s]:
                    sources[s] = c
            src_pin = a
        tgt = pin_states(b)
        xt, yt = pins[b][0], pins[b][1]
        res = _astar(grid, sources, tgt, [(xt, yt)], layers, width,
                     net, pin_owners)
        if res is None:
            raise Unroutable(net, (a, b))
        cost, path = res          # includes entry and exit escape costs
        start = path[0]
        if start not in tree_states:
            record_escape(start, src_pin)
        end = path[-1]
        record_escape(end, b)
        segs, vs = _path_geometry(grid, path, layers, width, net)
        segments.extend(segs)
        vias.extend(vs)
        tree_cost += cost
        for s in path:
            tree_states[s] = 0.0

    return RouteTree(net, segments, vias, priority * tree_cost,
                     [(p[0], p[1], p[2]) for p in pins])


def route_all(grid: HananGrid, priorities: dict,
              critical: set | frozenset = frozenset()) -> RoutedLayout:
    """Route every registered net in descending priority (ties by net id);
    each finished route becomes an obstacle for later nets."""
    order = sorted(grid.pins, key=lambda n: (-priorities.get(n, 1.0), n))
    grid.critical_nets.update(n for n in critical if n in grid.pins)
    trees = {}
    for net in order:
        try:
            tree = route_net(grid, net, priorities.get(net, 1.0),
                             critical=net in critical)
        except Unroutable as exc:
            exc.routed_before = [n for n in order if n in trees]
            exc.args = (f"{exc.args[0]} (after routing "
                        f"{exc.routed_before})",)
            raise
        trees[net] = tree
        for seg in tree.segments:
            grid.add_obstacle((seg.x0, seg.y0, seg.x1, seg.y1),
                              layer=seg.layer, net=net)
        for via in tree.vias:
            h = 0.5 * via.size
            rect = (via.x - h, via.y - h, via.x + h, via.y + h)
            lo_i = grid.stack_pos[via.lower]
            hi_i = grid.stack_pos[via.upper]
            for name in grid.layers:
                if lo_i <= grid.stack_pos[name] <= hi_i:
                    grid.add_obstacle(rect, layer=name, net=net)
    return RoutedLayout(trees=trees, order=order, extent=grid.extent)


def drc_clearance(layout: RoutedLayout, s_min: float) -> list:
    """Geometric spacing check between wires/vias of different nets on the
    same layer, independent of the grid. Empty list iff clean."""
    shapes = []       # (net, layer, rect)
    for net, tree in sorted(layout.trees.items()):
        for seg in tree.segments:
            shapes.append((net, seg.layer, (seg.x0, seg.y0, seg.x1, seg.y1)))
        for via in tree.vias:
            h = 0.5 * via.size
            shapes.append((net, via.lower,
                           (via.x - h, via.y - h, via.x + h, via.y + h)))
            shapes.append((net, via.upper,
                           (via.x - h, via.y - h, via.x + h, via.y + h)))
    violations = []
    for i in range(len(shapes)):
        ni, li, ri = shapes[i]
        for j in range(i + 1, len(shapes)):
            nj, lj, rj = shapes[j]
            if ni == nj or li != lj:
                continue
            dx = max(rj[0] - ri[2], ri[0] - rj[2])
            dy = max(rj[1] - ri[3], ri[1] - rj[3])
            if max(dx, dy) < s_min - 1e-6:
                violations.append(
                    f"{li}: nets {ni!r} and {nj!r} spaced "
                    f"{max(dx, dy):.3f} < {s_min}")
    return violations
