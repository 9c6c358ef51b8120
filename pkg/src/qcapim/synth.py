"""QCA layout synthesis on the grid: wires, inverters, majority gates, the
Akers mux cell and composed Akers networks.

Designs are drawn on a :class:`Canvas` in grid units (one unit = one grid
pitch) and converted to nanometres when the layout is built. Distinct signals
are kept at least five pitches apart outside the gates so that, with an 80 nm
radius of effect, they only interact where a gate wants them to.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .akers import AkersNetwork, build_xor_network, levels, network_expression

from .layout import NORMAL, CellRole, Fixed, Geometry, Input, LayoutError, Output, QcaLayout, build_layout

Point = tuple[int, int]

#: Default geometry for synthesized designs. At a 24 nm pitch a released cell
#: forgets its state, which the pipelined designs below rely on; at 20 nm the
#: next-nearest coupling is strong enough to latch stale values.
SYNTH_GEOMETRY = Geometry(cell_size_nm=18.0, dot_diameter_nm=5.0, grid_pitch_nm=24.0)


@dataclass
class Canvas:
    """Mutable grid drawing that becomes an immutable :class:`QcaLayout`."""

    cells: dict[Point, tuple[int, CellRole]] = field(default_factory=dict)

    def put(self, p: Point, zone: int, role: CellRole = NORMAL) -> None:
        if p in self.cells:
            old_zone, old_role = self.cells[p]
            if old_role != role and not (role == NORMAL or old_role == NORMAL):
                raise LayoutError(f"grid point {p} already holds {old_role}")
            if old_role != NORMAL:
                role = old_role
            zone = old_zone
        self.cells[p] = (zone, role)

    def path(self, points: list[Point], zone, start_role: CellRole = NORMAL, end_role: CellRole = NORMAL) -> None:
        """Draw a Manhattan polyline through ``points`` (inclusive).

        ``zone`` is either a constant or a callable ``zone(index along path)``.
        """
        trail = [points[0]]
        for (x0, y0), (x1, y1) in zip(points, points[1:]):
            if x0 != x1 and y0 != y1:
                raise LayoutError(f"segment {(x0, y0)}->{(x1, y1)} is not axis aligned")
            n = max(abs(x1 - x0), abs(y1 - y0))
            sx = (x1 > x0) - (x1 < x0)
            sy = (y1 > y0) - (y1 < y0)
            trail.extend((x0 + sx * k, y0 + sy * k) for k in range(1, n + 1))
        for k, p in enumerate(trail):
            z = zone(k) if callable(zone) else zone
            role = start_role if k == 0 else end_role if k == len(trail) - 1 else NORMAL
            self.put(p, z, role)

    def to_layout(self, geometry: Geometry | None = None, name: str = "", oracles=()) -> QcaLayout:
        geometry = geometry or SYNTH_GEOMETRY
        pitch = geometry.grid_pitch_nm
        # deterministic cell order: row by row, top to bottom, left to right
        order = sorted(self.cells, key=lambda p: (-p[1], p[0]))
        return build_layout(
            [(x * pitch, y * pitch, *self.cells[(x, y)]) for x, y in order],
            geometry,
            name,
            oracles,
        )


# --------------------------------------------------------------------------
# Gate primitives used by the tests and the engine examples


def wire_layout(length: int = 5, zones=None, geometry: Geometry | None = None) -> QcaLayout:
    """A straight wire of ``length`` cells: input ``A`` first, output ``out`` last."""
    if length < 2:
        raise ValueError("a wire needs at least two cells")
    zones = zones or [0] * length
    cv = Canvas()
    for i in range(length):
        role = Input("A") if i == 0 else Output("out") if i == length - 1 else NORMAL
        cv.put((i, 0), zones[i], role)
    return cv.to_layout(geometry, f"wire{length}", [("out", "A")])


def _inverter(cv: Canvas, end: Point, zone: int) -> Point:
    """Fork the eastward wire ending at ``end`` into two short rows and
    pick the signal up diagonally; returns the inverted output point."""
    x, y = end
    for dy in (1, -1):
        cv.put((x, y + dy), zone)
        cv.put((x + 1, y + dy), zone)
    out = (x + 2, y)
    cv.put(out, zone)
    return out


def inverter_layout(geometry: Geometry | None = None) -> QcaLayout:
    cv = Canvas()
    cv.path([(0, 0), (3, 0)], 0, start_role=Input("A"))
    out = _inverter(cv, (3, 0), 0)
    cv.path([out, (out[0] + 3, 0)], 0, end_role=Output("out"))
    return cv.to_layout(geometry, "inverter", [("out", "!A")])


def majority_layout(geometry: Geometry | None = None) -> QcaLayout:
    """Three-input majority gate: A from the west, B from the north, C from the south."""
    cv = Canvas()
    cv.path([(-4, 0), (-1, 0)], 0, start_role=Input("A"))
    cv.path([(0, 4), (0, 1)], 0, start_role=Input("B"))
    cv.path([(0, -4), (0, -1)], 0, start_role=Input("C"))
    cv.put((0, 0), 0)
    cv.path([(1, 0), (4, 0)], 1, end_role=Output("out"))
    return cv.to_layout(geometry, "majority", [("out", "(A&B)|(A&C)|(B&C)")])


# --------------------------------------------------------------------------
# Akers primitive cell: F = X.!Z + Y.Z = MAJ(MAJ(X, !Z, 0), MAJ(Y, Z, 0), 1)


def _primitive(cv: Canvas, origin: Point, zone0: int = 0, out_role: CellRole = NORMAL,
               out_len: int = 4) -> dict[str, Point]:
    """Draw the body of one mux cell relative to ``origin``.

    Returns the driver points ``X``, ``Y``, ``Z`` (left for the caller to
    fill with input cells or wire ends of an earlier zone) and the output
    point ``F``. Every gate of the first stage is at most two hops from a
    driver, because in a single zone a long wire cannot override the
    back-pressure of the gate it feeds. The AND gates put their variable
    input and their fixed 0 on either side of the Z arm, so the two cancel
    on that arm exactly when the gate has to be decided by Z.
    """
    ox, oy = origin
    z0, z1 = zone0 % 4, (zone0 + 1) % 4

    def at(x, y):
        return (ox + x, oy + y)

    # AND(X, !Z): the Z-bar arm is a single cell diagonal to the Z driver
    cv.put(at(1, 1), z0)
    cv.put(at(1, 2), z0)
    cv.put(at(2, 2), z0, Fixed(-1.0))
    cv.path([at(1, 3), at(1, 4), at(6, 4), at(6, 1)], z0)

    # AND(Y, Z) straight below the Z driver
    cv.path([at(0, -1), at(0, -3)], z0)
    cv.put(at(1, -3), z0, Fixed(-1.0))
    cv.path([at(0, -4), at(0, -5), at(4, -5), at(4, -1)], z0)

    # OR of the products with a fixed 1
    cv.put(at(6, 0), z1)
    cv.put(at(5, -1), z1)
    cv.put(at(6, -1), z1)
    cv.put(at(6, -2), z1, Fixed(1.0))
    cv.path([at(7, -1), at(6 + out_len, -1)], z1, end_role=out_role)
    return {"X": at(0, 2), "Y": at(-1, -3), "Z": at(0, 0), "F": at(6 + out_len, -1)}


def synthesize_primitive_layout(geometry: Geometry | None = None) -> QcaLayout:
    """Mux-based modified Akers cell with inputs X, Y, Z and output F."""
    cv = Canvas()
    pins = _primitive(cv, (0, 0), out_role=Output("F"))
    for label in "XYZ":
        cv.put(pins[label], 0, Input(label))
    return cv.to_layout(geometry, "akers-primitive", [("F", "(X&!Z)|(Y&Z)")])


def synthesize_xor_layout(geometry: Geometry | None = None) -> QcaLayout:
    """The four-cell XOR network laid out with :func:`synthesize_network_layout`."""
    return synthesize_network_layout(build_xor_network(), geometry, name="akers-xor", oracles=[("F", "A^B")])


# --------------------------------------------------------------------------
# Composed networks
#
# Cells of equal depth share a column. Wires run through the channel west of
# their consumer column: along the source row to a private vertical trunk,
# then along each pin row to the pin. A wire is cut into clock-zone segments
# of at most ``max_segment`` cells, because a long wire inside one zone is
# decided by whatever bias sits at its far end rather than by its driver.
# The first stage of every column is then placed in the earliest zone that
# leaves its input pins held while it switches. Input pads sit in zone 0, the
# only zone that is fully released when the schedule changes its inputs.

_PIN_OFFSETS = {"X": (0, 2), "Y": (-1, -3), "Z": (0, 0)}
_F_OFFSET = (10, -1)
_ROW_PITCH = 14
_TRACK_PITCH = 3
MAX_SEGMENT = 4


class RoutingError(LayoutError):
    """The router could not connect a net without touching another one."""


@dataclass
class _Net:
    key: str
    sinks: list[tuple[int, str, Point]]  # (consumer cell id, pin name, pin point)
    source_cell: int | None = None
    pad: CellRole | None = None
    start: Point = (0, 0)
    dist: dict[Point, int] = field(default_factory=dict)

    def describe(self) -> str:
        users = ", ".join(f"c{cid}.{pin}" for cid, pin, _ in self.sinks)
        return f"{self.key} -> {users}"

    def reach(self) -> tuple[int, int]:
        """Cell counts from the start to the nearest and farthest pin."""
        d = [self.dist[p] + 1 for _, _, p in self.sinks]
        return min(d), max(d)


def _trace(net: _Net, trunk_x: int) -> dict[Point, int]:
    """Cells of ``net`` with their distance from the start along the wire."""
    sx, sy = net.start
    rows = [p[1] for _, _, p in net.sinks]
    pts: set[Point] = set((x, sy) for x in range(sx, trunk_x + 1))
    lo, hi = min(rows + [sy]), max(rows + [sy])
    pts.update((trunk_x, y) for y in range(lo, hi + 1))
    for _, _, (px, py) in net.sinks:
        pts.update((x, py) for x in range(trunk_x, px + 1))
    dist = {net.start: 0}
    frontier = [net.start]
    while frontier:
        nxt = []
        for x, y in frontier:
            for q in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                if q in pts and q not in dist:
                    dist[q] = dist[(x, y)] + 1
                    nxt.append(q)
        frontier = nxt
    return dist


def _segments_needed(net: _Net, max_segment: int) -> int:
    nearest, farthest = net.reach()
    if farthest - nearest >= max_segment:
        raise RoutingError(f"net {net.describe()} fans out to pins {farthest - nearest} cells apart")
    return -(-farthest // max_segment)


def _net_zones(net: _Net, first_zone: int, count: int, max_segment: int) -> dict[Point, int]:
    """Spread ``count`` consecutive zones over the wire starting at ``first_zone``.

    Zone boundaries sit every ``step`` cells from the start; ``step`` is chosen
    so that every pin lands in the last zone and no zone holds a run longer
    than ``max_segment`` cells.
    """
    nearest, farthest = net.reach()
    if count > nearest:
        raise RoutingError(f"net {net.describe()} is too short for {count} clock zones")
    if count == 1:
        step = float(farthest)
    else:
        lo = (farthest - max_segment) / (count - 1)
        hi = min(max_segment, (nearest - 1) / (count - 1))
        step = min(max(nearest / count, lo), hi)
    return {p: (first_zone + min(count - 1, int(d / step))) % 4 for p, d in net.dist.items()}


def _conflicts(claims: dict[Point, object], mine: dict[Point, int], owner, allowed: set[Point]) -> list[Point]:
    bad = []
    for (x, y) in mine:
        if (x, y) in allowed:
            continue
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                other = claims.get((x + dx, y + dy))
                if other is not None and other != owner:
                    bad.append((x, y))
    return bad


def _pad_starts(net: _Net, left: int, track: int) -> list[Point]:
    """Candidate pad positions for an input net, best first: the channel edge
    on the pins' mean row, the edge on nearby rows, then the net's own trunk
    (which lets a pad sit inside another net's span)."""
    rows = [p[1] for _, _, p in net.sinks]
    lo, hi = min(rows), max(rows)
    mean = round(sum(rows) / len(rows))
    edge = sorted(range(lo - 4, hi + 5), key=lambda y: (abs(y - mean), y))
    trunk = sorted(range(lo, hi + 1), key=lambda y: (abs(y - mean), y))
    return [(left, y) for y in edge] + [(track, y) for y in trunk]


def _route_channel(claims: dict[Point, object], chan: list[_Net], left: int) -> None:
    """Pick a trunk order (and pad positions) for which no net touches
    foreign cells; fills ``net.dist`` and ``net.start``."""
    tracks = [left + 2 + _TRACK_PITCH * j for j in range(len(chan))]
    failure = None
    for order in itertools.permutations(range(len(chan))):
        trial = dict(claims)
        placed = []
        for n, j in zip(chan, order):
            starts = [n.start] if n.pad is None else _pad_starts(n, left, tracks[j])
            for start in starts:
                n.start = start
                dist = _trace(n, tracks[j])
                allowed = {n.start}
                for _, _, (px, py) in n.sinks:
                    allowed.update({(px, py), (px - 1, py)})
                bad = _conflicts(trial, dist, ("net", n.key), allowed)
                if not bad:
                    break
            if bad:
                failure = f"net {n.describe()} touches other wiring at grid points {sorted(set(bad))[:4]}"
                break
            trial.update((p, ("net", n.key)) for p in dist)
            placed.append((n, start, dist))
        else:
            for n, start, dist in placed:
                n.start, n.dist = start, dist
            claims.update(trial)
            return
    raise RoutingError(failure or "empty channel")


def synthesize_network_layout(net: AkersNetwork, geometry: Geometry | None = None, name: str = "akers-network",
                              oracles=None, max_segment: int = MAX_SEGMENT) -> QcaLayout:
    """Lay out an Akers network as one mux cell per network cell plus wiring.

    Raises :class:`RoutingError` naming the offending cells when a net cannot
    be routed on a single layer.
    """
    depth = levels(net)
    by_id = net.by_id
    n_levels = max(depth.values()) + 1
    columns = [sorted(cid for cid, d in depth.items() if d == lvl) for lvl in range(n_levels)]

    # vertical placement: first column stacked, later ones centred on their sources
    row: dict[int, int] = {}
    for lvl, ids in enumerate(columns):
        wanted = []
        for i, cid in enumerate(ids):
            src = [row[int(r.value)] for r in (by_id[cid].x, by_id[cid].y) if r.kind == "cell"]
            wanted.append((round(sum(src) / len(src)) if src else -_ROW_PITCH * i, cid))
        wanted.sort(key=lambda t: (-t[0], t[1]))
        last = None
        for y, cid in wanted:
            if last is not None and y > last - _ROW_PITCH:
                y = last - _ROW_PITCH
            row[cid] = last = y

    # one net per source signal; constants become fixed cells on the pins
    nets: dict[str, _Net] = {}
    fixed: list[tuple[int, Point, float]] = []
    for cid in (c for ids in columns for c in ids):
        spec = by_id[cid]
        for pin, ref in (("X", spec.x), ("Y", spec.y), ("Z", spec.z)):
            if ref.kind == "const":
                fixed.append((cid, _PIN_OFFSETS[pin], 1.0 if ref.value else -1.0))
                continue
            key = str(ref)
            if key not in nets:
                if ref.kind == "cell":
                    nets[key] = _Net(key, [], source_cell=int(ref.value))
                else:
                    nets[key] = _Net(key, [], pad=Input(str(ref.value)))
            nets[key].sinks.append((cid, pin, _PIN_OFFSETS[pin]))
    target: dict[str, int] = {}
    for key, n in nets.items():
        lv = {depth[cid] for cid, _, _ in n.sinks}
        if len(lv) > 1:
            users = ", ".join(f"c{cid}" for cid, _, _ in n.sinks)
            raise RoutingError(f"signal {key} feeds cells of different depth ({users}); insert buffer cells")
        target[key] = lv.pop()

    channels = [[n for k, n in nets.items() if target[k] == lvl] for lvl in range(n_levels)]
    colx: list[int] = []
    lefts: list[int] = []
    for lvl in range(n_levels):
        left = colx[-1] + _F_OFFSET[0] + 1 if lvl else 0
        lefts.append(left)
        colx.append(left + _TRACK_PITCH * len(channels[lvl]) + 4)

    claims: dict[Point, object] = {}
    bodies: dict[int, Canvas] = {}
    for lvl, ids in enumerate(columns):
        for cid in ids:
            sub = Canvas()
            _primitive(sub, (colx[lvl], row[cid]))
            bodies[cid] = sub
            claims.update((p, ("cell", cid)) for p in sub.cells)
    for cid, (dx, dy), _ in fixed:
        claims[(colx[depth[cid]] + dx, row[cid] + dy)] = ("cell", cid)

    for lvl, chan in enumerate(channels):
        for n in chan:
            n.sinks = [(cid, pin, (colx[lvl] + dx, row[cid] + dy)) for cid, pin, (dx, dy) in n.sinks]
            if n.source_cell is not None:
                n.start = (lefts[lvl], row[n.source_cell] + _F_OFFSET[1])
            else:
                rows = [p[1] for _, _, p in n.sinks]
                n.start = (lefts[lvl], round(sum(rows) / len(rows)))
        _route_channel(claims, chan, lefts[lvl])

    # clock zones: first stage of each column in the earliest zone that fits its wires
    stage_a: list[int] = []
    for lvl, chan in enumerate(channels):
        za = 1 if lvl == 0 else stage_a[-1] + 3
        for n in chan:
            first = 0 if n.source_cell is None else stage_a[depth[n.source_cell]] + 2
            za = max(za, first + _segments_needed(n, max_segment))
        stage_a.append(za)

    cv = Canvas()
    for lvl, ids in enumerate(columns):
        for cid in ids:
            out_role = NORMAL
            if cid in net.outputs:
                out_role = Output("F" if len(net.outputs) == 1 else f"F{cid}")
            _primitive(cv, (colx[lvl], row[cid]), stage_a[lvl], out_role)
    for cid, (dx, dy), pol in fixed:
        cv.put((colx[depth[cid]] + dx, row[cid] + dy), stage_a[depth[cid]] % 4, Fixed(pol))
    for lvl, chan in enumerate(channels):
        for n in chan:
            first = 0 if n.source_cell is None else stage_a[depth[n.source_cell]] + 2
            for p, z in _net_zones(n, first, stage_a[lvl] - first, max_segment).items():
                cv.put(p, z, n.pad if (p == n.start and n.pad is not None) else NORMAL)

    if oracles is None:
        oracles = []
        for out in net.outputs:
            label = "F" if len(net.outputs) == 1 else f"F{out}"
            oracles.append((label, network_expression(net, out)))
    return cv.to_layout(geometry, name, oracles)
