"""Flat cone surfaces of cubic differentials (1/3-translation surfaces).

A surface is a collection of oriented Euclidean triangles with complex vertex
coordinates in charts where the differential is dz^3, glued edge-to-edge by
transitions z -> zeta^m z + c with zeta = e^(2*pi*i/3).  Cone points carry an
order k >= 0 and total angle 2*pi*(1 + k/3).  Straight segments between marked
points (saddle connections) are traced by developing triangle chains.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from typing import Optional

from .errors import DegeneratePath, NotConverged

ZETA = complex(-0.5, math.sqrt(3.0) / 2.0)  # e^(2*pi*i/3)
TWO_PI = 2.0 * math.pi

_ANGLE_TOL = 1e-9       # cone-angle closure and turn-angle comparisons
_EDGE_TOL = 1e-12       # relative tolerance on glued edge lengths
_DIRECTION_TOL = 1e-10  # Stokes / Weyl-wall classification
_POS_TOL = 1e-9         # absolute position tolerance in developments


def _cross(a: complex, b: complex) -> float:
    return a.real * b.imag - a.imag * b.real


# ---------------------------------------------------------------------------
# basic types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gluing:
    """Identifies edge_a of one triangle with edge_b of another.

    The transition T(z) = zeta^rot * z + trans maps the chart of edge_a's
    triangle to the chart of edge_b's triangle, sending the directed edge
    (v_a -> v_a+1) onto the reversed directed edge (v_b+1 -> v_b).
    """

    edge_a: tuple  # (triangle index, side index)
    edge_b: tuple
    rot: int       # m in {0, 1, 2}
    trans: complex

    def map_a_to_b(self, z: complex) -> complex:
        return ZETA ** self.rot * z + self.trans


@dataclass(frozen=True)
class SaddleConnection:
    """Straight segment between marked cone points, with its chart period."""

    start: int
    end: int
    period: complex

    def __post_init__(self):
        if self.period == 0:
            raise ValueError("saddle connection must have nonzero period")

    @property
    def length(self) -> float:
        return abs(self.period)

    @property
    def angle(self) -> float:
        return cmath.phase(self.period) % TWO_PI

    def reversed(self) -> "SaddleConnection":
        return SaddleConnection(self.end, self.start, -self.period)


@dataclass(frozen=True)
class DirectionClass:
    tag: str  # "Regular" | "Stokes" | "WeylWall"
    chart_angle: float


def classify_direction(chart_angle: float, tol: float = _DIRECTION_TOL) -> DirectionClass:
    """Classify a natural-chart direction.

    Stokes directions sit at pi/6 mod pi/3, Weyl walls at 0 mod pi/3.
    """
    if not math.isfinite(chart_angle):
        raise ValueError("chart angle must be finite")
    r = chart_angle % (math.pi / 3.0)
    if min(r, math.pi / 3.0 - r) <= tol:
        return DirectionClass("WeylWall", chart_angle)
    if abs(r - math.pi / 6.0) <= tol:
        return DirectionClass("Stokes", chart_angle)
    return DirectionClass("Regular", chart_angle)


def classify_direction_at(surface, zero: int, chart_angle: float,
                          tol: float = _DIRECTION_TOL) -> DirectionClass:
    """Classify a direction at a marked zero of a surface.

    The classification is the modular condition on the natural-chart angle;
    the zero argument is validated so callers cannot classify directions at
    unmarked points.
    """
    if zero not in surface.vertex_orders:
        raise ValueError(f"vertex class {zero} is not a marked point")
    return classify_direction(chart_angle, tol)


@dataclass(frozen=True)
class Junction:
    """Zero-local data where two path segments meet.

    theta_in is the position angle (natural-chart lift) of the incoming ray
    seen from the zero; theta_out the outgoing one.  theta_out - theta_in is
    the counterclockwise side angle of the turn.
    """

    order: int
    theta_in: float
    theta_out: float
    zero: int = -1

    @property
    def cone_angle(self) -> float:
        return TWO_PI * (1.0 + self.order / 3.0)

    @property
    def turn_angles(self) -> tuple:
        ccw = self.theta_out - self.theta_in
        return (ccw, self.cone_angle - ccw)


@dataclass(frozen=True)
class GeodesicPath:
    """Concatenation of saddle connections with >= pi side angles at zeros.

    For open paths, junctions[i] joins segments[i] to segments[i+1].  For
    closed paths there is one junction per segment and junctions[i] joins
    segments[i-1] to segments[i]; junctions[0] is the wrap-around.
    """

    segments: tuple
    junctions: tuple
    closed: bool = False

    def __post_init__(self):
        n = len(self.segments)
        if n == 0:
            raise DegeneratePath("path has no segments")
        want = n if self.closed else n - 1
        if len(self.junctions) != want:
            raise ValueError(
                f"expected {want} junctions for {n} segments, got {len(self.junctions)}")

    @property
    def total_length(self) -> float:
        return sum(s.length for s in self.segments)

    def junction_between(self, i: int) -> Junction:
        """The junction joining segments[i] to segments[i+1 mod n]."""
        if self.closed:
            return self.junctions[(i + 1) % len(self.segments)]
        return self.junctions[i]

    def reversed(self) -> "GeodesicPath":
        n = len(self.segments)
        segs = tuple(self.segments[n - 1 - j].reversed() for j in range(n))

        def rev(j: Junction) -> Junction:
            ccw, cw = j.turn_angles
            return Junction(order=j.order, zero=j.zero,
                            theta_in=j.theta_out, theta_out=j.theta_out + cw)

        if self.closed:
            juncs = tuple(rev(self.junctions[(n - j) % n]) for j in range(n))
        else:
            juncs = tuple(rev(j) for j in reversed(self.junctions))
        return GeodesicPath(segs, juncs, self.closed)


def validate_path(path: GeodesicPath, tol: float = _ANGLE_TOL) -> list:
    """Return violated geodesic/consistency conditions (empty when valid)."""
    out = []
    n = len(path.segments)
    pairs = range(n) if path.closed else range(n - 1)
    for i in pairs:
        prev = path.segments[i]
        nxt = path.segments[(i + 1) % n]
        j = path.junction_between(i)
        ccw, cw = j.turn_angles
        if ccw < math.pi - tol or cw < math.pi - tol:
            out.append(("TurnTooSharp", i, min(ccw, cw)))
        if prev.end >= 0 and nxt.start >= 0 and prev.end != nxt.start:
            out.append(("DisconnectedSegments", i, (prev.end, nxt.start)))
        # the junction chart must see the adjacent segment directions at
        # angles compatible with some natural chart (2*pi/3 rotations)
        rin = (j.theta_in - (cmath.phase(-prev.period))) % (TWO_PI / 3.0)
        rout = (j.theta_out - cmath.phase(nxt.period)) % (TWO_PI / 3.0)
        for r, tag in ((rin, "In"), (rout, "Out")):
            if min(r, TWO_PI / 3.0 - r) > 1e-7:
                out.append((f"ChartMisaligned{tag}", i, r))
    return out


def is_geodesic(path: GeodesicPath) -> bool:
    return not validate_path(path)


def synthesize_path(lengths, turns, orders, start_angle=0.0, closed=False):
    """Build a geodesic path from segment lengths and ccw junction turns.

    turns[i] is the counterclockwise side angle at the junction joining
    segment i to segment i+1 (for closed paths the last entry is the
    wrap-around turn).  Charts are aligned segment by segment, so the
    resulting junction data is directly usable by the leading-term formula.
    Intended for synthetic workloads not grounded on a surface.
    """
    n = len(lengths)
    want = n if closed else n - 1
    if len(turns) != want or len(orders) != want:
        raise ValueError("need one turn/order per junction")
    angles = [start_angle]
    juncs_open = []
    for i in range(n - 1):
        k = orders[i]
        cone = TWO_PI * (1.0 + k / 3.0)
        ccw = turns[i]
        if ccw < math.pi - _ANGLE_TOL or ccw > cone - math.pi + _ANGLE_TOL:
            raise ValueError(f"turn {ccw} out of geodesic range at junction {i}")
        theta_in = angles[-1] + math.pi
        theta_out = theta_in + ccw
        juncs_open.append(Junction(order=k, theta_in=theta_in, theta_out=theta_out))
        angles.append(theta_out)
    segs = tuple(SaddleConnection(-1, -1, L * cmath.exp(1j * a))
                 for L, a in zip(lengths, angles))
    if not closed:
        return GeodesicPath(segs, tuple(juncs_open), False)
    k = orders[-1]
    cone = TWO_PI * (1.0 + k / 3.0)
    ccw = turns[-1]
    if ccw < math.pi - _ANGLE_TOL or ccw > cone - math.pi + _ANGLE_TOL:
        raise ValueError("wrap-around turn out of geodesic range")
    theta_in = angles[-1] + math.pi
    theta_out = theta_in + ccw
    resid = (theta_out - start_angle) % (TWO_PI / 3.0)
    if min(resid, TWO_PI / 3.0 - resid) > 1e-7:
        raise ValueError("wrap-around turn incompatible with the start angle "
                         "(must close up modulo 2*pi/3)")
    wrap = Junction(order=k, theta_in=theta_in, theta_out=theta_out)
    return GeodesicPath(segs, (wrap,) + tuple(juncs_open), True)


# ---------------------------------------------------------------------------
# the surface
# ---------------------------------------------------------------------------

class CubicSurface:
    """Triangulated flat cone surface carrying |q0|^(2/3).

    Immutable after construction; derived combinatorics (vertex classes,
    corner fans, cone angles) are computed once up front.
    """

    def __init__(self, triangles, gluings, vertex_orders=None, boundary=None):
        self.triangles = tuple(tuple(complex(z) for z in tri) for tri in triangles)
        self.gluings = tuple(gluings)
        self.boundary = frozenset(tuple(e) for e in (boundary or ()))
        self._edge_map = {}
        for g in self.gluings:
            self._edge_map[g.edge_a] = (g.edge_b, g.rot, g.trans)
            minus = (-g.rot) % 3
            self._edge_map[g.edge_b] = (g.edge_a, minus,
                                        -(ZETA ** minus) * g.trans)
        self._build_vertex_classes()
        self.vertex_orders = dict(vertex_orders or {})

    # -- combinatorics ------------------------------------------------------

    def _build_vertex_classes(self):
        corners = [(t, v) for t in range(len(self.triangles)) for v in range(3)]
        parent = {c: c for c in corners}

        def find(c):
            while parent[c] != c:
                parent[c] = parent[parent[c]]
                c = parent[c]
            return c

        def union(a, b):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

        for g in self.gluings:
            ta, sa = g.edge_a
            tb, sb = g.edge_b
            union((ta, sa), (tb, (sb + 1) % 3))
            union((ta, (sa + 1) % 3), (tb, sb))
        classes = {}
        for c in corners:
            classes.setdefault(find(c), []).append(c)
        reps = sorted(classes)
        self._class_of = {}
        self.vertex_classes = []
        for idx, rep in enumerate(reps):
            members = sorted(classes[rep])
            self.vertex_classes.append(members)
            for c in members:
                self._class_of[c] = idx
        self._build_fans()

    def corner_angle(self, tri: int, v: int) -> float:
        p = self.coords(tri, v)
        q = self.coords(tri, v + 1)
        r = self.coords(tri, v + 2)
        ang = cmath.phase((r - p) / (q - p)) % TWO_PI
        return ang

    def next_corner_ccw(self, tri, v):
        """Corner ccw-adjacent at the vertex: across the edge (v+2 -> v)."""
        info = self._edge_map.get((tri, (v + 2) % 3))
        if info is None:
            return None
        (t2, s2) = info[0]
        return (t2, s2)

    def next_corner_cw(self, tri, v):
        """Corner cw-adjacent at the vertex: across the edge (v -> v+1)."""
        info = self._edge_map.get((tri, v))
        if info is None:
            return None
        (t2, s2) = info[0]
        return (t2, (s2 + 1) % 3)

    def _build_fans(self):
        self.fans = []
        self.fan_closed = []
        self.cone_angles = []
        self._fan_offset = {}
        done = set()
        for members in self.vertex_classes:
            start = next(c for c in members if c not in done)
            cur = start
            visited = {cur}
            closed = False
            while True:
                prev = self.next_corner_cw(*cur)
                if prev is None:
                    break
                if prev in visited:
                    closed = True
                    break
                visited.add(prev)
                cur = prev
            first = cur
            fan = [first]
            while True:
                nxt = self.next_corner_ccw(*fan[-1])
                if nxt is None or nxt == first:
                    break
                fan.append(nxt)
            angle = 0.0
            for corner in fan:
                self._fan_offset[corner] = angle
                angle += self.corner_angle(*corner)
                done.add(corner)
            self.fans.append(fan)
            self.fan_closed.append(closed)
            self.cone_angles.append(angle)

    def class_of(self, tri: int, v: int) -> int:
        return self._class_of[(tri, v % 3)]

    def n_classes(self) -> int:
        return len(self.vertex_classes)

    def is_marked(self, cls: int) -> bool:
        return cls in self.vertex_orders

    def marked_classes(self):
        return sorted(self.vertex_orders)

    def coords(self, tri: int, v: int) -> complex:
        return self.triangles[tri][v % 3]

    def edge_vector(self, tri: int, side: int) -> complex:
        return self.coords(tri, side + 1) - self.coords(tri, side)

    def neighbor(self, tri: int, side: int):
        """((tri2, side2), rot, trans) across the edge, or None on boundary.

        The transition z -> zeta^rot z + trans maps this triangle's chart to
        the neighbor's chart.
        """
        return self._edge_map.get((tri, side))

    def fan_angle(self, tri: int, v: int, chart_dir: complex) -> float:
        """Metric angle of a direction at a corner, in its class's fan frame.

        chart_dir is expressed in the corner triangle's chart; the result is
        measured ccw from the fan's first edge.
        """
        base = self.edge_vector(tri, v)
        rel = cmath.phase(chart_dir / base) % TWO_PI
        span = self.corner_angle(tri, v)
        if rel >= TWO_PI - 1e-7:
            rel = 0.0
        if rel > span + 1e-7:
            raise ValueError("direction not inside the given corner")
        return self._fan_offset[(tri, v)] + rel

    # -- Euler characteristic -------------------------------------------------

    def euler_characteristic(self) -> int:
        n_faces = len(self.triangles)
        all_edges = {(t, s) for t in range(n_faces) for s in range(3)}
        glued = set(self._edge_map)
        n_edges = len(glued) // 2 + len(all_edges - glued)
        return self.n_classes() - n_edges + n_faces

    def genus(self) -> Optional[int]:
        if self.boundary or any(not c for c in self.fan_closed):
            return None
        chi = self.euler_characteristic()
        if (2 - chi) % 2:
            return None
        return (2 - chi) // 2


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def build_polynomial_disk(k: int, radius: float) -> CubicSurface:
    """Model disk of z^k dz^3: one cone point of angle 2*pi*(1 + k/3).

    ``radius`` is the |q0|^(2/3)-radius (natural units).  The disk is realized
    as the cone over its inscribed 2(k+3)-gon: 2(k+3) wedges of apex angle
    pi/3 in natural charts, boundary chords marked as boundary edges.
    """
    if k < 0:
        raise ValueError("zero order k must be >= 0")
    if radius <= 0:
        raise ValueError("radius must be positive")
    n = 2 * (k + 3)
    tris = []
    for j in range(n):
        a = radius * cmath.exp(1j * math.pi / 3.0 * j)
        b = radius * cmath.exp(1j * math.pi / 3.0 * (j + 1))
        tris.append((0.0, a, b))
    gluings = []
    for j in range(n - 1):
        # consecutive wedges are stored in a common development
        gluings.append(Gluing((j, 2), (j + 1, 0), 0, 0.0))
    # closing seam: the transition from the last wedge's chart back to the
    # first runs clockwise through the full cone angle 2*pi*(k+3)/3, so its
    # rotation part is zeta^(-k)
    gluings.append(Gluing((n - 1, 2), (0, 0), (-k) % 3, 0.0))
    boundary = {(j, 1) for j in range(n)}
    return CubicSurface(tris, gluings, vertex_orders={0: k}, boundary=boundary)


def build_square_torus() -> CubicSurface:
    """Flat torus of dz^3 on C/(Z + iZ): translations only, no marked points."""
    tris = [(0.0, 1.0, 1j), (1.0 + 1j, 1j, 1.0)]
    gluings = [
        Gluing((0, 1), (1, 1), 0, 0.0),   # shared diagonal
        Gluing((0, 0), (1, 0), 0, 1j),    # bottom edge -> top edge
        Gluing((0, 2), (1, 2), 0, 1.0),   # left edge -> right edge
    ]
    return CubicSurface(tris, gluings, vertex_orders={})


def build_l_surface() -> CubicSurface:
    """Genus-2 translation surface: L of three unit squares, opposite sides
    glued by translations.  One cone point of angle 6*pi (order k = 6)."""
    squares = [(0, 0), (1, 0), (0, 1)]
    tris = []
    for (x, y) in squares:
        z = complex(x, y)
        tris.append((z, z + 1, z + 1 + 1j))   # lower: sides bottom/right/diag
        tris.append((z, z + 1 + 1j, z + 1j))  # upper: sides diag/top/left
    # tris index: square i -> lower triangle 2i, upper 2i+1
    gluings = [Gluing((2 * i, 2), (2 * i + 1, 0), 0, 0.0) for i in range(3)]

    def glue(e1, e2, trans):
        gluings.append(Gluing(e1, e2, 0, complex(*trans)))

    glue((0, 0), (5, 1), (0, 2))    # bottom of sq0 -> top of sq2
    glue((2, 0), (3, 1), (0, 1))    # bottom of sq1 -> top of sq1
    glue((4, 0), (1, 1), (0, 0))    # bottom of sq2 = top of sq0 (interior seam)
    glue((1, 2), (2, 1), (2, 0))    # left of sq0 -> right of sq1
    glue((5, 2), (4, 1), (1, 0))    # left of sq2 -> right of sq2
    glue((0, 1), (3, 2), (0, 0))    # right of sq0 = left of sq1 (interior seam)
    return CubicSurface(tris, gluings, vertex_orders={0: 6})


def barycentric_refine(surface: CubicSurface) -> CubicSurface:
    """Subdivide every triangle at edge midpoints and centroid (6 pieces).

    Added vertices are unmarked flat points; the flat structure and all
    saddle connections are unchanged.
    """
    tris = []
    gluings = []
    sub_index = {}
    for t, (a, b, c) in enumerate(surface.triangles):
        mab, mbc, mca = (a + b) / 2, (b + c) / 2, (c + a) / 2
        g0 = (a + b + c) / 3
        base = len(tris)
        sub_index[t] = base
        tris.extend([
            (a, mab, g0), (mab, b, g0),
            (b, mbc, g0), (mbc, c, g0),
            (c, mca, g0), (mca, a, g0),
        ])
        for j in range(6):
            gluings.append(Gluing((base + j, 1), (base + (j + 1) % 6, 2), 0, 0.0))
    boundary = set()
    handled = set()
    for t in range(len(surface.triangles)):
        for s in range(3):
            first = (sub_index[t] + 2 * s, 0)
            second = (sub_index[t] + 2 * s + 1, 0)
            nb = surface.neighbor(t, s)
            if nb is None:
                boundary.add(first)
                boundary.add(second)
                continue
            if (t, s) in handled:
                continue
            (t2, s2), rot, trans = nb
            handled.add((t2, s2))
            gluings.append(Gluing(first, (sub_index[t2] + 2 * s2 + 1, 0), rot, trans))
            gluings.append(Gluing(second, (sub_index[t2] + 2 * s2, 0), rot, trans))
    refined = CubicSurface(tris, gluings, vertex_orders={}, boundary=boundary)
    orders = {}
    for cls, k in surface.vertex_orders.items():
        t, v = surface.vertex_classes[cls][0]
        orders[refined.class_of(sub_index[t] + 2 * v, 0)] = k
    return CubicSurface(tris, gluings, vertex_orders=orders, boundary=boundary)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str
    detail: tuple = ()


def validate(surface: CubicSurface) -> list:
    """Check all structural invariants; return violations (never raises)."""
    out = []
    seen = {}
    all_edges = {(t, s) for t in range(len(surface.triangles)) for s in range(3)}
    for g in surface.gluings:
        for e in (g.edge_a, g.edge_b):
            seen[e] = seen.get(e, 0) + 1
        if g.edge_a == g.edge_b:
            out.append(Violation("FixedEdge", (g.edge_a,)))
            continue
        va = surface.edge_vector(*g.edge_a)
        vb = surface.edge_vector(*g.edge_b)
        if abs(abs(va) - abs(vb)) > _EDGE_TOL * max(abs(va), abs(vb)):
            out.append(Violation("EdgeLengthMismatch", (g.edge_a, g.edge_b)))
        ta, sa = g.edge_a
        tb, sb = g.edge_b
        p = g.map_a_to_b(surface.coords(ta, sa))
        q = g.map_a_to_b(surface.coords(ta, sa + 1))
        ok = (abs(p - surface.coords(tb, sb + 1)) <= 1e-9 * max(1, abs(p))
              and abs(q - surface.coords(tb, sb)) <= 1e-9 * max(1, abs(q)))
        if not ok:
            out.append(Violation("TransitionMismatch", (g.edge_a, g.edge_b)))
    for e, count in seen.items():
        if count > 1:
            out.append(Violation("NotInvolutive", (e,)))
    unglued = all_edges - set(seen)
    for e in sorted(unglued - surface.boundary):
        out.append(Violation("UnpairedEdge", (e,)))
    for e in sorted(surface.boundary & set(seen)):
        out.append(Violation("BoundaryEdgeGlued", (e,)))
    for t in range(len(surface.triangles)):
        a, b, c = surface.triangles[t]
        if _cross(b - a, c - a) <= 0:
            out.append(Violation("ClockwiseTriangle", (t,)))
    for cls in range(surface.n_classes()):
        if not surface.fan_closed[cls]:
            continue
        angle = surface.cone_angles[cls]
        k = surface.vertex_orders.get(cls)
        if k is None:
            if abs(angle - TWO_PI) > _ANGLE_TOL:
                out.append(Violation("UnmarkedConical", (cls, angle)))
        else:
            want = TWO_PI * (1.0 + k / 3.0)
            if abs(angle - want) > _ANGLE_TOL:
                out.append(Violation("ConeAngleMismatch", (cls, angle, want)))
    if not surface.boundary and all(surface.fan_closed):
        g = surface.genus()
        if g is not None:
            total = sum(surface.vertex_orders.values())
            if total != 6 * g - 6:
                out.append(Violation("DegreeMismatch", (total, 6 * g - 6)))
    return out


def develop_fan_closure(surface: CubicSurface, cls: int):
    """Compose the chart transitions around a closed vertex fan.

    Returns (u, c): the rigid motion z -> u z + c a chart picks up after one
    full loop.  For a valid surface u = zeta^(k mod 3).
    """
    if not surface.fan_closed[cls]:
        raise ValueError("fan is not closed")
    fan = surface.fans[cls]
    u, b = 1.0 + 0j, 0.0 + 0j
    for (t, v) in fan:
        (t2, s2), rot, trans = surface.neighbor(t, (v + 2) % 3)
        w = ZETA ** ((-rot) % 3)
        u, b = u * w, b - u * w * trans
    return u, b


# ---------------------------------------------------------------------------
# development: ray shooting through the triangulation
# ---------------------------------------------------------------------------

@dataclass
class _Diag:
    clipped: int = 0


@dataclass(frozen=True)
class RayHit:
    """First marked point on a ray, with arrival chart data.

    ``point`` is the developed position; since developments start at the
    source vertex, it is also the chart period of the traced segment.  ``u``
    rotates the final triangle's chart into the development frame.
    """

    cls: int
    distance: float
    point: complex
    tri: int
    vertex: int
    u: complex


def _place(u, b, z):
    return u * z + b


def _compose_across(surface, u, b, tri, side):
    """Placement of the neighbor across (tri, side), or None on boundary."""
    nb = surface.neighbor(tri, side)
    if nb is None:
        return None
    (t2, s2), rot, trans = nb
    w = ZETA ** ((-rot) % 3)
    return t2, s2, u * w, b - u * w * trans


def _ray_walk(surface, tri, u, b, x0, d, max_len, diag, entry_side=None):
    """Follow the ray x0 + t*d through triangle interiors.

    Returns ("hit", RayHit) | ("vertex", tri, vtx, u, b) when the ray runs
    exactly into a vertex | ("clipped",) | ("out",) when past max_len.
    """
    steps = 0
    while True:
        steps += 1
        if steps > 200000:
            raise NotConverged("ray developed too many triangles")
        coords = [_place(u, b, surface.coords(tri, i)) for i in range(3)]
        best = None
        for side in range(3):
            if side == entry_side:
                continue
            p, q = coords[side], coords[(side + 1) % 3]
            e = q - p
            denom = _cross(d, e)
            if abs(denom) < 1e-16:
                continue
            w = p - x0
            t = _cross(w, e) / denom
            sig = _cross(w, d) / denom
            if t <= _POS_TOL or sig < -1e-9 or sig > 1 + 1e-9:
                continue
            if best is None or t < best[0]:
                best = (t, side, sig)
        if best is None:
            # numerical corner case: allow re-testing the entry side
            if entry_side is not None:
                entry_side = None
                continue
            raise NotConverged("ray found no exit from triangle")
        t, side, sig = best
        x1 = x0 + t * d
        dist = (x1 * d.conjugate()).real
        if dist > max_len + _POS_TOL:
            return ("out",)
        edge_len = abs(coords[(side + 1) % 3] - coords[side])
        if abs(sig) * edge_len <= _POS_TOL:
            return ("vertex", tri, side, u, b)
        if abs(1 - sig) * edge_len <= _POS_TOL:
            return ("vertex", tri, (side + 1) % 3, u, b)
        step = _compose_across(surface, u, b, tri, side)
        if step is None:
            diag.clipped += 1
            return ("clipped",)
        tri, entry_side, u, b = step
        x0 = x1


def _ray_from_vertex(surface, tri, vtx, u, b, d, max_len, diag):
    """Continue a ray that currently stands on vertex (tri, vtx).

    The vertex has already been examined (hit or passed); this finds the next
    stretch: along an edge, or through a corner interior, walking the fan as
    needed.
    """
    pos = _place(u, b, surface.coords(tri, vtx))
    corner = (tri, vtx)
    cu, cb = u, b
    cls = surface.class_of(tri, vtx)
    for _ in range(len(surface.fans[cls]) + 2):
        t, v = corner
        p1 = _place(cu, cb, surface.coords(t, v + 1)) - pos
        p2 = _place(cu, cb, surface.coords(t, v + 2)) - pos
        c1 = _cross(p1, d)
        c2 = _cross(d, p2)
        if abs(c1) <= _POS_TOL * abs(p1) and (p1 * d.conjugate()).real > 0:
            return ("vertex", t, (v + 1) % 3, cu, cb)
        if abs(c2) <= _POS_TOL * abs(p2) and (p2 * d.conjugate()).real > 0:
            return ("vertex", t, (v + 2) % 3, cu, cb)
        if c1 > 0 and c2 > 0:
            return _ray_walk(surface, t, cu, cb, pos, d, max_len, diag,
                             entry_side=None)
        nxt = surface.next_corner_ccw(t, v)
        info = surface.neighbor(t, (v + 2) % 3)
        if nxt is None or info is None:
            diag.clipped += 1
            return ("clipped",)
        (t2, s2), rot, trans = info
        w = ZETA ** ((-rot) % 3)
        cu, cb = cu * w, cb - cu * w * trans
        corner = nxt
    raise NotConverged("direction not found in vertex fan")


def shoot(surface, tri, vtx, chart_dir, max_len, diag=None):
    """Shoot a ray from vertex (tri, vtx) of the surface along chart_dir.

    chart_dir is expressed in the triangle's own chart and must point into
    the closed corner wedge at the vertex.  Returns the first marked point
    within max_len as a RayHit, or None.
    """
    diag = diag if diag is not None else _Diag()
    d = chart_dir / abs(chart_dir)
    b = -complex(surface.coords(tri, vtx))
    return _trace_from_vertex(surface, tri, vtx, 1.0 + 0j, b, d, max_len, diag)


def claim_corner(surface, tri, vtx, chart_dir):
    """Normalize a direction at a vertex to the corner that claims it.

    Corner (t, v) claims directions from its ccw-first edge (inclusive) up to
    its second edge (exclusive).  Returns ((t, v), direction in that chart).
    """
    corner = (tri, vtx)
    d = chart_dir / abs(chart_dir)
    cls = surface.class_of(tri, vtx)
    for _ in range(2 * len(surface.fans[cls]) + 4):
        t, v = corner
        e1 = surface.edge_vector(t, v)
        e2 = -surface.edge_vector(t, (v + 2) % 3)
        c1 = _cross(e1, d) / abs(e1)
        c2 = _cross(d, e2) / abs(e2)
        on_e1 = abs(c1) <= _POS_TOL and (e1 * d.conjugate()).real > 0
        on_e2 = abs(c2) <= _POS_TOL and (e2 * d.conjugate()).real > 0
        if on_e1 or (c1 > 0 and c2 > 0 and not on_e2):
            return corner, d
        if c1 < 0 and not on_e2:
            nxt = surface.next_corner_cw(t, v)
            info = surface.neighbor(t, v)
            if nxt is None or info is None:
                return corner, d
            _e, rot, _tr = info
            d = d * ZETA ** rot
            corner = nxt
        else:
            nxt = surface.next_corner_ccw(t, v)
            info = surface.neighbor(t, (v + 2) % 3)
            if nxt is None or info is None:
                return corner, d
            _e, rot, _tr = info
            d = d * ZETA ** rot
            corner = nxt
    raise NotConverged("claim_corner failed to settle")


# ---------------------------------------------------------------------------
# saddle connection enumeration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _DirectedHit:
    start: int
    end: int
    period: complex
    dep_key: tuple
    arr_key: tuple


class EnumerationResult(tuple):
    """Sequence of saddle connections plus tracing diagnostics."""

    clipped = 0

    def __new__(cls, connections, clipped):
        obj = super().__new__(cls, connections)
        obj.clipped = clipped
        return obj


def _segment_min_dist(p, q):
    e = q - p
    L2 = (e * e.conjugate()).real
    if L2 == 0:
        return abs(p)
    t = max(0.0, min(1.0, -((p * e.conjugate()).real) / L2))
    return abs(p + t * e)


def _exit_side(coords, d, gate_side):
    """Which non-gate edge the ray 0 -> inf*d leaves the triangle through."""
    for side in range(3):
        if side == gate_side:
            continue
        p, q = coords[side], coords[(side + 1) % 3]
        e = q - p
        denom = _cross(d, e)
        if abs(denom) < 1e-16:
            continue
        w = p
        t = _cross(w, e) / denom
        sig = _cross(w, d) / denom
        if t > 0 and -1e-9 <= sig <= 1 + 1e-9:
            return side
    return None


def _wedge_search(surface, seed_tri, seed_v, max_len, diag, record):
    """Develop the view from corner (seed_tri, seed_v), recording every
    marked vertex visible strictly inside the corner wedge within max_len."""
    b0 = -complex(surface.coords(seed_tri, seed_v))
    lo = surface.edge_vector(seed_tri, seed_v)
    hi = -surface.edge_vector(seed_tri, (seed_v + 2) % 3)
    lo, hi = lo / abs(lo), hi / abs(hi)
    gate = (seed_v + 1) % 3
    coords0 = [_place(1.0, b0, surface.coords(seed_tri, i)) for i in range(3)]
    if _segment_min_dist(coords0[gate], coords0[(gate + 1) % 3]) > max_len:
        return
    step = _compose_across(surface, 1.0 + 0j, b0, seed_tri, gate)
    if step is None:
        diag.clipped += 1
        return
    t2, s2, u2, b2 = step
    stack = [(t2, s2, u2, b2, lo, hi)]
    guard = 0
    while stack:
        guard += 1
        if guard > 500000:
            raise NotConverged("saddle connection search exploded")
        tri, gate_side, u, b, wlo, whi = stack.pop()
        apex = (gate_side + 2) % 3
        coords = [_place(u, b, surface.coords(tri, i)) for i in range(3)]
        pa = coords[apex]
        if pa == 0:
            continue
        da = pa / abs(pa)
        c_lo = _cross(wlo, da)
        c_hi = _cross(da, whi)
        if c_lo > 1e-12 and c_hi > 1e-12:
            cls = surface.class_of(tri, apex)
            dist = abs(pa)
            if dist <= max_len + _POS_TOL:
                if surface.is_marked(cls):
                    record(cls, pa, tri, apex, u)
                elif surface.fan_closed[cls] and \
                        abs(surface.cone_angles[cls] - TWO_PI) <= _ANGLE_TOL:
                    hit = _trace_from_vertex(surface, tri, apex, u, b, da,
                                             max_len, diag)
                    if hit is not None:
                        record(hit.cls, hit.point, hit.tri, hit.vertex, hit.u)
            children = [(wlo, da), (da, whi)]
        elif c_lo <= 1e-12:
            children = [(wlo, whi)]
        else:
            children = [(wlo, whi)]
        for clo, chi in children:
            if _cross(clo, chi) <= 1e-12:
                continue
            dmid = clo + chi
            dmid = dmid / abs(dmid)
            side = _exit_side(coords, dmid, gate_side)
            if side is None:
                continue
            if _segment_min_dist(coords[side], coords[(side + 1) % 3]) > max_len:
                continue
            step = _compose_across(surface, u, b, tri, side)
            if step is None:
                diag.clipped += 1
                continue
            nt, ns, nu, nb = step
            stack.append((nt, ns, nu, nb, clo, chi))


def _trace_from_vertex(surface, tri, vtx, u, b, d, max_len, diag):
    """Continue a ray standing on a (passable) vertex to the first marked
    point within range."""
    state = _ray_from_vertex(surface, tri, vtx, u, b, d, max_len, diag)
    while True:
        if state[0] in ("clipped", "out"):
            return None
        if state[0] == "hit":
            return state[1]
        _, t, v, cu, cb = state
        cls = surface.class_of(t, v)
        pos = _place(cu, cb, surface.coords(t, v))
        dist = (pos * d.conjugate()).real
        if dist > max_len + _POS_TOL:
            return None
        if surface.is_marked(cls):
            return RayHit(cls, dist, pos, t, v, cu)
        if not surface.fan_closed[cls] or \
                abs(surface.cone_angles[cls] - TWO_PI) > _ANGLE_TOL:
            diag.clipped += 1
            return None
        state = _ray_from_vertex(surface, t, v, cu, cb, d, max_len, diag)


def _corner_key(surface, tri, vtx, chart_dir):
    (t, v), d = claim_corner(surface, tri, vtx, chart_dir)
    return (t, v, round(cmath.phase(d) % TWO_PI, 7))


def enumerate_saddle_connections(surface: CubicSurface,
                                 max_length: float) -> EnumerationResult:
    """All straight segments between marked points of length <= max_length.

    Each geometric segment is reported once, oriented from the smaller vertex
    class, with the period of its chart development.  Deterministic order:
    (length, angle, start class).  Segments clipped by a surface boundary are
    dropped and counted in the ``clipped`` diagnostic.
    """
    if max_length <= 0:
        raise ValueError("max_length must be positive")
    diag = _Diag()
    hits = []

    def make_recorder(start_cls, dep_tri, dep_v):
        def record(end_cls, period, tri, vtx, u):
            if abs(period) <= _POS_TOL or abs(period) > max_length + _POS_TOL:
                return
            d = period / abs(period)
            dep_key = (dep_tri, dep_v, round(cmath.phase(d) % TWO_PI, 7))
            rev = (-d) * u.conjugate()
            arr_key = _corner_key(surface, tri, vtx, rev)
            hits.append(_DirectedHit(start_cls, end_cls, period, dep_key, arr_key))
        return record

    for cls in surface.marked_classes():
        fan = surface.fans[cls]
        for idx, (t, v) in enumerate(fan):
            record = make_recorder(cls, t, v)
            vec = surface.edge_vector(t, v)
            _follow_edge(surface, t, (v + 1) % 3, vec, max_length, diag, record)
            if not surface.fan_closed[cls] and idx == len(fan) - 1:
                vec2 = -surface.edge_vector(t, (v + 2) % 3)
                _follow_edge(surface, t, (v + 2) % 3, vec2, max_length, diag, record)
            _wedge_search(surface, t, v, max_length, diag, record)

    conns = _dedup_hits(hits)
    return EnumerationResult(conns, diag.clipped)


def _follow_edge(surface, t, other_v, vec, max_length, diag, record):
    """Record the segment running along a triangle edge toward vertex
    other_v (continuing straight past unmarked flat endpoints)."""
    if abs(vec) > max_length + _POS_TOL:
        return
    src_v = None
    for v in range(3):
        if v != other_v:
            d = surface.coords(t, other_v) - surface.coords(t, v)
            if abs(d - vec) <= 1e-12 * max(1.0, abs(vec)):
                src_v = v
                break
    if src_v is None:
        raise ValueError("edge vector does not match triangle")
    b = -complex(surface.coords(t, src_v))
    d = vec / abs(vec)
    hit = _edge_then_trace(surface, t, other_v, 1.0 + 0j, b, d, max_length, diag)
    if hit is not None:
        record(hit.cls, hit.point, hit.tri, hit.vertex, hit.u)


def _edge_then_trace(surface, tri, vtx, u, b, d, max_len, diag):
    """The ray's first stretch runs along an edge to vertex (tri, vtx)."""
    cls = surface.class_of(tri, vtx)
    pos = _place(u, b, surface.coords(tri, vtx))
    dist = (pos * d.conjugate()).real
    if dist > max_len + _POS_TOL:
        return None
    if surface.is_marked(cls):
        return RayHit(cls, dist, pos, tri, vtx, u)
    if not surface.fan_closed[cls] or \
            abs(surface.cone_angles[cls] - TWO_PI) > _ANGLE_TOL:
        diag.clipped += 1
        return None
    return _trace_from_vertex(surface, tri, vtx, u, b, d, max_len, diag)


def _dedup_hits(hits):
    out = []
    self_loops = {}
    for h in hits:
        if h.start < h.end:
            out.append(h)
        elif h.start == h.end:
            self_loops.setdefault(h.start, []).append(h)
    for cls, group in self_loops.items():
        group.sort(key=lambda h: (round(abs(h.period), 7), h.dep_key, h.arr_key))
        for h in group:
            if h.dep_key < h.arr_key:
                out.append(h)
        tied = [h for h in group if h.dep_key == h.arr_key]
        out.extend(tied[: len(tied) // 2])
    conns = [SaddleConnection(h.start, h.end, h.period) for h in out]
    conns.sort(key=lambda c: (round(c.length, 9), round(c.angle, 9), c.start))
    return conns


# ---------------------------------------------------------------------------
# geodesic tightening
# ---------------------------------------------------------------------------

class _Leg:
    """One straight leg of the evolving path: departure corner + chart
    direction, with resolved arrival data."""

    __slots__ = ("cls", "tri", "vtx", "vec", "arr_tri", "arr_vtx", "arr_u",
                 "end_cls")

    def __init__(self, cls, tri, vtx, vec):
        self.cls = cls
        self.tri = tri
        self.vtx = vtx
        self.vec = vec
        self.arr_tri = None
        self.arr_vtx = None
        self.arr_u = None
        self.end_cls = None

    @property
    def length(self):
        return abs(self.vec)


def _resolve_leg(surface, leg, diag):
    (t0, v0), d0 = claim_corner(surface, leg.tri, leg.vtx, leg.vec)
    leg.tri, leg.vtx = t0, v0
    leg.vec = d0 * abs(leg.vec)
    hit = shoot(surface, t0, v0, d0, abs(leg.vec) + _POS_TOL, diag)
    if hit is None or abs(hit.distance - leg.length) > 1e-6 * max(1.0, leg.length):
        raise ValueError("path leg does not develop to its stated endpoint")
    leg.arr_tri, leg.arr_vtx, leg.arr_u = hit.tri, hit.vertex, hit.u
    leg.end_cls = hit.cls
    return hit


def _junction_angles(surface, prev, nxt):
    """(ccw, cw, a_in, a_out) at the vertex joining legs prev -> nxt.

    At boundary vertices (open fans) only the side through the surface has a
    finite angle; the other side reports +inf.
    """
    d_prev = prev.vec / abs(prev.vec)
    back = (-d_prev) * prev.arr_u.conjugate()
    a_in = _fan_angle_of(surface, prev.arr_tri, prev.arr_vtx, back)
    a_out = _fan_angle_of(surface, nxt.tri, nxt.vtx, nxt.vec)
    cls = nxt.cls
    if surface.fan_closed[cls]:
        cone = surface.cone_angles[cls]
        ccw = (a_out - a_in) % cone
        return ccw, cone - ccw, a_in, a_out
    delta = a_out - a_in
    if delta >= 0:
        return delta, math.inf, a_in, a_out
    return math.inf, -delta, a_in, a_out


def _fan_angle_of(surface, tri, vtx, chart_dir):
    (t, v), d = claim_corner(surface, tri, vtx, chart_dir)
    return surface.fan_angle(t, v, d)


def _strip_backtracks(surface, edge_path, closed):
    path = list(edge_path)

    def is_reverse(e1, e2):
        nb = surface.neighbor(*e1)
        return nb is not None and nb[0] == tuple(e2)

    changed = True
    while changed and path:
        changed = False
        i = 0
        while i < len(path) - 1:
            if is_reverse(path[i], path[i + 1]):
                del path[i:i + 2]
                changed = True
                i = max(i - 1, 0)
            else:
                i += 1
        if closed and len(path) >= 2 and is_reverse(path[-1], path[0]):
            del path[-1]
            del path[0]
            changed = True
    if not path:
        raise DegeneratePath("path cancels to a point")
    return path


def tighten_path(surface, edge_path, closed=False, max_iters=500):
    """Straighten a simplicial path (or cycle) of triangulation edges into a
    geodesic path of saddle connections with >= pi side angles at each zero.

    Corner shortcutting: each too-sharp corner is replaced by the straight
    segment between its neighbors, snagging on any marked point in the way;
    the total length strictly decreases, so iteration reaches the geodesic
    representative.  Idempotent on already-geodesic input.
    """
    edges = _strip_backtracks(surface, list(edge_path), closed)
    diag = _Diag()
    legs = []
    prev_end = None
    for (t, s) in edges:
        start_cls = surface.class_of(t, s)
        if prev_end is not None and start_cls != prev_end:
            raise ValueError("edge path is not connected")
        if not surface.is_marked(start_cls):
            raise ValueError("tighten_path expects edges between marked points")
        leg = _Leg(start_cls, t, s, surface.edge_vector(t, s))
        _resolve_leg(surface, leg, diag)
        legs.append(leg)
        prev_end = leg.end_cls
    if closed and legs[0].cls != prev_end:
        raise ValueError("cycle does not close up")

    for _ in range(max_iters):
        idx = _worst_corner(surface, legs, closed)
        if idx is None:
            return _legs_to_path(surface, legs, closed)
        if closed and len(legs) == 1:
            raise DegeneratePath("cycle straightens to a point")
        _shortcut(surface, legs, idx, diag)
        if not legs:
            raise DegeneratePath("path straightens to a point")
    raise NotConverged("tighten_path exceeded its iteration budget")


def _worst_corner(surface, legs, closed):
    n = len(legs)
    worst = None
    worst_gap = _ANGLE_TOL
    rng = range(n) if closed else range(1, n)
    for i in rng:
        ccw, cw, _, _ = _junction_angles(surface, legs[i - 1], legs[i])
        gap = math.pi - min(ccw, cw)
        if gap > worst_gap:
            worst_gap = gap
            worst = i
    return worst


def _shortcut(surface, legs, idx, diag):
    prev = legs[idx - 1]
    nxt = legs[idx]
    ccw, cw, _, _ = _junction_angles(surface, prev, nxt)
    d_prev = prev.vec / abs(prev.vec)
    if ccw <= cw:
        d_next_dev = -d_prev * cmath.exp(1j * ccw)
    else:
        d_next_dev = -d_prev * cmath.exp(-1j * cw)
    corner_pos = prev.vec
    target = corner_pos + nxt.length * d_next_dev
    if abs(target) <= _POS_TOL:
        # the two legs cancel exactly
        del legs[idx]
        del legs[idx - 1]
        return
    direction = target / abs(target)
    (t0, v0), d0 = claim_corner(surface, prev.tri, prev.vtx, direction)
    hit = shoot(surface, t0, v0, d0, abs(target) + _POS_TOL, diag)
    if hit is None:
        raise NotConverged("shortcut left the surface or found no marked point")
    new = _Leg(prev.cls, t0, v0, d0 * hit.distance)
    new.arr_tri, new.arr_vtx, new.arr_u = hit.tri, hit.vertex, hit.u
    new.end_cls = hit.cls
    if abs(hit.distance - abs(target)) <= 1e-9 * max(1.0, abs(target)):
        legs[idx - 1] = new
        del legs[idx]
    else:
        rest = target - hit.point
        rest_chart = rest * hit.u.conjugate()
        second = _Leg(hit.cls, hit.tri, hit.vertex, rest_chart)
        _resolve_leg(surface, second, diag)
        legs[idx - 1] = new
        legs[idx] = second


def _legs_to_path(surface, legs, closed):
    segs = tuple(SaddleConnection(leg.cls, leg.end_cls, leg.vec) for leg in legs)
    juncs = []
    n = len(legs)
    rng = range(n) if closed else range(1, n)
    for i in rng:
        prev, nxt = legs[i - 1], legs[i]
        ccw, cw, _, _ = _junction_angles(surface, prev, nxt)
        # anchor the lift to an honest chart angle of the incoming ray: fan
        # offsets are arbitrary rotations, not chart-compatible
        d_prev = prev.vec / abs(prev.vec)
        back = (-d_prev) * prev.arr_u.conjugate()
        theta_in = cmath.phase(back)
        k = surface.vertex_orders.get(nxt.cls, 0)
        juncs.append(Junction(order=k, theta_in=theta_in,
                              theta_out=theta_in + ccw, zero=nxt.cls))
    return GeodesicPath(segs, tuple(juncs), closed)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def surface_to_dict(surface: CubicSurface) -> dict:
    return {
        "triangles": [[[z.real, z.imag] for z in tri] for tri in surface.triangles],
        "gluings": [
            {"edgeA": list(g.edge_a), "edgeB": list(g.edge_b),
             "rot": g.rot, "trans": [g.trans.real, g.trans.imag]}
            for g in surface.gluings
        ],
        "vertexOrders": {str(c): k for c, k in sorted(surface.vertex_orders.items())},
        "boundary": sorted([list(e) for e in surface.boundary]),
    }


def surface_from_dict(data: dict) -> CubicSurface:
    tris = [[complex(x, y) for x, y in tri] for tri in data["triangles"]]
    gluings = [
        Gluing(tuple(g["edgeA"]), tuple(g["edgeB"]), int(g["rot"]) % 3,
               complex(g["trans"][0], g["trans"][1]))
        for g in data["gluings"]
    ]
    orders = {int(c): int(k) for c, k in data.get("vertexOrders", {}).items()}
    boundary = {tuple(e) for e in data.get("boundary", [])}
    return CubicSurface(tris, gluings, vertex_orders=orders, boundary=boundary)


def save_surface(surface: CubicSurface, path: str):
    with open(path, "w") as fh:
        json.dump(surface_to_dict(surface), fh, indent=1, sort_keys=True)


def load_surface(path: str) -> CubicSurface:
    with open(path) as fh:
        return surface_from_dict(json.load(fh))


def path_to_dict(path: GeodesicPath) -> dict:
    return {
        "closed": path.closed,
        "segments": [
            {"start": s.start, "end": s.end,
             "period": [s.period.real, s.period.imag]}
            for s in path.segments
        ],
        "junctions": [
            {"order": j.order, "thetaIn": j.theta_in, "thetaOut": j.theta_out,
             "zero": j.zero}
            for j in path.junctions
        ],
    }


def path_from_dict(data: dict) -> GeodesicPath:
    segs = tuple(
        SaddleConnection(int(s["start"]), int(s["end"]),
                         complex(s["period"][0], s["period"][1]))
        for s in data["segments"]
    )
    juncs = tuple(
        Junction(order=int(j["order"]), theta_in=float(j["thetaIn"]),
                 theta_out=float(j["thetaOut"]), zero=int(j.get("zero", -1)))
        for j in data.get("junctions", [])
    )
    closed = bool(data.get("closed", False))
    return GeodesicPath(segs, juncs, closed)


def save_path(path: GeodesicPath, filename: str):
    with open(filename, "w") as fh:
        json.dump(path_to_dict(path), fh, indent=1, sort_keys=True)


def load_path(filename: str) -> GeodesicPath:
    with open(filename) as fh:
        return path_from_dict(json.load(fh))
