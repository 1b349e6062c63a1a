"""Flat 1/3-translation structures of projectively deformable triangle
orbifolds, their tropical length spectra, and the boundary-circle probe.

The canonical differential makes the orbifold a union of unit equilateral
triangles with the outgoing edges at each vertex along the directions where
the differential is real and positive.  The orbifold is represented by a
finite developed patch: triangles are attached across free edges and vertex
fans are zipped shut when they reach their full valence 2p, giving honest
interior cone points of order p - 3 surrounded by enough collar for saddle
connection enumeration.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import tropical
from .errors import DegeneratePath, NonDeformable
from .surface import (CubicSurface, GeodesicPath, Gluing, Junction,
                      SaddleConnection, ZETA, enumerate_saddle_connections,
                      shoot, claim_corner, validate)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class TriangleOrbifoldSurface:
    p: int
    q: int
    r: int
    surface: CubicSurface
    orbifold_type: tuple       # vertex class -> 0/1/2 (the p/q/r corner)
    euclidean: bool

    @property
    def orders(self):
        return (self.p, self.q, self.r)

    def interior_classes_of_type(self, t: int):
        return [c for c in range(self.surface.n_classes())
                if self.orbifold_type[c] == t and self.surface.fan_closed[c]]


def _zip_fans(tris, coords, edge_map, corner_type, valence, max_zips=100000):
    """Close every vertex fan that has reached its full valence.

    Walks fans through the accumulated gluings; when a fan holds 2*ord
    corners with both boundary edges free, glues them with the rigid motion
    matching the edge endpoints (a zeta-power rotation).
    """

    def neighbor(t, s):
        return edge_map.get((t, s))

    def fan_walk(t, v):
        # clockwise to the boundary
        cur = (t, v)
        seen = {cur}
        while True:
            info = neighbor(cur[0], cur[1])
            if info is None:
                break
            nxt = (info[0][0], (info[0][1] + 1) % 3)
            if nxt in seen:
                return None  # already closed
            seen.add(nxt)
            cur = nxt
        first = cur
        fan = [first]
        while True:
            t2, v2 = fan[-1]
            info = neighbor(t2, (v2 + 2) % 3)
            if info is None:
                break
            nxt = info[0]
            if nxt == first:
                return None
            fan.append(nxt)
        return fan

    changed = True
    guard = 0
    while changed:
        changed = False
        guard += 1
        if guard > max_zips:
            raise RuntimeError("fan zipping did not stabilize")
        corners = [(t, v) for t in range(len(tris)) for v in range(3)]
        for (t, v) in corners:
            fan = fan_walk(t, v)
            if fan is None:
                continue
            ord_ = valence[corner_type[(t, v)]]
            if len(fan) < 2 * ord_:
                continue
            if len(fan) > 2 * ord_:
                raise RuntimeError("fan exceeded its valence")
            # boundary edges: cw edge of the first corner, ccw edge of last
            tf, vf = fan[0]
            tl, vl = fan[-1]
            e_a = (tl, (vl + 2) % 3)       # from vl+2 to vl (head at vertex)
            e_b = (tf, vf)                 # from vf to vf+1 (tail at vertex)
            if e_a in edge_map or e_b in edge_map:
                raise RuntimeError("fan boundary edge already glued")
            a1 = coords[e_a[0]][e_a[1]]
            a2 = coords[e_a[0]][(e_a[1] + 1) % 3]
            b1 = coords[e_b[0]][e_b[1]]
            b2 = coords[e_b[0]][(e_b[1] + 1) % 3]
            rot = (b2 - b1) / (a1 - a2)
            m = round((cmath.phase(rot) % TWO_PI) / (TWO_PI / 3))
            if abs(rot - ZETA ** (m % 3)) > 1e-9:
                raise RuntimeError("zip rotation is not a cube root of unity")
            trans = b2 - ZETA ** (m % 3) * a1
            _add_gluing(edge_map, e_a, e_b, m % 3, trans)
            changed = True
    return edge_map


def _add_gluing(edge_map, e_a, e_b, rot, trans):
    edge_map[e_a] = (e_b, rot, trans)
    minus = (-rot) % 3
    edge_map[e_b] = (e_a, minus, -(ZETA ** minus) * trans)


def build_orbifold(p: int, q: int, r: int, layers: int = 4) -> TriangleOrbifoldSurface:
    """Developed patch of the (p, q, r) orbifold's canonical flat structure.

    Every vertex within ``layers`` triangle generations of the seed acquires
    its full fan (valence 2p/2q/2r); remaining edges stay as boundary.
    """
    for v in (p, q, r):
        if v < 2:
            raise ValueError("triangle group orders must be >= 2")
        if v == 2:
            raise NonDeformable(
                "a (p,q,r) group with an order-2 vertex carries no nonzero "
                "cubic differential")
    euclidean = (p, q, r) == (3, 3, 3)
    valence = (p, q, r)

    tris = []       # vertex instance roots are implicit via gluings
    coords = []
    corner_type = {}
    generation = []
    edge_map = {}

    def add_triangle(vertex_types, pts, gen):
        t = len(tris)
        tris.append(t)
        coords.append(tuple(pts))
        for v in range(3):
            corner_type[(t, v)] = vertex_types[v]
        generation.append(gen)
        return t

    add_triangle((0, 1, 2), (0.0, 1.0, cmath.exp(1j * math.pi / 3)), 0)

    frontier = [(0, s) for s in range(3)]
    while frontier:
        new_frontier = []
        for (t, s) in frontier:
            if (t, s) in edge_map:
                continue
            if generation[t] >= layers:
                continue
            a = coords[t][s]
            b = coords[t][(s + 1) % 3]
            apex = a + b - coords[t][(s + 2) % 3]
            ta = corner_type[(t, s)]
            tb = corner_type[(t, (s + 1) % 3)]
            tc = 3 - ta - tb
            t2 = add_triangle((tb, ta, tc), (b, a, apex), generation[t] + 1)
            _add_gluing(edge_map, (t, s), (t2, 0), 0, 0.0)
            _zip_fans(tris, coords, edge_map, corner_type, valence)
            new_frontier.extend((t2, s2) for s2 in (1, 2)
                                if (t2, s2) not in edge_map)
        frontier = [e for e in new_frontier if e not in edge_map]

    gluings = []
    done = set()
    for e_a, (e_b, rot, trans) in edge_map.items():
        if e_a in done or e_b in done:
            continue
        done.add(e_a)
        done.add(e_b)
        gluings.append(Gluing(e_a, e_b, rot, trans))
    boundary = {(t, s) for t in range(len(tris)) for s in range(3)
                if (t, s) not in edge_map}
    base = CubicSurface([coords[t] for t in range(len(tris))], gluings,
                        vertex_orders={}, boundary=boundary)
    orders = {}
    types = [None] * base.n_classes()
    for cls in range(base.n_classes()):
        t, v = base.vertex_classes[cls][0]
        types[cls] = corner_type[(t, v)]
        if base.fan_closed[cls]:
            orders[cls] = valence[types[cls]] - 3
    surface = CubicSurface([coords[t] for t in range(len(tris))], gluings,
                           vertex_orders=orders, boundary=boundary)
    return TriangleOrbifoldSurface(p=p, q=q, r=r, surface=surface,
                                   orbifold_type=tuple(types),
                                   euclidean=euclidean)


def canonical_marking(orb: TriangleOrbifoldSurface) -> dict:
    """Per interior vertex class, the chart directions of its outgoing edges
    on which the differential is real and positive (0 mod 2*pi/3)."""
    out = {}
    surf = orb.surface
    for cls in surf.marked_classes():
        dirs = []
        for (t, v) in surf.fans[cls]:
            vec = surf.edge_vector(t, v)
            ang = cmath.phase(vec) % TWO_PI
            if (ang % (TWO_PI / 3)) < 1e-9 or \
                    (TWO_PI / 3 - ang % (TWO_PI / 3)) < 1e-9:
                dirs.append(ang)
        out[cls] = sorted(set(round(d, 9) for d in dirs))
    return out


# ---------------------------------------------------------------------------
# rotation of the differential
# ---------------------------------------------------------------------------

def rotate_differential(orb: TriangleOrbifoldSurface, theta: float) -> TriangleOrbifoldSurface:
    """Replace q0 by e^(i theta) q0: all chart coordinates (hence all periods)
    rotate by e^(i theta/3); the flat metric is unchanged.

    theta is reduced modulo 2*pi first, so a full rotation is the identity
    bit for bit.
    """
    theta = float(theta) % TWO_PI
    if theta == 0.0:
        return orb
    w = cmath.exp(1j * theta / 3.0)
    surf = orb.surface
    tris = [tuple(w * z for z in tri) for tri in surf.triangles]
    gluings = [Gluing(g.edge_a, g.edge_b, g.rot, w * g.trans)
               for g in surf.gluings]
    rotated = CubicSurface(tris, gluings, vertex_orders=surf.vertex_orders,
                           boundary=surf.boundary)
    return TriangleOrbifoldSurface(p=orb.p, q=orb.q, r=orb.r, surface=rotated,
                                   orbifold_type=orb.orbifold_type,
                                   euclidean=orb.euclidean)


# ---------------------------------------------------------------------------
# closed geodesics on the orbifold
# ---------------------------------------------------------------------------

def trace_cycle(orb: TriangleOrbifoldSurface, start_class: int,
                start_direction: complex, turns, max_len: float = 10.0) -> GeodesicPath:
    """Follow a closed orbifold geodesic on the patch.

    Starting at an interior vertex instance along a chart direction, each leg
    runs to the first marked point; ``turns[i]`` is the ccw side angle taken
    there.  The walk must return to a vertex of the starting orbifold type
    with a turn matching the starting direction modulo the chart symmetry;
    segments carry the orbifold type ids, so the resulting path is closed at
    the orbifold level.
    """
    surf = orb.surface
    t0, v0 = surf.fans[start_class][0]
    (t, v), d = claim_corner(surf, t0, v0, start_direction)
    legs = []
    fan_in = []
    fan_out = []
    cls = start_class
    for turn in turns:
        hit = shoot(surf, t, v, d, max_len)
        if hit is None:
            raise DegeneratePath("cycle leg left the patch; increase layers")
        legs.append((cls, hit))
        arr_dir = d * hit.u.conjugate()  # travel direction in arrival chart
        (t2, v2), back = claim_corner(surf, hit.tri, hit.vertex, -arr_dir)
        a_in = surf.fan_angle(t2, v2, back)
        cone = surf.cone_angles[hit.cls]
        a_out = (a_in + turn) % cone
        # locate the outgoing corner at the fan angle a_out
        t, v, d = _corner_at_fan_angle(surf, hit.cls, a_out)
        cls = hit.cls
        fan_in.append(a_in)
        fan_out.append(a_in + turn)
    # closure on orbifold labels
    first_cls = start_class
    if orb.orbifold_type[legs[-1][1].cls] != orb.orbifold_type[first_cls]:
        raise DegeneratePath("cycle does not close on the orbifold labels")
    segments = []
    for i, (c, hit) in enumerate(legs):
        period = hit.point
        segments.append(SaddleConnection(orb.orbifold_type[c],
                                         orb.orbifold_type[hit.cls], period))
    junctions = []
    n = len(legs)
    for i in range(n):
        hit_cls = legs[i][1].cls
        k = surf.vertex_orders[hit_cls]
        # junction i+1 joins segment i to segment i+1; wrap goes to slot 0
        theta_in = cmath.phase(segments[i].period) + math.pi
        theta_out = theta_in + turns[i]
        junctions.append(Junction(order=k, theta_in=theta_in,
                                  theta_out=theta_out, zero=orb.orbifold_type[hit_cls]))
    wrap = junctions[-1:]
    juncs = tuple(wrap + junctions[:-1])
    return GeodesicPath(tuple(segments), juncs, closed=True)


def _corner_at_fan_angle(surface, cls, fan_angle):
    """Corner of the fan containing the given angular coordinate, plus the
    chart direction at that angle."""
    fan = surface.fans[cls]
    total = surface.cone_angles[cls]
    fan_angle = fan_angle % total
    for (t, v) in fan:
        lo = surface._fan_offset[(t, v)]
        span = surface.corner_angle(t, v)
        if lo - 1e-12 <= fan_angle <= lo + span + 1e-12:
            base = surface.edge_vector(t, v)
            d = base / abs(base) * cmath.exp(1j * (fan_angle - lo))
            (t2, v2), d2 = claim_corner(surface, t, v, d)
            return t2, v2, d2
    raise ValueError("fan angle outside the fan")


def straight_positive_cycle(orb: TriangleOrbifoldSurface) -> GeodesicPath:
    """The closed geodesic chaining unit edges along the positive directions
    of the canonical differential, passing each flat vertex straight and
    turning pi (against cone angle - pi) at the order >= 1 vertex.

    Seeds at a central vertex and tries its positive outgoing edges until the
    whole walk stays on interior vertices of the patch.
    """
    surf = orb.surface
    # corners of the seed triangle are the most interior points of the patch
    candidates = sorted({surf.class_of(0, v) for v in range(3)},
                        key=lambda c: -surf.vertex_orders.get(c, -1))
    last_err = None
    for start in candidates:
        if not surf.fan_closed[start]:
            continue
        for (t, v) in surf.fans[start]:
            vec = surf.edge_vector(t, v)
            ang = cmath.phase(vec) % (TWO_PI / 3)
            if min(ang, TWO_PI / 3 - ang) > 1e-9:
                continue  # not a positive direction
            try:
                return trace_cycle(orb, start, vec,
                                   [math.pi, math.pi, math.pi])
            except DegeneratePath as err:
                last_err = err
    raise last_err or DegeneratePath("no positive cycle found; increase layers")


def straight_median_cycle(orb: TriangleOrbifoldSurface, legs: int = 2) -> GeodesicPath:
    """A closed geodesic running along triangle medians (length sqrt(3)
    segments at pi/6 to the positive edge directions), passing every vertex
    it meets straight."""
    surf = orb.surface
    candidates = sorted({surf.class_of(0, v) for v in range(3)},
                        key=lambda c: surf.vertex_orders.get(c, 9))
    last_err = None
    for start in candidates:
        if not surf.fan_closed[start]:
            continue
        for (t, v) in surf.fans[start]:
            base = surf.edge_vector(t, v)
            d = base / abs(base) * cmath.exp(1j * math.pi / 6)
            try:
                return trace_cycle(orb, start, d, [math.pi] * legs)
            except (DegeneratePath, ValueError) as err:
                last_err = err
    raise last_err or DegeneratePath("no median cycle found; increase layers")


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumVector:
    curve_count: int
    values: tuple          # WeylVector per class
    projectivized: np.ndarray

    def stacked(self):
        return np.array([w.as_tuple() for w in self.values]).ravel()


def spectrum(orb_or_surface, curve_classes) -> SpectrumVector:
    """Tropical length spectrum of a finite family of closed geodesics."""
    values = []
    for path in curve_classes:
        if not getattr(path, "closed", False):
            raise ValueError("spectrum expects closed geodesic paths")
        values.append(tropical.path_singular_exponents(path))
    if values:
        stacked = np.array([w.as_tuple() for w in values]).ravel()
        norm = np.linalg.norm(stacked)
        proj = stacked / norm if norm > 0 else stacked
    else:
        proj = np.zeros(0)
    return SpectrumVector(curve_count=len(values), values=tuple(values),
                          projectivized=proj)


def _rotated_paths(curve_classes, theta):
    w = cmath.exp(1j * (theta % TWO_PI) / 3.0)
    out = []
    for path in curve_classes:
        segs = tuple(SaddleConnection(s.start, s.end, w * s.period)
                     for s in path.segments)
        out.append(GeodesicPath(segs, path.junctions, path.closed))
    return out


def distinct_direction_count(curve_classes) -> int:
    """Number of distinct segment chart angles modulo 2*pi/3 in a family."""
    dirs = set()
    for path in curve_classes:
        for s in path.segments:
            dirs.add(round((cmath.phase(s.period) % (TWO_PI / 3)), 6))
    return len(dirs)


@dataclass(frozen=True)
class BoundaryProbe:
    min_pairwise: float
    insufficient_family: bool
    theta_count: int


def boundary_injectivity_probe(orb, curve_classes, theta_grid) -> BoundaryProbe:
    """Minimum pairwise distance of projectivized spectra over a theta grid.

    Positive for families containing segments at two or more distinct chart
    angles; a single angular class may degenerate at symmetric theta pairs
    and is flagged as an insufficient family.
    """
    thetas = list(theta_grid)
    insufficient = distinct_direction_count(curve_classes) < 2
    if len(thetas) < 2:
        return BoundaryProbe(min_pairwise=math.inf,
                             insufficient_family=insufficient,
                             theta_count=len(thetas))
    spectra = []
    for th in thetas:
        spectra.append(spectrum(orb, _rotated_paths(curve_classes, th))
                       .projectivized)
    best = math.inf
    for i in range(len(thetas)):
        for j in range(i + 1, len(thetas)):
            best = min(best, float(np.linalg.norm(spectra[i] - spectra[j])))
    return BoundaryProbe(min_pairwise=best, insufficient_family=insufficient,
                         theta_count=len(thetas))


def lifted_order_bookkeeping(orb: TriangleOrbifoldSurface) -> bool:
    """Gauss-Bonnet check: each orbifold point contributes quotient order -2
    (poles of order at most 2 on the underlying sphere, total -6)."""
    total = 0.0
    for t, ord_ in zip(range(3), orb.orders):
        classes = orb.interior_classes_of_type(t)
        if not classes:
            return False
        angle = orb.surface.cone_angles[classes[0]]
        # lifted cone angle must be 2 pi ord/3; quotient order is then -2
        if abs(angle - TWO_PI * ord_ / 3.0) > 1e-9:
            return False
        total += 3.0 * (angle / (TWO_PI * ord_) - 1.0)
    return abs(total - (-6.0)) < 1e-9
