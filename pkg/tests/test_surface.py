import cmath
import math

import numpy as np
import pytest

from hitchin_limits import surface as sf
from hitchin_limits.errors import DegeneratePath

TWO_PI = 2 * math.pi


# -- construction and validation --------------------------------------------

@pytest.mark.parametrize("k,radius,angle", [
    (0, 1.0, TWO_PI),
    (1, 1.0, 8 * math.pi / 3),
    (3, 2.0, 4 * math.pi),
])
def test_disk_cone_angle(k, radius, angle):
    disk = sf.build_polynomial_disk(k, radius)
    assert sf.validate(disk) == []
    assert disk.cone_angles[0] == pytest.approx(angle, abs=1e-9)
    assert disk.vertex_orders == {0: k}


def test_disk_rejects_negative_order():
    with pytest.raises(ValueError):
        sf.build_polynomial_disk(-1, 1.0)


def test_disk_stokes_ray_count():
    # 2(k+3) Stokes rays: natural-chart angles pi/6 + m*pi/3 within the cone
    k = 3
    disk = sf.build_polynomial_disk(k, 2.0)
    cone = disk.cone_angles[0]
    stokes = [a for m in range(200)
              if (a := math.pi / 6 + m * math.pi / 3) < cone - 1e-12]
    assert len(stokes) == 2 * (k + 3) == 12
    for a in stokes:
        assert sf.classify_direction(a).tag == "Stokes"


def test_classify_direction():
    assert sf.classify_direction(math.pi / 6).tag == "Stokes"
    assert sf.classify_direction(0.0).tag == "WeylWall"
    assert sf.classify_direction(0.2).tag == "Regular"
    assert sf.classify_direction(math.pi / 3).tag == "WeylWall"
    assert sf.classify_direction(math.pi / 6 + 5 * math.pi / 3).tag == "Stokes"


def test_classify_direction_at_zero():
    disk = sf.build_polynomial_disk(1, 1.0)
    assert sf.classify_direction_at(disk, 0, math.pi / 6).tag == "Stokes"
    with pytest.raises(ValueError):
        sf.classify_direction_at(disk, 3, 0.0)


def test_torus_valid_and_flat():
    torus = sf.build_square_torus()
    assert sf.validate(torus) == []
    assert torus.genus() == 1
    assert all(abs(a - TWO_PI) < 1e-9 for a in torus.cone_angles)


def test_l_surface_genus_two():
    surf = sf.build_l_surface()
    assert sf.validate(surf) == []
    assert surf.genus() == 2
    assert surf.cone_angles[0] == pytest.approx(6 * math.pi, abs=1e-9)
    assert sum(surf.vertex_orders.values()) == 6  # = 6g - 6


def test_degree_mismatch_detected():
    surf = sf.build_l_surface()
    bad = sf.CubicSurface(surf.triangles, surf.gluings, vertex_orders={0: 5})
    kinds = {v.kind for v in sf.validate(bad)}
    assert "DegreeMismatch" in kinds
    assert "ConeAngleMismatch" in kinds


def test_edge_length_mismatch_detected():
    tris = [(0.0, 1.0, 1j), (1.0 + 1j, 1j, 1.0)]
    gluings = [
        sf.Gluing((0, 1), (1, 1), 0, 0.0),
        sf.Gluing((0, 0), (1, 0), 0, 1j),
        sf.Gluing((0, 2), (1, 2), 0, 1.0),
    ]
    # stretch one triangle so a glued pair no longer matches
    tris[1] = (1.0 + 1.5j, 1.5j, 1.0)
    bad = sf.CubicSurface(tris, gluings, vertex_orders={})
    kinds = {v.kind for v in sf.validate(bad)}
    assert "EdgeLengthMismatch" in kinds


def test_fan_closure_rotation_forced_by_order():
    for k in (0, 1, 2, 3, 4):
        disk = sf.build_polynomial_disk(k, 1.0)
        u, c = sf.develop_fan_closure(disk, 0)
        assert abs(u - sf.ZETA ** (k % 3)) < 1e-12
        assert abs(c) < 1e-12


# -- saddle connection enumeration -------------------------------------------

def hexagon_fan_surface():
    """Closed fan of six unit equilateral triangles around one vertex, the rim
    glued into a cone: a 'hexagon pillow' is overkill; instead reuse the
    order-0 disk of natural radius 1, whose wedges are unit equilateral
    triangles, and mark the rim classes."""
    disk = sf.build_polynomial_disk(0, 1.0)
    orders = dict(disk.vertex_orders)
    for cls in range(disk.n_classes()):
        if cls not in orders:
            orders[cls] = 0
    return sf.CubicSurface(disk.triangles, disk.gluings, vertex_orders=orders,
                           boundary=disk.boundary)


def test_enumerate_on_torus_empty():
    torus = sf.build_square_torus()
    result = sf.enumerate_saddle_connections(torus, 10.0)
    assert list(result) == []
    assert result.clipped == 0


def test_enumerate_disk_center_to_rim():
    surf = hexagon_fan_surface()
    result = sf.enumerate_saddle_connections(surf, 1.01)
    # center to each of the 6 rim classes plus the 6 rim edges
    lengths = sorted(round(c.length, 9) for c in result)
    assert lengths == [1.0] * 12
    from_center = [c for c in result if c.start == 0 or c.end == 0]
    assert len(from_center) == 6


def test_enumerate_finds_rim_chords():
    surf = hexagon_fan_surface()
    result = sf.enumerate_saddle_connections(surf, math.sqrt(3.0) + 0.01)
    chords = [c for c in result if abs(c.length - math.sqrt(3.0)) < 1e-9]
    # rim vertices two apart: six such chords, each crossing two triangles
    assert len(chords) == 6
    result2 = sf.enumerate_saddle_connections(surf, 2.01)
    diameters = [c for c in result2 if abs(c.length - 2.0) < 1e-9]
    # diameters pass exactly through the marked center, so they are NOT
    # saddle connections (they decompose); none should be reported
    assert diameters == []


def test_enumerate_passes_through_unmarked_flat_vertex():
    # unmark the center of the flat disk: diameters become single segments
    disk = sf.build_polynomial_disk(0, 1.0)
    orders = {cls: 0 for cls in range(disk.n_classes()) if cls != 0}
    surf = sf.CubicSurface(disk.triangles, disk.gluings, vertex_orders=orders,
                           boundary=disk.boundary)
    result = sf.enumerate_saddle_connections(surf, 2.01)
    diameters = [c for c in result if abs(c.length - 2.0) < 1e-9]
    assert len(diameters) == 3


def test_enumerate_l_surface_core_lengths():
    surf = sf.build_l_surface()
    result = sf.enumerate_saddle_connections(surf, 1.01)
    # all its saddle connections are loops at the single zero; at length <= 1
    # these are the four unit lattice segments (two horizontal, two vertical
    # in the L), six distinct loop classes
    assert all(c.start == 0 and c.end == 0 for c in result)
    assert sorted(round(c.length, 9) for c in result) == [1.0] * 6


def test_enumerate_stable_under_barycentric_refinement():
    surf = sf.build_l_surface()
    refined = sf.barycentric_refine(surf)
    assert sf.validate(refined) == []
    a = sf.enumerate_saddle_connections(surf, 2.3)
    b = sf.enumerate_saddle_connections(refined, 2.3)
    pa = sorted((round(c.length, 8), round(c.angle % (TWO_PI / 3), 6)) for c in a)
    pb = sorted((round(c.length, 8), round(c.angle % (TWO_PI / 3), 6)) for c in b)
    assert len(pa) == len(pb)
    for (la, aa), (lb, ab) in zip(pa, pb):
        assert la == pytest.approx(lb, abs=1e-7)


def test_enumeration_deterministic_order():
    surf = hexagon_fan_surface()
    r1 = sf.enumerate_saddle_connections(surf, 2.0)
    r2 = sf.enumerate_saddle_connections(surf, 2.0)
    assert [(c.start, c.end, c.period) for c in r1] == \
        [(c.start, c.end, c.period) for c in r2]
    keys = [(round(c.length, 9), round(c.angle, 9), c.start) for c in r1]
    assert keys == sorted(keys)


# -- geodesic paths ----------------------------------------------------------

def test_synthesize_and_validate_path():
    p = sf.synthesize_path([1.0, 2.0], turns=[math.pi + 0.3], orders=[1])
    assert sf.is_geodesic(p)
    bad = sf.synthesize_path([1.0, 2.0], turns=[math.pi + 0.3], orders=[1])
    jun = sf.Junction(order=0, theta_in=0.0, theta_out=2.0)  # < pi turn
    broken = sf.GeodesicPath(bad.segments, (jun,), False)
    assert not sf.is_geodesic(broken)


def test_path_reversal_roundtrip():
    p = sf.synthesize_path([1.0, 2.0, 1.5],
                           turns=[math.pi + 0.2, math.pi + 0.5],
                           orders=[1, 2])
    r = p.reversed()
    assert sf.is_geodesic(r)
    rr = r.reversed()
    for a, b in zip(p.segments, rr.segments):
        assert a.period == pytest.approx(b.period, abs=1e-12)
    # turn angles at matching junctions swap sides
    for jp, jr in zip(p.junctions, reversed(r.junctions)):
        assert jp.turn_angles[0] == pytest.approx(jr.turn_angles[1], abs=1e-9)


def test_tighten_idempotent_on_straight_edge_pair():
    # two collinear unit edges across a flat rim vertex of the hexagon fan
    surf = hexagon_fan_surface()
    # rim edges: (t,1) is the outer edge of wedge t; pick two consecutive ones
    path = sf.tighten_path(surf, [(0, 1), (1, 1)])
    # rim turns at the shared vertex are (2pi/3, 4pi/3): not geodesic, so the
    # corner straightens into the sqrt(3) chord
    assert len(path.segments) == 1
    assert path.segments[0].length == pytest.approx(math.sqrt(3.0), abs=1e-9)


def test_tighten_keeps_geodesic_input():
    surf = hexagon_fan_surface()
    chord = sf.tighten_path(surf, [(0, 1), (1, 1)])
    # feed the result back through a straightening pass by rebuilding an
    # equivalent edge path: chord is already geodesic, so tighten of the
    # two-edge path is stable under repetition
    again = sf.tighten_path(surf, [(0, 1), (1, 1)])
    assert again.segments[0].period == pytest.approx(chord.segments[0].period,
                                                     abs=1e-12)


def test_tighten_rejects_backtrack():
    surf = hexagon_fan_surface()
    with pytest.raises(DegeneratePath):
        sf.tighten_path(surf, [(0, 2), _reverse_edge(surf, (0, 2))])


def _reverse_edge(surf, edge):
    (t2, s2), _, _ = surf.neighbor(*edge)
    return (t2, s2)


def test_tighten_snags_on_marked_point():
    # on the fully marked hexagon fan, straightening the two-edge rim path
    # from rim class u to rim class w must stop at the intermediate marked rim
    # vertex only if it blocks; the chord misses it, so we get one segment.
    surf = hexagon_fan_surface()
    path = sf.tighten_path(surf, [(0, 1), (1, 1), (2, 1)])
    # three rim edges subtend a turn whose geodesic replacement passes through
    # the opposite rim: the straightened path has total length 2 through the
    # center? the center is marked, so the geodesic snags there.
    total = sum(s.length for s in path.segments)
    assert total == pytest.approx(2.0, abs=1e-9)
    assert len(path.segments) == 2
    assert sf.validate_path(path) == []
    mid = path.segments[0].end
    assert mid == 0  # the center class


# -- file round trips --------------------------------------------------------

def test_surface_roundtrip(tmp_path):
    surf = sf.build_polynomial_disk(2, 1.5)
    fn = tmp_path / "disk.json"
    sf.save_surface(surf, str(fn))
    back = sf.load_surface(str(fn))
    assert sf.validate(back) == []
    assert back.triangles == surf.triangles
    assert back.vertex_orders == surf.vertex_orders


def test_path_roundtrip(tmp_path):
    p = sf.synthesize_path([1.0, 2.0], turns=[math.pi + 0.3], orders=[1])
    fn = tmp_path / "path.json"
    sf.save_path(p, str(fn))
    back = sf.load_path(str(fn))
    assert back.closed == p.closed
    for a, b in zip(p.segments, back.segments):
        assert a.period == b.period
    for a, b in zip(p.junctions, back.junctions):
        assert a.theta_in == b.theta_in and a.theta_out == b.theta_out
