import cmath
import math

import numpy as np
import pytest

from hitchin_limits import surface as sf
from hitchin_limits import trigroup, tropical
from hitchin_limits.errors import NonDeformable

CBRT2 = 2.0 ** (1.0 / 3.0)


@pytest.fixture(scope="module")
def orb334():
    return trigroup.build_orbifold(3, 3, 4, layers=9)


def test_334_valences_and_orders(orb334):
    surf = orb334.surface
    assert sf.validate(surf) == []
    for t, ord_ in ((0, 3), (1, 3), (2, 4)):
        classes = orb334.interior_classes_of_type(t)
        assert classes
        for cls in classes:
            assert len(surf.fans[cls]) == 2 * ord_
            assert surf.vertex_orders[cls] == ord_ - 3
    assert trigroup.lifted_order_bookkeeping(orb334)


def test_nondeformable_rejected():
    with pytest.raises(NonDeformable):
        trigroup.build_orbifold(2, 3, 7)


def test_333_euclidean_tiles_plane():
    orb = trigroup.build_orbifold(3, 3, 3, layers=6)
    assert orb.euclidean
    assert sf.validate(orb.surface) == []
    # the development genuinely tiles: distinct triangles have distinct
    # centroids in the common plane development
    cents = [sum(tri) / 3 for tri in orb.surface.triangles]
    for i in range(len(cents)):
        for j in range(i + 1, len(cents)):
            assert abs(cents[i] - cents[j]) > 0.2


def test_canonical_marking_positive_directions(orb334):
    marking = trigroup.canonical_marking(orb334)
    for cls, dirs in marking.items():
        assert dirs  # every interior vertex has positive outgoing edges
        for d in dirs:
            assert (d % (2 * math.pi / 3)) < 1e-8 or \
                (2 * math.pi / 3 - d % (2 * math.pi / 3)) < 1e-8


def test_unit_edges_enumerated(orb334):
    res = sf.enumerate_saddle_connections(orb334.surface, 1.01)
    assert len(res) > 0
    assert all(abs(c.length - 1.0) < 1e-9 for c in res)


def test_median_connections_enumerated(orb334):
    res = sf.enumerate_saddle_connections(orb334.surface, math.sqrt(3) + 0.01)
    med = [c for c in res if abs(c.length - math.sqrt(3)) < 1e-9]
    assert med
    for c in med:
        # medians run at pi/6 mod pi/3 to the edge directions
        r = (c.angle - math.pi / 6) % (math.pi / 3)
        assert min(r, math.pi / 3 - r) < 1e-9


def test_straight_positive_cycle(orb334):
    cyc = trigroup.straight_positive_cycle(orb334)
    assert cyc.closed and len(cyc.segments) == 3
    assert sf.validate_path(cyc) == []
    assert {s.start for s in cyc.segments} == {0, 1, 2}
    assert tropical.path_norm_exponent(cyc) == pytest.approx(3 / CBRT2, abs=1e-12)


def test_straight_median_cycle(orb334):
    cyc = trigroup.straight_median_cycle(orb334)
    assert cyc.closed and len(cyc.segments) == 2
    assert sf.validate_path(cyc) == []
    for s in cyc.segments:
        assert s.length == pytest.approx(math.sqrt(3), abs=1e-9)


def test_rotation_identity_bit_exact(orb334):
    rotated = trigroup.rotate_differential(orb334, 2 * math.pi)
    assert rotated is orb334
    families = [trigroup.straight_positive_cycle(orb334)]
    a = trigroup.spectrum(orb334, families)
    b = trigroup.spectrum(rotated, families)
    assert a.projectivized.tobytes() == b.projectivized.tobytes()


def test_rotation_theta_zero_noop(orb334):
    rot = trigroup.rotate_differential(orb334, 0.0)
    assert rot is orb334


def test_rotation_rotates_periods(orb334):
    th = 0.7
    rot = trigroup.rotate_differential(orb334, th)
    w = cmath.exp(1j * th / 3)
    for a, b in zip(orb334.surface.triangles[0], rot.surface.triangles[0]):
        assert b == pytest.approx(w * a, abs=1e-12)
    assert sf.validate(rot.surface) == []


def test_spectrum_values(orb334):
    cyc = trigroup.straight_positive_cycle(orb334)
    spec = trigroup.spectrum(orb334, [cyc])
    assert spec.curve_count == 1
    assert spec.values[0].x1 == pytest.approx(3 / CBRT2, abs=1e-12)
    assert np.linalg.norm(spec.projectivized) == pytest.approx(1.0, abs=1e-12)


def test_spectrum_empty_family(orb334):
    spec = trigroup.spectrum(orb334, [])
    assert spec.curve_count == 0
    assert spec.projectivized.size == 0


def test_spectrum_respects_symmetry(orb334):
    # the two order-3 vertices play symmetric roles: seeding the median cycle
    # at either gives the same spectrum values
    surf = orb334.surface
    a_cls = orb334.interior_classes_of_type(0)[0]
    b_cls = orb334.interior_classes_of_type(1)[0]
    cycles = []
    for cls in (a_cls, b_cls):
        t, v = surf.fans[cls][0]
        base = surf.edge_vector(t, v)
        d = base / abs(base) * cmath.exp(1j * math.pi / 6)
        cycles.append(trigroup.trace_cycle(orb334, cls, d, [math.pi, math.pi]))
    s0 = tropical.path_singular_exponents(cycles[0]).as_tuple()
    s1 = tropical.path_singular_exponents(cycles[1]).as_tuple()
    assert s0 == pytest.approx(s1, abs=1e-12)


def test_boundary_probe_positive(orb334):
    fam = [trigroup.straight_positive_cycle(orb334),
           trigroup.straight_median_cycle(orb334)]
    assert trigroup.distinct_direction_count(fam) >= 2
    grid = [2 * math.pi * i / 12 for i in range(12)]
    probe = trigroup.boundary_injectivity_probe(orb334, fam, grid)
    assert not probe.insufficient_family
    assert probe.min_pairwise > 1e-4


def test_boundary_probe_single_theta_vacuous(orb334):
    fam = [trigroup.straight_positive_cycle(orb334)]
    probe = trigroup.boundary_injectivity_probe(orb334, fam, [0.0])
    assert probe.min_pairwise == math.inf


def test_boundary_probe_single_class_flagged(orb334):
    fam = [trigroup.straight_positive_cycle(orb334)]
    grid = [2 * math.pi * i / 12 for i in range(12)]
    probe = trigroup.boundary_injectivity_probe(orb334, fam, grid)
    assert probe.insufficient_family


def test_other_groups_build():
    for pqr in ((3, 4, 4), (4, 4, 4), (3, 3, 5)):
        orb = trigroup.build_orbifold(*pqr, layers=5)
        assert sf.validate(orb.surface) == []
        assert trigroup.lifted_order_bookkeeping(orb)


def test_orbifold_fan_closure_rotation(orb334):
    surf = orb334.surface
    for cls in surf.marked_classes():
        k = surf.vertex_orders[cls]
        u, _ = sf.develop_fan_closure(surf, cls)
        assert abs(u - sf.ZETA ** (k % 3)) < 1e-9
