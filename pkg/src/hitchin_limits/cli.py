"""Command-line front end.

Subcommands: surface build|validate, tropical spectrum, polygon
unipotent|scheme, wang solve, verify sweep|arc, building
localmodel|convexity, trigroup spectrum|boundary.

All CSV output carries a header row and locale-independent %.17g numbers, so
identical configurations (and seeds) produce byte-identical files.  The
HITCHIN_LIMITS_THREADS environment variable caps worker parallelism of the
sweep subcommands.  Exit codes: 0 success, 1 validation failure, 2 numerical
failure.
"""

from __future__ import annotations

import argparse
import cmath
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import building, frame, polygon, trigroup, tropical, wang
from . import surface as surf_mod
from .errors import HitchinLimitsError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


def _fmt(x) -> str:
    return "%.17g" % float(x)


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if not isinstance(v, str) else v
                              for v in row))
    text = "\n".join(lines) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _diag(msg):
    sys.stderr.write(msg.rstrip() + "\n")


def _max_workers(default=4):
    raw = os.environ.get("HITCHIN_LIMITS_THREADS", "")
    try:
        n = int(raw)
        return max(1, n)
    except ValueError:
        return default


def _parse_s_list(text):
    vals = [float(tok) for tok in text.split(",") if tok]
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValueError("s-list must be strictly increasing")
    if any(v <= 0 for v in vals):
        raise ValueError("s values must be positive")
    return vals


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_surface_build(args):
    if args.disk is not None:
        k, radius = int(args.disk[0]), float(args.disk[1])
        surf = surf_mod.build_polynomial_disk(k, radius)
    elif args.orbifold:
        p, q, r = (int(t) for t in args.orbifold.split(","))
        surf = trigroup.build_orbifold(p, q, r, layers=args.layers).surface
    else:
        raise ValueError("choose --disk K RADIUS or --orbifold p,q,r")
    violations = surf_mod.validate(surf)
    if violations:
        for v in violations:
            _diag(f"violation: {v.kind} {v.detail}")
        return EXIT_VALIDATION
    surf_mod.save_surface(surf, args.out)
    _diag(f"wrote {args.out}: {len(surf.triangles)} triangles, "
          f"{surf.n_classes()} vertex classes")
    return EXIT_OK


def cmd_surface_validate(args):
    surf = surf_mod.load_surface(getattr(args, "in"))
    violations = surf_mod.validate(surf)
    for v in violations:
        print(f"{v.kind}: {v.detail}")
    if violations:
        return EXIT_VALIDATION
    print("ok")
    return EXIT_OK


def cmd_tropical_spectrum(args):
    if args.surface:
        surf = surf_mod.load_surface(args.surface)
        if surf_mod.validate(surf):
            _diag("surface file fails validation")
            return EXIT_VALIDATION
    path = surf_mod.load_path(args.path)
    rows = []
    run = np.zeros(3)
    for i, seg in enumerate(path.segments):
        se = tropical.segment_exponents(seg.period)
        run = run + np.array(se.weyl.as_tuple())
        rows.append((i, *se.nu, *run))
    _write_csv(args.out, ["segment", "nu1", "nu2", "nu3",
                          "run_x1", "run_x2", "run_x3"], rows)
    return EXIT_OK


def cmd_polygon_unipotent(args):
    lifts = polygon.regular_lifts(args.n)
    U = polygon.arc_unipotent(lifts, args.theta_in, args.theta_out)
    print("U(theta_in, theta_out)^-1 =")
    for row in U:
        print("  [" + ", ".join(_fmt(v) for v in row) + "]")
    cone = 2 * math.pi * args.n / 3
    subtend = args.theta_out - args.theta_in
    if math.pi - 1e-9 <= subtend <= cone - math.pi + 1e-9:
        out = polygon.check_entry_nonzero(lifts, args.theta_in, args.theta_out)
        print(f"paired entry {out['entry']}: {_fmt(out['value'])} (positive)")
    else:
        print("turn outside the geodesic range; no entry check")
    return EXIT_OK


def cmd_polygon_scheme(args):
    rows = polygon.scheme_trace(args.n, args.flips)
    for st in rows:
        lo, hi = st.sector_angle
        basis = " ".join(f"{kind}{idx}" for kind, idx in st.basis)
        tags = "".join(st.eigen_order)
        print(f"({_fmt(lo)}, {_fmt(hi)})  basis: {basis:24s} eigen: {tags}")
    return EXIT_OK


def cmd_wang_solve(args):
    grid = wang.GridSpec(nr=args.nr, ntheta=args.ntheta, ratio=args.ratio)
    sol = wang.solve_disk(args.k, args.s, args.radius, grid)
    F = wang.error_values(sol)
    rows = []
    for i, r in enumerate(sol.rs):
        for j, th in enumerate(sol.thetas):
            fval = F[i, j] if i < len(sol.rs) - 1 else 0.0
            rows.append((r, th, sol.phi[i, j], fval, sol.residual_nodes[i, j]))
    _write_csv(args.out, ["r", "theta", "phi", "F", "residual"], rows)
    _diag(f"residual norm {sol.residual_norm:.3e} after "
          f"{len(sol.residual_history) - 1} Newton steps")
    return EXIT_OK


def _sweep_path(spec, k, s):
    """Chart polyline for a sweep path spec 'radial:r0,r1,theta' or
    'chord:w0re,w0im,w1re,w1im' (natural-coordinate chord mapped to the
    chart)."""
    kind, _, rest = spec.partition(":")
    vals = [float(t) for t in rest.split(",")] if rest else []
    if kind == "radial":
        r0, r1, theta = vals if vals else (0.3, 0.9, 0.27)
        return [r0 * cmath.exp(1j * theta), r1 * cmath.exp(1j * theta)]
    if kind == "chord":
        w0, w1 = complex(vals[0], vals[1]), complex(vals[2], vals[3])
        p = 3.0 / (k + 3)
        n = 48
        pts = []
        for t in np.linspace(0.0, 1.0, n):
            w = w0 + (w1 - w0) * t
            pts.append((w * (k + 3) / 3.0) ** p)
        return pts
    raise ValueError(f"unknown path spec {spec!r}")


def _chart_period(pts, k):
    a, b = complex(pts[0]), complex(pts[-1])
    wa = frame.natural_coordinate(a, k, cmath.phase(a))
    wb = frame.natural_coordinate(b, k, cmath.phase(b))
    return wb - wa


def cmd_verify_sweep(args):
    s_list = _parse_s_list(args.s)
    k = args.k

    def solve(s):
        grid = wang.GridSpec(nr=args.nr, ntheta=args.ntheta)
        return wang.solve_disk(k, s, args.radius, grid)

    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        sols = dict(zip(s_list, pool.map(solve, s_list)))

    pts = _sweep_path(args.path, k, None)
    period = _chart_period(pts, k)
    target = np.array(tropical.segment_exponents(period).weyl.as_tuple())
    scale = float(np.max(np.abs(target)))
    rows = []
    prev_gap = None
    monotone = True
    for s in s_list:
        numeric = frame.transport_weyl_exponents(sols[s], pts, s)
        gaps = np.abs(numeric - target) / scale
        gap = float(np.max(gaps))
        if prev_gap is not None and gap > prev_gap:
            monotone = False
        prev_gap = gap
        rows.append((s, *numeric, *target, *gaps))
    _write_csv(args.out, ["s", "num_x1", "num_x2", "num_x3",
                          "trop_x1", "trop_x2", "trop_x3",
                          "gap_x1", "gap_x2", "gap_x3"], rows)
    _diag(f"max relative gap at s={s_list[-1]:g}: {prev_gap:.4f}"
          f" (monotone: {monotone})")
    return EXIT_OK


def cmd_verify_arc(args):
    s_list = _parse_s_list(args.s)
    k = args.k
    lifts = polygon.regular_lifts(k + 3)
    scalef = (k + 3) / 3.0
    U = polygon.arc_unipotent(lifts, scalef * args.theta0, scalef * args.theta1)
    S, S_inv = frame.titeica_frame()
    pred = S @ np.linalg.inv(U) @ S_inv

    def run(s):
        grid = wang.GridSpec(nr=args.nr, ntheta=args.ntheta)
        sol = wang.solve_disk(k, s, args.radius_disk, grid)
        G = frame.arc_unipotent_numeric(sol, k, s, args.theta0, args.theta1,
                                        radius=args.radius)
        return float(np.max(np.abs(G - pred)))

    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        errs = list(pool.map(run, s_list))
    rows = [(s, e) for s, e in zip(s_list, errs)]
    _write_csv(args.out, ["s", "entrywise_error"], rows)
    _diag(f"entrywise error at s={s_list[-1]:g}: {errs[-1]:.4e}")
    return EXIT_OK


def cmd_building_localmodel(args):
    atlas = building.sector_atlas(args.k)
    rng = np.random.default_rng(args.seed)
    rows = []
    for _ in range(args.samples):
        psi = rng.uniform(0.0, 2 * math.pi)
        r = rng.uniform(0.05, 1.0)
        z = r * cmath.exp(1j * psi)
        sec = atlas.sector_of(z)
        u = building.local_model_eval(args.k, z, atlas)
        rows.append((sec.index, z.real, z.imag, u.x1, u.x2, u.x3))
    _write_csv(args.out, ["sector", "re_z", "im_z", "x1", "x2", "x3"], rows)
    return EXIT_OK


def cmd_building_convexity(args):
    rng = np.random.default_rng(args.seed)
    fails = 0
    for _ in range(args.paths):
        path = _random_geodesic_path(rng)
        if not building.weak_convexity_check(path):
            fails += 1
    corner_fails = 0
    for _ in range(args.corners):
        path = _random_corner_path(rng)
        if building.weak_convexity_check(path):
            corner_fails += 1
    print(f"geodesic additivity: {args.paths - fails}/{args.paths}")
    print(f"corner deficits:     {args.corners - corner_fails}/{args.corners}")
    return EXIT_OK if fails == 0 and corner_fails == 0 else EXIT_NUMERICAL


def _random_geodesic_path(rng, closed=False):
    n = int(rng.integers(2, 5))
    lengths = rng.uniform(0.4, 2.5, size=n)
    orders = [int(rng.integers(0, 4)) for _ in range(n - 1)]
    turns = []
    for k in orders:
        cone = 2 * math.pi * (1 + k / 3)
        lo, hi = math.pi + 0.05, cone - math.pi - 0.05
        turns.append(math.pi if hi <= lo else rng.uniform(lo, hi))
    start = rng.uniform(0.0, 2 * math.pi)
    return surf_mod.synthesize_path(list(lengths), turns, orders,
                                    start_angle=start)


def _random_corner_path(rng):
    """A two-segment corner whose turn is sharp enough to break the dominant
    eigenvalue alignment: the direction change exceeds a full branch width
    2*pi/3, so the top coordinate shows a strict deficit.  Directions stay
    clear of walls and Stokes rays."""
    from .surface import GeodesicPath, Junction, SaddleConnection
    L0, L1 = rng.uniform(0.4, 2.0, size=2)
    k = int(rng.integers(0, 4))
    while True:
        a0 = rng.uniform(0.0, 2 * math.pi)
        ccw = rng.uniform(0.25, math.pi / 3 - 0.1)
        theta_out = a0 + math.pi + ccw
        if not (polygon.classify_angle_is_special(a0, 0.05)
                or polygon.classify_angle_is_special(theta_out, 0.05)):
            break
    p0 = L0 * cmath.exp(1j * a0)
    p1 = L1 * cmath.exp(1j * theta_out)
    return GeodesicPath(
        (SaddleConnection(-1, -1, p0), SaddleConnection(-1, -1, p1)),
        (Junction(order=k, theta_in=a0 + math.pi, theta_out=theta_out),), False)


def cmd_trigroup_spectrum(args):
    p, q, r = (int(t) for t in args.pqr.split(","))
    orb = trigroup.build_orbifold(p, q, r, layers=args.layers)
    classes = [trigroup.straight_positive_cycle(orb)]
    try:
        classes.append(trigroup.straight_median_cycle(orb))
    except HitchinLimitsError:
        _diag("no median cycle on this patch; single-class family")
    conns = surf_mod.enumerate_saddle_connections(orb.surface, args.maxlen)
    _diag(f"saddle connections up to {args.maxlen}: {len(conns)} "
          f"(clipped: {conns.clipped})")
    thetas = [2 * math.pi * i / args.thetas for i in range(args.thetas)]
    rows = []
    for th in thetas:
        rotated = trigroup._rotated_paths(classes, th)
        spec = trigroup.spectrum(orb, rotated)
        for ci, wv in enumerate(spec.values):
            rows.append((th, ci, wv.x1, wv.x2, wv.x3))
    _write_csv(args.out, ["theta", "class", "x1", "x2", "x3"], rows)
    return EXIT_OK


def cmd_trigroup_boundary(args):
    p, q, r = (int(t) for t in args.pqr.split(","))
    orb = trigroup.build_orbifold(p, q, r, layers=args.layers)
    classes = [trigroup.straight_positive_cycle(orb),
               trigroup.straight_median_cycle(orb)]
    thetas = [2 * math.pi * i / args.thetas for i in range(args.thetas)]
    probe = trigroup.boundary_injectivity_probe(orb, classes, thetas)
    print(f"min pairwise projectivized distance: {_fmt(probe.min_pairwise)}")
    if probe.insufficient_family:
        print("family insufficient (single angular class)")
        return EXIT_VALIDATION
    return EXIT_OK if probe.min_pairwise > 0 else EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="hitchin-limits")
    sub = ap.add_subparsers(dest="group", required=True)

    g = sub.add_parser("surface").add_subparsers(dest="action", required=True)
    b = g.add_parser("build")
    b.add_argument("--disk", nargs=2, metavar=("K", "RADIUS"))
    b.add_argument("--orbifold", type=str, default=None)
    b.add_argument("--layers", type=int, default=6)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_surface_build)
    v = g.add_parser("validate")
    v.add_argument("--in", required=True)
    v.set_defaults(func=cmd_surface_validate)

    g = sub.add_parser("tropical").add_subparsers(dest="action", required=True)
    t = g.add_parser("spectrum")
    t.add_argument("--surface", default=None)
    t.add_argument("--path", required=True)
    t.add_argument("--out", default="-")
    t.set_defaults(func=cmd_tropical_spectrum)

    g = sub.add_parser("polygon").add_subparsers(dest="action", required=True)
    u = g.add_parser("unipotent")
    u.add_argument("--n", type=int, required=True)
    u.add_argument("--theta-in", dest="theta_in", type=float, required=True)
    u.add_argument("--theta-out", dest="theta_out", type=float, required=True)
    u.set_defaults(func=cmd_polygon_unipotent)
    sch = g.add_parser("scheme")
    sch.add_argument("--n", type=int, required=True)
    sch.add_argument("--flips", type=int, default=6)
    sch.set_defaults(func=cmd_polygon_scheme)

    g = sub.add_parser("wang").add_subparsers(dest="action", required=True)
    w = g.add_parser("solve")
    w.add_argument("--k", type=int, required=True)
    w.add_argument("--s", type=float, required=True)
    w.add_argument("--radius", type=float, default=1.0)
    w.add_argument("--nr", type=int, default=200)
    w.add_argument("--ntheta", type=int, default=0)
    w.add_argument("--ratio", type=float, default=1.05)
    w.add_argument("--out", default="-")
    w.set_defaults(func=cmd_wang_solve)

    g = sub.add_parser("verify").add_subparsers(dest="action", required=True)
    sw = g.add_parser("sweep")
    sw.add_argument("--k", type=int, required=True)
    sw.add_argument("--s", default="1e2,1e3,1e4")
    sw.add_argument("--path", default="radial:0.3,0.9,0.27")
    sw.add_argument("--radius", type=float, default=1.0)
    sw.add_argument("--nr", type=int, default=200)
    sw.add_argument("--ntheta", type=int, default=0)
    sw.add_argument("--out", default="-")
    sw.set_defaults(func=cmd_verify_sweep)
    arc = g.add_parser("arc")
    arc.add_argument("--k", type=int, required=True)
    arc.add_argument("--s", default="1e2,1e3,1e4")
    arc.add_argument("--theta0", type=float, default=0.3)
    arc.add_argument("--theta1", type=float, default=0.8)
    arc.add_argument("--radius", type=float, default=0.5)
    arc.add_argument("--radius-disk", dest="radius_disk", type=float, default=1.0)
    arc.add_argument("--nr", type=int, default=200)
    arc.add_argument("--ntheta", type=int, default=0)
    arc.add_argument("--out", default="-")
    arc.set_defaults(func=cmd_verify_arc)

    g = sub.add_parser("building").add_subparsers(dest="action", required=True)
    lm = g.add_parser("localmodel")
    lm.add_argument("--k", type=int, required=True)
    lm.add_argument("--samples", type=int, default=100)
    lm.add_argument("--seed", type=int, default=0)
    lm.add_argument("--out", default="-")
    lm.set_defaults(func=cmd_building_localmodel)
    cv = g.add_parser("convexity")
    cv.add_argument("--paths", type=int, default=100)
    cv.add_argument("--corners", type=int, default=100)
    cv.add_argument("--seed", type=int, default=0)
    cv.set_defaults(func=cmd_building_convexity)

    g = sub.add_parser("trigroup").add_subparsers(dest="action", required=True)
    ts = g.add_parser("spectrum")
    ts.add_argument("--pqr", default="3,3,4")
    ts.add_argument("--maxlen", type=float, default=1.01)
    ts.add_argument("--thetas", type=int, default=12)
    ts.add_argument("--layers", type=int, default=9)
    ts.add_argument("--out", default="-")
    ts.set_defaults(func=cmd_trigroup_spectrum)
    tb = g.add_parser("boundary")
    tb.add_argument("--pqr", default="3,3,4")
    tb.add_argument("--thetas", type=int, default=12)
    tb.add_argument("--layers", type=int, default=9)
    tb.set_defaults(func=cmd_trigroup_boundary)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as err:
        _diag(f"error: {err}")
        return EXIT_VALIDATION
    except HitchinLimitsError as err:
        _diag(f"error: {type(err).__name__}: {err}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
