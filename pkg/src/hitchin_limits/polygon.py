"""Convex regular-polygon models of zeros.

Near a zero of order k the limit polygon has n = k + 3 vertices.  Crossing a
Stokes ray replaces one vector of the current vertex-lift basis (alternating
inscribed/circumscribed triangles); crossing a Weyl wall permutes which basis
slot carries the largest/medium/smallest frame eigenvalue.  With the
canonical lifts every single replacement is a unipotent change of basis, and
the products assemble the leading term of the holonomy along a ray.

Angles are natural-chart angles: Stokes rays at pi/6 mod pi/3, walls at
0 mod pi/3.  The six-step basis pattern advances all polygon indices by 3,
and the slot carrying the smallest eigenvalue is always the one replaced.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationInvalid, StokesEndpoint, WallAmbiguity
from .frame import BETA, titeica_frame
from .surface import GeodesicPath, classify_direction
from .tropical import CBRT4

PI = math.pi
_STOKES_TOL = 1e-10

# basis pattern per Stokes sector (sector sigma covers angles
# ((2 sigma - 1) pi/6, (2 sigma + 1) pi/6)); six sectors advance indices by 3
_BASIS_PATTERN = (
    (("r", -1), ("r", 0), ("r", 1)),
    (("q", 0), ("r", 0), ("r", 1)),
    (("r", 2), ("r", 0), ("r", 1)),
    (("r", 2), ("q", 1), ("r", 1)),
    (("r", 2), ("r", 3), ("r", 1)),
    (("r", 2), ("r", 3), ("q", 2)),
)

# eigenvalue-rank tags per wall-to-wall interval (tau pi/3, (tau+1) pi/3);
# tags rank the slot branches cos(theta - BETA[slot]) of the frame
_TAG_TABLE = (
    ("s", "l", "m"),  # tau = 0: (0, pi/3)
    ("s", "m", "l"),
    ("m", "s", "l"),
    ("l", "s", "m"),
    ("l", "m", "s"),
    ("m", "l", "s"),  # tau = 5 == -1: (-pi/3, 0)
)


@dataclass(frozen=True)
class PolygonLifts:
    """Canonical vertex lifts of the regular n-gon.

    r[:, j] lifts vertex r_j; q[:, j] lifts the circumscribed-triangle apex
    q_j over edge e_j.  These are the unique lifts (up to one global scalar)
    making all Stokes-flip transformations unipotent.
    """

    n: int
    r: np.ndarray  # shape (3, n)
    q: np.ndarray

    def vector(self, kind: str, idx: int) -> np.ndarray:
        arr = self.r if kind == "r" else self.q
        return arr[:, idx % self.n]


def regular_lifts(n: int) -> PolygonLifts:
    if n < 3:
        raise ValueError("polygon needs at least 3 vertices")
    js = np.arange(n)
    ang = 2 * PI * js / n
    r = np.vstack([np.cos(ang), np.sin(ang), np.ones(n)])
    a = 2 * PI / n
    q0 = np.array([-math.cos(a) - 1.0, -math.sin(a), -2.0 * math.cos(a)])
    q = np.empty((3, n))
    for j in range(n):
        c, s_ = math.cos(a * j), math.sin(a * j)
        q[0, j] = c * q0[0] - s_ * q0[1]
        q[1, j] = s_ * q0[0] + c * q0[1]
        q[2, j] = q0[2]
    return PolygonLifts(n=n, r=r, q=q)


# ---------------------------------------------------------------------------
# scheme bookkeeping
# ---------------------------------------------------------------------------

def classify_angle_is_special(theta: float, tol: float = 1e-6) -> bool:
    """True near a Stokes ray or a Weyl wall (used to skip degenerate sweeps)."""
    r = theta % (PI / 3)
    return min(r, PI / 3 - r) <= tol or abs(r - PI / 6) <= tol


def sector_of(theta: float) -> int:
    """Stokes sector index; raises if theta sits on a Stokes ray."""
    x = (theta + PI / 6) / (PI / 3)
    frac = x - math.floor(x)
    if min(frac, 1 - frac) * (PI / 3) <= _STOKES_TOL:
        raise StokesEndpoint(f"angle {theta} lies on a Stokes ray")
    return int(math.floor(x))

def wall_interval_of(theta: float) -> int:
    """Wall-to-wall interval index tau with theta in (tau pi/3, (tau+1) pi/3)."""
    return int(math.floor(theta / (PI / 3)))


def basis_labels(sigma: int):
    u = sigma % 6
    shift = 3 * ((sigma - u) // 6)
    return tuple((kind, idx + shift) for kind, idx in _BASIS_PATTERN[u])


def eigen_tags(tau: int):
    return _TAG_TABLE[tau % 6]


def basis_matrix(lifts: PolygonLifts, sigma: int) -> np.ndarray:
    return np.column_stack([lifts.vector(kind, idx)
                            for kind, idx in basis_labels(sigma)])


def slot_with_tag(theta: float, tag: str) -> int:
    return eigen_tags(wall_interval_of(theta)).index(tag)


@dataclass(frozen=True)
class FlipState:
    """Position in the flip scheme: a half-sector between consecutive
    Stokes/wall lines, with its basis and eigenvalue-rank tags."""

    n: int
    half_sector: int  # interval (h pi/6, (h+1) pi/6)

    @property
    def sector(self) -> int:
        return (self.half_sector + 1) // 2

    @property
    def wall_interval(self) -> int:
        return self.half_sector // 2

    @property
    def basis(self):
        return basis_labels(self.sector)

    @property
    def eigen_order(self):
        return eigen_tags(self.wall_interval)

    @property
    def sector_angle(self):
        return (self.half_sector * PI / 6, (self.half_sector + 1) * PI / 6)


def initial_state(n: int) -> FlipState:
    """The scheme's starting state: basis (r_-1, r_0, r_1) just past the wall
    at angle 0."""
    return FlipState(n=n, half_sector=0)


def flip(state: FlipState) -> FlipState:
    """Advance past the next Stokes ray (crossing any wall in between)."""
    h = state.half_sector
    return FlipState(n=state.n, half_sector=h + 1 if h % 2 == 0 else h + 2)


def flip_matrix(lifts: PolygonLifts, sigma: int) -> np.ndarray:
    """Change of basis B(sigma+1)^(-1) B(sigma) for one Stokes crossing."""
    return np.linalg.solve(basis_matrix(lifts, sigma + 1),
                           basis_matrix(lifts, sigma))


def arc_unipotent(lifts: PolygonLifts, theta_in: float, theta_out: float,
                  k: int = None) -> np.ndarray:
    """U(theta_in, theta_out)^(-1): the product of per-flip unipotents for
    every Stokes ray the arc crosses, composed in crossing order.

    Angles are natural-chart lifts; arcs may wind several times around the
    zero.  Endpoints on Stokes rays are rejected.
    """
    if k is not None and lifts.n != k + 3:
        raise ValueError("lifts do not match the zero order")
    s_in = sector_of(theta_in)
    s_out = sector_of(theta_out)
    U = np.eye(3)
    if s_out >= s_in:
        for sigma in range(s_out - 1, s_in - 1, -1):
            U = U @ flip_matrix(lifts, sigma)
    else:
        for sigma in range(s_out, s_in):
            U = U @ np.linalg.inv(flip_matrix(lifts, sigma))
    return U


def check_entry_nonzero(lifts: PolygonLifts, theta_in: float, theta_out: float):
    """Entry of U(theta_in, theta_out)^(-1) pairing the top outgoing slot with
    the top incoming slot of a geodesic turn; asserts it is positive.

    theta_in/theta_out are the position angles of the incoming and outgoing
    rays; the subtended angle must lie in [pi, cone - pi].
    """
    cone = 2 * PI * lifts.n / 3.0
    subtend = theta_out - theta_in
    if subtend < PI - 1e-9 or subtend > cone - PI + 1e-9:
        raise ConfigurationInvalid(
            f"turn of {subtend} outside the geodesic range [pi, {cone - PI}]")
    col = slot_with_tag(theta_in, "l")
    row = slot_with_tag(theta_out, "s")
    U = arc_unipotent(lifts, theta_in, theta_out)
    value = float(U[row, col])
    if value <= 0:
        raise AssertionError(
            f"paired unipotent entry not positive: U^-1[{row},{col}] = {value}")
    return {"entry": (row, col), "value": value}


def scheme_trace(n: int, flips: int):
    """Basis/eigen-order trace of the scheme over a number of flips."""
    state = initial_state(n)
    rows = [state]
    for _ in range(flips):
        state = flip(state)
        rows.append(state)
    return rows


# ---------------------------------------------------------------------------
# leading term of the holonomy along a ray
# ---------------------------------------------------------------------------

# slot holding the Titeica eigenvector with branch index j (see frame.BETA)
_SLOT_OF_BRANCH = {0: 1, 1: 0, 2: 2}


def _branch_permutation(m: int) -> np.ndarray:
    """Frame-change permutation in the S-gauge for a chart rotation zeta^m:
    the eigenvector of branch j moves to the slot of branch j + m."""
    P = np.zeros((3, 3))
    for j in range(3):
        P[_SLOT_OF_BRANCH[(j + m) % 3], _SLOT_OF_BRANCH[j]] = 1.0
    return P


def _chart_mismatch(angle_expected: float, angle_actual: float) -> int:
    """Multiple of 2 pi/3 separating two natural charts seeing the same
    direction; raises if the angles are not chart-compatible."""
    delta = (angle_actual - angle_expected) / (2 * PI / 3)
    m = round(delta)
    if abs(delta - m) > 1e-6:
        raise ValueError("junction angles are not chart-aligned modulo 2 pi/3")
    return m % 3


@dataclass
class LeadingTerm:
    """Log-scaled evaluation of the dominant holonomy product A(s)."""

    s: float
    log_scale: float
    matrix: np.ndarray            # unit max-norm
    expression: tuple
    wall_ambiguity: bool = False

    def norm_exponent(self) -> float:
        """log ||A(s)|| / s^(1/3) (max-norm)."""
        return self.log_scale / self.s ** (1.0 / 3.0)

    def top_singular_exponent(self) -> float:
        return ((self.log_scale + math.log(np.linalg.norm(self.matrix, 2)))
                / self.s ** (1.0 / 3.0))


def _segment_diag_exponents(period: complex, chart_angle: float, s: float):
    """Slot exponents of D(segment)^(-1) in the junction-aligned chart."""
    L = abs(period)
    return np.array([-CBRT4 * s ** (1.0 / 3.0) * L * math.cos(chart_angle - b)
                     for b in BETA])


def _perturb_stokes_segments(path: GeodesicPath, eta: float):
    """Tilt Stokes-direction segments by +-eta so every arc at a zero of
    order >= 1 keeps a subtended angle > pi; prefer the ccw sign."""
    n = len(path.segments)
    theta_in = []
    theta_out = []
    for j in path.junctions:
        theta_in.append(j.theta_in)
        theta_out.append(j.theta_out)

    def junction_index_after(i):
        # junction at the end of segment i, or None for open-path ends
        if path.closed:
            return (i + 1) % n
        return i if i < n - 1 else None

    def junction_index_before(i):
        if path.closed:
            return i
        return i - 1 if i > 0 else None

    for i, seg in enumerate(path.segments):
        jb = junction_index_before(i)
        ja = junction_index_after(i)
        direction = theta_out[jb] if jb is not None else cmath.phase(seg.period)
        if classify_direction(direction).tag != "Stokes":
            continue
        for delta in (eta, -eta):
            ok = True
            if jb is not None and path.junctions[jb].order >= 1:
                if (theta_out[jb] + delta) - theta_in[jb] <= PI:
                    ok = False
            if ja is not None and path.junctions[ja].order >= 1:
                if theta_out[ja] - (theta_in[ja] + delta) <= PI:
                    ok = False
            if ok:
                if jb is not None:
                    theta_out[jb] += delta
                if ja is not None:
                    theta_in[ja] += delta
                break
        else:
            raise ConfigurationInvalid(
                "no Stokes perturbation keeps both arcs above pi")
    return theta_in, theta_out


def _path_factors(path: GeodesicPath, eta: float):
    """Factor sequence of the leading product in traversal order.

    Every segment diagonal is expressed in the segment's own chart; arc
    unipotents live in their junction's chart; a chart change rotating
    directions by 2 pi m/3 contributes the branch permutation P(-m) between
    the factors it separates (closed-path wraps, reversed paths).
    Yields ("diag", exponent triple per unit s^(1/3)) | ("perm", matrix) |
    ("uni", matrix, junction index).
    """
    n = len(path.segments)
    theta_in, theta_out = _perturb_stokes_segments(path, eta)

    def junction_after_seg(i):
        if path.closed:
            return (i + 1) % n
        return i if i < n - 1 else None

    for i, seg in enumerate(path.segments):
        phase = cmath.phase(seg.period)
        yield ("diag", _segment_diag_exponents(seg.period, phase, 1.0))
        ja = junction_after_seg(i)
        if ja is None:
            continue
        jn = path.junctions[ja]
        m_in = _chart_mismatch(phase + PI, theta_in[ja])
        if m_in:
            yield ("perm", _branch_permutation(-m_in))
        lifts = regular_lifts(jn.order + 3)
        yield ("uni", arc_unipotent(lifts, theta_in[ja], theta_out[ja]), ja)
        nxt = path.segments[(i + 1) % n]
        m_out = _chart_mismatch(theta_out[ja], cmath.phase(nxt.period))
        if m_out:
            yield ("perm", _branch_permutation(-m_out))


def leading_term(path: GeodesicPath, surface=None, s: float = 1.0,
                 eta: float = 1e-3) -> LeadingTerm:
    """A(s): the product of diagonal exponentials and arc unipotents that
    dominates Hol_s along the path, evaluated with log scaling.

    Wall-direction segments double a top diagonal entry; the result is
    flagged, not rejected.
    """
    if s <= 0:
        raise ValueError("ray parameter s must be positive")
    S, S_inv = titeica_frame()
    log_scale = 0.0
    M = np.eye(3, dtype=complex)
    expression = []
    wall_flag = False

    def push(factor, ls=0.0):
        nonlocal M, log_scale
        M = factor @ M
        scale = float(np.max(np.abs(M)))
        M = M / scale
        log_scale += math.log(scale) + ls

    for idx, factor in enumerate(_path_factors(path, eta)):
        if factor[0] == "diag":
            exps = factor[1] * s ** (1.0 / 3.0)
            top = float(np.max(exps))
            if np.sum(exps >= top - 1e-9 * max(1.0, abs(top))) > 1:
                wall_flag = True
            push(np.diag(np.exp(exps - top)).astype(complex), ls=top)
            expression.append(("D_inv", idx, tuple(exps)))
        elif factor[0] == "perm":
            push(factor[1].astype(complex))
            expression.append(("seam", idx))
        else:
            push(factor[1].astype(complex))
            expression.append(("U_inv", idx, factor[2]))

    if wall_flag:
        warnings.warn("a segment runs along a Weyl wall; the leading term "
                      "carries multiple top entries", WallAmbiguity)
    A = S @ M @ S_inv
    scale = float(np.max(np.abs(A)))
    return LeadingTerm(s=s, log_scale=log_scale + math.log(scale),
                       matrix=A / scale, expression=tuple(expression),
                       wall_ambiguity=wall_flag)


# ---------------------------------------------------------------------------
# tropical (max-plus) top exponent through the unipotent patterns
# ---------------------------------------------------------------------------

def tropical_norm_exponent(path: GeodesicPath, pattern_tol: float = 1e-12) -> float:
    """Max-plus top exponent of the leading product: per-slot exponents chain
    through the nonzero pattern of each arc unipotent.

    For geodesic paths this equals the sum of per-segment top exponents; a
    corner whose direction change exceeds the dominant branch width breaks
    the eigenvalue alignment and produces a strict deficit.
    """

    def apply_pattern(state, M):
        new = np.full(3, -np.inf)
        for r in range(3):
            for c in range(3):
                if abs(M[r, c]) > pattern_tol:
                    new[r] = max(new[r], state[c])
        return new

    state = np.zeros(3)  # max-plus column vector over slots
    for factor in _path_factors(path, 1e-3):
        if factor[0] == "diag":
            state = state + factor[1]
        else:
            state = apply_pattern(state, factor[1])
    return float(np.max(state))
