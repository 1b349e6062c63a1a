"""Frame-field transport along paths in affine-sphere charts.

The structure equations give a flat connection with matrices U, V built from
the conformal factor phi and the cubic differential.  Transport over long
distances reaches condition numbers far beyond double precision, so the
inverse transport is accumulated in a factored form Q * diag(e^d) * T with Q
unitary and T a mild upper-triangular remainder; all three log singular
values stay accurate.

The constant differential has the classical closed-form frame (Titeica); its
eigenbasis S conjugates every asymptotic formula in the polygon module.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .errors import StepUnstable
from .tropical import CBRT4, OMEGA, segment_exponents

# slot j of every diagonal carries the cosine branch cos(theta - BETA[j]);
# this matches the Stokes-flip bookkeeping of the polygon module
BETA = (-2.0 * math.pi / 3.0, 0.0, 2.0 * math.pi / 3.0)
_CBRT2 = 2.0 ** (1.0 / 3.0)


# ---------------------------------------------------------------------------
# structure coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StructureCoefficients:
    """Pointwise connection matrices of the frame ODE."""

    U: np.ndarray
    V: np.ndarray


def structure_coefficients(phi, dz_phi, q) -> StructureCoefficients:
    """U, V at a point from the conformal factor, its z-derivative and the
    cubic differential value q (already including the ray parameter s)."""
    dz_phi = complex(dz_phi)
    q = complex(q)
    ephi = cmath.exp(complex(phi))
    U = np.array([
        [0.0, 0.0, 0.5 * ephi],
        [1.0, dz_phi, 0.0],
        [0.0, q / ephi, 0.0],
    ], dtype=complex)
    V = np.array([
        [0.0, 0.5 * ephi, 0.0],
        [0.0, 0.0, q.conjugate() / ephi],
        [1.0, 0.0, dz_phi.conjugate()],
    ], dtype=complex)
    return StructureCoefficients(U, V)


def orthonormal_gauge(phi: float) -> np.ndarray:
    """C(phi): right factor turning an affine-sphere frame into a real
    orthonormal frame for the Blaschke lift."""
    a = cmath.exp(-phi / 2.0)
    return np.array([
        [1.0, 0.0, 0.0],
        [0.0, a, 1j * a],
        [0.0, a, -1j * a],
    ], dtype=complex)


# ---------------------------------------------------------------------------
# Titeica closed form
# ---------------------------------------------------------------------------

def titeica_structure() -> StructureCoefficients:
    """Constant U, V of dz^3 with its flat conformal factor e^phi = 2^(1/3)."""
    phi = math.log(2.0) / 3.0
    return structure_coefficients(phi, 0.0 + 0.0j, 1.0 + 0.0j)


@lru_cache(maxsize=1)
def titeica_frame():
    """(S, S_inv): eigenbasis of the Titeica monodromy.

    Computed numerically by diagonalizing the transport over a wall-avoiding
    displacement, slots ordered so slot j carries the branch cos(theta -
    BETA[j]), columns normalized to leading entry 1.
    """
    sc = titeica_structure()
    x = 0.8 * cmath.exp(0.23j)  # generic direction, away from walls/Stokes
    M = expm(x * sc.U + x.conjugate() * sc.V)
    evals, vecs = np.linalg.eig(M)
    want = [CBRT4 * (x * cmath.exp(-1j * b)).real for b in BETA]
    cols = []
    used = set()
    for target in want:
        errs = [abs(cmath.log(evals[i]).real - target) if i not in used else 1e30
                for i in range(3)]
        i = int(np.argmin(errs))
        used.add(i)
        cols.append(vecs[:, i] / vecs[0, i])
    S = np.column_stack(cols)
    return S, np.linalg.inv(S)


def titeica_frame_analytic():
    """Closed-form eigenvectors (1, 2^(1/3) w^(2j), 2^(1/3) w^j), slot order
    j = (1, 0, 2); test oracle for titeica_frame."""
    cols = []
    for j in (1, 0, 2):
        cols.append([1.0, _CBRT2 * OMEGA ** (2 * j), _CBRT2 * OMEGA ** j])
    return np.array(cols, dtype=complex).T


def titeica_transport(displacement: complex) -> np.ndarray:
    """Transport of the constant-differential frame over a natural-chart
    displacement: S exp(diag of 2^(2/3) Re(x e^(-i BETA_j))) S^(-1)."""
    x = complex(displacement)
    S, S_inv = titeica_frame()
    d = np.array([CBRT4 * (x * cmath.exp(-1j * b)).real for b in BETA])
    return (S * np.exp(d)) @ S_inv


def titeica_log_singular_values(displacement: complex):
    """Log singular values of the closed-form transport, computed stably in
    the factored form (oracle for large displacements)."""
    x = complex(displacement)
    S, S_inv = titeica_frame()
    d = np.array([CBRT4 * (x * cmath.exp(-1j * b)).real for b in BETA])
    return _log_singular_values_of_factored(S, d, S_inv)


def _log_singular_values_of_factored(A, logd, B):
    """Sorted log singular values of A diag(e^logd) B without overflow."""
    m = float(np.max(logd))
    G = (A * np.exp(logd - m)) @ B
    s1 = m + math.log(np.linalg.norm(G, 2))
    m2 = float(np.max(-logd))
    Ginv = (np.linalg.inv(B) * np.exp(-logd - m2)) @ np.linalg.inv(A)
    s3 = -(m2 + math.log(np.linalg.norm(Ginv, 2)))
    det = np.linalg.slogdet(A)[1] + float(np.sum(logd)) + np.linalg.slogdet(B)[1]
    s2 = det - s1 - s3
    return np.array([s1, s2, s3])


# ---------------------------------------------------------------------------
# factored transport accumulation
# ---------------------------------------------------------------------------

class FrameTransport:
    """Inverse transport X = Psi^(-1) kept as Q * diag(e^logd) * T.

    Q is unitary, T upper triangular with O(1) rows; logd carries the
    Lyapunov-style per-direction log factors, so all three log singular
    values of the holonomy are recoverable at any dynamic range.
    """

    def __init__(self):
        self.Q = np.eye(3, dtype=complex)
        self.logd = np.zeros(3)
        self.T = np.eye(3, dtype=complex)

    def push_left(self, P: np.ndarray):
        """Fold X <- P X, keeping the factored form."""
        A = P @ self.Q
        Q2, R = np.linalg.qr(A)
        # positive-diagonal convention
        ph = np.diag(R).copy()
        ph[np.abs(ph) == 0] = 1.0
        ph = ph / np.abs(ph)
        Q2 = Q2 * ph
        R = (R.T * ph.conjugate()).T
        RD = R * np.exp(self.logd - self.logd[:, None])  # R[i,j] e^(d_j - d_i)
        newd = self.logd + np.log(np.abs(np.diag(R)))
        T2 = RD / np.diag(R)[:, None]
        Tn = T2 @ self.T
        scale = np.maximum(np.max(np.abs(Tn), axis=1), 1e-300)
        self.Q = Q2
        self.logd = newd + np.log(scale)
        self.T = Tn / scale[:, None]

    # -- recovered quantities ------------------------------------------------

    def log_singular_values_inverse(self, left_diag=None, right_diag=None):
        """Sorted log singular values of the holonomy X = Psi^(-1).

        Optional diagonal conjugation diag(left)^(-1) X diag(right) expresses
        the transport in another frame (e.g. the natural-coordinate frame).
        """
        A = self.Q if left_diag is None else (self.Q.T / np.asarray(left_diag)).T
        B = self.T if right_diag is None else self.T * np.asarray(right_diag)
        vals = _log_singular_values_of_factored(A, self.logd, B)
        return np.sort(vals)[::-1]

    def log_singular_values(self, left_diag=None, right_diag=None):
        """Sorted log singular values of the transport Psi itself."""
        return -self.log_singular_values_inverse(left_diag, right_diag)[::-1]

    def log_abs_det(self):
        _, ld = np.linalg.slogdet(self.T)
        return float(np.sum(self.logd) + ld)

    def inverse_matrix(self):
        """X = Psi^(-1) as a dense matrix (use only at moderate range)."""
        return (self.Q * np.exp(self.logd)) @ self.T

    def matrix(self):
        """Psi as a dense matrix (use only at moderate range)."""
        Tinv = np.linalg.inv(self.T)
        return (Tinv * np.exp(-self.logd)) @ self.Q.conjugate().T


def _default_step(s: float, tol: float, rate: float) -> float:
    """Step size: capped at min(0.01, 0.5 s^(-1/3)) and tightened so the RK4
    truncation stays near tol per unit length."""
    cap = min(0.01, 0.5 * s ** (-1.0 / 3.0))
    if rate <= 0:
        return cap
    h_acc = (120.0 * tol / rate ** 5) ** 0.25
    return max(min(cap, h_acc), 1e-5)


def integrate_transport(sol, path, s: float, qr_every: int = 10,
                        tol: float = 1e-10) -> FrameTransport:
    """RK4 transport of the structure-equation connection along a polyline.

    ``sol`` provides phi_at(z) and dz_phi_at(z) plus fields k and s (a Wang
    solution); ``path`` is a sequence of complex chart points.  The connection
    is taken trace-free (the scalar e^(phi)-gauge is removed), so the result
    is unimodular; asymptotic exponents are unaffected.
    """
    xport = FrameTransport()
    pts = [complex(z) for z in path]
    rate = CBRT4 * s ** (1.0 / 3.0) * 1.5

    def omega_at(z):
        phi = sol.phi_at(z)
        dphi = sol.dz_phi_at(z)
        q = s * z ** sol.k
        sc = structure_coefficients(phi, dphi, q)
        return sc.U, sc.V

    for a, b in zip(pts[:-1], pts[1:]):
        seg = b - a
        L = abs(seg)
        if L == 0:
            continue
        h = _default_step(s, tol, rate)
        n = max(2, int(math.ceil(L / h)))
        dt = 1.0 / n
        dz = seg * dt
        block = np.eye(3, dtype=complex)
        pending = 0
        for i in range(n):
            z0 = a + seg * (i / n)
            step, attempts = None, 0
            local_n = 1
            while True:
                ok = True
                M = np.eye(3, dtype=complex)
                for j in range(local_n):
                    zj0 = z0 + dz * (j / local_n)
                    M_step = _rk4_inverse_step(omega_at, zj0, dz / local_n)
                    if not np.all(np.isfinite(M_step)) or \
                            np.max(np.abs(M_step)) > math.exp(10):
                        ok = False
                        break
                    M = M_step @ M
                if ok:
                    step = M
                    break
                attempts += 1
                local_n *= 2
                if attempts > 8:
                    raise StepUnstable("transport step kept growing too fast")
            block = step @ block
            pending += 1
            if pending >= qr_every:
                xport.push_left(block)
                block = np.eye(3, dtype=complex)
                pending = 0
        if pending:
            xport.push_left(block)
    return xport


def _rk4_inverse_step(omega_at, z0, dz):
    """One RK4 step of dX = -(U dz + V dzbar) X over the straight piece dz.

    The connection is made trace-free on the fly, which removes the scalar
    conformal-factor gauge and keeps det X = 1.
    """

    def A(z):
        U, V = omega_at(z)
        W = U * dz + V * dz.conjugate()
        tr = np.trace(W) / 3.0
        W[0, 0] -= tr
        W[1, 1] -= tr
        W[2, 2] -= tr
        return -W

    k1 = A(z0)
    k2 = A(z0 + dz / 2)
    k3 = k2
    k4 = A(z0 + dz)
    # constant-coefficient RK4 on X' = A(t) X with A evaluated along the piece
    I = np.eye(3, dtype=complex)
    f1 = k1
    f2 = k2 @ (I + 0.5 * f1)
    f3 = k3 @ (I + 0.5 * f2)
    f4 = k4 @ (I + f3)
    return I + (f1 + 2 * f2 + 2 * f3 + f4) / 6.0


# ---------------------------------------------------------------------------
# arcs and sweeps
# ---------------------------------------------------------------------------

def natural_coordinate(z: complex, k: int, branch_angle: float = 0.0) -> complex:
    """w = 3/(k+3) z^((k+3)/3), the branch continuous near arg z =
    branch_angle."""
    r = abs(z)
    th = cmath.phase(z)
    th += round((branch_angle - th) / (2 * math.pi)) * 2 * math.pi
    p = (k + 3) / 3.0
    return 3.0 / (k + 3) * r ** p * cmath.exp(1j * p * th)


def natural_frame_diag(z: complex, k: int, s: float,
                       branch_angle: float = 0.0) -> np.ndarray:
    """Frame change from the chart frame (1, d/dz, d/dzbar) to the natural
    frame of q_s at z: diag(1, 1/w', 1/conj(w')) with w' = s^(1/3) z^(k/3).

    Asymptotic transport formulas live in the natural frame; conjugating by
    these diagonals removes the polynomially-growing frame mismatch.
    """
    r = abs(z)
    th = cmath.phase(z)
    th += round((branch_angle - th) / (2 * math.pi)) * 2 * math.pi
    wp = s ** (1.0 / 3.0) * r ** (k / 3.0) * cmath.exp(1j * th * k / 3.0)
    return np.array([1.0, 1.0 / wp, 1.0 / wp.conjugate()], dtype=complex)


def arc_unipotent_numeric(sol, k: int, s: float, theta0: float, theta1: float,
                          radius: float, n_steps: int = 0) -> np.ndarray:
    """G_{theta0}^(-1) G_{theta1} for the arc |z| = radius between the two
    angles, converging to the conjugated Stokes unipotent product as s grows.

    Computed as the osculation comparison N(t) = F_T(x(t0)) Psi_w F_T(x(t))^(-1):
    N' = N * F_T (omega_w - omega_T) F_T^(-1), integrated in the eigen-gauge
    with entrywise exponential scaling, so the dynamic range of the direct
    triple product (which loses all precision at desk scale) never appears.
    In the natural chart the connection keeps the structure-equation form with
    q = 1 and phi_w = phi - 2 log|w'|; for the constant differential the
    integrand vanishes identically.
    """
    if n_steps <= 0:
        n_steps = max(256, int(96 * abs(theta1 - theta0) * s ** (1 / 3)))
    S, S_inv = titeica_frame()
    phi_T = math.log(2.0) / 3.0
    p = (k + 3) / 3.0
    rnat = s ** (1.0 / 3.0) * (3.0 / (k + 3)) * radius ** p
    omega_phases = np.array([cmath.exp(-1j * b) for b in BETA])

    def scaled_generator(t):
        z = radius * cmath.exp(1j * t)
        wp = s ** (1.0 / 3.0) * radius ** (k / 3.0) * cmath.exp(1j * t * k / 3.0)
        x = rnat * cmath.exp(1j * p * t)
        xdot = wp * (1j * z)
        phi_w = sol.phi_at(z) - 2.0 * math.log(abs(wp))
        dphi_w = (sol.dz_phi_at(z) - (k / 3.0) / z) / wp
        dU = (structure_coefficients(phi_w, dphi_w, 1.0).U
              - structure_coefficients(phi_T, 0.0, 1.0).U)
        dV = (structure_coefficients(phi_w, dphi_w, 1.0).V
              - structure_coefficients(phi_T, 0.0, 1.0).V)
        W = dU * xdot + dV * xdot.conjugate()
        E = S_inv @ W @ S
        D = CBRT4 * (x * omega_phases).real
        return E * np.exp(D[:, None] - D[None, :])

    h = (theta1 - theta0) / n_steps
    M = np.eye(3, dtype=complex)
    for i in range(n_steps):
        t0 = theta0 + i * h
        A1 = scaled_generator(t0)
        A2 = scaled_generator(t0 + h / 2)
        A3 = A2
        A4 = scaled_generator(t0 + h)
        k1 = M @ A1
        k2 = (M + 0.5 * h * k1) @ A2
        k3 = (M + 0.5 * h * k2) @ A3
        k4 = (M + h * k3) @ A4
        M = M + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return S @ M @ S_inv


def transport_weyl_exponents(sol, path, s: float, natural: bool = True,
                             eigen_gauge: bool = True):
    """s^(-1/3)-normalized sorted log singular values of the holonomy.

    With natural=True the transport is expressed in the natural frame at the
    endpoints; eigen_gauge additionally conjugates by the Titeica eigenbasis
    S, which removes the O(log cond S)/s^(1/3) offset between singular and
    asymptotic exponents (exact for the constant differential).
    """
    xport = integrate_transport(sol, path, s)
    if natural:
        a, b = complex(path[0]), complex(path[-1])
        da = natural_frame_diag(a, sol.k, s, cmath.phase(a))
        db = natural_frame_diag(b, sol.k, s, cmath.phase(b))
        if eigen_gauge:
            S, S_inv = titeica_frame()
            A = S_inv * (1.0 / db)[None, :] @ xport.Q
            B = (xport.T * da) @ S
            vals = _log_singular_values_of_factored(A, xport.logd, B)
            vals = np.sort(vals)[::-1]
        else:
            vals = xport.log_singular_values_inverse(left_diag=db,
                                                     right_diag=da)
    else:
        vals = xport.log_singular_values_inverse()
    return vals / s ** (1.0 / 3.0)


def convergence_sweep(solutions, path_fn, period: complex, s_list):
    """Numeric-vs-tropical table over a ray sweep.

    solutions maps s to a Wang solution; path_fn(s) gives the chart polyline;
    period is the natural-chart period of the traced segment.  Rows:
    (s, numeric triple, tropical triple, relative gaps).
    """
    target = np.array(segment_exponents(period).weyl.as_tuple())
    scale = float(np.max(np.abs(target)))
    rows = []
    for s in s_list:
        sol = solutions[s] if isinstance(solutions, dict) else solutions(s)
        numeric = transport_weyl_exponents(sol, path_fn(s), s)
        gaps = np.abs(numeric - target) / scale
        rows.append({"s": s, "numeric": numeric, "tropical": target,
                     "gaps": gaps})
    return rows
