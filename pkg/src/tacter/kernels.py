"""Compiled hot path: tendon loads, the coupled/single-rod strain closures and
the Lie-group RK4 integrator.

State vector layout shared by both segment types (length 12)::

    [P (3), theta, u (3), v (3), w, beta]

On the overlap ``u, v`` are the outer tube's strains and ``w`` is the inner
tube's torsional strain; on the distal segment ``u, v`` are the inner tube's
strains, ``w`` mirrors ``u[2]`` and ``theta, beta`` are frozen. The frame that
travels alongside (``R``) is the outer tube's on the overlap and the inner
tube's beyond it.

Tendon tables are ``(k, 3)`` arrays of rows ``(x_d1, y_d2, tension)``.
"""

import numpy as np
from numba import njit

MODE_OVERLAP = 0
MODE_SINGLE = 1

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_DEGENERATE_PATH = 2

_EPS_PATH = 1e-9


@njit(cache=True)
def skew(w):
    out = np.zeros((3, 3))
    out[0, 1] = -w[2]
    out[0, 2] = w[1]
    out[1, 0] = w[2]
    out[1, 2] = -w[0]
    out[2, 0] = -w[1]
    out[2, 1] = w[0]
    return out


@njit(cache=True)
def cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def rot_d3(theta):
    c = np.cos(theta)
    s = np.sin(theta)
    out = np.zeros((3, 3))
    out[0, 0] = c
    out[0, 1] = -s
    out[1, 0] = s
    out[1, 1] = c
    out[2, 2] = 1.0
    return out


@njit(cache=True)
def expm_so3(w):
    """Rodrigues formula for ``exp(skew(w))``."""
    th2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2]
    if th2 < 1e-8:
        a = 1.0 - th2 / 6.0 + th2 * th2 / 120.0
        b = 0.5 - th2 / 24.0 + th2 * th2 / 720.0
    else:
        th = np.sqrt(th2)
        a = np.sin(th) / th
        b = (1.0 - np.cos(th)) / th2
    K = skew(w)
    return np.eye(3) + a * K + b * (K @ K)


@njit(cache=True)
def dexpinv(omega, rate):
    # truncated after the second commutator; enough for a fourth-order step
    c1 = cross(omega, rate)
    return rate + 0.5 * c1 + cross(omega, c1) / 12.0


@njit(cache=True)
def tendon_terms(u, v, tendons):
    """Affine decomposition of the summed tendon line loads.

    For each tendon ``f = W (c - [r] du + dv)`` and ``tau = [r] f``; returns
    ``(Cmu, Cmv, cm, Cfu, Cfv, cf, status)`` with ``tau = Cmu du + Cmv dv + cm``
    and ``f = Cfu du + Cfv dv + cf``.
    """
    Cmu = np.zeros((3, 3))
    Cmv = np.zeros((3, 3))
    Cfu = np.zeros((3, 3))
    Cfv = np.zeros((3, 3))
    cm = np.zeros(3)
    cf = np.zeros(3)
    status = STATUS_OK
    uh = skew(u)
    for j in range(tendons.shape[0]):
        lam = tendons[j, 2]
        if lam == 0.0:
            continue
        r = np.array([tendons[j, 0], tendons[j, 1], 0.0])
        rh = skew(r)
        pd = uh @ r + v
        nrm = np.sqrt(pd[0] ** 2 + pd[1] ** 2 + pd[2] ** 2)
        if not nrm > _EPS_PATH:
            status = STATUS_DEGENERATE_PATH
            continue
        pdh = skew(pd)
        W = (-lam / nrm**3) * (pdh @ pdh)
        c = uh @ pd
        Wc = W @ c
        Wr = W @ rh
        rW = rh @ W
        Cfu -= Wr
        Cfv += W
        cf += Wc
        Cmu -= rW @ rh
        Cmv += rW
        cm += rh @ Wc
    return Cmu, Cmv, cm, Cfu, Cfv, cf, status


@njit(cache=True)
def tube_balance(u, v, kse, kbt, tendons):
    """Affine pieces of one tube's body-frame balance equations.

    ``moment = Amu du + Amv dv + cM`` and ``force = Afu du + Afv dv + cF``
    where moment/force are ``dm + [u]m + [v]n + tau`` and ``dn + [u]n + f``
    under the linear constitutive law with straight reference strains.
    """
    Cmu, Cmv, cm, Cfu, Cfv, cf, status = tendon_terms(u, v, tendons)
    m = kbt * u
    n = kse * v
    n[2] -= kse[2]
    Amu = Cmu.copy()
    Afv = Cfv.copy()
    for i in range(3):
        Amu[i, i] += kbt[i]
        Afv[i, i] += kse[i]
    cM = cross(u, m) + cross(v, n) + cm
    cF = cross(u, n) + cf
    return Amu, Cmv, cM, Cfu, Afv, cF, status


@njit(cache=True)
def tube2_strains(u1, v1, theta, w, beta):
    Q = rot_d3(theta).T
    u2 = Q @ u1
    u2[2] = w
    v2 = beta * (Q @ v1)
    return u2, v2


@njit(cache=True)
def assemble_overlap(theta, u1, v1, w, beta, k1se, k1bt, k2se, k2bt, tendons1, tendons2):
    """Linear system ``LHS @ [du1, dv1, dw, dbeta] = RHS`` on the shared segment.

    Rows: d1,d2 of the summed moment balance; d1,d2 of the summed force
    balance; d3 moment of tube 1, of tube 2; d3 force of tube 1, of tube 2.
    Tube-2 terms are rotated into tube 1's frame before summing.
    """
    Q = rot_d3(theta).T
    Rt = Q.T
    u2, v2 = tube2_strains(u1, v1, theta, w, beta)
    dtheta = w - u1[2]
    e3 = np.array([0.0, 0.0, 1.0])
    E3h = skew(e3)

    Amu1, Amv1, cM1, Afu1, Afv1, cF1, st1 = tube_balance(u1, v1, k1se, k1bt, tendons1)
    Amu2, Amv2, cM2, Afu2, Afv2, cF2, st2 = tube_balance(u2, v2, k2se, k2bt, tendons2)

    # du2 = Bu du1 + e3 dw + bu0 ; dv2 = beta Q dv1 + (Q v1) dbeta + bv0
    Bu = Q.copy()
    Bu[2, 2] -= 1.0
    Qu1 = Q @ u1
    Qv1 = Q @ v1
    bu0 = -dtheta * (E3h @ Qu1)
    bv0 = -beta * dtheta * (E3h @ Qv1)
    Bv = beta * Q

    M1 = np.zeros((3, 8))
    F1 = np.zeros((3, 8))
    M1[:, 0:3] = Amu1
    M1[:, 3:6] = Amv1
    F1[:, 0:3] = Afu1
    F1[:, 3:6] = Afv1

    M2 = np.zeros((3, 8))
    F2 = np.zeros((3, 8))
    M2[:, 0:3] = Amu2 @ Bu
    M2[:, 3:6] = Amv2 @ Bv
    M2[:, 6] = Amu2[:, 2]
    M2[:, 7] = Amv2 @ Qv1
    F2[:, 0:3] = Afu2 @ Bu
    F2[:, 3:6] = Afv2 @ Bv
    F2[:, 6] = Afu2[:, 2]
    F2[:, 7] = Afv2 @ Qv1
    cM2 = cM2 + Amu2 @ bu0 + Amv2 @ bv0
    cF2 = cF2 + Afu2 @ bu0 + Afv2 @ bv0

    SM = M1 + Rt @ M2
    SF = F1 + Rt @ F2
    sM = cM1 + Rt @ cM2
    sF = cF1 + Rt @ cF2

    lhs = np.empty((8, 8))
    rhs = np.empty(8)
    lhs[0] = SM[0]
    lhs[1] = SM[1]
    lhs[2] = SF[0]
    lhs[3] = SF[1]
    lhs[4] = M1[2]
    lhs[5] = M2[2]
    lhs[6] = F1[2]
    lhs[7] = F2[2]
    rhs[0] = -sM[0]
    rhs[1] = -sM[1]
    rhs[2] = -sF[0]
    rhs[3] = -sF[1]
    rhs[4] = -cM1[2]
    rhs[5] = -cM2[2]
    rhs[6] = -cF1[2]
    rhs[7] = -cF2[2]
    status = st1 if st1 != STATUS_OK else st2
    return lhs, rhs, status


@njit(cache=True)
def assemble_single(u, v, kse, kbt, tendons):
    """Linear system ``LHS @ [du, dv] = RHS`` for a lone rod."""
    Amu, Amv, cM, Afu, Afv, cF, status = tube_balance(u, v, kse, kbt, tendons)
    lhs = np.empty((6, 6))
    rhs = np.empty(6)
    lhs[0:3, 0:3] = Amu
    lhs[0:3, 3:6] = Amv
    lhs[3:6, 0:3] = Afu
    lhs[3:6, 3:6] = Afv
    rhs[0:3] = -cM
    rhs[3:6] = -cF
    return lhs, rhs, status


@njit(cache=True)
def _finite(a):
    for val in a.ravel():
        if not np.isfinite(val):
            return False
    return True


@njit(cache=True)
def state_rates(x, R, mode, k1se, k1bt, k2se, k2bt, tendons1, tendons2):
    """Return ``(dx, omega, status)``: the state derivative and the body angular rate of ``R``."""
    dx = np.zeros(12)
    if not (_finite(x) and _finite(R)):
        return dx, np.zeros(3), STATUS_NONFINITE
    u = x[4:7].copy()
    v = x[7:10].copy()
    if mode == MODE_OVERLAP:
        lhs, rhs, status = assemble_overlap(x[3], u, v, x[10], x[11], k1se, k1bt, k2se, k2bt,
                                            tendons1, tendons2)
        if not (_finite(lhs) and _finite(rhs)):
            return dx, u, STATUS_NONFINITE
        sol = np.linalg.solve(lhs, rhs)
        dx[3] = x[10] - u[2]
        dx[4:10] = sol[0:6]
        dx[10] = sol[6]
        dx[11] = sol[7]
    else:
        lhs, rhs, status = assemble_single(u, v, k2se, k2bt, tendons2)
        if not (_finite(lhs) and _finite(rhs)):
            return dx, u, STATUS_NONFINITE
        sol = np.linalg.solve(lhs, rhs)
        dx[4:10] = sol
        dx[10] = sol[2]
    dx[0:3] = R @ v
    for i in range(12):
        if not np.isfinite(dx[i]):
            status = STATUS_NONFINITE
    return dx, u, status


@njit(cache=True)
def integrate_segment(x0, R0, s0, s1, nsteps, mode, k1se, k1bt, k2se, k2bt, tendons1, tendons2):
    """Fixed-step Runge-Kutta-Munthe-Kaas (order 4) over ``[s0, s1]``.

    The frame is advanced as ``R exp(Omega)`` with ``Omega`` integrated in the
    Lie algebra, so it stays on SO(3) to rounding. Returns ``(xs, Rs, status,
    fail_index)``; on failure the arrays are filled up to ``fail_index``.
    """
    xs = np.full((nsteps + 1, 12), np.nan)
    Rs = np.full((nsteps + 1, 3, 3), np.nan)
    xs[0] = x0
    Rs[0] = R0
    h = (s1 - s0) / nsteps
    for i in range(nsteps):
        x = xs[i]
        R = Rs[i]
        d1, w1, st = state_rates(x, R, mode, k1se, k1bt, k2se, k2bt, tendons1, tendons2)
        if st != STATUS_OK:
            return xs, Rs, st, i
        kx1 = h * d1
        ko1 = h * w1

        o2 = 0.5 * ko1
        d2, w2, st = state_rates(x + 0.5 * kx1, R @ expm_so3(o2), mode,
                                 k1se, k1bt, k2se, k2bt, tendons1, tendons2)
        if st != STATUS_OK:
            return xs, Rs, st, i
        kx2 = h * d2
        ko2 = h * dexpinv(o2, w2)

        o3 = 0.5 * ko2
        d3, w3, st = state_rates(x + 0.5 * kx2, R @ expm_so3(o3), mode,
                                 k1se, k1bt, k2se, k2bt, tendons1, tendons2)
        if st != STATUS_OK:
            return xs, Rs, st, i
        kx3 = h * d3
        ko3 = h * dexpinv(o3, w3)

        o4 = ko3
        d4, w4, st = state_rates(x + kx3, R @ expm_so3(o4), mode,
                                 k1se, k1bt, k2se, k2bt, tendons1, tendons2)
        if st != STATUS_OK:
            return xs, Rs, st, i
        kx4 = h * d4
        ko4 = h * dexpinv(o4, w4)

        xs[i + 1] = x + (kx1 + 2.0 * kx2 + 2.0 * kx3 + kx4) / 6.0
        Rs[i + 1] = R @ expm_so3((ko1 + 2.0 * ko2 + 2.0 * ko3 + ko4) / 6.0)
        for j in range(12):
            if not np.isfinite(xs[i + 1, j]):
                return xs, Rs, STATUS_NONFINITE, i + 1
    return xs, Rs, STATUS_OK, nsteps


@njit(cache=True)
def terminal_loads(u, v, tendons):
    """Summed tip force and moment of tendons ending here, in the body frame."""
    F = np.zeros(3)
    M = np.zeros(3)
    status = STATUS_OK
    for j in range(tendons.shape[0]):
        lam = tendons[j, 2]
        if lam == 0.0:
            continue
        r = np.array([tendons[j, 0], tendons[j, 1], 0.0])
        pd = cross(u, r) + v
        nrm = np.sqrt(pd[0] ** 2 + pd[1] ** 2 + pd[2] ** 2)
        if not nrm > _EPS_PATH:
            status = STATUS_DEGENERATE_PATH
            continue
        f = (-lam / nrm) * pd
        F += f
        M += cross(r, f)
    return F, M, status
