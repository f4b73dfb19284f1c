"""Independent single-rod tendon BVP, solved by collocation (scipy.integrate.solve_bvp).

Unlike the shooting code, this works in the world frame with the loads of the
rod and its tendons taken together: cutting both at s, the part beyond s is
loaded only through the cut, so the combined force ``N`` and moment ``M`` obey
``N' = 0`` and ``M' = -p' x N`` with ``N = M = 0`` at a free tip. The rod's own
strains follow from a per-node fixed point,
``K_se (v - e3) = R^T N - sum lam t``, ``K_bt u = R^T M - sum lam r x t``
with ``t`` the unit tendon tangent in the body frame.
"""

import numpy as np
from scipy.integrate import solve_bvp

E3 = np.array([0.0, 0.0, 1.0])


def _strains(R, N, M, kse, kbt, tendons, iterations=80):
    """Body strains for stacked frames ``R`` (m,3,3) and combined loads (m,3)."""
    nb = np.einsum("mji,mj->mi", R, N)
    mb = np.einsum("mji,mj->mi", R, M)
    u = mb / kbt
    v = E3 + nb / kse
    for _ in range(iterations):
        fn, fm = np.zeros_like(nb), np.zeros_like(mb)
        for rx, ry, lam in tendons:
            r = np.array([rx, ry, 0.0])
            pd = np.cross(u, r) + v
            t = pd / np.linalg.norm(pd, axis=1, keepdims=True)
            fn += lam * t
            fm += lam * np.cross(r, t)
        u_new = (mb - fm) / kbt
        v_new = E3 + (nb - fn) / kse
        done = max(np.abs(u_new - u).max(), np.abs(v_new - v).max()) < 1e-16
        u, v = u_new, v_new
        if done:
            break
    return u, v


def _skew(w):
    out = np.zeros(w.shape[:-1] + (3, 3))
    out[..., 0, 1], out[..., 0, 2] = -w[..., 2], w[..., 1]
    out[..., 1, 0], out[..., 1, 2] = w[..., 2], -w[..., 0]
    out[..., 2, 0], out[..., 2, 1] = -w[..., 1], w[..., 0]
    return out


def solve_tendon_rod(length, kse, kbt, tendons, base_position=(0, 0, 0), base_rotation=np.eye(3),
                     nodes=41, tol=1e-10):
    """Free-tip rod clamped at its base; ``tendons`` is a list of ``(x, y, tension)``.

    Returns ``(s, P, R)`` on the collocation mesh.
    """
    kse, kbt = np.asarray(kse, float), np.asarray(kbt, float)
    p0, R0 = np.asarray(base_position, float), np.asarray(base_rotation, float)

    def fun(s, y):
        m = y.shape[1]
        R = y[3:12].T.reshape(m, 3, 3)
        N, M = y[12:15].T, y[15:18].T
        u, v = _strains(R, N, M, kse, kbt, tendons)
        dp = np.einsum("mij,mj->mi", R, v)
        dR = R @ _skew(u)
        dN = np.zeros_like(N)
        dM = -np.cross(dp, N)
        return np.vstack([dp.T, dR.reshape(m, 9).T, dN.T, dM.T])

    def bc(ya, yb):
        return np.concatenate([ya[0:3] - p0, ya[3:12] - R0.ravel(), yb[12:15], yb[15:18]])

    s = np.linspace(0.0, length, nodes)
    y = np.zeros((18, nodes))
    y[0:3] = p0[:, None] + R0[:, 2][:, None] * s
    y[3:12] = R0.ravel()[:, None]
    sol = solve_bvp(fun, bc, s, y, tol=tol, max_nodes=100000)
    if not sol.success:
        raise RuntimeError(sol.message)
    m = sol.y.shape[1]
    return sol.x, sol.y[0:3].T, sol.y[3:12].T.reshape(m, 3, 3)
