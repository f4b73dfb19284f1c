"""Shooting solution of the two-point boundary value problem.

The base strains are unknown. For a guess, the strain ODEs are integrated
from the clamped base; the mismatch between internal loads and tendon anchor
loads at the inner tip (force, moment) and at the outer tube's end (axial
force, torsion) forms the residual that damped Newton drives to zero.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels as _k
from .model import RobotModel
from .rod import ArcGrid, IntegrationError

log = logging.getLogger(__name__)

E3 = np.array([0.0, 0.0, 1.0])
_P12 = np.array([1.0, 1.0, 0.0])


@dataclass(frozen=True)
class ShootingUnknowns:
    """Base strains. For a lone inner robot ``u1_0, v1_0`` hold its own strains."""

    u1_0: np.ndarray
    v1_0: np.ndarray
    u_d3_2_0: float = 0.0
    beta_0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "u1_0", np.asarray(self.u1_0, dtype=float).reshape(3))
        object.__setattr__(self, "v1_0", np.asarray(self.v1_0, dtype=float).reshape(3))
        if not self.beta_0 > 0:
            raise ValueError("beta_0 must be positive")

    @classmethod
    def unloaded(cls) -> "ShootingUnknowns":
        return cls(np.zeros(3), E3.copy(), 0.0, 1.0)

    def as_vector(self, n: int = 8) -> np.ndarray:
        full = np.concatenate([self.u1_0, self.v1_0, [self.u_d3_2_0, self.beta_0]])
        return full[:n].copy()

    @classmethod
    def from_vector(cls, x) -> "ShootingUnknowns":
        x = np.asarray(x, dtype=float)
        if len(x) == 6:
            return cls(x[0:3], x[3:6], float(x[2]), 1.0)
        return cls(x[0:3], x[3:6], float(x[6]), float(x[7]))


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-9
    max_iter: int = 100
    max_halvings: int = 8
    fd_step: float = 1e-7
    polish: int = 3


@dataclass
class BackboneSolution:
    """Discretised shape. Rows beyond ``l1`` have NaN outer-tube entries.

    ``states`` holds the raw integrator vectors and ``segment`` marks each row
    as overlap (0) or distal (1). The node at ``l1`` carries the proximal-side
    values; ``distal_start`` holds the inner tube's state just past it.
    """

    s: np.ndarray
    P: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    theta: np.ndarray
    beta: np.ndarray
    u1: np.ndarray
    v1: np.ndarray
    u2: np.ndarray
    v2: np.ndarray
    n1: np.ndarray
    m1: np.ndarray
    n2: np.ndarray
    m2: np.ndarray
    states: np.ndarray
    segment: np.ndarray
    l1: float
    l2: float
    distal_start: np.ndarray | None = None

    @property
    def tip_position(self) -> np.ndarray:
        return self.P[-1].copy()

    @property
    def tip_rotation(self) -> np.ndarray:
        return self.R2[-1].copy()


@dataclass
class ShootingResult:
    unknowns: ShootingUnknowns
    residual_norm: float
    iterations: int
    backbone: BackboneSolution | None
    converged: bool
    residual: np.ndarray = None
    jacobian: np.ndarray | None = field(default=None, repr=False)
    jacobian_condition: float = float("nan")
    message: str = ""
    label: str | None = None
    step_index: int | None = None
    tension: float | None = None

    @property
    def tip_position(self) -> np.ndarray:
        if self.backbone is None:
            return np.full(3, np.nan)
        return self.backbone.tip_position


def _integrate(model: RobotModel, x0, R0, s0, s1, nsteps, mode):
    args = model.kernel_args()
    xs, Rs, status, idx = _k.integrate_segment(x0, R0, s0, s1, nsteps, mode, *args)
    if status != _k.STATUS_OK:
        s_fail = s0 + (s1 - s0) * idx / nsteps
        reason = "tendon path degenerated" if status == _k.STATUS_DEGENERATE_PATH else "non-finite state"
        raise IntegrationError(reason, s_fail)
    return xs, Rs


def _loads(kse, kbt, u, v):
    n = kse * v
    n[2] -= kse[2]
    return n, kbt * u


def _shoot(model: RobotModel, x, keep: bool = False):
    """Residual for unknown vector ``x``; with ``keep`` also the raw trajectories."""
    k1se, k1bt, k2se, k2bt, t1, t2 = model.kernel_args()
    P0 = model.base_position.astype(float)
    R0 = model.base_rotation.astype(float)

    if not model.has_outer:
        state0 = np.concatenate([P0, [model.theta0], x[0:3], x[3:6], [x[2], 1.0]])
        xs, Rs = _integrate(model, state0, R0 @ _k.rot_d3(model.theta0), 0.0, model.l2,
                            model.n_overlap + model.n_distal, _k.MODE_SINGLE)
        u, v = xs[-1, 4:7], xs[-1, 7:10]
        n, m = _loads(k2se, k2bt, u, v)
        F, M, _ = _k.terminal_loads(u, v, t2)
        res = np.concatenate([n - F, m - M])
        return (res, (xs, Rs, None, None, None)) if keep else res

    state0 = np.concatenate([P0, [model.theta0], x[0:3], x[3:6], [x[6], x[7]]])
    xs1, Rs1 = _integrate(model, state0, R0, 0.0, model.l1, model.n_overlap, _k.MODE_OVERLAP)
    end = xs1[-1]
    theta, u1, v1, w, beta = end[3], end[4:7], end[7:10], end[10], end[11]
    u2, v2 = _k.tube2_strains(u1, v1, theta, w, beta)
    n1, m1 = _loads(k1se, k1bt, u1, v1)
    n2, m2 = _loads(k2se, k2bt, u2, v2)
    F1, M1, _ = _k.terminal_loads(u1, v1, t1)

    # tube 1 ends here: its bending/shear load passes to tube 2, its axial/torsional load must vanish
    Q = _k.rot_d3(theta).T
    n2p = n2 + Q @ (_P12 * (n1 - F1))
    m2p = m2 + Q @ (_P12 * (m1 - M1))
    u2p = m2p / k2bt
    v2p = n2p / k2se + E3
    R2 = Rs1[-1] @ _k.rot_d3(theta)
    distal0 = np.concatenate([end[0:3], [theta], u2p, v2p, [u2p[2], beta]])
    xs2, Rs2 = _integrate(model, distal0, R2, model.l1, model.l2, model.n_distal, _k.MODE_SINGLE)

    u, v = xs2[-1, 4:7], xs2[-1, 7:10]
    n, m = _loads(k2se, k2bt, u, v)
    F2, M2, _ = _k.terminal_loads(u, v, t2)
    res = np.concatenate([n - F2, m - M2, [n1[2] - F1[2], m1[2] - M1[2]]])
    if keep:
        return res, (xs1, Rs1, xs2, Rs2, distal0)
    return res


def residual(unknowns: ShootingUnknowns, model: RobotModel) -> np.ndarray:
    """Boundary-condition violation: tip force (3), tip moment (3), then outer-end
    axial force and torsion (2, coupled robots only). Units N and N*mm."""
    x = unknowns.as_vector(model.n_unknowns)
    if not np.all(np.isfinite(x)):
        raise ValueError("unknowns must be finite")
    return _shoot(model, x)


def _build_backbone(model: RobotModel, x) -> BackboneSolution:
    _, (xs1, Rs1, xs2, Rs2, distal0) = _shoot(model, x, keep=True)
    k1se, k1bt, k2se, k2bt, _, _ = model.kernel_args()
    if model.has_outer:
        grid = ArcGrid.build(model.l1, model.l2, model.n_overlap, model.n_distal)
        states = np.vstack([xs1, xs2[1:]])
        R_track = np.concatenate([Rs1, Rs2[1:]])
        segment = np.r_[np.zeros(len(xs1), int), np.ones(len(xs2) - 1, int)]
    else:
        n = model.n_overlap + model.n_distal
        grid = ArcGrid(np.linspace(0.0, model.l2, n + 1), model.l2, model.l2)
        states, R_track = xs1, Rs1
        segment = np.ones(len(xs1), int)
    N = len(states)
    nan3 = np.full((N, 3), np.nan)
    R1 = np.full((N, 3, 3), np.nan)
    R2 = R_track.copy()
    u1, v1, n1, m1 = nan3.copy(), nan3.copy(), nan3.copy(), nan3.copy()
    u2 = states[:, 4:7].copy()
    v2 = states[:, 7:10].copy()
    for i in np.flatnonzero(segment == 0):
        th = states[i, 3]
        R1[i] = R_track[i]
        R2[i] = R_track[i] @ _k.rot_d3(th)
        u1[i], v1[i] = states[i, 4:7], states[i, 7:10]
        u2[i], v2[i] = _k.tube2_strains(u1[i], v1[i], th, states[i, 10], states[i, 11])
        n1[i], m1[i] = _loads(k1se, k1bt, u1[i].copy(), v1[i].copy())
    n2 = (v2 - E3) * k2se
    m2 = u2 * k2bt
    return BackboneSolution(
        s=grid.s, P=states[:, 0:3].copy(), R1=R1, R2=R2, theta=states[:, 3].copy(),
        beta=states[:, 11].copy(), u1=u1, v1=v1, u2=u2, v2=v2, n1=n1, m1=m1, n2=n2, m2=m2,
        states=states, segment=segment, l1=model.l1 if model.has_outer else 0.0, l2=model.l2,
        distal_start=distal0,
    )


def _safe_residual(model, x):
    try:
        r = _shoot(model, x)
    except (IntegrationError, np.linalg.LinAlgError, ZeroDivisionError):
        return None
    return r if np.all(np.isfinite(r)) else None


def fd_jacobian(model: RobotModel, x, r0=None, step: float = 1e-7, central: bool = False) -> np.ndarray:
    """Finite-difference Jacobian of the shooting residual.

    Columns whose perturbed integration fails are NaN.
    """
    x = np.asarray(x, dtype=float)
    if r0 is None and not central:
        r0 = _shoot(model, x)
    J = np.full((len(r0) if r0 is not None else model.n_unknowns, len(x)), np.nan)
    for j in range(len(x)):
        h = step * max(1.0, abs(x[j]))
        xp = x.copy()
        xp[j] += h
        rp = _safe_residual(model, xp)
        if rp is None:
            continue
        if central:
            xm = x.copy()
            xm[j] -= h
            rm = _safe_residual(model, xm)
            if rm is not None:
                J[:, j] = (rp - rm) / (2 * h)
        else:
            J[:, j] = (rp - r0) / h
    return J


def static_guess(model: RobotModel) -> ShootingUnknowns:
    """Base strains from a free-body balance of everything distal to the base.

    Every tendon passes the base, so the summed internal moment there is
    ``-sum(r x lambda t)`` and each tube's axial force is minus its own
    tendons' tension. Taking the tendon tangents along ``d3`` and sharing the
    bending moment in proportion to bending stiffness gives the estimate; it
    is exact for in-plane actuation.
    """
    k1se, k1bt, k2se, k2bt, t1, t2 = model.kernel_args()
    rot = _k.rot_d3(model.theta0)
    moment = np.zeros(3)
    for row in t1:
        moment -= row[2] * np.cross([row[0], row[1], 0.0], E3)
    for row in t2:
        moment -= row[2] * np.cross(rot @ np.array([row[0], row[1], 0.0]), E3)
    axial1 = t1[:, 2].sum()
    axial2 = t2[:, 2].sum()
    u = np.zeros(3)
    if not model.has_outer:
        # single rod: work in its own frame
        m2 = rot.T @ moment
        u[:2] = m2[:2] / k2bt[:2]
        return ShootingUnknowns(u, [0.0, 0.0, 1.0 - axial2 / k2se[2]], 0.0, 1.0)
    A = np.diag(k1bt) + rot @ np.diag(k2bt) @ rot.T
    u[:2] = np.linalg.solve(A[:2, :2], moment[:2])
    v13 = 1.0 - axial1 / k1se[2]
    v23 = 1.0 - axial2 / k2se[2]
    if not (v13 > 0 and v23 > 0):
        return ShootingUnknowns.unloaded()
    return ShootingUnknowns(u, [0.0, 0.0, v13], 0.0, v23 / v13)


def _newton(model, x, settings, J=None):
    """Damped quasi-Newton from ``x``. Returns ``(x, r, norm, J, iterations, message)``."""
    n = len(x)
    r = _safe_residual(model, x)
    if r is None:
        return x, np.full(n, np.nan), float("inf"), None, 0, "integration failed at the initial guess"
    norm = float(np.linalg.norm(r))
    fresh = False
    iterations = 0
    message = ""
    polish_left = settings.polish

    while norm > 0.0 and iterations < settings.max_iter:
        polishing = norm < settings.tol
        if polishing:
            if polish_left <= 0 or J is None:
                break
            polish_left -= 1
        if J is None:
            J = fd_jacobian(model, x, r, settings.fd_step)
            fresh = True
            if not np.all(np.isfinite(J)):
                message = "Jacobian could not be evaluated (integration failed near the iterate)"
                break
        try:
            dx = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(J, -r, rcond=None)[0]
        iterations += 1

        accepted = False
        t = 1.0
        for _ in range(settings.max_halvings + 1 if fresh else 1):
            x_new = x + t * dx
            if n == 8 and not x_new[7] > 0:
                t *= 0.5
                continue
            r_new = _safe_residual(model, x_new)
            if r_new is not None:
                norm_new = float(np.linalg.norm(r_new))
                if norm_new < (norm if fresh else 0.5 * norm):
                    accepted = True
                    break
            t *= 0.5

        if not accepted:
            if polishing:
                break
            if fresh:
                message = "line search failed to reduce the residual"
                break
            J = None
            continue
        step = x_new - x
        # Broyden rank-one update; a stale Jacobian is rebuilt once it stops paying off
        J = J + np.outer((r_new - r) - J @ step, step) / (step @ step)
        fresh = False
        x, r, norm = x_new, r_new, norm_new
    else:
        if norm >= settings.tol:
            message = "iteration cap reached"
    if norm >= settings.tol and not message:
        message = "did not converge"
    return x, r, norm, J, iterations, message


def _scaled_model(model: RobotModel, factor: float) -> RobotModel:
    def scale(routes):
        return tuple(replace(r, tension=r.tension * factor) for r in routes)
    return replace(model, outer_routes=scale(model.outer_routes), inner_routes=scale(model.inner_routes))


def solve_model(model: RobotModel, initial_guess: ShootingUnknowns | None = None,
                settings: SolverSettings | None = None, jacobian: np.ndarray | None = None,
                continuation_steps: int = 8, fallback: bool = True) -> ShootingResult:
    """Damped Newton on the shooting residual.

    Starts from ``initial_guess`` (default: :func:`static_guess`). A supplied
    ``jacobian`` is reused with Broyden updates until it stops producing good
    steps, then rebuilt by forward differences. If Newton fails, the solve is
    retried from the free-body guess and then by ramping all tensions up in
    ``continuation_steps`` stages. ``fallback=False`` disables both retries.
    """
    settings = settings or SolverSettings()
    n = model.n_unknowns
    cold = static_guess(model)
    guess = initial_guess or cold
    x, r, norm, J, iterations, message = _newton(model, guess.as_vector(n), settings, jacobian)
    total_iterations = iterations

    if norm >= settings.tol and initial_guess is not None and fallback:
        log.info("retrying from the free-body guess (%s)", message)
        x, r, norm, J, iterations, message = _newton(model, cold.as_vector(n), settings)
        total_iterations += iterations

    if norm >= settings.tol and continuation_steps > 1 and fallback:
        log.info("retrying with tension continuation (%s)", message)
        xc, Jc = None, None
        for k in range(1, continuation_steps + 1):
            stage = _scaled_model(model, k / continuation_steps)
            start = static_guess(stage).as_vector(n) if xc is None else (
                xc + static_guess(stage).as_vector(n) - static_guess(previous).as_vector(n))
            xc, rc, nc, Jc, iterations, message = _newton(stage, start, settings, Jc)
            total_iterations += iterations
            previous = stage
            if nc >= settings.tol:
                message = f"continuation stalled at stage {k}/{continuation_steps}: {message}"
                break
        else:
            x, r, norm, J = xc, rc, nc, Jc

    converged = norm < settings.tol
    unknowns = ShootingUnknowns.from_vector(x)
    try:
        backbone = _build_backbone(model, x)
    except (IntegrationError, np.linalg.LinAlgError):
        backbone = None
    cond = float(np.linalg.cond(J)) if J is not None and np.all(np.isfinite(J)) else float("nan")
    if converged:
        message = ""
    else:
        log.warning("shooting did not converge: %s (|r| = %.3g)", message, norm)
    return ShootingResult(unknowns, norm, total_iterations, backbone, converged, r, J, cond, message)


def solve(actuation, params, settings: SolverSettings | None = None,
          initial_guess: ShootingUnknowns | None = None, n_overlap: int = 200, n_distal: int = 200,
          jacobian=None) -> ShootingResult:
    model = RobotModel.build(params, actuation, n_overlap=n_overlap, n_distal=n_distal)
    return solve_model(model, initial_guess, settings, jacobian)


def _cold_solve(job):
    actuation, params, settings, n_overlap, n_distal = job
    return solve(actuation, params, settings, None, n_overlap, n_distal)


def sweep(schedule, params, settings: SolverSettings | None = None, n_overlap: int = 200,
          n_distal: int = 200, workers: int = 1) -> list[ShootingResult]:
    """Solve each actuation in order, seeding every solve with the previous solution.

    With ``workers > 1`` the poses are instead solved independently from the
    unloaded guess in a process pool (order is preserved).
    """
    schedule = list(schedule)
    if workers > 1:
        jobs = [(a, params, settings, n_overlap, n_distal) for a in schedule]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_cold_solve, jobs))
    results = []
    guess, jac, prev_model = None, None, None
    for actuation in schedule:
        try:
            model = RobotModel.build(params, actuation, n_overlap=n_overlap, n_distal=n_distal)
            start = None
            if guess is not None and prev_model is not None and prev_model.n_unknowns == model.n_unknowns:
                # predictor: shift the previous solution by the change in the free-body estimate
                n = model.n_unknowns
                vec = (guess.as_vector(n) + static_guess(model).as_vector(n)
                       - static_guess(prev_model).as_vector(n))
                if n == 6 or vec[7] > 0:
                    start = ShootingUnknowns.from_vector(vec)
            result = solve_model(model, start, settings, jac if start is not None else None)
        except (ValueError, IntegrationError) as exc:
            log.warning("sweep item failed: %s", exc)
            result = ShootingResult(guess or ShootingUnknowns.unloaded(), float("inf"), 0, None,
                                    False, message=str(exc))
        results.append(result)
        if result.converged:
            guess, jac, prev_model = result.unknowns, result.jacobian, model
    return results


def with_tags(result: ShootingResult, **tags) -> ShootingResult:
    return replace(result, **tags)
