"""Coupled two-tube equilibrium on the overlap and single-rod equilibrium beyond it.

``RobotModel`` bundles everything a solve needs: stiffnesses, tendon tables,
segment lengths, base frame and discretisation. The functions below expose
the strain closures on :class:`~tacter.rod.RodState` values; the solver itself
calls the compiled kernels directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as _k
from .geometry import CrossSection, scaled_section
from .rod import RodState, rot_d3, skew
from .tendons import INNER, OUTER, TendonRoute, route_table

E3 = np.array([0.0, 0.0, 1.0])


class ModelDegeneracyError(RuntimeError):
    def __init__(self, message: str, s: float | None = None):
        where = "" if s is None else f" at s = {s:.6g} mm"
        super().__init__(message + where)
        self.s = s


@dataclass(frozen=True)
class RobotModel:
    inner: CrossSection
    inner_routes: tuple[TendonRoute, ...]
    l1: float
    l2: float
    outer: CrossSection | None = None
    outer_routes: tuple[TendonRoute, ...] = ()
    theta0: float = 0.0
    base_rotation: np.ndarray = None
    base_position: np.ndarray = None
    n_overlap: int = 200
    n_distal: int = 200

    def __post_init__(self):
        if self.base_rotation is None:
            object.__setattr__(self, "base_rotation", np.eye(3))
        if self.base_position is None:
            object.__setattr__(self, "base_position", np.zeros(3))
        if self.has_outer and not 0 < self.l1 < self.l2:
            raise ValueError(f"need 0 < l1 < l2, got l1={self.l1}, l2={self.l2}")
        if not self.l2 > 0:
            raise ValueError("l2 must be positive")

    @classmethod
    def build(cls, params, actuation, n_overlap: int = 200, n_distal: int = 200,
              outer_stiffness_scale: float = 1.0) -> "RobotModel":
        """Model for ``params`` under ``actuation``; scale the outer stiffness to stiffen it."""
        if actuation.inner_translation > params.translation_range + 1e-12:
            raise ValueError(
                f"translation {actuation.inner_translation} mm exceeds the range "
                f"{params.translation_range} mm"
            )
        routes = params.routes(actuation)
        inner_routes = tuple(r for r in routes if r.owner == INNER)
        if actuation.include_outer:
            outer = params.outer_section()
            if outer_stiffness_scale != 1.0:
                outer = scaled_section(outer, outer_stiffness_scale)
            outer_routes = tuple(r for r in routes if r.owner == OUTER)
            l2 = params.l2(actuation.inner_translation)
        else:
            outer, outer_routes = None, ()
            l2 = params.l2_max
        return cls(
            inner=params.inner_section(), inner_routes=inner_routes,
            l1=params.l1, l2=l2, outer=outer, outer_routes=outer_routes,
            theta0=actuation.theta0, base_rotation=actuation.base_rotation,
            base_position=actuation.base_position, n_overlap=n_overlap, n_distal=n_distal,
        )

    @property
    def has_outer(self) -> bool:
        return self.outer is not None

    @property
    def n_unknowns(self) -> int:
        return 8 if self.has_outer else 6

    def kernel_args(self) -> tuple:
        """``(k1se, k1bt, k2se, k2bt, tendons1, tendons2)`` for the compiled kernels."""
        if self.has_outer:
            k1se, k1bt = np.diag(self.outer.K_se).copy(), np.diag(self.outer.K_bt).copy()
        else:
            k1se, k1bt = np.ones(3), np.ones(3)
        return (k1se, k1bt, np.diag(self.inner.K_se).copy(), np.diag(self.inner.K_bt).copy(),
                route_table(self.outer_routes), route_table(self.inner_routes))


@dataclass(frozen=True)
class CoupledDerivative:
    du1: np.ndarray
    dv1: np.ndarray
    du2: np.ndarray
    dv2: np.ndarray
    dn1: np.ndarray
    dm1: np.ndarray
    dn2: np.ndarray
    dm2: np.ndarray
    dtheta: float
    dbeta: float
    segment: str

    @property
    def du_d3_2(self) -> float:
        return float(self.du2[2])


def reconstruct_tube2_strains(u1, v1, theta, dtheta, beta, dbeta, du1, dv1, du_d3_2):
    """Inner-tube strains and their rates implied by the outer tube's.

    Bending strains are shared (rotated by the relative twist), the torsional
    strain differs by the twist rate, and the linear strain is scaled by the
    dilation ratio.
    """
    if not beta > 0:
        raise ValueError("dilation ratio must be positive")
    u1, v1, du1, dv1 = (np.asarray(a, dtype=float) for a in (u1, v1, du1, dv1))
    Q = rot_d3(theta).T
    E3h = skew(E3)
    u2 = Q @ u1 + dtheta * E3
    v2 = beta * (Q @ v1)
    du2 = (Q - np.diag([0.0, 0.0, 1.0])) @ du1 + dtheta * (E3h.T @ Q @ u1) + du_d3_2 * E3
    dv2 = dbeta * (Q @ v1) + beta * dtheta * (E3h.T @ Q @ v1) + beta * (Q @ dv1)
    return u2, v2, du2, dv2


def _split_routes(routes):
    outer = tuple(r for r in routes if r.owner == OUTER)
    inner = tuple(r for r in routes if r.owner == INNER)
    return route_table(outer), route_table(inner)


def _diag(section: CrossSection):
    return np.diag(section.K_se).copy(), np.diag(section.K_bt).copy()


def assemble_coupled_system(state: RodState, routes, sections) -> tuple[np.ndarray, np.ndarray]:
    """8x8 system for ``[du1, dv1, du_d3_2, dbeta]`` at ``state``.

    ``sections`` is ``(outer, inner)``. Raises :class:`ModelDegeneracyError`
    when the matrix is numerically singular.
    """
    outer, inner = sections
    t1, t2 = _split_routes(routes)
    k1se, k1bt = _diag(outer)
    k2se, k2bt = _diag(inner)
    lhs, rhs, status = _k.assemble_overlap(
        float(state.theta), np.asarray(state.u1, float), np.asarray(state.v1, float),
        float(state.u2[2]), float(state.beta), k1se, k1bt, k2se, k2bt, t1, t2,
    )
    if status == _k.STATUS_DEGENERATE_PATH:
        raise ModelDegeneracyError("tendon path tangent vanished", state.s)
    if not np.all(np.isfinite(lhs)) or np.linalg.cond(lhs) > 1e12:
        raise ModelDegeneracyError("coupled system is singular", state.s)
    return lhs, rhs


def single_rod_derivative(state: RodState, routes, section: CrossSection) -> tuple[np.ndarray, np.ndarray]:
    """``(du2, dv2)`` for the inner tube where it runs alone."""
    _, t2 = _split_routes(routes)
    kse, kbt = _diag(section)
    lhs, rhs, status = _k.assemble_single(np.asarray(state.u2, float), np.asarray(state.v2, float),
                                          kse, kbt, t2)
    if status == _k.STATUS_DEGENERATE_PATH:
        raise ModelDegeneracyError("tendon path tangent vanished", state.s)
    if not np.all(np.isfinite(lhs)) or np.linalg.cond(lhs) > 1e12:
        raise ModelDegeneracyError("single-rod system is singular", state.s)
    sol = np.linalg.solve(lhs, rhs)
    return sol[:3], sol[3:]


def evaluate_full_derivative(s: float, state: RodState, model: RobotModel) -> CoupledDerivative:
    """Strain rates at ``s``: coupled closure on ``[0, l1)``, single rod on ``(l1, l2]``.

    At ``s == l1`` the proximal (coupled) side is evaluated; the load jump at
    the outer anchor is applied by the shooting residual, not here.
    """
    if not 0.0 <= s <= model.l2:
        raise ValueError(f"s = {s} outside [0, {model.l2}]")
    routes = model.outer_routes + model.inner_routes
    if model.has_outer and s <= model.l1:
        lhs, rhs = assemble_coupled_system(state, routes, (model.outer, model.inner))
        sol = np.linalg.solve(lhs, rhs)
        du1, dv1, dw, dbeta = sol[0:3], sol[3:6], sol[6], sol[7]
        dtheta = state.u2[2] - state.u1[2]
        _, _, du2, dv2 = reconstruct_tube2_strains(state.u1, state.v1, state.theta, dtheta,
                                                   state.beta, dbeta, du1, dv1, dw)
        return CoupledDerivative(
            du1, dv1, du2, dv2,
            model.outer.K_se @ dv1, model.outer.K_bt @ du1,
            model.inner.K_se @ dv2, model.inner.K_bt @ du2,
            float(dtheta), float(dbeta), "overlap",
        )
    du2, dv2 = single_rod_derivative(state, routes, model.inner)
    nan = np.full(3, np.nan)
    return CoupledDerivative(nan, nan, du2, dv2, nan, nan,
                             model.inner.K_se @ dv2, model.inner.K_bt @ du2, 0.0, 0.0, "distal")
