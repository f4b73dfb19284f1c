"""Tendon line loads, tip point loads and the jump they cause in internal loads.

Everything is expressed in the body frame of the tube that carries the tendon.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rod import skew


class DegeneratePathError(ValueError):
    """The tendon's path tangent vanished."""


OUTER = "outer"
INNER = "inner"


@dataclass(frozen=True)
class TendonRoute:
    """A tendon held at a fixed body-frame offset ``(x_d1, y_d2)`` from the neutral axis."""

    offset: tuple[float, float]
    tension: float
    owner: str
    termination_s: float

    def __post_init__(self):
        if self.tension < 0:
            raise ValueError("tendon tension must be non-negative")
        if self.owner not in (OUTER, INNER):
            raise ValueError(f"owner must be {OUTER!r} or {INNER!r}")

    @property
    def r_arm(self) -> np.ndarray:
        return np.array([self.offset[0], self.offset[1], 0.0])


@dataclass(frozen=True)
class DistributedWrench:
    f: np.ndarray
    tau: np.ndarray


def tendon_path_derivatives(u, v, du, dv, route: TendonRoute) -> tuple[np.ndarray, np.ndarray]:
    """First and second arc-length derivatives of the tendon path (body-frame components)."""
    u, v, du, dv = (np.asarray(a, dtype=float) for a in (u, v, du, dv))
    r = route.r_arm
    p1 = np.cross(u, r) + v
    p2 = np.cross(u, p1) - np.cross(r, du) + dv
    return p1, p2


def distributed_wrench(route: TendonRoute, p1, p2) -> DistributedWrench:
    """Force and moment per unit length pressed onto the tube by a curved tendon.

    The force is the tension times the curvature vector of the tendon path;
    the moment is that force acting at the tendon offset.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    norm = np.linalg.norm(p1)
    if not norm > 1e-9:
        raise DegeneratePathError("tendon path tangent is zero")
    P = skew(p1)
    f = -route.tension * (P @ P @ p2) / norm**3
    tau = np.cross(route.r_arm, f)
    return DistributedWrench(f, tau)


def terminal_wrench(route: TendonRoute, p1_tip) -> tuple[np.ndarray, np.ndarray]:
    """Point force and moment where the tendon is anchored."""
    p1_tip = np.asarray(p1_tip, dtype=float)
    norm = np.linalg.norm(p1_tip)
    if not norm > 1e-9:
        raise DegeneratePathError("tendon path tangent is zero at its anchor")
    F = -route.tension * p1_tip / norm
    return F, np.cross(route.r_arm, F)


def apply_termination_jump(n_after, m_after, F_tip, M_tip) -> tuple[np.ndarray, np.ndarray]:
    """Internal loads just proximal to an anchor, given those just distal to it."""
    return (np.asarray(n_after, dtype=float) + np.asarray(F_tip, dtype=float),
            np.asarray(m_after, dtype=float) + np.asarray(M_tip, dtype=float))


def route_table(routes) -> np.ndarray:
    """Pack routes into the ``(k, 3)`` array the compiled kernels consume."""
    rows = [(r.offset[0], r.offset[1], r.tension) for r in routes]
    return np.array(rows, dtype=float).reshape(-1, 3)
