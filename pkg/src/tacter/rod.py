"""Rod kinematics: state containers, SO(3) helpers and the Lie-group RK4 step."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels as _k


class IntegrationError(RuntimeError):
    """Integration produced a non-finite value; ``s`` is where it happened."""

    def __init__(self, message: str, s: float):
        super().__init__(f"{message} at s = {s:.6g} mm")
        self.s = s


def skew(w) -> np.ndarray:
    return _k.skew(np.asarray(w, dtype=float))


def rot_d3(theta: float) -> np.ndarray:
    """Rotation by ``theta`` about the third director."""
    return _k.rot_d3(float(theta))


def expm_so3(w) -> np.ndarray:
    return _k.expm_so3(np.asarray(w, dtype=float))


@dataclass(frozen=True)
class RodState:
    """Everything known about both tubes at one arc-length station.

    Beyond the outer tube's end ``R1``, ``u1``, ``v1``, ``n1`` and ``m1`` are NaN.
    """

    s: float
    P: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    theta: float
    beta: float


@dataclass(frozen=True)
class ArcGrid:
    """Fixed-step arc-length grid with a node exactly at the outer tube's end."""

    s: np.ndarray
    l1: float
    l2: float

    @classmethod
    def build(cls, l1: float, l2: float, n_overlap: int = 200, n_distal: int = 200) -> "ArcGrid":
        if not 0 < l1 <= l2:
            raise ValueError(f"need 0 < l1 <= l2, got l1={l1}, l2={l2}")
        first = np.linspace(0.0, l1, n_overlap + 1)
        if l2 > l1:
            second = np.linspace(l1, l2, n_distal + 1)[1:]
            s = np.concatenate([first, second])
        else:
            s = first
        s[n_overlap] = l1
        return cls(s, l1, l2)

    @property
    def l1_index(self) -> int:
        return int(np.flatnonzero(self.s == self.l1)[0])


@dataclass(frozen=True)
class FramedState:
    """A frame ``R`` at position ``P`` plus any scalar/vector payload ``y``."""

    R: np.ndarray
    P: np.ndarray
    y: np.ndarray


RateFn = Callable[[FramedState], tuple]


def integrate_step(state: FramedState, derivative_fn: RateFn, ds: float) -> FramedState:
    """One fourth-order Runge-Kutta-Munthe-Kaas step.

    ``derivative_fn(state)`` returns ``(u, v, dy)``: body angular rate, body
    linear rate (so ``dP = R v``) and the payload derivative. ``R`` advances by
    the exponential map, so no re-orthonormalisation is needed.
    """
    if not ds > 0:
        raise ValueError("ds must be positive")

    def rates(omega_acc, P, y):
        probe = FramedState(state.R @ _k.expm_so3(omega_acc), P, y)
        u, v, dy = derivative_fn(probe)
        u = np.asarray(u, dtype=float)
        dP = probe.R @ np.asarray(v, dtype=float)
        dy = np.asarray(dy, dtype=float)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(dP)) and np.all(np.isfinite(dy))):
            raise IntegrationError("non-finite derivative", float("nan"))
        return _k.dexpinv(omega_acc, u), dP, dy

    zero = np.zeros(3)
    ko1, kp1, ky1 = (ds * a for a in rates(zero, state.P, state.y))
    ko2, kp2, ky2 = (ds * a for a in rates(0.5 * ko1, state.P + 0.5 * kp1, state.y + 0.5 * ky1))
    ko3, kp3, ky3 = (ds * a for a in rates(0.5 * ko2, state.P + 0.5 * kp2, state.y + 0.5 * ky2))
    ko4, kp4, ky4 = (ds * a for a in rates(ko3, state.P + kp3, state.y + ky3))
    omega = (ko1 + 2 * ko2 + 2 * ko3 + ko4) / 6.0
    return FramedState(
        state.R @ _k.expm_so3(omega),
        state.P + (kp1 + 2 * kp2 + 2 * kp3 + kp4) / 6.0,
        state.y + (ky1 + 2 * ky2 + 2 * ky3 + ky4) / 6.0,
    )


def orthonormality_drift(R: np.ndarray) -> float:
    """Frobenius norm of ``R^T R - I`` (max over a stack)."""
    R = np.asarray(R)
    if R.ndim == 2:
        R = R[None]
    R = R[np.all(np.isfinite(R), axis=(1, 2))]
    if len(R) == 0:
        return 0.0
    gram = np.einsum("nji,njk->nik", R, R) - np.eye(3)
    return float(np.max(np.linalg.norm(gram, axis=(1, 2))))
