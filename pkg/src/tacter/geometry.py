"""Cross-section properties of the notched outer tube and the rod-spined inner robot.

Units are millimetres, newtons and megapascals throughout, so ``E * I`` comes
out in N*mm^2 and ``G * A`` in N.

Coordinate convention for the outer tube: the notch is cut from the ``-y``
side to depth ``d``; the remaining material (the spine) is everything with
``y > d - r_o``. All offsets reported here are measured from the tube axis
toward the spine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class GeometryError(ValueError):
    """Raised when design parameters do not describe a valid cross-section."""


@dataclass(frozen=True)
class OuterTubeSpec:
    notch_depth: float
    notch_spacing: float
    notch_width: float
    outer_radius: float
    inner_radius: float
    tendon_radius: float
    elastic_modulus: float
    shear_modulus: float

    def __post_init__(self):
        for name in ("notch_depth", "notch_spacing", "notch_width", "outer_radius",
                     "inner_radius", "elastic_modulus", "shear_modulus"):
            if not getattr(self, name) > 0:
                raise GeometryError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.tendon_radius < 0:
            raise GeometryError("tendon_radius must be non-negative")
        if not self.inner_radius < self.outer_radius:
            raise GeometryError("inner_radius must be smaller than outer_radius")


@dataclass(frozen=True)
class InnerRobotSpec:
    rod_radius: float
    outer_radius: float
    inner_radius: float
    tendon_radius: float
    tendon_arm: float
    elastic_modulus: float
    shear_modulus: float

    def __post_init__(self):
        for name in ("rod_radius", "outer_radius", "inner_radius", "tendon_arm",
                     "elastic_modulus", "shear_modulus"):
            if not getattr(self, name) > 0:
                raise GeometryError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.tendon_radius < 0:
            raise GeometryError("tendon_radius must be non-negative")
        if not self.inner_radius < self.outer_radius:
            raise GeometryError("inner_radius must be smaller than outer_radius")


@dataclass(frozen=True)
class CrossSection:
    area: float
    second_moment_d1: float
    second_moment_d2: float
    polar_moment: float
    neutral_axis_offset: float
    tendon_arm: float
    K_se: np.ndarray
    K_bt: np.ndarray

    @property
    def bending_stiffness(self) -> float:
        return float(self.K_bt[0, 0])


def _segment_angle(offset: float, radius: float) -> float:
    # a chord beyond the circle keeps none of it, one behind it keeps all of it
    return 2.0 * math.acos(min(1.0, max(-1.0, offset / radius)))


def outer_segment_areas(spec: OuterTubeSpec) -> tuple[float, float, float, float, float]:
    """Areas left standing at a notch.

    Returns ``(A_out, A_in, A1, phi_o, phi_i)``: the circular segments cut off
    by the notch chord from the outer disc and from the bore, their
    difference, and the two central angles.
    """
    chord = spec.notch_depth - spec.outer_radius
    if not abs(chord) < spec.outer_radius:
        raise GeometryError(f"notch depth {spec.notch_depth!r} mm must lie strictly inside (0, 2*outer_radius)")
    phi_o = _segment_angle(chord, spec.outer_radius)
    phi_i = _segment_angle(chord, spec.inner_radius)
    a_out = 0.5 * spec.outer_radius**2 * (phi_o - math.sin(phi_o))
    a_in = 0.5 * spec.inner_radius**2 * (phi_i - math.sin(phi_i))
    area = a_out - a_in
    if not area > 0:
        raise GeometryError(f"notch leaves no material (A1 = {area:.3g} mm^2)")
    return a_out, a_in, area, phi_o, phi_i


def _segment_first_moment(radius: float, phi: float) -> float:
    # area times centroid offset of a circular segment: (2/3) r^3 sin^3(phi/2)
    return 2.0 * radius**3 * math.sin(0.5 * phi) ** 3 / 3.0


def outer_neutral_axis(spec: OuterTubeSpec) -> float:
    """Offset ``d_na`` of the notched section's centroid from the tube axis."""
    if spec.notch_depth <= spec.outer_radius - spec.inner_radius:
        raise GeometryError("notch does not reach the bore; the section is a closed annulus")
    _, _, area, phi_o, phi_i = outer_segment_areas(spec)
    return (_segment_first_moment(spec.outer_radius, phi_o)
            - _segment_first_moment(spec.inner_radius, phi_i)) / area


def _segment_second_moment(radius: float, phi: float) -> float:
    # about the diameter parallel to the chord
    return radius**4 / 8.0 * (phi - math.sin(phi) + 2.0 * math.sin(phi) * math.sin(0.5 * phi) ** 2)


def outer_second_moment(spec: OuterTubeSpec) -> tuple[float, float]:
    """Return ``(I_na, I1)``.

    ``I_na`` is taken about the tube's diametral axis parallel to the notch
    chord; ``I1 = I_na - A1 * d_na**2`` is the bending second moment about the
    section centroid.
    """
    _, _, area, phi_o, phi_i = outer_segment_areas(spec)
    d_na = outer_neutral_axis(spec)
    i_na = (_segment_second_moment(spec.outer_radius, phi_o)
            - _segment_second_moment(spec.inner_radius, phi_i))
    i1 = i_na - area * d_na**2
    if not i1 > 0:
        raise GeometryError(f"non-positive centroidal second moment ({i1:.3g} mm^4)")
    return i_na, i1


def outer_moment_arm(spec: OuterTubeSpec, d_na: float) -> float:
    """Tendon offset from the neutral axis; the tendon rides the bore wall opposite the spine."""
    return d_na + spec.inner_radius - spec.tendon_radius


def build_stiffness(A, I_d1, I_d2, J, E, G) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal shear/extension and bending/torsion stiffness matrices."""
    values = dict(A=A, I_d1=I_d1, I_d2=I_d2, J=J, E=E, G=G)
    for name, value in values.items():
        if not value > 0:
            raise GeometryError(f"{name} must be positive, got {value!r}")
    K_se = np.diag([G * A, G * A, E * A]).astype(float)
    K_bt = np.diag([E * I_d1, E * I_d2, G * J]).astype(float)
    return K_se, K_bt


def outer_section(spec: OuterTubeSpec, tendon_arm: float | None = None) -> CrossSection:
    """Full constitutive description of the notched tube.

    Bending is treated as isotropic (``I_d1 = I_d2 = I1``) and the torsional
    constant as ``J = I_d1 + I_d2``. ``tendon_arm`` overrides the computed
    moment arm when given.
    """
    _, _, area, _, _ = outer_segment_areas(spec)
    d_na = outer_neutral_axis(spec)
    _, i1 = outer_second_moment(spec)
    arm = outer_moment_arm(spec, d_na) if tendon_arm is None else float(tendon_arm)
    if not arm > 0:
        raise GeometryError("outer tendon arm must be positive")
    K_se, K_bt = build_stiffness(area, i1, i1, 2.0 * i1, spec.elastic_modulus, spec.shear_modulus)
    return CrossSection(area, i1, i1, 2.0 * i1, d_na, arm, K_se, K_bt)


def inner_section(spec: InnerRobotSpec) -> CrossSection:
    """Two spine rods carry all the stiffness; the printed segments are ignored."""
    r = spec.rod_radius
    if not r > 0:
        raise GeometryError("rod_radius must be positive")
    area = 2.0 * math.pi * r**2
    i2 = math.pi * r**4 / 2.0
    K_se, K_bt = build_stiffness(area, i2, i2, 2.0 * i2, spec.elastic_modulus, spec.shear_modulus)
    return CrossSection(area, i2, i2, 2.0 * i2, 0.0, spec.tendon_arm, K_se, K_bt)


def scaled_section(section: CrossSection, factor: float) -> CrossSection:
    """Copy of ``section`` with both stiffness matrices multiplied by ``factor``."""
    return CrossSection(
        section.area, section.second_moment_d1, section.second_moment_d2, section.polar_moment,
        section.neutral_axis_offset, section.tendon_arm,
        section.K_se * factor, section.K_bt * factor,
    )
