"""Brute-force section properties of the notched annulus by 2-D quadrature.

The retained region is ``{(x, y): r_i <= |(x, y)| <= r_o, y >= d - r_o}``.
Integration is done in polar coordinates with Gauss-Legendre rules in both
directions; the angular limits come from the chord, so no smooth-region
approximation is involved.
"""

import numpy as np

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(96)


def _gauss(a, b):
    x = 0.5 * (b - a) * _NODES + 0.5 * (a + b)
    return x, 0.5 * (b - a) * _WEIGHTS


def notched_moments(d, r_o, r_i, panels=24):
    """Return ``(area, first moment about x-axis, second moment about x-axis)``."""
    c = d - r_o
    # panel breaks where the chord meets a circle, so each panel integrand is smooth
    breaks = {r_i, r_o}
    if r_i < abs(c) < r_o:
        breaks.add(abs(c))
    edges = np.unique(np.concatenate([np.linspace(lo, hi, panels + 1)
                                      for lo, hi in zip(sorted(breaks)[:-1], sorted(breaks)[1:])]))
    A = Qx = Ix = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        rs, wr = _gauss(lo, hi)
        for r, w in zip(rs, wr):
            ratio = c / r
            if ratio >= 1.0:
                continue
            a0 = np.arcsin(max(ratio, -1.0))
            al, wa = _gauss(a0, np.pi - a0)
            y = r * np.sin(al)
            A += w * r * wa.sum()
            Qx += w * r * (wa * y).sum()
            Ix += w * r * (wa * y * y).sum()
    return A, Qx, Ix


def notched_properties(d, r_o, r_i):
    """``(A1, d_na, I1)``; ``I1`` is about the centroidal axis parallel to the chord."""
    A, Qx, Ix = notched_moments(d, r_o, r_i)
    d_na = Qx / A
    return A, d_na, Ix - A * d_na**2
