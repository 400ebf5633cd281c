"""Independent closed-form oracles used by the tests.

Everything here is trusted algebra for the point-mass population spectrum
H = delta_c, derived from the quadratic self-consistency equation

    (c*z/gamma) m^2 - (c*(1 - 1/gamma) - z) m + 1 = 0,

solved directly with the quadratic formula.  None of it calls into the
package's solvers.
"""

from __future__ import annotations

import numpy as np


def point_mass_m(z, gamma: float, c: float = 1.0):
    """Stieltjes transform of the limiting sample law for H = delta_c,
    upper-half-plane branch of the quadratic."""
    z = np.asarray(z, dtype=complex)
    a2 = c * z / gamma
    a1 = -(c * (1.0 - 1.0 / gamma) - z)
    disc = np.sqrt(a1 * a1 - 4.0 * a2 + 0j)
    r1 = (-a1 + disc) / (2.0 * a2)
    r2 = (-a1 - disc) / (2.0 * a2)
    return np.where(r1.imag > r2.imag, r1, r2)


def point_mass_edges(gamma: float, c: float = 1.0) -> tuple[float, float]:
    """Support of the positive part of the limiting sample law."""
    r = 1.0 / np.sqrt(gamma)
    return c * (1.0 - r) ** 2, c * (1.0 + r) ** 2


def point_mass_density(lam, gamma: float, c: float = 1.0):
    """Closed-form density: sqrt((b-x)(x-a)) / (2*pi*(c/gamma)*x) on [a, b]."""
    lam = np.asarray(lam, dtype=float)
    a, b = point_mass_edges(gamma, c)
    inside = (lam > a) & (lam < b)
    out = np.zeros_like(lam)
    out[inside] = np.sqrt((b - lam[inside]) * (lam[inside] - a)) \
        / (2.0 * np.pi * (c / gamma) * lam[inside])
    return out


def point_mass_m_boundary(lam, gamma: float, c: float = 1.0):
    """Boundary values m_breve(lambda) inside the support, from the same
    quadratic with the negative discriminant written explicitly."""
    lam = np.asarray(lam, dtype=float)
    a2 = c * lam / gamma
    a1 = -(c * (1.0 - 1.0 / gamma) - lam)
    disc = a1 * a1 - 4.0 * a2
    root = np.sqrt(np.abs(disc))
    return np.where(disc <= 0,
                    (-a1 + 1j * root) / (2.0 * a2),
                    (-a1 + np.sign(a1) * root) / (2.0 * a2))


def point_mass_theta_g(z, g_at_c: float, gamma: float, c: float = 1.0):
    """Weighted functional for H = delta_c: g(c) / (c*k - z) with
    k = 1 - 1/gamma - z*m(z)/gamma."""
    z = np.asarray(z, dtype=complex)
    m = point_mass_m(z, gamma, c)
    k = 1.0 - 1.0 / gamma - z * m / gamma
    return g_at_c / (c * k - z)


def companion_zero_point_mass(gamma: float, c: float = 1.0) -> float:
    """Companion transform at zero for H = delta_c, gamma < 1: the root of
    c*m/(1 + c*m) = gamma is m = gamma / ((1 - gamma) * c)."""
    return gamma / ((1.0 - gamma) * c)
