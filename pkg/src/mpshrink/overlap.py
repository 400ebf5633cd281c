"""Limiting sample/population eigenvector overlap kernel.

phi(l, t) is the limiting density of N |u_i* v_j|^2 indexed by the sample
eigenvalue l and the population eigenvalue t.  For l > 0,

    phi(l, t) = (l*t/gamma) / ((a*t - l)^2 + b^2 * t^2),

where a + i*b = 1 - 1/gamma - l*m_breve(l)/gamma.  For gamma < 1 the sample
spectrum has an atom at zero whose eigenvectors carry the separate branch
phi(0, t) = 1/((1-gamma)*(1 + mu0*t)) with mu0 the companion transform at 0.

Phi(lambda, tau) is the double integral of phi against dH(t) dF(l), including
the zero atom of F when gamma < 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectrum as spectrum_mod
from .errors import EmptyBin, GammaOne, ZeroBranchUnavailable
from .spectrum import PopulationSpectrum, quadrature_nodes
from .stieltjes import StieltjesSolution

_B_CROSSCHECK_TOL = 1e-6


def _a_b(l: float, solution: StieltjesSolution) -> tuple[float, float]:
    """Real/imaginary part of 1 - 1/gamma - l*m_breve(l)/gamma at l."""
    g = solution.gamma
    k = 1.0 - 1.0 / g - l * solution.m_at(l) / g
    return float(k.real), float(k.imag)


def b_consistency_gap(l: float, solution: StieltjesSolution) -> float:
    """|b - (-pi * l * F'(l) / gamma)|; a large gap flags a solver fault."""
    _, b = _a_b(l, solution)
    return abs(b - (-np.pi / solution.gamma * l * solution.density_at(l)))


def phi(l: float, t, solution: StieltjesSolution,
        spec: PopulationSpectrum):
    """Overlap kernel at sample eigenvalue l and population eigenvalue(s) t."""
    if solution.gamma == 1:
        raise GammaOne("phi is undefined at gamma = 1")
    t_arr = np.asarray(t, dtype=float)
    if l < 0:
        out = np.zeros_like(t_arr)
        return out if np.ndim(t) else 0.0
    if l == 0:
        if solution.gamma > 1:
            raise ZeroBranchUnavailable("l = 0 branch requires gamma < 1")
        mu0 = solution.m_under_zero
        out = 1.0 / ((1.0 - solution.gamma) * (1.0 + mu0 * t_arr))
        return out if np.ndim(t) else float(out)
    a, b = _a_b(l, solution)
    den = (a * t_arr - l) ** 2 + b * b * t_arr ** 2
    # exactly at a support edge b -> 0 while a*t - l can cross zero; the
    # kernel concentrates there and the denominator is floored to keep the
    # point evaluation finite (integrals against dF are unaffected)
    out = (l / solution.gamma) * t_arr / np.maximum(den, 1e-300)
    return out if np.ndim(t) else float(out)


def phi_h_integral(l: float, solution: StieltjesSolution,
                   spec: PopulationSpectrum) -> float:
    """Integral of phi(l, t) over dH(t); equals 1 on the support of F."""
    taus, ws = quadrature_nodes(spec)
    return float(np.sum(ws * phi(l, taus, solution, spec)))


def _partial_h_nodes(spec: PopulationSpectrum, tau: float):
    """Quadrature nodes for integration against dH restricted to t <= tau."""
    taus, ws = quadrature_nodes(spec, (tau,))
    keep = taus <= tau
    return taus[keep], ws[keep]


def phi_cumulative(lam: float, tau: float, solution: StieltjesSolution,
                   spec: PopulationSpectrum) -> float:
    """Phi(lambda, tau): cumulative overlap mass, a bivariate c.d.f."""
    if solution.gamma == 1:
        raise GammaOne("Phi is undefined at gamma = 1")
    if tau < spec.h1 or lam < 0:
        return 0.0
    t_nodes, t_ws = _partial_h_nodes(spec, tau)
    total = 0.0
    if solution.gamma < 1 and lam >= 0:
        mu0 = solution.m_under_zero
        # (1-gamma) * integral of phi(0, t) dH = integral of dH/(1+mu0*t)
        total += float(np.sum(t_ws / (1.0 + mu0 * t_nodes)))
    grid = solution.grid
    if lam >= grid[0] and t_nodes.size:
        hi = min(lam, grid[-1])
        idx = np.searchsorted(grid, hi, side="right")
        xs = np.concatenate([grid[:idx], [hi]]) if idx < len(grid) else grid
        g = solution.gamma
        k = 1.0 - 1.0 / g - xs * solution.m_at(xs) / g
        a, b = k.real, k.imag
        dens = solution.density_at(xs)
        # inner integral over t for every grid l at once
        num = (xs / g)[None, :] * t_nodes[:, None]
        den = (a[None, :] * t_nodes[:, None] - xs[None, :]) ** 2 \
            + (b[None, :] ** 2) * t_nodes[:, None] ** 2
        inner = np.sum(t_ws[:, None] * num / np.maximum(den, 1e-300), axis=0)
        total += float(np.trapezoid(inner * dens, xs))
    return total


def cdf_f(lam: float, solution: StieltjesSolution) -> float:
    return float(solution.cdf(lam))


def average_overlap(lambda_lo: float, lambda_hi: float, tau_lo: float,
                    tau_hi: float, solution: StieltjesSolution,
                    spec: PopulationSpectrum) -> float:
    """Limiting mean of N |u_i* v_j|^2 over the rectangle of eigenvalue bins.

    Ratio of the Phi increment over the product of the marginal increments;
    raises EmptyBin when either marginal mass vanishes.
    """
    f_mass = solution.cdf(lambda_hi) - solution.cdf(lambda_lo)
    h_mass = spectrum_mod.cdf(spec, tau_hi) - spectrum_mod.cdf(spec, tau_lo)
    if f_mass <= 1e-12 or h_mass <= 1e-12:
        raise EmptyBin(
            f"marginal masses F:{f_mass:.3e} H:{h_mass:.3e} not positive")
    num = (phi_cumulative(lambda_hi, tau_hi, solution, spec)
           - phi_cumulative(lambda_hi, tau_lo, solution, spec)
           - phi_cumulative(lambda_lo, tau_hi, solution, spec)
           + phi_cumulative(lambda_lo, tau_lo, solution, spec))
    return num / (f_mass * h_mass)


@dataclass
class OverlapKernel:
    """phi sampled on a rectangular (l, t) grid, with the per-l kernel pair
    (a, b) retained for diagnostics."""

    l_grid: np.ndarray
    t_grid: np.ndarray
    values: np.ndarray  # shape (len(l_grid), len(t_grid))
    gamma: float
    a_b: np.ndarray     # shape (len(l_grid), 2)


def build_overlap_kernel(solution: StieltjesSolution, spec: PopulationSpectrum,
                         l_grid, t_grid) -> OverlapKernel:
    l_grid = np.asarray(l_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    values = np.empty((len(l_grid), len(t_grid)))
    ab = np.empty((len(l_grid), 2))
    for i, l in enumerate(l_grid):
        values[i] = phi(l, t_grid, solution, spec)
        ab[i] = _a_b(l, solution) if l > 0 else (np.nan, np.nan)
    return OverlapKernel(l_grid=l_grid, t_grid=t_grid, values=values,
                         gamma=solution.gamma, a_b=ab)
