"""Asymptotically optimal nonlinear bias corrections for sample eigenvalues.

delta(lambda) is the limit of u_i* Sigma u_i paired with the sample eigenvalue
lambda: the value the eigenvalue should be replaced with to get closest (in
Frobenius norm) to the population covariance while keeping sample
eigenvectors.  psi(lambda) is the analogous limit of u_i* Sigma^{-1} u_i for
the inverse.  Both are explicit in m_breve:

    delta(lambda) = lambda / |1 - 1/gamma - lambda*m_breve(lambda)/gamma|^2
    psi(lambda)   = (1 - 1/gamma - 2*lambda*Re[m_breve(lambda)]/gamma) / lambda

with separate zero-eigenvalue values when gamma < 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectrum as spectrum_mod
from .errors import DegenerateSpan, GammaOne
from .spectrum import PopulationSpectrum
from .stieltjes import StieltjesSolution


def _check_gamma(solution: StieltjesSolution) -> None:
    if solution.gamma == 1:
        raise GammaOne("shrinkage formulas are undefined at gamma = 1")


def _m_lookup(lam: np.ndarray, solution: StieltjesSolution) -> np.ndarray:
    """m_breve at lam, moving out-of-support points to the nearest edge.

    The limit formulas are only meaningful on Supp(F); finite-N eigenvalues
    that fluctuate outside use the nearest in-support value.
    """
    if solution.support:
        looked, _ = solution.clip_to_support(lam)
    else:
        looked = lam
    return solution.m_at(looked)


def delta(lam, solution: StieltjesSolution):
    """Covariance bias correction delta(lambda); scalar or array lambda."""
    _check_gamma(solution)
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    out = np.zeros(lam_arr.shape)
    pos = lam_arr > 0
    if pos.any():
        g = solution.gamma
        m = _m_lookup(lam_arr[pos], solution)
        k = 1.0 - 1.0 / g - lam_arr[pos] * m / g
        out[pos] = lam_arr[pos] / np.abs(k) ** 2
    zero = lam_arr == 0
    if zero.any() and solution.gamma < 1:
        out[zero] = delta_zero(solution)
    return out if np.ndim(lam) else float(out[0])


def delta_zero(solution: StieltjesSolution) -> float:
    """delta(0) = gamma / ((1-gamma) * m_under(0)) for gamma < 1."""
    _check_gamma(solution)
    if solution.gamma > 1:
        return 0.0
    g = solution.gamma
    return g / ((1.0 - g) * solution.m_under_zero)


def psi(lam, solution: StieltjesSolution, spec: PopulationSpectrum):
    """Inverse-covariance bias correction psi(lambda)."""
    _check_gamma(solution)
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    out = np.zeros(lam_arr.shape)
    pos = lam_arr > 0
    if pos.any():
        g = solution.gamma
        m = _m_lookup(lam_arr[pos], solution)
        out[pos] = (1.0 - 1.0 / g - 2.0 / g * lam_arr[pos] * m.real) / lam_arr[pos]
    zero = lam_arr == 0
    if zero.any() and solution.gamma < 1:
        out[zero] = psi_zero(solution, spec)
    return out if np.ndim(lam) else float(out[0])


def psi_zero(solution: StieltjesSolution, spec: PopulationSpectrum) -> float:
    """psi(0) = m_H(0)/(1-gamma) - m_under(0) for gamma < 1."""
    _check_gamma(solution)
    if solution.gamma > 1:
        return 0.0
    g = solution.gamma
    return spectrum_mod.m_H_at_zero(spec) / (1.0 - g) - solution.m_under_zero


def shrink_spectrum(sample_eigs, solution: StieltjesSolution, *,
                    zero_tol: float = 1e-12) -> np.ndarray:
    """Map sample eigenvalues through the covariance correction.

    lambda_i > 0 -> lambda_i / |1 - 1/gamma - lambda_i*m_breve(lambda_i)/gamma|^2;
    eigenvalues at zero (within zero_tol * max) map to delta(0) when gamma < 1.
    Output order matches input order.
    """
    _check_gamma(solution)
    eigs = np.asarray(sample_eigs, dtype=float)
    if np.any(eigs < -zero_tol * max(1.0, np.abs(eigs).max(initial=0.0))):
        raise ValueError("sample eigenvalues must be >= 0")
    thresh = zero_tol * max(1.0, eigs.max(initial=0.0))
    out = np.zeros(eigs.shape)
    pos = eigs > thresh
    if pos.any():
        g = solution.gamma
        m = _m_lookup(eigs[pos], solution)
        k = 1.0 - 1.0 / g - eigs[pos] * m / g
        out[pos] = eigs[pos] / np.abs(k) ** 2
    if (~pos).any() and solution.gamma < 1:
        out[~pos] = delta_zero(solution)
    return out


def shrink_inverse_spectrum(sample_eigs, solution: StieltjesSolution,
                            spec: PopulationSpectrum, *,
                            zero_tol: float = 1e-12) -> np.ndarray:
    """Map sample eigenvalues to corrected inverse-covariance eigenvalues:
    (1/lambda_i) * (1 - 1/gamma - 2*lambda_i*Re[m_breve(lambda_i)]/gamma),
    with psi(0) for the zero eigenvalues when gamma < 1."""
    _check_gamma(solution)
    eigs = np.asarray(sample_eigs, dtype=float)
    thresh = zero_tol * max(1.0, eigs.max(initial=0.0))
    out = np.zeros(eigs.shape)
    pos = eigs > thresh
    if pos.any():
        g = solution.gamma
        m = _m_lookup(eigs[pos], solution)
        out[pos] = (1.0 - 1.0 / g - 2.0 / g * eigs[pos] * m.real) / eigs[pos]
    if (~pos).any() and solution.gamma < 1:
        out[~pos] = psi_zero(solution, spec)
    return out


def linear_shrinkage_oracle(sample_eigs, trace_sigma: float,
                            trace_s_sigma: float) -> np.ndarray:
    """Eigenvalues of the Frobenius projection of Sigma onto span{I, S}.

    Needs only Tr(Sigma) and Tr(S*Sigma) from the oracle side; the projection
    a*I + b*S shares the sample eigenvectors, so its eigenvalues are
    a + b*lambda_i.  A degenerate span (S proportional to I) falls back to the
    least-norm solution, which projects onto span{I}.
    """
    eigs = np.asarray(sample_eigs, dtype=float)
    n = len(eigs)
    if n == 0:
        raise DegenerateSpan("no eigenvalues supplied")
    gram = np.array([[float(n), float(eigs.sum())],
                     [float(eigs.sum()), float(np.sum(eigs ** 2))]])
    rhs = np.array([float(trace_sigma), float(trace_s_sigma)])
    if not np.all(np.isfinite(gram)) or not np.all(np.isfinite(rhs)):
        raise DegenerateSpan("non-finite trace statistics")
    coef, *_ = np.linalg.lstsq(gram, rhs, rcond=None)
    a, b = coef
    return a + b * eigs


def linear_shrinkage_limit(spec: PopulationSpectrum, gamma: float
                           ) -> tuple[float, float]:
    """Large-N limit of the oracle linear projection coefficients (a, b).

    Normal equations with limiting moments: mean sample eigenvalue mu1,
    mean square mu2 + mu1^2/gamma, and cross term mu2.
    """
    mu1 = spectrum_mod.moment(spec, 1)
    mu2 = spectrum_mod.moment(spec, 2)
    gram = np.array([[1.0, mu1], [mu1, mu2 + mu1 * mu1 / gamma]])
    rhs = np.array([mu1, mu2])
    coef, *_ = np.linalg.lstsq(gram, rhs, rcond=None)
    return float(coef[0]), float(coef[1])


@dataclass
class ShrinkageCurve:
    """delta and psi tabulated on a lambda grid, plus the zero-eigenvalue
    values when gamma < 1."""

    lambda_grid: np.ndarray
    delta: np.ndarray
    psi: np.ndarray
    delta_zero: float | None
    psi_zero: float | None
    gamma: float


def build_shrinkage_curve(solution: StieltjesSolution, spec: PopulationSpectrum,
                          lambda_grid=None) -> ShrinkageCurve:
    if lambda_grid is None:
        lambda_grid = solution.grid
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    d0 = delta_zero(solution) if solution.gamma < 1 else None
    p0 = psi_zero(solution, spec) if solution.gamma < 1 else None
    return ShrinkageCurve(
        lambda_grid=lambda_grid,
        delta=delta(lambda_grid, solution),
        psi=psi(lambda_grid, solution, spec),
        delta_zero=d0, psi_zero=p0, gamma=solution.gamma)


def delta_cumulative(xs, solution: StieltjesSolution):
    """The nondecreasing limit curve x -> integral of delta over dF up to x."""
    lam = solution.grid
    w = delta(lam, solution) * solution.density
    cum = np.concatenate([[0.0],
                          np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(lam))])
    xs_arr = np.asarray(xs, dtype=float)
    out = np.interp(xs_arr, lam, cum)
    out = np.where(xs_arr < lam[0], 0.0, out)
    if solution.gamma < 1:
        out = out + (xs_arr >= 0) * (1.0 - solution.gamma) * delta_zero(solution)
    return out if np.ndim(xs) else float(out)


def psi_cumulative(xs, solution: StieltjesSolution,
                   spec: PopulationSpectrum):
    """The limit curve x -> integral of psi over dF up to x."""
    lam = solution.grid
    w = psi(lam, solution, spec) * solution.density
    cum = np.concatenate([[0.0],
                          np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(lam))])
    xs_arr = np.asarray(xs, dtype=float)
    out = np.interp(xs_arr, lam, cum)
    out = np.where(xs_arr < lam[0], 0.0, out)
    if solution.gamma < 1:
        out = out + (xs_arr >= 0) * (1.0 - solution.gamma) * psi_zero(solution,
                                                                      spec)
    return out if np.ndim(xs) else float(out)


def moment_residuals(solution: StieltjesSolution, spec: PopulationSpectrum
                     ) -> tuple[float, float]:
    """Conservation gaps (covariance, inverse): the F-integral of each
    correction curve (plus the zero atom) must reproduce the H-moments."""
    lam = solution.grid
    dens = solution.density
    d_curve = delta(lam, solution)
    p_curve = psi(lam, solution, spec)
    cov = np.trapezoid(d_curve * dens, lam)
    inv = np.trapezoid(p_curve * dens, lam)
    if solution.gamma < 1:
        cov += (1.0 - solution.gamma) * delta_zero(solution)
        inv += (1.0 - solution.gamma) * psi_zero(solution, spec)
    return (float(cov - spectrum_mod.moment(spec, 1)),
            float(inv - spectrum_mod.moment(spec, -1)))
