"""Self-consistent Stieltjes transform of the limiting sample spectral law.

Solves, for z in the upper half plane,

    m(z) = integral of 1 / (tau * [1 - 1/gamma - z*m(z)/gamma] - z) dH(tau)

and extracts boundary values m_breve(lambda), the density F' = Im[m_breve]/pi,
the support intervals, and the companion transform value at zero (gamma < 1).

The iteration runs in the companion variable mu = m_under(z), related to m by

    1 + z*m(z) = gamma + gamma*z*mu(z),

because the companion fixed-point map 1/(-z + (1/gamma) * int tau/(1+tau*mu) dH)
maps the upper half plane strictly into itself, so the damped iteration cannot
cross to the non-physical conjugate root (the direct map in m can, for
gamma < 1 near the lower support edge).  Residuals are always verified on the
original equation in m.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, EmptySupport, GammaOne, NoConvergence
from .spectrum import PopulationSpectrum, quadrature_nodes

TOL = 1e-12
MAX_ITER = 10_000
DAMPING = 0.5
ETA_SCHEDULE = (1e-4, 5e-5, 2.5e-5)
ETA_BOOTSTRAP = (1e-2, 1e-3)
EDGE_ETA_SCHEDULE = (4e-6, 2e-6, 1e-6)
EDGE_THRESHOLD = 1e-8
EDGE_REFINE_TOL = 1e-6
_NEWTON_GATE = 1e-5


def _companion_step(z, mu, gamma, taus, ws):
    """One evaluation of the companion map and its mu-derivative."""
    denom = 1.0 + taus[:, None] * mu[None, :]
    J = np.sum(ws[:, None] * taus[:, None] / denom, axis=0)
    dJ = -np.sum(ws[:, None] * taus[:, None] ** 2 / denom ** 2, axis=0)
    g = -z + J / gamma
    rhs = 1.0 / g
    drhs = -dJ / (gamma * g * g)
    return rhs, drhs


def _solve_companion(z: np.ndarray, gamma: float, taus: np.ndarray,
                     ws: np.ndarray, mu0: np.ndarray | None = None,
                     tol: float = TOL, max_iter: int = MAX_ITER,
                     damping: float = DAMPING):
    """Damped fixed point with safeguarded Newton polish, vectorized over z.

    Returns (mu, iterations, converged_mask).
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    mu = (-1.0 / z) if mu0 is None else np.array(np.broadcast_to(mu0, z.shape),
                                                 dtype=complex)
    # the seed must sit in the upper half plane for the map to be trapped there
    bad_seed = mu.imag <= 0
    if bad_seed.any():
        mu[bad_seed] = (-1.0 / z)[bad_seed]
    active = np.ones(z.shape, dtype=bool)
    iters = np.zeros(z.shape, dtype=int)
    for _ in range(max_iter):
        if not active.any():
            break
        za, mua = z[active], mu[active]
        rhs, drhs = _companion_step(za, mua, gamma, taus, ws)
        resid = rhs - mua
        nxt = mua + damping * resid
        scale = np.maximum(1.0, np.abs(mua))
        polish = np.abs(resid) < _NEWTON_GATE * scale
        if polish.any():
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = mua - resid / (drhs - 1.0)
            ok = polish & np.isfinite(newton) & (newton.imag > 0)
            if ok.any():
                rhs_n, _ = _companion_step(za[ok], newton[ok], gamma, taus, ws)
                improved = np.abs(rhs_n - newton[ok]) <= np.abs(resid[ok])
                idx = np.flatnonzero(ok)
                nxt[idx[improved]] = newton[ok][improved]
        rhs2, _ = _companion_step(za, nxt, gamma, taus, ws)
        s2 = np.maximum(1.0, np.abs(nxt))
        done = (np.abs(nxt - mua) <= tol * s2) & (np.abs(rhs2 - nxt) <= tol * s2)
        mu[active] = nxt
        iters[active] += 1
        idx_act = np.flatnonzero(active)
        nxt_active = active.copy()
        nxt_active[idx_act[done]] = False
        active = nxt_active
    return mu, iters, ~active


def _mu_to_m(z, mu, gamma):
    return (gamma - 1.0) / z + gamma * mu


def _m_residual(z, m, gamma, taus, ws):
    """Residual of the original self-consistency equation in m."""
    k = 1.0 - 1.0 / gamma - (z * m) / gamma
    denom = taus[:, None] * k[None, :] - z[None, :]
    rhs = np.sum(ws[:, None] / denom, axis=0)
    return np.abs(rhs - m)


def solve_mF(z, spec: PopulationSpectrum, gamma: float, *, m0=None,
             tol: float = TOL, max_iter: int = MAX_ITER,
             damping: float = DAMPING):
    """Solve the self-consistency equation at z (Im z > 0).

    Accepts a scalar or an array of z values; returns the matching shape.
    The returned m has Im(m) > 0 and satisfies the equation with residual
    <= tol * max(1, |m|).  Raises NoConvergence otherwise.
    """
    if gamma <= 0:
        raise DomainError(f"gamma must be > 0, got {gamma}")
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(z_arr.imag <= 0):
        raise DomainError("solve_mF requires Im(z) > 0")
    taus, ws = quadrature_nodes(spec)
    mu0 = None
    if m0 is not None:
        m0_arr = np.broadcast_to(np.asarray(m0, dtype=complex), z_arr.shape)
        mu0 = (m0_arr - (gamma - 1.0) / z_arr) / gamma
    mu, iters, conv = _solve_companion(z_arr, gamma, taus, ws, mu0=mu0,
                                       tol=tol, max_iter=max_iter,
                                       damping=damping)
    m = _mu_to_m(z_arr, mu, gamma)
    resid = _m_residual(z_arr, m, gamma, taus, ws)
    ok = conv & (resid <= 10 * tol * np.maximum(1.0, np.abs(m))) & (m.imag > 0)
    if not ok.all():
        i = int(np.argmax(~ok))
        raise NoConvergence(
            f"no converged solution at z={z_arr[i]}",
            residual=float(resid[i]), iterations=int(iters[i]))
    return m if np.ndim(z) else complex(m[0])


def solve_mF_direct(z, spec: PopulationSpectrum, gamma: float, *,
                    tol: float = TOL, max_iter: int = MAX_ITER,
                    damping: float = DAMPING):
    """Damped fixed point directly in m, seeded at -1/z.

    Kept as an independent route for cross-checking the companion-variable
    solver; can land on the conjugate root for gamma < 1 near the lower edge,
    so the physical solution is verified before returning.
    """
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    taus, ws = quadrature_nodes(spec)
    m = -1.0 / z_arr
    it = 0
    for it in range(max_iter):
        k = 1.0 - 1.0 / gamma - (z_arr * m) / gamma
        rhs = np.sum(ws[:, None] / (taus[:, None] * k[None, :] - z_arr[None, :]),
                     axis=0)
        nxt = m + damping * (rhs - m)
        if np.all(np.abs(nxt - m) <= tol * np.maximum(1.0, np.abs(nxt))):
            m = nxt
            break
        m = nxt
    resid = _m_residual(z_arr, m, gamma, taus, ws)
    if np.any(resid > 10 * tol * np.maximum(1.0, np.abs(m))) or np.any(m.imag <= 0):
        raise NoConvergence("direct iteration failed", residual=float(resid.max()),
                            iterations=it + 1)
    return m if np.ndim(z) else complex(m[0])


def _richardson(values: Sequence[np.ndarray]) -> np.ndarray:
    """Two-step Richardson extrapolation for the eta, eta/2, eta/4 ladder."""
    A, B, C = values
    return (8.0 * C - 6.0 * B + A) / 3.0


def _boundary_sweep(spec: PopulationSpectrum, gamma: float, grid: np.ndarray,
                    eta_schedule: Sequence[float],
                    bootstrap: Sequence[float] = ETA_BOOTSTRAP):
    """Extrapolated m_breve on the grid via the decreasing-eta ladder."""
    taus, ws = quadrature_nodes(spec)
    mu = None
    for eta in bootstrap:
        mu, _, _ = _solve_companion(grid + 1j * eta, gamma, taus, ws, mu0=mu)
    per_eta = []
    valid = np.ones(grid.shape, dtype=bool)
    for eta in eta_schedule:
        z = grid + 1j * eta
        mu, _, conv = _solve_companion(z, gamma, taus, ws, mu0=mu)
        valid &= conv
        per_eta.append(_mu_to_m(z, mu, gamma))
    return _richardson(per_eta), valid


@dataclass
class StieltjesSolution:
    """Boundary values of the limiting law on a lambda grid.

    density is Im[m_breve]/pi clipped at zero; support holds the refined
    closed intervals where the density is positive; m_under_zero is the
    companion transform at 0 (present iff gamma < 1); mass_at_zero is the
    weight of the atom of F at zero.
    """

    gamma: float
    grid: np.ndarray
    m_breve: np.ndarray
    density: np.ndarray
    support: list[tuple[float, float]]
    m_under_zero: float | None
    mass_at_zero: float
    valid: np.ndarray = field(repr=False, default=None)

    @cached_property
    def _re_spline(self) -> CubicSpline:
        return CubicSpline(self.grid, self.m_breve.real)

    @cached_property
    def _im_spline(self) -> CubicSpline:
        return CubicSpline(self.grid, self.m_breve.imag)

    @cached_property
    def _cum_mass(self) -> np.ndarray:
        dx = np.diff(self.grid)
        avg = 0.5 * (self.density[1:] + self.density[:-1])
        return np.concatenate([[0.0], np.cumsum(dx * avg)])

    def m_at(self, lam):
        """m_breve interpolated from the grid (clamped to the grid range)."""
        x = np.clip(lam, self.grid[0], self.grid[-1])
        return self._re_spline(x) + 1j * self._im_spline(x)

    def density_at(self, lam):
        x = np.clip(lam, self.grid[0], self.grid[-1])
        return np.maximum(np.interp(x, self.grid, self.density), 0.0)

    def cdf(self, lam):
        """F(lambda): atom at zero plus the trapezoid integral of the density."""
        lam_arr = np.asarray(lam, dtype=float)
        bulk = np.interp(lam_arr, self.grid, self._cum_mass)
        bulk = np.where(lam_arr < self.grid[0], 0.0, bulk)
        out = bulk + self.mass_at_zero * (lam_arr >= 0)
        return out if np.ndim(lam) else float(out)

    def total_mass(self) -> float:
        return float(self._cum_mass[-1] + self.mass_at_zero)

    def clip_to_support(self, lam):
        """Nearest in-support value; flags entries that had to move."""
        lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
        if not self.support:
            raise EmptySupport("solution has no detected support")
        edges = np.asarray(self.support)  # (k, 2)
        out = lam_arr.copy()
        moved = np.zeros(lam_arr.shape, dtype=bool)
        inside = np.zeros(lam_arr.shape, dtype=bool)
        for lo, hi in self.support:
            inside |= (lam_arr >= lo) & (lam_arr <= hi)
        for i in np.flatnonzero(~inside):
            x = lam_arr[i]
            cand = edges.ravel()
            out[i] = cand[np.argmin(np.abs(cand - x))]
            moved[i] = True
        return (out, moved) if np.ndim(lam) else (float(out[0]), bool(moved[0]))


def companion_zero(spec: PopulationSpectrum, gamma: float, *,
                   check: bool = True) -> float:
    """Companion transform value at zero, for gamma < 1.

    Root of  integral of tau*m/(1+tau*m) dH(tau) = gamma  on m in (0, inf),
    found by bisection.  When check is set, the value is cross-checked against
    the eta -> 0 limit of the companion-variable solver at z = i*eta.
    """
    if gamma >= 1:
        raise DomainError(f"companion_zero requires gamma < 1, got {gamma}")
    if gamma <= 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    taus, ws = quadrature_nodes(spec)

    def f(m: float) -> float:
        return float(np.sum(ws * taus * m / (1.0 + taus * m))) - gamma

    lo, hi = 0.0, 1.0
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e18:
            raise NoConvergence("companion_zero bracket expansion failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    if check:
        vals = []
        mu = None
        for eta in (1e-3,) + ETA_SCHEDULE:
            mu, _, conv = _solve_companion(np.array([1j * eta]), gamma, taus, ws,
                                           mu0=mu)
            if not conv.all():
                raise NoConvergence(f"companion eta-limit failed at eta={eta}")
            if eta in ETA_SCHEDULE:
                vals.append(mu.copy())
        limit = _richardson(vals)[0]
        if abs(limit.real - root) > 1e-6 * max(1.0, abs(root)):
            raise NoConvergence(
                f"companion_zero cross-check mismatch: bisection {root}, "
                f"eta-limit {limit.real}")
    return root


def _density_point(spec: PopulationSpectrum, gamma: float, lam: float,
                   eta_schedule: Sequence[float], seed=None) -> float:
    """Fresh extrapolated density at a single lambda (used by edge refinement)."""
    taus, ws = quadrature_nodes(spec)
    mu = None if seed is None else np.array([seed], dtype=complex)
    vals = []
    for eta in eta_schedule:
        z = np.array([lam + 1j * eta])
        mu, _, _ = _solve_companion(z, gamma, taus, ws, mu0=mu)
        vals.append(_mu_to_m(z, mu, gamma))
    return float(_richardson(vals)[0].imag / np.pi)


def _threshold_runs(grid: np.ndarray, density: np.ndarray,
                    valid: np.ndarray, threshold: float):
    """Maximal index runs where the density exceeds the threshold."""
    mask = (density > threshold) & valid
    runs = []
    i = 0
    n = len(grid)
    while i < n:
        if mask[i]:
            j = i
            while j + 1 < n and mask[j + 1]:
                j += 1
            runs.append((i, j))
            i = j + 1
        else:
            i += 1
    return runs


def _refine_edge(spec, gamma, lo_lam, hi_lam, seed, *, rising: bool) -> float:
    """Bisect the density threshold crossing between lo_lam and hi_lam."""
    a, b = lo_lam, hi_lam
    while b - a > EDGE_REFINE_TOL:
        mid = 0.5 * (a + b)
        above = _density_point(spec, gamma, mid, EDGE_ETA_SCHEDULE,
                               seed=seed) > EDGE_THRESHOLD
        if rising == above:
            b = mid
        else:
            a = mid
    return 0.5 * (a + b)


def boundary_values(spec: PopulationSpectrum, gamma: float,
                    grid: Sequence[float],
                    eta_schedule: Sequence[float] = ETA_SCHEDULE,
                    refine_edges: bool = True) -> StieltjesSolution:
    """Boundary values and density on an ascending positive grid.

    The eta schedule must contain three levels in ratio (1, 1/2, 1/4); the
    extrapolation coefficients assume halving steps.  Per-point solver
    failures mark the entry invalid instead of aborting.  Support intervals
    come from thresholding the density at 1e-8 with the interval endpoints
    refined by bisection to 1e-6.
    """
    if gamma == 1:
        raise GammaOne("boundary values are not computed at gamma = 1")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("grid must be a non-empty 1-D array")
    if np.any(np.diff(grid) <= 0) or grid[0] <= 0:
        raise ValueError("grid must be strictly ascending and positive")
    if len(eta_schedule) != 3:
        raise ValueError("eta schedule must have three decreasing levels")

    m_breve, valid = _boundary_sweep(spec, gamma, grid, eta_schedule)
    # Im[m_breve] >= 0 exactly in the limit; extrapolation noise near support
    # edges can dip a few 1e-4 below zero and is clamped, anything worse is a
    # solver failure and the point is marked invalid
    valid &= m_breve.imag >= -1e-3
    m_breve = m_breve.real + 1j * np.maximum(m_breve.imag, 0.0)
    density = np.where(valid, m_breve.imag / np.pi, 0.0)

    support: list[tuple[float, float]] = []
    runs = _threshold_runs(grid, density, valid, EDGE_THRESHOLD)
    for i, j in runs:
        lo = grid[i]
        hi = grid[j]
        if refine_edges:
            if i > 0:
                mu_seed = (m_breve[i] - (gamma - 1.0) / grid[i]) / gamma
                lo = _refine_edge(spec, gamma, grid[i - 1], grid[i], mu_seed,
                                  rising=True)
            if j < len(grid) - 1:
                mu_seed = (m_breve[j] - (gamma - 1.0) / grid[j]) / gamma
                hi = _refine_edge(spec, gamma, grid[j], grid[j + 1], mu_seed,
                                  rising=False)
        support.append((float(lo), float(hi)))

    m_under = companion_zero(spec, gamma, check=False) if gamma < 1 else None
    return StieltjesSolution(
        gamma=float(gamma), grid=grid, m_breve=m_breve, density=density,
        support=support, m_under_zero=m_under,
        mass_at_zero=(1.0 - gamma) if gamma < 1 else 0.0, valid=valid)


def support_edges(solution: StieltjesSolution) -> list[tuple[float, float]]:
    """Detected support intervals; raises EmptySupport when none were found."""
    if not solution.support:
        raise EmptySupport("no grid point exceeded the density threshold")
    return list(solution.support)


def scan_bounds(spec: PopulationSpectrum, gamma: float) -> tuple[float, float]:
    """Outer bracket guaranteed to contain the positive part of Supp(F)."""
    lo = (1.0 - gamma ** -0.5) ** 2 * spec.h1
    hi = (1.0 + gamma ** -0.5) ** 2 * spec.h2
    return max(0.6 * lo, 1e-8 * spec.h1), 1.05 * hi


def _clustered_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """Grid on [lo, hi] with cosine clustering toward both ends."""
    u = np.linspace(0.0, np.pi, n)
    return lo + (hi - lo) * 0.5 * (1.0 - np.cos(u))


def solve_density(spec: PopulationSpectrum, gamma: float,
                  num_points: int = 3000) -> StieltjesSolution:
    """Two-pass solution: coarse scan to locate the support, then a fine
    edge-clustered grid per support interval plus sparse off-support tails."""
    if gamma == 1:
        raise GammaOne("gamma = 1 excluded")
    lo_b, hi_b = scan_bounds(spec, gamma)
    coarse_grid = np.linspace(lo_b, hi_b, 600)
    coarse = boundary_values(spec, gamma, coarse_grid, refine_edges=False)
    runs = coarse.support
    if not runs:
        raise EmptySupport("coarse scan found no support")
    # pad each run by two coarse cells and merge overlaps
    cell = coarse_grid[1] - coarse_grid[0]
    padded = [(max(lo_b, a - 2 * cell), min(hi_b, b + 2 * cell)) for a, b in runs]
    merged = [padded[0]]
    for a, b in padded[1:]:
        if a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(b, merged[-1][1]))
        else:
            merged.append((a, b))
    total_len = sum(b - a for a, b in merged)
    pieces = []
    for a, b in merged:
        n = max(300, int(num_points * (b - a) / total_len))
        pieces.append(_clustered_grid(a, b, n))
    # sparse tails outside the support keep the interpolant anchored
    gaps = [(lo_b, merged[0][0])]
    for (a1, b1), (a2, b2) in zip(merged[:-1], merged[1:]):
        gaps.append((b1, a2))
    gaps.append((merged[-1][1], hi_b))
    for a, b in gaps:
        if b - a > 4 * cell:
            pieces.append(np.linspace(a, b, 24)[1:-1])
    grid = np.unique(np.concatenate(pieces))
    return boundary_values(spec, gamma, grid)
