"""Population spectral distribution: weighted atoms plus uniform segments.

The distribution H is the limit of the empirical spectral distribution of the
population covariance matrix.  It is represented exactly as a finite mixture
of point masses and uniform densities, which keeps every integral against H
either closed-form (atoms) or a fixed-order Gauss-Legendre sum (segments).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import MassNotOne, NonPositiveSupport

MASS_TOL = 1e-12
GAUSS_ORDER = 64

# Fixed-order nodes/weights on [-1, 1]; order pinned for bit-reproducibility.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GAUSS_ORDER)


@dataclass(frozen=True)
class PopulationSpectrum:
    """Mixture representation of the limiting population spectral law H.

    atoms: tuple of (weight, location) point masses, sorted by location.
    segments: tuple of (weight, lo, hi) uniform pieces, density weight/(hi-lo).
    h1, h2: infimum and supremum of the support (h1 > 0).
    """

    atoms: tuple[tuple[float, float], ...]
    segments: tuple[tuple[float, float, float], ...]
    h1: float
    h2: float

    def to_json(self) -> str:
        return json.dumps({
            "atoms": [[w, t] for w, t in self.atoms],
            "segments": [[w, lo, hi] for w, lo, hi in self.segments],
        }, sort_keys=True)


def validate(atoms: Sequence[Sequence[float]] = (),
             segments: Sequence[Sequence[float]] = ()) -> PopulationSpectrum:
    """Build a normalized PopulationSpectrum from raw atom/segment lists.

    Zero-weight entries are dropped, components are sorted by location and
    h1/h2 are recomputed from content.

    Raises NonPositiveSupport if any mass sits at tau <= 0, MassNotOne if the
    weights do not sum to 1 within 1e-12.
    """
    clean_atoms = []
    for w, t in atoms:
        w, t = float(w), float(t)
        if w < 0:
            raise MassNotOne(f"negative atom weight {w}")
        if w == 0.0:
            continue
        if t <= 0:
            raise NonPositiveSupport(f"atom at tau={t} <= 0")
        clean_atoms.append((w, t))
    clean_segments = []
    for w, lo, hi in segments:
        w, lo, hi = float(w), float(lo), float(hi)
        if w < 0:
            raise MassNotOne(f"negative segment weight {w}")
        if w == 0.0:
            continue
        if lo <= 0 or hi <= 0:
            raise NonPositiveSupport(f"segment [{lo},{hi}] touches tau <= 0")
        if hi <= lo:
            raise ValueError(f"segment [{lo},{hi}] needs hi > lo")
        clean_segments.append((w, lo, hi))

    total = sum(w for w, _ in clean_atoms) + sum(w for w, _, _ in clean_segments)
    if abs(total - 1.0) > MASS_TOL:
        raise MassNotOne(f"weights sum to {total!r}, expected 1 within {MASS_TOL}")
    if not clean_atoms and not clean_segments:
        raise MassNotOne("empty spectrum")

    # merge duplicate atoms, then sort everything by location
    merged: dict[float, float] = {}
    for w, t in clean_atoms:
        merged[t] = merged.get(t, 0.0) + w
    atoms_t = tuple(sorted(((w, t) for t, w in merged.items()), key=lambda a: a[1]))
    segs_t = tuple(sorted(clean_segments, key=lambda s: (s[1], s[2])))

    locs = [t for _, t in atoms_t] + [lo for _, lo, _ in segs_t]
    his = [t for _, t in atoms_t] + [hi for _, _, hi in segs_t]
    return PopulationSpectrum(atoms=atoms_t, segments=segs_t,
                              h1=min(locs), h2=max(his))


def point_mass(location: float) -> PopulationSpectrum:
    """H = delta_location."""
    return validate(atoms=[(1.0, location)])


def uniform(lo: float, hi: float) -> PopulationSpectrum:
    """H uniform on [lo, hi]."""
    return validate(segments=[(1.0, lo, hi)])


def from_json(text: str) -> PopulationSpectrum:
    doc = json.loads(text)
    return validate(atoms=doc.get("atoms", ()), segments=doc.get("segments", ()))


@lru_cache(maxsize=128)
def quadrature_nodes(spec: PopulationSpectrum,
                     split_points: tuple[float, ...] = ()
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Return (locations, weights) so that integral f dH ~= sum w_i f(x_i).

    Atoms contribute exactly; each segment contributes GAUSS_ORDER
    Gauss-Legendre nodes per panel, panels split at the given points.
    """
    locs: list[float] = []
    wts: list[float] = []
    for w, t in spec.atoms:
        locs.append(t)
        wts.append(w)
    for w, lo, hi in spec.segments:
        cuts = [lo] + sorted(p for p in split_points if lo < p < hi) + [hi]
        dens = w / (hi - lo)
        for a, b in zip(cuts[:-1], cuts[1:]):
            half = 0.5 * (b - a)
            mid = 0.5 * (b + a)
            locs.extend(mid + half * _GL_X)
            wts.extend(dens * half * _GL_W)
    return np.asarray(locs, dtype=float), np.asarray(wts, dtype=float)


def integrate(spec: PopulationSpectrum, f: Callable[[np.ndarray], np.ndarray],
              split_points: Sequence[float] = ()) -> complex | float:
    """Integral of f against H; f must accept an ndarray of tau values."""
    locs, wts = quadrature_nodes(spec, tuple(split_points))
    vals = np.asarray(f(locs))
    out = np.sum(wts * vals)
    return complex(out) if np.iscomplexobj(vals) else float(out)


def moment(spec: PopulationSpectrum, k: int) -> float:
    """k-th moment of H; k may be negative since the support excludes 0."""
    return float(integrate(spec, lambda t: t ** float(k)))


def m_H_at_zero(spec: PopulationSpectrum) -> float:
    """Stieltjes transform of H at z = 0, i.e. integral of 1/tau dH(tau)."""
    return moment(spec, -1)


def _breakpoints(spec: PopulationSpectrum) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Breakpoints with cdf value just left and just right of each point."""
    pts = sorted({t for _, t in spec.atoms}
                 | {lo for _, lo, _ in spec.segments}
                 | {hi for _, _, hi in spec.segments})
    pts_arr = np.asarray(pts)
    left = np.zeros(len(pts))
    right = np.zeros(len(pts))
    for i, x in enumerate(pts):
        lo_val = 0.0
        hi_val = 0.0
        for w, t in spec.atoms:
            if t < x:
                lo_val += w
            if t <= x:
                hi_val += w
        for w, a, b in spec.segments:
            frac = min(max((x - a) / (b - a), 0.0), 1.0)
            lo_val += w * frac
            hi_val += w * frac
        left[i] = lo_val
        right[i] = hi_val
    return pts_arr, left, right


def cdf(spec: PopulationSpectrum, x: float) -> float:
    """H(x) with the right-continuous convention (atoms at x included)."""
    val = 0.0
    for w, t in spec.atoms:
        if t <= x:
            val += w
    for w, a, b in spec.segments:
        val += w * min(max((x - a) / (b - a), 0.0), 1.0)
    return val


def quantile(spec: PopulationSpectrum, q: float) -> float:
    """Smallest x with H(x) >= q, exact on the mixture representation."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile needs q in (0,1), got {q}")
    pts, left, right = _breakpoints(spec)
    for i in range(len(pts)):
        if right[i] >= q:
            if left[i] <= q:  # inside the jump (or exactly at a kink)
                return float(pts[i])
            # strictly inside the previous linear piece
            x0, c0 = pts[i - 1], right[i - 1]
            slope = (left[i] - c0) / (pts[i] - x0)
            return float(x0 + (q - c0) / slope)
    return float(pts[-1])


def population_eigenvalues(spec: PopulationSpectrum, N: int) -> np.ndarray:
    """Deterministic size-N discretization: quantiles at (j - 1/2)/N, ascending."""
    if N < 1:
        raise ValueError("N >= 1 required")
    qs = (np.arange(N) + 0.5) / N
    return np.asarray([quantile(spec, q) for q in qs])
