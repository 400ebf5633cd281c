"""Monte-Carlo harness: sample covariance draws, oracle statistics, PRIAL.

Population eigenvectors are fixed to the standard basis (no generality lost
for Gaussian entries, by rotation invariance), so Sigma is diagonal with the
deterministic quantile eigenvalues and every overlap N|u_i* v_j|^2 is just
N|U_ji|^2.  Streams are split per replication with counter-based generators
keyed by (seed, rep index), so results do not depend on evaluation order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import shrinkage as shrinkage_mod
from . import spectrum as spectrum_mod
from .errors import GammaOne
from .spectrum import PopulationSpectrum
from .stieltjes import StieltjesSolution, solve_density

ZERO_EIG_REL_TOL = 1e-10
ENTRY_LAWS = ("real-gaussian", "complex-gaussian")


@dataclass(frozen=True)
class SimulationConfig:
    N: int
    p: int
    spec: PopulationSpectrum
    reps: int
    seed: int = 0
    entry_law: str = "real-gaussian"
    outputs: tuple[str, ...] = ()

    def __post_init__(self):
        if self.N < 2 or self.p < 1 or self.reps < 1:
            raise ValueError("need N >= 2, p >= 1, reps >= 1")
        if self.entry_law not in ENTRY_LAWS:
            raise ValueError(f"entry_law must be one of {ENTRY_LAWS}")

    @property
    def gamma(self) -> float:
        return self.p / self.N


@dataclass
class Realization:
    sample_matrix: np.ndarray
    population_diag: np.ndarray
    eigenvalues: np.ndarray   # descending
    eigenvectors: np.ndarray  # columns paired with eigenvalues


def _rng_for_rep(seed: int, rep_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(rep_index,))
    return np.random.Generator(np.random.Philox(ss))


def generate(config: SimulationConfig, rep_index: int) -> Realization:
    """Draw one sample covariance matrix and its eigensystem.

    Sigma^(1/2) X has i.i.d. columns; S = (1/p) * (Sigma^(1/2) X)(...)^*.
    Eigenvalues are returned in decreasing order with orthonormal
    eigenvectors; the draw is a pure function of (seed, rep_index).
    """
    rng = _rng_for_rep(config.seed, rep_index)
    diag = spectrum_mod.population_eigenvalues(config.spec, config.N)
    root = np.sqrt(diag)
    if config.entry_law == "real-gaussian":
        x = rng.standard_normal((config.N, config.p))
    else:
        x = (rng.standard_normal((config.N, config.p))
             + 1j * rng.standard_normal((config.N, config.p))) / np.sqrt(2.0)
    c = root[:, None] * x
    s = (c @ c.conj().T) / config.p
    s = 0.5 * (s + s.conj().T)
    vals, vecs = np.linalg.eigh(s)
    order = np.argsort(vals)[::-1]
    return Realization(sample_matrix=s, population_diag=diag,
                       eigenvalues=np.ascontiguousarray(vals[order]),
                       eigenvectors=np.ascontiguousarray(vecs[:, order]))


def oracle_dtilde(U: np.ndarray, sigma_diag: np.ndarray) -> np.ndarray:
    """Diagonal of U* Sigma U for diagonal Sigma: the oracle replacements
    d_i = u_i* Sigma u_i, paired with the (descending) sample eigenvalues."""
    return np.einsum("ji,j->i", np.abs(U) ** 2, sigma_diag)


def zero_eig_count(eigenvalues: np.ndarray) -> int:
    thresh = ZERO_EIG_REL_TOL * max(eigenvalues.max(initial=0.0), 1e-300)
    return int(np.sum(eigenvalues <= thresh))


def empirical_delta(config: SimulationConfig, x_grid) -> np.ndarray:
    """Average over replications of (1/N) * sum d_i * 1[lambda_i <= x]."""
    x_grid = np.asarray(x_grid, dtype=float)
    acc = np.zeros(x_grid.shape)
    for r in range(config.reps):
        real = generate(config, r)
        d = oracle_dtilde(real.eigenvectors, real.population_diag)
        lam_asc = real.eigenvalues[::-1]
        d_asc = d[::-1]
        csum = np.concatenate([[0.0], np.cumsum(d_asc)]) / config.N
        idx = np.searchsorted(lam_asc, x_grid, side="right")
        acc += csum[idx]
    return acc / config.reps


@dataclass
class OverlapBinTable:
    lambda_edges: np.ndarray
    tau_edges: np.ndarray
    mean: np.ndarray       # (n_lambda_bins, n_tau_bins)
    std_error: np.ndarray  # across replication means
    count: np.ndarray      # total pair count
    empty: np.ndarray      # bins that never received a pair


def empirical_overlap(config: SimulationConfig, lambda_bins,
                      tau_bins) -> OverlapBinTable:
    """Binned means of N |u_i* v_j|^2 with per-bin standard errors.

    Bins are (lo, hi] intervals.  The standard error is computed across the
    per-replication bin means, which respects within-replication correlation.
    """
    lam_edges = np.asarray(lambda_bins, dtype=float)
    tau_edges = np.asarray(tau_bins, dtype=float)
    nl, nt = len(lam_edges) - 1, len(tau_edges) - 1
    rep_sum = np.zeros((config.reps, nl, nt))
    rep_cnt = np.zeros((config.reps, nl, nt), dtype=int)
    for r in range(config.reps):
        real = generate(config, r)
        overlaps = config.N * np.abs(real.eigenvectors.T) ** 2  # (i, j)
        li = np.searchsorted(lam_edges, real.eigenvalues, side="left") - 1
        tj = np.searchsorted(tau_edges, real.population_diag, side="left") - 1
        iok = (li >= 0) & (li < nl)
        jok = (tj >= 0) & (tj < nt)
        sub = overlaps[np.ix_(iok, jok)]
        li_s, tj_s = li[iok], tj[jok]
        for a in range(nl):
            rows = li_s == a
            if not rows.any():
                continue
            for b in range(nt):
                cols = tj_s == b
                if not cols.any():
                    continue
                block = sub[np.ix_(rows, cols)]
                rep_sum[r, a, b] = block.sum()
                rep_cnt[r, a, b] = block.size
    count = rep_cnt.sum(axis=0)
    empty = count == 0
    with np.errstate(invalid="ignore", divide="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # empty bins are flagged
        rep_mean = np.where(rep_cnt > 0, rep_sum / rep_cnt, np.nan)
        mean = np.where(empty, np.nan, np.nansum(rep_sum, axis=0)
                        / np.maximum(count, 1))
        valid_reps = np.sum(~np.isnan(rep_mean), axis=0)
        spread = np.nanstd(rep_mean, axis=0, ddof=1)
        se = np.where(valid_reps > 1, spread / np.sqrt(valid_reps), np.nan)
    return OverlapBinTable(lambda_edges=lam_edges, tau_edges=tau_edges,
                           mean=mean, std_error=se, count=count, empty=empty)


@dataclass
class SimulationReport:
    prial_nonlinear: float
    prial_linear: float
    prial_sample: float
    prial_oracle: float
    se_nonlinear: float
    se_linear: float
    loss_nonlinear: list[float]
    loss_linear: list[float]
    loss_sample: list[float]
    trace_identity_max_gap: float
    zero_count_ok: bool
    seeds_used: list[int]
    config: dict
    empirical_delta: dict | None = None
    empirical_phi_bins: dict | None = None

    def to_dict(self) -> dict:
        out = {
            "prial_nonlinear": self.prial_nonlinear,
            "prial_linear": self.prial_linear,
            "prial_sample": self.prial_sample,
            "prial_oracle": self.prial_oracle,
            "se_nonlinear": self.se_nonlinear,
            "se_linear": self.se_linear,
            "loss_nonlinear": self.loss_nonlinear,
            "loss_linear": self.loss_linear,
            "loss_sample": self.loss_sample,
            "trace_identity_max_gap": self.trace_identity_max_gap,
            "zero_count_ok": self.zero_count_ok,
            "seeds_used": self.seeds_used,
            "config": self.config,
        }
        if self.empirical_delta is not None:
            out["empirical_delta"] = self.empirical_delta
        if self.empirical_phi_bins is not None:
            out["empirical_phi_bins"] = self.empirical_phi_bins
        return out


def _prial(numer: np.ndarray, denom: np.ndarray) -> float:
    return 100.0 * (1.0 - float(np.mean(numer)) / float(np.mean(denom)))


def _jackknife_se(numer: np.ndarray, denom: np.ndarray) -> float:
    r = len(numer)
    if r < 2:
        return float("nan")
    tot_n, tot_d = numer.sum(), denom.sum()
    loo = 100.0 * (1.0 - (tot_n - numer) / (tot_d - denom))
    return float(np.sqrt((r - 1) / r * np.sum((loo - loo.mean()) ** 2)))


def run_prial(config: SimulationConfig,
              solution: StieltjesSolution | None = None) -> SimulationReport:
    """PRIAL experiment: nonlinear shrinkage vs the oracle linear projection.

    Per replication, three rotation-invariant estimators share the sample
    eigenvectors, so every Frobenius loss against U D~ U* reduces to a sum of
    squared eigenvalue differences.  PRIAL(M) = 100 * (1 - E loss(M) / E
    loss(S)); the sample matrix scores 0 and the oracle 100 by construction.
    """
    if config.p == config.N:
        raise GammaOne("PRIAL experiment requires p != N")
    gamma = config.gamma
    if solution is None:
        solution = solve_density(config.spec, gamma)
    loss_nl = np.zeros(config.reps)
    loss_lin = np.zeros(config.reps)
    loss_sam = np.zeros(config.reps)
    trace_gap = 0.0
    zero_ok = True
    expect_zero = max(config.N - config.p, 0)
    for r in range(config.reps):
        real = generate(config, r)
        lam = real.eigenvalues
        d = oracle_dtilde(real.eigenvectors, real.population_diag)
        trace_gap = max(trace_gap,
                        abs(d.sum() - real.population_diag.sum()))
        if zero_eig_count(lam) != expect_zero:
            zero_ok = False
        shrunk = shrinkage_mod.shrink_spectrum(lam, solution)
        lin = shrinkage_mod.linear_shrinkage_oracle(
            lam, float(real.population_diag.sum()), float(np.dot(lam, d)))
        loss_nl[r] = float(np.sum((shrunk - d) ** 2))
        loss_lin[r] = float(np.sum((lin - d) ** 2))
        loss_sam[r] = float(np.sum((lam - d) ** 2))
    report = SimulationReport(
        prial_nonlinear=_prial(loss_nl, loss_sam),
        prial_linear=_prial(loss_lin, loss_sam),
        prial_sample=_prial(loss_sam, loss_sam),
        prial_oracle=_prial(np.zeros_like(loss_sam), loss_sam),
        se_nonlinear=_jackknife_se(loss_nl, loss_sam),
        se_linear=_jackknife_se(loss_lin, loss_sam),
        loss_nonlinear=[float(v) for v in loss_nl],
        loss_linear=[float(v) for v in loss_lin],
        loss_sample=[float(v) for v in loss_sam],
        trace_identity_max_gap=float(trace_gap),
        zero_count_ok=zero_ok,
        seeds_used=[config.seed],
        config={
            "N": config.N, "p": config.p, "reps": config.reps,
            "seed": config.seed, "entry_law": config.entry_law,
            "gamma": gamma, "spectrum": config.spec.to_json(),
        },
    )
    return report


def null_space_dtilde_mean(config: SimulationConfig) -> float:
    """Monte-Carlo mean of d_i over the zero-eigenvalue eigenvectors.

    Only meaningful for p < N, where S has exactly N - p null directions."""
    if config.p >= config.N:
        raise ValueError("null space requires p < N")
    total, cnt = 0.0, 0
    for r in range(config.reps):
        real = generate(config, r)
        d = oracle_dtilde(real.eigenvectors, real.population_diag)
        k = zero_eig_count(real.eigenvalues)
        if k:
            total += float(d[-k:].sum())
            cnt += k
    return total / cnt
