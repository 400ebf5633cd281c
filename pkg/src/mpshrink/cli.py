"""Command-line front end: one subcommand per reproducible experiment.

Every command reads a JSON config, writes CSV/JSON outputs into --out, and
finishes by writing a manifest file (the success marker).  Exit codes:
0 ok, 1 usage/config error, 2 numeric failure, 3 assertion failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from . import overlap as overlap_mod
from . import shrinkage as shrinkage_mod
from . import simulate as simulate_mod
from . import spectrum as spectrum_mod
from . import stieltjes as stieltjes_mod
from .errors import MPShrinkError

USAGE_ERROR = 1
NUMERIC_ERROR = 2
ASSERTION_ERROR = 3


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config_path: str
    output_paths: list[str]
    seed: int | None
    version: str
    duration_s: float

    def write(self, path: str) -> None:
        doc = {
            "command": self.command,
            "config_path": self.config_path,
            "output_paths": self.output_paths,
            "seed": self.seed,
            "version": self.version,
            "duration_s": self.duration_s,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc


def _spectrum_from(cfg: dict) -> spectrum_mod.PopulationSpectrum:
    if "spectrum" not in cfg:
        raise UsageError("config missing 'spectrum'")
    doc = cfg["spectrum"]
    return spectrum_mod.validate(atoms=doc.get("atoms", ()),
                                 segments=doc.get("segments", ()))


def _gammas_from(cfg: dict) -> list[float]:
    gammas = cfg.get("gammas")
    if not gammas:
        raise UsageError("config missing non-empty 'gammas'")
    for g in gammas:
        if g == 1:
            raise UsageError(
                "gamma = 1 is excluded: the limiting density can be unbounded "
                "near zero; pick gamma < 1 or > 1")
        if g <= 0:
            raise UsageError(f"gamma must be positive, got {g}")
    return [float(g) for g in gammas]


def _grid_points(cfg: dict, default: int = 2000) -> int:
    n = int(cfg.get("grid", {}).get("n", default))
    if n < 2:
        raise UsageError("grid needs at least 2 points")
    return n


def _tag(gamma: float) -> str:
    return ("%g" % gamma).replace(".", "p")


def cmd_density(cfg: dict, out_dir: str, args) -> list[str]:
    spec = _spectrum_from(cfg)
    outputs = []
    for gamma in _gammas_from(cfg):
        sol = stieltjes_mod.solve_density(spec, gamma,
                                          num_points=_grid_points(cfg))
        path = os.path.join(out_dir, f"density_gamma{_tag(gamma)}.csv")
        _write_csv(path, ["lambda", "m_re", "m_im", "density"],
                   ((l, mb.real, mb.imag, d) for l, mb, d in
                    zip(sol.grid, sol.m_breve, sol.density)))
        outputs.append(path)
    return outputs


def cmd_kernel(cfg: dict, out_dir: str, args) -> list[str]:
    spec = _spectrum_from(cfg)
    outputs = []
    n_t = int(cfg.get("t_points", 400))
    cfg = dict(cfg)
    cfg.setdefault("gammas", [2.0, 10.0, 100.0])
    for gamma in _gammas_from(cfg):
        sol = stieltjes_mod.solve_density(spec, gamma,
                                          num_points=_grid_points(cfg))
        edges = stieltjes_mod.support_edges(sol)
        l_val = cfg.get("l", "sup")
        if l_val == "sup":
            # top edge approached from just inside: the boundary extrapolation
            # is unreliable in the last ~1e-4 before the exact edge
            lo, hi = edges[-1]
            l = hi - 0.002 * (hi - lo)
        else:
            l = float(l_val)
        t_grid = np.linspace(spec.h1, spec.h2, n_t)
        vals = overlap_mod.phi(l, t_grid, sol, spec)
        path = os.path.join(out_dir, f"kernel_gamma{_tag(gamma)}.csv")
        _write_csv(path, ["l", "t", "phi"],
                   ((l, t, v) for t, v in zip(t_grid, vals)))
        norm = overlap_mod.phi_h_integral(l, sol, spec)
        meta_path = os.path.join(out_dir, f"kernel_gamma{_tag(gamma)}.meta.json")
        with open(meta_path, "w") as fh:
            json.dump({"gamma": gamma, "l": l, "h_integral": norm},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs.extend([path, meta_path])
        if "cumulative" in cfg:
            lam_vals = [float(v) for v in cfg["cumulative"].get("lambdas", ())]
            tau_vals = [float(v) for v in cfg["cumulative"].get("taus", ())]
            if not lam_vals or not tau_vals:
                raise UsageError("'cumulative' needs 'lambdas' and 'taus'")
            cum_path = os.path.join(out_dir,
                                    f"cumulative_gamma{_tag(gamma)}.csv")
            _write_csv(cum_path, ["lambda", "tau", "Phi"],
                       ((lv, tv,
                         overlap_mod.phi_cumulative(lv, tv, sol, spec))
                        for lv in lam_vals for tv in tau_vals))
            outputs.append(cum_path)
    return outputs


def cmd_shrink(cfg: dict, out_dir: str, args) -> list[str]:
    spec = _spectrum_from(cfg)
    outputs = []
    for gamma in _gammas_from(cfg):
        sol = stieltjes_mod.solve_density(spec, gamma,
                                          num_points=_grid_points(cfg))
        edges = stieltjes_mod.support_edges(sol)
        mask = np.zeros(sol.grid.shape, dtype=bool)
        for lo, hi in edges:
            mask |= (sol.grid >= lo) & (sol.grid <= hi)
        lam = sol.grid[mask]
        curve = shrinkage_mod.build_shrinkage_curve(sol, spec, lam)
        a_lin, b_lin = shrinkage_mod.linear_shrinkage_limit(spec, gamma)
        path = os.path.join(out_dir, f"shrink_gamma{_tag(gamma)}.csv")
        _write_csv(path, ["lambda", "delta", "psi", "linear_baseline"],
                   ((l, d, p, a_lin + b_lin * l) for l, d, p in
                    zip(curve.lambda_grid, curve.delta, curve.psi)))
        cov_gap, inv_gap = shrinkage_mod.moment_residuals(sol, spec)
        print(f"gamma={gamma}: moment conservation gaps "
              f"cov={cov_gap:.3e} inv={inv_gap:.3e}")
        if abs(cov_gap) > 1e-3 or abs(inv_gap) > 1e-3:
            raise MPShrinkError(
                f"moment conservation violated at gamma={gamma}: "
                f"cov={cov_gap:.3e} inv={inv_gap:.3e}")
        summary = {"gamma": gamma, "moment_gap_cov": cov_gap,
                   "moment_gap_inv": inv_gap}
        if gamma < 1:
            summary["delta_zero"] = curve.delta_zero
            summary["psi_zero"] = curve.psi_zero
        json_path = os.path.join(out_dir, f"shrink_gamma{_tag(gamma)}.json")
        with open(json_path, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs.extend([path, json_path])
    return outputs


def cmd_simulate(cfg: dict, out_dir: str, args) -> list[str]:
    spec = _spectrum_from(cfg)
    for key in ("N", "p"):
        if key not in cfg:
            raise UsageError(f"config missing '{key}'")
    reps = int(args.reps if args.reps is not None else cfg.get("reps", 100))
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    sizes = cfg.get("sweep_N", [int(cfg["N"])])
    ratio = cfg["p"] / cfg["N"]
    if ratio == 1:
        raise UsageError("p/N = 1 is excluded; pick p != N")
    # one limiting solution at the target aspect ratio serves the whole sweep
    sol = stieltjes_mod.solve_density(spec, ratio)
    outputs = []
    reports = []
    for n_val in sizes:
        n_val = int(n_val)
        p_val = int(round(n_val * ratio))
        config = simulate_mod.SimulationConfig(
            N=n_val, p=p_val, spec=spec, reps=reps, seed=seed,
            entry_law=cfg.get("entry_law", "real-gaussian"))
        report = simulate_mod.run_prial(config, sol)
        doc = report.to_dict()
        if "delta" in cfg.get("outputs", ()):
            hi = max(e[1] for e in sol.support)
            xs = np.linspace(0.0, 1.05 * hi, int(cfg.get("delta_points", 101)))
            emp = simulate_mod.empirical_delta(config, xs)
            doc["empirical_delta"] = {"x": list(map(float, xs)),
                                      "value": list(map(float, emp))}
        if "losses" in cfg.get("outputs", ()):
            loss_path = os.path.join(out_dir, f"losses_N{n_val}.csv")
            _write_csv(loss_path,
                       ["rep", "loss_nonlinear", "loss_linear", "loss_sample"],
                       ((r, a, b, c) for r, (a, b, c) in enumerate(
                           zip(report.loss_nonlinear, report.loss_linear,
                               report.loss_sample))))
            outputs.append(loss_path)
        if "overlap" in cfg.get("outputs", ()):
            lam_bins = [float(v) for v in cfg.get("lambda_bins", ())]
            tau_bins = [float(v) for v in cfg.get("tau_bins", ())]
            if len(lam_bins) < 2 or len(tau_bins) < 2:
                raise UsageError(
                    "'overlap' output needs 'lambda_bins' and 'tau_bins'")
            table = simulate_mod.empirical_overlap(config, lam_bins, tau_bins)
            ov_path = os.path.join(out_dir, f"overlap_bins_N{n_val}.csv")
            _write_csv(ov_path,
                       ["lambda_lo", "lambda_hi", "tau_lo", "tau_hi",
                        "mean", "std_error", "count"],
                       ((lam_bins[a], lam_bins[a + 1], tau_bins[b],
                         tau_bins[b + 1], table.mean[a, b],
                         table.std_error[a, b], table.count[a, b])
                        for a in range(len(lam_bins) - 1)
                        for b in range(len(tau_bins) - 1)
                        if not table.empty[a, b]))
            outputs.append(ov_path)
        reports.append((n_val, doc))
    path = os.path.join(out_dir, "simulate_report.json")
    body = {"reports": [{"N": n, "report": d} for n, d in reports]}
    with open(path, "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs.append(path)
    if args.do_assert:
        min_prial = float(cfg.get("assert_nonlinear_min", 90.0))
        for n_val, doc in reports:
            if doc["prial_nonlinear"] < min_prial:
                raise AssertionError(
                    f"N={n_val}: nonlinear PRIAL {doc['prial_nonlinear']:.2f} "
                    f"< {min_prial}")
            if doc["prial_nonlinear"] <= doc["prial_linear"]:
                raise AssertionError(
                    f"N={n_val}: nonlinear PRIAL not above linear baseline")
    return outputs


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit(2); usage errors are 1
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mpshrink",
                     description="limiting spectral laws, eigenvector overlap "
                                 "and nonlinear shrinkage for large sample "
                                 "covariance matrices")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("density", cmd_density), ("kernel", cmd_kernel),
                     ("shrink", cmd_shrink), ("simulate", cmd_simulate)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--reps", type=int, default=None)
        p.add_argument("--assert", dest="do_assert", action="store_true")
        p.set_defaults(func=fn)
    return parser


def _apply_thread_cap() -> None:
    cap = os.environ.get("RMT_SHRINK_THREADS")
    if cap and cap != "0":
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _load_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        t0 = time.perf_counter()
        outputs = args.func(cfg, args.out, args)
        manifest = RunManifest(
            command=args.command, config_path=args.config,
            output_paths=outputs, seed=args.seed, version=__version__,
            duration_s=time.perf_counter() - t0)
        manifest.write(os.path.join(args.out, f"{args.command}.manifest.json"))
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except AssertionError as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return ASSERTION_ERROR
    except MPShrinkError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return NUMERIC_ERROR


if __name__ == "__main__":
    sys.exit(main())
