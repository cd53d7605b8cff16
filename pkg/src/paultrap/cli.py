"""Command-line entry point: ``paultrap <experiment> CONFIG [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical guard failure.
"""
import argparse
import hashlib
import json
import os
import sys
import time
import warnings

import numpy as np

from . import classical, config as configmod, floquet, io, observables, quantum
from .errors import ConfigError, NumericalGuardError
from .model import mathieu_exponent, reduce_to_dimensionless, rf_frequency_for_hbar

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3


def _version():
    try:
        from importlib.metadata import version
        return version("artifact")
    except Exception:
        return "unknown"


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


class _Run:
    """Collects output files, warnings and summary values of one invocation."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.out = cfg.run.out_dir
        self.files = []
        self.warnings = []
        self.summary = {}
        self.guards = {}

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.out, name)

    def csv(self, name, header, columns, meta=None):
        base = {"experiment": self.cfg.kind, "seed": self.cfg.run.seed}
        base.update(meta or {})
        io.write_csv(self.path(name), header, columns, base)

    def warn(self, msg):
        self.warnings.append(msg)
        print(f"warning: {msg}", file=sys.stderr)


# --------------------------------------------------------------------------
# experiments


def _run_poincare(r):
    cfg = r.cfg
    msg = classical.stability_warning(cfg.trap)
    if msg:
        r.warn(msg)
    secs = classical.poincare_section(cfg.trap, cfg.poincare.seeds, cfg.poincare.n_periods,
                                      dt=cfg.time.dt, phase=cfg.poincare.phase,
                                      order=cfg.time.order)
    idx = np.concatenate([np.full(len(s.n), i) for i, s in enumerate(secs)])
    n = np.concatenate([s.n for s in secs])
    x = np.concatenate([s.x for s in secs])
    p = np.concatenate([s.p for s in secs])
    r.csv("poincare.csv", ["seed_index", "n", "x", "p"], [idx, n, x, p],
          {"section_phase": cfg.poincare.phase})
    for i, s in enumerate(secs):
        if s.diverged_at is not None:
            r.warn(f"seed {i} diverged at period {s.diverged_at}")
        r.summary[f"seed_{i}"] = {
            "x0": s.seed.x, "p0": s.seed.p, "points": int(len(s.n)),
            "max_abs_x": float(np.max(np.abs(s.x))),
            "max_distance_x": float(np.max(np.abs(s.x - s.seed.x))),
            "diverged_at": s.diverged_at,
        }


def _spread_csv(r, name, series, which):
    mean, spread = (series.mean_x, series.dx) if which == "x" else (series.mean_p, series.dp)
    r.csv(name, ["t", f"mean_{which}", f"d{which}"], [series.times, mean, spread],
          {"averaging": "drive period"})


def _run_evolve(r):
    cfg = r.cfg
    tm = cfg.time
    window = tm.window if tm.window_width > 0 else None
    if window is not None and (window[0] < 0 or window[1] > tm.t_final):
        raise ConfigError("averaging window must lie inside [0, t_final]", key="window_center")
    grid = cfg.grid
    ens = cfg.ensemble
    state = quantum.gaussian_packet(grid, ens.center_x, ens.center_p, ens.sigma_x2,
                                    cfg.trap.hbar)
    q = quantum.evolve(state, cfg.trap, tm.t_final, tm.dt, tm.samples_per_period, window,
                       tm.snapshots_per_period)
    r.guards = {"max_boundary_mass": q.guards.max_boundary_mass,
                "max_momentum_tail": q.guards.max_momentum_tail,
                "checks": q.guards.checks}
    spec = classical.EnsembleSpec.matching_packet(
        cfg.trap.hbar, ens.count, ens.sigma_x2, cfg.run.seed, (ens.center_x, ens.center_p))
    c = classical.evolve_gaussian_ensemble(
        spec, cfg.trap, tm.t_final, dt=tm.dt, samples_per_period=tm.samples_per_period,
        window=window, position_bins=cfg.histogram.position,
        momentum_bins=cfg.histogram.momentum, order=tm.order, workers=cfg.run.workers)
    cc = observables.cycle_average(c.series)
    qc = observables.cycle_average(q.series)
    _spread_csv(r, "classical_position_spread.csv", cc, "x")
    _spread_csv(r, "classical_momentum_spread.csv", cc, "p")
    _spread_csv(r, "quantum_position_spread.csv", qc, "x")
    _spread_csv(r, "quantum_momentum_spread.csv", qc, "p")
    if window is not None:
        qx = quantum.window_average(q.position_snapshots)
        qp = quantum.window_average(q.momentum_snapshots)
        for name, cdist, qdist, bins in (
                ("position_distribution.csv", c.position, qx, cfg.histogram.position),
                ("momentum_distribution.csv", c.momentum, qp, cfg.histogram.momentum)):
            qb = observables.rebin(qdist, observables.uniform_edges(*bins))
            r.csv(name, ["center", "classical", "quantum"],
                  [cdist.centers, cdist.density, qb.density],
                  {"window_start": window[0], "window_end": window[1],
                   "quantum_snapshots": len(q.snapshot_times),
                   "classical_samples": c.window_samples})
        lo = window[0]
        r.summary["late_window"] = {
            "classical_dx": float(cc.window(lo, tm.t_final).dx.mean()),
            "classical_dp": float(cc.window(lo, tm.t_final).dp.mean()),
            "quantum_dx": float(qc.window(lo, tm.t_final).dx.mean()),
            "quantum_dp": float(qc.window(lo, tm.t_final).dp.mean()),
        }
    if cfg.run.write_snapshot:
        io.write_snapshot(r.path("final_state.bin"), q.final)
    r.summary["final_norm"] = q.final.norm()


def _run_floquet(r):
    cfg = r.cfg
    b = cfg.basis
    basis = floquet.ReferenceBasis(cfg.grid, b.nu, b.size, cfg.trap.hbar)
    mono = floquet.build_monodromy(cfg.trap, basis, b.dt, workers=cfg.run.workers)
    fset = floquet.floquet_spectrum(mono)
    ens = cfg.ensemble
    packet = quantum.gaussian_packet(cfg.grid, ens.center_x, ens.center_p,
                                     b.packet_sigma_x2, cfg.trap.hbar)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = floquet.expansion_coefficients(packet, fset)
    for w in caught:
        r.warn(str(w.message))
    k = np.arange(len(fset))
    r.csv("quasienergies.csv", ["k", "mu", "parity", "mean_energy", "modulus"],
          [k, fset.quasienergies, fset.parity, fset.mean_energy, fset.moduli],
          {"basis_size": b.size, "nu": b.nu, "defect": fset.defect,
           "core_defect": fset.core_defect})
    rank = rep.ranking
    r.csv("expansion.csv", ["rank", "k", "mu", "weight", "re_a", "im_a"],
          [np.arange(len(rank)), rank, fset.quasienergies[rank], rep.weights[rank],
           rep.coefficients[rank].real, rep.coefficients[rank].imag],
          {"completeness": rep.completeness})
    top = rank[:min(b.report_modes, len(rank))]
    dists = [floquet.floquet_position_distribution(fset, i) for i in top]
    r.csv("mode_distributions.csv", ["x"] + [f"mode_{i}" for i in top],
          [cfg.grid.x] + [d.density for d in dists])
    pairs = floquet.detect_doublets(fset, cfg.sweep.doublet_tolerance)
    r.csv("doublets.csv", ["first", "second", "splitting", "center"],
          [[d.first for d in pairs], [d.second for d in pairs],
           [d.splitting for d in pairs], [d.center for d in pairs]],
          {"tolerance": cfg.sweep.doublet_tolerance})
    r.guards = {"defect": fset.defect, "core_defect": fset.core_defect}
    r.summary.update({
        "completeness": rep.completeness,
        "largest_weight": float(rep.weights[rank[0]]),
        "largest_state": int(rank[0]),
        "top4_weight": float(rep.weights[rank[:4]].sum()),
        "doublets": len(pairs),
    })


def _run_sweep(r):
    cfg = r.cfg
    b = cfg.basis
    basis = floquet.ReferenceBasis(cfg.grid, b.nu, b.size, cfg.trap.hbar)
    omegas = cfg.sweep.couplings()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = floquet.sweep_quasienergies(cfg.trap, omegas, basis, b.dt,
                                          workers=cfg.run.workers)
    for w in caught:
        r.warn(str(w.message))
    n, M = res.quasienergies.shape
    flagged = res.overlaps < 0.5
    r.csv("sweep.csv",
          ["omega", "curve", "mu", "parity", "mean_energy", "modulus", "overlap", "flagged"],
          [np.repeat(omegas, M), np.tile(np.arange(M), n), res.quasienergies.ravel(),
           res.parity.ravel(), res.mean_energy.ravel(), res.moduli.ravel(),
           res.overlaps.ravel(), flagged.ravel().astype(int)],
          {"basis_size": b.size, "nu": b.nu})
    rows = []
    for om, fset in zip(omegas, res.sets):
        d = floquet.lowest_doublet(fset)
        if d is not None:
            rows.append((om, d.first, d.second, d.splitting, d.center, d.distance_to_zero))
    cols = list(zip(*rows)) if rows else [[]] * 6
    r.csv("doublets.csv",
          ["omega", "first", "second", "splitting", "center", "distance_to_zero"], cols)
    r.guards = {"max_core_defect": float(max(s.core_defect for s in res.sets)),
                "ambiguous_matches": len(res.ambiguous)}
    r.summary["points"] = int(n)


def plan_report(setup, target_hbar=0.3):
    """Lines describing the dimensionless parameters of a laboratory setup."""
    red = reduce_to_dimensionless(setup)
    c = red.config
    stab = mathieu_exponent(c.a, c.q)
    lines = [
        f"effective hbar      : {c.hbar:.6g}",
        f"coupling            : {c.coupling:.6g}",
        f"epsilon             : {red.epsilon:.6g}",
        f"(a, q)              : ({c.a:g}, {c.q:g})",
    ]
    if stab.stable:
        lines.append(f"Mathieu exponent    : {stab.mu:.6g} (stable)")
    else:
        lines.append(f"Mathieu exponent    : unstable, growth rate {stab.growth_rate:.4g}")
    w = rf_frequency_for_hbar(setup, target_hbar)
    lines.append(f"rf for hbar={target_hbar:g}   : omega/2pi = {w / (2 * np.pi):.4g} Hz")
    warn = []
    if red.far_detuning_warning:
        warn.append(f"|epsilon| = {abs(red.epsilon):.3g} exceeds 0.2; "
                    "the far-detuned reduction is questionable")
    if not stab.stable:
        warn.append("trap parameters are outside the stable Mathieu region")
    return red, stab, lines, warn


def _run_plan(r):
    cfg = r.cfg
    red, stab, lines, warn = plan_report(cfg.setup, cfg.plan.target_hbar)
    for line in lines:
        print(line)
    for w in warn:
        r.warn(w)
    with open(r.path("plan.txt"), "w") as fh:
        fh.write("\n".join(lines + [f"warning: {w}" for w in warn]) + "\n")
    r.summary.update({
        "hbar": red.config.hbar, "coupling": red.config.coupling,
        "epsilon": red.epsilon, "far_detuning_warning": red.far_detuning_warning,
        "stable": stab.stable,
        "rf_frequency_for_target": rf_frequency_for_hbar(cfg.setup, cfg.plan.target_hbar),
    })


_EXPERIMENTS = {"poincare": _run_poincare, "evolve": _run_evolve,
                "floquet": _run_floquet, "sweep": _run_sweep, "plan": _run_plan}


def run(cfg):
    """Execute ``cfg`` and write its outputs plus ``manifest.json``.

    Returns the manifest dictionary.
    """
    os.makedirs(cfg.run.out_dir, exist_ok=True)
    r = _Run(cfg)
    t0 = time.perf_counter()
    _EXPERIMENTS[cfg.kind](r)
    wall = time.perf_counter() - t0
    resolved = configmod.emit_config(cfg)
    with open(r.path("config.conf"), "w") as fh:
        fh.write(resolved)
    manifest = {
        "tool": "paultrap",
        "version": _version(),
        "experiment": cfg.kind,
        "seed": cfg.run.seed,
        "workers": cfg.run.workers,
        "config": configmod.as_dict(cfg),
        "config_text": resolved,
        "wall_time_s": wall,
        "guards": r.guards,
        "warnings": r.warnings,
        "summary": r.summary,
        "files": {name: _sha256(os.path.join(r.out, name)) for name in r.files},
    }
    with open(os.path.join(r.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, default=float)
    return manifest


def build_parser():
    parser = argparse.ArgumentParser(
        prog="paultrap",
        description="Classical, quantum and Floquet simulations of an ion in a "
                    "Paul trap with a standing-wave potential.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "poincare": "stroboscopic sections of single trajectories",
        "evolve": "classical ensemble and quantum packet spreads and distributions",
        "floquet": "Floquet spectrum and packet expansion at one coupling",
        "sweep": "quasienergies versus coupling",
        "plan": "dimensionless parameters of a laboratory setup",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="run configuration file")
        p.add_argument("--seed", type=int, help="override [run] seed")
        p.add_argument("--workers", type=int, help="worker processes (results do not depend on it)")
        p.add_argument("--out-dir", help="override [run] out_dir")
        p.add_argument("--dt", type=float, help="override the time step")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = configmod.load_config(args.config)
        if cfg.kind != args.command:
            raise ConfigError(f"configuration is for '{cfg.kind}', not '{args.command}'",
                              key="kind")
        cfg = configmod.with_overrides(cfg, args.seed, args.workers, args.out_dir, args.dt)
        manifest = run(cfg)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalGuardError as exc:
        print(f"numerical guard failure: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {len(manifest['files'])} files to {cfg.run.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
