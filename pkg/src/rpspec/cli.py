"""Command-line front end: every pipeline stage as a subcommand, with presets
that regenerate the headline studies at desk scale.

Outputs are CSV (RFC-4180, LF, 17-significant-digit floats) plus a JSON
manifest recording the fully resolved configuration, seeds, package versions,
and wall time; re-running from a manifest alone reproduces the run, and equal
configurations produce byte-identical CSV files.

Exit codes: 0 success, 2 configuration or feasibility errors (no partial
outputs are left behind), 3 solver failure (the instance is dumped for
replay).
"""

from __future__ import annotations

import argparse
import platform
import sys
import time

import numpy as np

from . import __version__
from .cpmg import resource_comparison
from .csrecon import (acquire_measurements, draw_lags, phase_transition_study,
                      reconstruct)
from .errors import RpspecError, SolverFailureError
from .experiment import (ExperimentPlan, ensemble_mean_window, extracted_target,
                         profile_and_design)
from .io import read_csv, read_json, write_csv, write_json
from .seqgen import (base_design, base_profile, cos_lag_target, expected_window,
                     target_from_table, zero_target)
from .spectra import (FrequencyGrid, ground_truth_centers, quantum_dot_standin,
                      random_sparse)
from .util import derive_seed

PRESETS = {
    "fig2": {
        "subcommand": "window",
        "omega_c": np.pi, "m_segments": 50, "lag": 3, "grid_n": 250,
        "n_sequences": 200,
    },
    "fig3a": {
        "subcommand": "cs",
        "omega_c": 2 * np.pi, "grid_n": 250, "sparsity": 2, "n_lags": 12,
        "m_segments": 250, "n_sequences": 1000, "n_shots": 50,
        "lag_max": 125, "mode": "shots", "nonnegative": True,
    },
    "fig3b": {
        "subcommand": "phase",
        "omega_c": np.pi, "grid_n": 250, "m_segments": 250,
        "sparsities": [2, 5, 8], "trials": 20,
        "m_range": list(range(2, 31, 2)),
    },
    "fig5": {
        "subcommand": "compare",
        "omega_c": np.pi, "m_segments": 200, "grid_n": 667, "coarse_grid_n": 167,
        "peaks": [[0.25 * np.pi, 0.013, 1.0], [0.28 * np.pi, 0.013, 0.8],
                  [0.32 * np.pi, 0.013, 0.6]],
        "cs_m_values": [9, 17, 25, 33, 41, 49],
        "cpmg_n_sets": [50, 100, 200, 400, 600, 800],
        "replicas": 9,
    },
}


def _resolve_config(args) -> dict:
    config: dict = {}
    if args.preset:
        if args.preset not in PRESETS:
            raise ValueError(f"unknown preset {args.preset!r}")
        config.update(PRESETS[args.preset])
        config["preset"] = args.preset
    if args.config:
        config.update(read_json(args.config))
    for key, val in vars(args).items():
        if key in ("config", "preset", "from_manifest", "func") or val is None:
            continue
        config[key] = val
    if config.get("seed") is None:
        raise ValueError("a seed is required (pass --seed)")
    return config


def _write_manifest(out_dir: str, subcommand: str, config: dict, outputs: list,
                    extra: dict, t0: float) -> None:
    clean = {k: (v.tolist() if isinstance(v, np.ndarray) else v)
             for k, v in config.items() if k not in ("out",)}
    write_json(f"{out_dir}/manifest.json", {
        "subcommand": subcommand,
        "config": clean,
        "outputs": outputs,
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "wall_time_s": time.monotonic() - t0,
        **extra,
    })


def cmd_window(config: dict) -> dict:
    omega_c = float(config["omega_c"])
    tau = np.pi / omega_c
    m = int(config["m_segments"])
    grid = FrequencyGrid(int(config["grid_n"]), omega_c)
    lam = config.get("lam")
    if config.get("target_csv"):
        table = read_csv(config["target_csv"])
        if lam is None:
            raise ValueError("a correlation cutoff (--lam) is required for CSV targets")
        target = target_from_table(table["omega"], table["t"], int(lam), omega_c)
    elif int(config.get("lag", 0) or 0) > 0:
        target = cos_lag_target(int(config["lag"]), omega_c)
    else:
        target = zero_target(omega_c)
    profile, design = profile_and_design(target, m, tau)
    seed = int(config["seed"])
    n_seq = int(config["n_sequences"])
    ew = expected_window(profile, m, tau, grid)
    ewb = expected_window(base_profile(m), m, tau, grid)
    ens = ensemble_mean_window(design, m, tau, grid, n_seq, derive_seed(seed, 1))
    ens_base = ensemble_mean_window(base_design(), m, tau, grid, n_seq,
                                    derive_seed(seed, 0))
    t_est = extracted_target(ens, ens_base, profile.c, profile.t0, m, tau)
    t_est0 = (ens.mean_w0 - (1.0 - profile.c * profile.t0) * ens_base.mean_w0) \
        / (profile.c * m * tau**2)
    omegas = np.concatenate(([0.0], grid.points))
    out = config["out"]
    files = {
        "expected_window.csv": np.concatenate(([ew.w0], ew.samples)),
        "expected_base_window.csv": np.concatenate(([ewb.w0], ewb.samples)),
        "ensemble_window.csv": np.concatenate(([ens.mean_w0], ens.mean)),
        "extracted_target.csv": np.concatenate(([t_est0], t_est)),
    }
    for name, col in files.items():
        write_csv(f"{out}/{name}", ["omega", "value"], [omegas, col])
    return {"outputs": sorted(files), "extra": {"c": profile.c, "t0": profile.t0,
                                                "design_residual": design.residual}}


def cmd_cs(config: dict) -> dict:
    omega_c = float(config["omega_c"])
    tau = np.pi / omega_c
    grid = FrequencyGrid(int(config["grid_n"]), omega_c)
    seed = int(config["seed"])
    truth = None
    if config.get("spectrum_json"):
        from .spectra import load_spectrum_json

        spectrum = load_spectrum_json(config["spectrum_json"])
    else:
        truth = random_sparse(grid, int(config["sparsity"]), derive_seed(seed, 1))
        spectrum = truth.as_spectrum()
    lags = draw_lags(int(config["n_lags"]), int(config["m_segments"]),
                     derive_seed(seed, 2), k_max=config.get("lag_max"))
    plan = ExperimentPlan(
        m_segments=int(config["m_segments"]), tau=tau,
        n_sequences=int(config["n_sequences"]), n_shots=int(config["n_shots"]),
        seed=seed, workers=int(config.get("workers", 1)))
    mode = "analytic" if config.get("analytic_shots") else config.get("mode", "shots")
    meas = acquire_measurements(spectrum, lags, plan, grid, mode=mode)
    rec = reconstruct(meas, grid, nonnegative=bool(config.get("nonnegative", False)),
                      max_sweeps=int(config.get("max_sweeps", 100_000)))
    out = config["out"]
    write_csv(f"{out}/reconstruction.csv", ["omega", "s_est"],
              [grid.points, rec.values])
    write_csv(f"{out}/measurements.csv", ["lag", "value", "stderr", "c_scale"],
              [meas.lags, meas.values, meas.stderrs, meas.c_scales])
    from .csrecon import extract_peaks

    table = extract_peaks(rec, int(config.get("top_peaks", 5)))
    write_csv(f"{out}/peaks.csv", ["center", "mass", "lo", "hi"],
              [[p.center for p in table.peaks], [p.mass for p in table.peaks],
               [p.lo for p in table.peaks], [p.hi for p in table.peaks]])
    outputs = ["reconstruction.csv", "measurements.csv", "peaks.csv"]
    extra = {"penalty": rec.penalty, "support": rec.support.tolist(),
             "residual": rec.residual, "support_exact": None}
    if truth is not None:
        write_csv(f"{out}/true_spectrum.csv", ["omega", "s"],
                  [grid.points, truth.values])
        outputs.append("true_spectrum.csv")
        extra["support_exact"] = bool(np.array_equal(rec.support, truth.support))
        extra["linf_error"] = float(np.abs(rec.values - truth.values).max())
    return {"outputs": sorted(outputs), "extra": extra}


def cmd_phase(config: dict) -> dict:
    omega_c = float(config["omega_c"])
    grid = FrequencyGrid(int(config["grid_n"]), omega_c)
    study = phase_transition_study(
        [int(s) for s in config["sparsities"]],
        [int(m) for m in config["m_range"]],
        int(config["trials"]), grid, int(config["m_segments"]),
        np.pi / omega_c, int(config["seed"]),
        journal_path=config.get("journal"))
    out = config["out"]
    write_csv(f"{out}/phase.csv", ["sparsity", "n_lags", "mean_linf"],
              [[r.sparsity for r in study.rows], [r.n_lags for r in study.rows],
               [r.mean_linf for r in study.rows]])
    ss = sorted(study.m_c)
    write_csv(f"{out}/mc.csv", ["sparsity", "m_c"],
              [ss, [-1 if study.m_c[s] is None else study.m_c[s] for s in ss]])
    return {"outputs": ["mc.csv", "phase.csv"],
            "extra": {"m_c": {str(k): v for k, v in study.m_c.items()}}}


def cmd_compare(config: dict) -> dict:
    omega_c = float(config["omega_c"])
    tau = np.pi / omega_c
    spectrum = quantum_dot_standin([tuple(p) for p in config["peaks"]], omega_c)
    truth = ground_truth_centers(spectrum, top=3)
    seed = int(config["seed"])
    rows = resource_comparison(
        spectrum, truth, config["cs_m_values"], config["cpmg_n_sets"],
        grid_n=int(config["grid_n"]), m_segments=int(config["m_segments"]),
        tau=tau, seed=seed, replicas=int(config["replicas"]))
    labeled = [("cs-%d" % int(config["grid_n"]) if r.method == "cs" else r.method,
                r.n_set, r.linf_error, r.replica) for r in rows]
    if config.get("coarse_grid_n"):
        rows167 = resource_comparison(
            spectrum, truth, config["cs_m_values"], [],
            grid_n=int(config["coarse_grid_n"]), m_segments=int(config["m_segments"]),
            tau=tau, seed=seed, replicas=int(config["replicas"]))
        labeled += [("cs-%d" % int(config["coarse_grid_n"]), r.n_set,
                     r.linf_error, r.replica) for r in rows167]
    out = config["out"]
    write_csv(f"{out}/compare.csv", ["method", "n_set", "linf_error", "replica"],
              [[r[0] for r in labeled], [r[1] for r in labeled],
               [r[2] for r in labeled], [r[3] for r in labeled]])
    return {"outputs": ["compare.csv"],
            "extra": {"truth_centers": truth.tolist()}}


_COMMANDS = {"window": cmd_window, "cs": cmd_cs, "phase": cmd_phase,
             "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rpspec",
        description="random-pulse qubit noise spectroscopy toolkit")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--preset", default=None)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--from-manifest", dest="from_manifest", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--analytic-shots", dest="analytic_shots",
                       action="store_true", default=None)
        if name == "window":
            p.add_argument("--lag", type=int, default=None)
            p.add_argument("--lam", dest="lam", type=int, default=None)
            p.add_argument("--target-csv", dest="target_csv", default=None)
            p.add_argument("--n-sequences", dest="n_sequences", type=int, default=None)
        if name == "cs":
            p.add_argument("--spectrum-json", dest="spectrum_json", default=None)
            p.add_argument("--max-sweeps", dest="max_sweeps", type=int, default=None)
            p.add_argument("--n-lags", dest="n_lags", type=int, default=None)
        if name == "phase":
            p.add_argument("--trials", type=int, default=None)
            p.add_argument("--journal", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.monotonic()
    try:
        if args.from_manifest:
            doc = read_json(args.from_manifest)
            config = dict(doc["config"])
            subcommand = doc["subcommand"]
            if args.out is not None:
                config["out"] = args.out
        else:
            config = _resolve_config(args)
            subcommand = args.subcommand
        if not config.get("out"):
            raise ValueError("an output directory is required (pass --out)")
        if config.get("target_csv"):
            # validate inputs before producing anything
            open(config["target_csv"], "rb").close()
        if config.get("spectrum_json"):
            open(config["spectrum_json"], "rb").close()
        import os

        os.makedirs(config["out"], exist_ok=True)
        result = _COMMANDS[subcommand](config)
    except SolverFailureError as exc:
        out = config.get("out", ".")
        write_json(f"{out}/solver_failure.json",
                   {"error": str(exc), "gap": exc.gap, "config": {
                       k: (v.tolist() if isinstance(v, np.ndarray) else v)
                       for k, v in config.items()}})
        print(f"error: {exc} (instance dumped for replay)", file=sys.stderr)
        return 3
    except (RpspecError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _write_manifest(config["out"], subcommand, config, result["outputs"],
                    result["extra"], t0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
