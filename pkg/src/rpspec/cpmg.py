"""Evenly spaced echo-train spectroscopy baseline and resource comparison.

A sweep fixes the total time T and steps the (even) segment count M; the point
(M, tau = T/M) runs M/2 pulses at period 2*tau, whose window has its first
passband exactly at the probe frequency pi/(2*tau) = M*pi/(2*T). Sweep points
therefore cover (0, omega_c] uniformly with spacing pi/T. The resource metric
reported for a sweep is N_set = 2*omega_c*T/pi.

Inversion convention: for a two-sided density that is flat across the first
passband, chi = (8*T/pi^2) * S(probe) up to O(1/M) corrections (the window's
passband mass; all-harmonic sum reproduces Parseval). The probe estimate is
therefore S_hat = pi^2 * chi / (8*T).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
import numpy as np

from .errors import DecoherenceFloorError
from .pulse import chi_exact, window_cpmg
from .spectra import FrequencyGrid, NoiseSpectrum
from .util import derive_seed

CHI_PASSBAND_COEFF = 8.0 / np.pi**2  # chi / (T * S(probe)), two-sided density


@dataclass(frozen=True)
class SweepPoint:
    m_segments: int
    tau: float
    probe: float


@dataclass(frozen=True, eq=False)
class CpmgSweep:
    total_time: float
    omega_c: float
    points: tuple
    n_set: int


def build_sweep(total_time: float, omega_c: float) -> CpmgSweep:
    """All even segment counts whose probe M*pi/(2T) stays inside the band."""
    if total_time <= 0:
        raise ValueError("total time must be positive")
    m_max = 2 * int(np.floor(omega_c * total_time / np.pi))
    points = []
    for m in range(2, m_max + 1, 2):
        tau = total_time / m
        points.append(SweepPoint(m, tau, np.pi / (2.0 * tau)))
    n_set = int(round(2.0 * omega_c * total_time / np.pi))
    return CpmgSweep(total_time, omega_c, tuple(points), n_set)


def sweep_for_n_set(n_set: int, omega_c: float) -> CpmgSweep:
    """Sweep whose closed-form resource count equals n_set."""
    if n_set <= 0:
        return CpmgSweep(0.0, omega_c, tuple(), 0)
    return build_sweep(n_set * np.pi / (2.0 * omega_c), omega_c)


@dataclass(frozen=True, eq=False)
class SpectroscopyResult:
    probes: np.ndarray
    estimates: np.ndarray
    n_set: int


def cpmg_spectroscopy(spectrum: NoiseSpectrum, sweep: CpmgSweep,
                      n_shots: int | None = None, seed: int = 0,
                      quad_n: int | None = None) -> SpectroscopyResult:
    """Probe-grid spectrum estimate S_hat(probe) = pi^2 chi / (8 T).

    Analytic (no shot noise) unless n_shots is given. Probes beyond the
    cutoff are skipped with a warning.
    """
    if quad_n is None:
        quad_n = max(2048, 8 * int(np.ceil(spectrum.omega_c * sweep.total_time / np.pi)))
    grid = FrequencyGrid(quad_n, spectrum.omega_c)
    probes, est = [], []
    for idx, pt in enumerate(sweep.points):
        if pt.probe > spectrum.omega_c * (1 + 1e-12):
            warnings.warn(f"probe {pt.probe:.4g} beyond cutoff; skipped")
            continue
        m_pulses = pt.m_segments // 2
        win = window_cpmg(m_pulses, 2.0 * pt.tau, grid)
        chi = chi_exact(spectrum, win)
        if n_shots is not None:
            rng = np.random.default_rng(derive_seed(seed, idx))
            p0 = 0.5 * (1.0 + np.exp(-chi))
            coher = 2.0 * rng.binomial(n_shots, p0) / n_shots - 1.0
            if coher <= 0.0:
                raise DecoherenceFloorError(
                    f"coherence {coher:.3g} <= 0 at probe {pt.probe:.4g}", coher)
            chi = -np.log(coher)
        probes.append(pt.probe)
        est.append(chi / (CHI_PASSBAND_COEFF * sweep.total_time))
    return SpectroscopyResult(np.asarray(probes), np.asarray(est), sweep.n_set)


def probe_peak_centers(result: SpectroscopyResult, top: int,
                       rel_threshold: float = 0.25) -> np.ndarray:
    """Peak probe frequencies: cluster consecutive above-threshold probes and
    take each cluster's maximum-estimate probe, largest clusters first."""
    if result.estimates.size == 0 or result.estimates.max() <= 0:
        return np.zeros(0)
    above = np.nonzero(result.estimates >= rel_threshold * result.estimates.max())[0]
    if above.size == 0:
        return np.zeros(0)
    breaks = np.nonzero(np.diff(above) > 1)[0]
    centers, heights = [], []
    for chunk in np.split(above, breaks + 1):
        j = chunk[int(np.argmax(result.estimates[chunk]))]
        centers.append(result.probes[j])
        heights.append(result.estimates[j])
    order = np.argsort(heights)[::-1][:top]
    return np.asarray(centers)[np.sort(order)]


@dataclass(frozen=True)
class ComparisonRow:
    method: str
    n_set: int
    linf_error: float
    replica: int


def resource_comparison(spectrum: NoiseSpectrum, truth_centers,
                        cs_m_values, cpmg_n_sets, *, grid_n: int,
                        m_segments: int, tau: float, seed: int,
                        replicas: int = 10, top: int = 3,
                        penalty_scale: float = 1e-3, merge_gap: int = 3,
                        dither: float = 0.025) -> list[ComparisonRow]:
    """Peak-frequency accuracy vs number of experiment sets, both methods.

    Sparse recovery counts N_set = m + 1 (m lag experiments plus one base);
    the sweep baseline counts N_set = 2*omega_c*T/pi. Replicas redraw the lag
    subset (sparse recovery) or dither T by up to +-dither (sweep), which
    averages out probe-grid quantization. Empty inputs yield empty rows.
    """
    from .csrecon import (acquire_measurements, draw_lags, extract_peaks,
                          peak_deviation, reconstruct)
    from .experiment import ExperimentPlan

    truth = np.asarray(truth_centers, dtype=float)
    rows: list[ComparisonRow] = []
    grid = FrequencyGrid(grid_n, spectrum.omega_c)
    for m in cs_m_values:
        if m <= 0:
            continue
        for r in range(replicas):
            lag_seed = derive_seed(seed, 7_000_000 + 1000 * m + r)
            lags = draw_lags(m, m_segments, lag_seed)
            plan = ExperimentPlan(m_segments, tau, 1, 1, seed=lag_seed)
            meas = acquire_measurements(spectrum, lags, plan, grid, mode="exact")
            # survey solve: sweep budget capped, below-transition instances
            # are unrecoverable regardless of polish
            rec = reconstruct(meas, grid, penalty_scale=penalty_scale,
                              nonnegative=True, max_sweeps=3000, best_effort=True)
            centers = extract_peaks(rec, top, merge_gap=merge_gap).centers
            rows.append(ComparisonRow("cs", m + 1, peak_deviation(centers, truth), r))
    for n_set in cpmg_n_sets:
        if n_set <= 0:
            continue
        for r in range(replicas):
            frac = 0.0 if replicas == 1 else dither * (2.0 * r / (replicas - 1) - 1.0)
            t_eff = n_set * np.pi / (2.0 * spectrum.omega_c) * (1.0 + frac)
            sweep = build_sweep(t_eff, spectrum.omega_c)
            res = cpmg_spectroscopy(spectrum, sweep)
            centers = probe_peak_centers(res, top)
            rows.append(ComparisonRow("cpmg", int(n_set),
                                      peak_deviation(centers, truth), r))
    return rows
