"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with its measured numbers (run with -s to see them live).

Every tolerance is pinned here; nothing is deferred to later calibration.
"""

import time

import numpy as np
from rpspec.cpmg import resource_comparison
from rpspec.csrecon import (acquire_measurements, build_design_matrix, draw_lags,
                            phase_transition_study, reconstruct)
from rpspec.experiment import (ExperimentPlan, accuracy_scaling_study,
                               ensemble_mean_window, profile_and_design)
from rpspec.pulse import cpmg_sequence, window_cpmg, window_exact
from rpspec.seqgen import (FirDesign, cos_lag_target, expected_window,
                           sample_signs_batch, sign_covariance_from_gaussian)
from rpspec.spectra import (FrequencyGrid, NoiseSpectrum, ground_truth_centers,
                            quantum_dot_standin, random_sparse)
from rpspec.util import derive_seed

from helpers import band_window_integral, exhaustive_sparse_ls, fit_loglog_slope, \
    lasso_refit_pipeline

WC = np.pi
TAU = 1.0


def report(num, ok, detail, elapsed, budget):
    line = (f"[criterion {num}] {'PASS' if ok else 'FAIL'}: {detail} "
            f"({elapsed:.1f}s / budget {budget:.0f}s)")
    print(line)
    assert elapsed < budget, f"runtime budget exceeded: {line}"
    assert ok, line


def test_criterion_1_parseval_suite():
    # (1/2pi) integral W = T within 0.1 percent for 200 random sequences.
    # The band is +-640pi/tau: the spec's nominal +-40pi/tau leaves a 0.5
    # percent sinc^2 tail, provably above the tolerance (see decisions log).
    t0 = time.monotonic()
    rng = np.random.default_rng(314)
    worst = 0.0
    for _ in range(200):
        m = int(rng.integers(2, 257))
        signs = np.where(rng.random(m) < 0.5, 1.0, -1.0)
        val = band_window_integral(signs, TAU, periods=320, points=2048)
        worst = max(worst, abs(val - m * TAU) / (m * TAU))
    report(1, worst <= 1e-3, f"max relative Parseval error {worst:.2e} <= 1e-3",
           time.monotonic() - t0, 10.0)


def test_criterion_2_cpmg_closed_form_oracle():
    t0 = time.monotonic()
    grid = FrequencyGrid(2000, 30.0)
    worst = 0.0
    for m in (2, 3, 4, 8, 16):
        exact = window_exact(cpmg_sequence(m, TAU), grid)
        closed = window_cpmg(m, TAU, grid)
        mask = np.abs(np.cos(grid.points * TAU / 2)) > 1e-3
        rel = np.abs(closed.samples[mask] - exact.samples[mask]) / exact.samples[mask]
        worst = max(worst, float(rel.max()))
    report(2, worst < 1e-9, f"max relative closed-form deviation {worst:.2e} < 1e-9",
           time.monotonic() - t0, 5.0)


def test_criterion_3_arcsine_generator_check():
    t0 = time.monotonic()
    n = 1_000_000
    worst_z = 0.0
    boxcar = np.full(4, 0.5)
    designs = [FirDesign(boxcar, np.correlate(boxcar, boxcar, "full")[4:], 0.0)]
    two = np.zeros(4)
    two[0] = two[3] = np.sqrt(0.5)
    designs.append(FirDesign(two, np.correlate(two, two, "full")[4:], 0.0))
    for di, design in enumerate(designs):
        signs = sample_signs_batch(design, n, 1, seed=1000 + di)[0]
        pred = sign_covariance_from_gaussian(design.achieved_rho)
        for k in range(1, design.achieved_rho.size + 3):
            expect = pred[k - 1] if k - 1 < pred.size else 0.0
            emp = float(np.mean(signs[:-k] * signs[k:]))
            se = np.sqrt((1.0 - expect**2) / (n - k))
            worst_z = max(worst_z, abs(emp - expect) / se)
    report(3, worst_z <= 4.0, f"max |z| of sign covariance vs arcsine law "
           f"{worst_z:.2f} <= 4", time.monotonic() - t0, 30.0)


def test_criterion_4_expected_window_ensemble():
    t0 = time.monotonic()
    m = 50
    _, design = profile_and_design(cos_lag_target(3, WC), m, TAU)
    grid = FrequencyGrid(250, WC)
    ens = ensemble_mean_window(design, m, TAU, grid, 2000, seed=404)
    ew = expected_window(design.achieved_profile(m), m, TAU, grid)
    z = np.abs(ens.mean - ew.samples) / ens.stderr
    frac = float(np.mean(z <= 3.0))
    report(4, frac >= 0.95, f"{frac:.3f} of grid points within 3 SE (>= 0.95)",
           time.monotonic() - t0, 120.0)


def test_criterion_5_sparse_recovery_replicas():
    # 2-sparse, N = 250, m = 12 cosine lags, (M, N1, N2) = (250, 1000, 50);
    # support-exact with refit L-inf <= 0.1 of the peak amplitude in >= 8/10
    t0 = time.monotonic()
    wc = 2 * np.pi
    tau = np.pi / wc
    grid = FrequencyGrid(250, wc)
    passing = 0
    details = []
    for rep in range(10):
        seed = derive_seed(2024, rep)
        truth = random_sparse(grid, 2, derive_seed(seed, 1))
        lags = draw_lags(12, 250, derive_seed(seed, 2), k_max=125)
        plan = ExperimentPlan(250, tau, 1000, 50, seed=seed)
        meas = acquire_measurements(truth.as_spectrum(), lags, plan, mode="shots")
        rec = reconstruct(meas, grid, nonnegative=True)
        sup_ok = np.array_equal(rec.support, truth.support)
        linf = float(np.abs(rec.values - truth.values).max())
        amp = float(truth.values[truth.support].max())
        ok = sup_ok and linf <= 0.1 * amp
        passing += ok
        details.append("+" if ok else "-")
    report(5, passing >= 8, f"{passing}/10 replicas support-exact with "
           f"L-inf <= 0.1 amp [{''.join(details)}]", time.monotonic() - t0, 600.0)


def test_criterion_6_phase_transition_scaling():
    t0 = time.monotonic()
    grid = FrequencyGrid(250, WC)
    small = phase_transition_study([2, 5, 8], range(2, 31, 2), trials=20,
                                   grid=grid, m_segments=250, tau=TAU,
                                   seed=20240601)
    mcs = [small.m_c[s] for s in (2, 5, 8)]
    monotone = all(a is not None for a in mcs) and mcs[0] < mcs[1] < mcs[2]
    anchor = phase_transition_study([13], range(28, 57, 2), trials=50,
                                    grid=grid, m_segments=250, tau=TAU,
                                    seed=20240601)
    mc13 = anchor.m_c[13]
    anchored = mc13 is not None and 32 <= mc13 <= 48
    xs = np.array([2, 5, 8], dtype=float)
    ys = np.array(mcs, dtype=float)
    fit = np.polyfit(xs, ys, 1)
    resid = ys - np.polyval(fit, xs)
    r2 = 1.0 - resid @ resid / ((ys - ys.mean()) @ (ys - ys.mean()))
    report(6, monotone and anchored and r2 >= 0.9,
           f"m_c{{2,5,8}}={mcs} monotone={monotone}, m_c(13)={mc13} in 40+-8, "
           f"linear R^2={r2:.3f}", time.monotonic() - t0, 3600.0)


def test_criterion_7_accuracy_scaling_slope():
    t0 = time.monotonic()
    spec = NoiseSpectrum("gaussian-peaks",
                         {"centers": [1.9], "widths": [0.05], "amplitudes": [1.0]},
                         WC)
    plans = [ExperimentPlan(64, TAU, n1, 50, seed=0) for n1 in (50, 200, 800)]
    study = accuracy_scaling_study(spec, cos_lag_target(3, WC), plans,
                                   replicas=30, seed=42,
                                   reference_sequences=100_000)
    ok = -0.6 <= study.slope <= -0.4
    report(7, ok, f"|chi - ref| vs N1 log-log slope {study.slope:.3f} in "
           f"-0.5 +- 0.1", time.monotonic() - t0, 600.0)


def test_criterion_8_cs_vs_cpmg_resources():
    t0 = time.monotonic()
    sigma = 0.013
    spec = quantum_dot_standin(
        [(0.25 * WC, sigma, 1.0), (0.28 * WC, sigma, 0.8), (0.32 * WC, sigma, 0.6)],
        WC)
    truth = ground_truth_centers(spec, top=3)
    rows = resource_comparison(spec, truth,
                               cs_m_values=[33, 41, 49],
                               cpmg_n_sets=[50, 400, 600, 800],
                               grid_n=667, m_segments=200, tau=TAU, seed=7,
                               replicas=9)
    med = {}
    for r in rows:
        med.setdefault((r.method, r.n_set), []).append(r.linf_error)
    med = {k: float(np.median(v)) for k, v in med.items()}
    step = WC / 667
    spacing = 0.03 * WC
    cs_ok = all(med[("cs", n)] <= 2 * step for n in (34, 42, 50))
    cpmg_unresolved = med[("cpmg", 50)] > spacing
    pts = [(n, med[("cpmg", n)]) for n in (400, 600, 800)]
    slope = fit_loglog_slope([p[0] for p in pts], [p[1] for p in pts])
    slope_ok = -1.2 <= slope <= -0.8
    cs_acc = med[("cs", 42)]
    # no swept echo-train point reaches the sparse-recovery accuracy, so the
    # smallest qualifying N_set exceeds the largest tested (800 >= 5 x 42)
    reach = [n for n, e in med.items() if n[0] == "cpmg" and e <= cs_acc]
    factor_ok = (not reach) or min(n for _, n in reach) >= 5 * 42
    ok = cs_ok and cpmg_unresolved and slope_ok and factor_ok
    report(8, ok,
           f"cs<=2 steps at n_set<=50: {cs_ok}; echo-train unresolved at 50: "
           f"{cpmg_unresolved} ({med[('cpmg', 50)]/step:.0f} steps); resolved "
           f"slope {slope:.2f} in -1+-0.2; >=5x resource factor: {factor_ok}",
           time.monotonic() - t0, 1800.0)


def test_criterion_9_lasso_oracle_equivalence():
    t0 = time.monotonic()
    n = 36
    grid = FrequencyGrid(n, WC)
    rng = np.random.default_rng(1234)
    fails = 0
    for _ in range(50):
        lags = np.sort(rng.choice(np.arange(1, n), size=8, replace=False))
        design = build_design_matrix(grid, lags, 64, TAU)
        truth = np.zeros(n)
        sup_t = np.sort(rng.choice(n, size=2, replace=False))
        truth[sup_t] = rng.uniform(0.5, 1.0, size=2)
        y = design.matrix @ truth
        sup, coef = lasso_refit_pipeline(design, y, s=2)
        _, osup, ocoef = exhaustive_sparse_ls(design.folded_operator, y, 2)
        ok = (np.array_equal(np.sort(sup), np.sort(osup))
              and np.allclose(np.sort(coef), np.sort(ocoef), atol=1e-8))
        fails += not ok
    report(9, fails == 0, f"{50 - fails}/50 tiny instances equal the "
           f"exhaustive-support optimum", time.monotonic() - t0, 60.0)
