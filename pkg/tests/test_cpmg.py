import numpy as np
import pytest

from rpspec.cpmg import (build_sweep, cpmg_spectroscopy, probe_peak_centers,
                         resource_comparison, sweep_for_n_set)
from rpspec.csrecon import peak_deviation
from rpspec.spectra import (NoiseSpectrum, ground_truth_centers,
                            quantum_dot_standin)

WC = np.pi


def test_sweep_construction_and_accounting():
    t = 100.0
    sweep = build_sweep(t, WC)
    assert sweep.n_set == round(2 * WC * t / np.pi)
    probes = np.array([p.probe for p in sweep.points])
    assert np.all(np.diff(probes) > 0)
    assert probes.max() <= WC * (1 + 1e-12)
    # uniform coverage with spacing pi/T over even segment counts
    assert np.allclose(np.diff(probes), np.pi / t)
    for p in sweep.points:
        assert p.m_segments % 2 == 0
        assert p.probe == pytest.approx(np.pi / (2 * p.tau))


def test_sweep_for_n_set_zero_is_empty():
    sweep = sweep_for_n_set(0, WC)
    assert sweep.points == tuple()
    assert sweep.n_set == 0


def test_flat_spectrum_midband_recovery():
    # large pulse count: probe estimate within 5 percent of the flat level
    flat = NoiseSpectrum("flat", {"level": 2.0}, WC)
    sweep = build_sweep(160.0, WC)
    res = cpmg_spectroscopy(flat, sweep)
    mid = (res.probes > 0.35 * WC) & (res.probes < 0.85 * WC)
    # the window_cpmg pulse count at the probe is m_segments/2 >= 56 here
    ratio = res.estimates[mid] / 2.0
    assert np.all(np.abs(ratio - 1.0) <= 0.05)


def test_zero_spectrum_estimates_zero():
    zero = NoiseSpectrum("flat", {"level": 0.0}, WC)
    res = cpmg_spectroscopy(zero, build_sweep(40.0, WC))
    assert np.allclose(res.estimates, 0.0)


def test_probe_beyond_cutoff_skipped_with_warning():
    from rpspec.cpmg import CpmgSweep, SweepPoint

    narrow = NoiseSpectrum("flat", {"level": 1.0}, 0.5 * WC)
    sweep = CpmgSweep(20.0, WC, (SweepPoint(4, 5.0, np.pi / 10.0),
                                 SweepPoint(38, 20.0 / 38.0, 0.95 * WC)), 20)
    with pytest.warns(UserWarning):
        res = cpmg_spectroscopy(narrow, sweep)
    assert res.probes.size == 1


def test_shot_noise_mode_deterministic():
    flat = NoiseSpectrum("flat", {"level": 0.05}, WC)
    sweep = build_sweep(30.0, WC)
    a = cpmg_spectroscopy(flat, sweep, n_shots=200, seed=4)
    b = cpmg_spectroscopy(flat, sweep, n_shots=200, seed=4)
    assert np.array_equal(a.estimates, b.estimates)


def test_probe_peak_centers_picks_largest():
    res_probes = np.linspace(0.1, 3.0, 30)
    est = np.zeros(30)
    est[[5, 6, 7]] = [0.5, 2.0, 0.6]
    est[[20, 21]] = [1.0, 0.9]
    from rpspec.cpmg import SpectroscopyResult

    r = SpectroscopyResult(res_probes, est, 30)
    centers = probe_peak_centers(r, top=2)
    assert np.allclose(centers, [res_probes[6], res_probes[20]])


def standin():
    return quantum_dot_standin(
        [(0.25 * WC, 0.013, 1.0), (0.28 * WC, 0.013, 0.8), (0.32 * WC, 0.013, 0.6)],
        WC)


def test_unresolved_at_coarse_sweep_resolved_at_fine():
    spec = standin()
    truth = ground_truth_centers(spec, top=3)
    spacing = 0.03 * WC  # closest pair of configured centers
    coarse = cpmg_spectroscopy(spec, sweep_for_n_set(50, WC))
    dev_coarse = peak_deviation(probe_peak_centers(coarse, 3), truth)
    fine = cpmg_spectroscopy(spec, sweep_for_n_set(500, WC))
    dev_fine = peak_deviation(probe_peak_centers(fine, 3), truth)
    assert dev_coarse > spacing
    assert dev_fine < 0.25 * spacing


def test_resource_comparison_empty_inputs():
    spec = standin()
    rows = resource_comparison(spec, ground_truth_centers(spec, 3), [], [0],
                               grid_n=167, m_segments=64, tau=1.0, seed=1,
                               replicas=2)
    assert rows == []


def test_resource_comparison_row_shape():
    spec = standin()
    rows = resource_comparison(spec, ground_truth_centers(spec, 3), [33], [400],
                               grid_n=167, m_segments=200, tau=1.0, seed=1,
                               replicas=2)
    methods = {r.method for r in rows}
    assert methods == {"cs", "cpmg"}
    assert all(r.n_set in (34, 400) for r in rows)
    assert all(np.isfinite(r.linf_error) for r in rows)
