"""Independent oracles used across the test suite.

Everything here recomputes expected values by a route different from the
implementation under test: brute-force segment integrals, full enumeration,
exhaustive least squares, or wide-band quadrature via periodization.
"""

from __future__ import annotations

import itertools

import numpy as np

from rpspec.pulse import PulseSequence, window_exact
from rpspec.spectra import FrequencyGrid


def segmentwise_fourier_mag2(signs: np.ndarray, tau: float, omega: float) -> float:
    """|f~(omega)|^2 via direct per-segment antiderivatives (no sinc product)."""
    total = 0.0 + 0.0j
    for i, u in enumerate(signs):
        a, b = i * tau, (i + 1) * tau
        if omega == 0:
            total += u * (b - a)
        else:
            total += u * (np.exp(-1j * omega * a) - np.exp(-1j * omega * b)) / (1j * omega)
    return float(abs(total) ** 2)


_phi_cache: dict = {}


def _periodized_sinc2(periods: int, points: int) -> np.ndarray:
    key = (periods, points)
    if key not in _phi_cache:
        theta = (np.arange(points) + 0.5) * (2.0 * np.pi / points)
        phi = np.zeros(points)
        for k in range(-periods, periods):
            x = 0.5 * theta + np.pi * k
            phi += np.where(x == 0.0, 1.0,
                            np.sin(x) ** 2 / np.where(x == 0.0, 1.0, x) ** 2)
        _phi_cache[key] = phi
    return _phi_cache[key]


def band_window_integral(signs: np.ndarray, tau: float, periods: int,
                         points: int = 4096) -> float:
    """(1/2pi) * integral of W over [-2pi*periods/tau, +2pi*periods/tau].

    Uses the 2pi-periodicity of the phase sum in theta = omega*tau: one
    period of |g|^2 is reused across the whole band through the periodized
    sinc^2 envelope (cached; it does not depend on the sequence).
    """
    signs = np.asarray(signs, dtype=float)
    m = signs.size
    theta = (np.arange(points) + 0.5) * (2.0 * np.pi / points)
    g2 = np.abs(np.exp(-1j * np.outer(theta, np.arange(1, m + 1) - 0.5)) @ signs) ** 2
    phi = _periodized_sinc2(periods, points)
    return float(tau / points * (g2 * phi).sum())


def markov_expected_window(r1: float, m: int, tau: float,
                           grid: FrequencyGrid) -> np.ndarray:
    """Mean window under the stationary two-state Markov measure with lag-1
    autocovariance r1, by full enumeration of all 2^m sign vectors."""
    p_stay = 0.5 * (1.0 + r1)
    total = np.zeros(grid.n)
    for bits in itertools.product((1.0, -1.0), repeat=m):
        signs = np.array(bits)
        prob = 0.5
        for a, b in zip(signs[:-1], signs[1:]):
            prob *= p_stay if a == b else 1.0 - p_stay
        total += prob * window_exact(PulseSequence(signs, tau), grid).samples
    return total


def exhaustive_sparse_ls(b: np.ndarray, y: np.ndarray, s: int):
    """Global minimizer of ||b x - y||^2 over all supports of size <= s."""
    n = b.shape[1]
    best = (np.inf, None, None)
    for size in range(1, s + 1):
        for sup in itertools.combinations(range(n), size):
            cols = b[:, list(sup)]
            coef, *_ = np.linalg.lstsq(cols, y, rcond=None)
            r = cols @ coef - y
            val = float(r @ r)
            if val < best[0] - 1e-15:
                best = (val, np.array(sup), coef)
    return best


def fit_loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(np.asarray(xs, dtype=float)),
                            np.log(np.asarray(ys, dtype=float)), 1)[0])


def _subset_ls(b, sup, y):
    cols = b[:, list(sup)]
    coef, *_ = np.linalg.lstsq(cols, y, rcond=None)
    r = cols @ coef - y
    return float(r @ r), coef


def lasso_refit_pipeline(design, y, s: int):
    """Sign-constrained LASSO screen, best-subset refit, single-atom swap polish.

    The l1 relaxation alone is occasionally loose this close to the recovery
    transition; the refit stage restores the combinatorial optimum from the
    screened candidates.
    """
    from rpspec.csrecon import lasso_solve_path, null_penalty

    b = design.folded_operator
    pen = 1e-3 * null_penalty(design, y)
    x = lasso_solve_path(design, y, pen, nonnegative=True, max_sweeps=4000,
                         best_effort=True)
    cand = np.nonzero(x > 1e-8 * max(float(x.max()), 1e-300))[0]
    if cand.size == 0:
        cand = np.arange(min(s, b.shape[1]))
    best = (np.inf, None, None)
    for size in range(1, s + 1):
        for sup in itertools.combinations(cand.tolist(), size):
            val, coef = _subset_ls(b, sup, y)
            if val < best[0] - 1e-15:
                best = (val, list(sup), coef)
    val, sup, coef = best
    improved = True
    while improved:
        improved = False
        for pos in range(len(sup)):
            for j in range(b.shape[1]):
                if j in sup:
                    continue
                trial = sup.copy()
                trial[pos] = j
                v, c = _subset_ls(b, trial, y)
                if v < val - 1e-15:
                    sup, val, coef = sorted(trial), v, c
                    improved = True
    return np.array(sup), coef
