"""Sign sequences, their exact spectral windows, and the echo-train closed form.

A sequence of M signs U_i with segment duration tau defines the piecewise
constant phase-accumulation function f(t) = U_i on [(i-1)tau, i*tau]. Its
Fourier magnitude squared is the window W(omega) = |f~(omega)|^2 with

    f~(omega) = tau * sinc(omega*tau/2) * sum_i U_i exp(-1j*omega*(i - 1/2)*tau),

an exact closed sum (no FFT leakage). The decay exponent of a dephasing qubit
is chi = (1/2pi) * integral S(omega) W(omega) d omega.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .errors import RpspecError
from .spectra import FrequencyGrid, NoiseSpectrum
from .util import rectangle_folded, sinc_half, trapezoid_folded


@dataclass(frozen=True, eq=False)
class PulseSequence:
    """Signs in {+1, -1} per segment; a pulse sits wherever the sign flips."""

    signs: np.ndarray
    tau: float

    def __post_init__(self):
        signs = np.asarray(self.signs, dtype=float).copy()
        if signs.ndim != 1 or signs.size < 1:
            raise ValueError("need a one-dimensional sign vector with M >= 1")
        if not np.all(np.abs(signs) == 1.0):
            raise ValueError("signs must be +1 or -1")
        if not self.tau > 0:
            raise ValueError("segment duration must be positive")
        signs.setflags(write=False)
        object.__setattr__(self, "signs", signs)

    @property
    def m(self) -> int:
        return self.signs.size

    @property
    def total_time(self) -> float:
        return self.m * self.tau

    @property
    def pulse_times(self) -> np.ndarray:
        flips = np.nonzero(np.diff(self.signs))[0] + 1
        return flips * self.tau

    def to_json_dict(self) -> dict:
        return {"tau": self.tau, "signs": [int(s) for s in self.signs]}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PulseSequence":
        return cls(np.asarray(doc["signs"], dtype=float), float(doc["tau"]))


@dataclass(frozen=True, eq=False)
class WindowFunction:
    """W(omega) >= 0 sampled on a one-sided grid, plus the omega = 0 sample."""

    grid: FrequencyGrid
    samples: np.ndarray
    w0: float
    m_segments: int
    tau: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float).copy()
        if samples.shape != (self.grid.n,):
            raise ValueError("window samples must match the grid")
        if np.any(samples < 0) or self.w0 < 0:
            raise ValueError("window values must be >= 0")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)


def phase_sum_batch(signs: np.ndarray, tau: float, omegas: np.ndarray) -> np.ndarray:
    """|sum_i U_i exp(-1j*omega*(i-1/2)*tau)|^2 for a batch of sign rows."""
    signs = np.atleast_2d(np.asarray(signs, dtype=float))
    m = signs.shape[1]
    centers = (np.arange(1, m + 1) - 0.5) * tau
    phases = np.exp(-1j * np.outer(np.asarray(omegas, dtype=float), centers))
    z = signs @ phases.T
    return np.abs(z) ** 2


def window_samples_batch(signs: np.ndarray, tau: float, grid: FrequencyGrid):
    """Batched exact windows; returns (samples (B, n), w0 (B,))."""
    signs = np.atleast_2d(np.asarray(signs, dtype=float))
    env = (tau * sinc_half(grid.points, tau)) ** 2
    samples = env * phase_sum_batch(signs, tau, grid.points)
    w0 = (tau * signs.sum(axis=1)) ** 2
    return samples, w0


def window_exact(seq: PulseSequence, grid: FrequencyGrid) -> WindowFunction:
    """Exact window of one sequence, evaluated by the closed Fourier sum."""
    samples, w0 = window_samples_batch(seq.signs[None, :], seq.tau, grid)
    return WindowFunction(grid, samples[0], float(w0[0]), seq.m, seq.tau)


def cpmg_sequence(m_pulses: int, tau: float) -> PulseSequence:
    """Evenly spaced echo train: M pulses with period tau, free tau/2 at both ends.

    Represented on 2M half segments of duration tau/2 so the edge intervals
    are exact.
    """
    if m_pulses < 1:
        raise ValueError("need at least one pulse")
    j = np.arange(2 * m_pulses)
    signs = np.where(((j + 1) // 2) % 2 == 0, 1.0, -1.0)
    return PulseSequence(signs, tau / 2.0)


def window_cpmg(m_pulses: int, tau: float, grid: FrequencyGrid) -> WindowFunction:
    """Closed-form window of the evenly spaced echo train (period tau).

        W(omega) = (16/omega^2) sin^4(omega tau/4) * B(M omega tau/2) / cos^2(omega tau/2)

    with B = sin^2 for even M and B = cos^2 for odd M. At the removable
    singularities cos(omega tau/2) = 0 the oscillatory ratio tends to M^2;
    that limit is substituted whenever |cos| < 1e-6.
    """
    if m_pulses < 1:
        raise ValueError("need at least one pulse")
    w = grid.points
    theta = 0.5 * w * tau
    base = (16.0 / w**2) * np.sin(0.25 * w * tau) ** 4
    cos2 = np.cos(theta) ** 2
    if m_pulses % 2 == 0:
        osc = np.sin(m_pulses * theta) ** 2
    else:
        osc = np.cos(m_pulses * theta) ** 2
    singular = np.abs(np.cos(theta)) < 1e-6
    ratio = np.where(singular, float(m_pulses**2), osc / np.where(singular, 1.0, cos2))
    samples = base * ratio
    return WindowFunction(grid, samples, 0.0, 2 * m_pulses, tau / 2.0)


def chi_exact(spectrum: NoiseSpectrum, window: WindowFunction) -> float:
    """Decay exponent (1/2pi) * integral S * W by evenness-folded quadrature.

    Gridded spectra use one bin per grid point (the convention their values
    were defined with); analytic spectra use the composite trapezoid including
    the omega = 0 node. The window grid must be at least as fine as the
    spectrum's sharpest feature; that is the caller's responsibility.
    """
    grid = window.grid
    if spectrum.kind == "gridded":
        if not spectrum.grid.close_to(grid):
            raise RpspecError("gridded spectrum and window live on different grids")
        total = rectangle_folded(spectrum.values * window.samples, grid.spacing)
    else:
        s = spectrum.density(grid.points)
        s0 = spectrum.density(0.0)
        total = trapezoid_folded(s0 * window.w0, s * window.samples, grid.spacing)
    return total / (2.0 * np.pi)


def chi_quadrature_weights(spectrum: NoiseSpectrum, grid: FrequencyGrid):
    """Weights (w0, w) with chi_U = w0 * W_U(0) + w . W_U(grid points).

    Same quadrature conventions as `chi_exact`; used for batched protocols.
    """
    d = grid.spacing
    if spectrum.kind == "gridded":
        if not spectrum.grid.close_to(grid):
            raise RpspecError("gridded spectrum and window live on different grids")
        return 0.0, (d / np.pi) * spectrum.values
    s = spectrum.density(grid.points)
    w = (d / np.pi) * s
    w[-1] *= 0.5
    return (d / (2.0 * np.pi)) * spectrum.density(0.0), w


def save_window_csv(path: str, window: WindowFunction) -> None:
    from .io import write_csv

    omegas = np.concatenate(([0.0], window.grid.points))
    vals = np.concatenate(([window.w0], window.samples))
    write_csv(path, ["omega", "w"], [omegas, vals])
