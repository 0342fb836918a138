"""Random sign sequences with a prescribed autocovariance.

Pipeline: a target spectral weighting T(omega) is expanded in cosine lags of
g(omega) = T / sinc^2(omega*tau/2); the lag coefficients fix the sign-process
autocovariance r(k); the arcsine law maps r to Gaussian-domain correlations
rho(k) = sin(pi*r(k)/2); an FIR filter is fitted to realize rho; sequences are
the sign of filtered i.i.d. Gaussians.

Normalization convention used throughout (exact, verified by the orthogonality
and enumeration oracles in the test suite): with r(k) = (c/2) * M/(M-k) * g_k
the expected window is

    E(W)(omega) = M tau^2 [ c*T(omega) + (1 - c*t0) * sinc^2(omega*tau/2) ]

in the limit where every lag of g is kept, where t0 is the mean of g over the
band [-omega_c, omega_c]. The scale c <= 1 is shrunk until the expected window
stays positive and the Gaussian process with correlations rho exists.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DesignFailureError, InfeasibleTargetError
from .pulse import PulseSequence, WindowFunction
from .spectra import FrequencyGrid
from .util import derive_seed, sinc_half

C_FLOOR = 0.01  # below this the target term is attenuated 100x; treat as infeasible
POSITIVITY_MARGIN = 0.05
PSD_FLOOR = 1e-10


def sign_covariance_from_gaussian(rho):
    """Arcsine law: autocovariance of sign(x) for stationary Gaussian x."""
    return (2.0 / np.pi) * np.arcsin(np.clip(np.asarray(rho, dtype=float), -1.0, 1.0))


def gaussian_from_sign_covariance(r):
    """Inverse arcsine map; defined for |r| <= 1."""
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(r) > 1.0 + 1e-12):
        raise ValueError("sign covariances must lie in [-1, 1]")
    return np.sin(0.5 * np.pi * np.clip(r, -1.0, 1.0))


@dataclass(frozen=True)
class TargetFunction:
    """Even spectral weighting on [-omega_c, omega_c] with lag cutoff `lam`."""

    omega_c: float
    lam: int
    func: Callable[[np.ndarray], np.ndarray]
    label: str = "custom"

    def __call__(self, omega):
        return self.func(np.abs(np.asarray(omega, dtype=float)))


def cos_lag_target(k: int, omega_c: float) -> TargetFunction:
    """T(omega) = cos(k*omega*tau) * sinc^2(omega*tau/2) with tau = pi/omega_c."""
    if k < 1:
        raise ValueError("lag must be >= 1")
    tau = np.pi / omega_c

    def f(w):
        return np.cos(k * w * tau) * sinc_half(w, tau) ** 2

    return TargetFunction(omega_c, k, f, label=f"cos-lag:{k}")


def zero_target(omega_c: float) -> TargetFunction:
    return TargetFunction(omega_c, 0, lambda w: np.zeros_like(np.asarray(w, dtype=float)),
                          label="zero")


def target_from_table(omegas, values, lam: int, omega_c: float) -> TargetFunction:
    """Target interpolated from (omega, T) samples; even extension implied."""
    omegas = np.asarray(omegas, dtype=float)
    values = np.asarray(values, dtype=float)

    def f(w):
        return np.interp(np.abs(w), omegas, values)

    return TargetFunction(omega_c, lam, f, label="table")


@dataclass(frozen=True, eq=False)
class CorrelationProfile:
    """Sign-process autocovariance r(0..lam) plus its Gaussian-domain image.

    r[0] = 1 always; r(k) = 0 beyond the cutoff. `c` is the realizability
    scale applied to the raw lag coefficients and `t0` the band mean of
    T/sinc^2; both enter the window-domain reconstruction identity.
    """

    r: np.ndarray
    rho: np.ndarray
    c: float
    t0: float
    m_segments: int
    feasible: bool = True

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float).copy()
        rho = np.asarray(self.rho, dtype=float).copy()
        if r.ndim != 1 or r.size < 1 or abs(r[0] - 1.0) > 1e-12:
            raise ValueError("autocovariance must start at r(0) = 1")
        if np.any(np.abs(r) > 1.0 + 1e-12):
            raise ValueError("|r(k)| <= 1 required")
        if rho.shape != r.shape:
            raise ValueError("rho and r must align")
        if self.lam >= self.m_segments:
            raise ValueError("correlation cutoff must be shorter than the sequence")
        r.setflags(write=False)
        rho.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "rho", rho)

    @property
    def lam(self) -> int:
        return self.r.size - 1

    def to_json_dict(self) -> dict:
        return {
            "r": self.r.tolist(),
            "rho": self.rho.tolist(),
            "c": self.c,
            "t0": self.t0,
            "m_segments": self.m_segments,
            "feasible": self.feasible,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CorrelationProfile":
        return cls(np.asarray(doc["r"]), np.asarray(doc["rho"]), float(doc["c"]),
                   float(doc["t0"]), int(doc["m_segments"]), bool(doc["feasible"]))


def base_profile(m_segments: int) -> CorrelationProfile:
    """Uncorrelated signs: r(k > 0) = 0 exactly."""
    return CorrelationProfile(np.array([1.0]), np.array([1.0]), 1.0, 0.0, m_segments)


def _lag_coefficients(target: TargetFunction, tau: float, lam: int, n_quad: int):
    """Cosine-lag expansion of g = T/sinc^2 over the band, plus its mean t0.

    The trapezoid rule on [0, omega_c] with uniform nodes integrates
    cos(n*omega*tau) exactly for n below twice the node count, so cosine
    targets produce numerically clean single-lag profiles.
    """
    omega_c = target.omega_c
    p = max(n_quad, 4 * (lam + 1))
    w = np.linspace(0.0, omega_c, p + 1)
    g = target(w) / sinc_half(w, tau) ** 2
    wts = np.full(p + 1, 1.0)
    wts[0] = wts[-1] = 0.5
    h = omega_c / p
    t0 = float((wts * g).sum() * h / omega_c)
    if lam == 0:
        return np.zeros(0), t0
    k = np.arange(1, lam + 1)
    cosmat = np.cos(np.outer(k, w) * tau)
    gk = (2.0 / omega_c) * (cosmat * (wts * g)).sum(axis=1) * h
    return gk, t0


def _scale_feasible(r_nz: np.ndarray, c: float, taper: np.ndarray,
                    cos_win: np.ndarray, cos_psd: np.ndarray) -> bool:
    r = c * r_nz
    if np.any(np.abs(r) > 1.0 - 1e-12):
        return False
    win = 1.0 + 2.0 * ((r * taper) @ cos_win)
    if win.min() < POSITIVITY_MARGIN:
        return False
    rho = np.sin(0.5 * np.pi * r)
    dens = 1.0 + 2.0 * (rho @ cos_psd)
    return dens.min() >= PSD_FLOOR


def choose_positivity_scale(r1: np.ndarray, m_segments: int) -> float:
    """Largest c <= 1 keeping the expected window positive and the Gaussian
    process stationary (spectral density of rho >= 0), by 20-step bisection.

    Raises InfeasibleTargetError when the scale falls below the floor.
    """
    r1 = np.asarray(r1, dtype=float)
    if r1.size == 0 or not np.any(r1):
        return 1.0
    nz = np.nonzero(r1)[0]
    k = nz + 1.0
    r_nz = r1[nz]
    taper = 1.0 - k / m_segments
    cos_win = np.cos(np.outer(k, np.linspace(0.0, np.pi, 4097)))
    cos_psd = np.cos(np.outer(k, np.linspace(0.0, np.pi, 8193)))
    if _scale_feasible(r_nz, 1.0, taper, cos_win, cos_psd):
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(20):
        mid = 0.5 * (lo + hi)
        if _scale_feasible(r_nz, mid, taper, cos_win, cos_psd):
            lo = mid
        else:
            hi = mid
    if lo < C_FLOOR:
        raise InfeasibleTargetError(
            f"no realizable scale >= {C_FLOOR} for this target", c_floor=C_FLOOR)
    return lo


def correlation_from_target(target: TargetFunction, m_segments: int, tau: float,
                            n_quad: int = 4096) -> CorrelationProfile:
    """Autocovariance profile whose expected window reproduces the target.

    Requires tau = pi/omega_c (the lag cosines are complete on the band only
    then) and lam < M.
    """
    if abs(tau * target.omega_c - np.pi) > 1e-9 * np.pi:
        raise ValueError("segment duration must equal pi / omega_c")
    if not 0 <= target.lam < m_segments:
        raise ValueError("need 0 <= lam < M")
    gk, t0 = _lag_coefficients(target, tau, target.lam, n_quad)
    if target.lam == 0:
        prof = base_profile(m_segments)
        return CorrelationProfile(prof.r, prof.rho, 1.0, t0, m_segments)
    k = np.arange(1, target.lam + 1)
    r1 = 0.5 * gk * m_segments / (m_segments - k)
    top = np.abs(r1).max()
    if top > 0:  # snap quadrature dust so sparse-lag profiles stay sparse
        r1[np.abs(r1) < 1e-13 * top] = 0.0
    c = choose_positivity_scale(r1, m_segments)
    r = np.concatenate(([1.0], c * r1))
    rho = np.concatenate(([1.0], np.sin(0.5 * np.pi * c * r1)))
    return CorrelationProfile(r, rho, float(c), float(t0), m_segments)


@dataclass(frozen=True, eq=False)
class FirDesign:
    """Unit-energy filter coefficients plus the autocorrelation they achieve."""

    coefficients: np.ndarray
    achieved_rho: np.ndarray  # lags 1 .. len(a)-1
    residual: float

    def __post_init__(self):
        a = np.asarray(self.coefficients, dtype=float).copy()
        if abs(a @ a - 1.0) > 1e-12:
            raise ValueError("coefficients must have unit energy")
        rho = np.asarray(self.achieved_rho, dtype=float).copy()
        a.setflags(write=False)
        rho.setflags(write=False)
        object.__setattr__(self, "coefficients", a)
        object.__setattr__(self, "achieved_rho", rho)

    @property
    def length(self) -> int:
        return self.coefficients.size

    def predicted_sign_covariance(self) -> np.ndarray:
        """Sign-process autocovariance implied by the arcsine law, lags 1.."""
        return sign_covariance_from_gaussian(self.achieved_rho)

    def achieved_profile(self, m_segments: int) -> CorrelationProfile:
        r = np.concatenate(([1.0], self.predicted_sign_covariance()))
        rho = np.concatenate(([1.0], self.achieved_rho))
        return CorrelationProfile(r, rho, 1.0, 0.0, m_segments)

    def to_json_dict(self) -> dict:
        return {
            "coefficients": self.coefficients.tolist(),
            "achieved_rho": self.achieved_rho.tolist(),
            "residual": self.residual,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "FirDesign":
        return cls(np.asarray(doc["coefficients"]), np.asarray(doc["achieved_rho"]),
                   float(doc["residual"]))


def base_design() -> FirDesign:
    return FirDesign(np.array([1.0]), np.zeros(0), 0.0)


def _autocorr_tail(a: np.ndarray) -> np.ndarray:
    return np.correlate(a, a, mode="full")[a.size:]


def _fit_cost(a: np.ndarray, rho_t: np.ndarray) -> float:
    e = _autocorr_tail(a) - rho_t
    return float(e @ e)


def _fit_initializers(rho_t: np.ndarray, length: int, rng: np.random.Generator):
    inits = []
    e0 = np.zeros(length)
    e0[0] = 1.0
    inits.append(e0)
    if rho_t.size:
        j = int(np.argmax(np.abs(rho_t))) + 1
        r = float(rho_t[j - 1])
        two = np.zeros(length)
        if abs(r) <= 0.5:
            # a0*aj = r with a0^2 + aj^2 = 1 solves a single-lag target exactly
            a0 = np.sqrt(0.5 * (1.0 + np.sqrt(1.0 - 4.0 * r * r)))
            two[0], two[j] = a0, r / a0 if a0 > 0 else 0.0
        else:
            two[0], two[j] = np.sqrt(0.5), np.sign(r) * np.sqrt(0.5)
        inits.append(two)
    for other in range(2, length + 1):  # boxcars of every length (padded)
        box = np.zeros(length)
        box[:other] = 1.0 / np.sqrt(other)
        inits.append(box)
    for _ in range(8):
        inits.append(rng.standard_normal(length))
    return inits


def _fit_autocorrelation(rho_t: np.ndarray, length: int, max_iter: int,
                         seed: int) -> tuple[np.ndarray, float]:
    """Projected gradient descent on the unit sphere with step halving.

    Candidate starts (delta, two-tap, boxcars, random) are screened by cost
    and the best ten polished.
    """
    rng = np.random.default_rng(seed)
    k_max = length - 1
    e_pad = np.zeros(k_max)
    e_pad[: rho_t.size] = rho_t
    cands = [a / np.linalg.norm(a) for a in _fit_initializers(rho_t, length, rng)]
    cands.sort(key=lambda a: _fit_cost(a, e_pad))
    best_a, best_j = None, np.inf
    for a0 in cands[:10]:
        a = a0
        j = _fit_cost(a, e_pad)
        step = 0.25
        for _ in range(max_iter):
            if j < 1e-16 or step < 1e-14:
                break
            e = _autocorr_tail(a) - e_pad
            # gradient of sum e_k^2: 2 * (symmetrized e) convolved with a
            e_sym = np.concatenate((e[::-1], [0.0], e))
            g = 2.0 * np.convolve(a, e_sym)[k_max: k_max + length]
            cand = a - step * g
            cand /= np.linalg.norm(cand)
            jc = _fit_cost(cand, e_pad)
            if jc < j:
                a, j = cand, jc
                step *= 1.25
            else:
                step *= 0.5
        if j < best_j:
            best_a, best_j = a, j
        if best_j < 1e-14:
            break  # an essentially exact fit; further restarts cannot help
    return best_a, best_j


def design_fir(profile: CorrelationProfile, lam: int | None = None,
               max_iter: int = 5000, seed: int = 12345) -> FirDesign:
    """Fit filter coefficients whose autocorrelation matches profile.rho.

    `lam` is the filter length; it must exceed the profile cutoff so the top
    lag is reachable. Raises DesignFailureError above residual 1e-2 (raising
    `lam` is the usual remedy).
    """
    if not profile.feasible:
        raise InfeasibleTargetError("profile marked infeasible")
    if lam is None:
        lam = profile.lam + 1
    if lam < profile.lam + 1:
        raise ValueError("filter length must exceed the correlation cutoff")
    rho_t = profile.rho[1:]
    if not rho_t.size or not np.any(rho_t):
        a = np.zeros(lam)
        a[0] = 1.0
        return FirDesign(a, _autocorr_tail(a), 0.0)
    a, residual = _fit_autocorrelation(rho_t, lam, max_iter, seed)
    if residual > 1e-2:
        raise DesignFailureError(
            f"autocorrelation fit stagnated at residual {residual:.3g}", residual)
    a = a / np.linalg.norm(a)
    return FirDesign(a, _autocorr_tail(a), float(residual))


def sample_sequence(design: FirDesign, m_segments: int, tau: float,
                    seed: int) -> PulseSequence:
    """Sign of FIR-filtered i.i.d. Gaussians; warm-up discarded, sign(0) -> +1."""
    return PulseSequence(sample_signs_batch(design, m_segments, 1, seed,
                                            derived=False)[0], tau)


def sample_signs_batch(design: FirDesign, m_segments: int, n_sequences: int,
                       seed: int, derived: bool = True) -> np.ndarray:
    """Batch of sign rows; row i uses the derived seed for index i.

    With derived=False a single row is drawn directly from `seed` (the
    one-sequence contract of `sample_sequence`).
    """
    if m_segments < 1:
        raise ValueError("need M >= 1")
    a = design.coefficients
    length = m_segments + a.size - 1
    g = np.empty((n_sequences, length))
    for i in range(n_sequences):
        s = derive_seed(seed, i) if derived else seed
        g[i] = np.random.default_rng(s).standard_normal(length)
    x = np.zeros((n_sequences, m_segments))
    for j in range(a.size):
        x += a[j] * g[:, a.size - 1 - j: a.size - 1 - j + m_segments]
    return np.where(x >= 0.0, 1.0, -1.0)


def expected_window(profile: CorrelationProfile, m_segments: int, tau: float,
                    grid: FrequencyGrid) -> WindowFunction:
    """Mean window over the sequence ensemble with autocovariance profile.r:

        M tau^2 sinc^2(omega tau/2) * (1 + 2 sum_k r(k) (1 - k/M) cos(k omega tau))

    Exact for any stationary sign process with that autocovariance.
    """
    if profile.lam >= m_segments:
        raise ValueError("correlation cutoff must be shorter than the sequence")
    k = np.arange(1, profile.lam + 1)
    taper = profile.r[1:] * (1.0 - k / m_segments)
    w = grid.points
    bracket = 1.0 + 2.0 * (np.cos(np.outer(w, k) * tau) @ taper)
    samples = m_segments * tau**2 * sinc_half(w, tau) ** 2 * bracket
    w0 = m_segments * tau**2 * (1.0 + 2.0 * taper.sum())
    samples = np.maximum(samples, 0.0)
    return WindowFunction(grid, samples, max(float(w0), 0.0), m_segments, tau)
