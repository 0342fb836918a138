"""End-to-end measurement protocol: sample sequences, draw shots, estimate decay.

Per sequence U: chi_U = (1/2pi) int S * W_U, survival probability
p0 = (1 + exp(-chi_U))/2, and N2 binary shots give the coherence estimate
C_U = 2*(count/N2) - 1. Coherences are averaged across sequences first and the
decay exponent is chi_hat = -log(mean C); per-sequence logs would be undefined
whenever a noisy C_U is <= 0.

Determinism contract: sequence i always consumes the stream seeded by
derive_seed(plan.seed, i), for its Gaussians first and its shot draw second,
so results do not depend on worker count or scheduling. Reductions use
np.mean (pairwise summation) over arrays assembled in index order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
import numpy as np

from .errors import DecoherenceFloorError, DesignFailureError
from .io import Journal
from .pulse import chi_quadrature_weights, window_samples_batch
from .seqgen import (CorrelationProfile, FirDesign, TargetFunction, base_design,
                     correlation_from_target, design_fir)
from .spectra import FrequencyGrid, NoiseSpectrum
from .util import derive_seed

_CHUNK = 512  # fixed chunk size keeps results identical across worker counts
DOWNSTREAM_RESIDUAL = 1e-3


@dataclass(frozen=True)
class ExperimentPlan:
    """Counts and seeds for one protocol run (all counts >= 1)."""

    m_segments: int
    tau: float
    n_sequences: int
    n_shots: int
    seed: int
    n_base_sequences: int | None = None
    n_base_shots: int | None = None
    analytic_shots: bool = False
    workers: int = 1

    def __post_init__(self):
        if min(self.m_segments, self.n_sequences, self.n_shots) < 1:
            raise ValueError("all counts must be >= 1")
        if not self.tau > 0:
            raise ValueError("segment duration must be positive")

    @property
    def base_sequences(self) -> int:
        return self.n_base_sequences if self.n_base_sequences is not None else self.n_sequences

    @property
    def base_shots(self) -> int:
        return self.n_base_shots if self.n_base_shots is not None else self.n_shots

    def to_json_dict(self) -> dict:
        return {
            "m_segments": self.m_segments, "tau": self.tau,
            "n_sequences": self.n_sequences, "n_shots": self.n_shots,
            "seed": self.seed, "n_base_sequences": self.base_sequences,
            "n_base_shots": self.base_shots, "analytic_shots": self.analytic_shots,
            "workers": self.workers,
        }


@dataclass(frozen=True, eq=False)
class ChiEstimate:
    """Estimated decay exponent with a sequence-resampling bootstrap error."""

    chi: float
    stderr: float
    coherences: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coherences, dtype=float).copy()
        c.setflags(write=False)
        object.__setattr__(self, "coherences", c)


@dataclass(frozen=True)
class FunctionalEstimate:
    """Estimate of integral S*T and the pieces it was assembled from."""

    value: float
    stderr: float
    chi: ChiEstimate
    chi_base: ChiEstimate
    c: float
    t0: float
    m_segments: int
    tau: float


_SHOT_STREAM_TAG = 0x53484F54  # distinct substream for shot draws


def _protocol_chunk(spectrum_doc, design_doc, m_segments, tau, n_shots,
                    analytic_shots, seed, grid_n, grid_wc, start, stop, w0, w):
    spectrum = NoiseSpectrum.from_json_dict(spectrum_doc)
    design = FirDesign.from_json_dict(design_doc)
    grid = FrequencyGrid(grid_n, grid_wc)
    a = design.coefficients
    length = m_segments + a.size - 1
    n = stop - start
    g = np.empty((n, length))
    for i in range(start, stop):
        g[i - start] = np.random.default_rng(derive_seed(seed, i)).standard_normal(length)
    x = np.zeros((n, m_segments))
    for j in range(a.size):
        x += a[j] * g[:, a.size - 1 - j: a.size - 1 - j + m_segments]
    signs = np.where(x >= 0.0, 1.0, -1.0)
    samples, w0col = window_samples_batch(signs, tau, grid)
    chi = samples @ np.asarray(w) + w0 * w0col
    if analytic_shots:
        coher = np.exp(-chi)
    else:
        # shot draws come from a per-sequence substream independent of the
        # filter length, so plans sharing a seed share shot randomness too
        p0 = 0.5 * (1.0 + np.exp(-chi))
        shot_base = derive_seed(seed, _SHOT_STREAM_TAG)
        counts = np.array([
            np.random.default_rng(derive_seed(shot_base, i)).binomial(n_shots, p0[i - start])
            for i in range(start, stop)
        ])
        coher = 2.0 * counts / n_shots - 1.0
    return start, chi, coher


def _bootstrap_stderr(coherences: np.ndarray, seed: int, resamples: int = 500) -> float:
    n = coherences.size
    rng = np.random.default_rng(derive_seed(seed, n))
    idx = rng.integers(0, n, size=(resamples, n))
    means = coherences[idx].mean(axis=1)
    valid = means > 0
    if valid.sum() < 2:
        return float("inf")
    return float(np.std(-np.log(means[valid]), ddof=1))


def mean_exponent_estimate(coherences: np.ndarray, n_shots: int,
                           analytic_shots: bool) -> float:
    """Estimate the mean per-sequence exponent E(chi_U) from coherences.

    -log(mean C) targets -log E exp(-chi), which sits below E(chi) by half
    the relative coherence variance (log-moment gap); that gap does not
    shrink with the counts, so linear-model uses must correct for it. The
    ensemble variance is estimated with the binomial shot contribution
    subtracted ((1 - C^2)/(N2 - 1) is unbiased for the per-sequence shot
    variance).
    """
    c = np.asarray(coherences, dtype=float)
    cbar = float(c.mean())
    if cbar <= 0:
        raise DecoherenceFloorError("mean coherence <= 0", cbar)
    s2 = float(c.var(ddof=1)) if c.size > 1 else 0.0
    if not analytic_shots and n_shots > 1:
        s2 -= float(np.mean(1.0 - c**2)) / (n_shots - 1)
    s2 = max(s2, 0.0)
    return float(-np.log(cbar) + 0.5 * s2 / cbar**2)


def mean_exponent_stderr(coherences: np.ndarray, n_shots: int, analytic_shots: bool,
                         seed: int, resamples: int = 500) -> float:
    """Sequence-resampling bootstrap error of `mean_exponent_estimate`."""
    c = np.asarray(coherences, dtype=float)
    n = c.size
    rng = np.random.default_rng(derive_seed(seed, n + 1))
    idx = rng.integers(0, n, size=(resamples, n))
    vals = []
    for row in idx:
        cb = c[row].mean()
        if cb <= 0:
            continue
        s2 = c[row].var(ddof=1) if n > 1 else 0.0
        if not analytic_shots and n_shots > 1:
            s2 -= np.mean(1.0 - c[row] ** 2) / (n_shots - 1)
        vals.append(-np.log(cb) + 0.5 * max(s2, 0.0) / cb**2)
    if len(vals) < 2:
        return float("inf")
    return float(np.std(vals, ddof=1))


def run_protocol(spectrum: NoiseSpectrum, design: FirDesign, plan: ExperimentPlan,
                 grid: FrequencyGrid | None = None) -> ChiEstimate:
    """Simulate the full protocol and estimate the decay exponent.

    Raises DecoherenceFloorError when the mean coherence is <= 0 (shorten the
    sequence or raise the counts).
    """
    if grid is None:
        grid = spectrum.grid if spectrum.kind == "gridded" else FrequencyGrid(
            max(512, 4 * plan.m_segments), spectrum.omega_c)
    w0, w = chi_quadrature_weights(spectrum, grid)
    bounds = list(range(0, plan.n_sequences, _CHUNK)) + [plan.n_sequences]
    payloads = [
        (spectrum.to_json_dict(), design.to_json_dict(), plan.m_segments, plan.tau,
         plan.n_shots, plan.analytic_shots, plan.seed, grid.n, grid.omega_c,
         bounds[i], bounds[i + 1], w0, w)
        for i in range(len(bounds) - 1)
    ]
    coher = np.empty(plan.n_sequences)
    if plan.workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            results = list(pool.map(_protocol_chunk_star, payloads))
    else:
        results = [_protocol_chunk(*p) for p in payloads]
    for start, _, c in results:
        coher[start: start + c.size] = c
    c_bar = float(np.mean(coher))
    if c_bar <= 0.0:
        raise DecoherenceFloorError(
            f"mean coherence {c_bar:.3g} <= 0; decay exponent undefined", c_bar)
    stderr = _bootstrap_stderr(coher, plan.seed)
    return ChiEstimate(float(-np.log(c_bar)), stderr, coher)


def _protocol_chunk_star(payload):
    return _protocol_chunk(*payload)


def profile_and_design(target: TargetFunction, m_segments: int, tau: float,
                       lam: int | None = None):
    """Profile + FIR design for a target, gated at the downstream residual."""
    profile = correlation_from_target(target, m_segments, tau)
    if profile.lam == 0 or not np.any(profile.r[1:]):
        return profile, base_design()
    design = design_fir(profile, lam=lam)
    if design.residual > DOWNSTREAM_RESIDUAL:
        raise DesignFailureError(
            f"design residual {design.residual:.3g} exceeds the "
            f"{DOWNSTREAM_RESIDUAL} gate for protocol use", design.residual)
    return profile, design


def estimate_functional(spectrum: NoiseSpectrum, target: TargetFunction,
                        plan: ExperimentPlan, grid: FrequencyGrid | None = None,
                        ) -> FunctionalEstimate:
    """Estimate integral S(omega) T(omega) d omega by base subtraction:

        I = (chi - (1 - c*t0) * chi_base) * 2pi / (M tau^2 c).

    A target with no correlated lags degenerates to the base ensemble; the
    base estimate is reused for both terms so the result is exactly zero.
    """
    profile, design = profile_and_design(target, plan.m_segments, plan.tau)
    base_plan = replace(plan, n_sequences=plan.base_sequences,
                        n_shots=plan.base_shots, seed=derive_seed(plan.seed, 0))
    chi_base = run_protocol(spectrum, base_design(), base_plan, grid)
    if profile.lam == 0 or not np.any(profile.r[1:]):
        chi_t = chi_base
    else:
        chi_t = run_protocol(spectrum, design,
                             replace(plan, seed=derive_seed(plan.seed, 1)), grid)
    c, t0 = profile.c, profile.t0
    scale = 2.0 * np.pi / (plan.m_segments * plan.tau**2 * c)
    value = (chi_t.chi - (1.0 - c * t0) * chi_base.chi) * scale
    if chi_t is chi_base:
        value = 0.0
    stderr = scale * float(np.hypot(chi_t.stderr, (1.0 - c * t0) * chi_base.stderr))
    return FunctionalEstimate(value, stderr, chi_t, chi_base, c, t0,
                              plan.m_segments, plan.tau)


def expected_chi(spectrum: NoiseSpectrum, profile: CorrelationProfile,
                 m_segments: int, tau: float, grid: FrequencyGrid) -> float:
    """First-moment decay exponent (1/2pi) int S * E(W) for the profile."""
    from .pulse import chi_exact
    from .seqgen import expected_window

    return chi_exact(spectrum, expected_window(profile, m_segments, tau, grid))


@dataclass(frozen=True, eq=False)
class EnsembleWindow:
    """Mean window over sampled sequences, with pointwise standard errors."""

    grid: FrequencyGrid
    mean: np.ndarray
    mean_w0: float
    stderr: np.ndarray
    stderr_w0: float
    n_sequences: int


def ensemble_mean_window(design: FirDesign, m_segments: int, tau: float,
                         grid: FrequencyGrid, n_sequences: int, seed: int,
                         ) -> EnsembleWindow:
    """Sample n sequences and average their exact windows."""
    total = np.zeros(grid.n)
    total2 = np.zeros(grid.n)
    t0 = t02 = 0.0
    a = design.coefficients
    length = m_segments + a.size - 1
    for start in range(0, n_sequences, _CHUNK):
        stop = min(start + _CHUNK, n_sequences)
        g = np.empty((stop - start, length))
        for i in range(start, stop):
            g[i - start] = np.random.default_rng(derive_seed(seed, i)).standard_normal(length)
        x = np.zeros((stop - start, m_segments))
        for j in range(a.size):
            x += a[j] * g[:, a.size - 1 - j: a.size - 1 - j + m_segments]
        signs = np.where(x >= 0.0, 1.0, -1.0)
        samples, w0 = window_samples_batch(signs, tau, grid)
        total += samples.sum(axis=0)
        total2 += (samples**2).sum(axis=0)
        t0 += w0.sum()
        t02 += (w0**2).sum()
    n = n_sequences
    mean = total / n
    var = np.maximum(total2 / n - mean**2, 0.0) * n / max(n - 1, 1)
    mean_w0 = t0 / n
    var_w0 = max(t02 / n - mean_w0**2, 0.0) * n / max(n - 1, 1)
    return EnsembleWindow(grid, mean, float(mean_w0), np.sqrt(var / n),
                          float(np.sqrt(var_w0 / n)), n)


def extracted_target(ens: EnsembleWindow, ens_base: EnsembleWindow, c: float,
                     t0: float, m_segments: int, tau: float) -> np.ndarray:
    """Window-domain reconstruction (W - (1-c*t0) W_base) / (c M tau^2).

    Normalized by M tau^2 so the result is directly comparable to the target
    weighting T(omega).
    """
    scale = 1.0 / (c * m_segments * tau**2)
    return (ens.mean - (1.0 - c * t0) * ens_base.mean) * scale


@dataclass(frozen=True)
class ScalingRow:
    n_sequences: int
    n_shots: int
    mean_abs_dev: float


@dataclass(frozen=True)
class ScalingStudy:
    rows: tuple
    varied: str
    slope: float
    chi_ref: float


def accuracy_scaling_study(spectrum: NoiseSpectrum, target: TargetFunction,
                           plans: list[ExperimentPlan], replicas: int = 30,
                           seed: int = 0, reference_sequences: int = 100_000,
                           grid: FrequencyGrid | None = None,
                           journal_path: str | None = None) -> ScalingStudy:
    """Mean |chi_hat - chi_ref| per plan and its log-log slope vs the varied count.

    Exactly one of N1, N2 may vary across the plans. The reference is the
    population value of the estimator itself, -log E exp(-chi), measured by a
    large analytic-shot run (shot noise excluded, second-order bias shared).
    """
    n1s = {p.n_sequences for p in plans}
    n2s = {p.n_shots for p in plans}
    if len(n1s) > 1 and len(n2s) > 1:
        raise ValueError("plans must vary exactly one of N1, N2")
    varied = "n_sequences" if len(n1s) > 1 else "n_shots"
    _, design = profile_and_design(target, plans[0].m_segments, plans[0].tau)
    ref_plan = replace(plans[0], n_sequences=reference_sequences, analytic_shots=True,
                       seed=derive_seed(seed, 1 << 20))
    chi_ref = run_protocol(spectrum, design, ref_plan, grid).chi
    journal = Journal(journal_path)
    rows = []
    for p_idx, plan in enumerate(plans):
        devs = []
        for r in range(replicas):
            key = f"{plan.n_sequences}x{plan.n_shots}#{r}"
            cached = journal.get(key)
            if cached is not None:
                devs.append(float(cached))
                continue
            est = run_protocol(
                spectrum, design,
                replace(plan, seed=derive_seed(seed, 10_000 * p_idx + r)), grid)
            dev = abs(est.chi - chi_ref)
            journal.add(key, dev)
            devs.append(dev)
        rows.append(ScalingRow(plan.n_sequences, plan.n_shots, float(np.mean(devs))))
    journal.flush()
    xs = np.log([r.n_sequences if varied == "n_sequences" else r.n_shots for r in rows])
    ys = np.log([r.mean_abs_dev for r in rows])
    slope = float(np.polyfit(xs, ys, 1)[0])
    return ScalingStudy(tuple(rows), varied, slope, chi_ref)
