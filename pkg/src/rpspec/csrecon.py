"""Sparse spectrum reconstruction from cosine-lag decay measurements.

Each lag k probes the linear functional integral S * sinc^2 * cos(k omega tau)
through the decay-exponent difference y_k = chi_k - chi_base. On an N-point
grid the model is A S = 2pi * y / c with

    A[j, i] = (2 omega_c M tau^2 / N) * sinc^2(omega_i tau / 2) * cos(k_j omega_i tau),

where c is the per-lag realizability scale of the sequence generator (the 2pi
converts decay exponents back to plain band integrals). The solver works on
the folded variable x = S * sinc^2, whose l1 norm is the sparsity surrogate,
and unfolds by dividing out sinc^2 (bounded between 4/pi^2 and 1 on the band).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import numpy as np

from .errors import InfeasibleLagError, InfeasibleTargetError, SolverFailureError
from .experiment import ExperimentPlan, mean_exponent_estimate, run_protocol
from .io import Journal
from .seqgen import (base_design, cos_lag_target, correlation_from_target,
                     design_fir)
from .spectra import FrequencyGrid, NoiseSpectrum, random_sparse
from .util import derive_seed, rectangle_folded, sinc_half, trapezoid_folded

MODES = ("shots", "analytic", "exact")

_profile_cache: dict = {}
_design_cache: dict = {}


def lag_profile(k: int, m_segments: int):
    """Cos-lag profile with r(k) = c * M/(2(M-k)), zeros elsewhere (cached)."""
    key = (m_segments, k)
    if key not in _profile_cache:
        omega_c = np.pi  # profile is scale free; any omega_c with tau = pi/omega_c
        _profile_cache[key] = correlation_from_target(
            cos_lag_target(k, omega_c), m_segments, 1.0)
    return _profile_cache[key]


def lag_profile_and_design(k: int, m_segments: int):
    key = (m_segments, k)
    if key not in _design_cache:
        profile = lag_profile(k, m_segments)
        _design_cache[key] = (profile, design_fir(profile))
    return _design_cache[key]


def lag_feasible(k: int, m_segments: int) -> bool:
    try:
        lag_profile(k, m_segments)
        return True
    except InfeasibleTargetError:
        return False


def draw_lags(n_lags: int, m_segments: int, seed: int,
              k_max: int | None = None) -> np.ndarray:
    """Distinct lags uniform over 1..k_max (default M-1), skipping
    generator-infeasible ones.

    Shot-noise presets restrict to k_max = M/2, where the realizability scale
    stays >= 1/3 of its small-lag value; beyond that the per-measurement noise
    amplification makes lags nearly worthless.
    """
    rng = np.random.default_rng(seed)
    top = m_segments - 1 if k_max is None else min(k_max, m_segments - 1)
    pool = rng.permutation(np.arange(1, top + 1))
    out = []
    for k in pool:
        if lag_feasible(int(k), m_segments):
            out.append(int(k))
        if len(out) == n_lags:
            break
    if len(out) < n_lags:
        raise ValueError("not enough feasible lags")
    return np.array(out, dtype=int)


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Raw decay-exponent differences per lag, plus what is needed to invert them.

    `raw_cov`, when present, is the bootstrap covariance of the m+1 corrected
    exponents (base first, then one per lag). With common-randomness
    acquisition the experiments are strongly correlated and the covariance is
    what makes the inversion statistically efficient.
    """

    lags: np.ndarray
    values: np.ndarray  # chi_k - chi_base, unscaled
    stderrs: np.ndarray
    c_scales: np.ndarray
    m_segments: int
    tau: float
    omega_c: float
    mode: str
    seed: int
    base_chi: float
    raw_cov: np.ndarray | None = None

    def __post_init__(self):
        lags = np.asarray(self.lags, dtype=int).copy()
        if lags.size < 1 or np.unique(lags).size != lags.size:
            raise ValueError("lags must be distinct and non-empty")
        for name in ("values", "stderrs", "c_scales"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            if arr.shape != lags.shape:
                raise ValueError(f"{name} must align with lags")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        lags.setflags(write=False)
        object.__setattr__(self, "lags", lags)
        if self.raw_cov is not None:
            cov = np.asarray(self.raw_cov, dtype=float).copy()
            if cov.shape != (lags.size + 1, lags.size + 1):
                raise ValueError("raw_cov must cover base plus every lag")
            cov.setflags(write=False)
            object.__setattr__(self, "raw_cov", cov)

    @property
    def m(self) -> int:
        return self.lags.size

    def scaled_values(self) -> np.ndarray:
        """Band-integral data consistent with the design matrix: 2pi * y / c."""
        return 2.0 * np.pi * self.values / self.c_scales

    def scaled_stderrs(self) -> np.ndarray:
        return 2.0 * np.pi * self.stderrs / self.c_scales

    def to_json_dict(self) -> dict:
        return {
            "lags": self.lags.tolist(), "values": self.values.tolist(),
            "stderrs": self.stderrs.tolist(), "c_scales": self.c_scales.tolist(),
            "m_segments": self.m_segments, "tau": self.tau, "omega_c": self.omega_c,
            "mode": self.mode, "seed": self.seed, "base_chi": self.base_chi,
            "raw_cov": None if self.raw_cov is None else self.raw_cov.tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "MeasurementSet":
        cov = doc.get("raw_cov")
        return cls(np.asarray(doc["lags"]), np.asarray(doc["values"]),
                   np.asarray(doc["stderrs"]), np.asarray(doc["c_scales"]),
                   int(doc["m_segments"]), float(doc["tau"]), float(doc["omega_c"]),
                   str(doc["mode"]), int(doc["seed"]), float(doc["base_chi"]),
                   None if cov is None else np.asarray(cov))


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Rows discretize the lag functionals acting on plain grid values S_i."""

    matrix: np.ndarray
    grid: FrequencyGrid
    lags: np.ndarray
    m_segments: int
    tau: float

    @property
    def fold(self) -> np.ndarray:
        return sinc_half(self.grid.points, self.tau) ** 2

    @property
    def folded_operator(self) -> np.ndarray:
        """Matrix acting on the folded variable x = S * sinc^2."""
        return self.matrix / self.fold[None, :]


def build_design_matrix(grid: FrequencyGrid, lags, m_segments: int,
                        tau: float) -> DesignMatrix:
    lags = np.asarray(lags, dtype=int)
    w = grid.points
    pref = 2.0 * grid.omega_c * m_segments * tau**2 / grid.n
    a = pref * sinc_half(w, tau) ** 2 * np.cos(np.outer(lags, w) * tau)
    return DesignMatrix(a, grid, lags, m_segments, tau)


def _exact_band_integral(spectrum: NoiseSpectrum, k: int, tau: float,
                         grid: FrequencyGrid) -> float:
    """Two-sided integral of S * sinc^2 * cos(k omega tau)."""
    w = grid.points
    f = sinc_half(w, tau) ** 2 * np.cos(k * w * tau)
    if spectrum.kind == "gridded":
        return rectangle_folded(spectrum.values * f, grid.spacing)
    s = spectrum.density(w)
    return trapezoid_folded(spectrum.density(0.0), s * f, grid.spacing)


def acquire_measurements(spectrum: NoiseSpectrum, lags, plan: ExperimentPlan,
                         grid: FrequencyGrid | None = None, mode: str = "shots",
                         common_randomness: bool = True,
                         resamples: int = 300) -> MeasurementSet:
    """One decay experiment per lag plus a single shared base experiment.

    modes: "shots" (binomial sampling), "analytic" (exact per-sequence
    coherences, sequence sampling kept), "exact" (expectation values, no
    sampling at all). Lags whose profile cannot be realized raise
    InfeasibleLagError listing every offender.

    With common_randomness (default) every experiment consumes the same
    Gaussian and shot streams, so ensemble fluctuations are shared and cancel
    in the base subtraction; the joint bootstrap covariance of all m+1
    exponents is stored for the reconstruction to whiten with.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    lags = np.asarray(lags, dtype=int)
    if np.any(lags < 1) or np.any(lags >= plan.m_segments):
        raise ValueError("lags must satisfy 1 <= k < M")
    if np.unique(lags).size != lags.size:
        raise ValueError("lags must be distinct")
    if grid is None:
        if spectrum.kind != "gridded":
            raise ValueError("an evaluation grid is required for analytic spectra")
        grid = spectrum.grid
    bad = [int(k) for k in lags if not lag_feasible(int(k), plan.m_segments)]
    if bad:
        raise InfeasibleLagError(
            f"lags {bad} cannot be realized by the stationary sign generator", bad)
    pairs = [lag_profile_and_design(int(k), plan.m_segments) for k in lags]
    cs = np.array([p.c for p, _ in pairs])
    mt2 = plan.m_segments * plan.tau**2
    if mode == "exact":
        vals = np.array([
            c * mt2 / (2.0 * np.pi) * _exact_band_integral(spectrum, int(k), plan.tau, grid)
            for (c, k) in zip(cs, lags)
        ])
        return MeasurementSet(lags, vals, np.zeros(lags.size), cs, plan.m_segments,
                              plan.tau, spectrum.omega_c, mode, plan.seed, 0.0)
    analytic = mode == "analytic"
    n2 = plan.n_shots

    def sub_seed(j):  # j = 0 is the base experiment
        return plan.seed if common_randomness else derive_seed(plan.seed, j)

    base_plan = replace(plan, n_sequences=plan.base_sequences, n_shots=plan.base_shots,
                        analytic_shots=analytic, seed=sub_seed(0))
    runs = [run_protocol(spectrum, base_design(), base_plan, grid)]
    for j, (_, design) in enumerate(pairs):
        runs.append(run_protocol(spectrum, design,
                                 replace(plan, analytic_shots=analytic,
                                         seed=sub_seed(j + 1)), grid))
    # the linear model is in the MEAN exponent; correct each -log(mean C)
    # estimate for the log-moment gap, which is systematic in N1
    shots = [base_plan.n_shots] + [n2] * len(pairs)
    raw = np.array([mean_exponent_estimate(r.coherences, s, analytic)
                    for r, s in zip(runs, shots)])
    vals = raw[1:] - raw[0]
    cov = _joint_bootstrap_cov(runs, shots, analytic, plan.seed, resamples,
                               paired=common_randomness)
    diff = np.hstack([-np.ones((len(pairs), 1)), np.eye(len(pairs))])
    errs = np.sqrt(np.diag(diff @ cov @ diff.T))
    return MeasurementSet(lags, vals, errs, cs, plan.m_segments, plan.tau,
                          spectrum.omega_c, mode, plan.seed, float(raw[0]),
                          raw_cov=cov)


def _joint_bootstrap_cov(runs, shots, analytic: bool, seed: int, resamples: int,
                         paired: bool) -> np.ndarray:
    """Bootstrap covariance of the corrected exponents across experiments.

    Paired resampling (same sequence indices everywhere) captures the shared
    randomness; without pairing or with unequal ensemble sizes the resampling
    falls back to independent draws per experiment.
    """
    rng = np.random.default_rng(derive_seed(seed, 0xB007))
    sizes = [r.coherences.size for r in runs]
    paired = paired and len(set(sizes)) == 1
    boot = np.empty((resamples, len(runs)))
    for r in range(resamples):
        if paired:
            idx = rng.integers(0, sizes[0], size=sizes[0])
            rows = [run.coherences[idx] for run in runs]
        else:
            rows = [run.coherences[rng.integers(0, n, size=n)]
                    for run, n in zip(runs, sizes)]
        for e, (c, s) in enumerate(zip(rows, shots)):
            cb = c.mean()
            if cb <= 0:
                boot[r, e] = np.nan
                continue
            s2 = c.var(ddof=1) if c.size > 1 else 0.0
            if not analytic and s > 1:
                s2 -= np.mean(1.0 - c**2) / (s - 1)
            boot[r, e] = -np.log(cb) + 0.5 * max(s2, 0.0) / cb**2
    boot = boot[~np.isnan(boot).any(axis=1)]
    return np.cov(boot.T)


def null_penalty(design: DesignMatrix, y: np.ndarray) -> float:
    """Smallest penalty with an all-zero solution."""
    return float(np.abs(design.folded_operator.T @ np.asarray(y, dtype=float)).max())


def _soft(v: float, t: float) -> float:
    if v > t:
        return v - t
    if v < -t:
        return v + t
    return 0.0


def _cd_lasso(b: np.ndarray, y: np.ndarray, penalty: float, nonneg: bool,
              max_sweeps: int, tol: float, x0: np.ndarray | None = None):
    """Cyclic coordinate descent restricted to KKT-violating coordinates.

    A vectorized gradient check every few sweeps reselects the working set
    and evaluates the duality gap; coordinates at zero that already satisfy
    the subgradient condition are skipped entirely.
    """
    m, n = b.shape
    colsq = (b**2).sum(axis=0)
    usable = colsq > 0
    x = np.zeros(n) if x0 is None else x0.copy()
    r = y - b @ x if x0 is not None else y.copy()
    gap = np.inf
    sweep = 0
    kkt_tol = 1e-6 * penalty
    polish_left = 200  # extra sweeps chasing the subgradient conditions
    while sweep < max_sweeps:
        grad = b.T @ r
        primal = 0.5 * (r @ r) + penalty * np.abs(x).sum()
        top = grad.max() if nonneg else np.abs(grad).max()
        scale = 1.0 if top <= penalty or top <= 0 else penalty / top
        theta = scale * r
        gap = primal - (theta @ y - 0.5 * (theta @ theta))
        if nonneg:
            kkt = max(0.0, float((grad - penalty)[x == 0].max(initial=0.0)))
            if np.any(x != 0):
                kkt = max(kkt, float(np.abs((grad - penalty)[x != 0]).max()))
        else:
            kkt = max(0.0, float((np.abs(grad) - penalty)[x == 0].max(initial=0.0)))
            if np.any(x != 0):
                kkt = max(kkt, float(np.abs(grad[x != 0]
                                            - penalty * np.sign(x[x != 0])).max()))
        if gap <= tol:
            # converged by the gap contract; spend a bounded extra budget
            # polishing the subgradient conditions
            if kkt <= kkt_tol or polish_left <= 0:
                return x, float(gap), sweep, True
            polish_left -= 5
        excess = grad if nonneg else np.abs(grad)
        work = np.nonzero(((x != 0) | (excess > penalty)) & usable)[0]
        if work.size == 0 and gap <= tol:
            return x, float(gap), sweep, True
        for _ in range(5):
            for i in work:
                xi = x[i]
                rho = b[:, i] @ r + colsq[i] * xi
                xn = (max(0.0, rho - penalty) if nonneg else _soft(rho, penalty)) / colsq[i]
                if xn != xi:
                    r += b[:, i] * (xi - xn)
                    x[i] = xn
            sweep += 1
            if sweep >= max_sweeps:
                break
    return x, float(gap), sweep, False


def lasso_solve(design: DesignMatrix, y: np.ndarray, penalty: float,
                nonnegative: bool = False, max_sweeps: int = 100_000,
                gap_rtol: float = 1e-8) -> np.ndarray:
    """Coordinate descent for min 1/2 ||B x - y||^2 + penalty ||x||_1.

    B acts on the folded variable x = S * sinc^2; divide by `design.fold` to
    read the solution as a spectrum. Converged when the duality gap drops
    below gap_rtol * ||y||^2; otherwise SolverFailureError carries the gap.
    """
    if penalty < 0:
        raise ValueError("penalty must be >= 0")
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        return np.zeros(design.grid.n)
    x, gap, _, ok = _cd_lasso(design.folded_operator, y, penalty, nonnegative,
                              max_sweeps, gap_rtol * float(y @ y))
    if not ok:
        raise SolverFailureError(
            f"coordinate descent stalled with duality gap {gap:.3g}", gap)
    return x


def lasso_solve_path(design: DesignMatrix, y: np.ndarray, penalty: float,
                     nonnegative: bool = False, max_sweeps: int = 100_000,
                     gap_rtol: float = 1e-8, steps: int = 6,
                     best_effort: bool = False) -> np.ndarray:
    """lasso_solve warm-started down a short penalty ladder (same solution).

    With best_effort=True an unconverged solve returns the last iterate
    instead of raising; appropriate for survey studies whose metric is far
    coarser than the duality gap.
    """
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        return np.zeros(design.grid.n)
    b = design.folded_operator
    top = 0.95 * null_penalty(design, y)
    tol = gap_rtol * float(y @ y)
    x = np.zeros(design.grid.n)
    if top > penalty:
        for pen in np.geomspace(top, penalty, steps)[:-1]:
            x, _, _, _ = _cd_lasso(b, y, float(pen), nonnegative, max_sweeps,
                                   max(tol, 1e-4 * float(y @ y)), x0=x)
    x, gap, _, ok = _cd_lasso(b, y, penalty, nonnegative, max_sweeps, tol, x0=x)
    if not ok and not best_effort:
        raise SolverFailureError(
            f"coordinate descent stalled with duality gap {gap:.3g}", gap)
    return x


def kkt_violation(design: DesignMatrix, y: np.ndarray, x: np.ndarray,
                  penalty: float) -> float:
    """Max violation of the l1 subgradient conditions at x (0 when optimal)."""
    b = design.folded_operator
    grad = b.T @ (np.asarray(y) - b @ np.asarray(x))
    viol = 0.0
    for i in range(x.size):
        if x[i] != 0.0:
            viol = max(viol, abs(grad[i] - penalty * np.sign(x[i])))
        else:
            viol = max(viol, max(0.0, abs(grad[i]) - penalty))
    return float(viol)


@dataclass(frozen=True)
class CvResult:
    penalty: float
    penalties: tuple
    mean_errors: tuple
    se_errors: tuple


def _fista_lasso(b: np.ndarray, y: np.ndarray, penalty: float, nonneg: bool = False,
                 max_iter: int = 400, gap_tol: float | None = None,
                 x0: np.ndarray | None = None) -> np.ndarray:
    """Accelerated proximal gradient; vectorized workhorse for survey fits.

    Reported solves go through the coordinate-descent contract instead; this
    exists because python-loop descent is too slow for hundreds of path fits.
    """
    m, n = b.shape
    sv = np.linalg.svd(b, compute_uv=False)
    lip = float(sv[0] ** 2) if sv.size else 1.0
    if lip == 0.0:
        return np.zeros(n)
    step = 1.0 / lip
    x = np.zeros(n) if x0 is None else x0.copy()
    z = x.copy()
    t = 1.0
    for it in range(max_iter):
        grad = b.T @ (b @ z - y)
        v = z - step * grad
        if nonneg:
            xn = np.maximum(v - step * penalty, 0.0)
        else:
            xn = np.sign(v) * np.maximum(np.abs(v) - step * penalty, 0.0)
        tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = xn + ((t - 1.0) / tn) * (xn - x)
        x, t = xn, tn
        if gap_tol is not None and it % 20 == 19:
            r = y - b @ x
            g = b.T @ r
            top = g.max() if nonneg else np.abs(g).max()
            scale = 1.0 if top <= penalty or top <= 0 else penalty / top
            theta = scale * r
            gap = 0.5 * (r @ r) + penalty * np.abs(x).sum() - (theta @ y - 0.5 * (theta @ theta))
            if gap <= gap_tol:
                break
    return x


def _fista_lasso_columns(b: np.ndarray, y: np.ndarray, penalties: np.ndarray,
                         nonneg: bool = False, max_iter: int = 1000,
                         gap_tol: float | None = None) -> np.ndarray:
    """Proximal solves for every penalty at once, one column per penalty."""
    m, n = b.shape
    p = penalties.size
    sv = np.linalg.svd(b, compute_uv=False)
    lip = float(sv[0] ** 2) if sv.size else 1.0
    if lip == 0.0:
        return np.zeros((n, p))
    step = 1.0 / lip
    x = np.zeros((n, p))
    z = x.copy()
    t = 1.0
    pen_row = penalties[None, :]
    for it in range(max_iter):
        grad = b.T @ (b @ z - y[:, None])
        v = z - step * grad
        if nonneg:
            xn = np.maximum(v - step * pen_row, 0.0)
        else:
            xn = np.sign(v) * np.maximum(np.abs(v) - step * pen_row, 0.0)
        tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = xn + ((t - 1.0) / tn) * (xn - x)
        x, t = xn, tn
        if gap_tol is not None and it % 25 == 24:
            r = y[:, None] - b @ x
            g = b.T @ r
            top = g.max(axis=0) if nonneg else np.abs(g).max(axis=0)
            scale = np.where(top > penalties, penalties / np.maximum(top, 1e-300), 1.0)
            theta = r * scale[None, :]
            gaps = (0.5 * (r * r).sum(axis=0) + penalties * np.abs(x).sum(axis=0)
                    - (theta * y[:, None]).sum(axis=0) + 0.5 * (theta * theta).sum(axis=0))
            if gaps.max() <= gap_tol:
                break
    return x


def cross_validate(design: DesignMatrix, y: np.ndarray, folds: int,
                   max_sweeps: int = 1000) -> CvResult:
    """K-fold selection over 50 log-spaced penalties, one-standard-error rule.

    Folds are assigned round robin over measurement order (deterministic).
    Selection fits solve the whole penalty path jointly with the vectorized
    proximal solver; only the final solve at the chosen penalty carries the
    descent convergence contract.
    """
    y = np.asarray(y, dtype=float)
    m = y.size
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if m < folds:
        raise ValueError("need at least as many measurements as folds")
    pmax = max(null_penalty(design, y), 1e-300)
    pens = np.geomspace(pmax, 1e-4 * pmax, 50)
    b = design.folded_operator
    errors = np.zeros((folds, pens.size))
    assign = np.arange(m) % folds
    for f in range(folds):
        test = assign == f
        btr, ytr = b[~test], y[~test]
        bte, yte = b[test], y[test]
        xs = _fista_lasso_columns(btr, ytr, pens, max_iter=max_sweeps,
                                  gap_tol=1e-8 * float(ytr @ ytr))
        errors[f] = ((bte @ xs - yte[:, None]) ** 2).sum(axis=0)
    mean = errors.mean(axis=0)
    se = errors.std(axis=0, ddof=1) / np.sqrt(folds)
    best = int(np.argmin(mean))
    threshold = mean[best] + se[best]
    chosen = 0
    for pi in range(pens.size):
        if mean[pi] <= threshold:
            chosen = pi  # penalties descend; first qualifying index is largest
            break
    return CvResult(float(pens[chosen]), tuple(pens), tuple(mean), tuple(se))


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    """Gridded estimate, support, and the solve metadata behind it."""

    grid: FrequencyGrid
    values: np.ndarray       # debiased, clipped at 0
    values_raw: np.ndarray   # unfolded solver output, sign free
    support: np.ndarray
    penalty: float
    residual: float
    eps: float
    feasible: bool
    lags: np.ndarray
    cv: CvResult | None = None

    def to_json_dict(self) -> dict:
        return {
            "grid_n": self.grid.n, "omega_c": self.grid.omega_c,
            "values": self.values.tolist(), "values_raw": self.values_raw.tolist(),
            "support": self.support.tolist(), "penalty": self.penalty,
            "residual": self.residual, "eps": self.eps, "feasible": self.feasible,
            "lags": self.lags.tolist(),
        }


def _shrunk_whitener(cov: np.ndarray, shrink: float = 1e-3) -> np.ndarray:
    """Upper-triangular W with W.T @ W = inv(cov + shrink * mean-diag * I)."""
    c = cov + shrink * float(np.mean(np.diag(cov))) * np.eye(cov.shape[0])
    return np.linalg.cholesky(np.linalg.inv(c)).T


def _universal_penalty(b: np.ndarray, n: int, mult: float) -> float:
    """Noise-calibrated threshold for a whitened system (unit row noise)."""
    colnorms = np.linalg.norm(b, axis=0)
    return mult * float(np.median(colnorms)) * np.sqrt(2.0 * np.log(n))


def reconstruct(measurements: MeasurementSet, grid: FrequencyGrid,
                folds: int = 10, penalty: float | None = None,
                penalty_scale: float | None = None,
                nonnegative: bool = False, max_sweeps: int = 100_000,
                prune_rel: float = 0.25, noise_mult: float = 0.8,
                best_effort: bool = False) -> ReconstructionResult:
    """Full pipeline: design matrix, penalty selection, solve, debias, clip.

    When the measurement set carries the joint covariance (common-randomness
    acquisition), support selection runs on the covariance-whitened
    base-subtracted system and amplitudes are refit on the augmented raw
    system, whose base row anchors the total spectral mass. The penalty then
    defaults to a noise-calibrated universal threshold; with uncorrelated or
    error-free measurements it defaults to cross-validation (explicit
    `penalty` or `penalty_scale` win in both cases). The grid may be finer
    than the acquisition grid; measurements are grid free, so refining costs
    nothing beyond the solve.
    """
    design = build_design_matrix(grid, measurements.lags, measurements.m_segments,
                                 measurements.tau)
    fold = design.fold
    ys = measurements.scaled_values()
    sig = measurements.scaled_stderrs()
    m = measurements.m
    cv = None
    refit_b, refit_y = None, None
    if measurements.raw_cov is not None:
        diff = np.hstack([-np.ones((m, 1)), np.eye(m)])
        cov_d = (2.0 * np.pi) ** 2 * (diff @ measurements.raw_cov @ diff.T)
        cov_d = cov_d / np.outer(measurements.c_scales, measurements.c_scales)
        wh = _shrunk_whitener(cov_d)
        bw = wh @ design.folded_operator
        yw = wh @ ys
        eps = 9.0 * m + 1e-12 * float(yw @ yw)  # whitened rows have unit noise
        # amplitude refit uses the raw exponents too; the base row pins the
        # band mass, which the differences alone cannot see
        base_row = (2.0 * measurements.omega_c * measurements.m_segments
                    * measurements.tau**2 / grid.n) * fold
        rows = np.vstack([base_row,
                          base_row[None, :] + measurements.c_scales[:, None] * design.matrix])
        raw_vals = 2.0 * np.pi * np.concatenate(
            ([measurements.base_chi], measurements.values + measurements.base_chi))
        wr = _shrunk_whitener((2.0 * np.pi) ** 2 * measurements.raw_cov)
        refit_b = wr @ (rows / fold[None, :])
        refit_y = wr @ raw_vals
        dw = _PreparedDesign(design, bw)
        if penalty is None and penalty_scale is not None:
            penalty = penalty_scale * max(null_penalty(dw, yw), 1e-300)
        if penalty is None:
            penalty = _universal_penalty(bw, grid.n, noise_mult)
    else:
        if np.all(sig > 0):
            wts = np.exp(np.mean(np.log(sig))) / sig  # geometric-mean normalized
        else:
            wts = np.ones(m)
        bw = wts[:, None] * design.folded_operator
        yw = wts * ys
        eps = float(((3.0 * wts * sig) ** 2).sum()) + 1e-12 * float(yw @ yw)
        dw = _PreparedDesign(design, bw)
        if penalty is None and penalty_scale is not None:
            penalty = penalty_scale * max(null_penalty(dw, yw), 1e-300)
        if penalty is None:
            cv = cross_validate(dw, yw, folds)
            penalty = cv.penalty
    x = lasso_solve_path(dw, yw, penalty, nonnegative, max_sweeps,
                         best_effort=best_effort)
    support = np.nonzero(np.abs(x) > 1e-12 * max(np.abs(x).max(), 1e-300))[0]
    fit_b = refit_b if refit_b is not None else bw
    fit_y = refit_y if refit_y is not None else yw
    x_fit = x.copy()
    if support.size and support.size <= fit_b.shape[0]:
        # debias, then prune bins that refit far below the dominant one
        # (selection noise shows up as small spurious amplitudes), then
        # refit once more on the pruned support
        coef, *_ = np.linalg.lstsq(fit_b[:, support], fit_y, rcond=None)
        vals = coef / fold[support]
        keep = vals >= prune_rel * max(float(vals.max()), 0.0)
        support = support[keep]
        x_fit = np.zeros_like(x)
        if support.size:
            coef, *_ = np.linalg.lstsq(fit_b[:, support], fit_y, rcond=None)
            x_fit[support] = coef
    res = bw @ x_fit - yw
    residual = float(res @ res)
    values = np.maximum(x_fit / fold, 0.0)
    support = np.nonzero(values)[0]  # what the reported estimate actually claims
    return ReconstructionResult(grid, values, x / fold, support,
                                float(penalty), residual, eps, residual <= eps,
                                measurements.lags.copy(), cv)


class _PreparedDesign:
    """Design with whitening or weights folded in; duck-typed as DesignMatrix."""

    def __init__(self, design: DesignMatrix, folded_operator: np.ndarray):
        self.grid = design.grid
        self.lags = design.lags
        self.m_segments = design.m_segments
        self.tau = design.tau
        self.fold = design.fold
        self.folded_operator = folded_operator
        self.matrix = folded_operator * design.fold[None, :]


@dataclass(frozen=True)
class Peak:
    center: float
    mass: float
    lo: float
    hi: float


@dataclass(frozen=True)
class PeakTable:
    peaks: tuple
    requested: int
    complete: bool

    @property
    def centers(self) -> np.ndarray:
        return np.array([p.center for p in self.peaks])


def extract_peaks(result: ReconstructionResult, top: int,
                  merge_gap: int = 1) -> PeakTable:
    """Cluster adjacent non-zero bins and report amplitude-weighted centers.

    Bins whose index distance is <= merge_gap belong to one cluster (1 means
    strictly adjacent; wider-than-a-bin physical peaks warrant a larger gap so
    a single dropped bin does not split them). Returns the `top` clusters by
    total mass, flagged incomplete when fewer clusters exist.
    """
    vals = result.values
    nz = np.nonzero(vals)[0]
    pts = result.grid.points
    clusters = []
    if nz.size:
        breaks = np.nonzero(np.diff(nz) > merge_gap)[0]
        for chunk in np.split(nz, breaks + 1):
            mass = vals[chunk].sum()
            center = float((pts[chunk] * vals[chunk]).sum() / mass)
            clusters.append(Peak(center, float(mass), float(pts[chunk[0]]),
                                 float(pts[chunk[-1]])))
    clusters.sort(key=lambda p: -p.mass)
    return PeakTable(tuple(clusters[:top]), top, len(clusters) >= top)


def peak_deviation(estimated_centers, truth_centers) -> float:
    """Max over true peaks of the distance to the nearest estimated peak."""
    est = np.asarray(estimated_centers, dtype=float)
    truth = np.asarray(truth_centers, dtype=float)
    if est.size == 0:
        return float("inf")
    return float(max(np.abs(est - t).min() for t in truth))


@dataclass(frozen=True)
class PhaseRow:
    sparsity: int
    n_lags: int
    mean_linf: float


@dataclass(frozen=True)
class PhaseStudy:
    rows: tuple
    m_c: dict  # sparsity -> smallest lag count with mean linf <= 0.5 (None if never)


def phase_transition_study(sparsities, m_range, trials: int, grid: FrequencyGrid,
                           m_segments: int, tau: float, seed: int,
                           penalty_scale: float = 1e-3, threshold: float = 0.5,
                           nonnegative: bool = True,
                           journal_path: str | None = None) -> PhaseStudy:
    """Mean worst-bin reconstruction error vs measurement count, per sparsity.

    Runs on exact (noiseless) measurements; the transition position is a
    property of the recovery problem, not of shot noise. Random spectra have
    amplitudes in [0.5, 1], so missing a single support point already costs
    at least the 0.5 threshold. Spectra are nonnegative, so the study solves
    the sign-constrained variant by default; it moves the transition several
    measurements earlier than unconstrained solving plus clipping.
    """
    journal = Journal(journal_path)
    rows = []
    m_c: dict = {}
    m_list = sorted(int(m) for m in m_range)
    for s in sparsities:
        s = int(s)
        for m in m_list:
            errs = []
            for t in range(trials):
                key = f"s{s}m{m}t{t}"
                cached = journal.get(key)
                if cached is not None:
                    errs.append(float(cached))
                    continue
                unit_seed = derive_seed(seed, s * 1_000_000 + m * 1_000 + t)
                truth = random_sparse(grid, s, derive_seed(unit_seed, 1))
                lags = draw_lags(m, m_segments, derive_seed(unit_seed, 2))
                design = build_design_matrix(grid, lags, m_segments, tau)
                ys = design.matrix @ truth.values
                pen = penalty_scale * max(null_penalty(design, ys), 1e-300)
                # survey fit: vectorized solver, best effort below the
                # transition where the solution is dense and slow to polish
                x = _fista_lasso(design.folded_operator, ys, pen,
                                 nonneg=nonnegative, max_iter=2000,
                                 gap_tol=1e-8 * float(ys @ ys))
                support = np.nonzero(np.abs(x) > 1e-12 * max(np.abs(x).max(), 1e-300))[0]
                est = np.zeros(grid.n)
                if support.size and support.size <= lags.size:
                    coef, *_ = np.linalg.lstsq(design.folded_operator[:, support], ys,
                                               rcond=None)
                    est[support] = coef
                else:
                    est = x
                est = np.maximum(est / design.fold, 0.0)
                err = float(np.abs(est - truth.values).max())
                journal.add(key, err)
                errs.append(err)
            rows.append(PhaseRow(s, m, float(np.mean(errs))))
        m_c[s] = next((r.n_lags for r in rows
                       if r.sparsity == s and r.mean_linf <= threshold), None)
    journal.flush()
    return PhaseStudy(tuple(rows), m_c)
