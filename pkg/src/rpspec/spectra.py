"""Noise spectral densities: analytic families, frequency grids, sparse grid vectors.

All spectra are even in omega (classical stationary Gaussian noise) and hard
truncated beyond the cutoff omega_c. Grids are one sided; two-sided integrals
are recovered by evenness in the quadrature, never by duplicating data.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .io import read_json, write_csv, write_json

KINDS = ("flat", "gaussian-peaks", "one-over-f", "gridded")


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid omega_i = i * omega_c / n for i = 1..n; omega = 0 excluded."""

    n: int
    omega_c: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("grid needs at least one point")
        if not self.omega_c > 0:
            raise ValueError("cutoff must be positive")

    @property
    def spacing(self) -> float:
        return self.omega_c / self.n

    @property
    def points(self) -> np.ndarray:
        pts = getattr(self, "_points", None)
        if pts is None:
            pts = self.spacing * np.arange(1, self.n + 1)
            pts.setflags(write=False)
            object.__setattr__(self, "_points", pts)
        return pts

    def close_to(self, other: "FrequencyGrid", rtol: float = 1e-12) -> bool:
        return self.n == other.n and abs(self.omega_c - other.omega_c) <= rtol * self.omega_c


@dataclass(frozen=True, eq=False)
class NoiseSpectrum:
    """A band-limited spectral density S(omega), analytic or gridded.

    kinds and params:
      flat            {"level": S0}
      gaussian-peaks  {"centers": [...], "widths": [...], "amplitudes": [...]}
      one-over-f      {"amplitude": A, "exponent": a, "floor": w0}; S = A/max(|w|, w0)^a
      gridded         {"values": [...]} on `grid`
    """

    kind: str
    params: dict
    omega_c: float
    grid: FrequencyGrid | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown spectrum kind {self.kind!r}")
        if not self.omega_c > 0:
            raise ValueError("cutoff must be positive")
        if self.kind == "gaussian-peaks":
            c = np.asarray(self.params["centers"], dtype=float)
            w = np.asarray(self.params["widths"], dtype=float)
            a = np.asarray(self.params["amplitudes"], dtype=float)
            if c.size == 0:
                raise ValueError("need at least one peak")
            if not (c.size == w.size == a.size):
                raise ValueError("peak parameter lists must share a length")
            if np.any(c >= self.omega_c):
                raise ValueError("peak centers must lie below the cutoff")
            if np.any(c < 0) or np.any(w <= 0) or np.any(a < 0):
                raise ValueError("peaks need centers >= 0, widths > 0, amplitudes >= 0")
        elif self.kind == "flat":
            if self.params["level"] < 0:
                raise ValueError("flat level must be >= 0")
        elif self.kind == "one-over-f":
            if self.params["amplitude"] < 0 or self.params["floor"] <= 0:
                raise ValueError("one-over-f needs amplitude >= 0 and floor > 0")
        elif self.kind == "gridded":
            if self.grid is None:
                raise ValueError("gridded spectrum needs a grid")
            vals = np.asarray(self.params["values"], dtype=float)
            if vals.shape != (self.grid.n,):
                raise ValueError("gridded values must match the grid size")
            if np.any(vals < 0):
                raise ValueError("spectral density must be >= 0")
            if abs(self.grid.omega_c - self.omega_c) > 1e-12 * self.omega_c:
                raise ValueError("grid cutoff disagrees with spectrum cutoff")
            vals = vals.copy()
            vals.setflags(write=False)
            object.__setattr__(self, "_values", vals)

    @property
    def values(self) -> np.ndarray:
        """Grid values (gridded spectra only)."""
        return self._values

    def density(self, omega):
        """Evaluate S(omega); even in omega, zero beyond the cutoff."""
        scalar = np.ndim(omega) == 0
        w = np.abs(np.asarray(omega, dtype=float))
        if self.kind == "flat":
            out = np.full_like(w, float(self.params["level"]))
        elif self.kind == "gaussian-peaks":
            out = np.zeros_like(w)
            for c, s, a in zip(self.params["centers"], self.params["widths"],
                               self.params["amplitudes"]):
                # mirror peak keeps the density exactly even near omega = 0
                out += a * (np.exp(-0.5 * ((w - c) / s) ** 2)
                            + np.exp(-0.5 * ((w + c) / s) ** 2))
        elif self.kind == "one-over-f":
            a = float(self.params["exponent"])
            out = self.params["amplitude"] / np.maximum(w, self.params["floor"]) ** a
        else:
            idx = np.clip(np.rint(w / self.grid.spacing).astype(int), 1, self.grid.n)
            out = self.values[idx - 1]
        out = np.where(w > self.omega_c, 0.0, out)
        return float(out) if scalar else out

    def to_json_dict(self) -> dict:
        params = {k: (np.asarray(v).tolist() if isinstance(v, (list, tuple, np.ndarray)) else v)
                  for k, v in self.params.items()}
        doc = {"kind": self.kind, "params": params, "omega_c": self.omega_c}
        if self.grid is not None:
            doc["grid_n"] = self.grid.n
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "NoiseSpectrum":
        grid = None
        if doc["kind"] == "gridded":
            grid = FrequencyGrid(int(doc["grid_n"]), float(doc["omega_c"]))
        return cls(doc["kind"], doc["params"], float(doc["omega_c"]), grid)


def evaluate(spectrum: NoiseSpectrum, omega):
    return spectrum.density(omega)


@dataclass(frozen=True, eq=False)
class SparseSpectrum:
    """Grid vector with at most `s` non-zero entries, all >= 0."""

    grid: FrequencyGrid
    values: np.ndarray
    s: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).copy()
        if vals.shape != (self.grid.n,):
            raise ValueError("values must match the grid size")
        if np.any(vals < 0):
            raise ValueError("values must be >= 0")
        if int(np.count_nonzero(vals)) > self.s:
            raise ValueError("more non-zeros than the declared sparsity")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def support(self) -> np.ndarray:
        return np.nonzero(self.values)[0]

    def as_spectrum(self) -> NoiseSpectrum:
        return NoiseSpectrum("gridded", {"values": self.values}, self.grid.omega_c, self.grid)


def random_sparse(grid: FrequencyGrid, s: int, seed: int) -> SparseSpectrum:
    """Draw `s` support points uniformly without replacement, amplitudes U[0.5, 1]."""
    if not 1 <= s <= grid.n:
        raise ValueError(f"sparsity must satisfy 1 <= s <= {grid.n}, got {s}")
    rng = np.random.default_rng(seed)
    support = np.sort(rng.choice(grid.n, size=s, replace=False))
    values = np.zeros(grid.n)
    values[support] = rng.uniform(0.5, 1.0, size=s)
    return SparseSpectrum(grid, values, s)


def quantum_dot_standin(peaks, omega_c: float) -> NoiseSpectrum:
    """Multi-Gaussian stand-in for a clustered narrow-peak spectrum.

    `peaks` is a sequence of (center, width, amplitude); the table doubles as
    the ground truth for peak-frequency accuracy scoring.
    """
    peaks = [tuple(map(float, p)) for p in peaks]
    return NoiseSpectrum(
        "gaussian-peaks",
        {
            "centers": [p[0] for p in peaks],
            "widths": [p[1] for p in peaks],
            "amplitudes": [p[2] for p in peaks],
        },
        float(omega_c),
    )


def ground_truth_centers(spectrum: NoiseSpectrum, top: int | None = None) -> np.ndarray:
    """Configured peak centers, largest amplitudes first."""
    if spectrum.kind != "gaussian-peaks":
        raise ValueError("ground truth centers exist only for peaked spectra")
    centers = np.asarray(spectrum.params["centers"], dtype=float)
    amps = np.asarray(spectrum.params["amplitudes"], dtype=float)
    order = np.argsort(amps)[::-1]
    out = centers[order]
    return out if top is None else out[:top]


def save_spectrum_json(path: str, spectrum: NoiseSpectrum) -> None:
    write_json(path, spectrum.to_json_dict())


def load_spectrum_json(path: str) -> NoiseSpectrum:
    return NoiseSpectrum.from_json_dict(read_json(path))


def save_gridded_csv(path: str, spectrum: NoiseSpectrum | SparseSpectrum) -> None:
    if isinstance(spectrum, SparseSpectrum):
        grid, vals = spectrum.grid, spectrum.values
    else:
        grid, vals = spectrum.grid, spectrum.values
    write_csv(path, ["omega", "s"], [grid.points, vals])
