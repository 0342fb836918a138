"""Shared numeric helpers: seed derivation, sinc forms, folded quadrature."""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def derive_seed(base: int, index: int) -> int:
    """Derive the seed for unit `index` from `base` (splitmix64 finalizer).

    Used for per-sequence and per-experiment streams so that results are
    independent of worker count and scheduling.
    """
    z = (int(base) + (int(index) + 1) * _GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def sinc(x):
    """sin(x)/x with the removable singularity filled (sinc(0) = 1)."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def sinc_half(omega, tau: float):
    """sinc(omega * tau / 2), the segment spectral envelope."""
    return sinc(np.asarray(omega, dtype=float) * (tau / 2.0))


def trapezoid_folded(f0: float, samples: np.ndarray, spacing: float) -> float:
    """Two-sided integral of an even function from one-sided samples.

    Nodes are 0, d, 2d, ..., Nd; the value at 0 is passed separately because
    frequency grids store only (0, omega_c].
    """
    samples = np.asarray(samples, dtype=float)
    inner = samples[:-1].sum() if samples.size > 1 else 0.0
    return 2.0 * spacing * (0.5 * (f0 + samples[-1]) + inner)


def rectangle_folded(samples: np.ndarray, spacing: float) -> float:
    """Two-sided integral of an even gridded function, one bin per grid point."""
    return 2.0 * spacing * float(np.asarray(samples, dtype=float).sum())
