#!/usr/bin/env python3
"""Heavier phase-transition run: locate m_c for one sparsity at high replica
count (the acceptance anchor uses s=13, trials=50)."""

import argparse

import numpy as np

from rpspec.csrecon import phase_transition_study
from rpspec.spectra import FrequencyGrid


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--sparsity", type=int, default=13)
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--m-min", type=int, default=28)
    ap.add_argument("--m-max", type=int, default=56)
    ap.add_argument("--m-step", type=int, default=2)
    ap.add_argument("--grid-n", type=int, default=250)
    ap.add_argument("--m-segments", type=int, default=250)
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--journal", default=None)
    args = ap.parse_args()

    grid = FrequencyGrid(args.grid_n, np.pi)
    study = phase_transition_study(
        [args.sparsity], range(args.m_min, args.m_max + 1, args.m_step),
        args.trials, grid, args.m_segments, np.pi / grid.omega_c, args.seed,
        journal_path=args.journal)
    for row in study.rows:
        print(f"s={row.sparsity} m={row.n_lags:3d} mean_linf={row.mean_linf:.4f}")
    print(f"m_c({args.sparsity}) = {study.m_c[args.sparsity]}")


if __name__ == "__main__":
    main()
