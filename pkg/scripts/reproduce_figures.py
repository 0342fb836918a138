#!/usr/bin/env python3
"""Regenerate every preset study into out/<preset>/ (CSV + manifest each)."""

import pathlib
import sys
import time

from rpspec.cli import main

SEED = 20240601


def run(preset: str, subcommand: str, out_root: pathlib.Path) -> None:
    out = out_root / preset
    t0 = time.monotonic()
    code = main([subcommand, "--preset", preset, "--seed", str(SEED),
                 "--out", str(out)])
    print(f"{preset}: exit {code} in {time.monotonic() - t0:.0f}s -> {out}")
    if code != 0:
        sys.exit(code)


if __name__ == "__main__":
    root = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else pathlib.Path("out")
    run("fig2", "window", root)
    run("fig3a", "cs", root)
    run("fig3b", "phase", root)
    run("fig5", "compare", root)
