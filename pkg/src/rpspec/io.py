"""CSV / JSON serialization helpers and the study checkpoint journal.

CSV output is RFC-4180 with LF line endings, '.' decimal separator, and
17-significant-digit floats (lossless float64 round trip).
"""

from __future__ import annotations

import json
import os
import time

import numpy as np


def fmt_float(x) -> str:
    return f"{float(x):.17g}"


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file + rename so failed runs leave no partial output."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(path: str, header: list[str], columns: list) -> None:
    cols = [np.atleast_1d(np.asarray(c)) for c in columns]
    if len({c.shape[0] for c in cols}) > 1:
        raise ValueError("csv columns must share a length")
    lines = [",".join(header)]
    for row in zip(*cols):
        cells = []
        for v in row:
            if isinstance(v, (str, np.str_)):
                cells.append(str(v))
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            else:
                cells.append(fmt_float(v))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path: str) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    header, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(header):
        raw = [r[j] for r in body]
        try:
            out[name] = np.array([float(v) for v in raw])
        except ValueError:
            out[name] = np.array(raw)
    return out


def write_json(path: str, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


class Journal:
    """Append-only checkpoint for long studies; one JSON line per finished unit.

    Flushes at most every `flush_interval` seconds plus once on close. A rerun
    pointed at the same path skips units whose keys are already present.
    """

    def __init__(self, path: str | None, flush_interval: float = 60.0):
        self.path = path
        self.flush_interval = flush_interval
        self._pending: list[str] = []
        self._last_flush = time.monotonic()
        self.completed: dict[str, object] = {}
        if path is not None and os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        self.completed[rec["key"]] = rec["value"]

    def get(self, key: str):
        return self.completed.get(key)

    def add(self, key: str, value) -> None:
        if self.path is None:
            return
        self.completed[key] = value
        self._pending.append(json.dumps({"key": key, "value": value}, sort_keys=True))
        if time.monotonic() - self._last_flush >= self.flush_interval:
            self.flush()

    def flush(self) -> None:
        if self.path is None or not self._pending:
            self._last_flush = time.monotonic()
            return
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write("\n".join(self._pending) + "\n")
        self._pending = []
        self._last_flush = time.monotonic()
