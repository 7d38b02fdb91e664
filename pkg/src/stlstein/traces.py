"""Lossless CSV serialization of state trajectories."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def write_trace_csv(states, dest) -> None:
    """Header ``t,x0,...,x{n-1}`` then one row per step, 17 significant digits."""
    states = np.asarray(states, dtype=float)
    n = states.shape[1]
    rows = [["t"] + [f"x{k}" for k in range(n)]]
    rows += [[str(t)] + [f"{v:.17g}" for v in s] for t, s in enumerate(states)]
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
    else:
        csv.writer(dest, lineterminator="\n").writerows(rows)


def read_trace_csv(src) -> np.ndarray:
    if isinstance(src, (str, Path)):
        with open(src, newline="") as fh:
            return read_trace_csv(fh)
    reader = csv.reader(src)
    header = next(reader)
    if not header or header[0] != "t":
        raise ValueError("trace csv must start with a 't' column")
    rows = [r for r in reader if r]
    for k, r in enumerate(rows):
        if len(r) != len(header):
            raise ValueError(f"trace csv row {k + 1} has {len(r)} fields, expected {len(header)}")
        if int(r[0]) != k:
            raise ValueError(f"trace csv row {k + 1} has t={r[0]}, expected {k}")
    return np.array([[float(v) for v in r[1:]] for r in rows])
