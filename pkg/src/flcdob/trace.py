"""Per-step run records and their lossless CSV form."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

# Bit-exact export schema; column order is part of the contract.
CSV_HEADER = "t,x1,x2,u,d_true,d_hat_bn,d_hat_sl,tau,tau_c,tau_n,s,q,guards"
COLUMNS = CSV_HEADER.split(",")
FLOAT_COLUMNS = COLUMNS[:-1]  # guards is an integer count


@dataclass
class RunTrace:
    """Column-oriented record stream of one simulation run."""

    t: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    u: np.ndarray
    d_true: np.ndarray
    d_hat_bn: np.ndarray
    d_hat_sl: np.ndarray
    tau: np.ndarray
    tau_c: np.ndarray
    tau_n: np.ndarray
    s: np.ndarray
    q: np.ndarray
    guards: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    def column(self, name: str) -> np.ndarray:
        if name not in COLUMNS:
            raise KeyError(f"unknown trace column {name!r}")
        return getattr(self, name)

    def window_slice(self, t_start: float, t_end: float) -> slice:
        """Index slice covering t in [t_start, t_end]."""
        if t_end < t_start:
            raise ValueError(f"empty window ({t_start}, {t_end})")
        lo = int(np.searchsorted(self.t, t_start, side="left"))
        hi = int(np.searchsorted(self.t, t_end, side="right"))
        if hi <= lo:
            raise ValueError(f"window ({t_start}, {t_end}) outside trace")
        return slice(lo, hi)

    def determinism_hash(self) -> str:
        """SHA-256 over all column bytes; equal configs + seeds give equal hashes."""
        h = hashlib.sha256()
        for name in COLUMNS:
            h.update(np.ascontiguousarray(self.column(name)).tobytes())
        return h.hexdigest()


def export_trace(trace: RunTrace, path, every: int = 1) -> None:
    """Write the trace as CSV with full round-trip float precision.

    `every` > 1 writes a downsampled variant for plotting (first row kept).
    """
    if every < 1:
        raise ValueError(f"every must be >= 1, got {every}")
    try:
        with open(path, "w", newline="") as fh:
            fh.write(CSV_HEADER + "\n")
            cols = [trace.column(name) for name in FLOAT_COLUMNS]
            guards = trace.guards
            for k in range(0, len(trace), every):
                fields = [repr(float(c[k])) for c in cols]
                fields.append(str(int(guards[k])))
                fh.write(",".join(fields) + "\n")
    except OSError as exc:
        raise OSError(f"failed to write trace to {path}: {exc}") from exc


def load_trace(path) -> RunTrace:
    """Read a CSV written by export_trace; floats round-trip bit-exactly."""
    try:
        with open(path, "r", newline="") as fh:
            header = fh.readline().rstrip("\n")
            if header != CSV_HEADER:
                raise ValueError(f"unexpected trace header in {path}: {header!r}")
            rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    except OSError as exc:
        raise OSError(f"failed to read trace from {path}: {exc}") from exc
    data = {name: np.empty(len(rows)) for name in FLOAT_COLUMNS}
    guards = np.empty(len(rows), dtype=np.int64)
    for k, row in enumerate(rows):
        for name, value in zip(FLOAT_COLUMNS, row):
            data[name][k] = float(value)
        guards[k] = int(row[-1])
    return RunTrace(**data, guards=guards)
