"""Simulation traces and their CSV form."""
from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

COLUMNS = ("t_s", "power_dbw", "r_db", "g_db", "efficiency", "xi_max", "alignment", "stability")
FLOAT_COLUMNS = COLUMNS[:-1]
EFFICIENCY_SLACK = 1e-9


@dataclass
class SimulationTrace:
    t_s: np.ndarray
    power_dbw: np.ndarray
    r_db: np.ndarray
    g_db: np.ndarray
    efficiency: np.ndarray
    xi_max: np.ndarray
    alignment: np.ndarray
    stability: list
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in FLOAT_COLUMNS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.stability = list(self.stability)
        n = len(self.t_s)
        if any(len(getattr(self, c)) != n for c in COLUMNS):
            raise ValueError("trace columns differ in length")

    def __len__(self):
        return len(self.t_s)

    @property
    def ratio(self):
        """Efficiency relative to the instantaneous maximum."""
        return self.efficiency / self.xi_max

    def validate(self):
        if len(self) == 0:
            raise ValueError("empty trace")
        if np.any(np.diff(self.t_s) <= 0):
            raise ValueError("trace times must be strictly increasing")
        bad = self.efficiency > self.xi_max + EFFICIENCY_SLACK
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ValueError(f"row {i}: efficiency {self.efficiency[i]} exceeds xi_max {self.xi_max[i]}")

    def window(self, t_start, t_end=np.inf):
        return (self.t_s >= t_start) & (self.t_s <= t_end)

    def to_csv_text(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        cols = [getattr(self, c) for c in FLOAT_COLUMNS]
        for i in range(len(self)):
            w.writerow([repr(float(c[i])) for c in cols] + [self.stability[i]])
        return buf.getvalue()

    def write_csv(self, path):
        atomic_write_text(path, self.to_csv_text())

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(rows[0]) != COLUMNS:
            raise ValueError(f"{path}: unexpected CSV header")
        body = rows[1:]
        data = {c: [float(r[i]) for r in body] for i, c in enumerate(FLOAT_COLUMNS)}
        data["stability"] = [r[-1] for r in body]
        return cls(**data)


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def settling_time(t, y, final=None, band=0.01, t_start=None):
    """Earliest time after which ``y`` stays within ``band`` (relative) of ``final``.

    ``final`` defaults to the last sample.  Times are measured from
    ``t_start`` (default: the first sample).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) == 0:
        raise ValueError("empty series")
    if final is None:
        final = y[-1]
    tol = band * abs(final)
    outside = np.abs(y - final) > tol
    t0 = t[0] if t_start is None else t_start
    if not np.any(outside):
        return float(t[0] - t0)
    last = int(np.nonzero(outside)[0][-1])
    if last == len(t) - 1:
        return float("inf")
    return float(t[last + 1] - t0)


def overshoot_db(power_dbw, reference_dbw):
    """Largest excursion above the setpoint (0 if the trace never exceeds it)."""
    return float(max(0.0, np.max(np.asarray(power_dbw) - reference_dbw)))
