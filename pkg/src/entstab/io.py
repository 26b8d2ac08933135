"""On-disk formats: time-series CSV, noise-grid CSV, and JSON summaries.

All floats are written with ``repr(float(x))`` so output is bit-stable,
round-trips exactly, and carries well over 12 significant digits.  Times are
in units of 1/g.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable

import numpy as np

from .analysis import RunSummary
from .dynamics import Trajectory

__all__ = [
    "TIMESERIES_COLUMNS",
    "NOISE_GRID_COLUMNS",
    "write_timeseries",
    "read_timeseries",
    "validate_timeseries",
    "write_noise_grid",
    "read_noise_grid",
    "summary_dict",
    "write_summaries",
    "fingerprint",
]

TIMESERIES_COLUMNS = ("t", "P_S", "P_T", "P_gg", "P_ff", "P_D",
                      "xi1", "xi2", "V_S", "F")
NOISE_GRID_COLUMNS = ("lambda", "eta", "F")

_POP_ORDER = ("S", "T", "gg", "ff", "D")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_timeseries(path: str | Path, traj: Trajectory) -> Path:
    """One row per recorded time with the standard column set."""
    path = Path(path)
    pops = traj.populations_noisy or traj.populations
    cols = [traj.times]
    cols += [pops[name] for name in _POP_ORDER]
    cols += [traj.controls[:, 0], traj.controls[:, 1],
             traj.speeds["S"], traj.fidelity]
    with path.open("w") as fh:
        fh.write(",".join(TIMESERIES_COLUMNS) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    return path


def read_timeseries(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
        names = tuple(header.split(",")) if header else ()
        if names != TIMESERIES_COLUMNS:
            missing = [c for c in TIMESERIES_COLUMNS if c not in names]
            extra = [c for c in names if c not in TIMESERIES_COLUMNS]
            raise ValueError(
                f"bad time-series header in {path}: "
                f"missing {missing or 'nothing'}, unexpected {extra or 'nothing'}"
            )
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        raise ValueError(f"empty time series: {path}")
    return {name: data[:, i] for i, name in enumerate(TIMESERIES_COLUMNS)}


def validate_timeseries(data: dict[str, np.ndarray]) -> None:
    """Re-loaded series must satisfy the trajectory invariants."""
    t = data["t"]
    if np.any(np.diff(t) <= 0):
        raise ValueError("times not strictly increasing")
    pop_cols = [c for c in TIMESERIES_COLUMNS if c.startswith("P_")]
    total = np.zeros_like(t)
    for c in pop_cols:
        v = data[c]
        if np.any(v < -1e-12) or np.any(v > 1.0 + 1e-9):
            raise ValueError(f"population column {c} outside [0, 1]")
        total += v
    if np.any(total > 1.0 + 1e-6):
        raise ValueError("populations sum above 1")
    f = data["F"]
    if np.any(f < 0) or np.any(f > 1 + 1e-12):
        raise ValueError("fidelity outside [0, 1]")


def write_noise_grid(path: str | Path, lams: Iterable[float],
                     etas: Iterable[float], F: np.ndarray) -> Path:
    """Fidelity grid, one (lambda, eta, F) row per cell, row-major in lambda."""
    path = Path(path)
    lams = list(lams)
    etas = list(etas)
    F = np.asarray(F)
    if F.shape != (len(lams), len(etas)):
        raise ValueError(f"grid shape {F.shape} != ({len(lams)}, {len(etas)})")
    with path.open("w") as fh:
        fh.write(",".join(NOISE_GRID_COLUMNS) + "\n")
        for i, lam in enumerate(lams):
            for j, eta in enumerate(etas):
                fh.write(f"{_fmt(lam)},{_fmt(eta)},{_fmt(F[i, j])}\n")
    return path


def read_noise_grid(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
        names = tuple(header.split(",")) if header else ()
        if names != NOISE_GRID_COLUMNS:
            missing = [c for c in NOISE_GRID_COLUMNS if c not in names]
            raise ValueError(
                f"bad noise-grid header in {path}: missing {missing or 'nothing'}"
            )
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        raise ValueError(f"empty noise grid: {path}")
    return {name: data[:, i] for i, name in enumerate(NOISE_GRID_COLUMNS)}


def summary_dict(summary: RunSummary, extra: dict | None = None) -> dict:
    """JSON-ready mapping with a stable key order."""
    out = {
        "scenario": summary.scenario_tag,
        "r_p": summary.r_p,
        "g_sc": summary.g_sc,
        "fidelity": summary.fidelity,
        "t_S": summary.t_s,
        "T": summary.t_dimensionless,
        "final_populations": {k: summary.final_populations[k]
                              for k in sorted(summary.final_populations)},
        "warnings": list(summary.warnings),
    }
    if extra:
        out.update(extra)
    return out


def write_summaries(path: str | Path, records: list[dict]) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        json.dump(records, fh, indent=2)
        fh.write("\n")
    return path


def fingerprint(resolved_config_text: str) -> str:
    """Deterministic digest of a fully resolved configuration."""
    return hashlib.sha256(resolved_config_text.encode("utf-8")).hexdigest()[:16]
