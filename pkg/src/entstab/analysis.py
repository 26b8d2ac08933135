"""Post-processing: fidelity, stabilization time, scaling and cooperativity."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dynamics import Trajectory
from .hilbert import DensityMatrix, Ket
from .models import ModelSpec

__all__ = [
    "StabilizationCriterion",
    "RunSummary",
    "fidelity",
    "stabilization_time",
    "summarize",
    "scaling_check",
    "ScalingReport",
    "cooperativity_report",
    "CooperativityReport",
]


@dataclass(frozen=True)
class StabilizationCriterion:
    """Stability thresholds: V_S <= v_threshold [g] and |dV_S/dt| <=
    vdot_threshold [g^2], required to persist over the rest of the record."""

    v_threshold: float = 1e-5
    vdot_threshold: float = 1e-6

    def __post_init__(self):
        if self.v_threshold <= 0 or self.vdot_threshold <= 0:
            raise ValueError("thresholds must be > 0")


@dataclass(frozen=True)
class RunSummary:
    """Headline numbers for one run."""

    scenario_tag: str
    fidelity: float
    t_s: Optional[float]
    t_dimensionless: Optional[float]   # t_s * g_sc
    final_populations: dict[str, float]
    g_sc: float
    r_p: float
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.fidelity <= 1.0:
            raise ValueError("fidelity outside [0, 1]")
        if (self.t_s is None) != (self.t_dimensionless is None):
            raise ValueError("t_s and t_dimensionless must be set together")


def fidelity(rho: DensityMatrix, target: Ket) -> float:
    """F = sqrt(<target|rho|target>), clamped to [0, 1]."""
    if rho.layout != target.layout:
        raise ValueError("layout mismatch between state and target")
    v = target.amplitudes
    p = float(np.real(np.vdot(v, rho.matrix @ v)))
    return math.sqrt(min(max(p, 0.0), 1.0))


def stabilization_time(traj: Trajectory,
                       crit: StabilizationCriterion = StabilizationCriterion()
                       ) -> Optional[float]:
    """Earliest recorded time from which the stability condition holds on.

    The derivative of the target-population speed is a finite difference at
    record resolution (one-sided at the ends).  The persistence guard keeps
    transient dips at oscillation nodes from firing the criterion.
    """
    t = traj.times
    v = traj.speeds["S"]
    if len(t) < 2:
        return float(t[0]) if len(t) == 1 else None
    dv = np.gradient(v, t)
    ok = (v <= crit.v_threshold) & (np.abs(dv) <= crit.vdot_threshold)
    bad = np.flatnonzero(~ok)
    start = 0 if bad.size == 0 else int(bad[-1]) + 1
    if start >= len(t):
        return None
    return float(t[start])


def summarize(traj: Trajectory, scenario_tag: str,
              crit: StabilizationCriterion = StabilizationCriterion(),
              t_f: Optional[float] = None) -> RunSummary:
    """Reduce a trajectory to a RunSummary.

    The fidelity is read at ``t_f`` if given (noise runs fix it), else at the
    stabilization time, else at the final recorded time.
    """
    g_sc = traj.metadata.get("g_sc", 1.0)
    t_s = stabilization_time(traj, crit)
    t_report = t_f if t_f is not None else (t_s if t_s is not None
                                            else float(traj.times[-1]))
    idx = int(np.argmin(np.abs(traj.times - t_report)))
    fid = float(traj.fidelity[idx])
    pops = traj.populations_noisy or traj.populations
    final_pops = {name: float(series[-1]) for name, series in pops.items()}
    return RunSummary(
        scenario_tag=scenario_tag,
        fidelity=fid,
        t_s=t_s,
        t_dimensionless=None if t_s is None else t_s * g_sc,
        final_populations=final_pops,
        g_sc=g_sc,
        r_p=float(traj.metadata.get("r_p", np.arccosh(max(g_sc, 1.0)))),
        warnings=tuple(traj.metadata.get("warnings", ())),
    )


@dataclass(frozen=True)
class ScalingReport:
    """Dimensionless stabilization times over a squeezing sweep."""

    t_values: tuple[float, ...]
    mean: float
    max_rel_deviation: float
    passed: bool


def scaling_check(runs: Sequence[RunSummary], tolerance: float = 0.25,
                  min_runs: int = 4) -> ScalingReport:
    """Constancy check of T = t_s * g_sc across a squeezing sweep."""
    if len(runs) < min_runs:
        raise ValueError(f"need at least {min_runs} runs, got {len(runs)}")
    missing = [r.scenario_tag for r in runs if r.t_s is None]
    if missing:
        raise ValueError(f"runs without stabilization time: {missing}")
    t_vals = tuple(float(r.t_dimensionless) for r in runs)
    mean = sum(t_vals) / len(t_vals)
    max_dev = max(abs(t - mean) / mean for t in t_vals)
    return ScalingReport(t_vals, mean, max_dev, max_dev <= tolerance)


@dataclass(frozen=True)
class CooperativityReport:
    C: float
    C_sc: float
    ratio: float


def cooperativity_report(spec: ModelSpec) -> CooperativityReport:
    """C = g^2/(kappa gamma) and its squeezing-amplified value."""
    if spec.kappa <= 0 or spec.gamma <= 0:
        raise ValueError("cooperativity undefined for zero decay rates")
    c = spec.g ** 2 / (spec.kappa * spec.gamma)
    ratio = math.cosh(spec.r_p) ** 2
    return CooperativityReport(C=c, C_sc=c * ratio, ratio=ratio)
