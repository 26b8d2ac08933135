"""State-feedback pulse modulation.

The two control signals are built from the instantaneous density matrix:

    Xi_1(t) = Re( -i K_1 Tr([P_S,  H_1(t)] rho) )
    Xi_2(t) = Re( +i K_2 Tr([P_gg, H_2(t)] rho) )

where ``P_S`` projects on the target singlet-like state and ``P_gg`` on the
ground state the decay preferentially refills.  ``H_1``/``H_2`` must be the
same Hermitian generators through which the signals enter the Hamiltonian;
that identity is what makes the Xi_1 contribution to the target population
speed exactly ``+Xi_1^2/K_1`` and the Xi_2 contribution to the gg speed
exactly ``-Xi_2^2/K_2``, at every instant.

The traces are purely imaginary for Hermitian ``rho``; the real projection is
taken and the imaginary residue reported so drifting Hermiticity is visible
instead of silently cancelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ControlEvaluationError
from .hilbert import DensityMatrix
from .models import CompiledModel

__all__ = ["ControlSignal", "ControlLaw", "law_for_model", "evaluate_controls",
           "modulated_amplitudes"]

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ControlSignal:
    xi1: float
    xi2: float
    imag_residual: float = 0.0

    @property
    def flagged(self) -> bool:
        """True when the trace had an imaginary residue beyond tolerance."""
        return self.imag_residual > 1e-8


@dataclass(frozen=True)
class ControlLaw:
    """Gains, projector kets, and control-Hamiltonian generators."""

    K1: float
    K2: float
    target_ket: np.ndarray     # |S>
    repel_ket: np.ndarray      # |psi_gg>
    h1: Callable[[float], np.ndarray]
    h2: Callable[[float], np.ndarray]
    clamp: Optional[float] = None   # optional |Xi| saturation, default off

    def __post_init__(self):
        if self.K1 < 0 or self.K2 < 0:
            raise ValueError("gains must be >= 0")

    @property
    def target_projector(self) -> np.ndarray:
        return np.outer(self.target_ket, self.target_ket.conj())

    @property
    def repel_projector(self) -> np.ndarray:
        return np.outer(self.repel_ket, self.repel_ket.conj())


def law_for_model(model: CompiledModel, K1: Optional[float] = None,
                  K2: Optional[float] = None,
                  clamp: Optional[float] = None) -> ControlLaw:
    """Control law bound to a compiled model's basis and generators."""
    h1, h2 = model.control_generators
    return ControlLaw(
        K1=model.spec.K1 if K1 is None else K1,
        K2=model.spec.K2 if K2 is None else K2,
        target_ket=model.basis["S"].amplitudes,
        repel_ket=model.basis["gg"].amplitudes,
        h1=h1,
        h2=h2,
        clamp=clamp,
    )


def _tr_comm_proj(ket: np.ndarray, h: np.ndarray, rho: np.ndarray) -> complex:
    """Tr([|k><k|, H] rho) = <k|H rho|k> - <k|rho H|k>, via matvecs only."""
    w = h @ ket
    return np.vdot(w, rho @ ket) - np.vdot(ket, rho @ w)


def evaluate_controls(law: ControlLaw, rho: DensityMatrix | np.ndarray,
                      t: float = 0.0) -> ControlSignal:
    """Both control signals at time ``t`` for state ``rho``."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else rho
    resid = 0.0
    xi1 = 0.0
    if law.K1 > 0.0:
        y = -1j * law.K1 * _tr_comm_proj(law.target_ket, law.h1(t), m)
        xi1 = float(y.real)
        resid = max(resid, abs(y.imag) / max(law.K1, 1.0))
    xi2 = 0.0
    if law.K2 > 0.0:
        y = 1j * law.K2 * _tr_comm_proj(law.repel_ket, law.h2(t), m)
        xi2 = float(y.real)
        resid = max(resid, abs(y.imag) / max(law.K2, 1.0))
    if not (math.isfinite(xi1) and math.isfinite(xi2)):
        raise ControlEvaluationError(
            f"non-finite control signal at t = {t}: ({xi1}, {xi2})"
        )
    if law.clamp is not None:
        xi1 = max(-law.clamp, min(law.clamp, xi1))
        xi2 = max(-law.clamp, min(law.clamp, xi2))
    return ControlSignal(xi1, xi2, resid)


def modulated_amplitudes(base: tuple[float, float], signal: ControlSignal
                         ) -> tuple[float, float, float, float]:
    """The four drive amplitudes (Omega_1, Omega_2, Omega_1^MW, Omega_2^MW).

    Only atom 1 carries the control terms; atom 2 keeps the constant base
    with the laser sign flipped:

        Omega_1 = Omega0/sqrt2 + Xi_1        Omega_2    = -Omega0/sqrt2
        Omega_1^MW = Omega0_MW/sqrt2 + Xi_2  Omega_2^MW = Omega0_MW/sqrt2
    """
    om0, om_mw = base
    return (om0 / _SQRT2 + signal.xi1, -om0 / _SQRT2,
            om_mw / _SQRT2 + signal.xi2, om_mw / _SQRT2)
