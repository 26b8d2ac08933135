"""Closed-loop master-equation integration.

Fixed-step classical RK4 with the feedback signals re-evaluated at every RK
stage from the stage state (no step-start hold, so the feedback introduces no
O(dt) lag).  When a :class:`NoiseSpec` is active, two states are advanced
together: the nominal state (no noise terms) generates the control signals,
and the noisy state receives those nominal controls plus the systematic term
``-i lam [H_e, rho]`` and the white-noise average
``-(eta^2/2) [H_e, [H_e, rho]]``.

Density matrices stay exactly Hermitian through the loop because every RHS
term is assembled in a manifestly Hermitian form; trace and positivity are
audited periodically rather than enforced, and any renormalization is
logged.

The hot loop is written for small dense systems: jump terms whose operators
act on a single tensor factor are collapsed into one per-factor
superoperator applied with ``einsum``, everything else goes through BLAS,
and all stage arrays are preallocated (the dimensions here are small enough
that allocation and threading overhead, not flops, dominate otherwise).
"""

from __future__ import annotations

import math
from contextlib import nullcontext
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

try:
    from threadpoolctl import threadpool_limits
except ImportError:             # pragma: no cover - always present in CI env
    threadpool_limits = None

from .control import ControlLaw, ControlSignal, evaluate_controls, law_for_model
from .errors import IntegratorAbortError
from .hilbert import DensityMatrix
from .models import CompiledModel, DissipatorChannel

__all__ = [
    "IntegratorConfig",
    "NoiseSpec",
    "Trajectory",
    "dissipator_apply",
    "master_rhs",
    "integrate_closed_loop",
    "speeds",
]

MAX_DT_FREQUENCY_PRODUCT = 0.15
RENORM_THRESHOLD = 1e-9
ABORT_TRACE_DRIFT = 1e-6
ABORT_MIN_EIGENVALUE = -1e-6


@dataclass(frozen=True)
class IntegratorConfig:
    """Step size, horizon, and recording/audit strides (times in 1/g)."""

    dt: float
    t_end: float
    record_stride: int = 10
    audit_stride: int = 500
    store_states: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.t_end < self.dt:
            raise ValueError("t_end must cover at least one step")
        if self.record_stride < 1 or self.audit_stride < 1:
            raise ValueError("strides must be >= 1")

    def check_against(self, model: CompiledModel) -> None:
        prod = self.dt * model.frequency_scale
        if prod > MAX_DT_FREQUENCY_PRODUCT:
            raise ValueError(
                f"dt = {self.dt} too large for model frequency scale "
                f"{model.frequency_scale:.4g} (dt*f = {prod:.3g} > "
                f"{MAX_DT_FREQUENCY_PRODUCT})"
            )


@dataclass(frozen=True)
class NoiseSpec:
    """Systematic (lam) and stochastic (eta) amplitude errors on the atom-1 laser.

    The perturbation operator is ``Omega_1(t) * G`` where ``G`` is the
    model's noise generator (the Hermitian drive operator carrying the error)
    and ``Omega_1(t)`` the instantaneous modulated amplitude; the white-noise
    term enters only through its averaged double commutator.
    """

    lam: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        if self.lam < 0 or self.eta < 0:
            raise ValueError("noise amplitudes must be >= 0")

    @property
    def active(self) -> bool:
        return self.lam > 0 or self.eta > 0


@dataclass
class Trajectory:
    """Recorded time series of a closed-loop run.

    ``populations``/``speeds`` map basis-state names to arrays; ``states``
    is kept only when requested (it can dominate memory for long runs), the
    final state always is.  When noise is active the ``*_noisy`` series hold
    the perturbed state's records and ``fidelity`` reports the noisy state.
    """

    times: np.ndarray
    populations: dict[str, np.ndarray]
    speeds: dict[str, np.ndarray]
    controls: np.ndarray            # (n, 2): xi1, xi2
    traces: np.ndarray
    final_state: DensityMatrix
    states: Optional[np.ndarray] = None
    populations_noisy: Optional[dict[str, np.ndarray]] = None
    final_state_noisy: Optional[DensityMatrix] = None
    states_noisy: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    @property
    def fidelity(self) -> np.ndarray:
        """sqrt of the target-state population (noisy state when present)."""
        pops = self.populations_noisy or self.populations
        return np.sqrt(np.clip(pops["S"], 0.0, 1.0))

    def population_matrix(self, order=("S", "T", "gg", "ff", "D"),
                          noisy: bool = False) -> np.ndarray:
        pops = self.populations_noisy if noisy else self.populations
        return np.column_stack([pops[name] for name in order])


# ---------------------------------------------------------------------------
# channel decomposition


def _subterms(ch: DissipatorChannel):
    """(weight, jump-left, jump-right) triples; zero-weight terms skipped."""
    L = ch.op.matrix
    Ld = L.conj().T
    if ch.kind == "standard":
        return [(1.0, L, Ld)]
    terms = [(ch.N + 1.0, L, Ld)]
    if ch.N != 0.0:
        terms.append((ch.N, Ld, L))
    if ch.M != 0:
        terms.append((-ch.M, L, L))
        terms.append((-np.conj(ch.M), Ld, Ld))
    return terms


def _extract_factor_op(mat: np.ndarray, dims: tuple[int, ...]
                       ) -> Optional[tuple[int, np.ndarray]]:
    """If ``mat`` = I (x) s (x) I on one factor, return (position, s)."""
    n = len(dims)
    if n == 1:
        return 0, mat
    t = mat.reshape(dims + dims)
    for p, dp in enumerate(dims):
        other = [i for i in range(n) if i != p]
        # candidate small op from a partial trace over the other factors
        idx = list(range(2 * n))
        for o in other:
            idx[n + o] = idx[o]
        s = np.einsum(t, idx, [p, n + p]) / np.prod([dims[o] for o in other])
        # verify exact embedded structure
        rebuilt = np.eye(1, dtype=np.complex128)
        for i in range(n):
            rebuilt = np.kron(rebuilt, s if i == p else np.eye(dims[i]))
        if np.allclose(rebuilt, mat, rtol=0.0, atol=1e-13):
            return p, s
    return None


def dissipator_apply(channel: DissipatorChannel, rho: DensityMatrix | np.ndarray
                     ) -> np.ndarray:
    """Action of a single channel on a state (returns the rho increment)."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else rho
    out = np.zeros_like(m)
    for w, a, b in _subterms(channel):
        ba = b @ a
        out += w * (a @ m @ b - 0.5 * (ba @ m + m @ ba))
    return out


# ---------------------------------------------------------------------------
# compiled right-hand side


class _Engine:
    """Raw-array view of a CompiledModel for the integration hot loop."""

    def __init__(self, model: CompiledModel):
        self.model = model
        dims = model.layout.dims
        d = model.layout.total_dim
        self.dim = d
        self.dims = dims
        self.h_static = model.h_static.matrix
        self.drives = [(dr.op.matrix, dr.op.matrix.conj().T, dr.coeff)
                       for dr in model.h_drives]
        self.controls = [(c.channel, c.op.matrix, c.op.matrix.conj().T, c.phase)
                         for c in model.h_controls]

        # jump terms: collapse single-factor triples into per-factor
        # superoperators S_p[B, E, x, y] = sum_k w_k sA_k[B, x] sB_k[y, E];
        # anything else stays on the generic BLAS path.
        factor_super: dict[int, np.ndarray] = {}
        dense_left, dense_right = [], []
        gsum = np.zeros((d, d), dtype=np.complex128)
        for ch in model.channels:
            for w, a, b in _subterms(ch):
                gsum += w * (b @ a)
                fa = _extract_factor_op(a, dims)
                fb = _extract_factor_op(b, dims)
                if fa is not None and fb is not None and fa[0] == fb[0]:
                    p, sa = fa
                    _, sb = fb
                    dp = dims[p]
                    s4 = factor_super.setdefault(
                        p, np.zeros((dp, dp, dp, dp), dtype=np.complex128))
                    s4 += w * np.einsum("Bx,yE->BExy", sa, sb)
                else:
                    dense_left.append(w * a)
                    dense_right.append(b)
        self.g_half = 0.5 * gsum

        self.n_factors = len(dims)
        self.factor_apply = [(p, s4) for p, s4 in factor_super.items()]

        self.n_dense = len(dense_left)
        if self.n_dense:
            self.dense_left = np.ascontiguousarray(
                np.array(dense_left).reshape(self.n_dense * d, d))
            self.dense_right = np.ascontiguousarray(
                np.array(dense_right).reshape(self.n_dense * d, d))
            self._xd = np.empty((self.n_dense * d, d), dtype=np.complex128)
            self._xdt = np.empty((d, self.n_dense, d), dtype=np.complex128)

        gen = model.noise_generator
        self.noise_gen = gen
        self.noise_gen_sq = None if gen is None else gen @ gen
        self.base_amp = model.spec.Omega0 / math.sqrt(2.0)
        self.xi1_weight = model.noise_xi1_weight

        # scratch buffers for the buffered RHS path
        self._h = np.empty((d, d), dtype=np.complex128)
        self._tmp = np.empty((d, d), dtype=np.complex128)
        self._tmp2 = np.empty((d, d), dtype=np.complex128)
        self._shape2n = dims + dims

    def hamiltonian(self, t: float, sig: ControlSignal) -> np.ndarray:
        """Assembled Hamiltonian (fresh array, not the internal buffer)."""
        self._build_h(t, sig)
        return self._h.copy()

    def _build_h(self, t: float, sig: ControlSignal) -> None:
        h, tmp = self._h, self._tmp
        np.copyto(h, self.h_static)
        for op, opd, coeff in self.drives:
            c = coeff(t)
            np.multiply(op, c, out=tmp)
            h += tmp
            np.multiply(opd, np.conj(c), out=tmp)
            h += tmp
        xi = (sig.xi1, sig.xi2)
        for channel, op, opd, phase in self.controls:
            x = xi[channel]
            if x == 0.0:
                continue
            c = x if phase is None else x * phase(t)
            np.multiply(op, c, out=tmp)
            h += tmp
            np.multiply(opd, np.conj(c), out=tmp)
            h += tmp

    def rhs(self, t: float, rho: np.ndarray, sig: ControlSignal,
            noise: Optional[NoiseSpec] = None,
            out: Optional[np.ndarray] = None) -> np.ndarray:
        if out is None:
            out = np.empty_like(rho)
        tmp, tmp2 = self._tmp, self._tmp2
        self._build_h(t, sig)
        h = self._h
        if noise is not None and noise.lam > 0.0:
            amp = self.base_amp + self.xi1_weight * sig.xi1
            np.multiply(self.noise_gen, noise.lam * amp, out=tmp)
            h += tmp
        # -i[H, rho] as -i(X - X^dag) with X = H rho
        np.matmul(h, rho, out=tmp)
        np.conjugate(tmp.T, out=tmp2)
        np.subtract(tmp, tmp2, out=out)
        out *= -1j
        # single-factor jump terms: contract the per-factor superoperator
        # over the factor's row/col axes and put the result axes back
        rho_t = rho.reshape(self._shape2n)
        out_t = out.reshape(self._shape2n)
        nf = self.n_factors
        for p, s4 in self.factor_apply:
            y = np.tensordot(s4, rho_t, axes=([2, 3], [p, nf + p]))
            out_t += np.moveaxis(y, (0, 1), (p, nf + p))
        # generic jump terms
        if self.n_dense:
            d, k = self.dim, self.n_dense
            np.matmul(self.dense_left, rho, out=self._xd)
            np.copyto(self._xdt, self._xd.reshape(k, d, d).transpose(1, 0, 2))
            np.matmul(self._xdt.reshape(d, k * d), self.dense_right, out=tmp)
            out += tmp
        # -(1/2){G, rho}
        np.matmul(self.g_half, rho, out=tmp)
        out -= tmp
        np.conjugate(tmp.T, out=tmp2)
        out -= tmp2
        if noise is not None and noise.eta > 0.0:
            amp = self.base_amp + self.xi1_weight * sig.xi1
            w = 0.5 * (noise.eta * amp) ** 2
            np.matmul(self.noise_gen_sq, rho, out=tmp)
            np.conjugate(tmp.T, out=tmp2)
            tmp += tmp2
            tmp *= w
            out -= tmp
            np.matmul(self.noise_gen, rho, out=tmp)
            np.matmul(tmp, self.noise_gen, out=tmp2)
            tmp2 *= 2.0 * w
            out += tmp2
        return out


def master_rhs(model: CompiledModel, t: float, rho: DensityMatrix | np.ndarray,
               signal: ControlSignal, noise: Optional[NoiseSpec] = None
               ) -> np.ndarray:
    """d(rho)/dt for a state with the control signals already evaluated."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else rho
    out = _Engine(model).rhs(t, np.array(m), signal,
                             noise if noise and noise.active else None)
    if not np.all(np.isfinite(out)):
        raise IntegratorAbortError(f"non-finite master-equation RHS at t = {t}")
    return out


def speeds(model: CompiledModel, law: ControlLaw, t: float,
           rho: DensityMatrix | np.ndarray) -> dict[str, float]:
    """Population speeds Tr(drho/dt |x><x|) for every named basis state."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else rho
    sig = evaluate_controls(law, m, t)
    k = master_rhs(model, t, m, sig)
    return {name: float(np.real(np.vdot(ket.amplitudes, k @ ket.amplitudes)))
            for name, ket in model.basis.items()}


# ---------------------------------------------------------------------------
# closed-loop integration


def integrate_closed_loop(model: CompiledModel, law: Optional[ControlLaw],
                          rho0: DensityMatrix, cfg: IntegratorConfig,
                          noise: Optional[NoiseSpec] = None) -> Trajectory:
    """Integrate the feedback loop from ``rho0`` over ``[0, t_end]``."""
    cfg.check_against(model)
    if law is None:
        law = law_for_model(model)
    if noise is not None and not noise.active:
        noise = None
    if noise is not None and model.noise_generator is None:
        raise ValueError(f"model tier {model.tier!r} has no noise generator")
    limits = (threadpool_limits(limits=1) if threadpool_limits is not None
              else nullcontext())
    with limits:
        return _integrate(model, law, rho0, cfg, noise)


def _integrate(model: CompiledModel, law: ControlLaw, rho0: DensityMatrix,
               cfg: IntegratorConfig, noise: Optional[NoiseSpec]) -> Trajectory:
    eng = _Engine(model)
    dt = cfg.dt
    half = 0.5 * dt
    n_steps = int(round(cfg.t_end / dt))
    names = list(model.basis.keys())
    bmat = np.array([model.basis[n].amplitudes for n in names])  # (nb, d)
    bconj = bmat.conj()

    rho = np.array(rho0.matrix, dtype=np.complex128)
    d = eng.dim
    k1, k2, k3, k4 = (np.empty((d, d), np.complex128) for _ in range(4))
    stage = np.empty((d, d), np.complex128)
    acc = np.empty((d, d), np.complex128)
    if noise is not None:
        rho_n = rho.copy()
        k1n, k2n, k3n, k4n = (np.empty((d, d), np.complex128) for _ in range(4))
        stage_n = np.empty((d, d), np.complex128)
    else:
        rho_n = None

    rec_times, rec_controls, rec_traces = [], [], []
    rec_pops, rec_speeds = [], []
    rec_pops_n = [] if noise is not None else None
    rec_states = [] if cfg.store_states else None
    rec_states_n = [] if (cfg.store_states and noise is not None) else None
    warnings = list(model.warnings)
    renorms = 0
    flagged_controls = 0

    def pops_of(m: np.ndarray) -> np.ndarray:
        return np.clip(np.real(np.einsum("nd,dc,nc->n", bconj, m, bmat)),
                       0.0, 1.0)

    def audit(m: np.ndarray, t: float, which: str) -> np.ndarray:
        nonlocal renorms
        tr = np.trace(m).real
        drift = abs(tr - 1.0)
        if drift > ABORT_TRACE_DRIFT:
            raise IntegratorAbortError(
                f"{which} state trace drifted by {drift:.3e} at t = {t:.6g}"
            )
        lo = float(np.linalg.eigvalsh(m).min())
        if lo < ABORT_MIN_EIGENVALUE:
            raise IntegratorAbortError(
                f"{which} state eigenvalue {lo:.3e} below "
                f"{ABORT_MIN_EIGENVALUE} at t = {t:.6g}"
            )
        if drift > RENORM_THRESHOLD:
            m = m / tr
            renorms += 1
        return m

    for i in range(n_steps + 1):
        t = i * dt
        s1 = evaluate_controls(law, rho, t)
        if s1.flagged:
            flagged_controls += 1
        eng.rhs(t, rho, s1, out=k1)
        if rho_n is not None:
            eng.rhs(t, rho_n, s1, noise, out=k1n)

        if i % cfg.record_stride == 0 or i == n_steps:
            rec_times.append(t)
            rec_controls.append((s1.xi1, s1.xi2))
            rec_traces.append(np.trace(rho).real)
            rec_pops.append(pops_of(rho))
            rec_speeds.append(np.real(np.einsum("nd,dc,nc->n", bconj, k1, bmat)))
            if rec_pops_n is not None:
                rec_pops_n.append(pops_of(rho_n))
            if rec_states is not None:
                rec_states.append(rho.copy())
            if rec_states_n is not None:
                rec_states_n.append(rho_n.copy())

        if i == n_steps:
            break

        np.multiply(k1, half, out=stage)
        stage += rho
        s2 = evaluate_controls(law, stage, t + half)
        eng.rhs(t + half, stage, s2, out=k2)
        np.multiply(k2, half, out=stage)
        stage += rho
        s3 = evaluate_controls(law, stage, t + half)
        eng.rhs(t + half, stage, s3, out=k3)
        np.multiply(k3, dt, out=stage)
        stage += rho
        s4 = evaluate_controls(law, stage, t + dt)
        eng.rhs(t + dt, stage, s4, out=k4)
        np.add(k2, k3, out=acc)
        acc *= 2.0
        acc += k1
        acc += k4
        acc *= dt / 6.0
        rho += acc

        if rho_n is not None:
            np.multiply(k1n, half, out=stage_n)
            stage_n += rho_n
            eng.rhs(t + half, stage_n, s2, noise, out=k2n)
            np.multiply(k2n, half, out=stage_n)
            stage_n += rho_n
            eng.rhs(t + half, stage_n, s3, noise, out=k3n)
            np.multiply(k3n, dt, out=stage_n)
            stage_n += rho_n
            eng.rhs(t + dt, stage_n, s4, noise, out=k4n)
            np.add(k2n, k3n, out=acc)
            acc *= 2.0
            acc += k1n
            acc += k4n
            acc *= dt / 6.0
            rho_n += acc

        if (i + 1) % cfg.audit_stride == 0:
            rho = audit(rho, t + dt, "nominal")
            if rho_n is not None:
                rho_n = audit(rho_n, t + dt, "noisy")

    rho = audit(rho, n_steps * dt, "nominal")
    if rho_n is not None:
        rho_n = audit(rho_n, n_steps * dt, "noisy")
    if not np.all(np.isfinite(rho)):
        raise IntegratorAbortError("non-finite state at end of integration")

    if renorms:
        warnings.append(f"state renormalized {renorms} time(s) "
                        f"(trace drift > {RENORM_THRESHOLD:.0e})")
    if flagged_controls:
        warnings.append(
            f"control trace imaginary residue exceeded tolerance at "
            f"{flagged_controls} step(s)"
        )

    pops_arr = np.array(rec_pops)
    speeds_arr = np.array(rec_speeds)
    pops_n_arr = None if rec_pops_n is None else np.array(rec_pops_n)
    return Trajectory(
        times=np.array(rec_times),
        populations={n: pops_arr[:, j] for j, n in enumerate(names)},
        speeds={n: speeds_arr[:, j] for j, n in enumerate(names)},
        controls=np.array(rec_controls),
        traces=np.array(rec_traces),
        final_state=DensityMatrix(model.layout, rho),
        states=None if rec_states is None else np.array(rec_states),
        populations_noisy=(None if pops_n_arr is None else
                           {n: pops_n_arr[:, j] for j, n in enumerate(names)}),
        final_state_noisy=(None if rho_n is None
                           else DensityMatrix(model.layout, rho_n)),
        states_noisy=None if rec_states_n is None else np.array(rec_states_n),
        metadata={
            "tier": model.tier,
            "dt": dt,
            "g_sc": model.spec.g_sc,
            "r_p": model.spec.r_p,
            "warnings": warnings,
            "renormalizations": renorms,
        },
    )
