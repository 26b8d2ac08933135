"""Dense complex linear algebra on small composite Hilbert spaces.

Values are plain numpy arrays tagged with a :class:`HilbertLayout` that fixes
the tensor factorization (Kronecker order is the factor order, leftmost factor
most significant).  Everything is immutable after construction: arrays are
frozen with ``setflags(write=False)`` and may be shared freely between
workers.

Dimensions in this package stay small (a few hundred at most), so all storage
is dense and all algebra goes through BLAS via ``@``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import LayoutError, LayoutMismatchError

__all__ = [
    "HilbertLayout",
    "Operator",
    "Ket",
    "DensityMatrix",
    "annihilation",
    "number_operator",
    "embed",
    "identity",
    "basis_ket",
    "dagger",
    "commutator",
    "trace",
    "expectation",
    "outer",
    "partial_populations",
    "partial_trace",
    "is_hermitian",
]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HilbertLayout:
    """Ordered tensor factorization of a composite space.

    ``factors`` is a tuple of ``(label, dimension)`` pairs; labels are unique.
    """

    factors: tuple[tuple[str, int], ...]

    def __init__(self, factors: Iterable[tuple[str, int]]):
        facs = tuple((str(lbl), int(dim)) for lbl, dim in factors)
        if not facs:
            raise LayoutError("layout needs at least one factor")
        labels = [lbl for lbl, _ in facs]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate factor labels in {labels}")
        for lbl, dim in facs:
            if dim < 1:
                raise LayoutError(f"factor {lbl!r} has dimension {dim} < 1")
        object.__setattr__(self, "factors", facs)

    @property
    def total_dim(self) -> int:
        n = 1
        for _, d in self.factors:
            n *= d
        return n

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lbl for lbl, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.factors)

    def dim_of(self, label: str) -> int:
        for lbl, d in self.factors:
            if lbl == label:
                return d
        raise LayoutError(f"unknown factor label {label!r}; have {self.labels}")

    def index_of(self, label: str) -> int:
        for i, (lbl, _) in enumerate(self.factors):
            if lbl == label:
                return i
        raise LayoutError(f"unknown factor label {label!r}; have {self.labels}")


def _check_same_layout(a, b) -> None:
    if a.layout != b.layout:
        raise LayoutMismatchError(
            f"layout mismatch: {a.layout.factors} vs {b.layout.factors}"
        )


@dataclass(frozen=True)
class Operator:
    """A square complex matrix on a layout."""

    layout: HilbertLayout
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        n = self.layout.total_dim
        if m.shape != (n, n):
            raise LayoutError(f"operator shape {m.shape} != ({n}, {n})")
        object.__setattr__(self, "matrix", _frozen(m))

    def __add__(self, other: "Operator") -> "Operator":
        _check_same_layout(self, other)
        return Operator(self.layout, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        _check_same_layout(self, other)
        return Operator(self.layout, self.matrix - other.matrix)

    def __mul__(self, c: complex) -> "Operator":
        return Operator(self.layout, c * self.matrix)

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return Operator(self.layout, -self.matrix)

    def __matmul__(self, other: "Operator") -> "Operator":
        _check_same_layout(self, other)
        return Operator(self.layout, self.matrix @ other.matrix)


@dataclass(frozen=True)
class Ket:
    """A state vector on a layout; factory-built kets are unit-normalized."""

    layout: HilbertLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if v.shape != (self.layout.total_dim,):
            raise LayoutError(
                f"ket length {v.shape[0]} != layout dim {self.layout.total_dim}"
            )
        object.__setattr__(self, "amplitudes", _frozen(v))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "Ket":
        return Ket(self.layout, self.amplitudes / self.norm)


@dataclass(frozen=True)
class DensityMatrix:
    """A density matrix on a layout.

    Hermiticity/trace/positivity are audit predicates (see :meth:`validate`),
    not construction-time requirements: mid-integration states drift at
    floating-point scale and are audited periodically.
    """

    layout: HilbertLayout
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        n = self.layout.total_dim
        if m.shape != (n, n):
            raise LayoutError(f"density matrix shape {m.shape} != ({n}, {n})")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def from_ket(cls, ket: Ket) -> "DensityMatrix":
        v = ket.amplitudes
        return cls(ket.layout, np.outer(v, v.conj()))

    def validate(self, herm_tol: float = 1e-10, trace_tol: float = 1e-8,
                 eig_floor: float = -1e-8) -> None:
        m = self.matrix
        herm = np.abs(m - m.conj().T).max()
        if herm > herm_tol:
            raise ValueError(f"not Hermitian: max|rho - rho^dag| = {herm:.3e}")
        tr = np.trace(m)
        if abs(tr - 1.0) > trace_tol:
            raise ValueError(f"trace {tr:.12f} deviates from 1 by {abs(tr-1):.3e}")
        lo = float(np.linalg.eigvalsh(m).min())
        if lo < eig_floor:
            raise ValueError(f"minimum eigenvalue {lo:.3e} below {eig_floor:.1e}")


def annihilation(cutoff: int, label: str = "mode") -> Operator:
    """Truncated bosonic annihilation operator on Fock states |0..cutoff>.

    ``a[n-1, n] = sqrt(n)``; requires ``cutoff >= 1`` (cutoff 0 would collapse
    the mode to a scalar).
    """
    if cutoff < 1:
        raise LayoutError("fock cutoff must be >= 1")
    dim = cutoff + 1
    m = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1)
    return Operator(HilbertLayout([(label, dim)]), m)


def number_operator(cutoff: int, label: str = "mode") -> Operator:
    a = annihilation(cutoff, label)
    return Operator(a.layout, a.matrix.conj().T @ a.matrix)


def identity(layout: HilbertLayout) -> Operator:
    return Operator(layout, np.eye(layout.total_dim))


def embed(op: Operator, layout: HilbertLayout, factor_label: str) -> Operator:
    """Lift a single-factor operator into the composite space.

    Produces ``I (x) ... (x) op (x) ... (x) I`` with the Kronecker order set
    by ``layout``.
    """
    pos = layout.index_of(factor_label)
    dim = layout.dim_of(factor_label)
    if op.layout.total_dim != dim:
        raise LayoutMismatchError(
            f"operator dim {op.layout.total_dim} != factor {factor_label!r} dim {dim}"
        )
    left = 1
    for _, d in layout.factors[:pos]:
        left *= d
    right = 1
    for _, d in layout.factors[pos + 1:]:
        right *= d
    m = np.kron(np.kron(np.eye(left), op.matrix), np.eye(right))
    return Operator(layout, m)


def basis_ket(layout: HilbertLayout, indices: Sequence[int]) -> Ket:
    """Product basis ket |i_0, i_1, ...> in the layout's factor order."""
    if len(indices) != len(layout.factors):
        raise LayoutError(
            f"need {len(layout.factors)} indices, got {len(indices)}"
        )
    v = np.ones(1, dtype=np.complex128)
    for (lbl, d), i in zip(layout.factors, indices):
        if not 0 <= i < d:
            raise LayoutError(f"index {i} out of range for factor {lbl!r} (dim {d})")
        e = np.zeros(d, dtype=np.complex128)
        e[i] = 1.0
        v = np.kron(v, e)
    return Ket(layout, v)


def dagger(op: Operator) -> Operator:
    return Operator(op.layout, op.matrix.conj().T)


def commutator(a: Operator, b: Operator) -> Operator:
    _check_same_layout(a, b)
    return Operator(a.layout, a.matrix @ b.matrix - b.matrix @ a.matrix)


def trace(op: Operator) -> complex:
    return complex(np.trace(op.matrix))


def expectation(rho: DensityMatrix, op: Operator) -> complex:
    """Tr(rho A)."""
    _check_same_layout(rho, op)
    return complex(np.einsum("ij,ji->", rho.matrix, op.matrix))


def outer(k1: Ket, k2: Ket) -> Operator:
    """|k1><k2|."""
    _check_same_layout(k1, k2)
    return Operator(k1.layout, np.outer(k1.amplitudes, k2.amplitudes.conj()))


def is_hermitian(op: Operator, tol: float = 1e-12) -> bool:
    m = op.matrix
    return bool(np.abs(m - m.conj().T).max() <= tol)


def partial_populations(rho: DensityMatrix, basis: Sequence[Ket]) -> np.ndarray:
    """Populations <x|rho|x> for each basis ket, clamped to [0, 1]."""
    for k in basis:
        _check_same_layout(rho, k)
    out = np.empty(len(basis))
    for i, k in enumerate(basis):
        v = k.amplitudes
        p = np.real(np.vdot(v, rho.matrix @ v))
        out[i] = min(max(p, 0.0), 1.0)
    return out


def partial_trace(rho: DensityMatrix, keep: Sequence[str]) -> DensityMatrix:
    """Trace out every factor not named in ``keep`` (order preserved)."""
    layout = rho.layout
    keep_idx = sorted(layout.index_of(lbl) for lbl in keep)
    dims = layout.dims
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    # contract traced factors pairwise, highest axis first
    traced = [i for i in range(n) if i not in keep_idx]
    for count, ax in enumerate(sorted(traced, reverse=True)):
        m = t.ndim // 2
        t = np.trace(t, axis1=ax, axis2=ax + m)
        # np.trace moves the remaining axes up; row/col split stays balanced
    new_factors = [layout.factors[i] for i in keep_idx]
    new_layout = HilbertLayout(new_factors)
    d = new_layout.total_dim
    return DensityMatrix(new_layout, t.reshape(d, d))
