"""Basis labels and density-matrix value types for the quantum dot molecule."""

from __future__ import annotations

from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-8
POSITIVITY_TOL = 1e-9


class StateError(ValueError):
    """Raised when a density matrix or operator violates its invariants."""


class Level(IntEnum):
    """The eight QDM basis states: four spin ground states and four excited states."""

    S = 0
    T0 = 1
    TP = 2
    TM = 3
    XM = 4
    XP = 5
    X1 = 6
    X2 = 7

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "Level":
        for level, name in _LABELS.items():
            if name == label or level.name == label:
                return level
        raise KeyError(f"unknown level label {label!r}")


_LABELS = {
    Level.S: "S",
    Level.T0: "T0",
    Level.TP: "T+",
    Level.TM: "T-",
    Level.XM: "X-",
    Level.XP: "X+",
    Level.X1: "X1",
    Level.X2: "X2",
}

DIM = len(Level)
GROUND_LEVELS = (Level.S, Level.T0, Level.TP, Level.TM)
TRIPLET_LEVELS = (Level.T0, Level.TP, Level.TM)


def projector(level: int, dim: int = DIM) -> np.ndarray:
    """|level><level| as a dense complex array."""
    if not 0 <= int(level) < dim:
        raise StateError(f"level index {int(level)} out of range for dimension {dim}")
    op = np.zeros((dim, dim), dtype=complex)
    op[level, level] = 1.0
    return op


def ket_bra(upper: int, lower: int, dim: int = DIM) -> np.ndarray:
    """|upper><lower|."""
    op = np.zeros((dim, dim), dtype=complex)
    op[upper, lower] = 1.0
    return op


def check_square(op: np.ndarray, dim: int | None = None) -> np.ndarray:
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise StateError(f"operator must be square, got shape {op.shape}")
    if dim is not None and op.shape[0] != dim:
        raise StateError(f"dimension mismatch: operator is {op.shape[0]}, expected {dim}")
    return op


class DensityMatrix:
    """Immutable Hermitian, unit-trace, positive semidefinite state.

    Invariants are checked at construction with the module-level tolerances;
    the stored array is read-only.
    """

    __slots__ = ("_data",)

    def __init__(self, data: np.ndarray, *, check: bool = True):
        arr = np.array(check_square(data), dtype=complex, copy=True)
        arr.setflags(write=False)
        self._data = arr
        if check:
            self.validate()

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def dim(self) -> int:
        return self._data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self._data if dtype is None else self._data.astype(dtype)

    def __getitem__(self, idx):
        return self._data[idx]

    def __eq__(self, other) -> bool:
        if not isinstance(other, DensityMatrix):
            return NotImplemented
        return self._data.shape == other._data.shape and bool(np.all(self._data == other._data))

    __hash__ = None

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim}, populations={np.round(self.populations(), 6).tolist()})"

    def populations(self) -> np.ndarray:
        return self._data.diagonal().real.copy()

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self._data - self._data.conj().T)))

    def trace_error(self) -> float:
        return float(abs(np.trace(self._data) - 1.0))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self._data + self._data.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def validate(self) -> None:
        herm = self.hermiticity_error()
        if herm >= HERMITIAN_TOL:
            raise StateError(f"state not Hermitian: max |rho - rho^dag| = {herm:.3e}")
        tr = self.trace_error()
        if tr >= TRACE_TOL:
            raise StateError(f"state trace deviates from 1 by {tr:.3e}")
        lam = self.min_eigenvalue()
        if lam <= -POSITIVITY_TOL:
            raise StateError(f"state not positive: minimum eigenvalue {lam:.3e}")


def pure_state(level: int, dim: int = DIM) -> DensityMatrix:
    """Projector onto a single basis state."""
    return DensityMatrix(projector(level, dim))


def expectation(op: np.ndarray, state: DensityMatrix | np.ndarray) -> complex:
    """Tr(op @ rho)."""
    rho = np.asarray(state)
    op = check_square(op, rho.shape[0])
    return complex(np.einsum("ij,ji->", op, rho))


def mixed(states: Iterable[tuple[float, DensityMatrix]]) -> DensityMatrix:
    """Convex combination of density matrices."""
    pairs: Sequence[tuple[float, DensityMatrix]] = list(states)
    if not pairs:
        raise StateError("mixed() needs at least one component")
    weights = np.array([w for w, _ in pairs], dtype=float)
    if np.any(weights < 0):
        raise StateError("mixture weights must be non-negative")
    if abs(weights.sum() - 1.0) > 1e-12:
        raise StateError(f"mixture weights sum to {weights.sum():.12g}, not 1")
    dims = {rho.dim for _, rho in pairs}
    if len(dims) != 1:
        raise StateError(f"dimension mismatch in mixture: {sorted(dims)}")
    total = sum(w * rho.data for w, rho in pairs)
    return DensityMatrix(total)
