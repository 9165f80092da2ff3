"""Lindblad master-equation generator, adaptive integration and expm propagation.

Units: time in ns, Hamiltonian and rates in rad/ns (hbar = 1).
Row-major vectorization is used throughout, so ``vec(A @ rho @ B)`` equals
``kron(A, B.T) @ vec(rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .integrator import StepSizeUnderflow, StepStats, dopri5
from .states import (
    HERMITIAN_TOL,
    POSITIVITY_TOL,
    TRACE_TOL,
    DensityMatrix,
    StateError,
    check_square,
)


class IntegrationError(RuntimeError):
    """Integration failed: step-size underflow or an invariant broke mid-run."""


@dataclass(frozen=True, eq=False)
class JumpChannel:
    """One incoherent process ``rate * D[operator]``.

    ``collected`` marks channels whose emitted photons reach the detector.
    """

    operator: np.ndarray
    rate: float
    collected: bool = False
    name: str = ""

    def __post_init__(self):
        op = np.array(check_square(self.operator), dtype=complex)
        op.setflags(write=False)
        object.__setattr__(self, "operator", op)
        if not self.rate >= 0:
            raise ValueError(f"channel {self.name!r}: rate must be >= 0, got {self.rate}")

    @property
    def dim(self) -> int:
        return self.operator.shape[0]


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = 50.0
    initial_step: float = 1e-3

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "initial_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"IntegratorConfig.{name} must be > 0")
        if self.initial_step > self.max_step:
            raise ValueError("IntegratorConfig.initial_step must not exceed max_step")


@dataclass(frozen=True)
class StateValidity:
    """Worst-case invariant figures over a set of sampled states."""

    max_trace_error: float = 0.0
    max_hermiticity_error: float = 0.0
    min_eigenvalue: float = float("inf")
    samples: int = 0

    @classmethod
    def of(cls, states: Sequence[DensityMatrix]) -> "StateValidity":
        if not states:
            return cls()
        return cls(
            max(rho.trace_error() for rho in states),
            max(rho.hermiticity_error() for rho in states),
            min(rho.min_eigenvalue() for rho in states),
            len(states),
        )

    def merge(self, other: "StateValidity") -> "StateValidity":
        return StateValidity(
            max(self.max_trace_error, other.max_trace_error),
            max(self.max_hermiticity_error, other.max_hermiticity_error),
            min(self.min_eigenvalue, other.min_eigenvalue),
            self.samples + other.samples,
        )

    @property
    def ok(self) -> bool:
        return (
            self.max_trace_error < TRACE_TOL
            and self.max_hermiticity_error < HERMITIAN_TOL
            and self.min_eigenvalue > -POSITIVITY_TOL
        )

    def as_dict(self) -> dict:
        return {
            "max_trace_error": self.max_trace_error,
            "max_hermiticity_error": self.max_hermiticity_error,
            "min_eigenvalue": self.min_eigenvalue,
            "samples": self.samples,
        }


@dataclass
class Trajectory:
    """Sampled solution of one integration.

    ``emitted[k, c]`` is the expected number of quanta emitted through
    channel ``c`` up to ``times[k]``.
    """

    times: np.ndarray
    states: list[DensityMatrix]
    emitted: np.ndarray
    channel_names: list[str]
    collected: np.ndarray
    stats: StepStats = field(default_factory=StepStats)

    @property
    def final_state(self) -> DensityMatrix:
        return self.states[-1]

    def collected_emission(self) -> np.ndarray:
        """Cumulative expected photons summed over collected channels."""
        return self.emitted[:, self.collected].sum(axis=1)

    def total_emission(self) -> np.ndarray:
        return self.emitted.sum(axis=1)

    def validity(self) -> StateValidity:
        return StateValidity.of(self.states)

    def population(self, level: int) -> np.ndarray:
        return np.array([rho.data[level, level].real for rho in self.states])


def _check_inputs(H: np.ndarray, channels: Sequence[JumpChannel], dim: int | None = None) -> np.ndarray:
    H = np.asarray(check_square(H, dim), dtype=complex)
    herm = np.max(np.abs(H - H.conj().T)) if H.size else 0.0
    if herm > HERMITIAN_TOL:
        raise StateError(f"Hamiltonian not Hermitian (max |H - H^dag| = {herm:.3e})")
    for ch in channels:
        if ch.dim != H.shape[0]:
            raise StateError(f"channel {ch.name!r} has dimension {ch.dim}, system has {H.shape[0]}")
    return H


class _Generator:
    """Precomputed pieces of the Lindblad right-hand side.

    The coherent part and the anticommutator are folded into the
    non-Hermitian ``H_eff = H - (i/2) sum_k rate_k L_k^dag L_k``.
    """

    def __init__(self, H: np.ndarray, channels: Sequence[JumpChannel]):
        dim = H.shape[0]
        self.dim = dim
        self.n_channels = len(channels)
        ops = np.array([ch.operator for ch in channels], dtype=complex).reshape(-1, dim, dim)
        rates = np.array([ch.rate for ch in channels], dtype=float)
        LdL = np.conj(np.transpose(ops, (0, 2, 1))) @ ops
        self.emission_ops = rates[:, None, None] * LdL
        active = rates > 0
        scaled = np.sqrt(rates[active])[:, None, None] * ops[active]
        self.jump = scaled
        self.jump_dag = np.conj(np.transpose(scaled, (0, 2, 1)))
        self.h_eff = H - 0.5j * self.emission_ops.sum(axis=0)
        self.h_eff_dag = self.h_eff.conj().T

    def rho_dot(self, rho: np.ndarray) -> np.ndarray:
        out = -1j * (self.h_eff @ rho - rho @ self.h_eff_dag)
        if len(self.jump):
            out += (self.jump @ rho @ self.jump_dag).sum(axis=0)
        return out

    def emission_rates(self, rho: np.ndarray) -> np.ndarray:
        # rate_c * Tr(L_c^dag L_c rho)
        return np.einsum("cij,ji->c", self.emission_ops, rho)

    def augmented(self, y: np.ndarray) -> np.ndarray:
        n = self.dim * self.dim
        rho = y[:n].reshape(self.dim, self.dim)
        out = np.empty_like(y)
        out[:n] = self.rho_dot(rho).ravel()
        out[n:] = self.emission_rates(rho)
        return out


def liouvillian_apply(H: np.ndarray, channels: Sequence[JumpChannel], state: DensityMatrix | np.ndarray) -> np.ndarray:
    """Right-hand side of the Lindblad equation evaluated at ``state``."""
    rho = np.asarray(state, dtype=complex)
    H = _check_inputs(H, channels, rho.shape[0])
    return _Generator(H, channels).rho_dot(rho)


def build_liouvillian_matrix(H: np.ndarray, channels: Sequence[JumpChannel]) -> np.ndarray:
    """Superoperator ``M`` with ``vec(drho/dt) = M @ vec(rho)`` (row-major vec)."""
    H = _check_inputs(H, channels)
    dim = H.shape[0]
    eye = np.eye(dim)
    M = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for ch in channels:
        L = ch.operator
        LdL = L.conj().T @ L
        M += ch.rate * (np.kron(L, L.conj()) - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T))
    return M


def propagate_expm(rho0: DensityMatrix, H: np.ndarray, channels: Sequence[JumpChannel], t: float) -> DensityMatrix:
    """Propagate by the matrix exponential of the vectorized generator."""
    if t < 0:
        raise ValueError("propagation time must be >= 0")
    M = build_liouvillian_matrix(H, channels)
    if M.shape[0] != rho0.dim ** 2:
        raise StateError("state dimension does not match generator")
    if t == 0:
        return DensityMatrix(rho0.data)
    vec = expm(M * t) @ rho0.data.ravel()
    return DensityMatrix(vec.reshape(rho0.dim, rho0.dim))


def integrate(
    rho0: DensityMatrix,
    H: np.ndarray,
    channels: Sequence[JumpChannel],
    t_end: float,
    cfg: IntegratorConfig | None = None,
    sample_times: Sequence[float] | np.ndarray | None = None,
) -> Trajectory:
    """Adaptive Dormand-Prince integration of the master equation.

    Cumulative emission per channel is carried as extra components of the
    state vector, so it is integrated on the same step sequence and with
    the same error control as ``rho``. Every sampled state is validated;
    the trace is never renormalized.

    ``sample_times`` defaults to ``[0, t_end]``; time 0 is always included.
    """
    cfg = cfg or IntegratorConfig()
    if not t_end > 0:
        raise ValueError(f"t_end must be > 0, got {t_end}")
    H = _check_inputs(H, channels, rho0.dim)
    if sample_times is None:
        times = np.array([0.0, float(t_end)])
    else:
        times = np.asarray(sample_times, dtype=float)
        if times.ndim != 1 or np.any(np.diff(times) <= 0):
            raise ValueError("sample_times must be strictly increasing")
        if times.size and (times[0] < 0 or times[-1] > t_end):
            raise ValueError("sample_times must lie in [0, t_end]")
        if times.size == 0 or times[0] > 0:
            times = np.concatenate([[0.0], times])

    gen = _Generator(H, channels)
    dim = rho0.dim
    n = dim * dim
    y0 = np.concatenate([rho0.data.ravel(), np.zeros(len(channels), dtype=complex)])
    states: list[DensityMatrix] = []

    def check(t: float, y: np.ndarray) -> None:
        try:
            states.append(DensityMatrix(y[:n].reshape(dim, dim)))
        except StateError as exc:
            raise IntegrationError(f"invariant violated at t={t:.6g} ns: {exc}") from exc

    try:
        samples, stats = dopri5(
            gen.augmented,
            y0,
            float(t_end),
            times,
            rtol=cfg.rel_tol,
            atol=cfg.abs_tol,
            max_step=cfg.max_step,
            first_step=cfg.initial_step,
            on_sample=check,
        )
    except StepSizeUnderflow as exc:
        raise IntegrationError(str(exc)) from exc

    return Trajectory(
        times=times,
        states=states,
        emitted=samples[:, n:].real.copy(),
        channel_names=[ch.name for ch in channels],
        collected=np.array([ch.collected for ch in channels], dtype=bool),
        stats=stats,
    )


__all__ = [
    "HERMITIAN_TOL",
    "POSITIVITY_TOL",
    "TRACE_TOL",
    "IntegrationError",
    "IntegratorConfig",
    "JumpChannel",
    "StateValidity",
    "Trajectory",
    "build_liouvillian_matrix",
    "integrate",
    "liouvillian_apply",
    "propagate_expm",
]
