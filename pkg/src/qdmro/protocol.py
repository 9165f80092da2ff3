"""Two-stage readout: microwave transfer into T+/T-, then optical cycling.

Readout curves come from one integration per initial state, sampled at every
requested readout duration; the photon budget at duration ``T`` is the
cumulative collected emission at ``T`` plus the attenuated laser reflection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import h as PLANCK

from .lindblad import IntegratorConfig, StateValidity, Trajectory, integrate
from .model import RateSet, build_channels, build_hamiltonian, microwave_drives, readout_drives
from .states import DensityMatrix, Level, mixed, pure_state

INITIAL_STATES = ("S", "T0")


class OverdampedError(RuntimeError):
    """No local maximum of the transfer probability inside the search window."""


@dataclass(frozen=True)
class ProtocolParams:
    rates: RateSet = field(default_factory=RateSet)
    t_readout: float = 1000.0  # ns
    initial: str = "T0"
    laser_power: float = 1e-6  # W
    attenuation: float = 1e-6
    wavelength: float = 950e-9  # m
    background_multiplier: float = 1.0

    def __post_init__(self):
        if not self.t_readout > 0:
            raise ValueError(f"t_readout must be > 0, got {self.t_readout}")
        if self.initial not in INITIAL_STATES:
            raise ValueError(f"initial must be one of {INITIAL_STATES}, got {self.initial!r}")
        if not self.laser_power >= 0:
            raise ValueError("laser_power must be >= 0")
        if not 0 < self.attenuation <= 1:
            raise ValueError("attenuation must lie in (0, 1]")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be > 0")
        if not self.background_multiplier >= 0:
            raise ValueError("background_multiplier must be >= 0")


@dataclass(frozen=True)
class PhotonBudget:
    n_emitted_T: float
    n_emitted_S: float
    n_background: float
    efficiency: float
    lambda_T: float
    lambda_S: float

    @classmethod
    def from_counts(cls, n_T: float, n_S: float, n_B: float, efficiency: float) -> "PhotonBudget":
        if not 0 < efficiency <= 1:
            raise ValueError(f"collection efficiency must lie in (0, 1], got {efficiency}")
        # emitted counts can come out at -1e-18 from quadrature noise
        n_T, n_S = max(n_T, 0.0), max(n_S, 0.0)
        return cls(n_T, n_S, n_B, efficiency, efficiency * (n_T + n_B), efficiency * (n_S + n_B))


@dataclass
class PiPulseResult:
    transfer_probability: float
    t_first_max: float
    times: np.ndarray
    probability: np.ndarray
    trajectory: Trajectory | None = None


def photon_energy(wavelength: float) -> float:
    return PLANCK * SPEED_OF_LIGHT / wavelength


def background_photons(params: ProtocolParams, t_readout=None):
    """Reflected laser photons reaching the collection optics over the readout window.

    ``t_readout`` (ns, scalar or array) overrides ``params.t_readout``.
    """
    t = params.t_readout if t_readout is None else np.asarray(t_readout, dtype=float)
    rate = params.laser_power * params.attenuation * params.background_multiplier / photon_energy(params.wavelength)
    return rate * t * 1e-9


def readout_initial_state(initial: str) -> DensityMatrix:
    """State at the start of the optical stage, assuming an ideal pi-pulse.

    T0 has been moved into an equal T+/T- mixture; S is untouched.
    """
    if initial == "T0":
        return mixed([(0.5, pure_state(Level.TP)), (0.5, pure_state(Level.TM))])
    if initial == "S":
        return pure_state(Level.S)
    raise ValueError(f"initial must be one of {INITIAL_STATES}, got {initial!r}")


def readout_trajectory(
    rates: RateSet,
    initial: str,
    t_grid: Sequence[float],
    cfg: IntegratorConfig | None = None,
    rho0: DensityMatrix | None = None,
) -> Trajectory:
    """Integrate the optical stage to ``max(t_grid)`` sampling every grid point."""
    t_grid = np.asarray(t_grid, dtype=float)
    H = build_hamiltonian(readout_drives(rates))
    rho0 = rho0 if rho0 is not None else readout_initial_state(initial)
    return integrate(rho0, H, build_channels(rates), float(t_grid[-1]), cfg, t_grid)


@dataclass
class ReadoutCurves:
    """Photon numbers versus readout duration for both initial states."""

    t_readout: np.ndarray
    n_emitted_T: np.ndarray
    n_emitted_S: np.ndarray
    n_background: np.ndarray
    trajectories: dict[str, Trajectory] = field(default_factory=dict, repr=False)
    validity: StateValidity = field(default_factory=StateValidity, repr=False)

    def lambdas(self, efficiency) -> tuple[np.ndarray, np.ndarray]:
        """Detected means; broadcasts over an array of efficiencies as the leading axis."""
        eta = np.asarray(efficiency, dtype=float)[..., None]
        return eta * (self.n_emitted_T + self.n_background), eta * (self.n_emitted_S + self.n_background)

    def budget(self, index: int, efficiency: float) -> PhotonBudget:
        return PhotonBudget.from_counts(
            float(self.n_emitted_T[index]), float(self.n_emitted_S[index]), float(self.n_background[index]), efficiency
        )


def _collected_counts(traj: Trajectory, t_grid: np.ndarray) -> np.ndarray:
    # Trajectory prepends t=0 when the grid does not start there
    counts = traj.collected_emission()
    return np.maximum(counts[len(traj.times) - len(t_grid):], 0.0)


def _check_durations(t_grid) -> np.ndarray:
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or np.any(t_grid <= 0) or np.any(np.diff(t_grid) <= 0):
        raise ValueError("readout durations must be positive and strictly increasing")
    return t_grid


def branch_emission(
    rates: RateSet, initial: str, t_grid: Sequence[float], cfg: IntegratorConfig | None = None
) -> tuple[np.ndarray, StateValidity]:
    """Collected photons versus duration for one initial state, plus state-validity figures.

    Returns plain arrays so it can run in a worker process.
    """
    t_grid = _check_durations(t_grid)
    traj = readout_trajectory(rates, initial, t_grid, cfg)
    return _collected_counts(traj, t_grid), traj.validity()


def curves_from_branches(
    params: ProtocolParams,
    t_grid: Sequence[float],
    branch_T: tuple[np.ndarray, StateValidity],
    branch_S: tuple[np.ndarray, StateValidity],
) -> ReadoutCurves:
    t_grid = _check_durations(t_grid)
    return ReadoutCurves(
        t_readout=t_grid,
        n_emitted_T=branch_T[0],
        n_emitted_S=branch_S[0],
        n_background=np.asarray(background_photons(params, t_grid), dtype=float),
        validity=branch_T[1].merge(branch_S[1]),
    )


def readout_curves(
    params: ProtocolParams,
    t_grid: Sequence[float],
    cfg: IntegratorConfig | None = None,
    keep_trajectories: bool = False,
) -> ReadoutCurves:
    t_grid = _check_durations(t_grid)
    trajs = {init: readout_trajectory(params.rates, init, t_grid, cfg) for init in ("T0", "S")}
    curves = curves_from_branches(
        params,
        t_grid,
        (_collected_counts(trajs["T0"], t_grid), trajs["T0"].validity()),
        (_collected_counts(trajs["S"], t_grid), trajs["S"].validity()),
    )
    if keep_trajectories:
        curves.trajectories = trajs
    return curves


def simulate_readout_stage(
    params: ProtocolParams, efficiency: float, cfg: IntegratorConfig | None = None
) -> PhotonBudget:
    """Photon budget for a single readout duration ``params.t_readout``."""
    if not 0 < efficiency <= 1:
        raise ValueError(f"collection efficiency must lie in (0, 1], got {efficiency}")
    curves = readout_curves(params, [params.t_readout], cfg)
    return curves.budget(0, efficiency)


def _first_local_max(t: np.ndarray, p: np.ndarray) -> tuple[float, float]:
    rising = p[1:-1] > p[:-2]
    peak = rising & (p[1:-1] >= p[2:])
    hits = np.flatnonzero(peak)
    if hits.size == 0:
        raise OverdampedError("transfer probability has no local maximum in the search window")
    i = int(hits[0]) + 1
    y0, y1, y2 = p[i - 1], p[i], p[i + 1]
    curv = y0 - 2 * y1 + y2
    if curv >= 0:
        return float(t[i]), float(y1)
    offset = 0.5 * (y0 - y2) / curv
    dt = t[i + 1] - t[i]
    return float(t[i] + offset * dt), float(y1 - 0.25 * (y0 - y2) * offset)


def simulate_pi_pulse(
    rates: RateSet,
    cfg: IntegratorConfig | None = None,
    n_samples: int = 4001,
    window_periods: float = 10.0,
) -> PiPulseResult:
    """Microwave stage from |T0>: P(t) = rho[T+,T+] + rho[T-,T-] and its first maximum.

    The search window is ``window_periods * pi / omega_MW``; sampling is
    uniform with a parabolic refinement of the discrete peak.
    """
    if not rates.omega_MW > 0:
        raise ValueError("omega_MW must be > 0")
    t_end = window_periods * np.pi / rates.omega_MW
    times = np.linspace(0.0, t_end, n_samples)
    cfg = cfg or IntegratorConfig()
    cfg = IntegratorConfig(cfg.rel_tol, cfg.abs_tol, min(cfg.max_step, t_end / 20), min(cfg.initial_step, t_end / 1000))
    H = build_hamiltonian(microwave_drives(rates))
    traj = integrate(pure_state(Level.T0), H, build_channels(rates), t_end, cfg, times)
    prob = traj.population(Level.TP) + traj.population(Level.TM)
    try:
        t_max, p_max = _first_local_max(times, prob)
    except OverdampedError as exc:
        raise OverdampedError(
            f"{exc} (omega_MW={rates.omega_MW:.6g} rad/ns, window {t_end:.6g} ns): overdamped regime"
        ) from None
    return PiPulseResult(min(max(p_max, 0.0), 1.0), t_max, times, prob, traj)


def total_fidelity(readout_F: float, pi_result: PiPulseResult | float) -> float:
    """Readout fidelity degraded by an imperfect pi-pulse."""
    p = pi_result.transfer_probability if isinstance(pi_result, PiPulseResult) else float(pi_result)
    for name, v in (("readout fidelity", readout_F), ("transfer probability", p)):
        if not 0 <= v <= 1:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    return readout_F * p
