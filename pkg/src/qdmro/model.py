"""Eight-level quantum dot molecule: transition table, jump channels, drive Hamiltonians.

All rates are angular, in rad/ns. The rotating frame removes bare level
energies; every drive is resonant unless a detuning is given.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .lindblad import JumpChannel
from .states import DIM, GROUND_LEVELS, TRIPLET_LEVELS, Level, ket_bra, projector
from .units import hz_to_rad_per_ns


@dataclass(frozen=True)
class RateSet:
    """Physical rates in rad/ns. Defaults are the reference InAs/GaAs parameter set."""

    gamma_O: float = hz_to_rad_per_ns(1e9)
    gamma_F: float = hz_to_rad_per_ns(1e6)
    gamma_1: float = 1.0 / 100e3
    gamma_2_ST: float = 1.0 / 200.0
    gamma_2_T: float = 1.0 / 5.0
    omega_C: float = hz_to_rad_per_ns(1e9)
    omega_MW: float = hz_to_rad_per_ns(100e6)
    # ((from, to), rate) overrides for individual depolarization pairs
    depolarization_overrides: tuple[tuple[tuple[Level, Level], float], ...] = ()
    forbidden_cross_connections: bool = True

    def __post_init__(self):
        for name in ("gamma_O", "gamma_F", "gamma_1", "gamma_2_ST", "gamma_2_T", "omega_C", "omega_MW"):
            value = getattr(self, name)
            if not value >= 0:
                raise ValueError(f"RateSet.{name} must be >= 0, got {value}")
        for (src, dst), rate in self.depolarization_overrides:
            if src == dst or src not in GROUND_LEVELS or dst not in GROUND_LEVELS:
                raise ValueError(f"depolarization override {src.label}->{dst.label} must join two distinct ground states")
            if not rate >= 0:
                raise ValueError("depolarization override rates must be >= 0")
        if self.gamma_F > self.gamma_O:
            warnings.warn("forbidden decay rate exceeds the allowed decay rate", stacklevel=2)

    def replace(self, **changes) -> "RateSet":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class DriveTerm:
    lower: Level
    upper: Level
    rabi: float
    detuning: float = 0.0

    def __post_init__(self):
        if self.lower == self.upper:
            raise ValueError("drive must couple two different levels")
        if not self.rabi >= 0:
            raise ValueError(f"Rabi frequency must be >= 0, got {self.rabi}")


@dataclass(frozen=True)
class TransitionTable:
    """Optical decay paths as (excited, ground) pairs."""

    allowed: tuple[tuple[Level, Level], ...]
    forbidden: tuple[tuple[Level, Level], ...]
    triplet_decaying: Mapping[tuple[Level, Level], bool] = field(compare=False)

    def all_transitions(self) -> list[tuple[tuple[Level, Level], str]]:
        return [(p, "allowed") for p in self.allowed] + [(p, "forbidden") for p in self.forbidden]


ISOLATED = ((Level.XP, Level.TP), (Level.XM, Level.TM))
READOUT_LEAKAGE = ((Level.XP, Level.S), (Level.XM, Level.S))
CROSS_FORBIDDEN = (
    (Level.X1, Level.TP),
    (Level.X1, Level.TM),
    (Level.X2, Level.TP),
    (Level.X2, Level.TM),
)


def build_transition_table(include_cross: bool = True) -> TransitionTable:
    """Allowed and forbidden optical decays of the QDM.

    The isolated pairs X+ -> T+ and X- -> T- and the decays of X1, X2 into
    both S and T0 are spin-conserving. Heavy-light hole mixing opens the
    X+/X- -> S leakage and, unless ``include_cross`` is False, weak decays
    of X1, X2 into T+ and T-.
    """
    allowed = ISOLATED + (
        (Level.X1, Level.S),
        (Level.X1, Level.T0),
        (Level.X2, Level.S),
        (Level.X2, Level.T0),
    )
    forbidden = READOUT_LEAKAGE + (CROSS_FORBIDDEN if include_cross else ())
    flags = {pair: pair[1] in TRIPLET_LEVELS for pair in allowed + forbidden}
    return TransitionTable(allowed=allowed, forbidden=forbidden, triplet_decaying=flags)


# Pure-dephasing generators (diagonal, eigenvalues +-1). Each targeted
# coherence decays at 2 * channel_rate; the other generator has equal
# eigenvalues on that pair, so the two targets stay independent.
_SINGLET_VS_TRIPLET = {Level.S: 1.0, Level.T0: -1.0, Level.TP: -1.0, Level.TM: -1.0}
_DFS_VS_POLARIZED = {Level.S: 1.0, Level.T0: 1.0, Level.TP: -1.0, Level.TM: -1.0}


def _diag(weights: Mapping[Level, float]) -> np.ndarray:
    op = np.zeros((DIM, DIM), dtype=complex)
    for level, w in weights.items():
        op[level, level] = w
    return op


def build_channels(rates: RateSet, table: TransitionTable | None = None) -> list[JumpChannel]:
    """All incoherent processes of the QDM.

    Radiative channels come first (one per table entry), then the twelve
    pairwise ground-state depolarization channels, then two dephasing
    channels. Radiative emission into the triplet manifold is collected.
    """
    table = table or build_transition_table(rates.forbidden_cross_connections)
    channels: list[JumpChannel] = []
    for (excited, ground), kind in table.all_transitions():
        rate = rates.gamma_O if kind == "allowed" else rates.gamma_F
        channels.append(
            JumpChannel(
                operator=ket_bra(ground, excited),
                rate=rate,
                collected=bool(table.triplet_decaying[(excited, ground)]),
                name=f"{excited.label}->{ground.label}",
            )
        )

    overrides = dict(rates.depolarization_overrides)
    for src, dst in itertools.permutations(GROUND_LEVELS, 2):
        channels.append(
            JumpChannel(
                operator=ket_bra(dst, src),
                rate=overrides.get((src, dst), rates.gamma_1 / 3.0),
                name=f"depol {src.label}->{dst.label}",
            )
        )

    channels.append(JumpChannel(_diag(_SINGLET_VS_TRIPLET), rates.gamma_2_ST / 2.0, name="dephase S-T0"))
    channels.append(JumpChannel(_diag(_DFS_VS_POLARIZED), rates.gamma_2_T / 2.0, name="dephase T0-T+-"))
    return channels


def build_hamiltonian(drives: Sequence[DriveTerm], dim: int = DIM) -> np.ndarray:
    """Rotating-frame drive Hamiltonian, ``(rabi/2) sigma_x`` per pair plus detunings."""
    H = np.zeros((dim, dim), dtype=complex)
    seen: set[frozenset[int]] = set()
    for d in drives:
        pair = frozenset((int(d.lower), int(d.upper)))
        if pair in seen:
            raise ValueError(f"duplicate drive on pair {d.lower.label}-{d.upper.label}")
        seen.add(pair)
        if max(d.lower, d.upper) >= dim:
            raise ValueError(f"drive level outside dimension {dim}")
        H += 0.5 * d.rabi * (ket_bra(d.upper, d.lower, dim) + ket_bra(d.lower, d.upper, dim))
        H += d.detuning * projector(d.upper, dim)
    return H


def readout_drives(rates: RateSet) -> list[DriveTerm]:
    """Simultaneous resonant cycling of both isolated transitions."""
    return [DriveTerm(Level.TP, Level.XP, rates.omega_C), DriveTerm(Level.TM, Level.XM, rates.omega_C)]


def microwave_drives(rates: RateSet) -> list[DriveTerm]:
    """Degenerate T0 -> T+ and T0 -> T- microwave drives."""
    return [DriveTerm(Level.T0, Level.TP, rates.omega_MW), DriveTerm(Level.T0, Level.TM, rates.omega_MW)]
