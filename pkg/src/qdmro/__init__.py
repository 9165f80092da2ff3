"""Spin readout of a quantum dot molecule by optical cycling: Lindblad simulation and photon statistics."""

__version__ = "0.1.0"
CONFIG_SCHEMA_VERSION = 1

from .states import DensityMatrix, Level, expectation, mixed, pure_state  # noqa: E402
from .lindblad import (  # noqa: E402
    IntegrationError,
    IntegratorConfig,
    JumpChannel,
    Trajectory,
    build_liouvillian_matrix,
    integrate,
    liouvillian_apply,
    propagate_expm,
)
from .model import RateSet, build_channels, build_hamiltonian, build_transition_table  # noqa: E402
from .protocol import (  # noqa: E402
    PhotonBudget,
    ProtocolParams,
    background_photons,
    readout_curves,
    simulate_pi_pulse,
    simulate_readout_stage,
    total_fidelity,
)
from .statistics import (  # noqa: E402
    FidelityResult,
    ThresholdPolicy,
    fidelity_map,
    min_efficiency_single_shot,
    optimal_threshold,
    poisson_cdf_below,
    readout_fidelity,
    single_shot_region,
)

__all__ = [
    "CONFIG_SCHEMA_VERSION",
    "DensityMatrix",
    "FidelityResult",
    "IntegrationError",
    "IntegratorConfig",
    "JumpChannel",
    "Level",
    "PhotonBudget",
    "ProtocolParams",
    "RateSet",
    "ThresholdPolicy",
    "Trajectory",
    "__version__",
    "background_photons",
    "build_channels",
    "build_hamiltonian",
    "build_liouvillian_matrix",
    "build_transition_table",
    "expectation",
    "fidelity_map",
    "integrate",
    "liouvillian_apply",
    "min_efficiency_single_shot",
    "mixed",
    "optimal_threshold",
    "poisson_cdf_below",
    "propagate_expm",
    "pure_state",
    "readout_curves",
    "readout_fidelity",
    "simulate_pi_pulse",
    "simulate_readout_stage",
    "single_shot_region",
    "total_fidelity",
]
