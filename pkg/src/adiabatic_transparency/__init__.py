"""Adiabatic transparency in chain-coupled multilevel atoms.

Level schemes and Hamiltonians (:mod:`.chain`), quasienergy branches and
induced dipoles (:mod:`.quasienergy`), transparency regimes (:mod:`.regimes`),
single-atom dynamics (:mod:`.dynamics`), reduced pulse propagation
(:mod:`.propagation`) and the ``adtrans`` command line (:mod:`.cli`, with
scenario files in :mod:`.config` and runs in :mod:`.runs`).
"""

__version__ = "0.1.0"

from .chain import (
    DetuningLadder,
    HamiltonianSnapshot,
    LevelScheme,
    Orientation,
    PulseEnvelope,
    PulseTrain,
    build_hamiltonian,
    multiphoton_detunings,
    sample_pulses,
)
from .errors import (
    ConfigError,
    ContractViolation,
    IntegrationFailure,
    RegimeMismatch,
    StepSizeFailure,
    TransparencyError,
)
from .quasienergy import QuasienergyFan, dipole_moments, quasienergy_fan, track_eigenbranches
from .regimes import CATALOG, VARIANTS, AdiabaticState, RegimeSpec, adiabatic_state, get_regime, verify_regime
from .dynamics import Scenario, TimeGrid, adiabaticity_monitor, evolve, integrate, scenario
from .config import parse_config, parse_text
from .output import RunManifest

__all__ = [
    "CATALOG",
    "VARIANTS",
    "AdiabaticState",
    "ConfigError",
    "ContractViolation",
    "DetuningLadder",
    "HamiltonianSnapshot",
    "IntegrationFailure",
    "LevelScheme",
    "Orientation",
    "PulseEnvelope",
    "PulseTrain",
    "QuasienergyFan",
    "RegimeMismatch",
    "RegimeSpec",
    "RunManifest",
    "Scenario",
    "StepSizeFailure",
    "TimeGrid",
    "TransparencyError",
    "adiabatic_state",
    "adiabaticity_monitor",
    "build_hamiltonian",
    "dipole_moments",
    "evolve",
    "get_regime",
    "integrate",
    "multiphoton_detunings",
    "parse_config",
    "parse_text",
    "quasienergy_fan",
    "sample_pulses",
    "scenario",
    "track_eigenbranches",
    "verify_regime",
]
