"""Squeezed states of an oscillator from sequences of qubit-conditioned Rabi gates."""

from .approx import LatticeSpec, approx_point, approx_scan, lattice_superposition
from .errors import (
    GridTooSmall,
    IntegratorDiverged,
    LeakError,
    NonPositive,
    NotHermitian,
    RabiSqueezeError,
    RegimeError,
    UnstableEstimate,
    ZeroProbability,
)
from .hilbert import FockConfig, coherent, squeezed_vacuum
from .lindblad import NoiseKind, NoiseModel, evolve_master, run_noisy_protocol
from .metrics import MetricsRecord, evaluate, fisher_information, p_density, squeezing_db
from .optimizer import Objective, OptimizeReport, optimize
from .protocol import InteractionSchedule, ProtocolResult, analytic_schedule, run_unitary

__version__ = "0.1.0"
