"""Continuous-variable entanglement distillation by photon subtraction with local squeezing."""

__version__ = "0.1.0"

from .distiller import GaussianMixture, ProtocolParams, distill
from .errors import (
    ConvergenceError,
    CVDistillError,
    InvalidParameter,
    NoTransitionError,
    NumericalError,
    TruncationError,
    ZeroSuccessProbability,
)
from .fock import FockDensityMatrix, gaussian_to_fock, mixture_to_fock
from .gaussian_core import CovarianceMatrix, SymplecticTransform, tmss_cm
from .metrics import log_negativity_fock, log_negativity_gaussian, teleport_fidelity_gaussian, teleport_fidelity_mixture
