"""Figures of merit: logarithmic negativity and teleportation fidelity."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidParameter, NumericalError, ZeroSuccessProbability
from .fock import FockDensityMatrix
from .gaussian_core import CovarianceMatrix

HERMITIAN_TOL = 1e-6
TRACE_TOL = 1e-4
FIDELITY_TOL = 1e-9

_R = np.diag([-1.0, 1.0])


class Method(str, enum.Enum):
    FOCK_NEGATIVITY = "fock_negativity"
    GAUSSIAN_NEGATIVITY = "gaussian_negativity"
    FIDELITY = "fidelity"


@dataclass(frozen=True)
class MetricResult:
    value: float
    method: Method
    n_max_used: Optional[int] = None

    def __float__(self):
        return float(self.value)


def partial_transpose(rho: FockDensityMatrix) -> np.ndarray:
    """``rho^{T_A}[(k1,k2),(m1,m2)] = rho[(m1,k2),(k1,m2)]`` as a square matrix."""
    d = rho.dim_per_mode
    return rho.elements.transpose(2, 1, 0, 3).reshape(d * d, d * d)


def log_negativity_value(rho: FockDensityMatrix) -> float:
    """``max(0, log2 ||rho^{T_A}||_1)`` without precondition checks."""
    pt = partial_transpose(rho)
    pt = 0.5 * (pt + pt.conj().T)
    eig = np.abs(np.linalg.eigvalsh(pt))
    norm = float(np.sum(np.sort(eig)[::-1]))
    return max(0.0, float(np.log2(norm)))


def log_negativity_fock(rho: FockDensityMatrix) -> MetricResult:
    """Logarithmic negativity of a truncated two-mode density matrix.

    Raises:
        InvalidParameter: if ``rho`` is not Hermitian or its trace is off by
            more than ``1e-4``.
    """
    if rho.hermiticity_defect() > HERMITIAN_TOL:
        raise InvalidParameter(f"density matrix is not Hermitian (defect {rho.hermiticity_defect():.2e})")
    if abs(rho.trace_deficit) > TRACE_TOL:
        raise InvalidParameter(f"trace deficit {rho.trace_deficit:.2e} exceeds {TRACE_TOL}; raise n_max")
    return MetricResult(log_negativity_value(rho), Method.FOCK_NEGATIVITY, rho.n_max)


def _require_physical(V: CovarianceMatrix):
    if V.matrix.shape != (4, 4):
        raise InvalidParameter("expected a two-mode covariance matrix")
    if not V.is_physical():
        raise InvalidParameter("covariance matrix violates the uncertainty principle")


def log_negativity_gaussian(V: CovarianceMatrix) -> MetricResult:
    """Logarithmic negativity of a two-mode Gaussian state from its CM.

    Uses the smallest symplectic eigenvalue ``nu`` of the partially
    transposed CM (``p_B -> -p_B``): ``E_N = max(0, -log2(2 nu))``.
    """
    _require_physical(V)
    flip = np.diag([1.0, 1.0, 1.0, -1.0])
    nu = CovarianceMatrix(flip @ V.matrix @ flip).symplectic_eigenvalues()[0]
    return MetricResult(max(0.0, float(-np.log2(2.0 * nu))), Method.GAUSSIAN_NEGATIVITY)


def fidelity_value(V: CovarianceMatrix) -> float:
    m = V.matrix
    alpha, beta, gamma = m[:2, :2], m[2:, 2:], m[:2, 2:]
    det = np.linalg.det(_R @ alpha @ _R + gamma.T @ _R + _R @ gamma + beta + np.eye(2))
    if not det > 0:
        raise NumericalError(f"non-positive fidelity determinant {det:.3e}")
    return float(det ** -0.5)


def teleport_fidelity_gaussian(V: CovarianceMatrix) -> MetricResult:
    """Unit-gain coherent-state teleportation fidelity with resource ``V``.

    ``F = det(R a R + g^T R + R g + b + I)^(-1/2)`` with ``R = diag(-1, 1)``
    and ``a, b, g`` the A, B and cross blocks.  Independent of the input
    amplitude.
    """
    _require_physical(V)
    return MetricResult(fidelity_value(V), Method.FIDELITY)


def teleport_fidelity_mixture(mixture) -> MetricResult:
    """Fidelity of the heralded state, ``sum_j P_j F(V_j) / p_succ``."""
    if not mixture.p_succ > 0:
        raise ZeroSuccessProbability(mixture.p_succ)
    total = 0.0
    for weight, cm in mixture.terms:
        total += weight * fidelity_value(cm)
    value = total / mixture.p_succ
    if not 0.0 < value <= 1.0 + FIDELITY_TOL:
        raise NumericalError(f"mixture fidelity {value!r} outside (0, 1]")
    return MetricResult(min(value, 1.0), Method.FIDELITY)
