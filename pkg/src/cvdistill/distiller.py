"""Heralded photon-subtraction distillation in phase space.

Each half of a (possibly damped) two-mode squeezed vacuum passes a local
Gaussian unitary and then a beam splitter whose reflected port (C or D)
hits an on-off detector.  Conditioning on two clicks leaves A and B in a
state whose Wigner function is a signed sum of four zero-mean Gaussians.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as sla

from .errors import InvalidParameter, NumericalError, ZeroSuccessProbability
from .gaussian_core import (
    CovarianceMatrix,
    SymplecticTransform,
    apply_pure_loss,
    apply_symplectic,
    direct_sum,
    make_beam_splitter,
    make_local_unitary,
    partition_four_mode,
    tmss_cm,
    vacuum_cm,
)

P_SUCC_FLOOR = 1e-300


@dataclass(frozen=True)
class ProtocolParams:
    """Inputs of one distillation run.

    ``angles`` is ``(theta_a, phi_a, theta_b, phi_b)``; when given, the
    local operations are full ``R(theta) S(r') R(phi)`` unitaries instead of
    pure squeezers.
    """

    r: float
    r_prime_a: float = 0.0
    r_prime_b: Optional[float] = None
    T: float = 0.95
    eta: float = 1.0
    angles: Optional[Tuple[float, float, float, float]] = None

    def __post_init__(self):
        if self.r_prime_b is None:
            object.__setattr__(self, "r_prime_b", self.r_prime_a)
        if self.angles is not None:
            object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
            if len(self.angles) != 4:
                raise InvalidParameter("angles must be (theta_a, phi_a, theta_b, phi_b)")
        values = [self.r, self.r_prime_a, self.r_prime_b, self.T, self.eta, *(self.angles or ())]
        if not all(np.isfinite(v) for v in values):
            raise InvalidParameter("protocol parameters must be finite")
        if self.r < 0:
            raise InvalidParameter(f"r must be >= 0, got {self.r}")
        if not 0.0 < self.T <= 1.0:
            raise InvalidParameter(f"T must lie in (0, 1], got {self.T}")
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidParameter(f"eta must lie in [0, 1], got {self.eta}")

    @classmethod
    def symmetric(cls, r, r_prime, T=0.95, eta=1.0, angles=None):
        return cls(r=r, r_prime_a=r_prime, r_prime_b=r_prime, T=T, eta=eta, angles=angles)

    @property
    def r_prime(self) -> float:
        return self.r_prime_a


@dataclass(frozen=True)
class GaussianMixture:
    """Signed sum of zero-mean Gaussians ``sum_j P_j W(x; V_j)``.

    The unnormalised weights integrate to ``p_succ``; the normalised state is
    the mixture divided by it.
    """

    weights: Tuple[float, ...]
    cms: Tuple[CovarianceMatrix, ...]
    p_succ: float = field(default=None)

    def __post_init__(self):
        if len(self.weights) != len(self.cms) or not self.weights:
            raise InvalidParameter("mixture needs matching, non-empty weights and CMs")
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "cms", tuple(self.cms))
        if self.p_succ is None:
            object.__setattr__(self, "p_succ", success_probability(self))

    @property
    def terms(self):
        return list(zip(self.weights, self.cms))

    def __len__(self):
        return len(self.weights)


def local_transform(r_prime: float, angles=None):
    if angles is None:
        return make_local_unitary(r_prime, 0.0, 0.0)
    return make_local_unitary(r_prime, *angles)


def resource_cm(params: ProtocolParams) -> CovarianceMatrix:
    """Two-mode state shared before the local operations (after the channel)."""
    V = tmss_cm(params.r)
    if params.eta < 1.0:
        V = apply_pure_loss(V, params.eta)
    return V


def assemble_four_mode(params: ProtocolParams) -> CovarianceMatrix:
    """CM of modes A, B, C, D just before the two detectors fire.

    Args:
        params: protocol settings; loss acts on the TMSS before the local
            operations, ancillas C and D start in vacuum.

    Returns:
        CovarianceMatrix: ``8 x 8``, mode order A, B, C, D.
    """
    V0 = CovarianceMatrix(sla.block_diag(resource_cm(params).matrix, vacuum_cm(2).matrix))
    angles = params.angles
    ua = local_transform(params.r_prime_a, None if angles is None else angles[:2])
    ub = local_transform(params.r_prime_b, None if angles is None else angles[2:])
    ident = SymplecticTransform(np.eye(2))
    local = direct_sum(ua, ub, ident, ident)
    splitters = make_beam_splitter(params.T, (0, 2), 4) @ make_beam_splitter(params.T, (1, 3), 4)
    return apply_symplectic(V0, splitters @ local)


def _inv_sqrt_det(m: np.ndarray) -> float:
    lu, piv = sla.lu_factor(m)
    det = np.prod(np.diag(lu)) * (-1) ** np.count_nonzero(piv != np.arange(len(piv)))
    if not det > 0:
        raise NumericalError(f"non-positive determinant {det:.3e} in click conditioning")
    return float(det ** -0.5)


def _schur_update(gamma: np.ndarray, cross: np.ndarray, block: np.ndarray) -> CovarianceMatrix:
    out = gamma - cross @ sla.solve(block, cross.T, assume_a="sym")
    return CovarianceMatrix(0.5 * (out + out.T))


def condition_on_double_click(V_abcd: CovarianceMatrix) -> GaussianMixture:
    """Condition modes C and D on 'on' outcomes and return the A-B mixture.

    Each ``I - |0><0|`` projector splits into the identity and minus the
    vacuum projection, giving four Gaussian terms.

    Raises:
        ZeroSuccessProbability: when the clicks have (numerically) zero
            probability, e.g. an all-vacuum input.
    """
    part = partition_four_mode(V_abcd)
    vc = part.v_c + 0.5 * np.eye(2)
    vd = part.v_d + 0.5 * np.eye(2)
    vcd = part.gamma_cd + 0.5 * np.eye(4)
    weights = (1.0, -_inv_sqrt_det(vc), -_inv_sqrt_det(vd), _inv_sqrt_det(vcd))
    cms = (
        CovarianceMatrix(part.gamma_ab),
        _schur_update(part.gamma_ab, part.sigma1, vc),
        _schur_update(part.gamma_ab, part.sigma2, vd),
        _schur_update(part.gamma_ab, part.sigma, vcd),
    )
    p_succ = success_probability_from_weights(weights)
    if not p_succ > P_SUCC_FLOOR:
        raise ZeroSuccessProbability(p_succ)
    return GaussianMixture(weights, cms, p_succ)


def success_probability_from_weights(weights) -> float:
    # fixed summation order: the four terms cancel to O(p_succ)
    return float(sum(weights))


def success_probability(m: GaussianMixture) -> float:
    """Total weight ``sum_j P_j`` of the mixture."""
    return success_probability_from_weights(m.weights)


def distill(params: ProtocolParams) -> GaussianMixture:
    """Assemble and condition in one call."""
    return condition_on_double_click(assemble_four_mode(params))
