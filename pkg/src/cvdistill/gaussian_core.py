"""Covariance-matrix and symplectic algebra for zero-mean Gaussian states.

Conventions: quadratures are ordered ``(x_1, p_1, ..., x_N, p_N)`` with
``x = (a + a^dag)/sqrt(2)``, so the vacuum covariance matrix is ``I/2``.
A symplectic matrix ``S`` acts on a covariance matrix as ``S V S^T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from .errors import InvalidParameter

SYMPLECTIC_TOL = 1e-12
PHYSICAL_TOL = 1e-10


def _frozen(matrix, dtype=float):
    arr = np.array(matrix, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def omega(n_modes: int) -> np.ndarray:
    """Symplectic form ``Omega = (+)_k [[0, 1], [-1, 0]]`` for ``n_modes`` modes."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True)
class SymplecticTransform:
    """Real ``2N x 2N`` matrix preserving the symplectic form."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise InvalidParameter(f"symplectic matrix must be 2N x 2N, got {m.shape}")
        object.__setattr__(self, "matrix", m)

    @property
    def modes(self) -> int:
        return self.matrix.shape[0] // 2

    def __matmul__(self, other: "SymplecticTransform") -> "SymplecticTransform":
        return SymplecticTransform(self.matrix @ other.matrix)

    def symplectic_defect(self) -> float:
        """Largest entry of ``|S Omega S^T - Omega|``."""
        om = omega(self.modes)
        return float(np.max(np.abs(self.matrix @ om @ self.matrix.T - om)))

    def is_symplectic(self, tol: float = SYMPLECTIC_TOL) -> bool:
        return self.symplectic_defect() <= tol


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric second-moment matrix of a zero-mean ``N``-mode state."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise InvalidParameter(f"covariance matrix must be 2N x 2N, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidParameter("covariance matrix has non-finite entries")
        object.__setattr__(self, "matrix", m)

    @property
    def modes(self) -> int:
        return self.matrix.shape[0] // 2

    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.T)))

    def min_uncertainty_eigenvalue(self) -> float:
        """Smallest eigenvalue of the Hermitian matrix ``V + i Omega / 2``."""
        herm = self.matrix + 0.5j * omega(self.modes)
        return float(np.min(np.linalg.eigvalsh(herm)))

    def is_physical(self, tol: float = PHYSICAL_TOL) -> bool:
        return self.asymmetry() <= SYMPLECTIC_TOL and self.min_uncertainty_eigenvalue() >= -tol

    def symplectic_eigenvalues(self) -> np.ndarray:
        """Sorted symplectic spectrum (moduli of the eigenvalues of ``i Omega V``)."""
        ev = np.abs(np.linalg.eigvals(1j * omega(self.modes) @ self.matrix))
        return np.sort(ev)[::2]


@dataclass(frozen=True)
class PartitionedCM:
    """Blocks of a four-mode covariance matrix split as ``AB | CD``.

    ``sigma1``/``sigma2`` are the columns of ``sigma`` belonging to modes C
    and D; ``varsigma`` is the C-D cross correlation.
    """

    gamma_ab: np.ndarray
    gamma_cd: np.ndarray
    sigma: np.ndarray

    @property
    def sigma1(self) -> np.ndarray:
        return self.sigma[:, :2]

    @property
    def sigma2(self) -> np.ndarray:
        return self.sigma[:, 2:]

    @property
    def v_c(self) -> np.ndarray:
        return self.gamma_cd[:2, :2]

    @property
    def v_d(self) -> np.ndarray:
        return self.gamma_cd[2:, 2:]

    @property
    def varsigma(self) -> np.ndarray:
        return self.gamma_cd[:2, 2:]

    def reassemble(self) -> CovarianceMatrix:
        return CovarianceMatrix(np.block([[self.gamma_ab, self.sigma], [self.sigma.T, self.gamma_cd]]))


def _check_finite(**values):
    for name, value in values.items():
        if not np.isfinite(value):
            raise InvalidParameter(f"{name} must be finite, got {value!r}")


def _embed(block: np.ndarray, modes, total_modes: int) -> SymplecticTransform:
    idx = [q for m in modes for q in (2 * m, 2 * m + 1)]
    full = np.eye(2 * total_modes)
    full[np.ix_(idx, idx)] = block
    return SymplecticTransform(full)


def _rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, s], [-s, c]])


def make_squeeze(r: float, mode: int = 0, total_modes: int = 1) -> SymplecticTransform:
    """Single-mode squeezer ``diag(e^r, e^-r)`` on ``mode``, identity elsewhere.

    Args:
        r: squeezing parameter; positive values stretch ``x``.
        mode: index of the target mode.
        total_modes: number of modes of the full system.

    Returns:
        SymplecticTransform: the embedded ``2N x 2N`` squeezer.
    """
    _check_finite(r=r)
    if total_modes < 1 or not 0 <= mode < total_modes:
        raise InvalidParameter(f"mode {mode} out of range for {total_modes} modes")
    return _embed(np.diag([np.exp(r), np.exp(-r)]), [mode], total_modes)


def make_beam_splitter(T: float, modes=(0, 1), total_modes: int = 2) -> SymplecticTransform:
    """Beam splitter of transmittance ``T`` between ``modes = (k, l)``.

    The ``4 x 4`` block has ``sqrt(T)`` on the diagonal, ``+sqrt(1-T)`` at
    (3,1), (4,2) and ``-sqrt(1-T)`` at (1,3), (2,4) (1-based, ordering
    ``x_k, p_k, x_l, p_l``).
    """
    k, l = modes
    if not 0.0 <= T <= 1.0:
        raise InvalidParameter(f"transmittance must lie in [0, 1], got {T}")
    if k == l:
        raise InvalidParameter("beam splitter needs two distinct modes")
    if not (0 <= k < total_modes and 0 <= l < total_modes):
        raise InvalidParameter(f"modes {modes} out of range for {total_modes} modes")
    t, q = np.sqrt(T), np.sqrt(1.0 - T)
    block = t * np.eye(4)
    block[2, 0] = block[3, 1] = q
    block[0, 2] = block[1, 3] = -q
    return _embed(block, [k, l], total_modes)


def make_local_unitary(r: float, theta: float, phi: float) -> SymplecticTransform:
    """Most general single-mode Gaussian unitary ``R(theta) S(r) R(phi)``.

    ``R(a) = [[cos a, sin a], [-sin a, cos a]]``.
    """
    _check_finite(r=r, theta=theta, phi=phi)
    return SymplecticTransform(_rotation(theta) @ np.diag([np.exp(r), np.exp(-r)]) @ _rotation(phi))


def direct_sum(*transforms: SymplecticTransform) -> SymplecticTransform:
    """Block-diagonal combination acting on consecutive groups of modes."""
    return SymplecticTransform(block_diag(*[t.matrix for t in transforms]))


def embed_single_mode(transform: SymplecticTransform, mode: int, total_modes: int) -> SymplecticTransform:
    """Place a one-mode transform on ``mode`` of a ``total_modes`` system."""
    if transform.modes != 1:
        raise InvalidParameter("expected a single-mode transform")
    if not 0 <= mode < total_modes:
        raise InvalidParameter(f"mode {mode} out of range for {total_modes} modes")
    return _embed(transform.matrix, [mode], total_modes)


def vacuum_cm(n_modes: int) -> CovarianceMatrix:
    return CovarianceMatrix(0.5 * np.eye(2 * n_modes))


def _tmss_from_cs(c: float, s: float) -> CovarianceMatrix:
    return CovarianceMatrix(
        0.5
        * np.array(
            [
                [c, 0.0, s, 0.0],
                [0.0, c, 0.0, -s],
                [s, 0.0, c, 0.0],
                [0.0, -s, 0.0, c],
            ]
        )
    )


def tmss_cm(r: float) -> CovarianceMatrix:
    """Two-mode squeezed vacuum with ``c = cosh 2r`` and ``s = sinh 2r``."""
    _check_finite(r=r)
    if r < 0:
        raise InvalidParameter(f"TMSS squeezing must be non-negative, got {r}")
    return _tmss_from_cs(np.cosh(2 * r), np.sinh(2 * r))


def apply_symplectic(V: CovarianceMatrix, S: SymplecticTransform) -> CovarianceMatrix:
    """Return ``S V S^T`` with symmetry re-enforced."""
    if V.matrix.shape != S.matrix.shape:
        raise InvalidParameter(f"dimension mismatch: CM {V.matrix.shape} vs S {S.matrix.shape}")
    out = S.matrix @ V.matrix @ S.matrix.T
    return CovarianceMatrix(0.5 * (out + out.T))


def _tmss_form(V: CovarianceMatrix):
    """Extract ``(c, s)`` from a CM of TMSS form, or raise."""
    m = V.matrix
    if m.shape != (4, 4):
        raise InvalidParameter("pure-loss substitution needs a two-mode CM")
    c, s = 2 * m[0, 0], 2 * m[0, 2]
    if np.max(np.abs(m - _tmss_from_cs(c, s).matrix)) > 1e-12 * max(1.0, abs(c)):
        raise InvalidParameter("CM is not of the symmetric two-mode squeezed form")
    return c, s


def apply_pure_loss(V: CovarianceMatrix, eta: float) -> CovarianceMatrix:
    """Send both modes of a TMSS-form CM through a pure-loss channel.

    Substitutes ``c -> 1 - eta + eta c`` and ``s -> eta s``.

    Args:
        V: two-mode CM with the symmetric TMSS structure.
        eta: channel transmittance in ``[0, 1]``.

    Returns:
        CovarianceMatrix: the damped state.
    """
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameter(f"channel transmittance must lie in [0, 1], got {eta}")
    c, s = _tmss_form(V)
    return _tmss_from_cs(1.0 - eta + eta * c, eta * s)


def pure_loss_via_beam_splitter(V: CovarianceMatrix, eta: float) -> CovarianceMatrix:
    """Pure loss on every mode by mixing with vacuum ancillas and tracing them out.

    Works for any ``N``-mode CM.
    """
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameter(f"channel transmittance must lie in [0, 1], got {eta}")
    n = V.modes
    big = CovarianceMatrix(block_diag(V.matrix, 0.5 * np.eye(2 * n)))
    S = np.eye(4 * n)
    for k in range(n):
        S = make_beam_splitter(eta, (k, n + k), 2 * n).matrix @ S
    out = apply_symplectic(big, SymplecticTransform(S)).matrix
    return CovarianceMatrix(out[: 2 * n, : 2 * n])


def partition_four_mode(V: CovarianceMatrix) -> PartitionedCM:
    """Split an ``8 x 8`` CM (mode order A, B, C, D) into its ``AB | CD`` blocks."""
    m = V.matrix
    if m.shape != (8, 8):
        raise InvalidParameter(f"expected an 8 x 8 four-mode CM, got {m.shape}")
    return PartitionedCM(gamma_ab=m[:4, :4].copy(), gamma_cd=m[4:, 4:].copy(), sigma=m[:4, 4:].copy())


def random_symplectic(n_modes: int, rng: np.random.Generator, max_squeeze: float = 0.5) -> SymplecticTransform:
    """Random symplectic built from rotations, squeezers and beam splitters."""
    S = np.eye(2 * n_modes)
    for _ in range(2):
        for k in range(n_modes):
            u = make_local_unitary(rng.uniform(-max_squeeze, max_squeeze), *rng.uniform(0, 2 * np.pi, 2))
            S = embed_single_mode(u, k, n_modes).matrix @ S
        for k in range(n_modes - 1):
            S = make_beam_splitter(rng.uniform(0, 1), (k, k + 1), n_modes).matrix @ S
    return SymplecticTransform(S)


def random_physical_cm(n_modes: int, rng: np.random.Generator, max_squeeze: float = 0.5, max_thermal: float = 0.5):
    """Random mixed Gaussian CM ``S diag(nu) S^T`` with ``nu >= 1/2``."""
    nus = 0.5 + rng.uniform(0, max_thermal, n_modes)
    thermal = CovarianceMatrix(np.diag(np.repeat(nus, 2)))
    return apply_symplectic(thermal, random_symplectic(n_modes, rng, max_squeeze))
