"""Fock-basis density matrices of two-mode zero-mean Gaussian states.

The matrix elements ``<k1 k2|rho|m1 m2>`` are, up to ``sqrt(k1! k2! m1! m2!)``
and a global ``det(Lambda)^(-1/2)``, the Taylor coefficients of
``exp(t^T M t / 2)`` in ``t = (t1, t2, t1', t2')``.  The coefficients are
produced with a linear recurrence over the multi-index, which keeps the
cost at ``O(n_max^4)`` per Gaussian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvalidParameter, NumericalError, ZeroSuccessProbability
from .gaussian_core import CovarianceMatrix

_H = 1.0 / np.sqrt(2.0)
L2 = np.array(
    [
        [-1j * _H, -_H, 0, 0],
        [0, 0, -1j * _H, -_H],
        [1j * _H, -_H, 0, 0],
        [0, 0, 1j * _H, -_H],
    ],
    dtype=complex,
)
SIGMA_X_I2 = np.kron(np.array([[0.0, 1.0], [1.0, 0.0]]), np.eye(2))
SIGMA_Z_I2 = np.kron(np.diag([1.0, -1.0]), np.eye(2))
_LAMBDA_SHIFT = 0.5 * np.linalg.inv(L2) @ SIGMA_X_I2 @ L2.conj()

MAX_NMAX = 40
BRANCH_TOL = 1e-10


@dataclass(frozen=True)
class FockDensityMatrix:
    """Two-mode density matrix truncated to ``n <= n_max`` photons per mode.

    ``elements[k1, k2, m1, m2] = <k1 k2|rho|m1 m2>``.
    """

    elements: np.ndarray

    def __post_init__(self):
        el = np.asarray(self.elements, dtype=complex)
        if el.ndim != 4 or len(set(el.shape)) != 1:
            raise InvalidParameter(f"expected a (d, d, d, d) tensor, got {el.shape}")
        object.__setattr__(self, "elements", el)

    @property
    def dim_per_mode(self) -> int:
        return self.elements.shape[0]

    @property
    def n_max(self) -> int:
        return self.dim_per_mode - 1

    @property
    def matrix(self) -> np.ndarray:
        """Square matrix over the composite index ``k1 * d + k2``."""
        d = self.dim_per_mode
        return self.elements.reshape(d * d, d * d)

    @property
    def trace(self) -> float:
        return float(np.einsum("abab->", self.elements).real)

    @property
    def trace_deficit(self) -> float:
        return 1.0 - self.trace

    def hermiticity_defect(self) -> float:
        m = self.matrix
        return float(np.max(np.abs(m - m.conj().T)))

    def parity_defect(self) -> float:
        """Largest element whose total index ``k1+k2+m1+m2`` is odd."""
        idx = np.indices(self.elements.shape).sum(axis=0)
        odd = self.elements[idx % 2 == 1]
        return float(np.max(np.abs(odd))) if odd.size else 0.0

    def cropped(self, n_max: int) -> "FockDensityMatrix":
        s = slice(0, n_max + 1)
        return FockDensityMatrix(self.elements[s, s, s, s].copy())

    def __add__(self, other: "FockDensityMatrix") -> "FockDensityMatrix":
        return FockDensityMatrix(self.elements + other.elements)

    def __mul__(self, scalar: float) -> "FockDensityMatrix":
        return FockDensityMatrix(self.elements * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class FockMapWorkspace:
    """Intermediate matrices of the Gaussian-to-Fock map."""

    lambda_mat: np.ndarray
    m_mat: np.ndarray
    det_lambda: complex


def fock_map_workspace(V: CovarianceMatrix) -> FockMapWorkspace:
    if V.matrix.shape != (4, 4):
        raise InvalidParameter("the Gaussian-to-Fock map needs a two-mode CM")
    lam = V.matrix + _LAMBDA_SHIFT
    det_lam = complex(np.linalg.det(lam))
    if abs(det_lam) <= 1e-14:
        raise NumericalError("Lambda is singular; the covariance matrix is not physical")
    m = SIGMA_X_I2 + SIGMA_Z_I2 @ (L2.conj() @ np.linalg.inv(lam) @ L2.conj().T) @ SIGMA_Z_I2
    # only the symmetric part enters the quadratic form
    m = 0.5 * (m + m.T)
    return FockMapWorkspace(lambda_mat=lam, m_mat=m, det_lambda=det_lam)


def _shift(x: np.ndarray, axis: int) -> np.ndarray:
    """``out[..., k, ...] = x[..., k - 1, ...]`` with zero fill at ``k = 0``."""
    out = np.zeros_like(x)
    src = [slice(None)] * x.ndim
    dst = [slice(None)] * x.ndim
    src[axis] = slice(0, -1)
    dst[axis] = slice(1, None)
    out[tuple(dst)] = x[tuple(src)]
    return out


def taylor_coefficients(M_sym: np.ndarray, n_max: int, scaled: bool = False) -> np.ndarray:
    """Taylor coefficients of ``exp(t^T M t / 2)`` for every index ``<= n_max``.

    With ``i`` the first non-zero position of ``k``,
    ``c_k = (1/k_i) sum_j M_ij c_{k - e_i - e_j}``.  When ``scaled`` is set
    the returned tensor holds ``c_k * sqrt(prod_j k_j!)``, propagated through
    an equivalent recurrence so large factorials never appear.

    Args:
        M_sym: symmetric ``n x n`` matrix (complex allowed).
        n_max: largest index kept along every axis.
        scaled: multiply by the square-rooted factorials.

    Returns:
        np.ndarray: tensor of shape ``(n_max + 1,) * n``.
    """
    M = np.asarray(M_sym, dtype=complex)
    n = M.shape[0]
    if M.shape != (n, n):
        raise InvalidParameter("M must be square")
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(M))):
        raise InvalidParameter("M must be symmetric")
    if n_max < 0:
        raise InvalidParameter("n_max must be >= 0")
    d = n_max + 1
    c = np.zeros((d,) * n, dtype=complex)
    c[(0,) * n] = 1.0
    ks = np.arange(d, dtype=float)
    sqrt_k = np.sqrt(ks)
    # fill sub-tensors with leading zeros, innermost (last axis) first
    for i in range(n - 1, -1, -1):
        sub = c[(0,) * i]
        rest = sub.ndim - 1
        for ki in range(1, d):
            acc = np.zeros(sub.shape[1:], dtype=complex)
            prev = sub[ki - 1]
            for j in range(i + 1, n):
                ax = j - i - 1
                term = _shift(prev, ax)
                if scaled:
                    shape = [1] * rest
                    shape[ax] = d
                    term = term * sqrt_k.reshape(shape)
                acc += M[i, j] * term
            if scaled:
                acc /= np.sqrt(ki)
                if ki >= 2:
                    acc += M[i, i] * np.sqrt((ki - 1) / ki) * sub[ki - 2]
            else:
                if ki >= 2:
                    acc += M[i, i] * sub[ki - 2]
                acc /= ki
            sub[ki] = acc
    return c


def gaussian_to_fock(V: CovarianceMatrix, n_max: int) -> FockDensityMatrix:
    """Fock-basis density matrix of a zero-mean two-mode Gaussian state.

    Raises:
        NumericalError: for a non-physical CM or a failed branch check.
    """
    if n_max < 0:
        raise InvalidParameter("n_max must be >= 0")
    ws = fock_map_workspace(V)
    coeffs = taylor_coefficients(ws.m_mat, n_max, scaled=True)
    elements = coeffs / np.sqrt(ws.det_lambda)
    diag = np.einsum("abab->ab", elements)
    if np.max(np.abs(diag.imag)) > BRANCH_TOL:
        raise NumericalError("complex diagonal elements: sqrt(det Lambda) branch is wrong")
    return FockDensityMatrix(elements)


def mixture_to_fock(mixture, n_max: int) -> FockDensityMatrix:
    """Normalised density matrix ``(1/p_succ) sum_j P_j rho(V_j)``.

    Args:
        mixture: a :class:`~cvdistill.distiller.GaussianMixture`.
        n_max: truncation per mode.
    """
    if not mixture.p_succ > 0:
        raise ZeroSuccessProbability(mixture.p_succ)
    total = None
    for weight, cm in mixture.terms:
        term = weight * gaussian_to_fock(cm, n_max).elements
        total = term if total is None else total + term
    return FockDensityMatrix(total / mixture.p_succ)


@dataclass(frozen=True)
class TruncationResult:
    n_max: int
    log_negativity: float
    rho: FockDensityMatrix
    history: tuple


def converge_truncation(mixture, tol: float = 1e-4, start: int = 6, step: int = 2, cap: int = MAX_NMAX):
    """Grow ``n_max`` until the trace deficit and the E_N change are below ``tol``.

    The change at ``n`` is measured against ``n - step``; the first candidate
    is ``start`` (compared with ``start - step``).

    Raises:
        ConvergenceError: ``cap`` reached; carries the last two E_N values.
    """
    from .metrics import log_negativity_value

    if tol <= 0:
        raise InvalidParameter("tol must be > 0")
    prev = log_negativity_value(mixture_to_fock(mixture, max(start - step, 0)))
    history = []
    n = start
    while n <= cap:
        rho = mixture_to_fock(mixture, n)
        en = log_negativity_value(rho)
        history.append((n, en, rho.trace_deficit))
        if abs(rho.trace_deficit) < tol and abs(en - prev) < tol:
            return TruncationResult(n, en, rho, tuple(history))
        prev = en
        n += step
    last = [h[1] for h in history[-2:]]
    raise ConvergenceError(f"truncation did not converge up to n_max={cap}: last E_N values {last}", last)


def choose_truncation(mixture, tol: float = 1e-4) -> int:
    """Smallest ``n_max`` (6, 8, ..., 40) meeting the convergence test."""
    return converge_truncation(mixture, tol).n_max
