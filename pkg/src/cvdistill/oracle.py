"""Brute-force Fock-space simulation of the distillation protocol.

Deliberately naive: dense tensors, squeezers from matrix exponentials of
padded truncated generators, beam splitters exponentiated exactly inside
each fixed-total-photon-number block, ancillas handled through explicit
beam-splitter matrix elements.  It shares no code with the phase-space route beyond the
parameter container, so agreement between the two is meaningful.

Operator conventions are fixed so that ``U^dag X U = S X`` reproduces the
phase-space transforms: the squeezer is ``exp(r/2 (a^dag^2 - a^2))``, the
rotation ``exp(-i theta n)``, and the beam splitter
``exp(theta (a b^dag - a^dag b))`` with ``cos theta = sqrt(T)``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from math import comb, factorial, sqrt

import numpy as np
from scipy.linalg import expm
from scipy.special import eval_genlaguerre

from .errors import InvalidParameter, TruncationError
from .fock import FockDensityMatrix

PAD = 8
BUILD_PAD = 16
UNITARITY_TOL = 1e-6
TARGET_UNITARITY = 1e-8
MAX_PAD = 64
LEAKAGE_TOL = 1e-6


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)


@dataclass(frozen=True)
class FockVector:
    """Two-mode pure state ``amplitudes[n_a, n_b]`` plus the norm lost to truncation."""

    amplitudes: np.ndarray
    norm_deficit: float

    @property
    def dim_per_mode(self) -> int:
        return self.amplitudes.shape[0]


def fock_tmss(r: float, n_max: int) -> FockVector:
    """Schmidt-form TMSS ``sqrt(1-l^2) l^n |n, n>``, ``l = tanh r``, renormalised."""
    if r < 0:
        raise InvalidParameter("r must be >= 0")
    lam = np.tanh(r)
    n = np.arange(n_max + 1)
    amps = np.sqrt(1 - lam**2) * lam**n
    norm2 = float(np.sum(amps**2))
    psi = np.diag(amps / np.sqrt(norm2))
    return FockVector(psi, 1.0 - norm2)


def unitarity_defect(U: np.ndarray, keep: int) -> float:
    """Deviation of the first ``keep`` columns of a cropped operator from orthonormality."""
    block = U[:, :keep]
    return float(np.max(np.abs(block.conj().T @ block - np.eye(keep))))


@functools.lru_cache(maxsize=64)
def _squeeze_cached(r: float, dim: int) -> np.ndarray:
    big = dim + BUILD_PAD
    a = annihilation(big)
    U = expm(0.5 * r * (a.T @ a.T - a @ a))[:dim, :dim]
    U.setflags(write=False)
    return U


def fock_squeeze(r: float, dim: int, keep: int = None) -> np.ndarray:
    """Single-mode squeezer on ``dim`` levels; realises ``diag(e^r, e^-r)``.

    Raises:
        TruncationError: the first ``keep`` columns (default ``dim - PAD``)
            are not unitary to ``1e-6``.
    """
    keep = max(dim - PAD, 1) if keep is None else keep
    U = _squeeze_cached(float(r), int(dim))
    defect = unitarity_defect(U, keep)
    if defect > UNITARITY_TOL:
        raise TruncationError(f"squeezer: unitarity deficit {defect:.2e} on retained block; padding insufficient")
    return U


def working_dim(squeezings, n_max: int) -> int:
    """Per-mode dimension: ``n_max + 1 + PAD``, grown until every squeezer in
    ``squeezings`` is unitary to ``1e-8`` on ``n <= n_max``."""
    dim = n_max + 1 + PAD
    while dim <= n_max + 1 + MAX_PAD:
        worst = max(unitarity_defect(_squeeze_cached(float(r), dim), n_max + 1) for r in squeezings)
        if worst < TARGET_UNITARITY:
            return dim
        dim += 4
    raise TruncationError(f"no padding up to {MAX_PAD} keeps the squeezers unitary; reduce r'")


def fock_rotation(theta: float, dim: int) -> np.ndarray:
    return np.diag(np.exp(-1j * theta * np.arange(dim)))


def fock_local_unitary(r: float, theta: float, phi: float, dim: int, keep: int = None) -> np.ndarray:
    """``R(theta) S(r) R(phi)`` in the Fock basis."""
    return fock_rotation(theta, dim) @ fock_squeeze(r, dim, keep) @ fock_rotation(phi, dim)


@functools.lru_cache(maxsize=64)
def _bs_cached(T: float, dim: int) -> np.ndarray:
    # the generator conserves a^dag a + b^dag b: exponentiate each
    # fixed-total block exactly instead of one huge truncated matrix
    theta = np.arccos(np.sqrt(T))
    U = np.zeros((dim, dim, dim, dim))
    for total in range(2 * dim - 1):
        k = np.arange(total + 1)
        # a b^dag |k, N-k> = sqrt(k (N-k+1)) |k-1, N-k+1>
        off = np.sqrt(k[1:] * (total - k[1:] + 1.0))
        gen = np.diag(off, 1) - np.diag(off, -1)
        block = expm(theta * gen)
        valid = (k < dim) & (total - k < dim)
        kv = k[valid]
        for i_out in kv:
            U[i_out, total - i_out, kv, total - kv] = block[i_out, kv]
    U.setflags(write=False)
    return U


def fock_beam_splitter(T: float, dim: int) -> np.ndarray:
    """Beam splitter as a tensor ``U[out_a, out_b, in_a, in_b]``."""
    if not 0.0 <= T <= 1.0:
        raise InvalidParameter("T must lie in [0, 1]")
    return _bs_cached(float(T), int(dim))


def beam_splitter_kraus(T: float, dim: int) -> np.ndarray:
    """``K[i, out, in] = <out, i| U_BS |in, 0>``: ancilla enters in vacuum, leaves with ``i`` photons."""
    U = fock_beam_splitter(T, dim)
    return np.ascontiguousarray(U[:, :, :, 0].transpose(1, 0, 2))


def kraus_ps_operators(T: float, n_max: int, i_max: int) -> list:
    """Photon-subtraction filter operators ``E_0 ... E_{i_max}`` on ``n <= n_max``.

    ``E_i = sum_{n>=i} (-1)^i sqrt(C(n,i)) T^((n-i)/2) (1-T)^(i/2) |n-i><n|``;
    ``E_0`` is the no-click branch.
    """
    if i_max < 1:
        raise InvalidParameter("i_max must be >= 1")
    d = n_max + 1
    ops = []
    for i in range(i_max + 1):
        E = np.zeros((d, d))
        for n in range(i, d):
            E[n - i, n] = (-1) ** i * sqrt(comb(n, i)) * T ** ((n - i) / 2) * (1 - T) ** (i / 2)
        ops.append(E)
    return ops


def kraus_completeness_defect(ops) -> float:
    d = ops[0].shape[0]
    total = sum(E.conj().T @ E for E in ops)
    return float(np.max(np.abs(total - np.eye(d))))


def _apply_local(rho: np.ndarray, U: np.ndarray, mode: int) -> np.ndarray:
    if mode == 0:
        return np.einsum("ai,ibjd,cj->abcd", U, rho, U.conj(), optimize=True)
    return np.einsum("bi,aicj,dj->abcd", U, rho, U.conj(), optimize=True)


def _apply_channel(rho: np.ndarray, K: np.ndarray, mode: int) -> np.ndarray:
    """``sum_i K_i rho K_i^dag`` on one mode, ``K`` indexed ``[i, out, in]``."""
    if mode == 0:
        return np.einsum("kai,ibjd,kcj->abcd", K, rho, K.conj(), optimize=True)
    return np.einsum("kbi,aicj,kdj->abcd", K, rho, K.conj(), optimize=True)


def _trace(rho: np.ndarray) -> float:
    return float(np.einsum("abab->", rho).real)


def _prepare(params, n_max: int):
    """Damped and locally transformed resource, as a ``(W, W, W, W)`` tensor."""
    W = working_dim((params.r_prime_a, params.r_prime_b), n_max)
    psi = fock_tmss(params.r, W - 1).amplitudes
    rho = np.einsum("ab,cd->abcd", psi, psi.conj()).astype(complex)
    if params.eta < 1.0:
        loss = beam_splitter_kraus(params.eta, W)
        rho = _apply_channel(rho, loss, 0)
        rho = _apply_channel(rho, loss, 1)
    angles = params.angles or (0.0, 0.0, 0.0, 0.0)
    keep = n_max + 1
    Ua = fock_local_unitary(params.r_prime_a, angles[0], angles[1], W, keep)
    Ub = fock_local_unitary(params.r_prime_b, angles[2], angles[3], W, keep)
    rho = _apply_local(rho, Ua, 0)
    rho = _apply_local(rho, Ub, 1)
    leak = 1.0 - _trace(rho)
    if leak > LEAKAGE_TOL:
        raise TruncationError(f"truncation leakage {leak:.2e} before detection; increase n_max")
    return rho


def simulate_distillation_fock(params, n_max: int = 10):
    """Run the whole protocol in the Fock basis.

    Each detector port is modelled by a beam splitter with a vacuum ancilla;
    the ancilla is projected on ``I - |0><0|`` and traced out.

    Returns:
        tuple: ``(rho, p_succ)`` with ``rho`` the normalised conditional
        :class:`FockDensityMatrix` cropped to ``n_max``.
    """
    rho = _prepare(params, n_max)
    W = rho.shape[0]
    K = beam_splitter_kraus(params.T, W)[1:]
    rho = _apply_channel(rho, K, 0)
    rho = _apply_channel(rho, K, 1)
    p = _trace(rho)
    if not p > 0:
        return None, 0.0
    s = slice(0, n_max + 1)
    return FockDensityMatrix(rho[s, s, s, s] / p), p


def simulate_distillation_kraus(params, n_max: int = 10):
    """Same protocol, with the closed-form filter operators as the local map."""
    rho = _prepare(params, n_max)
    W = rho.shape[0]
    K = np.array(kraus_ps_operators(params.T, W - 1, W - 1)[1:])
    rho = _apply_channel(rho, K, 0)
    rho = _apply_channel(rho, K, 1)
    p = _trace(rho)
    if not p > 0:
        return None, 0.0
    s = slice(0, n_max + 1)
    return FockDensityMatrix(rho[s, s, s, s] / p), p


def fock_gaussian_state(nus, steps, n_max: int = 10) -> FockDensityMatrix:
    """Two-mode Gaussian state built directly in the Fock basis.

    Args:
        nus: symplectic eigenvalues (``>= 1/2``) of the initial thermal modes.
        steps: sequence of ``("local", mode, r, theta, phi)`` or ``("bs", T)``.
        n_max: retained photon number per mode.
    """
    W = working_dim([step[2] for step in steps if step[0] == "local"] or [0.0], n_max)
    n = np.arange(W)
    diags = []
    for nu in nus:
        nbar = nu - 0.5
        p = nbar**n / (1 + nbar) ** (n + 1)
        diags.append(np.diag(p))
    rho = np.einsum("ac,bd->abcd", *diags).astype(complex)
    for step in steps:
        if step[0] == "local":
            _, mode, r, theta, phi = step
            rho = _apply_local(rho, fock_local_unitary(r, theta, phi, W, n_max + 1), mode)
        elif step[0] == "bs":
            U = fock_beam_splitter(step[1], W)
            rho = np.einsum("abij,ijkl,cdkl->abcd", U, rho, U.conj(), optimize=True)
        else:
            raise InvalidParameter(f"unknown step {step[0]!r}")
    s = slice(0, n_max + 1)
    return FockDensityMatrix(rho[s, s, s, s])


def displacement_matrices(betas, dim: int) -> np.ndarray:
    """Exact ``<m|D(beta)|n>`` for ``m, n < dim`` via associated Laguerre polynomials.

    Returns an array of shape ``(len(betas), dim, dim)``.
    """
    betas = np.atleast_1d(np.asarray(betas, dtype=complex))
    x = np.abs(betas) ** 2
    D = np.zeros((betas.size, dim, dim), dtype=complex)
    for m in range(dim):
        for n in range(dim):
            lo, hi = min(m, n), max(m, n)
            pref = sqrt(factorial(lo) / factorial(hi))
            base = betas if m >= n else -np.conj(betas)
            D[:, m, n] = pref * base ** (hi - lo) * eval_genlaguerre(lo, hi - lo, x)
    return D * np.exp(-x / 2)[:, None, None]


def teleport_fidelity_fock(rho: FockDensityMatrix, n_nodes: int = 40) -> float:
    """Unit-gain coherent-state teleportation fidelity from a Fock density matrix.

    Integrates ``(1/2pi) exp(-|xi|^2/2) chi_AB(R xi, xi)`` over the plane with
    Gauss-Hermite quadrature, where ``chi`` is the symmetric characteristic
    function ``Tr[rho exp(i X^T xi)]`` and ``R = diag(-1, 1)``.
    """
    nodes, weights = np.polynomial.hermite_e.hermegauss(n_nodes)
    x1, x2 = (g.ravel() for g in np.meshgrid(nodes, nodes, indexing="ij"))
    w = np.outer(weights, weights).ravel()
    d = rho.dim_per_mode
    # exp(i (x xi1 + p xi2)) = D(beta) with beta = (i xi1 - xi2)/sqrt(2)
    Da = displacement_matrices((-1j * x1 - x2) / sqrt(2), d)
    Db = displacement_matrices((1j * x1 - x2) / sqrt(2), d)
    chi = np.einsum("abcd,nca,ndb->n", rho.elements, Da, Db, optimize=True)
    return float(np.real(np.sum(w * chi)) / (2 * np.pi))
