import itertools
from math import factorial

import numpy as np
import pytest

from cvdistill.distiller import GaussianMixture, ProtocolParams, distill
from cvdistill.errors import ConvergenceError, InvalidParameter
from cvdistill.fock import (
    FockDensityMatrix,
    choose_truncation,
    converge_truncation,
    gaussian_to_fock,
    mixture_to_fock,
    taylor_coefficients,
)
from cvdistill.gaussian_core import apply_pure_loss, random_physical_cm, tmss_cm, vacuum_cm
from cvdistill.oracle import fock_gaussian_state


def test_vacuum_maps_to_vacuum():
    rho = gaussian_to_fock(vacuum_cm(2), 6)
    expected = np.zeros((7,) * 4)
    expected[0, 0, 0, 0] = 1.0
    assert np.max(np.abs(rho.elements - expected)) < 1e-14


@pytest.mark.parametrize("r", [0.025, 0.1, 0.3])
def test_tmss_schmidt_form(r):
    n_max = 12
    rho = gaussian_to_fock(tmss_cm(r), n_max)
    lam = np.tanh(r)
    expected = np.zeros((n_max + 1,) * 4)
    for n in range(n_max + 1):
        for m in range(n_max + 1):
            expected[n, n, m, m] = (1 - lam**2) * lam ** (n + m)
    assert np.max(np.abs(rho.elements - expected)) < 1e-10


def test_taylor_zero_matrix():
    c = taylor_coefficients(np.zeros((4, 4)), 4)
    assert c[0, 0, 0, 0] == 1.0
    assert np.count_nonzero(c) == 1


def test_taylor_one_dimensional():
    # exp(a t^2 / 2) = sum a^k t^{2k} / (2^k k!)
    a = 0.7
    c = taylor_coefficients(np.array([[a]]), 8)
    for k in range(5):
        assert c[2 * k] == pytest.approx(a**k / (2**k * factorial(k)))
        if 2 * k + 1 <= 8:
            assert c[2 * k + 1] == 0


def _cauchy_coefficients(M, n_pts=24, radius=0.5):
    """Taylor coefficients by numerical contour differentiation (4D FFT on a torus)."""
    n = M.shape[0]
    theta = 2 * np.pi * np.arange(n_pts) / n_pts
    z = radius * np.exp(1j * theta)
    grids = np.meshgrid(*([z] * n), indexing="ij")
    t = np.stack(grids, axis=-1)
    f = np.exp(0.5 * np.einsum("...i,ij,...j->...", t, M, t))
    c = np.fft.fftn(f) / n_pts**n
    k = np.indices(c.shape).sum(axis=0)
    return c / radius**k


def test_taylor_matches_numerical_differentiation(rng):
    A = rng.normal(size=(4, 4)) * 0.4 + 1j * rng.normal(size=(4, 4)) * 0.4
    M = 0.5 * (A + A.T)
    c = taylor_coefficients(M, 6)
    ref = _cauchy_coefficients(M)
    for k in itertools.product(range(7), repeat=4):
        if sum(k) <= 6:
            assert abs(c[k] - ref[k]) < 1e-9


def test_taylor_scaled_consistent(rng):
    A = rng.normal(size=(4, 4))
    M = 0.5 * (A + A.T)
    c = taylor_coefficients(M, 5)
    s = taylor_coefficients(M, 5, scaled=True)
    fac = np.sqrt(np.array([factorial(i) for i in range(6)], dtype=float))
    scale = np.einsum("a,b,c,d->abcd", fac, fac, fac, fac)
    assert np.max(np.abs(c * scale - s)) < 1e-12


def test_taylor_rejects_asymmetric():
    with pytest.raises(InvalidParameter):
        taylor_coefficients(np.array([[0.0, 1.0], [0.0, 0.0]]), 3)


def test_random_cm_matches_direct_fock(rng):
    for _ in range(4):
        nus = rng.uniform(0.5, 0.8, size=2)
        steps = [
            ("local", 0, rng.uniform(-0.3, 0.3), rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi)),
            ("local", 1, rng.uniform(-0.3, 0.3), rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi)),
            ("bs", rng.uniform(0.2, 0.9)),
            ("local", 0, rng.uniform(-0.2, 0.2), rng.uniform(0, 2 * np.pi), 0.0),
        ]
        direct = fock_gaussian_state(nus, steps, 10)
        V = _phase_space(nus, steps)
        mapped = gaussian_to_fock(V, 10)
        assert np.max(np.abs(mapped.elements - direct.elements)) < 1e-8


def _phase_space(nus, steps):
    from cvdistill.gaussian_core import (
        CovarianceMatrix,
        apply_symplectic,
        embed_single_mode,
        make_beam_splitter,
        make_local_unitary,
    )

    V = CovarianceMatrix(np.diag([nus[0], nus[0], nus[1], nus[1]]))
    for step in steps:
        if step[0] == "local":
            _, mode, r, th, ph = step
            S = embed_single_mode(make_local_unitary(r, th, ph), mode, 2)
        else:
            S = make_beam_splitter(step[1], (0, 1), 2)
        V = apply_symplectic(V, S)
    return V


def test_single_term_mixture_equals_direct():
    V = tmss_cm(0.2)
    m = GaussianMixture((1.0,), (V,))
    assert np.allclose(mixture_to_fock(m, 8).elements, gaussian_to_fock(V, 8).elements)


def test_density_matrix_invariants(rng):
    # 100 random protocol points: Hermitian, even total parity, trace near 1
    for _ in range(100):
        p = ProtocolParams(r=rng.uniform(0.01, 0.2), r_prime_a=rng.uniform(-0.2, 0.2),
                           r_prime_b=rng.uniform(-0.2, 0.2), T=rng.uniform(0.7, 0.99),
                           eta=rng.uniform(0.3, 1.0))
        rho = mixture_to_fock(distill(p), 8)
        assert rho.hermiticity_defect() < 1e-10
        assert rho.parity_defect() < 1e-12
        assert abs(rho.trace_deficit) < 1e-3


def test_fig2_optimum_trace():
    m = distill(ProtocolParams.symmetric(0.025, 0.1565, 0.95))
    assert abs(mixture_to_fock(m, 16).trace_deficit) < 1e-6


def test_truncation_choice():
    vac = GaussianMixture((1.0,), (vacuum_cm(2),))
    assert choose_truncation(vac) == 6
    small = choose_truncation(distill(ProtocolParams.symmetric(0.025, 0.0)))
    big = choose_truncation(distill(ProtocolParams.symmetric(0.4, 0.0, eta=0.5)))
    assert big > small


def test_truncation_cap_error():
    m = distill(ProtocolParams.symmetric(0.4, 0.0, eta=0.5))
    with pytest.raises(ConvergenceError) as info:
        converge_truncation(m, 1e-4, start=6, cap=8)
    assert len(info.value.last_values) == 2


def test_density_matrix_shape_check():
    with pytest.raises(InvalidParameter):
        FockDensityMatrix(np.zeros((2, 3, 2, 2)))
