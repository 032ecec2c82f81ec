import numpy as np
import pytest

from cvdistill.distiller import ProtocolParams, distill
from cvdistill.errors import InvalidParameter, TruncationError
from cvdistill.fock import mixture_to_fock
from cvdistill.oracle import (
    annihilation,
    beam_splitter_kraus,
    fock_beam_splitter,
    fock_local_unitary,
    fock_squeeze,
    fock_tmss,
    kraus_completeness_defect,
    kraus_ps_operators,
    simulate_distillation_fock,
    simulate_distillation_kraus,
    teleport_fidelity_fock,
    unitarity_defect,
    working_dim,
)


def test_tmss_vector():
    assert np.allclose(fock_tmss(0.0, 5).amplitudes[0, 0], 1.0)
    psi = fock_tmss(0.025, 10)
    a = np.diag(psi.amplitudes)
    assert a[1] / a[0] == pytest.approx(np.tanh(0.025), rel=1e-14)
    assert a[1] / a[0] == pytest.approx(0.0249948, abs=1e-7)
    assert 0 <= psi.norm_deficit < 1e-12
    assert np.sum(np.abs(psi.amplitudes) ** 2) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(InvalidParameter):
        fock_tmss(-0.1, 4)


def test_identities():
    assert np.allclose(fock_squeeze(0.0, 12), np.eye(12))
    assert np.allclose(fock_beam_splitter(1.0, 5).reshape(25, 25), np.eye(25))


def test_squeezed_vacuum_overlap():
    for r in (0.1, 0.3, -0.2):
        S = fock_squeeze(r, 30, keep=5)
        assert S[0, 0].real == pytest.approx(np.cosh(r) ** -0.5, abs=1e-12)


def test_squeezer_realises_phase_space_transform():
    r, dim, keep = 0.2, 40, 10
    S = fock_squeeze(r, dim, keep)
    a = annihilation(dim)
    x = (a + a.T) / np.sqrt(2)
    heis = S.conj().T @ x @ S
    s = slice(0, keep)
    assert np.allclose(heis[s, s], np.exp(r) * x[s, s], atol=1e-8)


def test_squeezer_unitarity_and_padding():
    dim = working_dim([0.3], 10)
    assert unitarity_defect(fock_squeeze(0.3, dim, 11), 11) < 1e-8
    with pytest.raises(TruncationError):
        fock_squeeze(1.5, 12, keep=11)


def test_beam_splitter_half():
    U = fock_beam_splitter(0.5, 4)
    out = U[:, :, 1, 0]
    assert abs(out[1, 0]) == pytest.approx(1 / np.sqrt(2))
    assert abs(out[0, 1]) == pytest.approx(1 / np.sqrt(2))
    assert np.sum(np.abs(out) ** 2) == pytest.approx(1.0)


def test_beam_splitter_unitary():
    U = fock_beam_splitter(0.8, 6).reshape(36, 36)
    # exact inside every photon-number block that fits
    keep = [i * 6 + j for i in range(6) for j in range(6) if i + j < 6]
    block = U[:, keep]
    assert np.allclose(block.conj().T @ block, np.eye(len(keep)), atol=1e-12)


def test_kraus_operators():
    ops = kraus_ps_operators(1.0, 6, 3)
    assert all(np.allclose(E, 0) for E in ops[1:])
    E = kraus_ps_operators(0.9, 6, 2)
    assert E[1][0, 1] == pytest.approx(-np.sqrt(0.1))
    with pytest.raises(InvalidParameter):
        kraus_ps_operators(0.9, 6, 0)


def test_kraus_completeness(rng):
    for _ in range(100):
        T = rng.uniform(0.0, 1.0)
        n = int(rng.integers(2, 15))
        assert kraus_completeness_defect(kraus_ps_operators(T, n, n)) < 1e-8


def test_kraus_equals_beam_splitter_elements():
    K = beam_splitter_kraus(0.85, 8)
    E = kraus_ps_operators(0.85, 7, 7)
    for i in range(8):
        assert np.allclose(np.abs(K[i]), np.abs(E[i]), atol=1e-12)


def test_no_reflection_no_click():
    rho, p = simulate_distillation_fock(ProtocolParams.symmetric(0.1, 0.0, 1.0), 6)
    assert rho is None and p == 0.0


def test_plain_baseline_probability():
    _, p = simulate_distillation_fock(ProtocolParams.symmetric(0.025, 0.0, 0.95), 10)
    assert p == pytest.approx(1.5645e-6, rel=1e-3)


def test_matches_phase_space():
    params = ProtocolParams.symmetric(0.1, 0.1, 0.9, 0.7)
    rho, p = simulate_distillation_fock(params, 10)
    m = distill(params)
    assert p == pytest.approx(m.p_succ, rel=1e-6)
    assert np.max(np.abs(rho.elements - mixture_to_fock(m, 10).elements)) < 1e-6


def test_kraus_route_equals_beam_splitter_route():
    params = ProtocolParams(r=0.15, r_prime_a=0.1, r_prime_b=-0.05, T=0.9, eta=0.8, angles=(0.3, 1.0, 2.0, 0.5))
    a, pa = simulate_distillation_fock(params, 8)
    b, pb = simulate_distillation_kraus(params, 8)
    assert pa == pytest.approx(pb, rel=1e-8)
    assert np.max(np.abs(a.elements - b.elements)) < 1e-8


def test_local_unitary_rotations():
    U = fock_local_unitary(0.0, 0.3, 0.4, 6)
    assert np.allclose(U, np.diag(np.exp(-0.7j * np.arange(6))))


def test_fock_fidelity_tmss():
    from cvdistill.fock import gaussian_to_fock
    from cvdistill.gaussian_core import tmss_cm

    rho = gaussian_to_fock(tmss_cm(0.2), 20)
    assert teleport_fidelity_fock(rho) == pytest.approx(1 / (1 + np.exp(-0.4)), abs=1e-6)
