import numpy as np
import pytest

from cvdistill.errors import InvalidParameter
from cvdistill.gaussian_core import (
    CovarianceMatrix,
    SymplecticTransform,
    apply_pure_loss,
    apply_symplectic,
    direct_sum,
    make_beam_splitter,
    make_local_unitary,
    make_squeeze,
    omega,
    partition_four_mode,
    pure_loss_via_beam_splitter,
    random_physical_cm,
    random_symplectic,
    tmss_cm,
    vacuum_cm,
)


def test_squeeze_identity_and_ln2():
    assert np.allclose(make_squeeze(0.0).matrix, np.eye(2))
    assert np.allclose(make_squeeze(np.log(2)).matrix, np.diag([2.0, 0.5]))


def test_squeeze_embedding_and_bad_mode():
    S = make_squeeze(0.3, mode=1, total_modes=3)
    assert np.allclose(S.matrix[2:4, 2:4], np.diag([np.exp(0.3), np.exp(-0.3)]))
    assert np.allclose(S.matrix[:2, :2], np.eye(2))
    with pytest.raises(InvalidParameter):
        make_squeeze(0.1, mode=3, total_modes=3)


def test_beam_splitter_entries():
    assert np.allclose(make_beam_splitter(1.0).matrix, np.eye(4))
    B = make_beam_splitter(0.5).matrix
    h = 1 / np.sqrt(2)
    assert np.allclose(np.diag(B), h)
    assert np.isclose(B[2, 0], h) and np.isclose(B[3, 1], h)
    assert np.isclose(B[0, 2], -h) and np.isclose(B[1, 3], -h)


@pytest.mark.parametrize("T, modes", [(1.5, (0, 1)), (-0.1, (0, 1)), (0.5, (1, 1))])
def test_beam_splitter_rejects(T, modes):
    with pytest.raises(InvalidParameter):
        make_beam_splitter(T, modes, 2)


def test_local_unitary():
    assert np.allclose(make_local_unitary(0.2, 0, 0).matrix, make_squeeze(0.2).matrix)
    a, b = 0.4, 1.1
    c, s = np.cos(a + b), np.sin(a + b)
    assert np.allclose(make_local_unitary(0.0, a, b).matrix, [[c, s], [-s, c]])
    assert np.isclose(np.linalg.det(make_local_unitary(0.7, 2.0, -1.3).matrix), 1.0)


def test_tmss_values():
    assert np.allclose(tmss_cm(0.0).matrix, 0.5 * np.eye(4))
    V = tmss_cm(0.025).matrix
    assert V[0, 0] == pytest.approx(np.cosh(0.05) / 2, abs=1e-15)
    assert V[0, 0] == pytest.approx(0.5006253, abs=1e-6)
    assert V[0, 2] == pytest.approx(0.0250104, abs=1e-7)
    assert V[1, 3] == pytest.approx(-0.0250104, abs=1e-7)
    for r in (0.1, 0.5, 1.3):
        assert np.linalg.det(2 * tmss_cm(r).matrix) == pytest.approx(1.0, abs=1e-10)


def test_apply_symplectic():
    V = tmss_cm(0.3)
    same = apply_symplectic(V, SymplecticTransform(np.eye(4)))
    assert np.allclose(same.matrix, V.matrix)
    sq = apply_symplectic(vacuum_cm(1), make_squeeze(0.2))
    assert np.allclose(sq.matrix, 0.5 * np.diag([np.exp(0.4), np.exp(-0.4)]))
    with pytest.raises(InvalidParameter):
        apply_symplectic(V, make_squeeze(0.1))


def test_pure_loss_values():
    V = tmss_cm(0.4)
    assert np.allclose(apply_pure_loss(V, 1.0).matrix, V.matrix)
    assert np.allclose(apply_pure_loss(V, 0.0).matrix, 0.5 * np.eye(4))
    L = apply_pure_loss(V, 0.5).matrix
    assert 2 * L[0, 0] == pytest.approx(0.5 + 0.5 * np.cosh(0.8), abs=1e-12)  # 1.1687175
    assert 2 * L[0, 2] == pytest.approx(0.5 * np.sinh(0.8), abs=1e-12)  # 0.4440530
    assert np.allclose(L, 0.5 * V.matrix + 0.25 * np.eye(4), atol=1e-15)
    with pytest.raises(InvalidParameter):
        apply_pure_loss(V, 1.2)


def test_loss_routes_agree():
    for r in np.linspace(0.0, 1.0, 6):
        for eta in (0.0, 0.3, 0.5, 0.9, 1.0):
            a = apply_pure_loss(tmss_cm(r), eta).matrix
            b = pure_loss_via_beam_splitter(tmss_cm(r), eta).matrix
            assert np.max(np.abs(a - b)) < 1e-12


def test_partition_vacuum():
    part = partition_four_mode(vacuum_cm(4))
    assert np.allclose(part.gamma_ab, 0.5 * np.eye(4))
    assert np.allclose(part.gamma_cd, 0.5 * np.eye(4))
    assert np.allclose(part.sigma, 0.0)
    with pytest.raises(InvalidParameter):
        partition_four_mode(vacuum_cm(2))


def test_partition_roundtrip(rng):
    V = random_physical_cm(4, rng)
    assert np.allclose(partition_four_mode(V).reassemble().matrix, V.matrix)


def test_random_symplectic_invariants(rng):
    # 100 draws of the symplectic-form and physicality invariants
    for _ in range(100):
        n = int(rng.integers(1, 5))
        S = random_symplectic(n, rng)
        assert S.is_symplectic()
        M = S.matrix
        assert np.max(np.abs(M @ omega(n) @ M.T - omega(n))) < 1e-12
        V = random_physical_cm(n, rng)
        assert V.is_physical()
        assert V.asymmetry() == 0.0
        assert np.all(V.symplectic_eigenvalues() >= 0.5 - 1e-10)
        assert apply_symplectic(V, S).is_physical()


def test_composition_and_direct_sum():
    S = make_squeeze(0.2) @ make_local_unitary(0.1, 0.3, 0.4)
    assert S.is_symplectic()
    D = direct_sum(make_squeeze(0.1), make_squeeze(-0.2))
    assert D.modes == 2 and D.is_symplectic()


def test_non_physical_detected():
    bad = CovarianceMatrix(0.2 * np.eye(2))
    assert not bad.is_physical()
    skew = CovarianceMatrix(np.array([[1.0, 0.2], [0.1, 1.0]]))
    assert skew.asymmetry() == pytest.approx(0.1)
    assert not skew.is_physical()
    with pytest.raises(InvalidParameter):
        CovarianceMatrix(np.eye(3))
