import numpy as np
import pytest

from cvdistill.distiller import (
    GaussianMixture,
    ProtocolParams,
    assemble_four_mode,
    condition_on_double_click,
    distill,
    success_probability,
)
from cvdistill.errors import InvalidParameter, ZeroSuccessProbability
from cvdistill.gaussian_core import partition_four_mode, tmss_cm, vacuum_cm


@pytest.mark.parametrize(
    "kwargs",
    [dict(r=-0.1), dict(r=0.1, T=0.0), dict(r=0.1, T=1.1), dict(r=0.1, eta=-0.2), dict(r=np.nan),
     dict(r=0.1, angles=(0.0, 1.0))],
)
def test_params_rejected(kwargs):
    with pytest.raises(InvalidParameter):
        ProtocolParams(**kwargs)


def test_params_symmetric_default():
    p = ProtocolParams(r=0.1, r_prime_a=0.2)
    assert p.r_prime_b == 0.2 and p.r_prime == 0.2


def test_all_vacuum_four_mode():
    V = assemble_four_mode(ProtocolParams.symmetric(0.0, 0.0, T=0.7))
    assert np.allclose(V.matrix, 0.5 * np.eye(8))


def test_transparent_splitters_leave_ancillas():
    part = partition_four_mode(assemble_four_mode(ProtocolParams.symmetric(0.3, 0.2, T=1.0)))
    assert np.allclose(part.gamma_cd, 0.5 * np.eye(4))
    assert np.allclose(part.sigma, 0.0)


def test_vacuum_never_clicks():
    with pytest.raises(ZeroSuccessProbability, match="zero success probability"):
        condition_on_double_click(vacuum_cm(4))


def test_vacuum_weights():
    # weights alone, without the p_succ guard
    from cvdistill.distiller import _inv_sqrt_det

    assert _inv_sqrt_det(np.eye(2)) == 1.0
    assert _inv_sqrt_det(np.eye(4)) == 1.0


def test_single_term_mixture():
    m = GaussianMixture((1.0,), (tmss_cm(0.2),))
    assert success_probability(m) == 1.0


def test_plain_ps_baseline():
    m = distill(ProtocolParams.symmetric(0.025, 0.0, 0.95))
    assert m.p_succ == pytest.approx(1.5645e-6, rel=1e-3)
    assert len(m) == 4
    assert m.weights[0] == 1.0


def test_p_succ_in_unit_interval(rng):
    for _ in range(30):
        p = ProtocolParams(r=rng.uniform(0.01, 0.6), r_prime_a=rng.uniform(-0.3, 0.3),
                           r_prime_b=rng.uniform(-0.3, 0.3), T=rng.uniform(0.5, 0.99),
                           eta=rng.uniform(0.2, 1.0), angles=tuple(rng.uniform(0, 2 * np.pi, 4)))
        m = distill(p)
        assert 0.0 < m.p_succ <= 1.0
        for cm in m.cms:
            assert cm.is_physical()


def test_p_succ_vanishes_with_r():
    ps = [distill(ProtocolParams.symmetric(r, 0.0)).p_succ for r in (0.1, 0.01, 0.001)]
    assert ps[0] > ps[1] > ps[2] > 0
    # leading order p ~ ((1 - T) tanh r)^2
    assert ps[1] / ps[2] == pytest.approx(100.0, rel=1e-3)


def test_conditioned_cms_physical():
    m = distill(ProtocolParams.symmetric(0.2, 0.1, 0.9, 0.5))
    assert all(cm.is_physical() for cm in m.cms)
    assert all(cm.matrix.shape == (4, 4) for cm in m.cms)


def test_matches_oracle_probability():
    from cvdistill.oracle import simulate_distillation_fock

    p = ProtocolParams.symmetric(0.1, 0.1, 0.9, 0.7)
    _, p_or = simulate_distillation_fock(p, 10)
    assert distill(p).p_succ == pytest.approx(p_or, rel=1e-6)
