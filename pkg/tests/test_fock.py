import math

import numpy as np
import pytest

from src.services.fock import (
    FockSpace, SqueezeParams, check_tail, db_to_r, displace_operator, displace_state, ladder_ops,
    mean_photon_number, overlap_analytic, overlap_matrix, r_to_db, squeeze_operator, squeezed_fock_state,
    wigner_grid,
)
from src.utils.errors import ContractError, TruncationError


def test_db_conversion():
    assert db_to_r(8.0) == pytest.approx(0.92103, abs=1e-5)
    assert r_to_db(db_to_r(5.0)) == pytest.approx(5.0)


def test_sizing_rule():
    assert FockSpace.for_squeezing(0.921, n_max=1).dim == 184
    assert FockSpace.for_squeezing(0.0, n_max=1).dim == 32
    assert FockSpace.for_squeezing(1.5, n_max=2).dim % 8 == 0


def test_space_contract():
    with pytest.raises(ContractError):
        FockSpace(3)
    with pytest.raises(ContractError):
        FockSpace(16, pad=8)
    assert FockSpace(16).pad == 32


def test_ladder_ops():
    a, a_dag, n = ladder_ops(FockSpace(8))
    np.testing.assert_allclose(a_dag @ a, n, atol=1e-14)
    np.testing.assert_allclose(np.diag(n).real, np.arange(8))


def test_overlap_closed_forms():
    r = 0.7
    p = SqueezeParams(r)
    assert overlap_analytic(0, 0, p) == pytest.approx(1 / math.sqrt(math.cosh(r)), rel=1e-14)
    assert overlap_analytic(2, 0, p) == pytest.approx(-math.tanh(r) / math.sqrt(2 * math.cosh(r)), rel=1e-13)
    assert overlap_analytic(3, 0, p) == 0.0
    assert overlap_analytic(4, 4, SqueezeParams(0.0)) == 1.0


@pytest.mark.parametrize("r", [0.25, 0.5, 0.921])
def test_overlap_matches_exponential(r):
    space = FockSpace(dim=160, pad=320, n_max=10)
    s = squeeze_operator(space, SqueezeParams(r)).real
    np.testing.assert_allclose(overlap_matrix(11, SqueezeParams(r)), s[:11, :11], atol=1e-10)


def test_insufficient_padding_detected():
    with pytest.raises(TruncationError):
        squeeze_operator(FockSpace(dim=8, pad=10), SqueezeParams(1.5))


def test_state_methods_agree():
    space = FockSpace.for_squeezing(0.5, n_max=3)
    a = squeezed_fock_state(space, 3, SqueezeParams(0.5), method="expm")
    b = squeezed_fock_state(space, 3, SqueezeParams(0.5), method="analytic")
    np.testing.assert_allclose(a, b, atol=1e-10)


@pytest.mark.parametrize("n,r", [(0, 0.5), (1, 0.921), (2, -0.6)])
def test_mean_photon_number_closed_form(n, r):
    space = FockSpace.for_squeezing(r, n_max=n)
    state = squeezed_fock_state(space, n, SqueezeParams(r))
    assert mean_photon_number(state) == pytest.approx(n + (2 * n + 1) * math.sinh(r) ** 2, rel=1e-10)


def test_opposite_squeezing_overlap():
    space = FockSpace.for_squeezing(1.0, n_max=1)
    plus = squeezed_fock_state(space, 1, SqueezeParams(1.0))
    minus = squeezed_fock_state(space, 1, SqueezeParams(-1.0))
    assert abs(np.vdot(minus, plus)) == pytest.approx(math.cosh(2.0) ** -1.5, abs=1e-10)


def test_tail_check():
    space = FockSpace(16)
    state = np.zeros(16, dtype=complex)
    state[15] = 1.0
    with pytest.raises(TruncationError):
        check_tail(space, state)
    state = np.zeros(16, dtype=complex)
    state[2] = 1.0
    assert check_tail(space, state) == 0.0


def test_coherent_state_amplitudes():
    space = FockSpace(40)
    beta = 0.7 + 0.3j
    vac = np.zeros(40, dtype=complex)
    vac[0] = 1.0
    out = displace_state(space, beta, vac)
    ks = np.arange(6)
    expected = np.exp(-abs(beta) ** 2 / 2) * beta ** ks / np.sqrt([math.factorial(k) for k in ks])
    np.testing.assert_allclose(out[:6], expected, atol=1e-12)
    np.testing.assert_allclose(displace_operator(space, beta)[:, 0][:6], expected, atol=1e-12)


def test_wigner_vacuum():
    vac = np.zeros(24, dtype=complex)
    vac[0] = 1.0
    xs = np.array([0.0, 0.5, -1.0])
    w = wigner_grid(vac, xs, xs)
    expected = np.exp(-(xs[:, None] ** 2 + xs[None, :] ** 2)) / math.pi
    np.testing.assert_allclose(w, expected, atol=1e-12)


def test_wigner_fock_one_is_negative_at_origin():
    one = np.zeros(24, dtype=complex)
    one[1] = 1.0
    assert wigner_grid(one, [0.0], [0.0])[0, 0] == pytest.approx(-1 / math.pi, abs=1e-12)
