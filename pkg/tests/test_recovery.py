import math

import numpy as np
import pytest

from src.services.recovery import (
    AncillaSpace, build_recovery, build_uen, parity_projectors, uen_transfer_time,
)
from src.utils.errors import ContractError


@pytest.fixture(scope="module")
def qutrit(pair_8db, bases_8db):
    return build_recovery(pair_8db, bases_8db, "qutrit")


@pytest.fixture(scope="module")
def two_qubit(pair_8db, bases_8db):
    return build_recovery(pair_8db, bases_8db, "two-qubit")


def _joint(osc, anc, label):
    return np.kron(osc, anc.ket(label))


def test_ancilla_labels():
    assert AncillaSpace("qutrit").labels == ("g", "e", "f")
    pair = AncillaSpace("two-qubit")
    assert pair.dim == 4
    assert pair.level("e") == "e1g2"
    assert pair.level("f") == "g1e2"


@pytest.mark.parametrize("kind", ["qutrit", "two-qubit"])
def test_all_unitaries_are_unitary(kind, pair_8db, bases_8db):
    uni = build_recovery(pair_8db, bases_8db, kind)
    assert max(uni.residuals().values()) < 1e-10


def test_error_bases_are_orthonormal(bases_8db):
    for label in bases_8db.labels:
        z, o = bases_8db.pair(label)
        m = np.column_stack([z, o])
        np.testing.assert_allclose(m.conj().T @ m, np.eye(2), atol=1e-12)
    assert bases_8db.diagnostics["F3_code_overlap"] < 1e-12


def test_u1_maps_f1_to_code_and_excites(qutrit, pair_8db, bases_8db):
    anc = qutrit.anc
    z, o = bases_8db.pair("F1")
    np.testing.assert_allclose(qutrit.u1 @ _joint(z, anc, "g"), _joint(pair_8db.zero, anc, "e"), atol=1e-10)
    np.testing.assert_allclose(qutrit.u1 @ _joint(o, anc, "g"), _joint(pair_8db.one, anc, "e"), atol=1e-10)


def test_u2_routes_to_f(qutrit, pair_8db, bases_8db):
    anc = qutrit.anc
    z, _ = bases_8db.pair("F2")
    np.testing.assert_allclose(qutrit.u2 @ _joint(z, anc, "g"), _joint(pair_8db.zero, anc, "f"), atol=1e-10)


def test_u3_swaps_loss_space_with_code(qutrit, pair_8db, bases_8db):
    anc = qutrit.anc
    z, o = bases_8db.pair("F3")
    np.testing.assert_allclose(qutrit.u3 @ _joint(z, anc, "g"), _joint(pair_8db.zero, anc, "g"), atol=1e-10)
    np.testing.assert_allclose(qutrit.u3 @ _joint(pair_8db.one, anc, "g"), _joint(o, anc, "g"), atol=1e-10)
    # con la ancilla excitada Û₃ no toca el oscilador
    np.testing.assert_allclose(qutrit.u3 @ _joint(z, anc, "e"), _joint(z, anc, "e"), atol=1e-12)


def test_two_qubit_mappings(two_qubit, pair_8db, bases_8db):
    anc = two_qubit.anc
    z1, _ = bases_8db.pair("F1")
    z3, _ = bases_8db.pair("F3")
    np.testing.assert_allclose(
        two_qubit.u1 @ _joint(z1, anc, "g1g2"), _joint(pair_8db.zero, anc, "e1g2"), atol=1e-10,
    )
    np.testing.assert_allclose(
        two_qubit.u3 @ _joint(z3, anc, "g1g2"), _joint(pair_8db.zero, anc, "e1g2"), atol=1e-10,
    )


def test_parity_projectors():
    even, odd = parity_projectors(6)
    np.testing.assert_allclose(even + odd, np.eye(6))
    np.testing.assert_allclose(even @ odd, np.zeros((6, 6)))


def test_code_lives_in_code_parity(qutrit, pair_8db):
    pi_code, pi_flip = qutrit.parity_projectors()
    np.testing.assert_allclose(pi_code @ pair_8db.zero, pair_8db.zero, atol=1e-14)
    assert np.linalg.norm(pi_flip @ pair_8db.one) < 1e-14


def test_ua_restores_loss_error(qutrit, pair_8db, bases_8db):
    z, _ = bases_8db.pair("F3")
    np.testing.assert_allclose(qutrit.ua @ z, pair_8db.zero, atol=1e-10)


@pytest.mark.parametrize("kind,label", [("qutrit", "e"), ("qutrit", "f"), ("two-qubit", "g1e2"),
                                        ("two-qubit", "e1e2")])
def test_reset_gate_returns_to_ground(kind, label, pair_8db, bases_8db):
    uni = build_recovery(pair_8db, bases_8db, kind)
    gate = uni.reset_gate(label)
    np.testing.assert_allclose(gate @ uni.anc.ket(label), uni.anc.ket(uni.anc.level("g")), atol=1e-15)


def test_uen_transfer_time():
    anc = AncillaSpace("qutrit")
    t = uen_transfer_time(anc)
    assert t == pytest.approx(math.pi / (2 * math.sqrt(2)), abs=1e-8)
    assert uen_transfer_time(anc, coupling=2.0) == pytest.approx(t / 2, abs=1e-8)
    u = build_uen(anc, 1.0, t)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-12)
    with pytest.raises(ContractError):
        uen_transfer_time(anc, coupling=0.0)
