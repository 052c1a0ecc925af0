import dataclasses

import numpy as np
import pytest

from src.services.channel import apply_channel, design_channel, j_matrix, kl_residuals, short_time_kraus
from src.services.fock import FockSpace
from src.utils.errors import ContractError, DimensionError


def test_j_is_block_diagonal_in_parity(kraus_8db):
    j = kraus_8db.j
    np.testing.assert_allclose(j, j.T, atol=1e-14)
    assert abs(j[0, 1]) < 1e-12
    assert abs(j[0, 2]) < 1e-12


def test_lambdas_and_labels(pair_8db, noise_8db, kraus_8db):
    lam = kraus_8db.lambdas
    assert kraus_8db.labels == ("F1", "F2", "F3")
    assert kraus_8db.parity_flip == (False, False, True)
    assert lam[0] <= lam[1]
    # F2 es casi la identidad
    assert 0.5 < lam[1] <= 1.0
    mean_n = float(np.real(np.vdot(pair_8db.zero, np.arange(pair_8db.dim) * pair_8db.zero)))
    assert lam[2] == pytest.approx(noise_8db.kappa * noise_8db.tau * mean_n, rel=1e-8)


def test_v_is_orthogonal(kraus_8db):
    v = kraus_8db.v
    np.testing.assert_allclose(v.T @ v, np.eye(3), atol=1e-13)
    np.testing.assert_allclose(v.T @ kraus_8db.j @ v, np.diag(kraus_8db.lambdas), atol=1e-13)


def test_f3_is_scaled_loss(kraus_8db):
    np.testing.assert_allclose(kraus_8db.by_label("F3"), kraus_8db.a_ops[0], atol=1e-15)


def test_completeness_is_unchanged_by_rotation(kraus_8db):
    ref = sum(a.conj().T @ a for a in kraus_8db.a_ops)
    np.testing.assert_allclose(kraus_8db.completeness(), ref, atol=1e-12)


def test_kl_residuals_are_small(pair_8db, kraus_8db):
    res = kl_residuals(pair_8db, kraus_8db.f_ops, kraus_8db.lambdas)
    assert set(res) == {"F1F1", "F1F2", "F1F3", "F2F2", "F2F3", "F3F3"}
    assert max(res.values()) < 1e-3
    # F3 cambia la paridad: no se mezcla con F1/F2 dentro del código
    assert res["F1F3"] < 1e-12
    assert res["F2F3"] < 1e-12


def test_smallness_diagnostics(kraus_8db):
    diag = kraus_8db.diagnostics
    assert diag["kappa_tau_n"] > 0.0
    assert diag["kappa_phi_tau_n2"] > 0.0
    assert diag["kl_residual_max"] < 1e-3


def test_j_matrix_requires_three_operators(pair_8db, noise_8db):
    ops = short_time_kraus(pair_8db.space, noise_8db)
    with pytest.raises(DimensionError):
        j_matrix(pair_8db, ops[:2])


def test_apply_channel_hermitian_flag(noise_8db):
    ops = short_time_kraus(FockSpace(8), noise_8db)
    coh = np.zeros((8, 8), dtype=complex)
    coh[0, 2] = 1.0
    linear = apply_channel(ops, coh, hermitian=False)
    expected = sum(k @ coh @ k.conj().T for k in ops)
    np.testing.assert_allclose(linear, expected, atol=1e-15)
    sym = apply_channel(ops, coh)
    np.testing.assert_allclose(sym, 0.5 * (expected + expected.conj().T), atol=1e-15)
    with pytest.raises(DimensionError):
        apply_channel(ops, np.eye(4, dtype=complex))


def test_raw_expansion_overshoots_trace(kraus_8db):
    # Â₃†Â₃ deja un término (κτn̂/2 + κ_φτn̂²/2)² sin compensar
    assert kraus_8db.diagnostics["trace_excess"] > 0.0
    assert kraus_8db.diagnostics["trace_excess"] == pytest.approx(float(np.sum(kraus_8db.lambdas)) - 1.0)


def test_design_channel_preserves_trace_on_code(pair_8db, kraus_8db):
    ops = design_channel(pair_8db, kraus_8db)
    rho = np.outer(pair_8db.zero + 1j * pair_8db.one, (pair_8db.zero + 1j * pair_8db.one).conj()) / 2.0
    assert np.real(np.trace(apply_channel(kraus_8db.f_ops, rho))) > 1.0 + 1e-3
    assert np.real(np.trace(apply_channel(ops, rho))) == pytest.approx(1.0, abs=1e-8)


def test_design_channel_rejects_inconsistent_lambdas(pair_8db, kraus_8db):
    broken = dataclasses.replace(kraus_8db, lambdas=2.0 * kraus_8db.lambdas)
    with pytest.raises(ContractError):
        design_channel(pair_8db, broken)
