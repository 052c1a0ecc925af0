import numpy as np
import pytest

from src.protocol.schema import AdamConfig
from src.services.kl import build_pair
from src.services.zl_synthesis import (
    VariationalAnsatz, build_hz, build_zl, fixture_loss, ideal_z, initial_ansatz,
    loss_and_gradient_exact, loss_and_gradient_fd, optimize_zl, zl_loss,
)
from src.utils.errors import ContractError, ConventionError


@pytest.fixture(scope="module")
def pair():
    return build_pair("ours", 1, 0.5)


def test_ideal_z_has_zero_loss(pair):
    assert zl_loss(pair, ideal_z(pair)) < 1e-20


def test_identity_loss(pair):
    # Ẑ = Î falla sólo en |1_L⟩: dos términos de |1 − (−1)|²
    assert zl_loss(pair, np.eye(pair.dim, dtype=complex)) == pytest.approx(8.0)


def test_norm_dim_must_match(pair):
    ansatz = VariationalAnsatz.nonhermitian5(pair.dim + 8)
    with pytest.raises(ConventionError):
        build_hz(ansatz, pair.space)


def test_hermitian_ansatz_gives_unitary(pair):
    ansatz = initial_ansatz("hermitian", pair.dim, seed=3, order=3)
    h = build_hz(ansatz, pair.space)
    np.testing.assert_allclose(h, h.conj().T, atol=1e-14)
    z = build_zl(ansatz, pair.space)
    np.testing.assert_allclose(z.conj().T @ z, np.eye(pair.dim), atol=1e-10)


def test_basis_labels():
    ansatz = VariationalAnsatz.nonhermitian5(16)
    assert ansatz.basis_labels == ["I", "a†^2", "a^2", "a†a", "a†^2a^2"]
    assert ansatz.params().size == 10


@pytest.mark.parametrize("kind", ["hermitian", "nonhermitian5"])
def test_exact_gradient_matches_finite_differences(pair, kind):
    ansatz = initial_ansatz(kind, pair.dim, seed=7, order=3)
    loss_e, g_e = loss_and_gradient_exact(pair, ansatz)
    loss_f, g_f = loss_and_gradient_fd(pair, ansatz)
    assert loss_e == pytest.approx(loss_f, rel=1e-8)
    np.testing.assert_allclose(g_e, g_f, rtol=1e-5, atol=1e-7 * np.max(np.abs(g_f)))


def test_initial_ansatz_is_seeded():
    a = initial_ansatz("nonhermitian5", 32, seed=1)
    b = initial_ansatz("nonhermitian5", 32, seed=1)
    np.testing.assert_array_equal(a.coeffs, b.coeffs)
    assert a.as_dict()["norm_dim"] == 32


def test_fixture_loss_is_reported(pair):
    assert fixture_loss(pair) >= 0.0


def test_fixture_loss_maps_numerical_failure_to_inf(pair, monkeypatch):
    import src.services.zl_synthesis as zl

    def overflow(*_args, **_kwargs):
        raise ContractError("mat_exp: contiene NaN/Inf")

    monkeypatch.setattr(zl, "build_zl", overflow)
    assert fixture_loss(pair) == float("inf")


def test_fixture_loss_does_not_hide_programming_errors(pair, monkeypatch):
    import src.services.zl_synthesis as zl

    def broken(*_args, **_kwargs):
        raise TypeError("firma incorrecta")

    monkeypatch.setattr(zl, "build_zl", broken)
    with pytest.raises(TypeError):
        fixture_loss(pair)


def test_short_optimization_improves(pair):
    cfg = AdamConfig(learning_rate=0.01, max_iters=30, target_loss=0.0, log_every=10)
    best, result = optimize_zl(pair, "hermitian", cfg, seed=0, order=3, gradient="exact")
    assert result.loss <= result.history[0]
    assert best.diagnostics["loss"] == result.loss
    assert zl_loss(pair, build_zl(best, pair.space)) == pytest.approx(result.loss, rel=1e-9)


@pytest.mark.slow
def test_optimization_reaches_target():
    pair = build_pair("ours", 1, 0.921)
    cfg = AdamConfig(learning_rate=0.02, max_iters=4000, target_loss=1e-3)
    _, result = optimize_zl(pair, "hermitian", cfg, seed=0, order=4, gradient="exact")
    assert result.converged
