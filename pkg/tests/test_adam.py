import numpy as np
import pytest

from src.protocol.schema import AdamConfig
from src.services.adam import Adam, minimize


def test_first_step_is_sign_scaled():
    opt = Adam(lr=0.1)
    x = np.array([1.0, -2.0, 0.5])
    opt.step(x, np.array([3.0, -0.5, 1e-3]))
    np.testing.assert_allclose(x, [0.9, -1.9, 0.4], atol=1e-4)


def test_rejects_bad_hyperparameters():
    with pytest.raises(ValueError):
        Adam(lr=0.0)
    with pytest.raises(ValueError):
        Adam(beta1=1.0)


def test_quadratic_converges():
    center = np.array([0.3, -1.2, 2.0])

    def objective(x):
        d = x - center
        return float(d @ d), 2.0 * d

    cfg = AdamConfig(learning_rate=0.05, max_iters=20000, target_loss=1e-4, log_every=5000)
    res = minimize(objective, np.zeros(3), cfg, label="cuadrática")
    assert res.converged
    assert res.loss <= 1e-4
    assert res.history[0] == pytest.approx(float(center @ center))
    np.testing.assert_allclose(res.params, center, atol=1e-2)


def test_stall_is_reported():
    cfg = AdamConfig(max_iters=1000, target_loss=0.0)
    res = minimize(lambda x: (1.0, np.zeros_like(x)), np.zeros(2), cfg, stall_window=5)
    assert res.stalled
    assert not res.converged
    assert res.iterations < 10


def test_zero_iterations_evaluates_once():
    cfg = AdamConfig(max_iters=0, target_loss=0.0)
    res = minimize(lambda x: (float(x @ x) + 1.0, 2 * x), np.ones(2), cfg)
    assert res.history == [3.0]
    np.testing.assert_allclose(res.params, np.ones(2))
