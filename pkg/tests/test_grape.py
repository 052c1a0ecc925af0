import math

import numpy as np
import pytest

from src.protocol.schema import GrapeSettings, NoiseParams
from src.services.grape import (
    GrapeProblem, PulseGrid, displacement_target, fidelity, gradient_exact, gradient_fd,
    grape_optimize, reachable_fidelity_bound, recovery_target, total_propagator,
)
from src.utils.errors import ContractError, DimensionError

OSC_DIM = 8


def _problem(segments=4, beta=0.3, total_time=1e-4):
    return GrapeProblem(
        chi_e=1.0, chi_f=1.0, segments=segments, total_time=total_time, osc_dim=OSC_DIM,
        target=displacement_target(OSC_DIM, beta),
    )


def _random_grid(problem, seed=0, scale=0.2):
    rng = np.random.default_rng(seed)
    return PulseGrid.from_dimensionless(rng.normal(0.0, scale, 2 * problem.segments), problem.total_time)


def test_pulse_grid_contracts():
    with pytest.raises(DimensionError):
        PulseGrid(np.zeros(3), np.zeros(4))
    with pytest.raises(ContractError):
        PulseGrid(np.array([np.nan]), np.array([0.0]))
    grid = PulseGrid(np.array([1.0, -2.0]), np.array([0.5, 0.0]))
    assert grid.segments == 2
    assert grid.max_amplitude() == 2.0
    assert grid.refined(3).segments == 6
    np.testing.assert_allclose(grid.dimensionless(2.0), [2.0, -4.0, 1.0, 0.0])


def test_problem_rejects_wrong_target():
    with pytest.raises(DimensionError):
        GrapeProblem(1.0, 1.0, 4, 1e-4, OSC_DIM, np.eye(OSC_DIM, dtype=complex))
    with pytest.raises(ContractError):
        GrapeProblem(1.0, 1.0, 0, 1e-4, OSC_DIM, displacement_target(OSC_DIM, 0.1))


def test_propagator_is_unitary():
    problem = _problem()
    u = total_propagator(problem, _random_grid(problem))
    np.testing.assert_allclose(u.conj().T @ u, np.eye(problem.joint_dim), atol=1e-12)


def test_exact_gradient_matches_finite_differences():
    problem = _problem(total_time=1.0)
    grid = _random_grid(problem, seed=4)
    phi, g_exact = gradient_exact(problem, grid)
    g_fd = gradient_fd(problem, grid)
    assert phi == pytest.approx(fidelity(problem, grid), abs=1e-12)
    np.testing.assert_allclose(g_exact, g_fd, rtol=1e-5, atol=1e-8)


def test_bound_dominates_fidelity():
    problem = _problem()
    for seed in range(3):
        assert fidelity(problem, _random_grid(problem, seed)) <= reachable_fidelity_bound(problem) + 1e-12
    assert reachable_fidelity_bound(problem) == pytest.approx(1.0)


def test_constant_p_drive_realizes_displacement():
    problem = _problem(beta=0.3)
    x_p = 0.3 * math.sqrt(2.0) / problem.segments
    grid = PulseGrid.from_dimensionless(
        np.concatenate([np.zeros(problem.segments), np.full(problem.segments, x_p)]), problem.total_time,
    )
    assert fidelity(problem, grid) > 1 - 1e-4


def test_optimizer_reaches_displacement():
    problem = _problem(beta=0.3)
    settings = GrapeSettings(segments=4, osc_dim=OSC_DIM, iters=400, learning_rate=0.05)
    res = grape_optimize(problem, settings, seed=1)
    assert res.fidelity > 0.99
    assert res.history[-1] <= res.fidelity + 1e-12
    assert res.as_dict()["frame"].startswith("rotating")


def test_amplitude_bound_is_respected():
    problem = GrapeProblem(1.0, 1.0, 4, 1e-4, OSC_DIM, displacement_target(OSC_DIM, 0.3), amplitude_bound=500.0)
    settings = GrapeSettings(segments=4, osc_dim=OSC_DIM, iters=50, learning_rate=0.05, amplitude_bound=500.0)
    res = grape_optimize(problem, settings, seed=2)
    assert res.grid.max_amplitude() <= 500.0


@pytest.mark.slow
def test_recovery_target_is_not_reachable_exactly():
    target = recovery_target(40, 1, 0.5, "plus", NoiseParams.from_ratio(1.0, 8.5, 0.01))
    np.testing.assert_allclose(target.conj().T @ target, np.eye(target.shape[0]), atol=1e-8)
    problem = GrapeProblem(1.0, 1.0, 4, 1e-4, 40, target)
    assert reachable_fidelity_bound(problem) < 1.0
