import numpy as np
import pytest

from src.numerics.linalg import partial_trace_second
from src.protocol.schema import QECCycleConfig
from src.services.qec_cycle import (
    BreakEvenReport, QECSimulator, autonomous_cycle, break_even_report, double_loss_probability,
    entanglement_fidelity, fidelity_timeseries, haar_fidelity, logical_transfer_tensor, recovery_kraus,
    richardson_ratio, six_state_fidelity, state_fidelity,
)
from src.utils.errors import ContractError, DimensionError

CFG = QECCycleConfig(kappa=1.0, kappa_phi=1.0 / 8.5, tau_w=0.01, cycles=3)


@pytest.fixture(scope="module")
def sim_kraus(pair_8db):
    return QECSimulator(pair_8db, CFG, "kraus")


def _dephasing(p):
    z = np.diag([1.0, -1.0]).astype(complex)
    return lambda rho: (1 - p) * rho + p * z @ rho @ z


def test_transfer_tensor_starts_at_identity():
    basis = (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex))
    t = logical_transfer_tensor(basis, _dephasing(0.1), 2)
    np.testing.assert_allclose(t[0], np.einsum("ki,lj->klij", np.eye(2), np.eye(2)))
    assert six_state_fidelity(t[0]) == pytest.approx(1.0)


def test_fidelity_conventions_on_dephasing():
    p = 0.12
    basis = (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex))
    t = logical_transfer_tensor(basis, _dephasing(p), 1)[1]
    assert entanglement_fidelity(t) == pytest.approx(1 - p)
    assert haar_fidelity(t) == pytest.approx(1 - 2 * p / 3)
    # seis estados forman un 2-diseño: coincide con el promedio de Haar
    assert six_state_fidelity(t) == pytest.approx(haar_fidelity(t))
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    assert state_fidelity(t, plus) == pytest.approx(1 - p)


def test_state_fidelity_normalized_on_leaky_map():
    basis = (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex))
    t = logical_transfer_tensor(basis, lambda rho: 0.5 * rho, 1)[1]
    c = np.array([1, 0], dtype=complex)
    assert state_fidelity(t, c) == pytest.approx(0.5)
    assert state_fidelity(t, c, normalize=True) == pytest.approx(1.0)


@pytest.mark.parametrize("scheme", ["autonomous", "parity"])
def test_recovery_kraus_is_complete(pair_8db, bases_8db, scheme):
    from src.services.recovery import build_recovery
    uni = build_recovery(pair_8db, bases_8db, "qutrit")
    ops = recovery_kraus(uni, scheme)
    total = sum(k.conj().T @ k for k in ops)
    np.testing.assert_allclose(total, np.eye(pair_8db.dim), atol=1e-10)


def test_recovery_kraus_unknown_scheme(sim_kraus):
    with pytest.raises(ValueError):
        recovery_kraus(sim_kraus.uni, "bang-bang")


def test_joint_cycle_matches_reduced(sim_kraus, pair_8db):
    rho = np.outer(pair_8db.zero + pair_8db.one, (pair_8db.zero + pair_8db.one).conj()) / 2
    joint = sim_kraus.joint_cycle(sim_kraus.embed(rho))
    osc = partial_trace_second(joint, pair_8db.dim, sim_kraus.uni.anc.dim)
    np.testing.assert_allclose(osc, sim_kraus.cycle(rho), atol=1e-10)


def test_joint_cycle_checks_ancilla(sim_kraus, pair_8db):
    rho = np.outer(pair_8db.zero, pair_8db.zero.conj())
    excited = np.kron(rho, sim_kraus.uni.anc.op("e", "e"))
    with pytest.raises(ContractError):
        autonomous_cycle(excited, sim_kraus.uni, CFG, sim_kraus.noise)
    with pytest.raises(DimensionError):
        autonomous_cycle(rho, sim_kraus.uni, CFG, sim_kraus.noise)


def test_designed_noise_is_corrected(sim_kraus, pair_8db):
    t = logical_transfer_tensor(pair_8db.codewords(), sim_kraus.cycle, 1)[1]
    idle = logical_transfer_tensor(pair_8db.codewords(), sim_kraus.idle, 1)[1]
    assert six_state_fidelity(t) > 1 - 1e-4
    assert six_state_fidelity(t) > six_state_fidelity(idle)


def test_noiseless_run(pair_8db):
    rows = fidelity_timeseries(CFG, pair_8db, noise_model="none")
    assert len(rows) == CFG.cycles + 1
    for row in rows:
        assert row.uncorrected == pytest.approx(1.0, abs=1e-12)
        assert row.baseline == pytest.approx(1.0, abs=1e-12)
        # el código sólo es aproximadamente F2: la recuperación sin ruido no es exacta
        assert row.corrected > 0.99


def test_timeseries_with_lindblad_noise(pair_8db):
    rows = fidelity_timeseries(CFG, pair_8db)
    assert rows[0].corrected == pytest.approx(1.0, abs=1e-12)
    assert rows[0].time == 0.0
    assert rows[-1].time == pytest.approx(3 * CFG.tau_w)
    assert rows[-1].corrected > rows[-1].uncorrected
    assert all(0.0 <= r.baseline_haar <= 1.0 for r in rows)
    assert len(rows[0].as_tuple()) == 7


def test_parity_scheme_runs(pair_8db):
    cfg = CFG.model_copy(update={"scheme": "parity", "cycles": 2})
    rows = fidelity_timeseries(cfg, pair_8db)
    assert rows[-1].corrected > rows[-1].uncorrected


def test_unknown_noise_model(pair_8db):
    with pytest.raises(ValueError):
        QECSimulator(pair_8db, CFG, "thermal")


@pytest.mark.slow
def test_error_order_in_tau():
    from src.services.kl import build_pair
    pair = build_pair("ours", 1, 0.921)
    cfg = CFG.model_copy(update={"tau_w": 0.004})
    assert richardson_ratio(pair, cfg, corrected=False) == pytest.approx(2.0, abs=0.3)
    assert richardson_ratio(pair, cfg, corrected=True) > 3.0


def test_double_loss_floor_at_8db(pair_8db):
    n = np.arange(pair_8db.dim)
    mean_n = float(np.real(np.vdot(pair_8db.zero, n * pair_8db.zero)))
    n2 = float(np.real(np.vdot(pair_8db.zero, n ** 2 * pair_8db.zero)))
    p2 = double_loss_probability(pair_8db, CFG)
    assert p2 == pytest.approx(0.5 * 0.01 ** 2 * (n2 - mean_n), rel=1e-6)
    # el cúbit de Fock pierde ≈ κτ_w/3 por ciclo; el piso de doble pérdida lo supera
    assert p2 > 0.01 / 3.0
    assert double_loss_probability(pair_8db, CFG.model_copy(update={"tau_w": 0.001})) < 0.001 / 3.0


def test_break_even_report_properties():
    rep = BreakEvenReport(tau_w=0.01, margins=(-1e-4, 2e-4, -1e-5, 3e-4, 4e-4), double_loss=1e-3,
                          baseline_infidelity=3e-3)
    assert rep.holds
    assert rep.first_cycle_above == 4
    assert rep.min_margin == pytest.approx(-1e-4)
    assert not rep.floor_exceeds_baseline
    assert BreakEvenReport(0.01, (1e-4, -1e-4), 1e-2, 3e-3).first_cycle_above is None


@pytest.mark.slow
def test_no_break_even_at_nominal_wait(pair_8db):
    cfg = CFG.model_copy(update={"cycles": 20})
    rep = break_even_report(pair_8db, cfg)
    assert rep.floor_exceeds_baseline
    assert not rep.holds
    assert rep.first_cycle_above is None


@pytest.mark.slow
def test_break_even_at_short_wait(pair_8db):
    cfg = CFG.model_copy(update={"tau_w": 0.001, "cycles": 10})
    rep = break_even_report(pair_8db, cfg)
    assert not rep.floor_exceeds_baseline
    assert rep.holds
    assert rep.first_cycle_above is not None and rep.first_cycle_above <= 2


def test_kraus_noise_keeps_fidelities_physical(pair_8db):
    rows = fidelity_timeseries(CFG.model_copy(update={"cycles": 5}), pair_8db, "kraus")
    for row in rows:
        for value in row.as_tuple()[1:]:
            assert 0.0 <= value <= 1.0 + 1e-6
    assert rows[-1].corrected > rows[-1].uncorrected


def test_schemes_agree_on_entanglement_fidelity(pair_8db):
    cfg = CFG.model_copy(update={"cycles": 1})
    fe = {}
    for scheme in ("autonomous", "parity"):
        sim = QECSimulator(pair_8db, cfg.model_copy(update={"scheme": scheme}), "lindblad")
        fe[scheme] = entanglement_fidelity(logical_transfer_tensor(pair_8db.codewords(), sim.cycle, 1)[1])
    assert fe["autonomous"] == pytest.approx(fe["parity"], abs=1e-4)
    assert fe["autonomous"] < 1.0
