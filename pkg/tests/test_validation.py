import math

import pytest

from src.services import validation as val
from src.utils.errors import ContractError


@pytest.mark.parametrize("check", [
    val.check_mat_exp,
    val.check_lindblad_semigroup,
    val.check_squeeze_inverse,
    val.check_parity_selection,
    val.check_logical_x,
    val.check_ker_phase_invariance,
    val.check_j_block_diagonal,
    val.check_channel_basis_invariance,
    val.check_band_propagator,
    val.check_uen_time,
], ids=lambda fn: fn.__name__)
def test_module_invariants_pass(check):
    value, threshold, passed, detail = check()
    assert passed, f"{value} ({threshold}) {detail}"


def test_scheme_agreement_row():
    value, _, passed, detail = val.check_scheme_agreement()
    assert passed
    assert value <= 1e-4
    assert detail.startswith("F_e")


def test_grape_recovery_bound_row():
    value, _, passed, detail = val.check_grape_recovery_bound()
    assert passed
    assert 0.0 < value <= 1.0
    assert "D = 432" in detail


def test_failed_check_becomes_row():
    def boom():
        raise ContractError("sin convergencia", {"iters": 3})

    row = val._run("boom", boom)
    assert not row.passed
    assert math.isnan(row.value)
    assert row.detail.startswith("ContractError")
    assert len(row.as_tuple()) == len(val.CheckResult.HEADER)


@pytest.mark.slow
def test_break_even_row_reports_nominal_point():
    value, _, passed, detail = val.check_break_even((0.01, 0.001))
    assert passed
    assert value == 0.001
    assert "κτ_w=0.01" in detail
