import numpy as np
import pytest

from src.services.kl import (
    ErrorSet, build_pair, compare_codes, fit_log_slope, k_er, ker_scan, ker_series, kl_tensor,
    offdiag_moment, offdiag_series, series_scan,
)


def test_error_set_validation():
    with pytest.raises(ValueError):
        ErrorSet(("a",), ("a",))
    with pytest.raises(ValueError):
        ErrorSet(("I", "x"), ("", "x"))
    with pytest.raises(ValueError):
        ErrorSet.named("amplitude")
    assert ErrorSet.combined().labels == ("I", "a", "n", "n2")


@pytest.mark.parametrize("branch", ["plus", "minus"])
def test_ker_at_8db(branch):
    pair = build_pair("ours", 1, 0.921, branch)
    value = k_er(kl_tensor(pair, ErrorSet.combined())).k_er
    assert 1e-7 <= value <= 1e-5


def test_frame_and_vector_agree(pair_8db):
    frame = kl_tensor(pair_8db, ErrorSet.combined(), method="frame")
    vector = kl_tensor(pair_8db, ErrorSet.combined(), method="vector")
    np.testing.assert_allclose(frame.m00, vector.m00, atol=1e-9)
    np.testing.assert_allclose(frame.m01, vector.m01, atol=1e-9)
    assert k_er(frame).k_er == pytest.approx(k_er(vector).k_er, rel=1e-4)


def test_identity_block_is_orthonormal(pair_8db):
    t = kl_tensor(pair_8db, ErrorSet.combined())
    assert t.m00[0, 0].real == pytest.approx(1.0, abs=1e-12)
    assert abs(t.m01[0, 0]) < 1e-10


def test_ker_decomposition(pair_8db):
    rep = k_er(kl_tensor(pair_8db, ErrorSet.combined()))
    assert rep.k_er == pytest.approx(rep.diag_part + rep.offdiag_part)
    assert sum(rep.per_term.values()) == pytest.approx(rep.k_er)
    # (Î, Î) aporta 0 porque las palabras código son ortonormales
    assert rep.per_term[("I", "I")] < 1e-20


def test_squeezed_fock_is_worse_than_code():
    ours = k_er(kl_tensor(build_pair("ours", 1, 1.5), ErrorSet.combined())).k_er
    sqfock = k_er(kl_tensor(build_pair("sqfock", 1, 1.5), ErrorSet.combined())).k_er
    assert ours < sqfock


def test_series_matches_numeric_at_large_r():
    pair = build_pair("ours", 1, 2.0, "plus")
    for m in range(1, 5):
        num = offdiag_moment(pair, m)
        ser = offdiag_series(m, 2.0, "plus")
        assert num == pytest.approx(ser, rel=0.05), m


def test_ker_series_consistent_with_moments():
    r = 2.2
    expected = sum(w * offdiag_series(m, r) ** 2 for m, w in ((1, 3), (2, 3), (3, 2), (4, 1)))
    assert ker_series(r) == pytest.approx(expected)


def test_offdiag_series_range():
    with pytest.raises(ValueError):
        offdiag_series(5, 1.0)


def test_scan_keeps_grid_order():
    rs = [0.6, 0.8, 1.0]
    rows = ker_scan([1], rs, branches=("plus", "minus"), threads=2)
    assert [(r.branch, r.r) for r in rows] == [("plus", r) for r in rs] + [("minus", r) for r in rs]
    assert all(r.error == "" for r in rows)
    with pytest.raises(ValueError):
        ker_scan([1], [1.0, 0.6])


def test_fit_log_slope_exact():
    rs = np.linspace(1.0, 2.0, 5)
    assert fit_log_slope(rs, 3.0 * np.exp(-14.0 * rs)) == pytest.approx(-14.0)


def test_scaling_exponent_n1():
    rs = list(np.linspace(1.2, 2.2, 4))
    rows = ker_scan([1], rs)
    assert fit_log_slope(rs, [r.k_er for r in rows]) == pytest.approx(-14.0, abs=1.5)


@pytest.mark.slow
def test_scaling_exponents_full():
    rs = list(np.linspace(1.2, 2.2, 8))
    for family, n, target, tol in (("ours", 1, -14, 1.5), ("ours", 2, -10, 1.5), ("sqfock", 1, -6, 1.0)):
        rows = ker_scan([n], rs, family=family)
        assert fit_log_slope(rs, [r.k_er for r in rows]) == pytest.approx(target, abs=tol)


def test_series_scan_rows():
    rows = series_scan([1.5, 2.0], "plus", threads=2)
    assert [r.r for r in rows] == [1.5, 2.0]
    assert len(rows[0].numeric) == 4


def test_compare_codes():
    rows = compare_codes(0.921)
    assert len(rows) == 9
    by = {(r.family, r.error_set): r for r in rows}
    assert by[("ours", "combined")].orthogonal
    assert not by[("sqfock", "loss")].orthogonal
    assert by[("ours", "combined")].k_er < by[("sqfock", "combined")].k_er
