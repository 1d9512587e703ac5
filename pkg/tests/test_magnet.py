from __future__ import annotations

import math

import numpy as np
import pytest

from fxxz.exactalg import RPoly, TruncatedQSeries
from fxxz.magnet import (boundary_mag, boundary_mag_regression, boundary_target_series, conjecture_series,
                         fig10_data, fracture_mag, magnetisation_report, magnetisation_series,
                         spontaneous_mag, special_cases)
from fxxz.model import FieldMap, q_from_delta

from oracles import as_dict, jacobi_squares, lambert_double_sum

Q = 24


@pytest.fixture(scope="module")
def measured():
    return magnetisation_series(0, Q)


def test_low_orders(measured):
    # 1 - 2(1-r)q^2 + 2(1-r)q^4 - 2(1-r)(1+r)q^6 + 2(1-r)q^8
    one_minus_r = RPoly({0: 1, 1: -1})
    want = TruncatedQSeries({0: 1, 2: one_minus_r * -2, 4: one_minus_r * 2,
                             6: RPoly({0: -2, 2: 2}), 8: one_minus_r * 2}, 8)
    assert measured.truncate(8) == want


def test_matches_conjecture(measured):
    assert measured == conjecture_series(Q)
    assert magnetisation_report(0, Q).first_mismatch_order is None


def test_conjecture_against_double_sum_oracle():
    assert as_dict(conjecture_series(40)) == lambert_double_sum(40, 4, 1)


def test_spontaneous_point(measured):
    # r = -1 gives the squared theta series 1 - 4q^2 + 4q^4 + 0q^6 + 4q^8 ...
    got = measured.subs_r(-1)
    assert as_dict(got) == jacobi_squares(Q)
    assert [got.coeff(k) for k in (0, 2, 4, 6, 8)] == [1, -4, 4, 0, 4]


def test_zero_r_and_full_polarisation(measured):
    rows = {row["r"]: row for row in special_cases(measured)}
    assert all(row["match"] for row in rows.values())
    assert measured.subs_r(1) == TruncatedQSeries.one(Q)


def test_r_degree_bound(measured):
    # the q^k coefficient has r-degree at most k/4 + 1
    for k in range(0, Q + 1, 2):
        c = measured.coeff(k)
        if c:
            assert c.max_degree <= k // 4 + 1


def test_i1_is_r_inverted_with_sign():
    rep = magnetisation_report(1, 16)
    assert rep.ok
    assert magnetisation_series(1, 16) == magnetisation_series(0, 16).subs_r_inverse().scale(-1)


def test_boundary_target_examples():
    t = boundary_target_series(8)
    one_minus_r_sq = RPoly({0: 1, 1: -2, 2: 1})
    assert t.coeff(2) == one_minus_r_sq * -2
    assert as_dict(t) == lambert_double_sum(8, 2, 2)


def test_boundary_regression_low_order():
    rep = boundary_mag_regression(16)
    assert rep.ok, rep.mismatch_detail()


@pytest.mark.parametrize("q,r", [(-0.3, 0.4), (-0.25, -0.6), (-0.2, 0.9)])
def test_numeric_curve_matches_series(measured, q, r):
    assert abs(-measured.evaluate(q, r) - fracture_mag(q, r)) < 1e-8


def test_known_values():
    q = -0.3
    assert math.isclose(fracture_mag(q, -1.0), spontaneous_mag(q), rel_tol=1e-12)
    assert math.isclose(fracture_mag(q, 0.0), boundary_mag(q, 0.0), rel_tol=1e-12)
    assert fracture_mag(q, 1.0) == -1.0


# -- curve data ---------------------------------------------------------------------------


def test_fig10_rows_and_sentinels():
    q = q_from_delta(-2.0)
    hinv = FieldMap(q).h_inv
    rep = fig10_data(-2.0, [0.0, hinv, 2.0, -hinv, math.inf])
    rows = rep.rows
    assert rows[0]["fracture_mag"] == pytest.approx(rows[0]["spontaneous_mag"], abs=1e-10)
    assert rows[1]["fracture_mag"] == pytest.approx(rows[1]["boundary_mag"], abs=1e-10)
    assert math.isnan(rows[3]["fracture_mag"])
    assert rows[4]["r"] == 1.0 and rows[4]["fracture_mag"] == -1.0


def test_fig10_monotone_in_field():
    hs = np.linspace(0, 6, 25)
    mags = [row["fracture_mag"] for row in fig10_data(-2.0, hs).rows]
    assert all(b < a for a, b in zip(mags, mags[1:]))
