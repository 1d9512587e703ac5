from __future__ import annotations

import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fxxz.exactalg import (Monomial, PruneError, RPoly, TruncatedQSeries, WLaurent, series_exp,
                           series_sqrt, w_extract)

from oracles import as_dict, mul, one_minus, pochhammer

Q = 8


def series(d: dict, qmax: int = Q) -> TruncatedQSeries:
    return TruncatedQSeries.from_terms(d, qmax)


small_series = st.dictionaries(
    st.tuples(st.integers(0, 6), st.integers(-2, 2)), st.integers(-3, 3), max_size=6
).map(lambda d: series(d))

positive_series = st.dictionaries(
    st.tuples(st.integers(1, 6), st.integers(-1, 2)), st.integers(-3, 3), max_size=5
).map(lambda d: series(d))


# -- RPoly ---------------------------------------------------------------------


def test_rpoly_arithmetic():
    a = RPoly({0: 1, 1: -1})
    assert a * a == RPoly({0: 1, 1: -2, 2: 1})
    assert not (a - a) and (a - a).min_degree is None
    assert RPoly({-1: 2}).subs_inverse() == RPoly({1: 2})
    assert RPoly({0: 1, 2: 3}).evaluate(Fraction(1, 2)) == Fraction(7, 4)


# -- ring operations -----------------------------------------------------------


def test_telescoping_geometric():
    geo = TruncatedQSeries({0: 1, 2: 1, 4: 1, 6: 1}, 4)
    prod = TruncatedQSeries({0: 1, 2: -1}, 4) * geo
    assert prod == TruncatedQSeries.one(4)
    assert prod.max_order == 4


def test_additive_identity():
    a = TruncatedQSeries({0: 1, 3: RPoly({1: 2})}, Q)
    assert a + TruncatedQSeries({}, Q) == a


def test_hand_multiplication():
    one_minus_r = RPoly({0: 1, 1: -1})
    a = TruncatedQSeries({0: 1, 2: -one_minus_r}, Q)
    b = TruncatedQSeries({0: 1, 2: one_minus_r}, Q)
    # oracle: (1 - x)(1 + x) = 1 - x^2 with x = (1 - r) q^2
    assert a * b == TruncatedQSeries({0: 1, 4: RPoly({0: -1, 1: 2, 2: -1})}, Q)


def test_truncation_is_min_of_operands():
    a = TruncatedQSeries({0: 1, 1: 1}, 10)
    b = TruncatedQSeries({0: 1, 1: 1}, 6)
    assert (a * b).max_order == 6
    assert (a + b).max_order == 6


@settings(max_examples=40, deadline=None)
@given(small_series, small_series, small_series)
def test_ring_axioms(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a * b == b * a


@settings(max_examples=40, deadline=None)
@given(small_series, small_series)
def test_product_matches_dict_oracle(a, b):
    assert as_dict(a * b) == mul(as_dict(a), as_dict(b), Q)


# -- exp and sqrt ----------------------------------------------------------------


def test_exp_basic():
    assert series_exp(TruncatedQSeries({}, 4)) == TruncatedQSeries.one(4)
    c = Fraction(3, 5)
    got = series_exp(TruncatedQSeries({2: c}, 4))
    assert got == TruncatedQSeries({0: 1, 2: c, 4: c * c / 2}, 4)


def test_exp_of_log_is_product():
    log = TruncatedQSeries({2 * n: Fraction(-1, n) for n in range(1, 10)}, 16)
    assert series_exp(log) == TruncatedQSeries({0: 1, 2: -1}, 16)


def test_exp_rejects_constant_term():
    with pytest.raises(ValueError):
        series_exp(TruncatedQSeries({0: 1, 2: 1}, 4))


@settings(max_examples=30, deadline=None)
@given(positive_series)
def test_exp_inverse_pair(a):
    assert series_exp(a) * series_exp(a.scale(-1)) == TruncatedQSeries.one(Q)


def test_sqrt_examples():
    assert series_sqrt(TruncatedQSeries.one(6)) == TruncatedQSeries.one(6)
    assert series_sqrt(TruncatedQSeries({0: 1, 2: -2, 4: 1}, 6)) == TruncatedQSeries({0: 1, 2: -1}, 6)
    with pytest.raises(ValueError):
        series_sqrt(TruncatedQSeries({0: 4}, 6))


def test_sqrt_of_pochhammer_squares_back():
    p = series(pochhammer(1, 2, 0, (4,), 24), 24)
    s = series_sqrt(p)
    assert s * s == p


@settings(max_examples=30, deadline=None)
@given(positive_series)
def test_sqrt_squares_back(a):
    x = TruncatedQSeries.one(Q) + a
    s = series_sqrt(x)
    assert s * s == x


# -- binomials -------------------------------------------------------------------


@pytest.mark.parametrize("power", [-3, -1, 1, 2])
def test_mul_binomial_matches_oracle(power):
    m = Monomial(2, 3, 1)
    got = TruncatedQSeries.one(12).mul_binomial(m, power)
    assert as_dict(got) == one_minus(2, 3, 1, power, 12)


def test_half_integer_binomial_squares():
    m = Monomial(1, 2, 1)
    h = TruncatedQSeries.one(12).mul_binomial(m, Fraction(1, 2))
    assert h * h == TruncatedQSeries.one(12).mul_binomial(m, 1)
    with pytest.raises(ValueError):
        TruncatedQSeries.one(12).mul_binomial(Monomial(1, 0, 1), Fraction(1, 2))


# -- final flag and JSON -----------------------------------------------------------


def test_final_rejects_negative_orders():
    assert TruncatedQSeries({0: 1}, 4).assert_final()
    with pytest.raises(AssertionError):
        TruncatedQSeries({-2: 1, 0: 1}, 4).assert_final()


def test_json_schema_and_round_trip():
    big = 10**30 + 7
    s = TruncatedQSeries({0: RPoly({-1: Fraction(big, 3), 2: -1}), 6: 5}, 10)
    obj = json.loads(json.dumps(s.to_json()))
    assert obj["var"] == "q" and obj["max_order"] == 10 and obj["min_order"] == 0
    entry = obj["coeffs"][0]["r_poly"][0]
    assert set(entry) == {"r", "num", "den"}
    assert isinstance(entry["num"], str)
    assert TruncatedQSeries.from_json(obj) == s


def test_subs_r_inverse_and_parity():
    s = TruncatedQSeries({0: RPoly({1: 1, 2: 3})}, 4)
    assert s.subs_r_inverse() == TruncatedQSeries({0: RPoly({-1: 1, -2: 3})}, 4)
    even, odd = s.r_parity_split()
    assert even == TruncatedQSeries({0: RPoly({2: 3})}, 4)
    assert odd == TruncatedQSeries({0: RPoly({1: 1})}, 4)


# -- w extraction -------------------------------------------------------------------


def _w(terms, qmax=12):
    return WLaurent.from_terms(terms, qmax, nw=1)


def test_w_extract_inside_pole():
    # 1/(w - q^2) = w^-1 sum_m (q^2/w)^m
    f = _w({(2 * m, -1 - m, 0): 1 for m in range(7)})
    assert w_extract(f, -1) == TruncatedQSeries.one(12)


def test_w_extract_outside_pole():
    # 1/(w - q^-2) = -q^2 sum_m (q^2 w)^m
    f = _w({(2 + 2 * m, m, 0): -1 for m in range(6)})
    assert w_extract(f, -1).is_zero()


def test_w_extract_shifted_coefficient():
    f = _w({(0, -1, 0): 1, (1, 0, 0): 1})
    assert w_extract(f, 0) == TruncatedQSeries({1: 1}, 12)


def test_w_extract_outside_window():
    f = _w({(0, -1, 0): 1})
    with pytest.raises(PruneError):
        w_extract(f, -5, window=[(-3, 3)])


def test_w_extract_linear_and_order_independent():
    a = _w({(0, -1, 0): 1, (2, 1, 1): 3, (1, 0, 0): 2})
    b = _w({(1, 1, 0): -1, (0, 0, 0): 1, (3, -2, 0): 1})
    c = _w({(2, -1, 0): 1, (0, 0, 0): 1})
    for k in (-1, 0, 1):
        assert w_extract(a + b, k) == w_extract(a, k) + w_extract(b, k)
        assert w_extract((a * b) * c, k) == w_extract(c * (b * a), k)
        assert w_extract(a * (b * c), k) == w_extract((c * a) * b, k)


def test_prune_drops_unreachable_terms():
    f = _w({(0, 3, 0): 1, (10, 3, 0): 1, (0, 0, 0): 1})
    pruned = f.prune(lambda w: 2 * abs(w[0]))
    assert pruned.get((0, 3, 0)) == 1
    assert pruned.get((10, 3, 0)) == 0
