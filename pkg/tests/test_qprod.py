from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fxxz.exactalg import Monomial, TruncatedQSeries
from fxxz.qprod import pochhammer, pochhammer_inverse, product_series, theta, theta_factors

from oracles import as_dict, pochhammer as poch_oracle

monomials = st.builds(Monomial, st.sampled_from([1, -1, 2]), st.integers(1, 4), st.integers(-1, 1))


def test_empty_argument():
    assert pochhammer(Monomial(0), [4], 12) == TruncatedQSeries.one(12)
    assert pochhammer_inverse(Monomial(0), [8], 12) == TruncatedQSeries.one(12)


def test_q2_q4_to_q8():
    # oracle: (1 - q^2)(1 - q^6) with everything else beyond q^8
    assert pochhammer(Monomial(1, 2), [4], 8) == TruncatedQSeries({0: 1, 2: -1, 6: -1, 8: 1}, 8)


def test_chi_partition_counts():
    # parts congruent to 2 mod 4: 6 = 6 = 2+2+2
    chi = pochhammer_inverse(Monomial(1, 2), [4], 6)
    assert chi == TruncatedQSeries({0: 1, 2: 1, 4: 1, 6: 2}, 6)
    assert pochhammer_inverse(Monomial(1, 2), [4], 4) == TruncatedQSeries({0: 1, 2: 1, 4: 1}, 4)


@pytest.mark.parametrize("a,bases", [(Monomial(1, 2), [4]), (Monomial(-1, 3, 1), [2, 5]),
                                     (Monomial(2, 1, -1), [3])])
def test_against_factor_by_factor_oracle(a, bases):
    got = pochhammer(a, bases, 14)
    assert as_dict(got) == poch_oracle(a.coeff, int(a.q), a.r, tuple(bases), 14)


@settings(max_examples=25, deadline=None)
@given(monomials, st.integers(1, 3))
def test_reciprocal(a, b):
    assert pochhammer(a, [b], 12) * pochhammer_inverse(a, [b], 12) == TruncatedQSeries.one(12)


@settings(max_examples=25, deadline=None)
@given(monomials, st.integers(1, 3))
def test_double_base_identity(a, b):
    # (a; b, b) = (ab; b, b^2)^2 (a; b^2)
    lhs = pochhammer(a, [b, b], 16)
    ab = Monomial(a.coeff, a.q + b, a.r)
    rhs = product_series([(ab, (b, 2 * b), 2), (a, (2 * b,), 1)], 16)
    assert lhs == rhs


@settings(max_examples=25, deadline=None)
@given(monomials, st.integers(1, 3))
def test_shift_identity(a, b):
    ab = Monomial(a.coeff, a.q + b, a.r)
    assert pochhammer(a, [b], 14) == pochhammer(ab, [b], 14).mul_binomial(a, 1)


@settings(max_examples=15, deadline=None)
@given(monomials, st.integers(1, 3), st.integers(1, 4))
def test_base_order_symmetry(a, b, c):
    assert pochhammer(a, [b, c], 14) == pochhammer(a, [c, b], 14)


def test_nonpositive_base_rejected():
    with pytest.raises(ValueError):
        pochhammer(Monomial(1, 2), [0], 8)
    with pytest.raises(ValueError):
        pochhammer(Monomial(1, 2), [-2], 8)


def test_theta_factor_inventory():
    z = Monomial(1, 2, 0, (2,))
    facs = theta_factors(z, 8)
    assert facs == [(Monomial(1, 8), (8,), 1), (z, (8,), 1), (Monomial(1, 6, 0, (-2,)), (8,), 1)]


def test_theta_symmetric_point_and_identity():
    # Theta_{q^8}(q^4): the two z-dependent factors coincide
    t = theta(Monomial(1, 4), 8, 24)
    direct = product_series([(Monomial(1, 8), (8,), 1), (Monomial(1, 4), (8,), 2)], 24)
    assert t == direct
    assert t * TruncatedQSeries.one(24) == t


def test_jacobi_triple_product():
    lhs = theta(Monomial(-1, 1), 2, 25)
    rhs = TruncatedQSeries({n * n: (1 if n == 0 else 2) for n in range(6)}, 25)
    assert lhs == rhs
