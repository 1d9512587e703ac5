"""q-Pochhammer symbols with several bases, theta functions and product identities.

All bases are positive powers of q (given either as a :class:`Monomial` or as
a bare integer exponent).  Truncation enumerates lattice points by q-order and
stops as soon as a factor can no longer influence the retained coefficients.
"""

from __future__ import annotations

import itertools
from collections import Counter
from fractions import Fraction
from typing import Iterator, Sequence

from .exactalg import Monomial, TruncatedQSeries

__all__ = [
    "Monomial",
    "base_exponents",
    "lattice_factors",
    "pochhammer",
    "pochhammer_inverse",
    "product_series",
    "theta",
    "theta_factors",
]


def base_exponents(bases: Sequence[Monomial | int]) -> tuple[int, ...]:
    """Integer q-exponents of the bases; anything else is rejected."""
    out = []
    for b in bases:
        if isinstance(b, Monomial):
            if b.coeff != 1 or b.r or b.has_w or b.q.denominator != 1:
                raise ValueError(f"base {b!r} must be a plain positive power of q")
            e = int(b.q)
        else:
            e = int(b)
        if e <= 0:
            raise ValueError(f"base q^{e} does not give a convergent product")
        out.append(e)
    return tuple(out)


def lattice_factors(a: Monomial, bases: Sequence[Monomial | int], qmax: int,
                    weights: Sequence[Fraction] = ()) -> Iterator[tuple[Monomial, int]]:
    """Yield ``(a * b^n, multiplicity)`` for all lattice points with q-order <= qmax.

    ``weights`` assigns a q-order to each w variable (``w = q^rho v``) for
    the cut, without changing the returned monomials.
    """
    exps = base_exponents(bases)
    a0 = a.q_order(weights)
    if not exps:
        if a0 <= qmax:
            yield a, 1
        return
    # group equal bases: the number of lattice points with given total shift
    counts = Counter(exps)
    shifts: Counter[int] = Counter({0: 1})
    budget = qmax - a0
    if budget < 0:
        return
    for e, k in counts.items():
        # ways to write m*e with k ordered non-negative parts: C(m+k-1, k-1)
        new: Counter[int] = Counter()
        for s, c in shifts.items():
            m = 0
            while s + m * e <= budget:
                new[s + m * e] += c * _multichoose(k, m)
                m += 1
        shifts = new
    for s in sorted(shifts):
        yield Monomial(a.coeff, a.q + s, a.r, a.w), shifts[s]


def _multichoose(k: int, m: int) -> int:
    from math import comb

    return comb(m + k - 1, k - 1) if k else int(m == 0)


def pochhammer(a: Monomial, bases: Sequence[Monomial | int], qmax: int) -> TruncatedQSeries:
    """(a; b_1, ..., b_N)_inf truncated at q^qmax.

    ``a`` must have non-negative q-order; a zero-order argument ``c r^k`` is
    allowed (its leading factor is a polynomial in r).
    """
    return product_series([(a, tuple(bases), 1)], qmax)


def pochhammer_inverse(a: Monomial, bases: Sequence[Monomial | int], qmax: int) -> TruncatedQSeries:
    """Reciprocal of :func:`pochhammer`; needs the leading factor to be invertible."""
    return product_series([(a, tuple(bases), -1)], qmax)


def product_series(spec: Sequence[tuple[Monomial, Sequence[Monomial | int], int]],
                   qmax: int) -> TruncatedQSeries:
    """Product of powers of Pochhammer symbols ``prod (a; bases)^power``.

    Factors of q-order zero are multiplied in as exact r-polynomials in the
    numerator; in the denominator they are rejected because 1/(1 - c r^k) is
    not a Laurent polynomial.
    """
    pending: Counter = Counter()
    for a, bases, power in spec:
        if a.has_w:
            raise ValueError("pochhammer series cannot carry w; use the correlator expansion")
        if a.coeff == 0:
            continue
        if a.q < 0:
            raise ValueError(f"argument {a!r} has negative q-order")
        for m, mult in lattice_factors(a, bases, qmax):
            pending[m] += power * mult
    out = TruncatedQSeries.one(qmax)
    # numerators first keep intermediate supports small
    for m, p in sorted(pending.items(), key=lambda t: (t[1] < 0, t[0].q)):
        if p == 0:
            continue
        if m.q == 0:
            if m.coeff == 1 and m.r == 0:
                if p > 0:
                    return TruncatedQSeries({}, qmax)
                raise ZeroDivisionError("product has a vanishing denominator factor")
            if p < 0:
                raise ValueError(f"denominator factor 1 - {m!r} is not invertible over Q[r, 1/r]")
        out = out.mul_binomial(m, p)
    return out


def theta_factors(z: Monomial, p: Monomial | int) -> list[tuple[Monomial, tuple[int, ...], int]]:
    """Factor list of Theta_p(z) = (p;p)(z;p)(p/z;p) as (argument, bases, power)."""
    (pe,) = base_exponents([p])
    pm = Monomial(1, pe)
    return [(pm, (pe,), 1), (z, (pe,), 1), (pm / z, (pe,), 1)]


def theta(z: Monomial, p: Monomial | int, qmax: int) -> TruncatedQSeries:
    """Theta_p(z) for a w-free argument with 0 <= ord(z) <= ord(p)."""
    return product_series(theta_factors(z, p), qmax)


def expand_product(a: Monomial, bases: Sequence[int], n_max: int) -> Iterator[Monomial]:
    """Individual factors ``a b^n`` with every index below ``n_max`` (for numerics)."""
    for idx in itertools.product(range(n_max), repeat=len(bases)):
        yield Monomial(a.coeff, a.q + sum(i * b for i, b in zip(idx, bases)), a.r, a.w)
