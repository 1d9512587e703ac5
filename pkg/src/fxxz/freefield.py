"""Free-field boundary-state data, norm brackets, vacuum overlap and fidelity.

The bosonic coefficients carry half-integer powers of q, so they are kept as
:class:`HPoly` objects (Laurent polynomials in ``q^{1/2}``, ``r`` and any
number of ``w`` variables) over the common denominator ``[2n]``.  Only sums
whose q-exponents turn out integral are ever converted to series.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exactalg import DenseLaurent, Monomial, TruncatedQSeries, WLaurent, series_exp, series_sqrt
from .model import DEFAULT_PRODUCT_TOL, FieldMap, q_from_delta
from .qprod import pochhammer_inverse, product_series
from .report import RunReport

__all__ = [
    "BosonCoeffs",
    "HPoly",
    "boson_coeffs",
    "fidelity_curve",
    "fidelity_value",
    "norm_bracket_closed",
    "norm_bracket_expsum",
    "overlap_closed",
    "overlap_numeric",
    "overlap_series",
    "qpoch_multi",
]


# ---------------------------------------------------------------------------
# half-exponent Laurent polynomials
# ---------------------------------------------------------------------------

Key = tuple  # (2*q_exponent, r_exponent, w_1, ..., w_k)


class HPoly:
    """Laurent polynomial in q^{1/2}, r and w_1..w_k with rational coefficients."""

    __slots__ = ("terms", "nw")

    def __init__(self, terms: Mapping[Key, object] | None = None, nw: int = 0):
        self.nw = nw
        clean: dict[Key, Fraction] = {}
        for k, v in (terms or {}).items():
            if len(k) != nw + 2:
                raise ValueError("key length does not match number of w variables")
            v = Fraction(v)
            if v:
                clean[tuple(k)] = clean.get(tuple(k), 0) + v
        self.terms = {k: v for k, v in clean.items() if v}

    @classmethod
    def mono(cls, coeff=1, q2: int = 0, r: int = 0, w: Sequence[int] = (), nw: int = 0) -> "HPoly":
        w = tuple(w) + (0,) * (nw - len(w))
        return cls({(q2, r) + w: coeff}, nw)

    def _lift(self, nw: int) -> "HPoly":
        if nw == self.nw:
            return self
        return HPoly({k + (0,) * (nw - self.nw): v for k, v in self.terms.items()}, nw)

    def __add__(self, other) -> "HPoly":
        if not isinstance(other, HPoly):
            other = HPoly.mono(other, nw=self.nw)
        nw = max(self.nw, other.nw)
        a, b = self._lift(nw), other._lift(nw)
        out = defaultdict(Fraction, a.terms)
        for k, v in b.terms.items():
            out[k] += v
        return HPoly(out, nw)

    __radd__ = __add__

    def __neg__(self) -> "HPoly":
        return HPoly({k: -v for k, v in self.terms.items()}, self.nw)

    def __sub__(self, other) -> "HPoly":
        return self + (-other if isinstance(other, HPoly) else -Fraction(other))

    def __rsub__(self, other) -> "HPoly":
        return (-self) + other

    def __mul__(self, other) -> "HPoly":
        if not isinstance(other, HPoly):
            c = Fraction(other)
            return HPoly({k: v * c for k, v in self.terms.items()}, self.nw)
        nw = max(self.nw, other.nw)
        a, b = self._lift(nw), other._lift(nw)
        out: dict[Key, Fraction] = defaultdict(Fraction)
        for k1, v1 in a.terms.items():
            for k2, v2 in b.terms.items():
                out[tuple(x + y for x, y in zip(k1, k2))] += v1 * v2
        return HPoly(out, nw)

    __rmul__ = __mul__

    def __bool__(self) -> bool:
        return bool(self.terms)

    def min_q_order(self, weights: Sequence[Fraction] = ()) -> Fraction:
        """Lowest q-order after w_a -> q^{weights[a]} w_a (inf for zero)."""
        if not self.terms:
            return Fraction(10**9)
        return min(Fraction(k[0], 2) + sum(Fraction(rho) * e for rho, e in zip(weights, k[2:]))
                   for k in self.terms)

    def drop_w_free(self) -> tuple["HPoly", "HPoly"]:
        """Split into (terms without any w, terms with some w)."""
        free = {k: v for k, v in self.terms.items() if not any(k[2:])}
        rest = {k: v for k, v in self.terms.items() if any(k[2:])}
        return HPoly(free, self.nw), HPoly(rest, self.nw)

    def to_dense(self, qmax: int, weights: Sequence[Fraction] = ()) -> DenseLaurent:
        """Series with w_a -> q^{rho_a} w_a; q exponents must come out integral."""
        terms = {}
        for k, v in self.terms.items():
            qe = Fraction(k[0], 2) + sum(Fraction(rho) * e for rho, e in zip(weights, k[2:]))
            if qe.denominator != 1:
                raise ArithmeticError(f"non-integral q exponent {qe} survived")
            key = (int(qe),) + tuple(k[2:]) + (k[1],)
            terms[key] = terms.get(key, 0) + v
        if self.nw == 0:
            return TruncatedQSeries.from_terms(terms, qmax)
        return WLaurent.from_terms(terms, qmax, self.nw)

    def __repr__(self) -> str:
        return f"HPoly({self.terms})"


def q_int(a: int, nw: int = 0) -> HPoly:
    """Numerator of the q-integer [a] times (q - 1/q): q^a - q^-a."""
    return HPoly({(2 * a, 0) + (0,) * nw: 1, (-2 * a, 0) + (0,) * nw: -1}, nw)


# ---------------------------------------------------------------------------
# coefficients
# ---------------------------------------------------------------------------


def theta_parity(n: int) -> int:
    return 1 if n % 2 == 0 else 0


@dataclass(frozen=True)
class BosonCoeffs:
    """Mode-n coefficients; ``beta_num``/``delta_num`` are over the denominator [2n].

    alpha, gamma are single monomials (gamma already primed if requested).
    """

    i: int
    n: int
    primed: bool
    alpha: HPoly
    gamma: HPoly
    beta_num: HPoly
    delta_num: HPoly

    @property
    def alpha_gamma(self) -> Monomial:
        (k, v), = (self.alpha * self.gamma).terms.items()
        return Monomial(v, Fraction(k[0], 2))


def boson_coeffs(i: int, n: int, primed: bool = True) -> BosonCoeffs:
    if i not in (0, 1):
        raise ValueError("boundary sector must be 0 or 1")
    if n < 1:
        raise ValueError("mode index starts at 1")
    th = theta_parity(n)
    alpha = HPoly.mono(-1, 12 * n)
    gamma = HPoly.mono(-1, -4 * n)
    one_minus_qn = HPoly({(0, 0): 1, (2 * n, 0): -1})
    if i == 0:
        beta = HPoly.mono(-th, 5 * n) * one_minus_qn - HPoly.mono(1, 7 * n, n)
        delta = HPoly.mono(th, -3 * n) * one_minus_qn - HPoly.mono(1, -5 * n, n)
    else:
        beta = HPoly.mono(-th, 5 * n) * one_minus_qn + HPoly.mono(1, 3 * n, -n)
        delta = HPoly.mono(th, -3 * n) * one_minus_qn + HPoly.mono(1, -n, -n)
    if primed:
        gamma = gamma * HPoly.mono(1, 8 * n)
        delta = delta * HPoly.mono(1, 4 * n)
    return BosonCoeffs(i, n, primed, alpha, gamma, beta, delta)


def _bracket_to_series(poly: HPoly, n: int, ag: Monomial, qmax: int,
                       weights: Sequence[Fraction] = ()) -> DenseLaurent:
    """q^n poly / (n (1 + q^{2n}) (1 - alpha gamma)) as a series."""
    s = poly.to_dense(qmax - n, weights)
    s = s.mul_binomial(Monomial(-1, 2 * n), -1).mul_binomial(ag, -1)
    return s.mul_monomial(Monomial(Fraction(1, n), n))


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def _mode_cut(order_of_mode, qmax: int, n_start: int = 1, streak: int = 4):
    """Yield mode indices until `streak` consecutive modes sit beyond qmax.

    Orders may alternate with the parity of n, so growth is checked against
    the mode two steps back.
    """
    n = n_start
    beyond = 0
    hist: dict[int, Fraction] = {}
    while True:
        o = order_of_mode(n)
        hist[n] = o
        if o > qmax:
            if n - 2 in hist and o <= hist[n - 2]:
                raise ArithmeticError("mode orders are not increasing; truncation is unsafe")
            beyond += 1
            if beyond >= streak:
                return
        else:
            beyond = 0
            yield n
        n += 1
        if n > 20 * (qmax + 10):
            raise ArithmeticError("mode sum does not truncate")


def norm_exponent(i: int, primed: bool, qmax: int) -> TruncatedQSeries:
    """The n-sum inside the exponential (without the 1/2 prefactor)."""
    total = TruncatedQSeries({}, qmax)

    def poly(n):
        c = boson_coeffs(i, n, primed)
        b, d = c.beta_num, c.delta_num
        return c.gamma * b * b + 2 * d * b + c.alpha * d * d

    cache = {}

    def order(n):
        p = cache.setdefault(n, poly(n))
        return p.min_q_order() + n

    for n in _mode_cut(order, qmax):
        ag = boson_coeffs(i, n, primed).alpha_gamma
        total = total + _bracket_to_series(cache[n], n, ag, qmax)
    return total


def norm_bracket_expsum(i: int, primed: bool, qmax: int) -> TruncatedQSeries:
    """<i|(-q)^D|i> (primed) or <i|i> (unprimed) from the Gaussian mode sum."""
    expo = norm_exponent(i, primed, qmax)
    step = 8 if primed else 4  # alpha_m gamma_m = q^{step m}
    prefactor = series_sqrt(pochhammer_inverse(Monomial(1, step), [step], qmax))
    return (prefactor * series_exp(expo.scale(Fraction(1, 2)))).assert_final()


def _closed_spec(i: int, primed: bool):
    s = -1 if i == 1 else 1
    if primed:
        return [
            (Monomial(1, 10, 2 * s), (8, 8), 2),
            (Monomial(1, 12, 2 * s), (8, 8), -2),
            (Monomial(1, 6, 2 * s), (4, 8), 1),
            (Monomial(1, 4, 2 * s), (4, 8), -1),
            (Monomial(1, 14), (8, 8), 1),
            (Monomial(1, 10), (8, 8), -1),
        ]
    return [
        (Monomial(1, 4, 2 * s), (8,), 1),
        (Monomial(1, 2, 2 * s), (8,), -1),
        (Monomial(1, 6), (8,), -1),
    ]


def norm_bracket_closed(i: int, primed: bool, qmax: int) -> TruncatedQSeries:
    """Closed infinite-product form of the same brackets."""
    return product_series(_closed_spec(i, primed), qmax)


def overlap_series(i: int, qmax: int) -> TruncatedQSeries:
    """(q^2;q^4)^{1/2} <i|(-q)^D|i> / <i|i>, built from the mode sums."""
    chi_inv = product_series([(Monomial(1, 2), (4,), 1)], qmax)
    num = norm_bracket_expsum(i, True, qmax)
    den = norm_bracket_expsum(i, False, qmax)
    return (series_sqrt(chi_inv) * num * den.inverse()).assert_final()


def _overlap_spec(i: int):
    s = -1 if i == 1 else 1
    return [
        (Monomial(1, 10, 2 * s), (8, 8), 2),
        (Monomial(1, 4, 2 * s), (8, 8), -1),
        (Monomial(1, 12, 2 * s), (8, 8), -1),
        (Monomial(1, 2, 2 * s), (4, 8), 1),
        (Monomial(1, 4, 2 * s), (4, 8), -1),
        (Monomial(1, 6), (8, 8), 1),
        (Monomial(1, 10), (8, 8), -1),
    ]


def overlap_closed(i: int, qmax: int) -> TruncatedQSeries:
    chi_inv = product_series([(Monomial(1, 2), (4,), 1)], qmax)
    return series_sqrt(chi_inv) * product_series(_overlap_spec(i), qmax)


# ---------------------------------------------------------------------------
# numerics
# ---------------------------------------------------------------------------


def qpoch_multi(a: complex, bases: Sequence[complex], tol: float = DEFAULT_PRODUCT_TOL) -> complex:
    """Numerical (a; b_1, ..., b_N)_inf."""
    if not bases:
        return 1 - a
    if len(bases) == 1:
        from .model import qpoch

        return qpoch(a, bases[0], tol)
    out = 1 + 0j
    t = complex(a)
    while abs(t) >= tol:
        out *= qpoch_multi(t, bases[1:], tol)
        t *= bases[0]
    return out


def overlap_numeric(q: float, r: float, i: int = 0, tol: float = DEFAULT_PRODUCT_TOL) -> float:
    """Value of the closed overlap product at real (q, r)."""
    if i == 1:
        r = 1 / r
    val = qpoch_multi(q * q, [q**4], tol) ** 0.5
    for a, bases, p in _overlap_spec(0):
        arg = float(a.coeff) * q ** int(a.q) * r**a.r
        val *= qpoch_multi(arg, [q**b for b in bases], tol) ** p
    return float(val.real)


def fidelity_value(q: float, h: float, tol: float = DEFAULT_PRODUCT_TOL) -> float:
    r = FieldMap(q).r(h)
    return overlap_numeric(q, r, 0, tol) ** 2


def fidelity_curve(delta: float, h_grid: Iterable[float], product_tol: float = DEFAULT_PRODUCT_TOL
                   ) -> RunReport:
    q = q_from_delta(delta)
    fm = FieldMap(q)
    rows = []
    for h in h_grid:
        h = float(h)
        r = fm.r(h)
        rows.append({"h": h, "r": float(r), "fidelity": overlap_numeric(q, r, 0, product_tol) ** 2})
    best = max(rows, key=lambda row: row["fidelity"]) if rows else None
    res = {"q": q, "h_inv": fm.h_inv, "h_at_max": best["h"] if best else None,
           "max_fidelity": best["fidelity"] if best else None}
    return RunReport("fidelity", {"delta": delta, "product_tol": product_tol, "points": len(rows)},
                     res, rows)


def h_grid(h_min: float, h_max: float, steps: int) -> np.ndarray:
    if steps < 1:
        raise ValueError("steps must be positive")
    return np.linspace(h_min, h_max, steps + 1)


def mode_orders(i: int, primed: bool, n_max: int) -> list[Fraction]:
    """Minimal q-order of each mode's contribution (used to justify the cut)."""
    out = []
    for n in range(1, n_max + 1):
        c = boson_coeffs(i, n, primed)
        b, d = c.beta_num, c.delta_num
        out.append((c.gamma * b * b + 2 * d * b + c.alpha * d * d).min_q_order() + n)
    return out


__all__ += ["h_grid", "mode_orders", "norm_exponent", "q_int", "theta_parity"]
_ = math
