"""Exact coefficient algebra.

Three layers live here:

* :class:`RPoly` -- Laurent polynomials in the boundary parameter ``r`` with
  rational coefficients.
* :class:`TruncatedQSeries` -- q-Laurent series truncated at ``max_order``
  whose coefficients are :class:`RPoly`.
* :class:`WLaurent` -- the same thing with one or more extra Laurent
  variables ``w_1 .. w_k`` (the integration variables of the contour
  integrals), used to extract residues as ``w^{-1}`` coefficients.

Both series types share a dense storage engine (:class:`DenseLaurent`): a numpy
object array over the axes ``(q, w_1, ..., w_k, r)`` holding Python ints or
Fractions, plus the integer exponent of the first slot along every axis.
Nothing is ever rounded.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "DenseLaurent",
    "Monomial",
    "PruneError",
    "RPoly",
    "TruncatedQSeries",
    "WLaurent",
    "series_exp",
    "series_sqrt",
    "w_extract",
]


class PruneError(ValueError):
    """A coefficient outside the retained window was requested."""


def _normalize(c):
    """Keep integers as ``int`` and everything else as ``Fraction``."""
    if isinstance(c, Fraction):
        return c.numerator if c.denominator == 1 else c
    if isinstance(c, int):
        return c
    c = Fraction(c)
    return c.numerator if c.denominator == 1 else c


# ---------------------------------------------------------------------------
# RPoly
# ---------------------------------------------------------------------------


class RPoly(Mapping[int, Fraction]):
    """Immutable Laurent polynomial in ``r`` with exact rational coefficients."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[int, object] | None = None):
        clean = {}
        for k, v in (terms or {}).items():
            v = Fraction(v)
            if v:
                clean[int(k)] = v
        self._terms = dict(sorted(clean.items()))

    @classmethod
    def const(cls, c) -> "RPoly":
        return cls({0: c})

    @classmethod
    def from_coeffs(cls, lo: int, coeffs: Iterable) -> "RPoly":
        return cls({lo + i: c for i, c in enumerate(coeffs) if c})

    def __getitem__(self, k: int) -> Fraction:
        return self._terms.get(k, Fraction(0))

    def __iter__(self) -> Iterator[int]:
        return iter(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, RPoly):
            return self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self._terms == RPoly.const(other)._terms
        return NotImplemented

    def __hash__(self) -> int:
        return hash(tuple(self._terms.items()))

    def __add__(self, other) -> "RPoly":
        other = _as_rpoly(other)
        out = dict(self._terms)
        for k, v in other._terms.items():
            out[k] = out.get(k, 0) + v
        return RPoly(out)

    __radd__ = __add__

    def __neg__(self) -> "RPoly":
        return RPoly({k: -v for k, v in self._terms.items()})

    def __sub__(self, other) -> "RPoly":
        return self + (-_as_rpoly(other))

    def __rsub__(self, other) -> "RPoly":
        return _as_rpoly(other) - self

    def __mul__(self, other) -> "RPoly":
        other = _as_rpoly(other)
        out: dict[int, Fraction] = {}
        for a, x in self._terms.items():
            for b, y in other._terms.items():
                out[a + b] = out.get(a + b, 0) + x * y
        return RPoly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "RPoly":
        if n < 0:
            raise ValueError("negative powers of an RPoly are not polynomials")
        out = RPoly.const(1)
        for _ in range(n):
            out = out * self
        return out

    @property
    def min_degree(self) -> int | None:
        return min(self._terms) if self._terms else None

    @property
    def max_degree(self) -> int | None:
        return max(self._terms) if self._terms else None

    def subs_inverse(self) -> "RPoly":
        """Return the polynomial with ``r -> 1/r``."""
        return RPoly({-k: v for k, v in self._terms.items()})

    def evaluate(self, r):
        if not self._terms:
            return 0
        if isinstance(r, (int, Fraction)):
            return sum((v * Fraction(r) ** k for k, v in self._terms.items()), Fraction(0))
        return sum(float(v) * r**k if isinstance(r, float) else complex(v) * r**k
                   for k, v in self._terms.items())

    def to_json(self) -> list[dict]:
        return [{"r": k, "num": str(v.numerator), "den": str(v.denominator)}
                for k, v in self._terms.items()]

    @classmethod
    def from_json(cls, items: Sequence[Mapping]) -> "RPoly":
        return cls({int(t["r"]): Fraction(int(t["num"]), int(t["den"])) for t in items})

    def __repr__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for k, v in self._terms.items():
            mon = "" if k == 0 else ("r" if k == 1 else f"r^{k}")
            if mon and v == 1:
                parts.append(mon)
            elif mon and v == -1:
                parts.append("-" + mon)
            else:
                parts.append(f"{v}{'*' + mon if mon else ''}")
        return " + ".join(parts).replace("+ -", "- ")


def _as_rpoly(x) -> RPoly:
    if isinstance(x, RPoly):
        return x
    return RPoly.const(x)


# ---------------------------------------------------------------------------
# Monomials
# ---------------------------------------------------------------------------


class Monomial:
    """``coeff * q^q * r^r * w_1^{w_1} ...`` with exact data.

    The q-exponent may be a half-integer; it has to be integral by the time a
    monomial is turned into series coefficients.
    """

    __slots__ = ("coeff", "q", "r", "w")

    def __init__(self, coeff=1, q=0, r: int = 0, w: Sequence[int] = ()):
        self.coeff = Fraction(coeff)
        self.q = Fraction(q)
        self.r = int(r)
        self.w = tuple(int(x) for x in w)

    def _pad(self, n: int) -> tuple[int, ...]:
        return self.w + (0,) * (n - len(self.w))

    def __mul__(self, other) -> "Monomial":
        if not isinstance(other, Monomial):
            return Monomial(self.coeff * Fraction(other), self.q, self.r, self.w)
        n = max(len(self.w), len(other.w))
        w = tuple(a + b for a, b in zip(self._pad(n), other._pad(n)))
        return Monomial(self.coeff * other.coeff, self.q + other.q, self.r + other.r, w)

    __rmul__ = __mul__

    def __truediv__(self, other: "Monomial") -> "Monomial":
        return self * other.inverse()

    def __pow__(self, n: int) -> "Monomial":
        return Monomial(self.coeff**n, self.q * n, self.r * n, tuple(x * n for x in self.w))

    def __neg__(self) -> "Monomial":
        return Monomial(-self.coeff, self.q, self.r, self.w)

    def inverse(self) -> "Monomial":
        if self.coeff == 0:
            raise ZeroDivisionError("zero monomial")
        return self ** -1

    def __eq__(self, other) -> bool:
        if not isinstance(other, Monomial):
            return NotImplemented
        n = max(len(self.w), len(other.w))
        return (self.coeff, self.q, self.r, self._pad(n)) == (
            other.coeff, other.q, other.r, other._pad(n))

    def __hash__(self) -> int:
        w = self.w
        while w and w[-1] == 0:
            w = w[:-1]
        return hash((self.coeff, self.q, self.r, w))

    @property
    def has_w(self) -> bool:
        return any(self.w)

    def q_order(self, weights: Sequence[Fraction] = ()) -> Fraction:
        """q-order after substituting ``w_a = q^{weights[a]} v_a``."""
        total = self.q
        for e, rho in zip(self.w, weights):
            total += e * Fraction(rho)
        return total

    def substitute(self, weights: Sequence[Fraction]) -> "Monomial":
        """Return the monomial with ``w_a -> q^{weights[a]} w_a``."""
        return Monomial(self.coeff, self.q_order(weights), self.r, self.w)

    def evaluate(self, q, r=None, w: Sequence = ()):
        val = complex(self.coeff)
        if self.q:
            val *= _qpow(q, self.q)
        if self.r:
            val *= r**self.r
        for e, x in zip(self.w, w):
            if e:
                val *= x**e
        return val

    def __repr__(self) -> str:
        bits = [str(self.coeff)] if self.coeff != 1 else []
        if self.q:
            bits.append(f"q^{self.q}")
        if self.r:
            bits.append(f"r^{self.r}")
        for i, e in enumerate(self.w):
            if e:
                bits.append(f"w{i + 1}^{e}")
        return "*".join(bits) or "1"


def _qpow(q, e: Fraction):
    e = Fraction(e)
    if e.denominator == 1:
        return q ** int(e)
    return complex(q) ** float(e)


# ---------------------------------------------------------------------------
# dense engine
# ---------------------------------------------------------------------------


def _zeros(shape) -> np.ndarray:
    return np.zeros(shape, dtype=object)


def _nonzero_bbox(data: np.ndarray):
    nz = data != 0
    if not nz.any():
        return None
    box = []
    for ax in range(data.ndim):
        other = tuple(i for i in range(data.ndim) if i != ax)
        hit = np.flatnonzero(nz.any(axis=other) if other else nz)
        box.append((int(hit[0]), int(hit[-1]) + 1))
    return box


def _frac(x: int, den: int):
    return x if den == 1 else _normalize(Fraction(x, den))


def _integerize(values: Iterable) -> tuple[list[int], int]:
    """Common-denominator form of a list of rationals."""
    vals = [Fraction(v) for v in values]
    den = math.lcm(*(v.denominator for v in vals)) if vals else 1
    return [v.numerator * (den // v.denominator) for v in vals], den


def _reduce_int(data: np.ndarray, den: int) -> tuple[np.ndarray, int]:
    """Divide out the gcd of every numerator and the denominator."""
    if den == 1:
        return data, 1
    nz = data[data != 0]
    g = math.gcd(den, *nz.tolist()) if nz.size else den
    if g == 1:
        return data, den
    if not nz.size:
        return data, 1
    return data // g, den // g


class DenseLaurent:
    """Dense exact Laurent block over axes ``(q, w_1 .. w_k, r)``.

    Coefficients are Python integers over one shared denominator ``den``.
    ``lo`` holds the exponent of index 0 along each axis.  The q axis always
    runs from ``lo[0]`` up to ``max_order`` (inclusive); coefficients of
    q-orders above ``max_order`` are unknown and never stored.
    """

    __slots__ = ("data", "lo", "max_order", "den")

    def __init__(self, data: np.ndarray, lo: Sequence[int], max_order: int, den: int = 1):
        self.data = data
        self.lo = tuple(int(x) for x in lo)
        self.max_order = int(max_order)
        self.den = int(den)
        if data.ndim != len(self.lo):
            raise ValueError("offset tuple does not match array rank")
        if data.shape[0] != max(self.max_order - self.lo[0] + 1, 0):
            raise ValueError("q axis must reach exactly max_order")

    # -- construction ------------------------------------------------------
    @property
    def nw(self) -> int:
        return self.data.ndim - 2

    def _new(self, data, lo, max_order, den=None):
        obj = object.__new__(type(self))
        DenseLaurent.__init__(obj, data, lo, max_order, self.den if den is None else den)
        return obj

    @classmethod
    def _empty(cls, nw: int, max_order: int):
        obj = object.__new__(cls)
        DenseLaurent.__init__(obj, _zeros((0,) + (1,) * (nw + 1)),
                              (max_order + 1,) + (0,) * (nw + 1), max_order)
        return obj

    @classmethod
    def from_terms(cls, terms: Mapping[tuple, object], max_order: int, nw: int = 0):
        """Build from ``{(q, w_1.., r): coeff}``; q-orders above max_order are dropped."""
        keys = [k for k, v in terms.items() if v and k[0] <= max_order]
        if not keys:
            return cls._empty(nw, max_order)
        arr = np.array(keys, dtype=np.int64).reshape(len(keys), nw + 2)
        lo = arr.min(axis=0)
        hi = arr.max(axis=0)
        hi[0] = max_order
        nums, den = _integerize(terms[k] for k in keys)
        data = _zeros(tuple(int(h - l + 1) for h, l in zip(hi, lo)))
        for k, v in zip(keys, nums):
            idx = tuple(int(a - b) for a, b in zip(k, lo))
            data[idx] = data[idx] + v
        data, den = _reduce_int(data, den)
        return cls._from_parts(data, tuple(int(x) for x in lo), max_order, den)

    @classmethod
    def _from_parts(cls, data, lo, max_order, den=1):
        obj = object.__new__(cls)
        DenseLaurent.__init__(obj, data, lo, max_order, den)
        return obj._trim()

    @classmethod
    def one(cls, max_order: int, nw: int = 0):
        return cls.from_terms({(0,) * (nw + 2): 1}, max_order, nw)

    @classmethod
    def from_monomial(cls, m: Monomial, max_order: int, nw: int = 0):
        if m.q.denominator != 1:
            raise ValueError(f"non-integral q exponent in {m!r}")
        w = m._pad(nw)
        if len(w) > nw:
            raise ValueError("monomial carries more w variables than the target")
        return cls.from_terms({(int(m.q),) + w + (m.r,): m.coeff}, max_order, nw)

    def _trim(self):
        """Drop zero borders (never touching the top of the q axis)."""
        box = _nonzero_bbox(self.data)
        if box is None:
            return self._empty(self.nw, self.max_order)
        q0 = box[0][0]
        sl = (slice(q0, None),) + tuple(slice(a, b) for a, b in box[1:])
        lo = (self.lo[0] + q0,) + tuple(l + a for l, (a, _) in zip(self.lo[1:], box[1:]))
        return self._new(self.data[sl], lo, self.max_order)

    def _reduced(self):
        data, den = _reduce_int(self.data, self.den)
        return self._new(data, self.lo, self.max_order, den)

    def copy(self):
        return self._new(self.data.copy(), self.lo, self.max_order)

    # -- inspection --------------------------------------------------------
    def is_zero(self) -> bool:
        return not (self.data != 0).any()

    @property
    def min_order(self) -> int:
        """Lowest q-order with a nonzero coefficient (max_order + 1 for zero)."""
        if self.data.shape[0] == 0:
            return self.max_order + 1
        rows = np.flatnonzero((self.data != 0).reshape(self.data.shape[0], -1).any(axis=1))
        return self.lo[0] + int(rows[0]) if rows.size else self.max_order + 1

    def terms(self) -> Iterator[tuple[tuple[int, ...], object]]:
        for idx in zip(*np.nonzero(self.data != 0)):
            yield tuple(int(i) + l for i, l in zip(idx, self.lo)), _frac(self.data[idx], self.den)

    def nnz(self) -> int:
        return int((self.data != 0).sum())

    def _bounds(self):
        return [(l, l + n) for l, n in zip(self.lo, self.data.shape)]

    # -- embedding ---------------------------------------------------------
    def _embed(self, lo, shape):
        """Copy the numerators into a zero array with the given window (cropping as needed)."""
        out = _zeros(shape)
        src, dst = [], []
        for (l0, n0), l1, n1 in zip(self._bounds(), lo, shape):
            s = max(l0, l1)
            e = min(n0, l1 + n1)
            if e <= s:
                return out
            src.append(slice(s - l0, e - l0))
            dst.append(slice(s - l1, e - l1))
        out[tuple(dst)] = self.data[tuple(src)]
        return out

    def _check_compat(self, other):
        if self.nw != other.nw:
            raise ValueError("mismatched number of w variables")

    # -- ring operations ---------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, DenseLaurent):
            other = self._scalar_like(other)
        self._check_compat(other)
        mo = min(self.max_order, other.max_order)
        lo = tuple(min(a, b) for a, b in zip(self.lo, other.lo))
        hi = [max(a + n, b + m) for a, n, b, m in zip(self.lo, self.data.shape, other.lo, other.data.shape)]
        hi[0] = mo + 1
        shape = tuple(max(h - l, 0) for h, l in zip(hi, lo))
        den = math.lcm(self.den, other.den)
        x, y = self._embed(lo, shape), other._embed(lo, shape)
        if den != self.den:
            x = x * (den // self.den)
        if den != other.den:
            y = y * (den // other.den)
        return self._new(x + y, lo, mo, den)._reduced()._trim()

    __radd__ = __add__

    def __neg__(self):
        return self._new(-self.data, self.lo, self.max_order)

    def __sub__(self, other):
        if not isinstance(other, DenseLaurent):
            other = self._scalar_like(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def _scalar_like(self, c):
        if isinstance(c, RPoly):
            return self.from_terms({(0,) + (0,) * self.nw + (k,): v for k, v in c.items()},
                                   self.max_order, self.nw)
        return self.from_terms({(0,) * (self.nw + 2): c}, self.max_order, self.nw)

    def scale(self, c):
        c = Fraction(c)
        if c == 0:
            return self._empty(self.nw, self.max_order)
        data = self.data * c.numerator if c.numerator != 1 else self.data
        return self._new(data, self.lo, self.max_order, self.den * c.denominator)._reduced()

    def __mul__(self, other):
        if isinstance(other, Monomial):
            return self.mul_monomial(other)
        if isinstance(other, RPoly):
            other = self._scalar_like(other)
        if not isinstance(other, DenseLaurent):
            return self.scale(other)
        self._check_compat(other)
        return _dense_mul(self, other)

    __rmul__ = __mul__

    def mul_monomial(self, m: Monomial):
        """Multiply by an exact monomial; the truncation order shifts with it."""
        if m.q.denominator != 1:
            raise ValueError(f"non-integral q exponent in {m!r}")
        w = m._pad(self.nw)
        if len(w) > self.nw:
            raise ValueError("monomial carries more w variables than the series")
        shift = (int(m.q),) + w + (m.r,)
        lo = tuple(a + b for a, b in zip(self.lo, shift))
        c = m.coeff
        data = self.data * c.numerator if c.numerator != 1 else self.data
        out = self._new(data, lo, self.max_order + int(m.q), self.den * c.denominator)
        return out._reduced() if c.denominator != 1 else out

    def truncate(self, max_order: int):
        if max_order >= self.max_order:
            return self
        keep = max_order - self.lo[0] + 1
        if keep <= 0:
            return self._empty(self.nw, max_order)
        return self._new(self.data[:keep].copy(), self.lo, max_order)._trim()

    def mul_binomial(self, m: Monomial, power=1):
        """Multiply by ``(1 - m)^power``; negative powers expand geometrically.

        Non-integral powers use the binomial series.  Both expansions need
        ``m`` to have positive q-order.
        """
        if power == 0 or m.coeff == 0:
            return self
        if m.q.denominator != 1:
            raise ValueError(f"non-integral q exponent in {m!r}")
        power = Fraction(power)
        if power.denominator != 1:
            return self._binomial_series(m, power)
        power = int(power)
        out = self
        if m.coeff.denominator != 1:
            # keep numerators integral: rescale by the coefficient's denominator
            raise ValueError("binomial factors need an integer coefficient")
        if power > 0:
            for _ in range(power):
                out = out._times_one_minus(m)
        else:
            if m.q <= 0:
                raise ValueError(f"cannot expand 1/(1 - {m!r}) in positive powers of q")
            for _ in range(-power):
                out = out._divide_one_minus(m)
        return out

    def _binomial_series(self, m: Monomial, power: Fraction):
        if m.q <= 0:
            raise ValueError(f"cannot expand (1 - {m!r})^{power} in positive powers of q")
        out = self
        term = self
        coeff = Fraction(1)
        j = 0
        while True:
            j += 1
            if self.lo[0] + j * m.q > self.max_order:
                return out
            coeff = coeff * (power - j + 1) / j
            term = term.mul_monomial(-m).truncate(self.max_order)
            out = out + term.scale(coeff) if coeff else out

    def _times_one_minus(self, m: Monomial):
        return self - self.mul_monomial(m).truncate(self.max_order)

    def _divide_one_minus(self, m: Monomial):
        """Solve ``y = x + m*y`` row by row along the q axis."""
        step = int(m.q)
        shift = m._pad(self.nw) + (m.r,)
        c = int(m.coeff)
        nsteps = max((self.max_order - self.lo[0]) // step, 0)
        lo = [self.lo[0]]
        shape = [self.data.shape[0]]
        for l, n, s in zip(self.lo[1:], self.data.shape[1:], shift):
            lo.append(l + min(s, 0) * nsteps)
            shape.append(n + abs(s) * nsteps)
        y = self._embed(tuple(lo), tuple(shape))
        src_sl, dst_sl = [], []
        for s, n in zip(shift, shape[1:]):
            if s >= 0:
                src_sl.append(slice(0, n - s))
                dst_sl.append(slice(s, n))
            else:
                src_sl.append(slice(-s, n))
                dst_sl.append(slice(0, n + s))
        src_sl, dst_sl = tuple(src_sl), tuple(dst_sl)
        for i in range(step, y.shape[0]):
            prev = y[(i - step,) + src_sl]
            y[(i,) + dst_sl] = y[(i,) + dst_sl] + (prev if c == 1 else c * prev)
        return self._new(y, tuple(lo), self.max_order)._trim()

    # -- element access ----------------------------------------------------
    def get(self, idx: Sequence[int]):
        pos = tuple(i - l for i, l in zip(idx, self.lo))
        if any(p < 0 or p >= n for p, n in zip(pos, self.data.shape)):
            return 0
        return _frac(self.data[pos], self.den)

    def row(self, k: int, w: Sequence[int] = ()) -> RPoly:
        """Coefficient of ``q^k w^w`` as an :class:`RPoly`."""
        if k > self.max_order:
            raise PruneError(f"q-order {k} exceeds truncation {self.max_order}")
        pos = [k - self.lo[0]] + [a - l for a, l in zip(w, self.lo[1:-1])]
        if any(p < 0 or p >= n for p, n in zip(pos, self.data.shape)):
            return RPoly()
        return RPoly.from_coeffs(self.lo[-1], (Fraction(x, self.den) for x in self.data[tuple(pos)]))


def _dense_mul(a: DenseLaurent, b: DenseLaurent) -> DenseLaurent:
    """Exact product, truncated where both factors are still known."""
    mo = min(a.max_order + min(b.min_order, 0), b.max_order + min(a.min_order, 0))
    if a.is_zero() or b.is_zero():
        return a._empty(a.nw, mo)
    if a.nnz() > b.nnz():
        a, b = b, a
    lo = tuple(x + y for x, y in zip(a.lo, b.lo))
    shape = [n + m - 1 for n, m in zip(a.data.shape, b.data.shape)]
    shape[0] = mo - lo[0] + 1
    if shape[0] <= 0:
        return a._empty(a.nw, mo)
    out = _zeros(tuple(shape))
    for idx in zip(*np.nonzero(a.data != 0)):
        c = a.data[idx]
        q0 = idx[0]
        nq = min(b.data.shape[0], shape[0] - q0)
        if nq <= 0:
            continue
        dst = (slice(q0, q0 + nq),) + tuple(slice(i, i + n) for i, n in zip(idx[1:], b.data.shape[1:]))
        out[dst] = out[dst] + c * b.data[:nq]
    return a._new(out, lo, mo, a.den * b.den)._reduced()._trim()


def _conv_rows(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Full convolution of two equal-rank integer object arrays (sparse side drives)."""
    if x.ndim == 1:
        return np.convolve(x, y)
    if (x != 0).sum() > (y != 0).sum():
        x, y = y, x
    out = _zeros(tuple(n + m - 1 for n, m in zip(x.shape, y.shape)))
    for idx in zip(*np.nonzero(x != 0)):
        dst = tuple(slice(i, i + n) for i, n in zip(idx, y.shape))
        out[dst] = out[dst] + x[idx] * y
    return out


class _Row:
    """A graded row: integer array over (w.., r) with offsets and a denominator."""

    __slots__ = ("lo", "arr", "den")

    def __init__(self, lo, arr, den):
        self.lo, self.arr, self.den = tuple(lo), arr, den

    def __mul__(self, other: "_Row") -> "_Row":
        return _Row(tuple(a + b for a, b in zip(self.lo, other.lo)), _conv_rows(self.arr, other.arr),
                    self.den * other.den)

    def scaled(self, num: int, den: int = 1) -> "_Row":
        return _Row(self.lo, self.arr * num if num != 1 else self.arr, self.den * den)

    def reduced(self) -> "_Row":
        arr, den = _reduce_int(self.arr, self.den)
        return _Row(self.lo, arr, den)

    def nonzero(self) -> bool:
        return bool((self.arr != 0).any())

    @staticmethod
    def total(items: list["_Row"]) -> "_Row":
        rank = len(items[0].lo)
        lo = tuple(min(it.lo[i] for it in items) for i in range(rank))
        hi = tuple(max(it.lo[i] + it.arr.shape[i] for it in items) for i in range(rank))
        den = math.lcm(*(it.den for it in items))
        out = _zeros(tuple(h - l for h, l in zip(hi, lo)))
        for it in items:
            sl = tuple(slice(a - b, a - b + n) for a, b, n in zip(it.lo, lo, it.arr.shape))
            f = den // it.den
            out[sl] = out[sl] + (it.arr * f if f != 1 else it.arr)
        return _Row(lo, out, den).reduced()


def _graded_rows(s: DenseLaurent) -> dict[int, _Row]:
    rows = {}
    for i in range(s.data.shape[0]):
        r = s.data[i]
        if (r != 0).any():
            rows[s.lo[0] + i] = _Row(s.lo[1:], r, s.den)
    return rows


def _rows_to_dense(cls_like: DenseLaurent, rows: dict[int, _Row], qmax: int) -> DenseLaurent:
    if not rows:
        return cls_like._empty(cls_like.nw, qmax)
    rank = cls_like.nw + 1
    den = math.lcm(*(r.den for r in rows.values()))
    qlo = min(rows)
    lo = tuple(min(r.lo[i] for r in rows.values()) for i in range(rank))
    hi = tuple(max(r.lo[i] + r.arr.shape[i] for r in rows.values()) for i in range(rank))
    data = _zeros((qmax - qlo + 1,) + tuple(h - l for h, l in zip(hi, lo)))
    for k, r in rows.items():
        sl = (k - qlo,) + tuple(slice(a - b, a - b + n) for a, b, n in zip(r.lo, lo, r.arr.shape))
        f = den // r.den
        data[sl] = r.arr * f if f != 1 else r.arr
    return cls_like._new(data, (qlo,) + lo, qmax, den)._reduced()._trim()


def _unit_row(nw: int) -> _Row:
    return _Row((0,) * (nw + 1), np.array(1, dtype=object).reshape((1,) * (nw + 1)), 1)


def _prune_row(row: _Row, k: int, qmax: int, bound) -> _Row:
    """Zero entries of a q^k row whose w-exponent cannot reach the target in budget."""
    arr = row.arr
    if arr.ndim < 2:
        return row
    out = None
    for widx in np.ndindex(*arr.shape[:-1]):
        wexp = tuple(i + l for i, l in zip(widx, row.lo[:-1]))
        if k + math.ceil(bound(wexp)) > qmax:
            if out is None:
                out = arr.copy()
            out[widx] = 0
    return row if out is None else _Row(row.lo, out, row.den)


def _dense_exp(a: DenseLaurent, prune=None) -> DenseLaurent:
    """``exp(a)`` for ``a`` with positive q-order, via ``k F_k = sum j a_j F_{k-j}``.

    ``prune(w)`` optionally bounds the q-order still needed to move a term
    at w-exponent ``w`` to the target; such terms are dropped as produced.
    The bound has to account for shifts by ``a`` itself.
    """
    if a.is_zero():
        return a.one(a.max_order, a.nw)
    if a.min_order < 1:
        raise ValueError("exp needs a series with zero constant term and positive q-order")
    Q = a.max_order
    arow = _graded_rows(a)
    frows: dict[int, _Row] = {0: _unit_row(a.nw)}
    for k in range(1, Q + 1):
        items = [(arow[j] * frows[k - j]).scaled(j) for j in arow if j <= k and (k - j) in frows]
        if not items:
            continue
        row = _Row.total(items).scaled(1, k).reduced()
        if prune is not None:
            row = _prune_row(row, k, Q, prune)
        if row.nonzero():
            frows[k] = row
    return _rows_to_dense(a, frows, Q)


def _dense_sqrt(a: DenseLaurent) -> DenseLaurent:
    """Square root with constant term 1 (requires a's constant term to be exactly 1)."""
    if a.min_order < 0:
        raise ValueError("sqrt needs a series with no negative q-orders")
    const = a.get((0,) * (a.nw + 2))
    if const != 1 or any(v for k, v in a.terms() if k[0] == 0 and any(k[1:])):
        raise ValueError("sqrt needs constant term exactly 1")
    Q = a.max_order
    arow = _graded_rows(a)
    frows: dict[int, _Row] = {0: _unit_row(a.nw)}
    for k in range(1, Q + 1):
        items = [arow[k]] if k in arow else []
        for j in range(1, k):
            if j in frows and (k - j) in frows:
                items.append((frows[j] * frows[k - j]).scaled(-1))
        if not items:
            continue
        row = _Row.total(items).scaled(1, 2).reduced()
        if row.nonzero():
            frows[k] = row
    return _rows_to_dense(a, frows, Q)


# ---------------------------------------------------------------------------
# TruncatedQSeries
# ---------------------------------------------------------------------------


class TruncatedQSeries(DenseLaurent):
    """q-Laurent series with :class:`RPoly` coefficients, exact through ``max_order``."""

    __slots__ = ()

    def __init__(self, coeffs: Mapping[int, object] | None = None, max_order: int = 48):
        terms = {}
        for k, v in (coeffs or {}).items():
            for e, c in _as_rpoly(v).items():
                terms[(int(k), e)] = c
        built = DenseLaurent.from_terms.__func__(TruncatedQSeries, terms, max_order, 0)
        DenseLaurent.__init__(self, built.data, built.lo, built.max_order, built.den)

    @classmethod
    def from_terms(cls, terms, max_order, nw=0):
        if nw:
            raise ValueError("TruncatedQSeries has no w variables")
        return DenseLaurent.from_terms.__func__(cls, terms, max_order, 0)

    @classmethod
    def one(cls, max_order: int, nw: int = 0):
        return cls({0: 1}, max_order)

    @classmethod
    def monomial(cls, m: Monomial, max_order: int) -> "TruncatedQSeries":
        return cls.from_monomial(m, max_order, 0)

    @classmethod
    def geometric(cls, m: Monomial, max_order: int) -> "TruncatedQSeries":
        """``1/(1 - m)`` for a monomial of positive q-order."""
        return cls.one(max_order).mul_binomial(m, -1)

    def coeff(self, k: int) -> RPoly:
        return self.row(k)

    __getitem__ = coeff

    def items(self) -> Iterator[tuple[int, RPoly]]:
        for i in range(self.data.shape[0]):
            row = self.data[i]
            if (row != 0).any():
                yield self.lo[0] + i, RPoly.from_coeffs(self.lo[1], (Fraction(x, self.den) for x in row))

    def to_dict(self) -> dict[int, RPoly]:
        return dict(self.items())

    def __eq__(self, other) -> bool:
        if not isinstance(other, TruncatedQSeries):
            return NotImplemented
        return self.max_order == other.max_order and self.to_dict() == other.to_dict()

    __hash__ = None  # type: ignore[assignment]

    def first_mismatch(self, other: "TruncatedQSeries") -> int | None:
        """Lowest q-order at which the two series differ (within common truncation)."""
        top = min(self.max_order, other.max_order)
        a, b = self.to_dict(), other.to_dict()
        for k in sorted(set(a) | set(b)):
            if k > top:
                break
            if a.get(k, RPoly()) != b.get(k, RPoly()):
                return k
        return None

    def agrees_with(self, other: "TruncatedQSeries") -> bool:
        return self.first_mismatch(other) is None

    def inverse(self) -> "TruncatedQSeries":
        """Reciprocal of a series whose lowest coefficient is a unit ``c r^k``."""
        m0 = self.min_order
        if m0 > self.max_order:
            raise ZeroDivisionError("inverse of zero series")
        lead = self.coeff(m0)
        if len(lead) != 1:
            raise ValueError("leading coefficient is not a unit in Q[r, 1/r]")
        (e, c), = lead.items()
        lead_mon = Monomial(c, m0, e)
        rest = (self * lead_mon.inverse()) - 1
        # 1/(1 + x) with x of positive order
        out = TruncatedQSeries.one(rest.max_order)
        power = TruncatedQSeries.one(rest.max_order)
        for _ in range(max(rest.max_order, 0) + 1):
            power = power * (-rest)
            if power.is_zero():
                break
            out = out + power
        return out * lead_mon.inverse()

    def __truediv__(self, other) -> "TruncatedQSeries":
        if isinstance(other, TruncatedQSeries):
            return self * other.inverse()
        if isinstance(other, Monomial):
            return self.mul_monomial(other.inverse())
        return self.scale(Fraction(1) / Fraction(other))

    def __pow__(self, n: int) -> "TruncatedQSeries":
        if n < 0:
            return self.inverse() ** (-n)
        out = TruncatedQSeries.one(self.max_order)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def subs_r_inverse(self) -> "TruncatedQSeries":
        """Series with ``r -> 1/r`` applied to every coefficient."""
        data = self.data[:, ::-1].copy()
        lo = (self.lo[0], -(self.lo[1] + self.data.shape[1] - 1))
        return self._new(data, lo, self.max_order)._trim()

    def subs_r(self, value) -> "TruncatedQSeries":
        """Specialise ``r`` to an exact rational value."""
        value = Fraction(value)
        if value == 0 and self.lo[1] < 0 and self.data.shape[1] and (self.data[:, : -self.lo[1]] != 0).any():
            raise ZeroDivisionError("series has negative powers of r")
        out = {}
        for k, p in self.items():
            out[k] = p.evaluate(value)
        return TruncatedQSeries(out, self.max_order)

    def r_parity_split(self) -> tuple["TruncatedQSeries", "TruncatedQSeries"]:
        even, odd = {}, {}
        for k, p in self.items():
            even[k] = RPoly({e: c for e, c in p.items() if e % 2 == 0})
            odd[k] = RPoly({e: c for e, c in p.items() if e % 2})
        return TruncatedQSeries(even, self.max_order), TruncatedQSeries(odd, self.max_order)

    def q_parity_ok(self) -> bool:
        return all(k % 2 == 0 for k, _ in self.items())

    def assert_final(self) -> "TruncatedQSeries":
        """Check the physical-result invariant: no negative q-orders survive."""
        if self.min_order < 0:
            raise AssertionError(f"final series has a nonzero q^{self.min_order} coefficient")
        return self

    def evaluate(self, q: float, r: float) -> float:
        """Numerical value of the truncated sum at (q, r)."""
        total = 0.0
        for k, p in self.items():
            total += float(sum(float(c) * r**e for e, c in p.items())) * q**k
        return total

    def tail_bound(self, q: float, r: float) -> float:
        """Rough size of the first omitted term times a geometric tail factor."""
        last = [(k, p) for k, p in self.items()][-2:]
        if not last:
            return 0.0
        mag = max(abs(sum(float(c) * r**e for e, c in p.items())) for _, p in last)
        return mag * abs(q) ** (self.max_order + 1) / max(1 - abs(q), 1e-12)

    def to_json(self) -> dict:
        return {
            "var": "q",
            "min_order": min(self.min_order, self.max_order),
            "max_order": self.max_order,
            "coeffs": [{"q": k, "r_poly": p.to_json()} for k, p in self.items()],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "TruncatedQSeries":
        if obj.get("var", "q") != "q":
            raise ValueError("series JSON must be in the variable q")
        return cls({int(c["q"]): RPoly.from_json(c["r_poly"]) for c in obj["coeffs"]},
                   int(obj["max_order"]))

    def __repr__(self) -> str:
        parts = []
        for k, p in self.items():
            parts.append(f"({p})*q^{k}")
        body = " + ".join(parts) if parts else "0"
        return f"{body} + O(q^{self.max_order + 1})"


# ---------------------------------------------------------------------------
# WLaurent
# ---------------------------------------------------------------------------


class WLaurent(DenseLaurent):
    """Series in q with Laurent-polynomial dependence on ``w_1 .. w_k`` and ``r``.

    ``prune(bound)`` drops every term that cannot be brought back to the
    target w-exponent within the q budget, given a lower bound on the q-order
    still to come.
    """

    __slots__ = ()

    @classmethod
    def one(cls, max_order: int, nw: int = 1):
        return DenseLaurent.one.__func__(cls, max_order, nw)

    @classmethod
    def from_series(cls, s: TruncatedQSeries, nw: int = 1) -> "WLaurent":
        terms = {(k,) + (0,) * nw + (e,): c for (k, e), c in s.terms()}
        return cls.from_terms(terms, s.max_order, nw)

    @classmethod
    def geometric(cls, m: Monomial, max_order: int, nw: int = 1) -> "WLaurent":
        return cls.one(max_order, nw).mul_binomial(m, -1)

    def prune(self, bound: Callable[[tuple[int, ...]], int | Fraction]) -> "WLaurent":
        """Zero out terms with ``q + bound(w) > max_order``."""
        data = self.data.copy()
        wshape = data.shape[1:-1]
        for widx in np.ndindex(*wshape):
            wexp = tuple(i + l for i, l in zip(widx, self.lo[1:-1]))
            need = bound(wexp)
            cut = self.max_order - math.ceil(need) - self.lo[0] + 1
            if cut < data.shape[0]:
                sl = (slice(max(cut, 0), None),) + widx + (slice(None),)
                data[sl] = 0
        return self._new(data, self.lo, self.max_order)._trim()

    def w_extract(self, k: int | Sequence[int]) -> TruncatedQSeries:
        """Coefficient of ``w^k`` (``w_1^{k_1} ...`` for several variables)."""
        ks = (k,) if isinstance(k, int) else tuple(k)
        if len(ks) != self.nw:
            raise ValueError("one exponent per w variable is required")
        terms = {}
        for idx in zip(*np.nonzero(self.data != 0)):
            full = tuple(int(i) + l for i, l in zip(idx, self.lo))
            if full[1:-1] == ks:
                terms[(full[0], full[-1])] = _frac(self.data[idx], self.den)
        return TruncatedQSeries.from_terms(terms, self.max_order)

    def w_range(self) -> list[tuple[int, int]]:
        return [(l, l + n - 1) for l, n in zip(self.lo[1:-1], self.data.shape[1:-1])]


# ---------------------------------------------------------------------------
# functional API
# ---------------------------------------------------------------------------


def series_exp(a: DenseLaurent, prune=None) -> DenseLaurent:
    """Exponential of a series with zero constant term (see ``_dense_exp`` for ``prune``)."""
    return _dense_exp(a, prune)


def series_sqrt(a: DenseLaurent) -> DenseLaurent:
    """Square root normalised to constant term +1."""
    return _dense_sqrt(a)


def w_extract(f: WLaurent, k: int | Sequence[int], window: Sequence[tuple[int, int]] | None = None
              ) -> TruncatedQSeries:
    """Coefficient of ``w^k``.

    ``window`` lists the w-exponent range per variable that the caller's
    prune bound guarantees to be complete; asking outside it raises
    :class:`PruneError`.
    """
    ks = (k,) if isinstance(k, int) else tuple(k)
    for e, (lo, hi) in zip(ks, window or ()):
        if not lo <= e <= hi:
            raise PruneError(f"w exponent {e} lies outside the retained window [{lo}, {hi}]; "
                             "loosen the prune bound or raise the truncation order")
    return f.w_extract(ks)
