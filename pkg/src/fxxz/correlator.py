"""Integrand inventory, contour classification and exact coefficient extraction.

The contour integral over each ``w_a`` is evaluated as a formal residue: with
``w_a = q^rho v_a`` every factor ``1 - m`` is expanded in the direction in
which ``m`` is q-small, so the ``v^{-1}`` coefficient equals the integral over
a circle that encloses exactly the poles of q-order above ``rho``.  When the
prescribed contour disagrees with that circle for finitely many poles, the
difference is added back as explicit residues.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .exactalg import Monomial, PruneError, RPoly, TruncatedQSeries, WLaurent, series_exp
from .freefield import HPoly, boson_coeffs
from .qprod import lattice_factors, product_series

__all__ = [
    "ContourSpec",
    "Factor",
    "FactorList",
    "PoleFamily",
    "Sym",
    "build_integrand",
    "circle_integral",
    "expsum_exponent",
    "extract_P",
    "extract_gP",
    "g_series",
    "pmp_integrand",
    "residue_identity_check",
]

INSIDE, OUTSIDE = "inside", "outside"


# ---------------------------------------------------------------------------
# symbolic monomials and factors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sym:
    """``coeff q^q r^r prod zeta_j^{zeta_j} prod w_a^{w_a}``."""

    coeff: Fraction = Fraction(1)
    q: Fraction = Fraction(0)
    r: int = 0
    zeta: tuple[int, ...] = ()
    w: tuple[int, ...] = ()

    @staticmethod
    def make(coeff=1, q=0, r=0, z=None, w=None, n_zeta: int = 0, n_w: int = 0) -> "Sym":
        """Build from z-exponents (z_j = zeta_j^2) and w-exponents.

        ``z`` and ``w`` are sequences of ``(slot, exponent)`` pairs; repeated
        slots accumulate.
        """
        zt = [0] * n_zeta
        for j, e in z or ():
            zt[j] += 2 * e
        wt = [0] * n_w
        for a, e in w or ():
            wt[a] += e
        return Sym(Fraction(coeff), Fraction(q), r, tuple(zt), tuple(wt))

    def __mul__(self, o: "Sym") -> "Sym":
        return Sym(self.coeff * o.coeff, self.q + o.q, self.r + o.r,
                   tuple(a + b for a, b in zip(self.zeta, o.zeta)),
                   tuple(a + b for a, b in zip(self.w, o.w)))

    def __pow__(self, n: int) -> "Sym":
        return Sym(self.coeff**n, self.q * n, self.r * n, tuple(e * n for e in self.zeta),
                   tuple(e * n for e in self.w))

    def specialise(self, zeta_vals: Sequence[tuple[int, int]]) -> Monomial:
        """Substitute zeta_j = sign_j q^{t_j}; returns a (q, r, w) monomial."""
        c, qe = self.coeff, self.q
        for e, (sign, t) in zip(self.zeta, zeta_vals):
            c *= sign**e
            qe += t * e
        return Monomial(c, qe, self.r, self.w)

    def evaluate(self, q: complex, r: complex, zetas: Sequence[complex], ws: Sequence[complex] = ()) -> complex:
        val = complex(self.coeff) * (q ** float(self.q) if self.q.denominator != 1 else q ** int(self.q))
        val *= r**self.r if self.r else 1
        for e, z in zip(self.zeta, zetas):
            if e:
                val *= z**e
        for e, x in zip(self.w, ws):
            if e:
                val *= x**e
        return val


@dataclass(frozen=True)
class Factor:
    """``(arg; q^b_1, ..., q^b_k)_inf ** power``; no bases means a single ``1 - arg``.

    ``side`` classifies the poles of w-carrying denominators.
    """

    arg: Sym
    bases: tuple[int, ...]
    power: int
    label: str
    origin: str = "iprime"  # prefactor | rational | iprime
    side: str | None = None


@dataclass(frozen=True)
class PoleFamily:
    """Poles ``base * q^{step n}`` (n >= 0) in the variable ``w_index``."""

    label: str
    w_index: int
    base: Sym
    step: int
    side: str


@dataclass
class ContourSpec:
    families: list[PoleFamily] = field(default_factory=list)

    def describe(self) -> list[dict]:
        out = []
        for f in self.families:
            out.append({"label": f.label, "w": f.w_index, "side": f.side, "step": f.step,
                        "base": _sym_str(f.base)})
        return out


@dataclass
class FactorList:
    i: int
    N: int
    eps: tuple[int, ...]
    A: tuple[int, ...]
    mode: str
    prefactor: Sym
    factors: list[Factor]

    @property
    def n_w(self) -> int:
        return len(self.A)

    def select(self, origins: Iterable[str]) -> "FactorList":
        keep = set(origins)
        return replace(self, factors=[f for f in self.factors if f.origin in keep])


def _sym_str(s: Sym) -> str:
    bits = [str(s.coeff)] if s.coeff != 1 else []
    if s.q:
        bits.append(f"q^{s.q}")
    if s.r:
        bits.append(f"r^{s.r}")
    for j, e in enumerate(s.zeta):
        if e:
            bits.append(f"z{j + 1}^{Fraction(e, 2)}")
    for a, e in enumerate(s.w):
        if e:
            bits.append(f"w{a + 1}^{e}")
    return "*".join(bits) or "1"


def _pole_family(f: Factor) -> PoleFamily | None:
    """Pole lattice of a w-carrying denominator factor (one w to the power +-1)."""
    nz = [(a, e) for a, e in enumerate(f.arg.w) if e]
    if f.power >= 0 or not nz:
        return None
    if len(nz) != 1 or abs(nz[0][1]) != 1 or len(f.bases) > 1:
        raise ValueError(f"unsupported denominator factor {f.label}")
    a, e = nz[0]
    strip = replace(f.arg, w=tuple(0 for _ in f.arg.w))
    step = f.bases[0] if f.bases else 0
    if e == -1:  # (B/w; p): poles at B p^n
        return PoleFamily(f.label, a, strip, step, f.side or INSIDE)
    # (w/A; p): poles at A p^{-n}
    return PoleFamily(f.label, a, strip ** -1, -step, f.side or OUTSIDE)


# ---------------------------------------------------------------------------
# integrand construction
# ---------------------------------------------------------------------------


def build_integrand(i: int, N: int, eps: Sequence[int], mode: str = "fracture"
                    ) -> tuple[FactorList, ContourSpec]:
    """Factor inventory and pole classification of the N-point integrand.

    In boundary mode only the prefactor and rational parts are listed; the
    rest of the integrand comes from the Gaussian mode sum with unprimed
    coefficients (see :func:`expsum_exponent`).
    """
    if N % 2 or N < 2:
        raise ValueError("N must be a positive even integer")
    if i not in (0, 1):
        raise ValueError("i must be 0 or 1")
    if mode not in ("fracture", "boundary"):
        raise ValueError("mode must be 'fracture' or 'boundary'")
    eps = tuple(int(e) for e in eps)
    if len(eps) != N or any(e not in (1, -1) for e in eps):
        raise ValueError("eps must list N signs")
    A = tuple(j for j in range(1, N + 1) if eps[j - 1] == 1)
    nA = len(A)

    def S(coeff=1, q=0, r=0, z=None, w=None):
        return Sym.make(coeff, q, r, z, w, N, nA)

    facs: list[Factor] = []
    E = Fraction(N * N, 4) + Fraction(i * N, 2) - sum(A)
    if E.denominator != 1:
        raise ValueError("prefactor exponent is not integral")
    E = int(E)
    pref = S((-1) ** (E % 2), 3 * E)
    zpow = {}
    for j in range(1, N + 1):
        ex = Fraction(1 + eps[j - 1], 2) - j + N + i
        pref = pref * Sym(Fraction(1), Fraction(0), 0,
                          tuple(int(ex) if k == j - 1 else 0 for k in range(N)), (0,) * nA)
        zpow[j] = ex
    facs.append(Factor(S(1, 2), (), N // 2, "(1-q^2)^(N/2)", "prefactor"))
    for j in range(N):
        for k in range(j + 1, N):
            facs.append(Factor(S(1, 2, 0, ((k, 1), (j, -1))), (4,), 1, f"(q^2 z{k+1}/z{j+1};q^4)", "prefactor"))
            facs.append(Factor(S(1, 4, 0, ((k, 1), (j, -1))), (4,), -1, f"(q^4 z{k+1}/z{j+1};q^4)", "prefactor"))

    # rational part
    for ai, a in enumerate(A):
        pref = pref * S(1, 0, 0, None, ((ai, 1 - i),))
        for bi in range(ai + 1, nA):
            # (w_a - w_b)(w_a - q^2 w_b) = w_a^2 (1 - w_b/w_a)(1 - q^2 w_b/w_a)
            pref = pref * S(1, 0, 0, None, ((ai, 2),))
            facs.append(Factor(S(1, 0, 0, None, ((bi, 1), (ai, -1))), (), 1, f"(1-w{bi+1}/w{ai+1})", "rational"))
            facs.append(Factor(S(1, 2, 0, None, ((bi, 1), (ai, -1))), (), 1, f"(1-q^2 w{bi+1}/w{ai+1})", "rational"))
        for j in range(1, N + 1):
            if j <= a:
                # 1/(z_j - q^-2 w_a) = z_j^-1 / (1 - q^-2 w_a/z_j): pole q^2 z_j outside
                pref = pref * S(1, 0, 0, ((j - 1, -1),))
                facs.append(Factor(S(1, -2, 0, ((j - 1, -1),), ((ai, 1),)), (), -1,
                                   f"1/(z{j}-q^-2 w{ai+1})", "rational", OUTSIDE))
            if a <= j:
                # 1/(w_a - q^4 z_j) = w_a^-1 / (1 - q^4 z_j/w_a): pole q^4 z_j inside
                pref = pref * S(1, 0, 0, None, ((ai, -1),))
                facs.append(Factor(S(1, 4, 0, ((j - 1, 1),), ((ai, -1),)), (), -1,
                                   f"1/(w{ai+1}-q^4 z{j})", "rational", INSIDE))

    if mode == "fracture":
        facs.extend(_iprime_factors(i, N, nA, S))
    fl = FactorList(i, N, eps, A, mode, pref, facs)
    cs = ContourSpec([p for p in (_pole_family(f) for f in facs) if p is not None])
    return fl, cs


def _iprime_factors(i: int, N: int, nA: int, S) -> list[Factor]:
    out: list[Factor] = []

    def add(arg, bases, power, label, side=None):
        out.append(Factor(arg, tuple(bases), power, label, "iprime", side))

    for j in range(N):
        for k in range(j + 1, N):
            add(S(1, 10, 0, ((j, 1), (k, 1))), (4, 8), 1, f"(q^10 z{j+1}z{k+1};q^4,q^8)")
            add(S(1, 12, 0, ((j, 1), (k, 1))), (4, 8), -1, f"(q^12 z{j+1}z{k+1};q^4,q^8)")
            add(S(1, 2, 0, ((j, -1), (k, -1))), (4, 8), 1, f"(q^2/(z{j+1}z{k+1});q^4,q^8)")
            add(S(1, 4, 0, ((j, -1), (k, -1))), (4, 8), -1, f"(q^4/(z{j+1}z{k+1});q^4,q^8)")
    for j in range(N):
        for k in range(N):
            add(S(1, 10, 0, ((j, 1), (k, -1))), (4, 8), 1, f"(q^10 z{j+1}/z{k+1};q^4,q^8)")
            add(S(1, 12, 0, ((j, 1), (k, -1))), (4, 8), -1, f"(q^12 z{j+1}/z{k+1};q^4,q^8)")
    for j in range(N):
        add(S(1, 14, 0, ((j, 2),)), (8, 8), 1, f"(q^14 z{j+1}^2;q^8,q^8)")
        add(S(1, 16, 0, ((j, 2),)), (8, 8), -1, f"(q^16 z{j+1}^2;q^8,q^8)")
        add(S(1, 6, 0, ((j, -2),)), (8, 8), 1, f"(q^6/z{j+1}^2;q^8,q^8)")
        add(S(1, 8, 0, ((j, -2),)), (8, 8), -1, f"(q^8/z{j+1}^2;q^8,q^8)")
    for j in range(N):
        for a in range(nA):
            add(S(1, 6, 0, ((j, 1),), ((a, 1),)), (8,), -1, f"(q^6 z{j+1} w{a+1};q^8)", OUTSIDE)
            add(S(1, 4, 0, ((j, -1),), ((a, -1),)), (8,), -1, f"(q^4/(z{j+1} w{a+1});q^8)", INSIDE)
            add(S(1, 12, 0, ((j, 1),), ((a, -1),)), (8,), -1, f"(q^12 z{j+1}/w{a+1};q^8)", INSIDE)
            add(S(1, 6, 0, ((j, -1),), ((a, 1),)), (8,), -1, f"(q^6 w{a+1}/z{j+1};q^8)", OUTSIDE)
    for a in range(nA):
        add(S(1, 2, 0, None, ((a, 2),)), (8,), 1, f"(q^2 w{a+1}^2;q^8)")
        add(S(1, 6, 0, None, ((a, -2),)), (8,), 1, f"(q^6/w{a+1}^2;q^8)")
    for a in range(nA):
        for b in range(a + 1, nA):
            add(S(1, 2, 0, None, ((a, 1), (b, 1))), (8,), 1, f"(q^2 w{a+1}w{b+1};q^8)")
            add(S(1, 4, 0, None, ((a, 1), (b, 1))), (8,), 1, f"(q^4 w{a+1}w{b+1};q^8)")
            add(S(1, 6, 0, None, ((a, -1), (b, -1))), (8,), 1, f"(q^6/(w{a+1}w{b+1});q^8)")
            add(S(1, 8, 0, None, ((a, -1), (b, -1))), (8,), 1, f"(q^8/(w{a+1}w{b+1});q^8)")
    for a in range(nA):
        for b in range(nA):
            add(S(1, 8, 0, None, ((a, 1), (b, -1))), (8,), 1, f"(q^8 w{a+1}/w{b+1};q^8)")
            add(S(1, 10, 0, None, ((a, 1), (b, -1))), (8,), 1, f"(q^10 w{a+1}/w{b+1};q^8)")
    # F'^(i)
    for j in range(N):
        if i == 0:
            add(S(1, 4, 1, ((j, 1),)), (4, 8), 1, f"(q^4 r z{j+1};q^4,q^8)")
            add(S(1, 12, 1, ((j, 1),)), (4, 8), 1, f"(q^12 r z{j+1};q^4,q^8)")
            add(S(1, 6, 1, ((j, 1),)), (4, 4), -1, f"(q^6 r z{j+1};q^4,q^4)")
            add(S(1, 4, 1, ((j, -1),)), (4, 8), 2, f"(q^4 r/z{j+1};q^4,q^8)^2")
            add(S(1, 2, 1, ((j, -1),)), (4, 4), -1, f"(q^2 r/z{j+1};q^4,q^4)")
        else:
            add(S(1, 0, -1, ((j, -1),)), (4, 8), 1, f"(1/(r z{j+1});q^4,q^8)")
            add(S(1, 8, -1, ((j, -1),)), (4, 8), 1, f"(q^8/(r z{j+1});q^4,q^8)")
            add(S(1, 2, -1, ((j, -1),)), (4, 4), -1, f"(q^2/(r z{j+1});q^4,q^4)")
            add(S(1, 8, -1, ((j, 1),)), (4, 8), 2, f"(q^8 z{j+1}/r;q^4,q^8)^2")
            add(S(1, 6, -1, ((j, 1),)), (4, 4), -1, f"(q^6 z{j+1}/r;q^4,q^4)")
    for a in range(nA):
        if i == 0:
            add(S(1, 6, 1, None, ((a, 1),)), (8,), 1, f"(q^6 r w{a+1};q^8)")
            add(S(1, 4, 1, None, ((a, -1),)), (8,), 1, f"(q^4 r/w{a+1};q^8)")
            add(S(1, 0, 1, None, ((a, 1),)), (8,), -1, f"(r w{a+1};q^8)", OUTSIDE)
            add(S(1, 6, 1, None, ((a, -1),)), (8,), -1, f"(q^6 r/w{a+1};q^8)", INSIDE)
        else:
            add(S(1, 2, -1, None, ((a, 1),)), (8,), 1, f"(q^2 w{a+1}/r;q^8)")
            add(S(1, 8, -1, None, ((a, -1),)), (8,), 1, f"(q^8/(r w{a+1});q^8)")
            add(S(1, 4, -1, None, ((a, 1),)), (8,), -1, f"(q^4 w{a+1}/r;q^8)", OUTSIDE)
            add(S(1, 2, -1, None, ((a, -1),)), (8,), -1, f"(q^2/(r w{a+1});q^8)", INSIDE)
    return out


def pmp_integrand(i: int, component: str) -> tuple[FactorList, ContourSpec]:
    """The N=2 integrand written directly in the reduced single-z form.

    Here ``z = zeta^2`` is the second slot, the first sits at ``-q^{-1} zeta``,
    and the result is already multiplied by g.
    """
    if component not in ("-+", "+-"):
        raise ValueError("component must be '-+' or '+-'")

    def S(coeff=1, q=0, r=0, z=0, w=0):
        return Sym.make(coeff, q, r, ((0, z),), ((0, w),), 1, 1)

    sign = 1 if component == "-+" else -1
    pref = S(sign, 2 * i, 0, i + 1, 1 - i)
    facs = [Factor(S(1, 2), (), 2, "(1-q^2)^2", "prefactor")]
    # 1/((w-z)(w-q^2 z)(w-q^4 z)) = w^-3 / ((1-z/w)(1-q^2 z/w)(1-q^4 z/w))
    pref = pref * S(1, 0, 0, 0, -3)
    facs.append(Factor(S(1, 0, 0, 1, -1), (), -1, "1/(w-z)", "rational", OUTSIDE))
    facs.append(Factor(S(1, 2, 0, 1, -1), (), -1, "1/(w-q^2 z)", "rational",
                       OUTSIDE if component == "-+" else INSIDE))
    facs.append(Factor(S(1, 4, 0, 1, -1), (), -1, "1/(w-q^4 z)", "rational", INSIDE))

    def add(arg, bases, power, label, side=None):
        facs.append(Factor(arg, tuple(bases), power, label, "iprime", side))

    add(S(1, 8, 0, 2), (8,), 1, "(q^8 z^2;q^8)")
    add(S(1, 4, 0, -2), (8,), 1, "(q^4/z^2;q^8)")
    add(S(1, 8), (8,), 1, "(q^8;q^8)")
    add(S(1, 10), (8,), 2, "(q^10;q^8)^2")
    add(S(1, 8), (8,), 1, "theta:(q^8;q^8)")
    add(S(1, 2, 0, 0, 2), (8,), 1, "theta:(q^2 w^2;q^8)")
    add(S(1, 6, 0, 0, -2), (8,), 1, "theta:(q^6/w^2;q^8)")
    for coeff_q, zexp, wexp, side in ((6, 1, 1, OUTSIDE), (4, -1, -1, INSIDE), (12, 1, -1, INSIDE),
                                      (6, -1, 1, OUTSIDE), (4, 1, 1, OUTSIDE), (6, -1, -1, INSIDE),
                                      (10, 1, -1, INSIDE), (8, -1, 1, OUTSIDE)):
        add(S(1, coeff_q, 0, zexp, wexp), (8,), -1, f"(q^{coeff_q} z^{zexp} w^{wexp};q^8)", side)
    if i == 0:
        add(S(1, 2, 1, 1), (8,), 1, "(q^2 r z;q^8)")
        add(S(1, 4, 1, -1), (8,), 1, "(q^4 r/z;q^8)")
        add(S(1, 8, 1, 1), (8,), -1, "(q^8 r z;q^8)")
        add(S(1, 2, 1, -1), (8,), -1, "(q^2 r/z;q^8)")
        add(S(1, 6, 1, 0, 1), (8,), 1, "(q^6 r w;q^8)")
        add(S(1, 4, 1, 0, -1), (8,), 1, "(q^4 r/w;q^8)")
        add(S(1, 0, 1, 0, 1), (8,), -1, "(r w;q^8)", OUTSIDE)
        add(S(1, 6, 1, 0, -1), (8,), -1, "(q^6 r/w;q^8)", INSIDE)
    else:
        add(S(1, 0, -1, -1), (8,), 1, "(1/(r z);q^8)")
        add(S(1, 6, -1, 1), (8,), 1, "(q^6 z/r;q^8)")
        add(S(1, 6, -1, -1), (8,), -1, "(q^6/(r z);q^8)")
        add(S(1, 4, -1, 1), (8,), -1, "(q^4 z/r;q^8)")
        add(S(1, 2, -1, 0, 1), (8,), 1, "(q^2 w/r;q^8)")
        add(S(1, 8, -1, 0, -1), (8,), 1, "(q^8/(r w);q^8)")
        add(S(1, 4, -1, 0, 1), (8,), -1, "(q^4 w/r;q^8)", OUTSIDE)
        add(S(1, 2, -1, 0, -1), (8,), -1, "(q^2/(r w);q^8)", INSIDE)
    eps = (-1, 1) if component == "-+" else (1, -1)
    fl = FactorList(i, 2, eps, (2,) if component == "-+" else (1,), "pmp", pref, facs)
    cs = ContourSpec([p for p in (_pole_family(f) for f in facs) if p is not None])
    return fl, cs


# ---------------------------------------------------------------------------
# specialisation
# ---------------------------------------------------------------------------


@dataclass
class Specialised:
    """Integrand with every zeta replaced by a signed power of q."""

    prefactor: Monomial
    factors: list[tuple[Monomial, tuple[int, ...], int, str | None, str, str]]
    families: list[tuple[int, Monomial, int, str, str]]  # (w, pole base, step, side, label)
    n_w: int


def zeta_values(zvals: Sequence) -> list[tuple[int, int]]:
    """Map z-values in {q^-2, 1} (given as 'q^-2'/-2 or '1'/0) to (sign, exponent) of zeta."""
    out = []
    for z in zvals:
        if z in (-2, "q^-2", "q**-2"):
            out.append((-1, -1))
        elif z in (0, 1, "1"):
            out.append((1, 0))
        else:
            raise ValueError(f"exact extraction supports z in {{q^-2, 1}}, got {z!r}")
    return out


def cf4_specialisation(N: int) -> list[tuple[int, int]]:
    return [(-1, -1)] * (N // 2) + [(1, 0)] * (N // 2)


def specialise(fl: FactorList, cs: ContourSpec, zeta_vals: Sequence[tuple[int, int]]) -> Specialised:
    facs = [(f.arg.specialise(zeta_vals), f.bases, f.power, f.side, f.label, f.origin) for f in fl.factors]
    fams = [(p.w_index, p.base.specialise(zeta_vals), p.step, p.side, p.label) for p in cs.families]
    return Specialised(fl.prefactor.specialise(zeta_vals), facs, fams, fl.n_w)


# ---------------------------------------------------------------------------
# expansion engine
# ---------------------------------------------------------------------------


def _ord(m: Monomial, weights: Sequence[Fraction]) -> Fraction:
    return m.q_order(weights)


def _subs_w(m: Monomial, a: int, P: Monomial) -> Monomial:
    """Replace w_a by the w-free monomial P."""
    w = list(m._pad(a + 1))
    e = w[a]
    if not e:
        return _strip(m)
    w[a] = 0
    return _strip(Monomial(m.coeff * P.coeff**e, m.q + e * P.q, m.r + e * P.r, tuple(w)))


def _strip(m: Monomial) -> Monomial:
    return m if m.has_w or not m.w else Monomial(m.coeff, m.q, m.r)


def _collect_members(facs, weights, budget) -> Counter:
    members: Counter = Counter()
    for arg, bases, power, *_ in facs:
        if arg.coeff == 0:
            continue
        for m, mult in lattice_factors(arg, bases, budget, weights):
            members[m] += power * mult
    return members


class _Split:
    """Members sorted into expandable, zero-order and rewrite-monomial parts."""

    def __init__(self, members: Counter, weights):
        self.mono = Monomial(1)
        self.expand: list[tuple[Monomial, int]] = []
        self.free: list[tuple[Monomial, int]] = []
        for m, p in members.items():
            if p == 0:
                continue
            o = _ord(m, weights)
            if o < 0:
                # (1 - m) = -m (1 - 1/m)
                if Fraction(p).denominator != 1:
                    raise ArithmeticError(f"fractional power of 1 - {m!r} has no monomial rewrite")
                self.mono = self.mono * (Monomial(-1) * m) ** p
                m, o = m.inverse(), -o
            if o > 0:
                self.expand.append((m, p))
            else:
                if m.coeff == 1 and m.r == 0 and not m.has_w:
                    if p > 0:
                        raise _Vanishes()
                    raise ArithmeticError("a vanishing denominator factor survives cancellation")
                if Fraction(p).denominator != 1:
                    raise ArithmeticError(f"fractional power of the order-zero factor 1 - {m!r}")
                if p < 0:
                    if m.has_w:
                        raise ArithmeticError(f"pole on the expansion circle from 1 - {m!r}")
                    raise ArithmeticError(f"denominator 1 - {m!r} is not invertible over Q[r, 1/r]")
                self.free.append((m, p))


class _Vanishes(Exception):
    pass


def _prune_bound(expand, free, target, nw, extra=()):
    """Lower bound on the q-order needed to move a w-exponent to ``target``.

    ``extra`` lists further ``(q-order, w-exponents)`` shift sources.
    """
    slope_p = [math.inf] * nw
    slope_m = [math.inf] * nw
    free_p = [0] * nw
    free_m = [0] * nw
    sources = [(m.q, m._pad(nw)) for m, _ in expand] + list(extra)
    for o, ks in sources:
        for a, k in enumerate(ks):
            if k > 0:
                slope_p[a] = min(slope_p[a], o / k)
            elif k < 0:
                slope_m[a] = min(slope_m[a], o / -k)
    for m, p in free:
        for a, k in enumerate(m._pad(nw)):
            if k > 0:
                free_p[a] += k * p
            elif k < 0:
                free_m[a] += -k * p

    def bound(b):
        cost = 0
        for a in range(nw):
            need = target[a] - b[a]
            if need > free_p[a]:
                c = (need - free_p[a]) * slope_p[a]
            elif need < -free_m[a]:
                c = (-need - free_m[a]) * slope_m[a]
            else:
                c = 0
            cost = max(cost, c)
        return cost if cost != math.inf else 10**9

    return bound


def _substitute(m: Monomial, weights) -> Monomial:
    return m.substitute(weights) if m.has_w else m


def _graded(m: Monomial, grade: int) -> Monomial:
    q = m.q * grade
    if q.denominator != 1:
        raise ArithmeticError(f"q exponent of {m!r} is not integral at grade {grade}")
    return Monomial(m.coeff, q, m.r, m.w)


def _ungrade(s: TruncatedQSeries, grade: int, qmax: int) -> TruncatedQSeries:
    if grade == 1:
        return s.truncate(qmax)
    terms = {}
    for (k, e), c in s.terms():
        if k % grade:
            raise ArithmeticError(f"fractional power q^({k}/{grade}) survived the integration")
        terms[(k // grade, e)] = c
    return TruncatedQSeries.from_terms(terms, min(qmax, s.max_order // grade))


def circle_integral(spec: Specialised, weights: Sequence, qmax: int,
                    exp_factory: Callable[[int], tuple[WLaurent, TruncatedQSeries | None]] | None = None,
                    origins: Iterable[str] | None = None) -> TruncatedQSeries:
    """Integral over the circles |w_a| ~ |q|^{rho_a} as an exact series to q^qmax.

    Weights may be fractions; internally q is then replaced by q^{1/grade}.
    ``exp_factory(budget)`` optionally supplies an extra factor split into a
    w-dependent exponent (in the circle variables, graded) and a w-free
    series; the exponential is taken here so that it can be pruned.
    The mode-sum path uses it.
    """
    weights = tuple(Fraction(x) for x in weights)
    grade = math.lcm(*(x.denominator for x in weights)) if weights else 1
    nw = spec.n_w
    facs = [f for f in spec.factors if origins is None or f[5] in set(origins)]
    pref = spec.prefactor
    rho_total = sum(weights) * grade
    # pass 1: monomial from negative-order members (independent of the budget)
    try:
        neg = _Split(_collect_members(facs, weights, -Fraction(1, grade)), weights)
    except _Vanishes:
        return TruncatedQSeries({}, qmax)
    lead = _graded(_substitute(pref * neg.mono, weights), grade)
    budget = grade * qmax - int(lead.q) - int(rho_total)
    if budget < 0:
        return TruncatedQSeries({}, qmax)
    try:
        split = _Split(_collect_members(facs, weights, Fraction(budget, grade)), weights)
    except _Vanishes:
        return TruncatedQSeries({}, qmax)
    if _substitute(pref * split.mono, weights) != _substitute(pref * neg.mono, weights):
        raise ArithmeticError("budget pass disagrees with rewrite pass")
    target = tuple(-1 - e for e in lead._pad(nw))
    w_expand = [(_graded(_substitute(m, weights), grade), p) for m, p in split.expand if m.has_w]
    pure_expand = [(_graded(_strip(m), grade), p) for m, p in split.expand if not m.has_w]
    w_free = [(_graded(_substitute(m, weights), grade), p) for m, p in split.free if m.has_w]
    pure_free = [(_strip(m), p) for m, p in split.free if not m.has_w]

    exp_free = None
    if exp_factory is not None:
        expo, exp_free = exp_factory(budget)
        extra = {(k[0], k[1:-1]) for k, _ in expo.terms() if any(k[1:-1])}
        bound_fn = _prune_bound(w_expand, w_free, target, nw, extra)
        acc = series_exp(expo.truncate(budget), bound_fn).prune(bound_fn)
    else:
        bound_fn = _prune_bound(w_expand, w_free, target, nw)
        acc = WLaurent.one(budget, nw)
    # cheap, high-slope factors first keep the support small
    w_expand.sort(key=lambda t: -min(t[0].q / abs(k) for k in t[0]._pad(nw) if k))
    for m, p in w_expand:
        acc = acc.mul_binomial(m, p).prune(bound_fn)
    for m, p in w_free:
        acc = acc.mul_binomial(m, p)
    coef = acc.w_extract(target)
    pure = TruncatedQSeries.one(budget)
    for m, p in sorted(pure_expand, key=lambda t: (t[1] < 0, t[0].q)):
        pure = pure.mul_binomial(m, p)
    for m, p in pure_free:
        pure = pure.mul_binomial(m, p)
    if exp_free is not None:
        pure = pure * exp_free.truncate(budget)
    out = coef * pure
    scale = Monomial(lead.coeff, lead.q + rho_total, lead.r)
    return _ungrade(out.mul_monomial(scale).truncate(grade * qmax), grade, qmax)


def residue(spec: Specialised, a: int, pole: Monomial, qmax: int) -> TruncatedQSeries:
    """Residue of the single-w integrand at a simple pole w = pole (w-free monomial)."""
    if spec.n_w != 1:
        raise NotImplementedError("explicit residues are supported for one integration variable")
    rho = (pole.q,)

    def members_at(budget):
        mem = _collect_members(spec.factors, rho, budget)
        out: Counter = Counter()
        for m, p in mem.items():
            out[_subs_w(m, a, pole)] += p
        return out

    # locate the vanishing member(s): monomials equal to exactly 1
    mem = members_at(qmax + 64)
    unit = Monomial(1)
    order = -mem.get(unit, 0)
    if order <= 0:
        return TruncatedQSeries({}, qmax)
    if order > 1:
        raise ArithmeticError("higher-order pole; only simple poles are supported")
    # Res of G/(1 - m0) with m0 = c w^s: the factor behaves as -s^{-1} (w - P)^{-1} * P... handled as
    # 1/(1 - m0(w)) ~ 1/(-s (w - P)/P) near P
    s = None
    for f in spec.factors:
        arg, bases, power = f[0], f[1], f[2]
        if power >= 0 or not arg.has_w:
            continue
        for m, mult in lattice_factors(arg, bases, qmax + 64, rho):
            if _subs_w(m, a, pole) == unit:
                s = m._pad(a + 1)[a]
    if s is None or abs(s) != 1:
        raise ArithmeticError("could not identify the pole factor")
    pref = _subs_w(spec.prefactor, a, pole)
    neg = Counter({m: p for m, p in members_at(-1).items() if m != unit})
    try:
        sp_neg = _Split(neg, ())
    except _Vanishes:
        return TruncatedQSeries({}, qmax)
    lead = pref * sp_neg.mono * Monomial(Fraction(-1, s), pole.q, pole.r) * Monomial(pole.coeff)
    budget = qmax - int(lead.q)
    if budget < 0:
        return TruncatedQSeries({}, qmax)
    allm = Counter({m: p for m, p in members_at(budget).items() if m != unit})
    try:
        sp = _Split(allm, ())
    except _Vanishes:
        return TruncatedQSeries({}, qmax)
    lead = pref * sp.mono * Monomial(Fraction(-1, s), pole.q, pole.r) * Monomial(pole.coeff)
    out = TruncatedQSeries.one(budget)
    for m, p in sorted(sp.expand, key=lambda t: (t[1] < 0, t[0].q)):
        out = out.mul_binomial(m, p)
    for m, p in sp.free:
        out = out.mul_binomial(m, p)
    return out.mul_monomial(lead).truncate(qmax)


# ---------------------------------------------------------------------------
# contour choice
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Mismatch:
    w_index: int
    pole: Monomial
    contour_side: str
    label: str


def _family_poles(fam, limit_lo, limit_hi):
    """Members of a pole family with q-order in [limit_lo, limit_hi]."""
    a, base, step, side, label = fam
    out = []
    if step == 0:
        if limit_lo <= base.q <= limit_hi:
            out.append(base)
        return out
    n = 0
    while True:
        p = Monomial(base.coeff, base.q + step * n, base.r)
        if (step > 0 and p.q > limit_hi) or (step < 0 and p.q < limit_lo):
            break
        if limit_lo <= p.q <= limit_hi:
            out.append(p)
        n += 1
        if n > 10000:
            break
    return out


def mismatches(spec: Specialised, weights: Sequence[int]) -> list[Mismatch]:
    """Poles whose prescribed side differs from the side the circle gives them."""
    out = []
    for fam in spec.families:
        a, base, step, side, label = fam
        rho = Fraction(weights[a])
        if side == INSIDE:
            # circle puts poles with order > rho inside
            bad = [p for p in _family_poles(fam, -10**6, rho) ]
        else:
            bad = [p for p in _family_poles(fam, rho, 10**6)]
        for p in bad:
            if p.q == rho:
                raise ArithmeticError(f"pole {p!r} lies on the circle of weight {rho}")
            out.append(Mismatch(a, p, side, label))
    return out


def choose_weights(spec: Specialised, candidates: Iterable[int] = range(-9, 10, 2)) -> tuple[tuple[int, ...], list[Mismatch]]:
    """Pick odd circle weights with the fewest contour mismatches."""
    best = None
    cands = list(candidates)
    for combo in _product(cands, spec.n_w):
        try:
            mm = mismatches(spec, combo)
        except ArithmeticError:
            continue
        key = (len(mm), sum(abs(c - 2) for c in combo))
        if best is None or key < best[0]:
            best = (key, combo, mm)
    if best is None:
        raise ArithmeticError("no admissible expansion circle")
    return best[1], best[2]


def _product(cands, n):
    if n == 0:
        yield ()
        return
    for c in cands:
        for rest in _product(cands, n - 1):
            yield (c,) + rest


def contour_integral(spec: Specialised, qmax: int, weights: Sequence[int] | None = None
                     ) -> tuple[TruncatedQSeries, dict]:
    """Integral over the prescribed contour, with provenance."""
    if weights is None:
        weights, mm = choose_weights(spec)
    else:
        mm = mismatches(spec, weights)
    if mm and spec.n_w != 1:
        raise NotImplementedError("contour corrections need a single integration variable")
    total = circle_integral(spec, weights, qmax)
    corr = []
    for m in mm:
        res = residue(spec, m.w_index, m.pole, qmax)
        # prescribed inside but outside the circle: add; prescribed outside but inside: subtract
        total = total + res if m.contour_side == INSIDE else total - res
        corr.append({"pole": repr(m.pole), "family": m.label, "prescribed": m.contour_side})
    return total, {"weights": list(weights), "corrections": corr}


# ---------------------------------------------------------------------------
# public extraction
# ---------------------------------------------------------------------------


def g_series(qmax: int) -> TruncatedQSeries:
    return product_series([(Monomial(1, 2), (4,), 1), (Monomial(1, 4), (4,), -1)], qmax)


def _eps_from(eps) -> tuple[int, ...]:
    if isinstance(eps, str):
        return tuple(1 if c == "+" else -1 for c in eps)
    return tuple(int(e) for e in eps)


def extract_P(i: int, N: int, eps, mode: str = "fracture", specialization=None, qmax: int = 48,
              with_provenance: bool = False):
    """Exact series of P^(i) at the z in {q^-2, 1} specialisation."""
    eps = _eps_from(eps)
    zv = cf4_specialisation(N) if specialization is None else zeta_values(specialization)
    if sum(1 for e in eps if e == 1) != N // 2:
        out = TruncatedQSeries({}, qmax)
        prov = {"note": "charge-violating component vanishes"}
    elif mode == "boundary":
        out, prov = _boundary_P(i, N, eps, zv, qmax)
    else:
        fl, cs = build_integrand(i, N, eps, mode)
        spec = specialise(fl, cs, zv)
        out, prov = contour_integral(spec, qmax)
        prov["contour"] = cs.describe()
    out = out.assert_final()
    return (out, prov) if with_provenance else out


def extract_gP(i: int, eps, qmax: int = 48, mode: str = "fracture", N: int = 2, specialization=None):
    return g_series(qmax) * extract_P(i, N, eps, mode, specialization, qmax)


def pmp_component(i: int, component: str, qmax: int) -> TruncatedQSeries:
    """g P from the explicit N=2 inventory at z = 1."""
    fl, cs = pmp_integrand(i, component)
    spec = specialise(fl, cs, [(1, 0)])
    out, _ = contour_integral(spec, qmax)
    return out


def residue_identity_check(i: int, qmax: int = 24):
    """-(q^2 z)^i z (1-q^2)^2 Res_{w=q^2 z}[...] at z=1, which should be exactly 1."""
    from .report import RunReport

    fl, cs = pmp_integrand(i, "-+")
    spec = specialise(fl, cs, [(1, 0)])
    res = residue(spec, 0, Monomial(1, 2), qmax)
    val = -res  # prefactor of the -+ inventory is +; the identity carries a minus sign
    one = TruncatedQSeries.one(qmax)
    mism = val.first_mismatch(one)
    return RunReport("residue-identity", {"i": i, "order": qmax},
                     {"series": val, "first_mismatch": mism}, ok=mism is None)


# ---------------------------------------------------------------------------
# Gaussian mode-sum form of the integrand
# ---------------------------------------------------------------------------


def _zsum(zv, n: int, sign: int, nw: int) -> HPoly:
    """sum_j z_j^{sign n} at the specialisation (z_j = zeta_j^2)."""
    out = HPoly({}, nw)
    for _, t in zv:
        out = out + HPoly.mono(1, 2 * (2 * t * n * sign), 0, (), nw)
    return out


def _wsum(nw: int, n: int, sign: int) -> HPoly:
    out = HPoly({}, nw)
    for a in range(nw):
        w = [0] * nw
        w[a] = sign * n
        out = out + HPoly.mono(1, 0, 0, w, nw)
    return out


def _hgrade(p: HPoly, grade: int) -> HPoly:
    if grade == 1:
        return p
    return HPoly({(k[0] * grade,) + k[1:]: v for k, v in p.terms.items()}, p.nw)


def expsum_exponent(i: int, zv, nw: int, primed: bool, weights: Sequence, qmax: int):
    """The exponent of the Gaussian form of the integrand, split by w-dependence.

    Returns ``(L_w, L_free, zero_factors)``: the w-dependent part as a
    WLaurent in the circle variables, the q-small w-free part as a series,
    and product factors that resum the w-free terms of q-order zero.  Those
    terms have the form ``c x^n / n`` with ``x`` a power of r; summed over n
    with the mode denominators they give ``(x; q^4, q^s)^-c (q^2 x; q^4, q^s)^c``.
    With fractional weights the two series are graded in q^{1/grade} and
    ``qmax`` is in those units.
    """
    weights = tuple(Fraction(x) for x in weights)
    grade = math.lcm(*(x.denominator for x in weights)) if weights else 1
    gw = tuple(x * grade for x in weights)
    total_w = WLaurent.from_terms({}, qmax, nw)
    total_free = TruncatedQSeries({}, qmax)
    zero_pattern: dict[int, Fraction] | None = None
    ag_step = None
    n = 1
    quiet = 0
    while True:
        c = boson_coeffs(i, n, primed)
        two_n = HPoly({(2 * n, 0) + (0,) * nw: 1, (-2 * n, 0) + (0,) * nw: 1}, nw)  # q^n + q^-n
        x = HPoly.mono(1, 7 * n, 0, (), nw) * _zsum(zv, n, 1, nw) - HPoly.mono(1, n, 0, (), nw) * two_n * _wsum(nw, n, 1)
        y = HPoly.mono(1, -5 * n, 0, (), nw) * _zsum(zv, n, -1, nw) - HPoly.mono(1, n, 0, (), nw) * two_n * _wsum(nw, n, -1)
        al, ga = c.alpha._lift(nw), c.gamma._lift(nw)
        b, d = c.beta_num._lift(nw), c.delta_num._lift(nw)
        poly = (ga * x * x) * Fraction(1, 2) - al * ga * x * y + (al * y * y) * Fraction(1, 2) \
            + (d + ga * b) * x - (b + al * d) * y
        free, wpart = poly.drop_w_free()
        zero = {k[1]: v for k, v in free.terms.items() if Fraction(k[0], 2) + n == 0}
        free = HPoly({k[:2]: v for k, v in free.terms.items() if Fraction(k[0], 2) + n != 0}, 0)
        ag = c.alpha_gamma
        if ag.coeff != 1:
            raise ArithmeticError("unexpected sign in alpha*gamma")
        if n == 1:
            zero_pattern = zero
            ag_step = int(ag.q)
        elif zero != {k * n: v for k, v in zero_pattern.items()}:
            raise ArithmeticError(f"mode {n}: q-order-zero terms are not geometric in n")
        ow = grade * (wpart.min_q_order(weights) + n)
        of = grade * (free.min_q_order() + n)
        if wpart and ow < 1:
            raise ArithmeticError(f"mode {n}: w-dependent exponent term of q-order {ow / grade} at weights {weights}")
        if free and of < 1:
            raise ArithmeticError(f"mode {n}: w-free exponent term of negative q-order")
        den = [(Monomial(-1, 2 * n * grade), -1), (_graded(ag, grade), -1)]
        scale = Monomial(Fraction(1, n), n * grade)
        for part, order, dense in ((wpart, ow, lambda p: p.to_dense(qmax - n * grade, gw)),
                                   (free, of, lambda p: p.to_dense(qmax - n * grade))):
            if part and order <= qmax:
                s = dense(_hgrade(part, grade))
                for m, pw in den:
                    s = s.mul_binomial(m, pw)
                s = s.mul_monomial(scale).truncate(qmax)
                if part is wpart:
                    total_w = total_w + s
                else:
                    total_free = total_free + s
        if min(ow, of) > qmax:
            quiet += 1
            if quiet >= 4:
                break
        else:
            quiet = 0
        n += 1
        if n > 40 * (qmax + 10):
            raise ArithmeticError("mode sum does not truncate")
    zero_factors = []
    for k, v in sorted((zero_pattern or {}).items()):
        if v.denominator != 1:
            raise ArithmeticError("q-order-zero term with a non-integral coefficient")
        zero_factors.append((Monomial(1, 0, k), (4, ag_step), -int(v)))
        zero_factors.append((Monomial(1, 2, k), (4, ag_step), int(v)))
    return total_w, total_free, zero_factors


def _mode_poly(i: int, zv, nw: int, primed: bool, n: int) -> tuple[HPoly, Monomial]:
    c = boson_coeffs(i, n, primed)
    two_n = HPoly({(2 * n, 0) + (0,) * nw: 1, (-2 * n, 0) + (0,) * nw: 1}, nw)
    x = HPoly.mono(1, 7 * n, 0, (), nw) * _zsum(zv, n, 1, nw) - HPoly.mono(1, n, 0, (), nw) * two_n * _wsum(nw, n, 1)
    y = HPoly.mono(1, -5 * n, 0, (), nw) * _zsum(zv, n, -1, nw) - HPoly.mono(1, n, 0, (), nw) * two_n * _wsum(nw, n, -1)
    al, ga = c.alpha._lift(nw), c.gamma._lift(nw)
    b, d = c.beta_num._lift(nw), c.delta_num._lift(nw)
    poly = (ga * x * x) * Fraction(1, 2) - al * ga * x * y + (al * y * y) * Fraction(1, 2) \
        + (d + ga * b) * x - (b + al * d) * y
    return poly, c.alpha_gamma


def mode_sum_factors(i: int, zv, nw: int, primed: bool, n_check: int = 10):
    """Resum the Gaussian mode sum into infinite-product factors.

    Every monomial of the mode-n exponent is ``c_n y^n`` with a base ``y``
    independent of n and ``c_n = A + B (-1)^n``.  With the mode denominators
    ``n (1 + q^{2n}) (1 - q^{sn})`` the sum over n is

        (y; q^4, q^s)^-A (q^2 y; q^4, q^s)^A (-y; q^4, q^s)^-B (-q^2 y; q^4, q^s)^B.

    The pattern is checked on the first ``n_check`` modes.  Powers may be
    half-integral.
    """
    data: dict[tuple, dict[int, Fraction]] = {}
    step = None
    for n in range(1, n_check + 1):
        poly, ag = _mode_poly(i, zv, nw, primed, n)
        if ag.coeff != 1 or ag.r or ag.has_w or ag.q % n:
            raise ArithmeticError("alpha*gamma is not a pure power q^{sn}")
        if step is None:
            step = int(ag.q)
        elif ag.q != step * n:
            raise ArithmeticError("alpha*gamma is not geometric in n")
        for k, v in poly.terms.items():
            base = (Fraction(k[0], 2 * n) + 1, Fraction(k[1], n)) + tuple(Fraction(e, n) for e in k[2:])
            data.setdefault(base, {})[n] = Fraction(v)
    out = []
    for base, cs in sorted(data.items()):
        c1, c2 = cs.get(1, Fraction(0)), cs.get(2, Fraction(0))
        A, B = (c2 + c1) / 2, (c2 - c1) / 2
        for n in range(1, n_check + 1):
            if cs.get(n, 0) != A + B * (-1) ** n:
                raise ArithmeticError(f"mode coefficients of base {base} are not of period two")
        if any(e.denominator != 1 for e in base[1:]):
            raise ArithmeticError(f"base {base} has a fractional power of r or w")
        y = Monomial(1, base[0], int(base[1]), tuple(int(e) for e in base[2:]))
        for sign, pw in ((1, A), (-1, B)):
            if pw:
                m = Monomial(sign) * y
                out.append((m, (4, step), -pw, None, "mode", "iprime"))
                out.append((Monomial(1, 2) * m, (4, step), pw, None, "mode", "iprime"))
    return out


def _regrade(s: TruncatedQSeries, grade: int, qmax_graded: int) -> TruncatedQSeries:
    if grade == 1:
        return s.truncate(qmax_graded)
    return TruncatedQSeries.from_terms({(k * grade, e): c for (k, e), c in s.terms()}, qmax_graded)


def circle_integral_expsum(i: int, N: int, eps, primed: bool, weights: Sequence, qmax: int,
                           zv=None, resum: bool = True) -> TruncatedQSeries:
    """Circle integral with the Gaussian mode-sum form of the integrand.

    Only the prefactor and rational factors come from the product inventory.
    By default the mode sum is resummed into products; ``resum=False``
    exponentiates it term by term instead (slow, used as a cross-check).
    """
    eps = _eps_from(eps)
    zv = cf4_specialisation(N) if zv is None else zv
    mode = "fracture" if primed else "boundary"
    fl, cs = build_integrand(i, N, eps, mode)
    spec = specialise(fl, cs, zv)
    spec = Specialised(spec.prefactor, [f for f in spec.factors if f[5] != "iprime"],
                       spec.families, spec.n_w)
    grade = math.lcm(*(Fraction(x).denominator for x in weights))
    if resum:
        facs = spec.factors + mode_sum_factors(i, zv, fl.n_w, primed)
        return circle_integral(Specialised(spec.prefactor, facs, spec.families, spec.n_w), weights, qmax)

    def factory(budget):
        L_w, L_free, zero = expsum_exponent(i, zv, fl.n_w, primed, weights, budget)
        prod = _regrade(product_series(zero, budget // grade + 1), grade, budget)
        return L_w, series_exp(L_free) * prod

    return circle_integral(spec, weights, qmax, exp_factory=factory)


def _boundary_P(i: int, N: int, eps, zv, qmax: int):
    """Boundary-mode P from the unprimed mode sum on a circle where it converges.

    The unprimed exponent is q-small only for 2 < rho < 3, so rho = 5/2.
    A component whose rational poles cannot all sit on the correct side of
    that circle is obtained from its partner through the identity sum rule.
    """
    if N != 2:
        raise NotImplementedError("boundary mode is implemented for the one-site magnetisation (N=2)")
    rho = Fraction(5, 2)
    fl, cs = build_integrand(i, N, eps, "boundary")
    spec = specialise(fl, cs, zv)
    if not mismatches(spec, (rho,)):
        val = circle_integral_expsum(i, N, eps, False, (rho,), qmax, zv)
        return val, {"weights": [str(rho)], "path": "mode-sum", "corrections": []}
    other = tuple(-e for e in eps)
    fl2, cs2 = build_integrand(i, N, other, "boundary")
    if mismatches(specialise(fl2, cs2, zv), (rho,)):
        raise ArithmeticError("no circle is consistent with the rational poles and the mode sum")
    partner = circle_integral_expsum(i, N, other, False, (rho,), qmax, zv)
    val = g_series(qmax).inverse() - partner
    return val, {"weights": [str(rho)], "path": "identity minus partner", "corrections": []}
