"""Floating-point evaluation of the two-point function at generic spectral parameters.

The w integral is computed by summing residues over the pole families that
the contour prescription puts inside.  Each residue is taken as a small
trapezoidal circle integral around the pole, which also covers the rare
higher-order coincidences.  A large-circle quadrature is kept as an
independent check where a separating circle exists.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .correlator import INSIDE, OUTSIDE, build_integrand
from .freefield import qpoch_multi
from .model import PERM, K_hat, R, K, qpoch
from .report import RunReport, Timer

BASIS = ((1, 1), (1, -1), (-1, 1), (-1, -1))


class PoleCollision(ArithmeticError):
    """An inside pole sits on top of an outside one: the contour is pinched."""


class NoConvergence(ArithmeticError):
    pass


@dataclass(frozen=True)
class PoleFamily:
    """Numeric pole lattice ``base * ratio^n`` (n >= 0)."""

    base: complex
    ratio: complex
    side: str
    kind: str  # simple (rational factor) | product
    label: str

    def member(self, n: int) -> complex:
        return self.base * self.ratio**n


def g_value(q: float, tol: float = 1e-17) -> float:
    return (qpoch(q * q, q**4, tol) / qpoch(q**4, q**4, tol)).real


def log_qpoch_multi(a: complex, bases: Sequence[complex], tol: float = 1e-17) -> complex:
    """log (a; b_1, ..., b_k)_inf, summed in the log domain so huge arguments do not overflow."""
    if not bases:
        return cmath.log(1 - a)
    out = 0j
    t = complex(a)
    while abs(t) >= tol:
        out += log_qpoch_multi(t, bases[1:], tol)
        t *= bases[0]
    return out


class Integrand:
    """The N = 2 integrand at fixed (q, r, zeta1, zeta2) as a function of w."""

    def __init__(self, i: int, eps: Sequence[int], q: float, r: float, zetas: Sequence[complex],
                 tol: float = 1e-17):
        self.fl, self.cs = build_integrand(i, 2, eps, "fracture")
        if self.fl.n_w != 1:
            raise ValueError("only the charge-neutral components have an integral form")
        self.q, self.r, self.zetas, self.tol = q, r, tuple(complex(z) for z in zetas), tol
        self.dynamic = []
        try:
            static = cmath.log(self.fl.prefactor.evaluate(q, r, self.zetas, [1.0]))
            for f in self.fl.factors:
                if any(f.arg.w):
                    self.dynamic.append((f, f.arg.evaluate(q, r, self.zetas, [1.0]), f.arg.w[0]))
                else:
                    static += self._log_factor(f, f.arg.evaluate(q, r, self.zetas, [1.0]))
        except (ValueError, ZeroDivisionError) as exc:
            # a w-independent factor vanishes: the poles it would cancel are pinched
            raise PoleCollision(f"degenerate spectral parameters {self.zetas}") from exc
        self.w_power = self.fl.prefactor.w[0]
        self.log_static = static

    def _log_factor(self, f, a) -> complex:
        return f.power * log_qpoch_multi(a, [self.q**b for b in f.bases], self.tol)

    def log(self, w: complex) -> complex:
        v = self.log_static + self.w_power * cmath.log(w)
        for f, a0, e in self.dynamic:
            v += self._log_factor(f, a0 * w**e)
        return v

    def __call__(self, w: complex) -> complex:
        return cmath.exp(self.log(w))

    def families(self) -> list[PoleFamily]:
        out = []
        for fam in self.cs.families:
            base = fam.base.evaluate(self.q, self.r, self.zetas)
            kind = "simple" if fam.step == 0 else "product"
            ratio = self.q ** fam.step if fam.step else 0.0
            out.append(PoleFamily(base, ratio, fam.side, kind, fam.label))
        return out


def _members(fams: Sequence[PoleFamily], side: str, n_max: int):
    for fam in fams:
        if fam.side != side:
            continue
        if fam.kind == "simple":
            yield fam.base, fam.label, 0
            continue
        for n in range(n_max + 1):
            yield fam.member(n), fam.label, n


def _small_circle(f, w0: complex, radius: float, points: int = 32) -> complex:
    th = 2 * np.pi * (np.arange(points) + 0.5) / points
    e = np.exp(1j * th)
    return complex(np.mean([f(w0 + radius * x) * radius * x for x in e]))


def residue_sum(fn: Integrand, tol: float = 1e-12, n_limit: int = 400, quiet: int = 3
                ) -> tuple[complex, dict]:
    """Sum of residues at the inside poles, one lattice period at a time.

    Contributions shrink geometrically with the period index; the sum stops
    once ``quiet`` consecutive periods each add less than ``tol``.
    """
    fams = fn.families()
    outside = [w for w, _, _ in _members(fams, OUTSIDE, 2)]
    seen: list[complex] = []
    total, calm, n = 0j, 0, 0
    history = []
    while n <= n_limit:
        layer = _dedupe([fam.member(n) for fam in fams if fam.side == INSIDE
                         and (fam.kind == "product" or n == 0)])
        layer = [w for w in layer if not any(abs(w - o) <= 1e-10 * abs(w) for o in seen)]
        nearby = seen[-40:] + layer + outside + [fam.member(n + 1) for fam in fams if fam.kind == "product"]
        part = 0j
        for w in layer:
            for v in outside:
                if abs(w - v) <= math.sqrt(tol) * abs(w):
                    raise PoleCollision(f"inside pole {w} meets outside pole {v}")
            d = min(abs(w - v) for v in nearby + [0j] if abs(w - v) > 1e-10 * abs(w))
            part += _small_circle(fn, w, 0.25 * d)
        seen.extend(layer)
        total += part
        history.append(abs(part))
        calm = calm + 1 if abs(part) < tol * max(1.0, abs(total)) else 0
        if calm >= quiet:
            return total, {"periods": n + 1, "poles": len(seen), "last_period": abs(part)}
        n += 1
    raise NoConvergence("residue sum did not settle")


def _dedupe(points: list[complex], rel: float = 1e-10) -> list[complex]:
    out: list[complex] = []
    for p in points:
        if not any(abs(p - o) <= rel * abs(p) for o in out):
            out.append(p)
    return out


def circle_value(fn: Integrand, radius: float, points: int = 512) -> complex:
    """Trapezoidal integral over |w| = radius (valid when it separates the families)."""
    th = 2 * np.pi * (np.arange(points) + 0.5) / points
    ws = radius * np.exp(1j * th)
    return complex(np.mean([fn(w) * w for w in ws]))


def separating_radius(fn: Integrand, n_max: int = 40) -> float | None:
    """Geometric midpoint of the widest annulus splitting inside from outside poles."""
    fams = fn.families()
    ins = [abs(w) for w, _, _ in _members(fams, INSIDE, n_max)]
    outs = [abs(w) for w, _, _ in _members(fams, OUTSIDE, n_max)]
    lo, hi = max(ins, default=0.0), min(outs, default=math.inf)
    if not lo < hi:
        return None
    return math.sqrt(lo * hi) if hi < math.inf else 2 * lo


def _eps(eps_pair) -> tuple[int, int]:
    if isinstance(eps_pair, str):
        eps_pair = tuple(1 if c == "+" else -1 for c in eps_pair)
    a, b = (int(x) for x in eps_pair)
    return a, b


def eval_P_numeric(i: int, zeta1: complex, zeta2: complex, eps_pair, q: float, r: float,
                   tol: float = 1e-12, method: str = "residues", product_tol: float = 1e-17) -> complex:
    """g P^{(i)}(zeta1, zeta2)_{eps1 eps2} as a complex number."""
    if abs(q) > 0.5:
        raise ValueError("the numeric kernel is tuned for |q| <= 0.5")
    eps = _eps(eps_pair)
    if eps[0] == eps[1]:
        return 0j
    fn = Integrand(i, eps, q, r, (zeta1, zeta2), product_tol)
    if method == "residues":
        val, _ = residue_sum(fn, tol)
    elif method == "circle":
        rad = separating_radius(fn)
        if rad is None:
            raise ArithmeticError("no circle separates the inside and outside poles")
        val = circle_value(fn, rad)
    else:
        raise ValueError("method must be 'residues' or 'circle'")
    return g_value(q, product_tol) * val


def p_vector(zeta1, zeta2, q, r, i: int = 0, tol: float = 1e-12, product_tol: float = 1e-17) -> np.ndarray:
    """Components in the order ++, +-, -+, --."""
    return np.array([eval_P_numeric(i, zeta1, zeta2, e, q, r, tol, product_tol=product_tol)
                     for e in BASIS])


def _r12(m):
    return m


def _r21(m):
    return PERM @ m @ PERM


def qkz_rhs(j: int, zeta1, zeta2, q, r, vec: np.ndarray, tol: float = 1e-17) -> np.ndarray:
    """Right side of the level-2 boundary qKZ relation for shifting zeta_j."""
    I2 = np.eye(2)
    if j == 1:
        k1 = np.kron(K(q, r, zeta1, tol), I2)
        kh = np.kron(K_hat(q, r, q**-2 * zeta1, tol), I2)
        op = kh @ _r21(R(q, zeta2 * zeta1, tol)) @ k1 @ _r12(R(q, zeta1 / zeta2, tol))
    elif j == 2:
        k2 = np.kron(I2, K(q, r, zeta2, tol))
        kh = np.kron(I2, K_hat(q, r, q**-2 * zeta2, tol))
        op = _r21(R(q, q**-4 * zeta2 / zeta1, tol)) @ kh @ _r12(R(q, zeta1 * zeta2, tol)) @ k2
    else:
        raise ValueError("j must be 1 or 2")
    return op @ vec


def qkz_residual(zeta1, zeta2, q, r, tol: float = 1e-12, product_tol: float = 1e-17) -> RunReport:
    """Max-abs residual of the i = 0 level-2 relations for j = 1, 2, plus the exchange relation."""
    with Timer() as t:
        base = p_vector(zeta1, zeta2, q, r, 0, tol, product_tol)
        res = {}
        for j, shifted in ((1, (q**-4 * zeta1, zeta2)), (2, (zeta1, q**-4 * zeta2))):
            lhs = p_vector(*shifted, q, r, 0, tol, product_tol)
            rhs = qkz_rhs(j, zeta1, zeta2, q, r, base, product_tol)
            res[f"qkz_j{j}"] = float(np.abs(lhs - rhs).max())
        res["exchange"] = exchange_residual(zeta1, zeta2, q, r, tol, product_tol, base)
    scale = float(np.abs(base).max())
    return RunReport("qkz-check", {"q": q, "r": r, "zeta1": zeta1, "zeta2": zeta2, "tol": tol,
                                   "product_tol": product_tol},
                     {**res, "p_vector": base, "scale": scale},
                     ok=max(res.values()) < 1e-8, elapsed=t.elapsed)


def exchange_residual(zeta1, zeta2, q, r, tol: float = 1e-12, product_tol: float = 1e-17,
                      base: np.ndarray | None = None) -> float:
    """|P(zeta2, zeta1) - P R(zeta1/zeta2) P(zeta1, zeta2)|."""
    if base is None:
        base = p_vector(zeta1, zeta2, q, r, 0, tol, product_tol)
    swapped = p_vector(zeta2, zeta1, q, r, 0, tol, product_tol)
    return float(np.abs(swapped - PERM @ R(q, zeta1 / zeta2, product_tol) @ base).max())


def cf4_values(q: float, r: float, i: int = 0, tol: float = 1e-12) -> dict[str, complex]:
    """g P_{-+} and g P_{+-} at zeta = (-1/q, 1)."""
    return {c: eval_P_numeric(i, -1 / q, 1.0, c, q, r, tol) for c in ("-+", "+-")}
