"""Bulk R-matrix, boundary K-matrices, their normalisations and the field map.

Basis order for two sites is ``++, +-, -+, --``.  Components follow
``R v_{e1} (x) v_{e2} = sum R^{e1 e2}_{f1 f2} v_{f1} (x) v_{f2}`` so the
column index carries the incoming spins and the row index the outgoing ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .report import RunReport

Number = Union[int, float, complex, Fraction]

DEFAULT_PRODUCT_TOL = 1e-17

PERM = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
I2 = np.eye(2, dtype=complex)


class SingularInput(ValueError):
    """Parameters sit on a pole of a weight."""


def qpoch(a: complex, b: complex, tol: float = DEFAULT_PRODUCT_TOL, max_terms: int = 100000) -> complex:
    """Numerical (a; b)_inf, cut once |a b^k| < tol."""
    if abs(b) >= 1:
        raise ValueError("base must satisfy |b| < 1")
    out = 1 + 0j
    t = complex(a)
    for _ in range(max_terms):
        if abs(t) < tol:
            return out
        out *= 1 - t
        t *= b
    raise RuntimeError("infinite product did not converge")


def delta_from_q(q: float) -> float:
    return (q + 1 / q) / 2


def q_from_delta(delta: float) -> float:
    """The root of (q + 1/q)/2 = delta in (-1, 0), for delta < -1."""
    if not delta < -1:
        raise ValueError("massive antiferromagnetic regime needs delta < -1")
    return delta + math.sqrt(delta * delta - 1)


def idx(e: int) -> int:
    return 0 if e > 0 else 1


def comp(m: np.ndarray, e1: int, e2: int, f1: int, f2: int) -> complex:
    """``R^{e1 e2}_{f1 f2}`` read off a 4x4 matrix."""
    return m[idx(f1) * 2 + idx(f2), idx(e1) * 2 + idx(e2)]


# ---------------------------------------------------------------------------
# R-matrix
# ---------------------------------------------------------------------------


def kappa(q: complex, zeta: complex, tol: float = DEFAULT_PRODUCT_TOL) -> complex:
    z2 = zeta * zeta
    num = qpoch(q**4 * z2, q**4, tol) * qpoch(q**2 / z2, q**4, tol)
    den = qpoch(q**4 / z2, q**4, tol) * qpoch(q**2 * z2, q**4, tol)
    return zeta * num / den


@dataclass(frozen=True)
class RMatrix:
    q: complex
    zeta: complex
    entries: np.ndarray
    kappa: complex


def r_weights(q: complex, zeta: complex) -> tuple[complex, complex]:
    z2 = zeta * zeta
    den = 1 - q * q * z2
    if abs(den) < 1e-300:
        raise SingularInput("zeta^2 = q^-2 is a pole of the R-matrix")
    return (1 - z2) * q / den, (1 - q * q) * zeta / den


def r_matrix(q: complex, zeta: complex, product_tol: float = DEFAULT_PRODUCT_TOL,
             normalised: bool = True) -> RMatrix:
    """R(zeta); the raw weights (``normalised=False``) have a pole at zeta^2 = q^-2.

    In the normalised matrix that pole cancels against the (q^2 zeta^2; q^4)
    factor of kappa, so both are multiplied by 1 - q^2 zeta^2 before dividing.
    """
    if zeta == 0:
        raise SingularInput("zeta = 0")
    z2 = zeta * zeta
    if not normalised:
        b, c = r_weights(q, zeta)
        m = np.zeros((4, 4), dtype=complex)
        m[0, 0] = m[3, 3] = 1
        m[1, 1] = m[2, 2] = b
        m[1, 2] = m[2, 1] = c
        return RMatrix(q, zeta, m, 1.0)
    if zeta == 1:
        return RMatrix(q, zeta, PERM.copy(), 1.0)
    d = 1 - q * q * z2
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = m[3, 3] = d
    m[1, 1] = m[2, 2] = (1 - z2) * q
    m[1, 2] = m[2, 1] = (1 - q * q) * zeta
    num = qpoch(q**4 * z2, q**4, product_tol) * qpoch(q**2 / z2, q**4, product_tol)
    den = qpoch(q**4 / z2, q**4, product_tol) * qpoch(q**6 * z2, q**4, product_tol)
    k_reg = zeta * num / den
    if abs(k_reg) < 1e-300:
        raise SingularInput("the normalisation vanishes: R has a pole here")
    return RMatrix(q, zeta, m / k_reg, k_reg / d if abs(d) > 1e-300 else complex("inf"))


def R(q, zeta, tol=DEFAULT_PRODUCT_TOL) -> np.ndarray:
    return r_matrix(q, zeta, tol).entries


# ---------------------------------------------------------------------------
# K-matrix
# ---------------------------------------------------------------------------


def phi(q: complex, z: complex, r: complex, tol: float = DEFAULT_PRODUCT_TOL) -> complex:
    num = qpoch(q**4 * r * z, q**4, tol) * qpoch(q**6 * z * z, q**8, tol)
    den = qpoch(q**2 * r * z, q**4, tol) * qpoch(q**8 * z * z, q**8, tol)
    return num / den


def f_norm(q: complex, zeta: complex, r: complex, tol: float = DEFAULT_PRODUCT_TOL) -> complex:
    z2 = zeta * zeta
    return phi(q, 1 / z2, r, tol) / phi(q, z2, r, tol)


@dataclass(frozen=True)
class KMatrix:
    q: complex
    r: complex
    zeta: complex
    entries: np.ndarray
    f_norm: complex
    variant: str = "bullet"

    def hat(self) -> np.ndarray:
        """Entry-swapped matrix: hat(K)^{e'}_e = K^{-e}_{-e'}."""
        return np.diag(self.entries.diagonal()[::-1])


def k_matrix(q: complex, r: complex, zeta: complex, variant: str = "bullet",
             product_tol: float = DEFAULT_PRODUCT_TOL) -> KMatrix:
    if variant not in ("bullet", "circle"):
        raise ValueError("variant must be 'bullet' or 'circle'")
    arg = zeta if variant == "bullet" else -1 / (q * zeta)
    z2 = arg * arg
    if abs(z2 - r) < 1e-300:
        raise SingularInput("zeta^2 = r is a pole of the K-matrix")
    f = f_norm(q, arg, r, product_tol)
    m = np.diag([(1 - r * z2) / (z2 - r), 1]).astype(complex) / f
    return KMatrix(q, r, zeta, m, f, variant)


def K(q, r, zeta, tol=DEFAULT_PRODUCT_TOL) -> np.ndarray:
    return k_matrix(q, r, zeta, "bullet", tol).entries


def K_hat(q, r, zeta, tol=DEFAULT_PRODUCT_TOL) -> np.ndarray:
    return k_matrix(q, r, zeta, "bullet", tol).hat()


# ---------------------------------------------------------------------------
# relations
# ---------------------------------------------------------------------------


def on_12(m4: np.ndarray, n: int = 3) -> np.ndarray:
    return np.kron(m4, np.eye(2 ** (n - 2)))


def _p23() -> np.ndarray:
    return np.kron(I2, PERM)


def crossing_residual(q, zeta, tol=DEFAULT_PRODUCT_TOL) -> float:
    a = R(q, zeta, tol)
    b = R(q, -1 / (q * zeta), tol)
    worst = 0.0
    for e1 in (1, -1):
        for e2 in (1, -1):
            for f1 in (1, -1):
                for f2 in (1, -1):
                    lhs = comp(a, e1, e2, f1, f2)
                    worst = max(worst, abs(lhs - comp(b, -f2, e1, -e2, f1)),
                                abs(lhs - comp(b, e2, -f1, f2, -e1)))
    return worst


def yang_baxter_residual(q, z1, z2, z3, tol=DEFAULT_PRODUCT_TOL) -> float:
    p23 = _p23()
    r12 = lambda m: np.kron(m, I2)  # noqa: E731
    r23 = lambda m: np.kron(I2, m)  # noqa: E731
    r13 = lambda m: p23 @ np.kron(m, I2) @ p23  # noqa: E731
    a, b, c = R(q, z1 / z2, tol), R(q, z1 / z3, tol), R(q, z2 / z3, tol)
    lhs = r12(a) @ r13(b) @ r23(c)
    rhs = r23(c) @ r13(b) @ r12(a)
    return float(np.abs(lhs - rhs).max())


def unitarity_residual(q, zeta, tol=DEFAULT_PRODUCT_TOL) -> float:
    """Distance of R12(z) R21(1/z) from the nearest multiple of the identity."""
    u = R(q, zeta, tol) @ (PERM @ R(q, 1 / zeta, tol) @ PERM)
    s = np.trace(u) / 4
    return float(np.abs(u - s * np.eye(4)).max())


def boundary_yb_residual(q, r, z1, z2, tol=DEFAULT_PRODUCT_TOL) -> float:
    """K2(z2) R12(z1 z2) K1(z1) R21(z1/z2) against the reversed product."""
    k1 = np.kron(K(q, r, z1, tol), I2)
    k2 = np.kron(I2, K(q, r, z2, tol))
    r21 = lambda m: PERM @ m @ PERM  # noqa: E731
    lhs = k2 @ R(q, z1 * z2, tol) @ k1 @ r21(R(q, z1 / z2, tol))
    rhs = R(q, z1 / z2, tol) @ k1 @ r21(R(q, z1 * z2, tol)) @ k2
    return float(np.abs(lhs - rhs).max())


def k_circle_residual(q, r, zeta, tol=DEFAULT_PRODUCT_TOL) -> float:
    a = k_matrix(q, r, zeta, "circle", tol).entries
    b = k_matrix(q, r, -1 / (q * zeta), "bullet", tol).entries
    return float(np.abs(a - b).max())


def relation_residuals(q, r, zeta1, zeta2, tol=DEFAULT_PRODUCT_TOL) -> RunReport:
    z3 = 0.5 * (zeta1 + zeta2) + 0.1j
    res = {
        "yang_baxter": yang_baxter_residual(q, zeta1, zeta2, z3, tol),
        "crossing": max(crossing_residual(q, zeta1, tol), crossing_residual(q, zeta2, tol)),
        "unitarity": max(unitarity_residual(q, zeta1, tol), unitarity_residual(q, zeta2, tol)),
        "boundary_yang_baxter": boundary_yb_residual(q, r, zeta1, zeta2, tol),
        "k_circle_vs_bullet": k_circle_residual(q, r, zeta1, tol),
        "r_at_one_minus_perm": float(np.abs(R(q, 1.0, tol) - PERM).max()),
        "k_at_one_minus_id": float(np.abs(K(q, r, 1.0, tol) - I2).max()),
    }
    return RunReport("verify-weights", {"q": q, "r": r, "zeta1": zeta1, "zeta2": zeta2,
                                        "product_tol": tol}, res, ok=max(res.values()) < 1e-12)


# ---------------------------------------------------------------------------
# field map
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldMap:
    """h(r) = h_inv (1 + r)/(1 - r) with h_inv = (q^2 - 1)/(4 q)."""

    q: Number

    @property
    def h_inv(self):
        q = self.q
        return (q * q - 1) / (4 * q) if not isinstance(q, int) else Fraction(q * q - 1, 4 * q)

    def h(self, r):
        if r == 1:
            return math.inf
        return self.h_inv * (1 + r) / (1 - r)

    def r(self, h):
        if h == math.inf:
            return 1
        hi = self.h_inv
        return (h - hi) / (h + hi)


def field_map(q, r):
    return FieldMap(q).h(r)


def field_map_inv(q, h):
    if h != math.inf and h < 0:
        raise ValueError("the inverse map is defined for h >= 0")
    return FieldMap(q).r(h)


def h_inv(q):
    return FieldMap(q).h_inv
