"""Brute-force reference computations shared by the tests.

Everything here works on plain dicts ``{(q_exp, r_exp): Fraction}`` so that
it shares no code with the package under test.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def mul(a: dict, b: dict, qmax: int) -> dict:
    out: dict = {}
    for (k1, e1), c1 in a.items():
        for (k2, e2), c2 in b.items():
            if k1 + k2 <= qmax:
                key = (k1 + k2, e1 + e2)
                out[key] = out.get(key, 0) + c1 * c2
    return {k: v for k, v in out.items() if v}


def one_minus(c, k: int, e: int, power: int, qmax: int) -> dict:
    """(1 - c q^k r^e)^power by repeated multiplication or geometric expansion."""
    if power >= 0:
        out = {(0, 0): Fraction(1)}
        for _ in range(power):
            out = mul(out, {(0, 0): Fraction(1), (k, e): -Fraction(c)}, qmax)
        return out
    geo = {(k * m, e * m): Fraction(c) ** m for m in range(qmax // k + 1)}
    out = {(0, 0): Fraction(1)}
    for _ in range(-power):
        out = mul(out, geo, qmax)
    return out


def pochhammer(c, k: int, e: int, steps: tuple[int, ...], qmax: int, power: int = 1) -> dict:
    """(c q^k r^e; q^s1, q^s2, ...)_inf ^ power, factor by factor."""
    out = {(0, 0): Fraction(1)}
    for shift in _lattice(steps, qmax - k):
        out = mul(out, one_minus(c, k + shift, e, power, qmax), qmax)
    return out


def _lattice(steps, budget):
    if not steps:
        yield 0
        return
    s, rest = steps[0], steps[1:]
    n = 0
    while s * n <= budget:
        for t in _lattice(rest, budget - s * n):
            yield s * n + t
        n += 1


def as_dict(series) -> dict:
    return {(k, e): c for k, p in series.items() for e, c in p.items() if c}


def lambert_double_sum(qmax: int, step: int, power: int) -> dict:
    """1 + 2(1-r)^p sum_n (-q^2)^n / (1 - r q^{step n})^p by direct expansion."""
    body: dict = {}
    for n in range(1, qmax // 2 + 1):
        term = {(2 * n, 0): Fraction(2 * (-1) ** n)}
        term = mul(term, one_minus(1, step * n, 1, -power, qmax), qmax)
        for key, v in term.items():
            body[key] = body.get(key, 0) + v
    body = mul(body, one_minus(1, 0, 1, power, qmax), qmax)
    body[(0, 0)] = body.get((0, 0), 0) + 1
    return {k: v for k, v in body.items() if v}


def dense_xxz(L: int, delta: float, bonds, fields=()) -> np.ndarray:
    """Dense Hamiltonian from Kronecker products of Pauli matrices.

    ``bonds`` are pairs of bit positions, ``fields`` are (bit, coefficient).
    Bit b is the b-th least significant bit of the basis index, 1 = up.
    """
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.diag([-1.0, 1.0]).astype(complex)  # index 0 = down, 1 = up

    def site_op(op, b):
        mats = [np.eye(2)] * L
        mats[L - 1 - b] = op
        out = np.array([[1.0]])
        for m in mats:
            out = np.kron(out, m)
        return out

    H = np.zeros((1 << L, 1 << L), dtype=complex)
    for b1, b2 in bonds:
        H += -0.5 * (site_op(sx, b1) @ site_op(sx, b2) + site_op(sy, b1) @ site_op(sy, b2)
                     + delta * site_op(sz, b1) @ site_op(sz, b2))
    for b, c in fields:
        H += c * site_op(sz, b)
    return H.real


def qpoch_numeric(a: complex, b: complex, tol: float = 1e-18) -> complex:
    out, t = 1 + 0j, complex(a)
    while abs(t) > tol:
        out *= 1 - t
        t *= b
    return out


def jacobi_squares(qmax: int) -> dict:
    """(sum_n (-1)^n q^{2 n^2})^2 over all integers n."""
    s: dict = {}
    n_max = math.isqrt(qmax // 2) + 1
    for n in range(-n_max, n_max + 1):
        if 2 * n * n <= qmax:
            s[(2 * n * n, 0)] = s.get((2 * n * n, 0), 0) + Fraction((-1) ** n)
    return mul(s, s, qmax)
