"""Site-1 magnetisation of the fractured chain: exact series, closed forms, curves."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .correlator import extract_P, g_series
from .exactalg import Monomial, RPoly, TruncatedQSeries
from .model import FieldMap, q_from_delta, qpoch
from .qprod import product_series
from .report import RunReport, Timer


@dataclass
class MagReport:
    series_measured: TruncatedQSeries
    series_conjecture: TruncatedQSeries
    first_mismatch_order: int | None = None
    special_case_table: list[dict] = field(default_factory=list)
    label: str = "fracture"

    @property
    def ok(self) -> bool:
        return self.first_mismatch_order is None and all(row["match"] for row in self.special_case_table)

    def mismatch_detail(self) -> dict | None:
        k = self.first_mismatch_order
        if k is None:
            return None
        return {"order": k, "measured": self.series_measured.coeff(k).to_json(),
                "expected": self.series_conjecture.coeff(k).to_json()}

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "qmax": self.series_measured.max_order,
            "first_mismatch_order": self.first_mismatch_order,
            "mismatch": self.mismatch_detail(),
            "special_cases": self.special_case_table,
            "series": self.series_measured.to_json(),
        }


def magnetisation_series(i: int = 0, qmax: int = 48) -> TruncatedQSeries:
    """Minus the site-1 magnetisation, g (P_{+-} - P_{-+}), as an exact series."""
    g = g_series(qmax)
    pm = extract_P(i, 2, "+-", "fracture", qmax=qmax)
    mp = extract_P(i, 2, "-+", "fracture", qmax=qmax)
    return (g * (pm - mp)).truncate(qmax).assert_final()


def _sum_series(qmax: int, step: int, power: int) -> TruncatedQSeries:
    """1 + 2 (1 - r)^power sum_n (-q^2)^n / (1 - r q^{step n})^power."""
    terms: dict[tuple[int, int], Fraction] = {(0, 0): Fraction(1)}
    n = 1
    while 2 * n <= qmax:
        m = 0
        while 2 * n + step * n * m <= qmax:
            k = 2 * n + step * n * m
            # 1/(1 - x)^power = sum_m C(m + power - 1, m) x^m
            c = 2 * (-1) ** n * math.comb(m + power - 1, m)
            terms[(k, m)] = terms.get((k, m), 0) + c
            m += 1
        n += 1
    s = TruncatedQSeries.from_terms(terms, qmax)
    one_minus_r = TruncatedQSeries({0: RPoly({0: 1, 1: -1})}, qmax)
    body = s - TruncatedQSeries.one(qmax)
    for _ in range(power):
        body = body * one_minus_r
    return TruncatedQSeries.one(qmax) + body


def conjecture_series(qmax: int = 48) -> TruncatedQSeries:
    """Double-sum expansion of 1 + 2(1-r) sum_{n>=1} (-q^2)^n / (1 - r q^{4n})."""
    return _sum_series(qmax, 4, 1)


def boundary_target_series(qmax: int = 32) -> TruncatedQSeries:
    """1 + 2(1-r)^2 sum_{n>=1} (-q^2)^n / (1 - r q^{2n})^2."""
    return _sum_series(qmax, 2, 2)


def boundary_magnetisation_series(qmax: int = 32) -> TruncatedQSeries:
    """Minus the site-1 magnetisation of the half-infinite boundary chain.

    Computed as ``1 - 2 g P_{-+}`` using the identity sum rule.
    """
    g = g_series(qmax)
    mp = extract_P(0, 2, "-+", "boundary", qmax=qmax)
    return (TruncatedQSeries.one(qmax) - (g * mp).scale(2)).truncate(qmax)


def spontaneous_series(qmax: int) -> TruncatedQSeries:
    """(q^2; q^2)^2 / (-q^2; q^2)^2."""
    return product_series([(Monomial(1, 2), (2,), 2), (Monomial(-1, 2), (2,), -2)], qmax)


def special_cases(series: TruncatedQSeries) -> list[dict]:
    """Compare the r = -1, 0, 1 specialisations with their closed forms."""
    qmax = series.max_order
    r0 = TruncatedQSeries.one(qmax).mul_binomial(Monomial(1, 2), 1).mul_binomial(Monomial(-1, 2), -1)
    rows = []
    for r, target, name in ((-1, spontaneous_series(qmax), "(q2;q2)^2/(-q2;q2)^2"),
                            (0, r0, "(1-q2)/(1+q2)"),
                            (1, TruncatedQSeries.one(qmax), "1")):
        got = series.subs_r(r)
        k = got.first_mismatch(target)
        rows.append({"r": r, "closed_form": name, "first_mismatch_order": k, "match": k is None})
    return rows


def magnetisation_report(i: int = 0, qmax: int = 48, check_conjecture: bool = True,
                         with_special_cases: bool = False) -> MagReport:
    measured = magnetisation_series(i, qmax)
    if i == 1:
        # the i = 1 function is the i = 0 one at r -> 1/r with opposite sign
        conj = conjecture_series(qmax).subs_r_inverse().scale(-1)
    else:
        conj = conjecture_series(qmax)
    k = measured.first_mismatch(conj) if check_conjecture else None
    table = special_cases(measured) if (with_special_cases and i == 0) else []
    return MagReport(measured, conj, k, table)


def boundary_mag_regression(qmax: int = 32) -> MagReport:
    measured = boundary_magnetisation_series(qmax)
    target = boundary_target_series(qmax)
    return MagReport(measured, target, measured.first_mismatch(target), label="boundary")


# ---------------------------------------------------------------------------
# numerical curves
# ---------------------------------------------------------------------------


def _lambert(q: float, r: float, step: int, power: int, tol: float = 1e-16) -> float:
    total, n = 0.0, 1
    while True:
        t = (-q * q) ** n / (1 - r * q ** (step * n)) ** power
        total += t
        if abs(q) ** (2 * n) < tol:
            return 1 + 2 * (1 - r) ** power * total
        n += 1


def fracture_mag(q: float, r: float) -> float:
    """Site-1 fracture magnetisation M(r) (negative for h > 0)."""
    return -_lambert(q, r, 4, 1)


def boundary_mag(q: float, r: float) -> float:
    return -_lambert(q, r, 2, 2)


def spontaneous_mag(q: float) -> float:
    """Minus the zero-field bulk spontaneous magnetisation."""
    return -(qpoch(q * q, q * q).real / qpoch(-q * q, q * q).real) ** 2


def fig10_data(delta: float = -2.0, h_grid: Iterable[float] = ()) -> RunReport:
    """Rows (h, fracture_mag, boundary_mag, spontaneous_mag) at q(delta), r(h)."""
    with Timer() as t:
        q = q_from_delta(delta)
        fm = FieldMap(q)
        spon = spontaneous_mag(q)
        rows = []
        for h in h_grid:
            h = float(h)
            if math.isclose(h + fm.h_inv, 0.0, abs_tol=1e-14):
                rows.append({"h": h, "r": math.inf, "fracture_mag": math.nan,
                             "boundary_mag": math.nan, "spontaneous_mag": spon})
                continue
            r = fm.r(h)
            if r == 1:
                rows.append({"h": h, "r": 1.0, "fracture_mag": -1.0, "boundary_mag": -1.0,
                             "spontaneous_mag": spon})
                continue
            rows.append({"h": h, "r": float(r), "fracture_mag": fracture_mag(q, r),
                         "boundary_mag": boundary_mag(q, r), "spontaneous_mag": spon})
    res = {"q": q, "h_inv": fm.h_inv,
           "fracture_at_h0": fracture_mag(q, -1.0), "spontaneous": spon,
           "fracture_at_h_inv": fracture_mag(q, 0.0), "boundary_at_h_inv": boundary_mag(q, 0.0)}
    return RunReport("fig10", {"delta": delta, "points": len(rows)}, res, rows, elapsed=t.elapsed)
