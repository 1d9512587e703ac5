"""Exact diagonalisation of finite open, periodic and fractured XXZ chains.

Sites are labelled right to left, ``L/2, ..., 1 | 0, ..., -L/2 + 1``, with the
fracture between sites 1 and 0.  Site ``j`` is stored in bit ``L/2 - j`` of
the basis index and a set bit means spin up.  The bond term is
``-(1/2)(sx sx + sy sy + delta sz sz)``; the fractured chain drops the central
bond and adds ``+h sz_1 - h sz_0``.

The finite chain does not break the spin-flip symmetry by itself, so both
the bulk and the fractured ground states are pinned to one antiferromagnetic
orientation by a weak staggered field on the two outermost sites.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .model import h_inv, q_from_delta
from .report import RunReport, Timer

KINDS = ("open_bulk", "periodic_bulk", "fractured")
DEFAULT_PIN = 0.5
DEFAULT_CAP = 1 << 20


class TooLarge(ValueError):
    pass


def site_bit(L: int, j: int) -> int:
    return L // 2 - j


def sites(L: int) -> list[int]:
    return list(range(L // 2, L // 2 - L, -1))


@dataclass
class SpinOperator:
    """A sum of two-site exchange and one-site field terms."""

    L: int
    terms: list[tuple[float, tuple[int, ...], str]] = field(default_factory=list)

    def add(self, coupling: float, where: tuple[int, ...], kind: str) -> None:
        if coupling:
            self.terms.append((float(coupling), where, kind))

    def matrix(self, basis: np.ndarray) -> sp.csr_matrix:
        """Sparse matrix on the span of ``basis`` (sorted integer states)."""
        n = len(basis)
        diag = np.zeros(n)
        rows, cols, vals = [], [], []
        for c, where, kind in self.terms:
            if kind == "z":
                (b,) = where
                diag += c * (2 * ((basis >> b) & 1) - 1)
            elif kind == "zz":
                b1, b2 = where
                diag += c * (2 * ((basis >> b1) & 1) - 1) * (2 * ((basis >> b2) & 1) - 1)
            elif kind == "xy":
                # c (sx sx + sy sy) = 2c (s+ s- + s- s+)
                b1, b2 = where
                differ = ((basis >> b1) ^ (basis >> b2)) & 1
                src = np.nonzero(differ)[0]
                dst = np.searchsorted(basis, basis[src] ^ ((1 << b1) | (1 << b2)))
                rows.append(dst)
                cols.append(src)
                vals.append(np.full(len(src), 2 * c))
            else:
                raise ValueError(f"unknown term kind {kind}")
        rows.append(np.arange(n))
        cols.append(np.arange(n))
        vals.append(diag)
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(n, n))

    def apply(self, vec: np.ndarray, basis: np.ndarray | None = None) -> np.ndarray:
        basis = full_basis(self.L) if basis is None else basis
        return self.matrix(basis) @ vec


def full_basis(L: int) -> np.ndarray:
    return np.arange(1 << L, dtype=np.int64)


def sector_basis(L: int, sz: int = 0) -> np.ndarray:
    """States with total sigma^z equal to ``2 sz`` (sz counts spin-1/2 units)."""
    n_up = L // 2 + sz
    if not 0 <= n_up <= L or (L % 2 and sz == 0):
        raise ValueError(f"no sector Sz={sz} for L={L}")
    states = [sum(1 << b for b in c) for c in combinations(range(L), n_up)]
    return np.array(sorted(states), dtype=np.int64)


def _bond(op: SpinOperator, delta: float, b1: int, b2: int) -> None:
    op.add(-0.5, (b1, b2), "xy")
    op.add(-0.5 * delta, (b1, b2), "zz")


def pin_orientation(h: float) -> int:
    """Antiferromagnetic orientation selected by the sign of the edge field."""
    return 0 if h >= 0 else 1


def build_hamiltonian(kind: str, L: int, delta: float, h: float = 0.0, pin: float = DEFAULT_PIN,
                      orientation: int | None = None) -> SpinOperator:
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if L < 2 or (kind == "fractured" and L % 2):
        raise ValueError("the fractured chain needs an even number of sites")
    op = SpinOperator(L)
    cut = (site_bit(L, 1), site_bit(L, 0))
    for b in range(L - 1):
        if kind == "fractured" and (b, b + 1) == cut:
            continue
        _bond(op, delta, b, b + 1)
    if kind == "periodic_bulk" and L > 2:
        _bond(op, delta, L - 1, 0)
    if kind == "fractured":
        op.add(h, (site_bit(L, 1),), "z")
        op.add(-h, (site_bit(L, 0),), "z")
    if pin and L > 2 and kind != "periodic_bulk":
        o = pin_orientation(h) if orientation is None else orientation
        sign = 1 if o == 0 else -1
        # orientation 0 has spin (-1)^j on site j; the pin lowers that pattern's energy
        for j in (L // 2, L // 2 - L + 1):
            op.add(-pin * sign * (-1) ** (j % 2), (site_bit(L, j),), "z")
    return op


@dataclass
class GroundState:
    energy: float
    vector: np.ndarray
    residual: float
    basis: np.ndarray
    sector: int | None

    def to_json(self) -> dict:
        return {"energy": self.energy, "residual": self.residual, "dimension": len(self.basis),
                "sector": self.sector}


def ground_state(op: SpinOperator, sector: int | None = 0, tol: float = 1e-12,
                 cap: int = DEFAULT_CAP) -> GroundState:
    if sector is None:
        best = None
        for sz in range(-(op.L // 2), op.L - op.L // 2 + 1):
            try:
                gs = ground_state(op, sz, tol, cap)
            except ValueError:
                continue
            if best is None or gs.energy < best.energy - 1e-12:
                best = gs
        return best
    basis = sector_basis(op.L, sector)
    if len(basis) > cap:
        raise TooLarge(f"sector dimension {len(basis)} exceeds the cap {cap}; lower L or raise --cap")
    H = op.matrix(basis)
    if len(basis) <= 400:
        vals, vecs = np.linalg.eigh(H.toarray())
        e, v = vals[0], vecs[:, 0]
    else:
        rng = np.random.default_rng(0)
        vals, vecs = eigsh(H, k=1, which="SA", tol=tol, v0=rng.standard_normal(len(basis)),
                           maxiter=100000)
        e, v = vals[0], vecs[:, 0]
    v = v / np.linalg.norm(v)
    # fix the overall sign so that the largest component is positive
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    res = float(np.linalg.norm(H @ v - e * v))
    return GroundState(float(e), v, res, basis, sector)


def sector_minima(op: SpinOperator, tol: float = 1e-12, cap: int = DEFAULT_CAP) -> dict[int, float]:
    """Lowest energy in every total-Sz sector, keyed by Sz in spin-1/2 units."""
    out = {}
    for sz in range(-(op.L // 2), op.L - op.L // 2 + 1):
        try:
            out[sz] = ground_state(op, sz, tol, cap).energy
        except ValueError:
            continue
    return out


@lru_cache(maxsize=64)
def _pair(L: int, delta: float, h: float, pin: float, sector: int) -> tuple[GroundState, GroundState]:
    o = pin_orientation(h)
    bulk = ground_state(build_hamiltonian("open_bulk", L, delta, 0.0, pin, o), sector)
    frac = ground_state(build_hamiltonian("fractured", L, delta, h, pin, o), sector)
    return bulk, frac


def finite_overlap(L: int, delta: float, h: float, pin: float = DEFAULT_PIN, sector: int = 0) -> float:
    bulk, frac = _pair(L, float(delta), float(h), float(pin), sector)
    return float(bulk.vector @ frac.vector)


def finite_fidelity(L: int, delta: float, h: float, pin: float = DEFAULT_PIN, sector: int = 0) -> float:
    """|<vac|vac'>|^2 between the pinned open-chain and fractured ground states."""
    return finite_overlap(L, delta, h, pin, sector) ** 2


def finite_magnetisation(L: int, delta: float, h: float, pin: float = DEFAULT_PIN, sector: int = 0) -> float:
    """<vac| sz_1 |vac'> / <vac|vac'> at the left edge of the fracture."""
    bulk, frac = _pair(L, float(delta), float(h), float(pin), sector)
    ov = float(bulk.vector @ frac.vector)
    if ov == 0.0:
        raise ZeroDivisionError("the two ground states are orthogonal (sector mismatch)")
    sz = 2 * ((frac.basis >> site_bit(L, 1)) & 1) - 1
    return float(bulk.vector @ (sz * frac.vector)) / ov


def dump_state(gs: GroundState, path: str | Path, meta: dict | None = None) -> tuple[Path, Path]:
    """Write the vector as little-endian float64 and a JSON sidecar describing it."""
    path = Path(path)
    gs.vector.astype("<f8").tofile(path)
    side = path.with_suffix(path.suffix + ".json")
    info = {
        "dtype": "<f8",
        "length": int(len(gs.vector)),
        "sector": gs.sector,
        "energy": gs.energy,
        "basis": "sorted integers with the sector's spin count; bit L/2 - j holds site j, 1 = up",
        "basis_states": gs.basis.tolist() if len(gs.basis) <= 1 << 16 else None,
        **(meta or {}),
    }
    side.write_text(json.dumps(info, indent=2))
    return path, side


def ed_report(L: int, delta: float, h: float, observable: str = "mag", sector: int = 0,
              pin: float = DEFAULT_PIN, dump: str | None = None) -> RunReport:
    with Timer() as t:
        bulk, frac = _pair(L, float(delta), float(h), float(pin), sector)
        res = {"energy_bulk": bulk.energy, "energy_fractured": frac.energy,
               "residual": max(bulk.residual, frac.residual), "dimension": len(frac.basis)}
        if observable in ("mag", "both"):
            try:
                res["magnetisation"] = finite_magnetisation(L, delta, h, pin, sector)
            except ZeroDivisionError:
                res["magnetisation"] = None
                res["diagnostic"] = f"zero overlap between the ground states in sector Sz={sector}"
        if observable in ("fidelity", "both"):
            res["fidelity"] = finite_fidelity(L, delta, h, pin, sector)
        if delta < -1:
            q = q_from_delta(delta)
            res["q"] = q
            res["h_inv"] = h_inv(q)
        if dump:
            p, side = dump_state(frac, dump, {"L": L, "delta": delta, "h": h, "kind": "fractured"})
            res["state_file"], res["sidecar"] = str(p), str(side)
    return RunReport("ed", {"sites": L, "delta": delta, "h": h, "observable": observable,
                            "sector": sector, "pin": pin}, res, elapsed=t.elapsed)


def fidelity_scan(L: int, delta: float, hs, pin: float = DEFAULT_PIN) -> list[dict]:
    return [{"h": float(h), "fidelity": finite_fidelity(L, delta, h, pin),
             "magnetisation": finite_magnetisation(L, delta, h, pin)} for h in hs]


def nearest(grid, x: float) -> float:
    return float(min(grid, key=lambda g: abs(g - x)))


def spontaneous_reference(delta: float) -> float:
    from .magnet import spontaneous_mag

    return spontaneous_mag(q_from_delta(delta))


__all__ = [name for name in dir() if not name.startswith("_") and name not in ("math",)]
