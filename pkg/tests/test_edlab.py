from __future__ import annotations

import json

import numpy as np
import pytest

from fxxz.edlab import (TooLarge, build_hamiltonian, dump_state, ed_report, finite_fidelity,
                        finite_magnetisation, full_basis, ground_state, sector_basis, sector_minima, sites)

from oracles import dense_xxz


def dense_reference(kind: str, L: int, delta: float, h: float = 0.0, pin: float = 0.0, orient: int = 0):
    """Dense Hamiltonian assembled from the chain description, site j living on bit L/2 - j."""
    bit = {j: L // 2 - j for j in range(L // 2 - L + 1, L // 2 + 1)}
    bonds = [(b, b + 1) for b in range(L - 1)]
    fields = []
    if kind == "fractured":
        bonds.remove((bit[1], bit[0]))
        fields += [(bit[1], h), (bit[0], -h)]
    if kind == "periodic_bulk":
        bonds.append((L - 1, 0))
    if pin and kind != "periodic_bulk":
        s = 1 if orient == 0 else -1
        for j in (L // 2, L // 2 - L + 1):
            fields.append((bit[j], -pin * s * (-1) ** (j % 2)))
    return dense_xxz(L, delta, bonds, fields)


def test_site_labels():
    assert sites(6) == [3, 2, 1, 0, -1, -2]


def test_two_site_dimer():
    gs = ground_state(build_hamiltonian("open_bulk", 2, -2.0))
    assert gs.energy == pytest.approx(-2.0, abs=1e-13)
    assert np.allclose(np.abs(gs.vector), [1 / np.sqrt(2)] * 2)
    assert gs.vector[0] * gs.vector[1] > 0  # the symmetric combination


def test_fractured_four_sites_is_two_dimers():
    gs = ground_state(build_hamiltonian("fractured", 4, -2.0, 0.0, pin=0.0))
    assert gs.energy == pytest.approx(-4.0, abs=1e-12)


def test_periodic_below_open():
    e_open = ground_state(build_hamiltonian("open_bulk", 4, -2.0, pin=0.0)).energy
    e_per = ground_state(build_hamiltonian("periodic_bulk", 4, -2.0)).energy
    assert e_per < e_open


@pytest.mark.parametrize("kind,L,h,pin", [("open_bulk", 6, 0.0, 0.5), ("periodic_bulk", 6, 0.0, 0.0),
                                          ("fractured", 6, 0.7, 0.5), ("fractured", 8, -1.3, 0.5),
                                          ("fractured", 8, 0.0, 0.0)])
def test_against_dense_oracle(kind, L, h, pin):
    orient = 0 if h >= 0 else 1
    op = build_hamiltonian(kind, L, -2.0, h, pin)
    dense = dense_reference(kind, L, -2.0, h, pin, orient)
    assert np.abs(op.matrix(full_basis(L)).toarray() - dense).max() < 1e-12
    # lowest energy over all sectors equals the dense minimum
    assert min(sector_minima(op).values()) == pytest.approx(np.linalg.eigvalsh(dense)[0], abs=1e-12)
    # the Sz = 0 block of the dense matrix
    basis = sector_basis(L, 0)
    block = dense[np.ix_(basis, basis)]
    assert ground_state(op, 0).energy == pytest.approx(np.linalg.eigvalsh(block)[0], abs=1e-12)


def test_matrix_is_symmetric():
    m = build_hamiltonian("fractured", 8, -1.7, 0.9).matrix(sector_basis(8, 0))
    assert abs(m - m.T).max() == 0


def test_sparse_solver_residual():
    gs = ground_state(build_hamiltonian("fractured", 12, -2.0, 0.6))
    assert len(gs.basis) > 400  # goes through the iterative solver
    assert gs.residual < 1e-10


def test_sector_minima_symmetric_without_pin():
    mins = sector_minima(build_hamiltonian("fractured", 8, -2.0, 0.0, pin=0.0))
    for sz, e in mins.items():
        assert e == pytest.approx(mins[-sz], abs=1e-10)


def test_dimension_cap():
    with pytest.raises(TooLarge):
        ground_state(build_hamiltonian("open_bulk", 10, -2.0), cap=100)


def test_odd_fracture_rejected():
    with pytest.raises(ValueError):
        build_hamiltonian("fractured", 7, -2.0)
    with pytest.raises(ValueError):
        build_hamiltonian("ladder", 8, -2.0)


def test_dump_layout(tmp_path):
    gs = ground_state(build_hamiltonian("fractured", 6, -2.0, 0.4))
    vec, side = dump_state(gs, tmp_path / "gs.bin", {"L": 6})
    back = np.fromfile(vec, dtype="<f8")
    assert np.array_equal(back, gs.vector)
    info = json.loads(side.read_text())
    assert info["length"] == len(back) == 20 and info["L"] == 6
    assert info["basis_states"] == gs.basis.tolist()


@pytest.mark.parametrize("h", [0.3, 1.1])
def test_field_reversal(h):
    assert finite_fidelity(8, -2.0, h) == pytest.approx(finite_fidelity(8, -2.0, -h), abs=1e-12)
    assert finite_magnetisation(8, -2.0, h) == pytest.approx(-finite_magnetisation(8, -2.0, -h), abs=1e-12)


def test_energy_decreases_with_length():
    es = [ground_state(build_hamiltonian("open_bulk", L, -2.0)).energy for L in (4, 6, 8, 10)]
    assert all(b < a for a, b in zip(es, es[1:]))


def test_report_fields():
    rep = ed_report(8, -2.0, 0.5, "both")
    res = rep.results
    assert {"energy_bulk", "energy_fractured", "magnetisation", "fidelity", "h_inv"} <= set(res)
    assert 0 < res["fidelity"] <= 1
    assert -1 <= res["magnetisation"] < 0
