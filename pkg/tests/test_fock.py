import itertools

import numpy as np
import pytest

from fqed.fock import (ResourceError, basis_size, enumerate_basis, ladder,
                       linear_field, number_diagonal, symmetry_defect,
                       weighted_number_sum)
from fqed.modes import CutoffSequence, ParameterError, build_grid


def brute_force_count(n_modes, n_max, c_max):
    """Independent enumeration oracle by filtering the full product set."""
    return sum(1 for occ in itertools.product(range(c_max + 1),
                                              repeat=n_modes)
               if sum(occ) <= n_max)


def test_enumeration_m2_n1():
    basis = enumerate_basis(2, 1, 1)
    states = [tuple(row) for row in basis.occupations]
    assert states == [(0, 0), (1, 0), (0, 1)]


def test_enumeration_m2_n2():
    basis = enumerate_basis(2, 2, 2)
    assert basis.size == 6
    states = [tuple(row) for row in basis.occupations]
    assert states[0] == (0, 0)
    assert states == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def test_enumeration_count_oracle_m12():
    expected = brute_force_count(12, 2, 2)
    assert expected == 91
    basis = enumerate_basis(12, 2, 2)
    assert basis.size == 91
    assert basis_size(12, 2, 2) == 91


@pytest.mark.parametrize("m,n,c", [(3, 3, 2), (4, 2, 1), (5, 3, 3)])
def test_basis_size_matches_brute_force(m, n, c):
    assert basis_size(m, n, c) == brute_force_count(m, n, c)
    basis = enumerate_basis(m, n, c)
    assert basis.size == basis_size(m, n, c)
    # every admissible vector exactly once
    seen = {tuple(r) for r in basis.occupations}
    assert len(seen) == basis.size
    assert np.all(basis.occupations.sum(axis=1) <= n)
    assert np.all(basis.occupations <= c)


def test_graded_ordering():
    basis = enumerate_basis(3, 2, 2)
    totals = basis.totals
    assert np.all(np.diff(totals) >= 0)
    assert totals[0] == 0


def test_size_limit_enforced():
    with pytest.raises(ResourceError):
        enumerate_basis(30, 4, 4, size_limit=1000)


def test_bad_caps_rejected():
    with pytest.raises(ParameterError):
        enumerate_basis(2, 1, 0)


def test_create_on_vacuum():
    basis = enumerate_basis(1, 2, 2)
    ann, cre = ladder(basis, 0)
    v = basis.vacuum()
    out = cre @ v
    assert out[basis.index_of((1,))] == pytest.approx(1.0)
    assert np.count_nonzero(out) == 1


def test_number_operator_eigenvalue():
    basis = enumerate_basis(1, 2, 2)
    ann, cre = ladder(basis, 0)
    two = np.zeros(basis.size)
    two[basis.index_of((2,))] = 1.0
    out = (cre @ (ann @ two))
    assert out[basis.index_of((2,))] == pytest.approx(2.0)


def test_annihilate_is_exact_transpose():
    basis = enumerate_basis(4, 2, 2)
    for m in range(4):
        ann, cre = ladder(basis, m)
        assert (ann - cre.T).nnz == 0


def test_ccr_on_uncapped_subspace():
    basis = enumerate_basis(3, 2, 2)
    ops = [ladder(basis, m) for m in range(3)]
    uncapped = basis.totals < basis.n_max
    for m in range(3):
        for mp in range(3):
            ann_m, cre_m = ops[m]
            ann_p, cre_p = ops[mp]
            comm = (ann_m @ cre_p - cre_p @ ann_m).toarray()
            expected = np.eye(basis.size) if m == mp else \
                np.zeros((basis.size, basis.size))
            # columns whose state saturates no cap obey the exact algebra
            cols = uncapped & (basis.occupations[:, mp] < basis.c_max)
            assert np.allclose(comm[:, cols], expected[:, cols], atol=1e-14)
            lower = (ann_m @ ann_p - ann_p @ ann_m)
            assert lower.nnz == 0


def test_weighted_number_sum_examples():
    cut = CutoffSequence(1.0, 0.25, 1)
    grid = build_grid(cut, 1, "octahedral6")
    basis = enumerate_basis(grid.n_modes, 2, 2)
    hf = weighted_number_sum(basis, grid, grid.knorm)
    v = basis.vacuum()
    assert np.linalg.norm(hf @ v) == 0.0
    ntot = weighted_number_sum(basis, grid, np.ones(grid.n_modes))
    assert np.allclose(ntot.diagonal(), basis.totals, atol=0)
    # callable form agrees with the array form
    hf2 = weighted_number_sum(basis, grid,
                              lambda k, lam: np.linalg.norm(k))
    assert (hf - hf2).nnz == 0


def test_weighted_number_sum_linearity():
    cut = CutoffSequence(1.0, 0.25, 1)
    grid = build_grid(cut, 1, "octahedral6")
    basis = enumerate_basis(grid.n_modes, 2, 2)
    f = grid.knorm
    g = grid.k[:, 0]
    lhs = weighted_number_sum(basis, grid, f + g)
    rhs = weighted_number_sum(basis, grid, f) \
        + weighted_number_sum(basis, grid, g)
    assert abs(lhs - rhs).max() < 1e-15


def test_weighted_number_sum_rejects_nonfinite():
    cut = CutoffSequence(1.0, 0.25, 1)
    grid = build_grid(cut, 1, "octahedral6")
    basis = enumerate_basis(grid.n_modes, 1, 1)
    bad = np.full(grid.n_modes, np.inf)
    with pytest.raises(ParameterError):
        weighted_number_sum(basis, grid, bad)


def test_linear_field_symmetric_and_matches_ladders():
    basis = enumerate_basis(3, 2, 2)
    coeff = np.array([0.5, -0.25, 1.5])
    field = linear_field(basis, coeff)
    assert symmetry_defect(field) == 0.0
    ref = sum(c * (ladder(basis, m)[0] + ladder(basis, m)[1])
              for m, c in enumerate(coeff))
    assert abs(field - ref).max() < 1e-15


def test_sector_restriction():
    cut = CutoffSequence(1.0, 0.25, 2)
    grid = build_grid(cut, 1, "octahedral6")
    basis = enumerate_basis(grid.n_modes, 2, 2)
    idx0 = basis.sector_indices(grid, 0)
    assert list(idx0) == [0]
    idx1 = basis.sector_indices(grid, 1)
    occ = basis.occupations[idx1]
    assert np.all(occ[:, grid.shell >= 1] == 0)
    assert len(idx1) == basis_size(12, 2, 2)


def test_number_diagonal():
    basis = enumerate_basis(2, 2, 2)
    d = number_diagonal(basis, np.array([2.0, 3.0]))
    assert d[basis.index_of((1, 1))] == pytest.approx(5.0)
    assert d[basis.index_of((2, 0))] == pytest.approx(4.0)


def test_operator_coo_dump():
    from fqed.fock import dump_operator_coo
    basis = enumerate_basis(2, 1, 1)
    _, cre = ladder(basis, 0)
    text = dump_operator_coo(cre)
    lines = text.strip().splitlines()
    assert lines[0] == "% 3 3 1"
    row, col, val = lines[1].split()
    assert (int(row), int(col)) == (1, 0)
    assert float(val) == 1.0
