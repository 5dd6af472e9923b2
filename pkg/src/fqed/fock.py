"""Truncated bosonic occupation bases and sparse operator assembly.

States are occupation vectors n over a fixed mode set, kept when the total
occupation stays below ``n_max`` and every single mode stays below ``c_max``.
Enumeration is graded: by total occupation first, then reverse-lexicographic
within a level, so the vacuum is state 0 and the ordering is reproducible.

Truncation semantics: a ladder amplitude that would leave the basis is
dropped (not reflected).  Creation operators are therefore exact transposes
of annihilation operators, and the canonical commutation relations hold
exactly on the sub-basis where no cap is saturated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .modes import ModeGrid, ParameterError


class ResourceError(RuntimeError):
    """Requested basis exceeds the configured hard size limit."""


#: Refuse to enumerate bases beyond this many states unless overridden.
DEFAULT_SIZE_LIMIT = 2_000_000


def basis_size(n_modes: int, n_max: int, c_max: int) -> int:
    """Number of occupation vectors with the given caps (no enumeration)."""
    # count[t] = number of ways to fill the modes seen so far with total t
    count = np.zeros(n_max + 1, dtype=object)
    count[0] = 1
    for _ in range(n_modes):
        new = np.zeros(n_max + 1, dtype=object)
        for t in range(n_max + 1):
            for c in range(min(c_max, t) + 1):
                new[t] += count[t - c]
        count = new
    return int(sum(count))


def _occupation_levels(n_modes: int, n_max: int, c_max: int):
    """Yield occupation tuples graded by total, reverse-lex within a level."""
    def compositions(total, slots):
        if slots == 0:
            if total == 0:
                yield ()
            return
        for head in range(min(total, c_max), -1, -1):
            for tail in compositions(total - head, slots - 1):
                yield (head,) + tail

    for total in range(n_max + 1):
        yield from compositions(total, n_modes)


@dataclass
class FockBasis:
    """Enumerated occupation basis with precomputed raising transitions.

    ``occupations`` has one row per state; ``raise_src[r] -> raise_dst[r]``
    lists every in-basis application of a creation operator, with mode index
    ``raise_mode[r]`` and amplitude ``raise_amp[r] = sqrt(n_m + 1)``.
    """

    n_modes: int
    n_max: int
    c_max: int
    occupations: np.ndarray = field(repr=False)
    raise_src: np.ndarray = field(repr=False)
    raise_dst: np.ndarray = field(repr=False)
    raise_mode: np.ndarray = field(repr=False)
    raise_amp: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.occupations.shape[0]

    @property
    def totals(self) -> np.ndarray:
        return self.occupations.sum(axis=1)

    def index_of(self, occ) -> int:
        key = np.asarray(occ, dtype=np.int16).tobytes()
        try:
            return self._index[key]
        except AttributeError:
            self._index = {row.tobytes(): i
                           for i, row in enumerate(self.occupations)}
            return self._index[key]

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.size)
        v[0] = 1.0
        return v

    def restricted_indices(self, allowed: np.ndarray) -> np.ndarray:
        """Indices of states occupying only modes where ``allowed`` is True."""
        allowed = np.asarray(allowed, dtype=bool)
        mask = self.occupations[:, ~allowed].sum(axis=1) == 0
        return np.nonzero(mask)[0]

    def sector_indices(self, grid: ModeGrid, j: int) -> np.ndarray:
        """States with no photons below the scale-``j`` cutoff (shells >= j)."""
        return self.restricted_indices(grid.shell < j)


def enumerate_basis(n_modes: int, n_max: int, c_max: int,
                    size_limit: int = DEFAULT_SIZE_LIMIT) -> FockBasis:
    """Build the truncated occupation basis; vacuum is state 0."""
    if n_modes < 0 or n_max < 0:
        raise ParameterError("mode count and total cap must be nonnegative")
    if c_max < 1:
        raise ParameterError(f"per-mode cap must be >= 1, got {c_max}")
    n_states = basis_size(n_modes, n_max, c_max)
    if n_states > size_limit:
        raise ResourceError(
            f"basis would hold {n_states} states, above limit {size_limit}")

    occ = np.array(list(_occupation_levels(n_modes, n_max, c_max)),
                   dtype=np.int16).reshape(n_states, n_modes)
    index = {row.tobytes(): i for i, row in enumerate(occ)}
    totals = occ.sum(axis=1)

    src, dst, mode, amp = [], [], [], []
    for s in range(n_states):
        if totals[s] >= n_max:
            continue
        row = occ[s]
        for m in range(n_modes):
            if row[m] >= c_max:
                continue
            row[m] += 1
            dst.append(index[row.tobytes()])
            row[m] -= 1
            src.append(s)
            mode.append(m)
            amp.append(np.sqrt(row[m] + 1.0))

    basis = FockBasis(
        n_modes=n_modes, n_max=n_max, c_max=c_max, occupations=occ,
        raise_src=np.asarray(src, dtype=np.int64),
        raise_dst=np.asarray(dst, dtype=np.int64),
        raise_mode=np.asarray(mode, dtype=np.int64),
        raise_amp=np.asarray(amp, dtype=float),
    )
    basis._index = index
    return basis


def ladder(basis: FockBasis, m: int) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """(annihilate_m, create_m) as sparse matrices; annihilate = create.T."""
    if not 0 <= m < basis.n_modes:
        raise IndexError(f"mode index {m} out of range")
    sel = basis.raise_mode == m
    create = sp.coo_matrix(
        (basis.raise_amp[sel], (basis.raise_dst[sel], basis.raise_src[sel])),
        shape=(basis.size, basis.size)).tocsr()
    return create.T.tocsr(), create


def creation_sum(basis: FockBasis, coeff: np.ndarray) -> sp.csr_matrix:
    """Sum_m coeff[m] * create_m as one sparse matrix."""
    coeff = np.asarray(coeff, dtype=float)
    data = coeff[basis.raise_mode] * basis.raise_amp
    return sp.coo_matrix(
        (data, (basis.raise_dst, basis.raise_src)),
        shape=(basis.size, basis.size)).tocsr()


def linear_field(basis: FockBasis, coeff: np.ndarray) -> sp.csr_matrix:
    """Symmetric field combination Sum_m coeff[m] (create_m + annihilate_m)."""
    c = creation_sum(basis, coeff)
    return (c + c.T).tocsr()


def number_diagonal(basis: FockBasis, fvals: np.ndarray) -> np.ndarray:
    """Diagonal of Sum_m fvals[m] * n_m over basis states."""
    return basis.occupations @ np.asarray(fvals, dtype=float)


def weighted_number_sum(basis: FockBasis, grid: ModeGrid, f) -> sp.csr_matrix:
    """Diagonal operator Sum_m f(k_m, lam_m) b*_m b_m.

    ``f`` is either a per-mode array of length ``n_modes`` or a callable
    mapping (k vector, polarization index) to a scalar.  No quadrature weight
    appears here: under the discretization contract, number-type integrals
    carry the measure inside the mode normalization.
    """
    if callable(f):
        fvals = np.array([f(grid.k[m], int(grid.lam[m]))
                          for m in range(grid.n_modes)], dtype=float)
    else:
        fvals = np.asarray(f, dtype=float)
    if fvals.shape != (basis.n_modes,):
        raise ParameterError(
            f"expected {basis.n_modes} per-mode values, got {fvals.shape}")
    if not np.all(np.isfinite(fvals)):
        raise ParameterError("mode function must be finite on all modes")
    return sp.diags(number_diagonal(basis, fvals)).tocsr()


def symmetry_defect(op: sp.spmatrix) -> float:
    """Largest entrywise asymmetry |A - A.T|; 0 for exactly symmetric ops."""
    d = (op - op.T).tocoo()
    return float(np.max(np.abs(d.data))) if d.nnz else 0.0


def dump_operator_coo(op: sp.spmatrix) -> str:
    """Coordinate-format text dump (row col value per line) for debugging."""
    coo = op.tocoo()
    lines = [f"% {coo.shape[0]} {coo.shape[1]} {coo.nnz}"]
    order = np.lexsort((coo.col, coo.row))
    lines += [f"{coo.row[i]} {coo.col[i]} {float(coo.data[i])!r}"
              for i in order]
    return "\n".join(lines) + "\n"
