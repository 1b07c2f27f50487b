"""Sparse CSR storage, Matrix Market I/O and test-problem generators."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SparseMatrix",
    "EigenPair",
    "MatrixMarketError",
    "csr_from_triplets",
    "matvec",
    "parse_matrix_market",
    "write_matrix_market",
    "gen_laplacian_2d",
    "gen_convdiff_2d",
    "gen_diag",
    "laplacian_2d_eigenpairs",
    "randn_vector",
    "make_rng",
]


class MatrixMarketError(ValueError):
    """Malformed or unsupported Matrix Market input."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


@dataclass(frozen=True)
class SparseMatrix:
    """Real matrix in compressed sparse row form.

    Column indices are strictly increasing within each row.  The arrays are
    made read-only on construction so instances can be shared between solves.
    """

    nrows: int
    ncols: int
    row_starts: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _csr: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        row_starts = np.ascontiguousarray(self.row_starts, dtype=np.int64)
        col_indices = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if row_starts.shape != (self.nrows + 1,):
            raise ValueError("row_starts must have length nrows + 1")
        if row_starts[0] != 0 or row_starts[-1] != len(values) or len(values) != len(col_indices):
            raise ValueError("row_starts inconsistent with values/col_indices")
        if np.any(np.diff(row_starts) < 0):
            raise ValueError("row_starts must be nondecreasing")
        if len(col_indices):
            if col_indices.min() < 0 or col_indices.max() >= self.ncols:
                raise ValueError("column index out of range")
            same_row = np.ones(max(len(col_indices) - 1, 0), dtype=bool)
            boundaries = row_starts[(row_starts > 0) & (row_starts < len(col_indices))]
            same_row[boundaries - 1] = False
            if np.any(np.diff(col_indices)[same_row] <= 0):
                raise ValueError("column indices must be strictly increasing within a row")
        for a in (row_starts, col_indices, values):
            a.setflags(write=False)
        object.__setattr__(self, "row_starts", row_starts)
        object.__setattr__(self, "col_indices", col_indices)
        object.__setattr__(self, "values", values)
        csr = sp.csr_matrix((values, col_indices, row_starts), shape=(self.nrows, self.ncols))
        object.__setattr__(self, "_csr", csr)

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def nnz(self):
        return len(self.values)

    def __matmul__(self, x):
        return matvec(self, x)

    def to_dense(self):
        return self._csr.toarray()

    def to_scipy(self):
        return self._csr.copy()

    def transpose(self):
        return _from_scipy(self._csr.T)

    def is_symmetric(self):
        if self.nrows != self.ncols:
            return False
        diff = self._csr - self._csr.T
        return diff.count_nonzero() == 0

    def frobenius_norm(self):
        return float(np.linalg.norm(self.values))

    def triplets(self):
        """Return the stored entries as a list of ``(row, col, value)``."""
        rows = np.repeat(np.arange(self.nrows), np.diff(self.row_starts))
        return list(zip(rows.tolist(), self.col_indices.tolist(), self.values.tolist()))

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a, dtype=float)
        return _from_scipy(sp.csr_matrix(a))


@dataclass(frozen=True)
class EigenPair:
    value: float
    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float)
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError("eigenvector must have unit 2-norm")
        object.__setattr__(self, "vector", v)


def _from_scipy(m):
    m = sp.csr_matrix(m)
    m.sum_duplicates()
    m.sort_indices()
    return SparseMatrix(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)


def csr_from_triplets(nrows: int, ncols: int, triplets: Iterable[tuple[int, int, float]]) -> SparseMatrix:
    """Assemble a CSR matrix from ``(row, col, value)`` triplets.

    Duplicate positions are summed.  Every supplied position is kept as a
    structural entry, even when its value (or the sum) is zero.
    """
    triplets = list(triplets)
    if triplets:
        rows, cols, vals = (np.asarray(c) for c in zip(*triplets))
        rows = rows.astype(np.int64)
        cols = cols.astype(np.int64)
        vals = vals.astype(np.float64)
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    bad = (rows < 0) | (rows >= nrows) | (cols < 0) | (cols >= ncols)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise IndexError(f"triplet {i} ({rows[i]}, {cols[i]}) out of range for {nrows}x{ncols}")

    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if len(rows):
        first = np.ones(len(rows), dtype=bool)
        first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        group = np.cumsum(first) - 1
        summed = np.zeros(group[-1] + 1)
        np.add.at(summed, group, vals)
        rows, cols, vals = rows[first], cols[first], summed
    row_starts = np.zeros(nrows + 1, dtype=np.int64)
    np.add.at(row_starts, rows + 1, 1)
    row_starts = np.cumsum(row_starts)
    return SparseMatrix(nrows, ncols, row_starts, cols, vals)


def matvec(A: SparseMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (A.ncols,):
        raise ValueError(f"dimension mismatch: matrix has {A.ncols} columns, vector has shape {x.shape}")
    return A._csr @ x


# --------------------------------------------------------------------------
# Matrix Market

def parse_matrix_market(text) -> SparseMatrix:
    """Parse a coordinate real general/symmetric Matrix Market file.

    ``text`` may be ``bytes``, ``str`` or a readable text/binary stream.
    """
    if hasattr(text, "read"):
        text = text.read()
    if isinstance(text, bytes):
        text = text.decode("ascii", errors="replace")
    lines = text.splitlines()
    if not lines:
        raise MatrixMarketError("empty input", 1)

    header = lines[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket":
        raise MatrixMarketError("missing %%MatrixMarket header", 1)
    obj, fmt, field_, symm = (h.lower() for h in header[1:])
    if obj != "matrix":
        raise MatrixMarketError(f"unsupported object '{obj}'", 1)
    if fmt != "coordinate":
        raise MatrixMarketError(f"unsupported format '{fmt}'", 1)
    if field_ not in ("real", "integer", "double"):
        raise MatrixMarketError(f"unsupported field '{field_}'", 1)
    if symm not in ("general", "symmetric"):
        raise MatrixMarketError(f"unsupported symmetry '{symm}'", 1)

    lineno = 1
    size = None
    rows, cols, vals = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if size is None:
            if len(parts) != 3:
                raise MatrixMarketError("size line must hold 'rows cols entries'", lineno)
            try:
                size = tuple(int(p) for p in parts)
            except ValueError:
                raise MatrixMarketError("non-integer size line", lineno) from None
            if min(size) < 0:
                raise MatrixMarketError("negative size", lineno)
            continue
        if len(parts) != 3:
            raise MatrixMarketError("entry line must hold 'row col value'", lineno)
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise MatrixMarketError("malformed entry", lineno) from None
        if not (1 <= i <= size[0] and 1 <= j <= size[1]):
            raise MatrixMarketError(f"index ({i}, {j}) out of bounds", lineno)
        if symm == "symmetric" and j > i:
            raise MatrixMarketError("symmetric file holds an upper-triangle entry", lineno)
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
        if symm == "symmetric" and i != j:
            rows.append(j - 1)
            cols.append(i - 1)
            vals.append(v)

    if size is None:
        raise MatrixMarketError("missing size line", lineno)
    stored = len(vals) if symm == "general" else sum(1 for r, c in zip(rows, cols) if r >= c)
    if stored != size[2]:
        raise MatrixMarketError(f"expected {size[2]} entries, found {stored}", lineno)
    return csr_from_triplets(size[0], size[1], zip(rows, cols, vals))


def write_matrix_market(A: SparseMatrix, stream=None, symmetric=None):
    """Write ``A`` in coordinate real format; returns the text if no stream.

    Symmetric matrices are stored as their lower triangle unless
    ``symmetric=False`` is passed.
    """
    if symmetric is None:
        symmetric = A.is_symmetric()
    entries = A.triplets()
    if symmetric:
        entries = [(i, j, v) for i, j, v in entries if i >= j]
    out = io.StringIO()
    out.write(f"%%MatrixMarket matrix coordinate real {'symmetric' if symmetric else 'general'}\n")
    out.write(f"{A.nrows} {A.ncols} {len(entries)}\n")
    for i, j, v in entries:
        out.write(f"{i + 1} {j + 1} {v!r}\n")
    text = out.getvalue()
    if stream is None:
        return text
    stream.write(text)
    return None


# --------------------------------------------------------------------------
# Generators

def _grid_stencil(N, center, east, west, north, south):
    iy, ix = np.divmod(np.arange(N * N), N)  # lexicographic, x varies fastest
    rows = [np.arange(N * N)]
    cols = [np.arange(N * N)]
    vals = [np.full(N * N, center)]
    for dx, dy, c in ((1, 0, east), (-1, 0, west), (0, 1, north), (0, -1, south)):
        ok = (ix + dx >= 0) & (ix + dx < N) & (iy + dy >= 0) & (iy + dy < N)
        src = np.flatnonzero(ok)
        rows.append(src)
        cols.append(src + dx + N * dy)
        vals.append(np.full(src.size, c))
    m = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N * N, N * N))
    return _from_scipy(m)


def gen_laplacian_2d(interior_points_per_side: int) -> SparseMatrix:
    """Five-point Dirichlet Laplacian on an N x N interior grid, unscaled."""
    N = int(interior_points_per_side)
    if N < 1:
        raise ValueError("need at least one interior point per side")
    return _grid_stencil(N, 4.0, -1.0, -1.0, -1.0, -1.0)


def gen_convdiff_2d(interior_points_per_side: int) -> SparseMatrix:
    """Centered differences for -(u_xx + u_yy) + u_x, multiplied by h**2."""
    N = int(interior_points_per_side)
    if N < 2:
        raise ValueError("need at least two interior points per side")
    h = 1.0 / (N + 1)
    return _grid_stencil(N, 4.0, -1.0 + h / 2, -1.0 - h / 2, -1.0, -1.0)


def gen_diag(values: Sequence[float]) -> SparseMatrix:
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("need a nonempty 1-d array of diagonal values")
    n = values.size
    return SparseMatrix(n, n, np.arange(n + 1), np.arange(n), values)


def _sine_modes(N):
    theta = np.pi / (N + 1)
    grid = np.arange(1, N + 1)
    # column j-1 holds the normalized 1-d mode sin(j*l*theta)
    return np.sqrt(2.0 / (N + 1)) * np.sin(theta * np.outer(grid, grid))


def laplacian_2d_eigenpairs(N: int, count_wanted: int, reference=None) -> list[EigenPair]:
    """Analytic eigenpairs of :func:`gen_laplacian_2d` for the smallest eigenvalues.

    Each distinct eigenvalue is reported once.  For a repeated eigenvalue the
    vector is the normalized orthogonal projection of ``reference`` onto the
    eigenspace, i.e. the only direction a Krylov method started from
    ``reference`` can see.
    """
    n = N * N
    if count_wanted > n:
        raise ValueError("count_wanted exceeds the matrix order")
    if reference is not None:
        reference = np.asarray(reference, dtype=float)
        if reference.shape != (n,):
            raise ValueError("reference has wrong dimension")
    theta = np.pi / (N + 1)
    c = 2.0 * np.cos(theta * np.arange(1, N + 1))
    lam = 4.0 - c[None, :] - c[:, None]  # lam[k-1, j-1]: mode j along x, k along y
    flat = lam.ravel()
    order = np.argsort(np.abs(flat), kind="stable")
    modes = _sine_modes(N)

    def vector(flat_index):
        k, j = divmod(int(flat_index), N)
        return np.outer(modes[:, k], modes[:, j]).ravel()

    pairs = []
    pos = 0
    while len(pairs) < count_wanted:
        if pos >= n:
            raise ValueError(f"only {len(pairs)} distinct eigenvalues exist for N={N}")
        value = flat[order[pos]]
        end = pos + 1
        while end < n and abs(flat[order[end]] - value) <= 1e-12 * 8.0:
            end += 1
        group = order[pos:end]
        if len(group) == 1:
            v = vector(group[0])
        else:
            if reference is None:
                raise ValueError(f"eigenvalue {value} is repeated; a reference vector is required")
            basis = np.column_stack([vector(g) for g in group])
            coeffs = basis.T @ reference
            if np.linalg.norm(coeffs) <= 1e-14 * max(np.linalg.norm(reference), 1e-300):
                raise ValueError(f"reference is orthogonal to the eigenspace of {value}")
            v = basis @ coeffs
            v /= np.linalg.norm(v)
        pairs.append(EigenPair(float(value), v / np.linalg.norm(v)))
        pos = end
    return pairs


# --------------------------------------------------------------------------
# Random numbers

def make_rng(seed: int) -> np.random.Generator:
    """Philox-4x64 counter-based generator used for every random draw."""
    return np.random.Generator(np.random.Philox(int(seed)))


def randn_vector(n: int, seed: int) -> np.ndarray:
    """Standard normal vector from Philox uniforms via the Box-Muller transform."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = make_rng(seed)
    pairs = (n + 1) // 2
    u1 = 1.0 - rng.random(pairs)  # in (0, 1]
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * math.pi * u2
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:n]
