"""Compressed sparse row matrices and the kernels built on them.

Every graph operator in the package (adjacency, Laplacian, Hadamard-power
propagation operators) is a :class:`CsrMatrix`. Dense operands are plain
``float64`` numpy arrays.

Canonical form means sorted, unique column indices within each row.
Constructors that take coordinates or dense input drop exact zeros.
Pattern-driven kernels (Hadamard product/power, normalization) keep every
structural entry even if arithmetic underflows it to zero, so that
``nnz`` invariants hold exactly.
"""

from __future__ import annotations

import contextlib
import contextvars
import io
import os
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import DataError, DimensionError, DomainError, ParameterError

__all__ = [
    "CsrMatrix",
    "OpCounter",
    "count_ops",
    "identity",
    "hadamard_product",
    "hadamard_power",
    "add_scaled_identity",
    "row_sums",
    "sym_normalize",
    "spmm",
    "to_dense",
    "laplacian",
    "format_coo",
    "parse_coo",
    "save_coo",
    "load_coo",
]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Immutable CSR matrix with double-precision values.

    Use :meth:`from_coo` or :meth:`from_dense` to build one; the raw
    constructor only validates, it does not sort or deduplicate.
    """

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        row_ptr = np.array(self.row_ptr, dtype=np.int64)
        col_idx = np.array(self.col_idx, dtype=np.int64)
        values = np.array(self.values, dtype=np.float64)
        n_rows, n_cols = int(self.n_rows), int(self.n_cols)
        if n_rows < 0 or n_cols < 0:
            raise DimensionError(f"negative shape ({n_rows}, {n_cols})")
        if row_ptr.shape != (n_rows + 1,):
            raise DimensionError(f"row_ptr must have length {n_rows + 1}, got {row_ptr.shape}")
        if col_idx.ndim != 1 or col_idx.shape != values.shape:
            raise DimensionError("col_idx and values must be 1-D arrays of equal length")
        if row_ptr[0] != 0 or row_ptr[-1] != len(values) or np.any(np.diff(row_ptr) < 0):
            raise DomainError("row_ptr must start at 0, be non-decreasing and end at nnz")
        if len(col_idx) and (col_idx.min() < 0 or col_idx.max() >= n_cols):
            raise DomainError("column index out of range")
        rows = np.repeat(np.arange(n_rows), np.diff(row_ptr))
        same_row = rows[1:] == rows[:-1]
        if np.any(np.diff(col_idx)[same_row] <= 0):
            raise DomainError("column indices must be strictly increasing within each row")
        object.__setattr__(self, "n_rows", n_rows)
        object.__setattr__(self, "n_cols", n_cols)
        object.__setattr__(self, "row_ptr", _frozen(row_ptr))
        object.__setattr__(self, "col_idx", _frozen(col_idx))
        object.__setattr__(self, "values", _frozen(values))

    # -- construction ---------------------------------------------------

    @classmethod
    def from_coo(cls, rows, cols, values, shape: tuple[int, int]) -> "CsrMatrix":
        """Build a canonical matrix from coordinate triples.

        Duplicate coordinates are summed; entries that are exactly zero
        after summation are dropped.
        """
        n_rows, n_cols = shape
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=np.float64).ravel()
        if not (rows.shape == cols.shape == values.shape):
            raise DimensionError("rows, cols and values must have equal length")
        if len(rows):
            if rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0 or cols.max() >= n_cols:
                raise DimensionError(f"coordinate out of range for shape {shape}")
        keys = rows * n_cols + cols
        order = np.argsort(keys, kind="stable")
        keys, values = keys[order], values[order]
        if len(keys):
            starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
            keys = keys[starts]
            values = np.add.reduceat(values, starts)
        keep = values != 0.0
        keys, values = keys[keep], values[keep]
        return cls._from_sorted_keys(keys, values, n_rows, n_cols)

    @classmethod
    def _from_sorted_keys(cls, keys, values, n_rows, n_cols) -> "CsrMatrix":
        if n_cols == 0:
            rows = cols = np.zeros(0, dtype=np.int64)
        else:
            rows, cols = np.divmod(keys, n_cols)
        row_ptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n_rows), out=row_ptr[1:])
        return cls(n_rows, n_cols, row_ptr, cols, values)

    @classmethod
    def from_dense(cls, dense) -> "CsrMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim != 2:
            raise DimensionError(f"expected a 2-D array, got shape {dense.shape}")
        rows, cols = np.nonzero(dense)
        return cls.from_coo(rows, cols, dense[rows, cols], dense.shape)

    @classmethod
    def zeros(cls, n_rows: int, n_cols: int) -> "CsrMatrix":
        return cls(n_rows, n_cols, np.zeros(n_rows + 1, dtype=np.int64), [], [])

    def with_values(self, values: np.ndarray) -> "CsrMatrix":
        """Same pattern, new values (structural zeros allowed)."""
        return CsrMatrix(self.n_rows, self.n_cols, self.row_ptr, self.col_idx, values)

    # -- inspection -----------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def row_indices(self) -> np.ndarray:
        """Row index of every stored entry (the COO row array)."""
        return np.repeat(np.arange(self.n_rows), np.diff(self.row_ptr))

    def keys(self) -> np.ndarray:
        """Linearized ``row * n_cols + col`` keys, sorted ascending."""
        return self.row_indices() * self.n_cols + self.col_idx

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.row_indices(), self.col_idx] = self.values
        return out

    def transpose(self) -> "CsrMatrix":
        return _transpose_structural(self)

    def diagonal(self) -> np.ndarray:
        diag = np.zeros(min(self.shape))
        rows = self.row_indices()
        on = rows == self.col_idx
        diag[rows[on]] = self.values[on]
        return diag

    def get(self, i: int, j: int) -> float:
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        pos = lo + np.searchsorted(self.col_idx[lo:hi], j)
        if pos < hi and self.col_idx[pos] == j:
            return float(self.values[pos])
        return 0.0

    def same_pattern(self, other: "CsrMatrix") -> bool:
        return (self.shape == other.shape
                and np.array_equal(self.row_ptr, other.row_ptr)
                and np.array_equal(self.col_idx, other.col_idx))

    def is_symmetric(self, tol: float = 0.0) -> bool:
        """True when the pattern is symmetric and values agree within ``tol``."""
        if self.n_rows != self.n_cols:
            return False
        t = _transpose_structural(self)
        if not self.same_pattern(t):
            return False
        return bool(np.all(np.abs(self.values - t.values) <= tol))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.nnz else 0.0

    def __repr__(self) -> str:
        return f"CsrMatrix(shape={self.shape}, nnz={self.nnz})"


def _transpose_structural(m: CsrMatrix) -> CsrMatrix:
    # Transpose preserving structural zeros.
    rows = m.row_indices()
    keys = m.col_idx * m.n_rows + rows
    order = np.argsort(keys, kind="stable")
    return CsrMatrix._from_sorted_keys(keys[order], m.values[order], m.n_cols, m.n_rows)


def identity(n: int, scale: float = 1.0) -> CsrMatrix:
    if scale == 0.0:
        return CsrMatrix.zeros(n, n)
    return CsrMatrix(n, n, np.arange(n + 1), np.arange(n), np.full(n, float(scale)))


# -- operation counting ---------------------------------------------------

@dataclass
class OpCounter:
    """Tally of multiply-adds performed by :func:`spmm`."""

    multiply_adds: int = 0
    calls: int = 0


_active_counter: contextvars.ContextVar[OpCounter | None] = contextvars.ContextVar(
    "sobgnn_op_counter", default=None
)


@contextlib.contextmanager
def count_ops() -> Iterator[OpCounter]:
    """Count sparse multiply-adds executed inside the ``with`` block."""
    counter = OpCounter()
    token = _active_counter.set(counter)
    try:
        yield counter
    finally:
        _active_counter.reset(token)


# -- kernels ---------------------------------------------------------------

def _check_same_shape(a: CsrMatrix, b: CsrMatrix) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


def hadamard_product(a: CsrMatrix, b: CsrMatrix) -> CsrMatrix:
    """Elementwise product; the result pattern is the intersection of patterns."""
    _check_same_shape(a, b)
    ka, kb = a.keys(), b.keys()
    keys, ia, ib = np.intersect1d(ka, kb, assume_unique=True, return_indices=True)
    return CsrMatrix._from_sorted_keys(keys, a.values[ia] * b.values[ib], a.n_rows, a.n_cols)


def hadamard_power(m: CsrMatrix, rho: int) -> CsrMatrix:
    """Entrywise ``rho``-th power. The pattern (and so ``nnz``) never changes."""
    if isinstance(rho, bool) or not isinstance(rho, (int, np.integer)):
        raise ParameterError(f"rho must be a positive integer, got {rho!r}")
    if rho < 1:
        raise ParameterError(f"rho must be >= 1, got {rho} (rho=0 would densify to all-ones)")
    if rho == 1:
        return m
    return m.with_values(m.values ** int(rho))


def add_scaled_identity(m: CsrMatrix, eps: float) -> CsrMatrix:
    """Return ``m + eps * I``.

    Diagonal positions are added to the pattern wherever the resulting
    value is nonzero, including positions where ``m`` had no entry.
    """
    if m.n_rows != m.n_cols:
        raise DimensionError(f"add_scaled_identity needs a square matrix, got {m.shape}")
    if eps < 0:
        raise ParameterError(f"eps must be >= 0, got {eps}")
    if eps == 0:
        return m
    n = m.n_rows
    rows = np.concatenate([m.row_indices(), np.arange(n)])
    cols = np.concatenate([m.col_idx, np.arange(n)])
    vals = np.concatenate([m.values, np.full(n, float(eps))])
    return CsrMatrix.from_coo(rows, cols, vals, m.shape)


def row_sums(m: CsrMatrix) -> np.ndarray:
    """Vector of row sums, i.e. the degree vector ``A @ 1``."""
    out = np.zeros(m.n_rows)
    counts = np.diff(m.row_ptr)
    nonempty = counts > 0
    if m.nnz:
        out[nonempty] = np.add.reduceat(m.values, m.row_ptr[:-1][nonempty])
    return out


def sym_normalize(m: CsrMatrix) -> CsrMatrix:
    """Symmetric degree normalization ``D^{-1/2} M D^{-1/2}``.

    Rows (and columns) with zero degree map to zero instead of inf/nan.
    """
    if m.n_rows != m.n_cols:
        raise DimensionError(f"sym_normalize needs a square matrix, got {m.shape}")
    if m.nnz and m.values.min() < 0:
        raise DomainError("sym_normalize requires non-negative entries")
    deg = row_sums(m)
    scale = np.sqrt(deg[m.row_indices()] * deg[m.col_idx])
    values = np.zeros(m.nnz)
    np.divide(m.values, scale, out=values, where=scale > 0)
    return m.with_values(values)


def spmm(m: CsrMatrix, x: np.ndarray) -> np.ndarray:
    """Sparse-dense product ``m @ x``; ``x`` may be a matrix or a vector.

    Work is ``nnz(m) * x.shape[1]`` multiply-adds, tallied by
    :func:`count_ops` when active.
    """
    x = np.asarray(x, dtype=np.float64)
    vector = x.ndim == 1
    if vector:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] != m.n_cols:
        raise DimensionError(f"cannot multiply {m.shape} by {x.shape}")
    out = np.zeros((m.n_rows, x.shape[1]))
    if m.nnz:
        contrib = m.values[:, None] * x[m.col_idx]
        nonempty = np.diff(m.row_ptr) > 0
        out[nonempty] = np.add.reduceat(contrib, m.row_ptr[:-1][nonempty], axis=0)
    counter = _active_counter.get()
    if counter is not None:
        counter.multiply_adds += m.nnz * x.shape[1]
        counter.calls += 1
    return out[:, 0] if vector else out


def to_dense(m: CsrMatrix) -> np.ndarray:
    return m.to_dense()


def laplacian(a: CsrMatrix) -> CsrMatrix:
    """Combinatorial Laplacian ``L = D - A`` of a symmetric non-negative matrix."""
    if a.n_rows != a.n_cols:
        raise DimensionError(f"laplacian needs a square matrix, got {a.shape}")
    if a.nnz and a.values.min() < 0:
        raise DomainError("laplacian requires non-negative weights")
    if not a.is_symmetric():
        raise DomainError("laplacian requires a symmetric adjacency")
    n = a.n_rows
    deg = row_sums(a)
    rows = np.concatenate([a.row_indices(), np.arange(n)])
    cols = np.concatenate([a.col_idx, np.arange(n)])
    vals = np.concatenate([-a.values, deg])
    return CsrMatrix.from_coo(rows, cols, vals, a.shape)


# -- serialization ----------------------------------------------------------

def format_coo(m: CsrMatrix, comments: list[str] | None = None) -> str:
    """Coordinate text: ``rows cols nnz`` header then ``i j value`` lines.

    Values use Python's shortest round-trip repr, so parsing is bit-exact.
    Optional ``#`` comment lines are written before the header.
    """
    buf = io.StringIO()
    for line in comments or []:
        buf.write(f"# {line}\n")
    buf.write(f"{m.n_rows} {m.n_cols} {m.nnz}\n")
    for i, j, v in zip(m.row_indices().tolist(), m.col_idx.tolist(), m.values.tolist()):
        buf.write(f"{i} {j} {v!r}\n")
    return buf.getvalue()


def parse_coo(text: str, source: str = "<string>") -> tuple[CsrMatrix, list[str]]:
    """Parse :func:`format_coo` output. Returns the matrix and any comment lines."""
    comments: list[str] = []
    header = None
    rows, cols, vals = [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if header is None:
                comments.append(line[1:].strip())
            continue
        parts = line.split()
        try:
            if header is None:
                if len(parts) != 3:
                    raise ValueError("header must be 'rows cols nnz'")
                header = tuple(int(p) for p in parts)
                continue
            if len(parts) != 3:
                raise ValueError("expected 'i j value'")
            rows.append(int(parts[0]))
            cols.append(int(parts[1]))
            vals.append(float(parts[2]))
        except ValueError as exc:
            raise DataError(f"{source}:{lineno}: {exc}") from None
    if header is None:
        raise DataError(f"{source}: missing 'rows cols nnz' header")
    n_rows, n_cols, nnz = header
    if len(vals) != nnz:
        raise DataError(f"{source}: header declares {nnz} entries, found {len(vals)}")
    try:
        m = _from_coo_structural(rows, cols, vals, (n_rows, n_cols))
    except (DimensionError, DomainError) as exc:
        raise DataError(f"{source}: {exc}") from None
    return m, comments


def _from_coo_structural(rows, cols, vals, shape) -> CsrMatrix:
    # Keeps explicit zeros so that a serialized structural pattern round-trips.
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    n_rows, n_cols = shape
    if len(rows) and (rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0 or cols.max() >= n_cols):
        raise DimensionError(f"coordinate out of range for shape {shape}")
    keys = rows * n_cols + cols
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    if len(keys) > 1 and np.any(keys[1:] == keys[:-1]):
        raise DomainError("duplicate coordinates")
    return CsrMatrix._from_sorted_keys(keys, vals[order], n_rows, n_cols)


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` via a temp file and rename, so readers never see a partial file."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def save_coo(m: CsrMatrix, path, comments: list[str] | None = None) -> None:
    atomic_write_text(path, format_coo(m, comments))


def load_coo(path) -> tuple[CsrMatrix, list[str]]:
    with open(path, encoding="utf-8") as fh:
        return parse_coo(fh.read(), source=os.fspath(path))
