"""Batch prediction matrices and their singular value decomposition."""
from dataclasses import dataclass

import numpy as np

from bnm._kernels import get_kernel
from bnm.errors import (
    ColumnMismatch,
    ConvergenceFailure,
    EmptyList,
    EmptyMatrix,
    MatrixFormatError,
    NegativeEntry,
    NonFiniteInput,
    RowSumViolation,
)

NEGATIVE_TOL = 1e-9
ROW_SUM_TOL = 1e-6
MAX_SWEEPS = 60
EPS = np.finfo(np.float64).eps


@dataclass(frozen=True, eq=False)
class PredictionMatrix:
    """A validated B x C row-stochastic matrix of class probabilities.

    Construct through :func:`from_rows` or :func:`softmax`; the constructor
    itself does not validate. ``values`` is a read-only float64 array.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, order="C")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def rows(self):
        return self.values.shape[0]

    @property
    def cols(self):
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def __repr__(self):
        return f"PredictionMatrix(B={self.rows}, C={self.cols})"


@dataclass(frozen=True, eq=False)
class SvdResult:
    """Thin SVD ``A = U diag(sigma) V^T`` with sigma descending.

    ``rank`` counts singular values above the clamp threshold ``tau``; those
    below were set to exactly zero.
    """

    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    tau: float
    sweeps: int

    @property
    def rank(self):
        return int(np.count_nonzero(self.singular_values > 0.0))

    def reconstruct(self):
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


def as_array(A):
    """Return the float64 values of a PredictionMatrix or array-like, unvalidated."""
    if isinstance(A, PredictionMatrix):
        return A.values
    arr = np.asarray(A, dtype=np.float64)
    if arr.ndim != 2:
        raise EmptyMatrix(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


def validate(values, check_rows=True):
    """Raise if ``values`` breaks the simplex constraints."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise EmptyMatrix(f"matrix must be non-empty 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("matrix contains non-finite entries")
    if arr.shape[1] < 2:
        raise EmptyMatrix(f"need at least 2 categories, got C={arr.shape[1]}")
    low = arr.min()
    if low < -NEGATIVE_TOL:
        i, j = np.unravel_index(np.argmin(arr), arr.shape)
        raise NegativeEntry(f"entry ({i}, {j}) = {low!r} is negative")
    if check_rows:
        dev = np.abs(arr.sum(axis=1) - 1.0)
        bad = int(np.argmax(dev))
        if dev[bad] > ROW_SUM_TOL:
            raise RowSumViolation(
                f"row {bad} sums to {arr[bad].sum()!r}, expected 1 within {ROW_SUM_TOL}")
    return arr


def from_rows(values, check_rows=True):
    """Validate a dense matrix and wrap it as a :class:`PredictionMatrix`.

    ``check_rows=False`` skips only the row-sum check.
    """
    if isinstance(values, PredictionMatrix):
        return values
    try:
        arr = np.asarray(values, dtype=np.float64)
    except ValueError as exc:  # ragged nested lists
        raise EmptyMatrix(f"matrix is not rectangular: {exc}") from None
    if arr.size == 0:
        raise EmptyMatrix("matrix is empty")
    return PredictionMatrix(validate(arr, check_rows=check_rows))


def softmax(logits):
    """Row-wise softmax with max subtraction."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim == 1:
        z = z[None, :]
    if z.ndim != 2 or z.size == 0:
        raise EmptyMatrix(f"logits must be non-empty 2-D, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise NonFiniteInput("logits contain non-finite entries")
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return PredictionMatrix(e / e.sum(axis=1, keepdims=True))


def one_hot(indices, cols):
    idx = np.asarray(indices, dtype=np.intp)
    out = np.zeros((idx.shape[0], cols))
    out[np.arange(idx.shape[0]), idx] = 1.0
    return out


def argmax_rows(A):
    """Row-wise argmax; ties go to the lowest column index."""
    return np.argmax(as_array(A), axis=1)


def stack(batches):
    """Concatenate prediction matrices vertically, in list order."""
    batches = list(batches)
    if not batches:
        raise EmptyList("cannot stack an empty list of batches")
    if len(batches) == 1:
        only = batches[0]
        return only if isinstance(only, PredictionMatrix) else PredictionMatrix(as_array(only))
    arrays = [as_array(b) for b in batches]
    cols = arrays[0].shape[1]
    for k, arr in enumerate(arrays):
        if arr.shape[1] != cols:
            raise ColumnMismatch(f"batch {k} has {arr.shape[1]} columns, expected {cols}")
    return PredictionMatrix(np.vstack(arrays))


def _complete_basis(Q, count):
    """Append ``count`` orthonormal columns to ``Q`` (m x r, orthonormal).

    Standard basis vectors are projected out in order of largest residual,
    ties to the lowest index, so the result is deterministic.
    """
    m = Q.shape[0]
    basis = Q.copy()
    for _ in range(count):
        resid = 1.0 - np.einsum("ij,ij->i", basis, basis)
        k = int(np.argmax(resid))
        v = np.zeros(m)
        v[k] = 1.0
        for _ in range(2):
            v -= basis @ (basis.T @ v)
        v /= np.linalg.norm(v)
        basis = np.column_stack([basis, v])
    return basis


def svd(matrix, kernel=None):
    """Thin SVD by one-sided Jacobi rotations.

    Works on ``A`` or ``A^T``, whichever has fewer columns. Singular values
    at or below ``tau = eps * max(B, C) * sigma_1`` are clamped to zero and
    their left/right vectors completed to an orthonormal set.

    Parameters
    ----------
    matrix : PredictionMatrix or array_like
        B x C input; array input is not simplex-validated.
    kernel : {"compiled", "python"}, optional
        Jacobi kernel; defaults to the one selected at import.

    Raises
    ------
    ConvergenceFailure
        If rotations are still needed after 60 sweeps.
    """
    a = as_array(matrix)
    if a.size == 0:
        raise EmptyMatrix("cannot decompose an empty matrix")
    if not np.all(np.isfinite(a)):
        raise NonFiniteInput("matrix contains non-finite entries")
    nrows, ncols = a.shape
    transposed = ncols > nrows
    work = a.T if transposed else a
    m, n = work.shape
    G = np.ascontiguousarray(work.T, dtype=np.float64).copy()
    Vt = np.eye(n)
    fro = float(np.sqrt(np.einsum("ij,ij->", a, a)))
    rel_tol = np.sqrt(m) * EPS
    sweeps = get_kernel(kernel)(G, Vt, rel_tol, EPS * fro, MAX_SWEEPS)
    if sweeps < 0:
        raise ConvergenceFailure(f"Jacobi SVD did not converge in {MAX_SWEEPS} sweeps")

    sigma = np.sqrt(np.einsum("ij,ij->i", G, G))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    G = G[order]
    V = Vt[order].T
    tau = EPS * max(nrows, ncols) * (sigma[0] if n else 0.0)
    keep = sigma > tau
    r = int(np.count_nonzero(keep))
    U = (G[:r] / sigma[:r, None]).T
    if r < n:
        U = _complete_basis(U.reshape(m, r), n - r)
    sigma = np.where(keep, sigma, 0.0)
    if transposed:
        U, V = V, U
    return SvdResult(np.ascontiguousarray(sigma), np.ascontiguousarray(U),
                     np.ascontiguousarray(V), float(tau), int(sweeps))


def read_matrix(path_or_text, *, is_text=False):
    """Parse the comma-separated matrix format into a float64 array.

    One row per line, no header. Blank trailing lines are ignored; ragged
    rows, blank interior lines and unparsable fields raise
    :class:`MatrixFormatError` carrying a 1-based line number.
    """
    if is_text:
        text = path_or_text
    else:
        with open(path_or_text, encoding="utf-8") as fh:
            text = fh.read()
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MatrixFormatError("file contains no rows")
    rows = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            raise MatrixFormatError("blank line inside matrix", line=lineno)
        fields = line.split(",")
        try:
            row = [float(f) for f in fields]
        except ValueError:
            raise MatrixFormatError(f"unparsable number in {line.strip()!r}", line=lineno) from None
        if not all(np.isfinite(row)):
            raise MatrixFormatError("non-finite value", line=lineno)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise MatrixFormatError(f"ragged row: {len(row)} fields, expected {width}", line=lineno)
        rows.append(row)
    return np.array(rows, dtype=np.float64)


def format_matrix(values):
    arr = as_array(values)
    return "".join(",".join(repr(float(x)) for x in row) + "\n" for row in arr)


def write_matrix(path, values):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_matrix(values))
