"""Triplet accumulation, CSR compression and a direct solve.

CSR storage and the large-system LU are scipy's (``csr_matrix``, SuperLU);
systems of dimension <= 500 go through a small dense LU with threshold
partial pivoting and a fixed tie-break so that singular pivots can be
reported by index.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularSystem

DENSE_LIMIT = 500
PIVOT_THRESHOLD = 0.1
RESIDUAL_TOL = 1e-10


class TripletBuffer:
    """Growable (row, col, value) store; duplicates are summed on compression."""

    def __init__(self, shape):
        self.shape = (int(shape[0]), int(shape[1]))
        self._rows, self._cols, self._vals = [], [], []

    def add(self, rows, cols, vals):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=float).ravel()
        if not (rows.size == cols.size == vals.size):
            raise ValueError("row, col and value arrays differ in length")
        if rows.size and (rows.min() < 0 or rows.max() >= self.shape[0]
                          or cols.min() < 0 or cols.max() >= self.shape[1]):
            raise IndexError("triplet index outside matrix dimensions")
        self._rows.append(rows)
        self._cols.append(cols)
        self._vals.append(vals)

    def extend(self, other):
        """Append another buffer's entries (deterministic merge in call order)."""
        if other.shape != self.shape:
            raise ValueError("shape mismatch")
        self._rows += other._rows
        self._cols += other._cols
        self._vals += other._vals

    def triplets(self):
        if not self._rows:
            e = np.zeros(0, dtype=np.int64)
            return e, e.copy(), np.zeros(0)
        return np.concatenate(self._rows), np.concatenate(self._cols), np.concatenate(self._vals)

    def __len__(self):
        return sum(r.size for r in self._rows)


def compress(buffer):
    """CSR matrix with sorted column indices and duplicates summed."""
    r, c, v = buffer.triplets()
    A = sp.csr_matrix((v, (r, c)), shape=buffer.shape)
    A.sum_duplicates()
    A.sort_indices()
    return A


def _dense_lu_solve(A, b):
    A = np.array(A, dtype=float)
    x = np.array(b, dtype=float)
    n = A.shape[0]
    scale = max(np.abs(A).sum(axis=1).max(initial=0.0), np.finfo(float).tiny)
    tiny = n * np.finfo(float).eps * scale
    for k in range(n):
        col = np.abs(A[k:, k])
        big = col.max()
        if big <= tiny:
            raise SingularSystem(f"numerically singular pivot at index {k}", pivot=k)
        # smallest row index among candidates within the threshold of the largest
        p = k + int(np.flatnonzero(col >= (1.0 - PIVOT_THRESHOLD) * big)[0])
        if p != k:
            A[[k, p]] = A[[p, k]]
            x[[k, p]] = x[[p, k]]
        l = A[k + 1:, k] / A[k, k]
        A[k + 1:, k + 1:] -= np.outer(l, A[k, k + 1:])
        A[k + 1:, k] = l
        x[k + 1:] -= l * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - A[k, k + 1:] @ x[k + 1:]) / A[k, k]
    return x


def backward_error(A, x, b):
    r = A @ x - b
    anorm = abs(A).sum(axis=1).max() if A.shape[0] else 0.0
    denom = anorm * np.abs(x).max(initial=0.0) + np.abs(b).max(initial=0.0)
    return 0.0 if denom == 0.0 else float(np.abs(r).max() / denom)


def solve_direct(A, b):
    """Solve ``A x = b`` by LU with partial pivoting.

    Raises SingularSystem for a numerically singular matrix or when the
    normwise backward error stays above 1e-10 after two refinement steps.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("matrix must be square")
    if n == 0:
        return np.zeros(0)
    if n <= DENSE_LIMIT:
        dense = A.toarray()
        solve = lambda rhs: _dense_lu_solve(dense, rhs)
    else:
        try:
            lu = spla.splu(A.tocsc(), permc_spec="COLAMD", diag_pivot_thresh=PIVOT_THRESHOLD)
        except RuntimeError as exc:
            raise SingularSystem(f"sparse LU failed: {exc}") from exc
        solve = lu.solve
    x = solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite solution; matrix is numerically singular")
    for _ in range(2):
        if backward_error(A, x, b) <= RESIDUAL_TOL:
            break
        x = x + solve(b - A @ x)
    err = backward_error(A, x, b)
    if err > RESIDUAL_TOL:
        raise SingularSystem(f"backward error {err:.3e} above {RESIDUAL_TOL:g}")
    return x
