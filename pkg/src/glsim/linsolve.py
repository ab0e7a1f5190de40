"""Complex tridiagonal solvers (Thomas algorithm) with last-row border entries.

The sweeps are compiled with numba; no pivoting is done, a vanishing pivot
raises :class:`ZeroPivot` so that callers can fall back to dense elimination.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .errors import ZeroPivot

_TINY = 1e-300


@dataclass
class TridiagonalSystem:
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.ascontiguousarray(self.lower, dtype=complex)
        self.diag = np.ascontiguousarray(self.diag, dtype=complex)
        self.upper = np.ascontiguousarray(self.upper, dtype=complex)
        n = len(self.diag)
        if len(self.lower) != n - 1 or len(self.upper) != n - 1:
            raise ValueError("lower/upper must have length n-1")

    @property
    def n(self):
        return len(self.diag)

    def to_dense(self):
        n = self.n
        A = np.zeros((n, n), dtype=complex)
        A[np.arange(n), np.arange(n)] = self.diag
        A[np.arange(1, n), np.arange(n - 1)] = self.lower
        A[np.arange(n - 1), np.arange(1, n)] = self.upper
        return A

    def matvec(self, x):
        y = self.diag * x
        y[1:] += self.lower * x[:-1]
        y[:-1] += self.upper * x[1:]
        return y

    def copy(self):
        return TridiagonalSystem(self.lower.copy(), self.diag.copy(), self.upper.copy())


@njit(cache=True)
def _factor(lower, diag, upper, tol):
    n = diag.shape[0]
    cp = np.empty(n, dtype=np.complex128)
    piv = np.empty(n, dtype=np.complex128)
    piv[0] = diag[0]
    if abs(piv[0]) <= tol:
        return cp, piv, 0
    for k in range(1, n):
        cp[k - 1] = upper[k - 1] / piv[k - 1]
        piv[k] = diag[k] - lower[k - 1] * cp[k - 1]
        if abs(piv[k]) <= tol:
            return cp, piv, k
    return cp, piv, -1


@njit(cache=True)
def _sweep(lower, cp, piv, rhs):
    n = piv.shape[0]
    x = np.empty(n, dtype=np.complex128)
    x[0] = rhs[0] / piv[0]
    for k in range(1, n):
        x[k] = (rhs[k] - lower[k - 1] * x[k - 1]) / piv[k]
    for k in range(n - 2, -1, -1):
        x[k] -= cp[k] * x[k + 1]
    return x


class ThomasFactor:
    """Forward-elimination coefficients of a tridiagonal matrix, reusable."""

    def __init__(self, sys):
        scale = max(float(np.max(np.abs(sys.diag))), _TINY)
        cp, piv, bad = _factor(sys.lower, sys.diag, sys.upper, 1e-14 * scale)
        if bad >= 0:
            raise ZeroPivot(f"vanishing pivot in row {bad}")
        self.lower = sys.lower
        self.cp = cp
        self.piv = piv

    def solve(self, rhs):
        return _sweep(self.lower, self.cp, self.piv, np.ascontiguousarray(rhs, dtype=complex))


def thomas_solve(sys, rhs):
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.shape != (sys.n,):
        raise ValueError(f"rhs has shape {rhs.shape}, system size is {sys.n}")
    return ThomasFactor(sys).solve(rhs)


def _as_entries(extra):
    if extra is None:
        return []
    if isinstance(extra, tuple) and len(extra) == 3 and np.isscalar(extra[0]):
        return [extra]
    return list(extra)


def border_elimination(sys, extra):
    """Fold last-row entries left of the band into it.

    Each entry ``(n-1, c, value)`` with ``c <= n-3`` is eliminated against
    row ``c+1``, leftmost first; this can spill into column ``c+1`` but
    never further left. Returns the banded system and the list of
    ``(source_row, factor)`` operations that must be replayed on every rhs.
    """
    entries = _as_entries(extra)
    n = sys.n
    out = sys.copy()
    row = {}
    for r, c, value in entries:
        if r != n - 1 or not 0 <= c <= n - 3:
            raise ValueError(f"border entries must sit in row {n - 1} left of column {n - 2}, got ({r}, {c})")
        row[c] = row.get(c, 0.0) + complex(value)
    ops = []
    for c in sorted(row):
        value = row.pop(c)
        if value == 0:
            continue
        anchor = out.lower[c]
        if abs(anchor) <= _TINY:
            raise ZeroPivot(f"cannot eliminate border entry: row {c + 1} has no column {c} entry")
        factor = value / anchor
        ops.append((c + 1, factor))
        # row c+1 holds columns c (anchor), c+1 (diag) and c+2 (upper)
        spill = {c + 1: out.diag[c + 1], c + 2: out.upper[c + 1] if c + 1 < n - 1 else 0.0}
        for col, coef in spill.items():
            if col == n - 1:
                out.diag[n - 1] -= factor * coef
            elif col == n - 2:
                out.lower[n - 2] -= factor * coef
            else:
                row[col] = row.get(col, 0.0) - factor * coef
    return out, ops


def eliminate_border(sys, extra, rhs):
    """Banded ``(system, rhs)`` equivalent to the bordered system; inputs untouched."""
    banded, ops = border_elimination(sys, extra)
    rhs = np.array(rhs, dtype=complex)
    for src, factor in ops:
        rhs[-1] -= factor * rhs[src]
    return banded, rhs


def bordered_solve(sys, extra, rhs):
    """Solve a tridiagonal system plus one entry in the last row at column n-3.

    ``extra`` is ``(row, col, value)``; a list of such triples (all in the
    last row) is accepted too, for wider one-sided boundary stencils.
    """
    banded, rhs = eliminate_border(sys, extra, rhs)
    return thomas_solve(banded, rhs)


def dense_matrix(sys, extra=None):
    A = sys.to_dense()
    for row, col, value in _as_entries(extra):
        A[row, col] += value
    return A


class PreparedSolver:
    """Factor once, solve many times; falls back to dense LU on ZeroPivot."""

    def __init__(self, sys, extra=None):
        self.ops = []
        self.dense = None
        try:
            banded, self.ops = border_elimination(sys, extra)
            self.factor = ThomasFactor(banded)
        except ZeroPivot:
            A = dense_matrix(sys, extra)
            with warnings.catch_warnings():
                # a singular matrix is reported as ZeroPivot just below
                warnings.simplefilter("ignore", LinAlgWarning)
                lu, piv = lu_factor(A, check_finite=True)
            if np.min(np.abs(np.diag(lu))) <= 1e-14 * np.max(np.abs(A)):
                raise
            self.dense = (lu, piv)

    def solve(self, rhs):
        if self.dense is not None:
            return lu_solve(self.dense, np.asarray(rhs, dtype=complex))
        rhs = np.array(rhs, dtype=complex)
        for src, factor in self.ops:
            rhs[-1] -= factor * rhs[src]
        return self.factor.solve(rhs)
