"""Sparse direct solves and the symmetric indefinite saddle-point system.

Factorisation is delegated to SuperLU (``scipy.sparse.linalg.splu``) with
partial pivoting. A factorisation whose smallest ``|U_ii|`` falls below
``PIVOT_RTOL * max|M_ij|`` is treated as singular and reported through
:class:`SingularSystemError`, which is how baseline breakdowns surface.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "PIVOT_RTOL",
    "SingularSystemError",
    "SaddleSystem",
    "as_csr",
    "lu_solve",
    "solve_saddle",
]

PIVOT_RTOL = 1e-14
_DENSE_DIAGNOSTIC_LIMIT = 3000


class SingularSystemError(RuntimeError):
    """Raised for structurally or numerically singular systems.

    ``pivot`` is the row index (in the original ordering) of the offending
    pivot when it could be determined; ``block`` names the deficient block of
    a saddle system (``"A"`` or ``"B"``).
    """

    def __init__(self, message: str, pivot: Optional[int] = None, block: Optional[str] = None):
        super().__init__(message)
        self.pivot = pivot
        self.block = block


def as_csr(M) -> sp.csr_matrix:
    """Row-compressed copy with sorted column indices and no duplicates."""
    out = sp.csr_matrix(M, dtype=float, copy=True)
    out.sum_duplicates()
    out.sort_indices()
    return out


def _dense_pivot_diagnostic(M: sp.spmatrix, tol: float) -> Optional[int]:
    if M.shape[0] > _DENSE_DIAGNOSTIC_LIMIT:
        return None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lu, piv = sla.lu_factor(M.toarray(), check_finite=False)
    small = np.flatnonzero(np.abs(np.diag(lu)) <= tol)
    return int(small[0]) if small.size else None


def _factor(M: sp.spmatrix):
    M = sp.csc_matrix(M, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError(f"matrix must be square, got {M.shape}")
    scale = float(np.max(np.abs(M.data))) if M.nnz else 0.0
    tol = PIVOT_RTOL * scale
    if scale == 0.0:
        raise SingularSystemError("matrix is identically zero", pivot=0)
    try:
        lu = spla.splu(M)
    except RuntimeError as exc:
        pivot = _dense_pivot_diagnostic(M, tol)
        raise SingularSystemError(f"singular matrix ({exc}); pivot {pivot}", pivot=pivot) from exc
    diag = np.abs(lu.U.diagonal())
    k = int(np.argmin(diag))
    if diag[k] <= tol:
        # U is in permuted column order (A Pc places column i at perm_c[i])
        pivot = int(np.flatnonzero(lu.perm_c == k)[0])
        raise SingularSystemError(
            f"numerically singular matrix: |pivot| {diag[k]:.3e} <= {tol:.3e} at column {pivot}",
            pivot=pivot)
    return lu


def lu_solve(M, rhs) -> np.ndarray:
    """Solve ``M x = rhs`` by sparse LU with partial pivoting."""
    rhs = np.asarray(rhs, dtype=float)
    if M.shape[0] == 0:
        return np.zeros(0)
    lu = _factor(M)
    return lu.solve(rhs)


@dataclass(frozen=True, eq=False)
class SaddleSystem:
    """``[[A, B], [B^T, 0]] [psi; u] = [F; 0]`` after constraint elimination."""

    A: sp.spmatrix
    B: sp.spmatrix
    F: np.ndarray

    def __post_init__(self):
        nV = self.A.shape[0]
        if self.A.shape != (nV, nV):
            raise ValueError("A must be square")
        if self.B.shape[0] != nV:
            raise ValueError("B must have as many rows as A")
        if np.shape(self.F) != (nV,):
            raise ValueError("F must match the rows of A")

    @property
    def block_matrix(self) -> sp.csc_matrix:
        return sp.bmat([[self.A, self.B], [self.B.T, None]], format="csc")


def solve_saddle(system: SaddleSystem) -> tuple[np.ndarray, np.ndarray]:
    """One sparse factorisation of the full indefinite block matrix."""
    nV, nU = system.B.shape
    if nU == 0:
        return lu_solve(system.A, system.F), np.zeros(0)
    K = system.block_matrix
    rhs = np.concatenate([np.asarray(system.F, dtype=float), np.zeros(nU)])
    try:
        x = lu_solve(K, rhs)
    except SingularSystemError as exc:
        block = _deficient_block(system)
        raise SingularSystemError(
            f"singular saddle system, deficient block {block}: {exc}",
            pivot=exc.pivot, block=block) from exc
    return x[:nV], x[nV:]


def _deficient_block(system: SaddleSystem) -> str:
    try:
        _factor(system.A)
    except SingularSystemError:
        return "A"
    return "B"
