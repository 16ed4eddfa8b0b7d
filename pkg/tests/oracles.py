"""Independent reference computations used by the tests.

Nothing here imports the package under test.
"""
from math import factorial

import numpy as np


def gauss_solve(M, rhs):
    """Dense Gaussian elimination with partial pivoting, written out by hand."""
    a = np.array(M, dtype=float)
    b = np.array(rhs, dtype=float)
    n = a.shape[0]
    for k in range(n):
        piv = k + int(np.argmax(np.abs(a[k:, k])))
        if a[piv, k] == 0.0:
            raise ZeroDivisionError("singular")
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            b[[k, piv]] = b[[piv, k]]
        for i in range(k + 1, n):
            m = a[i, k] / a[k, k]
            a[i, k:] -= m * a[k, k:]
            b[i] -= m * b[k]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - a[i, i + 1:] @ x[i + 1:]) / a[i, i]
    return x


def block_saddle_solve(A, B, F):
    """Schur-complement elimination of [[A, B], [B^T, 0]] [x; y] = [F; 0]."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    AinvB = np.column_stack([gauss_solve(A, B[:, j]) for j in range(B.shape[1])])
    AinvF = gauss_solve(A, F)
    S = B.T @ AinvB
    y = gauss_solve(S, B.T @ AinvF)
    x = AinvF - AinvB @ y
    return x, y


def kappa_scalar(t, lo, hi, q):
    """Relaxed integrand evaluated branch by branch for one scalar."""
    if lo > 0 and t <= lo:
        return 0.5 * lo ** (q - 2) * t * t + (1 / q - 0.5) * lo ** q
    if hi < np.inf and t >= hi:
        return 0.5 * hi ** (q - 2) * t * t + (1 / q - 0.5) * hi ** q
    return t ** q / q


def triangle_monomial(a, b):
    """Integral of x^a y^b over the unit reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)
