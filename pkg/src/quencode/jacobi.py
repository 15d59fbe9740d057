"""Cyclic Jacobi eigendecomposition for real symmetric matrices."""

from __future__ import annotations

from typing import Tuple

import numba
import numpy as np

from .errors import DataError


@numba.njit(cache=True)
def _cyclic_sweeps(a, vt, tol, max_sweeps):
    n = a.shape[0]
    rp = np.empty(n)
    rq = np.empty(n)
    norm = np.sqrt(np.sum(a * a))
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += a[i, j] * a[i, j]
        if np.sqrt(2.0 * off) <= tol * norm:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    sign = 1.0 if theta >= 0.0 else -1.0
                    t = sign / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                app = a[p, p]
                aqq = a[q, q]
                # rows p and q are contiguous; symmetry fills the columns
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    rp[k] = c * apk - s * aqk
                    rq[k] = s * apk + c * aqk
                for k in range(n):
                    a[p, k] = rp[k]
                    a[q, k] = rq[k]
                    a[k, p] = rp[k]
                    a[k, q] = rq[k]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vpk = vt[p, k]
                    vqk = vt[q, k]
                    vt[p, k] = c * vpk - s * vqk
                    vt[q, k] = s * vpk + c * vqk
    return -1


def jacobi_eigh(matrix, tol: float = 1e-10, max_sweeps: int = 100) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and eigenvectors (columns) of a symmetric matrix.

    Sweeps rotate every off-diagonal pair in row order until the
    off-diagonal Frobenius norm is at most ``tol`` times the matrix norm.
    """
    a = np.array(matrix, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DataError("matrix has non-finite entries")
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(a), initial=0.0)):
        raise DataError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    v = np.eye(a.shape[0])
    if a.shape[0] > 1 and _cyclic_sweeps(a, v, tol, max_sweeps) < 0:
        raise DataError(f"Jacobi did not converge in {max_sweeps} sweeps")
    v = v.T
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]
