"""Dense numerical kernels.

Matrices are plain C-ordered (row-major) ``float64`` numpy arrays. Every
routine here is a pure function of its inputs.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .exceptions import ConvergenceError, DataError, DimensionError, SingularMatrixError

EPS = np.finfo(np.float64).eps

__all__ = [
    "SvdResult",
    "as_matrix",
    "svd",
    "solve_linear",
    "lstsq_svd",
    "solve_tridiagonal",
]


def as_matrix(m, name="matrix") -> np.ndarray:
    """Return ``m`` as a finite, C-contiguous 2-D float64 array."""
    a = np.ascontiguousarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if a.size == 0:
        raise DataError(f"{name} is empty")
    if not np.all(np.isfinite(a)):
        raise DataError(f"{name} contains NaN or Inf")
    return a


class SvdResult(NamedTuple):
    """Thin SVD ``m = u @ diag(sigma) @ vt``.

    ``u`` is ``rows x k`` with orthonormal columns, ``sigma`` has length
    ``k = min(rows, cols)`` and is sorted nonincreasing, ``vt`` is ``k x cols``.
    """

    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray


def _complete_columns(u, missing):
    """Fill the columns of ``u`` listed in ``missing`` with unit vectors
    orthogonal to all other columns (deterministic, canonical-basis seeded)."""
    n = u.shape[0]
    have = [j for j in range(u.shape[1]) if j not in set(missing)]
    basis = [u[:, j] for j in have]
    candidate = 0
    for j in missing:
        while True:
            if candidate >= n:
                raise ConvergenceError("cannot complete orthonormal basis")
            w = np.zeros(n)
            w[candidate] = 1.0
            candidate += 1
            for _ in range(2):
                for q in basis:
                    w -= (q @ w) * q
            nrm = np.linalg.norm(w)
            if nrm > 0.5:
                break
        w /= nrm
        u[:, j] = w
        basis.append(w)


def svd(m, max_sweeps: int = 80) -> SvdResult:
    """Thin singular value decomposition by one-sided (Hestenes) Jacobi.

    Column pairs are rotated until every pair is orthogonal relative to
    its norms, ``|a_i . a_j| <= tol * |a_i| |a_j|`` with
    ``tol = max(rows, 1) * eps``. Columns whose norm falls below
    ``sqrt(rows) * eps * |a|_F`` are pure rounding noise; they are skipped
    and reported as zero singular values. Wide matrices are handled
    through the transpose.

    Parameters
    ----------
    m : array_like, shape (rows, cols)
        Finite input matrix.
    max_sweeps : int
        Sweep limit; exceeding it raises :class:`ConvergenceError`.

    Returns
    -------
    SvdResult
    """
    a = as_matrix(m)
    rows, cols = a.shape
    if rows < cols:
        t = svd(a.T, max_sweeps=max_sweeps)
        return SvdResult(np.ascontiguousarray(t.vt.T), t.sigma, np.ascontiguousarray(t.u.T))

    # rows of w are the columns of a, kept contiguous for the rotations
    w = a.T.copy()
    v = np.eye(cols)
    tol = max(rows, 1) * EPS
    norms = np.einsum("ij,ij->i", w, w)
    negligible = rows * (EPS * EPS) * float(np.sum(norms))
    for _ in range(max_sweeps):
        rotated = False
        for i in range(cols - 1):
            for j in range(i + 1, cols):
                alpha = norms[i]
                beta = norms[j]
                if alpha <= negligible or beta <= negligible:
                    continue
                gamma = w[i] @ w[j]
                if abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                sgn = 1.0 if zeta >= 0.0 else -1.0
                t = sgn / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                wi = w[i].copy()
                w[i] = c * wi - s * w[j]
                w[j] = s * wi + c * w[j]
                vi = v[:, i].copy()
                v[:, i] = c * vi - s * v[:, j]
                v[:, j] = s * vi + c * v[:, j]
                norms[i] = w[i] @ w[i]
                norms[j] = w[j] @ w[j]
        if not rotated:
            break
    else:
        raise ConvergenceError(f"one-sided Jacobi SVD did not converge in {max_sweeps} sweeps")

    norms = np.einsum("ij,ij->i", w, w)
    w[norms <= negligible] = 0.0
    sigma = np.sqrt(np.where(norms <= negligible, 0.0, norms))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    w = w[order]
    v = v[:, order]
    u = np.zeros((rows, cols))
    missing = []
    for j in range(cols):
        if sigma[j] > 0.0:
            u[:, j] = w[j] / sigma[j]
        else:
            missing.append(j)
    if missing:
        _complete_columns(u, missing)
    return SvdResult(u, sigma, np.ascontiguousarray(v.T))


def solve_linear(a, b) -> np.ndarray:
    """Solve ``a x = b`` by Gaussian elimination with partial pivoting.

    ``b`` may be a vector or a matrix of right-hand sides. Raises
    :class:`SingularMatrixError` when a pivot falls below
    ``1e-14 * ||a||_inf``.
    """
    a = as_matrix(a, "a").copy()
    n = a.shape[0]
    if a.shape[1] != n:
        raise DimensionError(f"a must be square, got {a.shape}")
    b = np.array(b, dtype=np.float64)
    if b.shape[0] != n or b.ndim > 2:
        raise DimensionError(f"b has shape {b.shape}, expected leading dimension {n}")
    vector = b.ndim == 1
    if vector:
        b = b[:, None]
    scale = np.max(np.sum(np.abs(a), axis=1))
    threshold = 1e-14 * scale
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        pivot = a[p, k]
        if scale == 0.0 or abs(pivot) < threshold:
            raise SingularMatrixError(f"matrix is singular to tolerance (pivot {pivot:.3e} at column {k})")
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
        if k + 1 < n:
            f = a[k + 1 :, k] / pivot
            a[k + 1 :, k:] -= np.outer(f, a[k, k:])
            b[k + 1 :] -= np.outer(f, b[k])
    x = np.empty_like(b)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1 :] @ x[k + 1 :]) / a[k, k]
    return x[:, 0] if vector else x


def lstsq_svd(a, b, cutoff: float = 1e-12) -> np.ndarray:
    """Minimum-norm least-squares solution of ``a x ~= b``.

    Singular values at or below ``cutoff * sigma_max`` are discarded.
    """
    a = as_matrix(a, "a")
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != a.shape[0]:
        raise DimensionError(f"b has length {b.shape[0]}, expected {a.shape[0]}")
    u, sigma, vt = svd(a)
    if sigma.size == 0 or sigma[0] == 0.0:
        return np.zeros((a.shape[1],) + b.shape[1:])
    keep = sigma > cutoff * sigma[0]
    coeffs = (u[:, keep].T @ b) / (sigma[keep] if b.ndim == 1 else sigma[keep, None])
    return vt[keep].T @ coeffs


def solve_tridiagonal(diag, lower, upper, b) -> np.ndarray:
    """Thomas algorithm for a tridiagonal system.

    ``lower[i]`` multiplies ``x[i]`` in row ``i + 1`` and ``upper[i]``
    multiplies ``x[i + 1]`` in row ``i``. Scalars are broadcast to length
    ``n - 1``.
    """
    d = np.array(diag, dtype=np.float64, ndmin=1)
    n = d.size
    lo = np.broadcast_to(np.asarray(lower, dtype=np.float64), (max(n - 1, 0),))
    up = np.broadcast_to(np.asarray(upper, dtype=np.float64), (max(n - 1, 0),))
    rhs = np.array(b, dtype=np.float64, ndmin=1)
    if rhs.shape != (n,):
        raise DimensionError(f"b has shape {rhs.shape}, expected ({n},)")
    scale = np.max(np.abs(d) + np.concatenate([[0.0], np.abs(lo)]) + np.concatenate([np.abs(up), [0.0]]))
    threshold = 1e-14 * scale
    c = np.empty(max(n - 1, 0))
    y = np.empty(n)
    pivot = d[0]
    if scale == 0.0 or abs(pivot) <= threshold:
        raise SingularMatrixError("zero pivot in tridiagonal solve at row 0")
    if n > 1:
        c[0] = up[0] / pivot
    y[0] = rhs[0] / pivot
    for i in range(1, n):
        pivot = d[i] - lo[i - 1] * c[i - 1]
        if abs(pivot) <= threshold:
            raise SingularMatrixError(f"zero pivot in tridiagonal solve at row {i}")
        if i < n - 1:
            c[i] = up[i] / pivot
        y[i] = (rhs[i] - lo[i - 1] * y[i - 1]) / pivot
    for i in range(n - 2, -1, -1):
        y[i] -= c[i] * y[i + 1]
    return y
