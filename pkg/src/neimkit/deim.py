"""Discrete empirical interpolation of the reduced nonlinearity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, DegeneracyError, DimensionError, SingularMatrixError
from .numkit import EPS, as_matrix, solve_linear, svd
from .pod import PodBasis


@dataclass
class DeimModel:
    """Greedy interpolation indices with the precomputed oblique projector.

    Attributes
    ----------
    v_k : ndarray, shape (n, k)
        Leading left singular vectors of the nonlinear snapshot matrix.
    indices : ndarray of int, shape (k,)
        Interpolation rows in greedy order.
    projector : ndarray, shape (r, k)
        ``U_r^T V_k (P^T V_k)^{-1}``.
    selected_rows_of_u : ndarray, shape (k, r)
        ``P^T U_r``.
    sigma : ndarray
        Singular values of the nonlinear snapshot matrix.
    """

    v_k: np.ndarray
    indices: np.ndarray
    projector: np.ndarray
    selected_rows_of_u: np.ndarray
    sigma: np.ndarray

    @property
    def k(self) -> int:
        return int(self.indices.size)

    def truncate(self, k: int, basis: PodBasis) -> "DeimModel":
        """The model with only the first ``k`` modes (greedy indices are nested)."""
        if not 1 <= k <= self.k:
            raise ConfigurationError(f"cannot truncate a {self.k}-mode DEIM model to {k}")
        v_k = self.v_k[:, :k]
        idx = self.indices[:k]
        return DeimModel(v_k, idx, _projector(basis, v_k, idx), basis.u_r[idx].copy(), self.sigma)

    def approximate(self, nonlinear_values) -> np.ndarray:
        """Full-order DEIM approximation ``V_k (P^T V_k)^{-1} P^T N`` of a dense vector."""
        nl = np.asarray(nonlinear_values, dtype=np.float64)
        c = solve_linear(self.v_k[self.indices], nl[self.indices])
        return self.v_k @ c

    def residual_at_indices(self, nonlinear_values) -> np.ndarray:
        """``P^T (N - V_k (P^T V_k)^{-1} P^T N)``; zero up to rounding."""
        nl = np.asarray(nonlinear_values, dtype=np.float64)
        return nl[self.indices] - self.approximate(nl)[self.indices]

    def to_dict(self) -> dict:
        return {
            "v_k": self.v_k.tolist(),
            "indices": self.indices.tolist(),
            "projector": self.projector.tolist(),
            "selected_rows_of_u": self.selected_rows_of_u.tolist(),
            "sigma": self.sigma.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "DeimModel":
        k = len(d["indices"])
        return cls(
            np.array(d["v_k"], dtype=np.float64).reshape(-1, k),
            np.array(d["indices"], dtype=np.int64),
            np.array(d["projector"], dtype=np.float64).reshape(-1, k),
            np.array(d["selected_rows_of_u"], dtype=np.float64).reshape(k, -1),
            np.array(d["sigma"], dtype=np.float64),
        )


def _projector(basis, v_k, idx):
    # U^T V (P^T V)^{-1} = ((P^T V)^{-T} V^T U)^T
    pv = v_k[idx]
    return solve_linear(pv.T, (basis.u_r.T @ v_k).T).T


def deim_select(nonlinear_snapshots, k: int, basis: PodBasis, independence_tol: float | None = None) -> DeimModel:
    """Select ``k`` DEIM interpolation indices.

    Parameters
    ----------
    nonlinear_snapshots : array_like, shape (n, m) or sequence of m vectors
        Columns ``N(v(mu_i); mu_i)``.
    k : int
        Number of modes, ``1 <= k <= min(n, m)``.
    basis : PodBasis
        Solution basis used to build the reduced projector.
    independence_tol : float, optional
        Reject when ``sigma_k <= independence_tol * sigma_1``. Defaults to
        ``max(n, m) * eps``.
    """
    if isinstance(nonlinear_snapshots, (list, tuple)):
        mat = as_matrix(np.column_stack(nonlinear_snapshots), "nonlinear snapshots")
    else:
        mat = as_matrix(nonlinear_snapshots, "nonlinear snapshots")
    n, m = mat.shape
    if basis.n != n:
        raise DimensionError(f"snapshots have n={n} but basis has n={basis.n}")
    if not 1 <= k <= min(n, m):
        raise ConfigurationError(f"k={k} outside [1, {min(n, m)}]")
    if independence_tol is None:
        independence_tol = max(n, m) * EPS
    u, sigma, _ = svd(mat)
    if sigma[0] == 0.0 or sigma[k - 1] <= independence_tol * sigma[0]:
        raise DegeneracyError(
            f"nonlinear snapshots are not linearly independent to tolerance for k={k} "
            f"(sigma_k/sigma_1 = {sigma[k - 1] / sigma[0] if sigma[0] else 0.0:.3e})",
            step=k,
        )
    v_k = u[:, :k]
    idx = [int(np.argmax(np.abs(v_k[:, 0])))]
    for ell in range(1, k):
        try:
            c = solve_linear(v_k[idx, :ell], v_k[idx, ell])
        except SingularMatrixError as exc:
            raise DegeneracyError(f"P^T V_k is singular at DEIM step {ell + 1}", step=ell + 1) from exc
        resid = v_k[:, ell] - v_k[:, :ell] @ c
        idx.append(int(np.argmax(np.abs(resid))))
    idx = np.array(idx, dtype=np.int64)
    if np.unique(idx).size != k:
        raise DegeneracyError("DEIM selected a repeated index", step=k)
    try:
        proj = _projector(basis, v_k, idx)
    except SingularMatrixError as exc:
        raise DegeneracyError(f"P^T V_k is singular for k={k}", step=k) from exc
    return DeimModel(v_k.copy(), idx, proj, basis.u_r[idx].copy(), sigma)


def deim_eval(model: DeimModel, basis: PodBasis, nl_rows, reduced_state, mu) -> np.ndarray:
    """Hyper-reduced ``U_r^T N(U_r v; mu)``.

    ``nl_rows(row, value, mu)`` evaluates the componentwise nonlinearity at
    one row; it is called exactly ``k`` times. Only ``k`` rows of ``U_r``
    are touched.
    """
    vr = np.asarray(reduced_state, dtype=np.float64)
    if vr.shape != (basis.r,) or model.selected_rows_of_u.shape[1] != basis.r:
        raise DimensionError(f"reduced state of shape {vr.shape} for r={basis.r}")
    values = model.selected_rows_of_u @ vr
    sampled = np.array([nl_rows(int(p), float(val), mu) for p, val in zip(model.indices, values)])
    return model.projector @ sampled
