"""Proper orthogonal decomposition of snapshot matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, DataError, DimensionError
from .numkit import as_matrix, svd


@dataclass
class SnapshotSet:
    """Training parameters and the matching high-fidelity solutions.

    Attributes
    ----------
    parameters : ndarray, shape (m,) or (m, p)
    snapshots : ndarray, shape (n, m)
        Column ``j`` is the solution for ``parameters[j]``.
    """

    parameters: np.ndarray
    snapshots: np.ndarray

    def __post_init__(self):
        self.parameters = np.asarray(self.parameters, dtype=np.float64)
        if self.parameters.ndim == 0:
            self.parameters = self.parameters.reshape(1)
        self.snapshots = as_matrix(self.snapshots, "snapshots")
        m = self.snapshots.shape[1]
        if self.parameters.shape[0] != m:
            raise DimensionError(f"{self.parameters.shape[0]} parameters for {m} snapshots")
        if not np.all(np.isfinite(self.parameters)):
            raise DataError("parameters contain NaN or Inf")
        keys = self.parameters.reshape(m, -1)
        if np.unique(keys, axis=0).shape[0] != m:
            raise DataError("parameters must be pairwise distinct")

    @property
    def n(self) -> int:
        return self.snapshots.shape[0]

    @property
    def m(self) -> int:
        return self.snapshots.shape[1]


@dataclass
class PodBasis:
    """Leading ``r`` left singular vectors of the snapshot matrix."""

    u_r: np.ndarray
    sigma: np.ndarray

    @property
    def r(self) -> int:
        return self.u_r.shape[1]

    @property
    def n(self) -> int:
        return self.u_r.shape[0]

    def project(self, v):
        return project(self, v)

    def lift(self, coeffs):
        return lift(self, coeffs)

    def truncate(self, r: int) -> "PodBasis":
        if not 1 <= r <= self.r:
            raise ConfigurationError(f"rank {r} outside [1, {self.r}]")
        return PodBasis(self.u_r[:, :r].copy(), self.sigma)

    def to_dict(self) -> dict:
        return {"n": self.n, "r": self.r, "u_r": self.u_r.tolist(), "sigma": self.sigma.tolist()}

    @classmethod
    def from_dict(cls, d) -> "PodBasis":
        u = np.array(d["u_r"], dtype=np.float64).reshape(d["n"], d["r"])
        return cls(u, np.array(d["sigma"], dtype=np.float64))


def _fix_signs(u):
    # largest-magnitude entry of every column made nonnegative
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.where(u[idx, np.arange(u.shape[1])] < 0, -1.0, 1.0)
    return u * signs


def compute_pod(s, rank: int | None = None, energy_tol: float | None = None) -> PodBasis:
    """POD basis of a snapshot set (or a raw ``n x m`` matrix).

    Exactly one of ``rank`` and ``energy_tol`` may be given; with neither,
    the full rank ``min(n, m)`` is kept. With ``energy_tol``, ``r`` is the
    smallest value with ``sum(sigma[:r]**2) / sum(sigma**2) >= 1 - energy_tol``.
    Snapshots are not mean-centered.
    """
    mat = s.snapshots if isinstance(s, SnapshotSet) else as_matrix(s, "snapshots")
    n, m = mat.shape
    if rank is not None and energy_tol is not None:
        raise ConfigurationError("give either rank or energy_tol, not both")
    u, sigma, _ = svd(mat)
    kmax = min(n, m)
    if rank is not None:
        if not 1 <= rank <= kmax:
            raise ConfigurationError(f"rank {rank} outside [1, {kmax}]")
        r = int(rank)
    elif energy_tol is not None:
        if not 0 <= energy_tol < 1:
            raise ConfigurationError("energy_tol must lie in [0, 1)")
        energy = np.cumsum(sigma**2)
        total = energy[-1]
        if total == 0.0:
            r = 1
        else:
            r = int(np.searchsorted(energy / total, 1.0 - energy_tol - 1e-15) + 1)
            r = min(r, kmax)
    else:
        r = kmax
    return PodBasis(_fix_signs(u[:, :r]), sigma)


def project(basis: PodBasis, v) -> np.ndarray:
    """Reduced coordinates ``U_r^T v``; ``v`` may hold snapshots as columns."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != basis.n:
        raise DimensionError(f"vector of length {v.shape[0]} for basis with n={basis.n}")
    return basis.u_r.T @ v


def lift(basis: PodBasis, coeffs) -> np.ndarray:
    """Full-order vector ``U_r c``."""
    c = np.asarray(coeffs, dtype=np.float64)
    if c.shape[0] != basis.r:
        raise DimensionError(f"coefficients of length {c.shape[0]} for basis with r={basis.r}")
    return basis.u_r @ c
