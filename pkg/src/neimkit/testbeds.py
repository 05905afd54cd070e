"""Finite-difference benchmark problems on [-1, 1].

exp1: a Poisson problem whose right-hand side is an oscillating,
parameterized forcing. The nonlinearity handed to the hyper-reduction
methods is the forcing itself and does not depend on the state.

exp2: a semilinear problem ``h^-2 A v = s(x, v; mu)`` with
``s = (1 - |x|) exp(-(1 + x) v mu)``, solved by Newton's method.

Both use ``n = 100`` equispaced points, ``h^-2 = 30``, homogeneous
Dirichlet values and parameters in ``[1, pi]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConvergenceError, DataError, SingularMatrixError
from .numkit import solve_linear, solve_tridiagonal
from .pod import PodBasis, SnapshotSet

PARAM_DOMAIN = (1.0, np.pi)
DEFAULT_N = 100
DEFAULT_H_INV_SQ = 30.0
DEFAULT_M = 51
DEFAULT_M_TEST = 500


@dataclass(frozen=True)
class Grid1D:
    n: int = DEFAULT_N
    h_inv_sq: float = DEFAULT_H_INV_SQ

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.n)


def equispaced_params(m: int, domain=PARAM_DOMAIN) -> np.ndarray:
    return np.linspace(domain[0], domain[1], m)


def exp1_forcing(x, mu):
    """``(1 - x) cos(3 pi mu (x + 1)) exp(-(1 + x) mu)``."""
    x = np.asarray(x, dtype=np.float64)
    return (1.0 - x) * np.cos(3.0 * np.pi * mu * (x + 1.0)) * np.exp(-(1.0 + x) * mu)


def exp2_nonlinearity(x, v, mu):
    """``(1 - |x|) exp(-(1 + x) v mu)``."""
    x = np.asarray(x, dtype=np.float64)
    return (1.0 - np.abs(x)) * np.exp(-(1.0 + x) * v * mu)


def exp2_nonlinearity_dv(x, v, mu):
    """Derivative of :func:`exp2_nonlinearity` with respect to ``v``."""
    x = np.asarray(x, dtype=np.float64)
    return -(1.0 + x) * mu * exp2_nonlinearity(x, v, mu)


def _padded_tridiagonal(grid: Grid1D):
    # h^-2 * A_tilde: second differences on interior rows, identity rows at
    # the two boundary points, no coupling from interior rows to boundary values
    n = grid.n
    c = grid.h_inv_sq
    diag = np.full(n, 2.0 * c)
    diag[0] = diag[-1] = c
    lower = np.full(n - 1, -c)
    upper = np.full(n - 1, -c)
    upper[0] = lower[0] = 0.0
    upper[-1] = lower[-1] = 0.0
    return diag, lower, upper


def padded_operator(grid: Grid1D) -> np.ndarray:
    """Dense ``h^-2 A_tilde`` (boundary rows are ``h^-2`` times identity rows)."""
    diag, lower, upper = _padded_tridiagonal(grid)
    return np.diag(diag) + np.diag(lower, -1) + np.diag(upper, 1)


def apply_padded_operator(grid: Grid1D, v) -> np.ndarray:
    diag, lower, upper = _padded_tridiagonal(grid)
    out = diag * v
    out[1:] += lower * v[:-1]
    out[:-1] += upper * v[1:]
    return out


def exp1_solve(mu, grid: Grid1D = Grid1D(), forcing=None) -> np.ndarray:
    """Solve ``h^-2 A v[1:-1] = f[1:-1]`` with ``v[0] = v[-1] = 0``."""
    f = exp1_forcing(grid.x, mu) if forcing is None else np.asarray(forcing, dtype=np.float64)
    n = grid.n
    v = np.zeros(n)
    if n <= 2:
        return v
    c = grid.h_inv_sq
    v[1:-1] = solve_tridiagonal(np.full(n - 2, 2.0 * c), -c, -c, f[1:-1])
    return v


def exp1_residual(v, mu, grid: Grid1D = Grid1D()) -> float:
    """``|h^-2 A v[1:-1] - f[1:-1]|_2``."""
    c = grid.h_inv_sq
    inner = c * (2.0 * v[1:-1] - v[:-2] - v[2:])
    return float(np.linalg.norm(inner - exp1_forcing(grid.x, mu)[1:-1]))


def exp2_residual(v, mu, grid: Grid1D = Grid1D()) -> np.ndarray:
    """``F(v) = h^-2 A_tilde v - s(x, v; mu)``."""
    return apply_padded_operator(grid, v) - exp2_nonlinearity(grid.x, v, mu)


def exp2_newton(mu, grid: Grid1D = Grid1D(), tol: float = 1e-10, max_iter: int = 50):
    """Newton iteration from ``v = 0``.

    Returns ``(v, history)`` where ``history`` lists ``|F|_inf`` at each
    iterate, including the initial guess and the converged one.
    """
    x = grid.x
    diag, lower, upper = _padded_tridiagonal(grid)
    v = np.zeros(grid.n)
    history = []
    for _ in range(max_iter + 1):
        res = exp2_residual(v, mu, grid)
        nrm = float(np.max(np.abs(res)))
        history.append(nrm)
        if nrm <= tol:
            v[0] = v[-1] = 0.0
            return v, history
        if len(history) > max_iter:
            break
        jd = diag - exp2_nonlinearity_dv(x, v, mu)
        v = v - solve_tridiagonal(jd, lower, upper, res)
    raise ConvergenceError(f"exp2 Newton did not converge for mu={mu}: final |F|_inf = {history[-1]:.3e}")


def exp2_solve(mu, grid: Grid1D = Grid1D(), tol: float = 1e-10, max_iter: int = 50) -> np.ndarray:
    return exp2_newton(mu, grid, tol, max_iter)[0]


def avg_abs_error(approx, exact, test_params) -> float:
    """Mean over ``test_params`` of ``|approx(mu) - exact(mu)|_2``."""
    test_params = list(test_params)
    if not test_params:
        raise DataError("empty test parameter set")
    return float(np.mean([np.linalg.norm(np.asarray(approx(mu)) - np.asarray(exact(mu))) for mu in test_params]))


# ---------------------------------------------------------------------------
# problem objects used by the harness


@dataclass(frozen=True)
class Exp1Problem:
    grid: Grid1D = field(default_factory=Grid1D)
    domain: tuple = PARAM_DOMAIN
    m: int = DEFAULT_M
    name: str = "exp1"

    def training_params(self) -> np.ndarray:
        return equispaced_params(self.m, self.domain)

    def test_params(self, m_test: int = DEFAULT_M_TEST) -> np.ndarray:
        return equispaced_params(m_test, self.domain)

    def solve(self, mu) -> np.ndarray:
        return exp1_solve(mu, self.grid)

    def nonlinearity(self, v, mu) -> np.ndarray:
        return exp1_forcing(self.grid.x, mu)

    def nl_rows(self, row, value, mu) -> float:
        return float(exp1_forcing(self.grid.x[row], mu))

    def snapshots(self, params=None) -> SnapshotSet:
        params = self.training_params() if params is None else np.asarray(params)
        return SnapshotSet(params, np.column_stack([self.solve(mu) for mu in params]))


@dataclass(frozen=True)
class Exp2Problem(Exp1Problem):
    name: str = "exp2"

    def solve(self, mu) -> np.ndarray:
        return exp2_solve(mu, self.grid)

    def nonlinearity(self, v, mu) -> np.ndarray:
        return exp2_nonlinearity(self.grid.x, v, mu)

    def nl_rows(self, row, value, mu) -> float:
        return float(exp2_nonlinearity(self.grid.x[row], value, mu))


def make_problem(experiment: str, n: int = DEFAULT_N, m: int = DEFAULT_M, h_inv_sq: float = DEFAULT_H_INV_SQ):
    grid = Grid1D(n, h_inv_sq)
    if experiment == "exp1":
        return Exp1Problem(grid=grid, m=m)
    if experiment == "exp2":
        return Exp2Problem(grid=grid, m=m)
    raise ValueError(f"unknown experiment {experiment!r}")


def rom_solve_exp2(
    surrogate,
    basis: PodBasis,
    mu,
    snapshots: SnapshotSet,
    grid: Grid1D = Grid1D(),
    tol: float = 1e-8,
    max_iter: int = 100,
    fd_step: float = 1e-6,
):
    """Newton solve of ``A_r v_r - N_hat(v_r; mu) = 0`` with ``A_r = U_r^T (h^-2 A_tilde) U_r``.

    ``surrogate(v_r, mu)`` returns the reduced nonlinearity (a
    :class:`~neimkit.neim.NeimModel` works directly). Its Jacobian is taken
    by forward differences. The initial guess projects the training
    snapshot whose parameter is closest to ``mu``.

    Returns ``(v_r, history)`` with ``|R|_inf`` per iterate.
    """
    u = basis.u_r
    a_r = u.T @ padded_operator(grid) @ u
    params = np.asarray(snapshots.parameters, dtype=np.float64).reshape(snapshots.m, -1)
    nearest = int(np.argmin(np.sum((params - np.asarray(mu, dtype=np.float64).reshape(1, -1)) ** 2, axis=1)))
    vr = u.T @ snapshots.snapshots[:, nearest]
    history = []
    r = basis.r
    for _ in range(max_iter + 1):
        nl = np.asarray(surrogate(vr, mu), dtype=np.float64)
        res = a_r @ vr - nl
        nrm = float(np.max(np.abs(res)))
        history.append(nrm)
        if nrm <= tol:
            return vr, history
        if len(history) > max_iter:
            break
        jac = np.empty((r, r))
        for k in range(r):
            pert = vr.copy()
            pert[k] += fd_step
            jac[:, k] = (np.asarray(surrogate(pert, mu)) - nl) / fd_step
        try:
            vr = vr - solve_linear(a_r - jac, res)
        except SingularMatrixError as exc:
            raise ConvergenceError(f"singular reduced Jacobian; residual history {history}") from exc
    raise ConvergenceError(f"reduced Newton did not converge for mu={mu}; residual history {history}")
