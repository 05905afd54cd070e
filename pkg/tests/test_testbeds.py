import numpy as np
import pytest

from neimkit.exceptions import ConvergenceError, DataError
from neimkit.pod import PodBasis, SnapshotSet, compute_pod
from neimkit.testbeds import (
    DEFAULT_M,
    DEFAULT_M_TEST,
    Grid1D,
    avg_abs_error,
    exp1_forcing,
    exp1_residual,
    exp1_solve,
    exp2_newton,
    exp2_nonlinearity,
    exp2_nonlinearity_dv,
    exp2_residual,
    exp2_solve,
    make_problem,
    padded_operator,
    rom_solve_exp2,
)

GRID = Grid1D()


def test_grid():
    x = GRID.x
    assert GRID.n == 100 and GRID.h_inv_sq == 30.0
    assert x[0] == -1.0 and x[-1] == 1.0
    np.testing.assert_allclose(np.diff(x), 2.0 / 99, rtol=1e-12)


def test_problem_parameters():
    p = make_problem("exp1")
    mus = p.training_params()
    assert mus.size == DEFAULT_M == 51
    assert mus[0] == 1.0 and mus[-1] == np.pi
    np.testing.assert_allclose(np.diff(mus), (np.pi - 1) / 50, rtol=1e-12)
    assert p.test_params().size == DEFAULT_M_TEST == 500
    with pytest.raises(ValueError):
        make_problem("exp3")


def test_exp1_forcing_values():
    assert exp1_forcing(-1.0, 2.3) == 2.0
    assert exp1_forcing(1.0, 1.7) == 0.0
    assert exp1_forcing(0.0, 1.0) == pytest.approx(-np.exp(-1.0), abs=1e-15)


def test_exp1_solve():
    np.testing.assert_array_equal(exp1_solve(1.5, GRID, forcing=np.zeros(100)), 0.0)
    for mu in make_problem("exp1").training_params():
        v = exp1_solve(mu)
        assert v[0] == 0.0 and v[-1] == 0.0
        assert exp1_residual(v, mu) <= 1e-10
    # dense oracle
    n = GRID.n
    a = 30.0 * (2 * np.eye(n - 2) - np.eye(n - 2, k=1) - np.eye(n - 2, k=-1))
    np.testing.assert_allclose(exp1_solve(2.0)[1:-1], np.linalg.solve(a, exp1_forcing(GRID.x, 2.0)[1:-1]), atol=1e-12)


def test_exp2_nonlinearity_values(rng):
    assert exp2_nonlinearity(1.0, 0.7, 2.0) == 0.0
    assert exp2_nonlinearity(-1.0, 0.7, 2.0) == 0.0
    assert exp2_nonlinearity(0.0, 0.0, 2.0) == 1.0
    x = rng.uniform(-1, 1, 100)
    v = rng.uniform(-2, 2, 100)
    mu = rng.uniform(1, np.pi, 100)
    h = 1e-6
    fd = (exp2_nonlinearity(x, v + h, mu) - exp2_nonlinearity(x, v - h, mu)) / (2 * h)
    np.testing.assert_allclose(exp2_nonlinearity_dv(x, v, mu), fd, atol=1e-7)


def test_padded_operator_structure():
    a = padded_operator(GRID)
    assert a[0, 0] == 30.0 and a[-1, -1] == 30.0
    assert a[0, 1] == 0.0 and a[1, 0] == 0.0 and a[-2, -1] == 0.0
    assert a[5, 4] == -30.0 and a[5, 5] == 60.0 and a[5, 6] == -30.0


def test_exp2_solve_converges_quadratically():
    for mu in make_problem("exp2").training_params():
        v, hist = exp2_newton(mu)
        assert v[0] == 0.0 and v[-1] == 0.0
        assert np.max(np.abs(exp2_residual(v, mu))) <= 1e-10
        assert hist[-1] <= 1e-10
        # quadratic tail, measured on the iterates above the rounding floor
        # (|F| ~ 1e-14 for this operator): last ratio <= 10 * previous ratio^2
        tail = [h for h in hist if h > 1e-12]
        assert len(tail) >= 3
        r1 = tail[-2] / tail[-3]
        r2 = tail[-1] / tail[-2]
        assert r2 <= 10 * r1**2


def test_exp2_deterministic():
    np.testing.assert_array_equal(exp2_solve(2.2), exp2_solve(2.2))


def test_exp2_nonconvergence():
    with pytest.raises(ConvergenceError, match="final"):
        exp2_newton(2.0, max_iter=1)


def test_avg_abs_error():
    mus = np.linspace(1, 2, 4)
    assert avg_abs_error(lambda mu: np.ones(3) * mu, lambda mu: np.ones(3) * mu, mus) == 0.0
    delta = np.array([0.0, 0.3, 0.0])
    assert avg_abs_error(lambda mu: np.ones(3) + delta, lambda mu: np.ones(3), mus) == pytest.approx(0.3, abs=1e-15)
    with pytest.raises(DataError):
        avg_abs_error(lambda mu: 0, lambda mu: 0, [])


def test_problem_objects_consistent():
    for name in ("exp1", "exp2"):
        p = make_problem(name, m=5)
        s = p.snapshots()
        assert s.snapshots.shape == (100, 5)
        v = s.snapshots[:, 2]
        mu = s.parameters[2]
        dense = p.nonlinearity(v, mu)
        rows = [p.nl_rows(i, v[i], mu) for i in range(100)]
        np.testing.assert_allclose(rows, dense, rtol=0, atol=1e-15)


def _exp2_setup(r):
    p = make_problem("exp2")
    s = p.snapshots()
    return p, s, compute_pod(s, rank=r)


def test_rom_with_exact_surrogate_matches_full_order():
    p, s, basis = _exp2_setup(10)
    u = basis.u_r
    surrogate = lambda vr, mu: u.T @ p.nonlinearity(u @ vr, mu)
    for mu in (1.3, 2.05, 3.0):
        vr, hist = rom_solve_exp2(surrogate, basis, mu, s)
        assert hist[-1] <= 1e-8
        full = p.solve(mu)
        assert np.linalg.norm(u @ vr - full) <= 1e-6 * np.linalg.norm(full)


def test_rom_zero_surrogate_solves_linear_system():
    _, s, basis = _exp2_setup(5)
    u = basis.u_r
    vr, _ = rom_solve_exp2(lambda vr, mu: np.zeros(5), basis, 2.0, s)
    a_r = u.T @ padded_operator(GRID) @ u
    assert np.max(np.abs(a_r @ vr)) <= 1e-8


def test_rom_scalar_newton_by_hand():
    # r = 1 with a unit basis vector at an interior node: a_r = 60,
    # surrogate c * exp(-v); compare with an independent scalar Newton
    n = 5
    grid = Grid1D(n=n, h_inv_sq=30.0)
    e = np.zeros((n, 1))
    e[2, 0] = 1.0
    basis = PodBasis(e, np.ones(1))
    snaps = SnapshotSet([1.0], np.zeros((n, 1)))
    c = 4.0
    vr, _ = rom_solve_exp2(lambda v, mu: np.array([c * np.exp(-v[0])]), basis, 1.0, snaps, grid=grid)
    x = 0.0
    for _ in range(50):
        x -= (60 * x - c * np.exp(-x)) / (60 + c * np.exp(-x))
    assert vr[0] == pytest.approx(x, abs=1e-9)
