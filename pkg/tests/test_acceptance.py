"""Acceptance criteria on the full-size benchmarks.

Each test records one ``[PASS]``/``[FAIL]`` line, printed again in the
terminal summary. Run alone with::

    pytest tests/test_acceptance.py -v

Full-size models are trained once per session (about two minutes in
total on a laptop).
"""

import time

import numpy as np
import pytest

from neimkit.cli import RunConfig, numerical_rank
from neimkit.deim import deim_eval, deim_select
from neimkit.mlp import MlpConfig, WeightedDataset, mlp_init, mlp_loss_and_grad
from neimkit.modelio import load_bundle, save_bundle
from neimkit.neim import StoppingCriteria, TrainingGrid, WeightScheme, build_training_grid, neim_train, solve_theta
from neimkit.pod import compute_pod
from neimkit.testbeds import avg_abs_error, make_problem

from toy import toy_problem

pytestmark = pytest.mark.slow


class Setup:
    """Snapshots, POD basis, grid and reference values for one experiment."""

    def __init__(self, experiment):
        t0 = time.perf_counter()
        self.cfg = RunConfig.for_experiment(experiment)
        self.problem = make_problem(experiment)
        self.snaps = self.problem.snapshots()
        self.basis = compute_pod(self.snaps, rank=self.cfg.r)
        self.grid = build_training_grid(None, self.snaps, self.basis, self.problem.nonlinearity)
        self.nl = np.column_stack(
            [self.problem.nonlinearity(self.snaps.snapshots[:, j], mu) for j, mu in enumerate(self.snaps.parameters)]
        )
        u = self.basis.u_r
        self.test_params = self.problem.test_params(500)
        self.states = {}
        self.exact = {}
        self.full = {}
        for mu in self.test_params:
            vt = u.T @ self.problem.solve(mu)
            nl = self.problem.nonlinearity(u @ vt, mu)
            self.states[mu] = vt
            self.full[mu] = nl
            self.exact[mu] = u.T @ nl
        self.elapsed = time.perf_counter() - t0

    def train(self, exact_mode, max_modes=None, weights=None, net_config=None):
        stop = self.cfg.stopping() if max_modes is None else StoppingCriteria(max_modes=max_modes)
        return neim_train(
            None,
            self.snaps,
            self.basis,
            weights=weights or self.cfg.weight_scheme(),
            stop=stop,
            net_config=net_config or self.cfg.net_config(),
            exact_mode=exact_mode,
            interpolation=self.cfg.interpolation,
            grid=self.grid,
        )

    def neim_error(self, model):
        return avg_abs_error(lambda mu: model(self.states[mu], mu), lambda mu: self.exact[mu], self.test_params)

    def deim_error(self, deim):
        return avg_abs_error(lambda mu: deim.projector @ self.full[mu][deim.indices], lambda mu: self.exact[mu], self.test_params)

    def deim(self, k):
        return deim_select(self.nl, k, self.basis)


@pytest.fixture(scope="session")
def exp1():
    s = Setup("exp1")
    t0 = time.perf_counter()
    s.neim = s.train(exact_mode=False)
    s.neim_exact = s.train(exact_mode=True)
    s.elapsed += time.perf_counter() - t0
    return s


@pytest.fixture(scope="session")
def exp2():
    s = Setup("exp2")
    t0 = time.perf_counter()
    # the first 10 greedy steps are identical to those of a 20-mode run
    s.neim = s.train(exact_mode=False, max_modes=10)
    s.neim_exact = s.train(exact_mode=True, max_modes=10)
    s.elapsed += time.perf_counter() - t0
    return s


def _max_increase(model):
    e = np.array(model.log.errors)
    return float(np.max(np.diff(e, axis=0))) if e.shape[0] > 1 else 0.0


# ---------------------------------------------------------------- 1


def test_c1_monotone_error_quadrature(exp1, exp2, acceptance):
    kron = WeightScheme(error="kronecker")
    t0 = time.perf_counter()
    toy = []
    for seed in range(10):
        snaps, basis, nl = toy_problem(m=5, r=3, seed=seed)
        for exact in (True, False):
            model = neim_train(
                None, snaps, basis, nl, kron, StoppingCriteria(max_modes=3), MlpConfig((3, 8, 3), seed=seed, epochs=300), exact
            )
            toy.append(_max_increase(model))
    toy_time = time.perf_counter() - t0
    quick = MlpConfig((30, 1, 30), seed=0, epochs=500)
    full_size = [
        _max_increase(exp1.train(True, weights=kron)),
        _max_increase(exp1.train(False, weights=kron, net_config=quick)),
        _max_increase(exp2.neim),  # exp2 defaults already use kronecker error weights
        _max_increase(exp2.neim_exact),
    ]
    worst = max(toy + full_size)
    ok = worst <= 1e-10 and toy_time < 10
    acceptance("1", "max per-step increase of the kronecker error quadrature (<= 1e-10), toy-grid runtime (< 10 s)", f"{worst:.2e}, {toy_time:.1f} s", ok)
    assert worst <= 1e-10
    assert toy_time < 10


# ---------------------------------------------------------------- 2


def test_c2a_exp1_singular_values(exp1, acceptance):
    sigma = compute_pod(exp1.snaps).sigma
    worst = float(np.max(sigma[30:] / sigma[0]))
    ok = worst < 1e-12
    acceptance("2a", "exp1 max sigma_i/sigma_1 for i > 30 (< 1e-12)", f"{worst:.2e}", ok)
    assert ok


def test_c2b_exp1_deim(exp1, acceptance):
    err = exp1.deim_error(exp1.deim(30))
    ok = err <= 1e-8
    acceptance("2b", "exp1 DEIM avg abs error at 30 modes (<= 1e-8)", f"{err:.3e}", ok)
    assert ok


def test_c2c_exp1_exact_neim(exp1, acceptance):
    model = exp1.neim_exact
    counts = range(1, min(30, model.n_modes) + 1)
    errs = [exp1.neim_error(model.truncate(k)) for k in counts]
    monotone = all(b <= a for a, b in zip(errs, errs[1:]))
    final = errs[-1]
    ok = monotone and final <= 1e-6
    acceptance(
        "2c",
        f"exp1 exact-NEIM avg error non-increasing ({monotone}) and <= 1e-6 at 30 requested modes "
        f"(model stops at {model.n_modes}: {model.log.status})",
        f"{final:.3e}",
        ok,
    )
    assert monotone
    assert final <= 1e-6


def test_c2d_exp1_neim_vs_exact(exp1, acceptance):
    ratios = []
    for k in range(1, 20):
        if k > exp1.neim_exact.n_modes or k > exp1.neim.n_modes:
            break
        a = exp1.neim_error(exp1.neim.truncate(k))
        b = exp1.neim_error(exp1.neim_exact.truncate(k))
        ratios.append(max(a / b, b / a))
    worst = max(ratios)
    ok = worst <= 10 and len(ratios) == 19 and exp1.elapsed <= 600
    acceptance("2d", "exp1 max NEIM/exact-NEIM error ratio for modes < 20 (<= 10), runtime (<= 600 s)", f"{worst:.2f}, {exp1.elapsed:.0f} s", ok)
    assert worst <= 10 and len(ratios) == 19
    assert exp1.elapsed <= 600


# ---------------------------------------------------------------- 3


def test_c3_exp2(exp2, acceptance):
    neim6 = exp2.neim_error(exp2.neim.truncate(6))
    deim_errs = [exp2.deim_error(exp2.deim(k)) for k in range(1, 11)]
    decreasing = all(b < a for a, b in zip(deim_errs, deim_errs[1:]))
    ok = neim6 <= 5e-4 and deim_errs[5] <= 10 * neim6 and decreasing and exp2.elapsed <= 900
    acceptance(
        "3",
        f"exp2 NEIM avg error at 6 modes (<= 5e-4, seed {exp2.cfg.seed}); DEIM at 6 <= 10x NEIM; DEIM decreasing to 10 ({decreasing})",
        f"{neim6:.3e}, DEIM6 {deim_errs[5]:.3e}, DEIM10 {deim_errs[9]:.3e}, {exp2.elapsed:.0f} s",
        ok,
    )
    assert neim6 <= 5e-4
    assert deim_errs[5] <= 10 * neim6
    assert decreasing
    assert exp2.elapsed <= 900


# ---------------------------------------------------------------- 4


def _normal_equations(mode_values, g_col, w):
    m, k, _ = mode_values.shape
    a = np.zeros((k, k))
    b = np.zeros(k)
    for i in range(m):
        for p in range(k):
            b[p] += w[i] * float(np.dot(mode_values[i, p], g_col[i]))
            for q in range(k):
                a[p, q] += w[i] * float(np.dot(mode_values[i, p], mode_values[i, q]))
    return np.linalg.solve(a, b)


def test_c4_theta_oracle(acceptance):
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        j = int(rng.integers(1, 6))
        m = int(rng.integers(max(j, 2), 11))  # m >= j keeps the normal matrix nonsingular
        r = int(rng.integers(1, 9))
        mv = rng.standard_normal((m, j, r))
        g = rng.standard_normal((m, m, r))
        w = rng.uniform(0.1, 2.0, m)
        grid = TrainingGrid(np.arange(m, dtype=float), np.zeros((m, r)), g)
        col = int(rng.integers(m))
        worst = max(worst, float(np.linalg.norm(solve_theta(grid, mv, w, col) - _normal_equations(mv, g[:, col], w))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 5
    acceptance("4", "theta solve vs normal-equations oracle, 100 instances (<= 1e-9, < 5 s)", f"{worst:.2e}, {elapsed:.2f} s", ok)
    assert worst <= 1e-9
    assert elapsed < 5


# ---------------------------------------------------------------- 5


def test_c5_deim_row_exactness(exp1, exp2, acceptance):
    worst = 0.0
    ks = []
    for s in (exp1, exp2):
        sigma = compute_pod(s.nl).sigma
        k = min(s.cfg.r, numerical_rank(sigma, *s.nl.shape))
        ks.append(k)
        d = s.deim(k)
        for j in range(s.snaps.m):
            worst = max(worst, float(np.max(np.abs(d.residual_at_indices(s.nl[:, j])))))
    ok = worst <= 1e-12
    acceptance("5", f"DEIM residual at selected rows, all training mu (k = {ks[0]} / {ks[1]}) (<= 1e-12)", f"{worst:.2e}", ok)
    assert ok


# ---------------------------------------------------------------- 6


def test_c6_gradient_check(acceptance):
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    worst = 0.0
    count = 0
    while count < 25:
        r = int(rng.integers(1, 4))
        hidden = tuple(int(h) for h in rng.integers(1, 5, size=rng.integers(1, 3)))
        cfg = MlpConfig((r, *hidden, r), seed=int(rng.integers(2**32)))
        net = mlp_init(cfg)
        if net.n_params > 50:
            continue
        for b in net.biases:
            b += 0.3 * rng.standard_normal(b.shape)
        m = int(rng.integers(1, 6))
        data = WeightedDataset(rng.standard_normal((m, r)), rng.standard_normal((m, r)), rng.uniform(0.1, 2.0, m))
        _, grads = mlp_loss_and_grad(net, data)
        g = grads.flat()
        flat = net.flat()
        h = 1e-6
        for k in range(flat.size):
            p, q = flat.copy(), flat.copy()
            p[k] += h
            q[k] -= h
            fd = (mlp_loss_and_grad(net.with_flat(p), data)[0] - mlp_loss_and_grad(net.with_flat(q), data)[0]) / (2 * h)
            scale = max(abs(g[k]), abs(fd))
            if scale > 0:
                worst = max(worst, abs(g[k] - fd) / scale)
        count += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-4 and elapsed < 5
    acceptance("6", f"MLP backprop vs central differences, {count} nets <= 50 params (<= 1e-4 rel, < 5 s)", f"{worst:.2e}, {elapsed:.2f} s", ok)
    assert worst <= 1e-4
    assert elapsed < 5


# ---------------------------------------------------------------- 7


def test_c7_orthogonalization(exp1, exp2, acceptance):
    worst_inner = 0.0
    worst_norm = 0.0
    for s in (exp1, exp2):
        for model in (s.neim, s.neim_exact):
            values = model.mode_values(s.grid.reduced_states)
            for step, mode in enumerate(model.modes):
                dropped = set(model.log.dropped_samples[step])
                for i in range(s.snaps.m):
                    if i in dropped:
                        continue
                    z = mode.targets[i]
                    worst_norm = max(worst_norm, abs(float(np.linalg.norm(z)) - 1.0))
                    for k in range(step):
                        worst_inner = max(worst_inner, abs(float(z @ values[i, k])))
    ok = worst_inner <= 1e-8 and worst_norm <= 1e-12
    acceptance("7", "max |<z, prior mode value>| (<= 1e-8) and max ||z|-1| (<= 1e-12), every step, both experiments", f"{worst_inner:.2e}, {worst_norm:.2e}", ok)
    assert worst_inner <= 1e-8
    assert worst_norm <= 1e-12


# ---------------------------------------------------------------- 8


def test_c8_serialization(exp1, exp2, tmp_path, acceptance):
    rng = np.random.default_rng(8)
    mismatches = 0
    for s in (exp1, exp2):
        d = s.deim(10)
        bundle = load_bundle(save_bundle(tmp_path / f"{s.cfg.experiment}.json", s.basis, s.neim, s.neim_exact, d))
        for _ in range(100):
            vr = rng.standard_normal(s.basis.r) * rng.uniform(0.1, 10)
            mu = rng.uniform(1.0, np.pi)
            for name in ("neim", "neim_exact"):
                mismatches += not np.array_equal(bundle[name](vr, mu), getattr(s, name)(vr, mu))
            loaded = deim_eval(bundle["deim"], bundle["pod_basis"], s.problem.nl_rows, vr, mu)
            mismatches += not np.array_equal(loaded, deim_eval(d, s.basis, s.problem.nl_rows, vr, mu))
    ok = mismatches == 0
    acceptance("8", "save -> load -> evaluate on 100 random (v, mu) pairs per model, bit-identical", f"{mismatches} mismatches", ok)
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
