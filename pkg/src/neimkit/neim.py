"""Neural empirical interpolation.

Greedy construction of the affine surrogate

    N_hat(v_r; mu) = sum_i theta_i(mu) * M_i(v_r)

for the reduced nonlinearity ``U_r^T N(U_r v_r; mu)``. Each term ``M_i`` is
a small network (or, in exact mode, a constant vector) fitted to the
orthogonalized reduced nonlinearity at the parameter where the current
surrogate is worst. The coefficients are least-squares optimal on the
training parameters and interpolated in between.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .exceptions import (
    ConfigurationError,
    DataError,
    DegeneracyError,
    DimensionError,
    DivergenceError,
    ExhaustionError,
    SingularMatrixError,
)
from .mlp import Mlp, MlpConfig, WeightedDataset, mlp_forward, mlp_init, mlp_train
from .numkit import lstsq_svd, solve_linear
from .pod import PodBasis, SnapshotSet

log = logging.getLogger(__name__)

ERROR_WEIGHTS = ("uniform", "kronecker", "gaussian")
TRAINING_WEIGHTS = ("uniform", "kronecker_at_selected", "ball", "gaussian")
INTERPOLATIONS = ("piecewise_linear", "cubic_spline")
DEGENERACY_TOL = 1e-12

STATUS_MAX_MODES = "max modes reached"
STATUS_TOLERANCE = "tolerance reached"
STATUS_ELBOW = "elbow"
STATUS_EXHAUSTED = "basis exhausted"


def _param_rows(params):
    p = np.asarray(params, dtype=np.float64)
    return p.reshape(p.shape[0], -1)


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class WeightScheme:
    """Error weights ``w_e(mu_i; mu)`` and training weights ``w_t(mu_i)``.

    error:    ``uniform`` (``error_c``), ``kronecker``, or
              ``gaussian`` (``error_c * exp(-error_zeta * |mu_i - mu|^2)``)
    training: ``uniform``, ``kronecker_at_selected``, ``ball``
              (1 within ``training_radius`` of the selected parameter), or
              ``gaussian`` (``training_c``, ``training_zeta``)
    """

    error: str = "uniform"
    error_c: float = 1.0
    error_zeta: float = 1.0
    training: str = "uniform"
    training_c: float = 1.0
    training_zeta: float = 1.0
    training_radius: float = 0.0

    def __post_init__(self):
        if self.error not in ERROR_WEIGHTS:
            raise ConfigurationError(f"unknown error weights {self.error!r}")
        if self.training not in TRAINING_WEIGHTS:
            raise ConfigurationError(f"unknown training weights {self.training!r}")
        if not (self.error_c > 0 and self.training_c > 0):
            raise ConfigurationError("weight constants must be > 0")
        if self.error_zeta < 0 or self.training_zeta < 0 or self.training_radius < 0:
            raise ConfigurationError("zeta and radius must be >= 0")

    def error_weights(self, params, j: int) -> np.ndarray:
        """``w_e(mu_i; mu_j)`` for every training index ``i``."""
        p = _param_rows(params)
        if self.error == "uniform":
            return np.full(p.shape[0], float(self.error_c))
        if self.error == "kronecker":
            w = np.zeros(p.shape[0])
            w[j] = 1.0
            return w
        d2 = np.sum((p - p[j]) ** 2, axis=1)
        return self.error_c * np.exp(-self.error_zeta * d2)

    def error_matrix(self, params) -> np.ndarray:
        """Row ``j`` holds :meth:`error_weights` for ``mu_j``."""
        m = _param_rows(params).shape[0]
        return np.array([self.error_weights(params, j) for j in range(m)])

    def training_weights(self, params, selected: int) -> np.ndarray:
        p = _param_rows(params)
        m = p.shape[0]
        if self.training == "uniform":
            return np.ones(m)
        if self.training == "kronecker_at_selected":
            w = np.zeros(m)
            w[selected] = 1.0
            return w
        d2 = np.sum((p - p[selected]) ** 2, axis=1)
        if self.training == "ball":
            return (d2 <= self.training_radius**2).astype(np.float64)
        return self.training_c * np.exp(-self.training_zeta * d2)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d) -> "WeightScheme":
        return cls(**d)


@dataclass(frozen=True)
class StoppingCriteria:
    """Stop when the max error quadrature is ``<= tol``, after ``max_modes``
    terms, or when the relative decrease stays below ``elbow_fraction`` for
    two consecutive steps (disabled when 0)."""

    tol: float = 0.0
    max_modes: int = 10
    elbow_fraction: float = 0.0

    def __post_init__(self):
        if self.tol < 0:
            raise ConfigurationError("tol must be >= 0")
        if self.max_modes < 1:
            raise ConfigurationError("max_modes must be >= 1")
        if not 0 <= self.elbow_fraction < 1:
            raise ConfigurationError("elbow_fraction must lie in [0, 1)")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# training data


@dataclass
class TrainingGrid:
    """All reduced nonlinearity evaluations needed for training.

    ``g[i, j] = U_r^T N(v_i; mu_j)``, shape ``(m, m, r)``.
    """

    params: np.ndarray
    reduced_states: np.ndarray
    g: np.ndarray

    @property
    def m(self) -> int:
        return self.g.shape[0]

    @property
    def r(self) -> int:
        return self.g.shape[2]


def build_training_grid(params, snapshots, basis: PodBasis, nonlinearity) -> TrainingGrid:
    """Evaluate ``U_r^T nonlinearity(v_i, mu_j)`` for every snapshot/parameter pair.

    ``snapshots`` is an ``n x m`` matrix (or a :class:`SnapshotSet`, in which
    case ``params`` may be ``None``).
    """
    if isinstance(snapshots, SnapshotSet):
        if params is None:
            params = snapshots.parameters
        snapshots = snapshots.snapshots
    params = np.asarray(params, dtype=np.float64)
    S = np.asarray(snapshots, dtype=np.float64)
    m = S.shape[1]
    if params.shape[0] != m:
        raise DimensionError(f"{params.shape[0]} parameters for {m} snapshots")
    if S.shape[0] != basis.n:
        raise DimensionError(f"snapshots have n={S.shape[0]} but basis has n={basis.n}")
    g = np.empty((m, m, basis.r))
    for i in range(m):
        for j in range(m):
            val = np.asarray(nonlinearity(S[:, i], params[j]), dtype=np.float64)
            if val.shape != (basis.n,) or not np.all(np.isfinite(val)):
                raise DataError(f"nonlinearity returned an invalid value for snapshot {i}, parameter {j}")
            g[i, j] = basis.u_r.T @ val
    return TrainingGrid(params.copy(), (basis.u_r.T @ S).T.copy(), g)


def training_approximation(mode_values, theta) -> np.ndarray:
    """``approx[i, j] = sum_l theta[j, l] * mode_values[i, l]``, shape ``(m, m, r)``."""
    m, k, r = mode_values.shape
    if k == 0:
        return np.zeros((m, theta.shape[0], r))
    return np.einsum("jl,ilr->ijr", theta, mode_values)


def error_quadratures(grid: TrainingGrid, mode_values, theta, error_matrix) -> np.ndarray:
    """Weighted squared error ``sum_i w_e(mu_i; mu_j) |g[i, j] - N_hat(v_i; mu_j)|^2`` for every ``j``."""
    diff = grid.g - training_approximation(mode_values, theta)
    sq = np.einsum("ijr,ijr->ij", diff, diff)
    return np.einsum("ji,ij->j", error_matrix, sq)


def error_quadrature(grid: TrainingGrid, mode_values, theta, weights: WeightScheme, j: int) -> float:
    """Error quadrature at training parameter ``j`` (zero terms: ``N_hat = 0``)."""
    w = weights.error_weights(grid.params, j)
    if mode_values.shape[1] == 0:
        approx = np.zeros((grid.m, grid.r))
    else:
        approx = np.einsum("l,ilr->ir", theta[j], mode_values)
    diff = grid.g[:, j] - approx
    return float(w @ np.einsum("ir,ir->i", diff, diff))


def select_parameter(errors, excluded=()) -> int:
    """Index of the largest error among non-excluded parameters (smallest index on ties)."""
    errors = np.asarray(errors, dtype=np.float64)
    mask = np.ones(errors.size, dtype=bool)
    for j in excluded:
        mask[j] = False
    if not mask.any():
        raise ExhaustionError("every training parameter has already been selected")
    candidates = np.where(mask, errors, -np.inf)
    return int(np.argmax(candidates))


def orthogonalize_targets(y, prior_mode_values=(), tol: float = DEGENERACY_TOL) -> np.ndarray:
    """Normalized component of ``y`` orthogonal to all prior mode values.

    The priors are first reduced to an orthonormal set (dependent ones are
    dropped), then ``y`` is projected out twice and normalized.

    Raises
    ------
    DegeneracyError
        If the residual before normalization is below ``tol * |y|``.
    """
    y = np.asarray(y, dtype=np.float64)
    ny = np.linalg.norm(y)
    if ny == 0.0 or not np.isfinite(ny):
        raise DegeneracyError("target vector is zero")
    q = []
    for p in prior_mode_values:
        p = np.asarray(p, dtype=np.float64)
        npn = np.linalg.norm(p)
        if npn == 0.0:
            continue
        w = p / npn
        for _ in range(2):
            for b in q:
                w = w - (b @ w) * b
        nw = np.linalg.norm(w)
        if nw > tol:
            q.append(w / nw)
    z = y.copy()
    for _ in range(2):
        for b in q:
            z = z - (b @ z) * b
    nz = np.linalg.norm(z)
    if nz < tol * ny:
        raise DegeneracyError(f"orthogonalized target has relative norm {nz / ny:.3e}")
    return z / nz


def solve_theta(grid: TrainingGrid, mode_values, weights_row, j: int) -> np.ndarray:
    """Least-squares coefficients at training parameter ``j``.

    Solves ``A theta = b`` with ``A_kl = sum_i w_i <M_k(v_i), M_l(v_i)>`` and
    ``b_k = sum_i w_i <M_k(v_i), g[i, j]>``; falls back to a truncated-SVD
    solve (cutoff ``1e-12``) when ``A`` is singular.
    """
    w = np.asarray(weights_row, dtype=np.float64)
    a = np.einsum("i,ikr,ilr->kl", w, mode_values, mode_values)
    b = np.einsum("i,ikr,ir->k", w, mode_values, grid.g[:, j])
    try:
        return solve_linear(a, b)
    except SingularMatrixError:
        return lstsq_svd(a, b, cutoff=1e-12)


def solve_theta_all(grid: TrainingGrid, mode_values, error_matrix) -> np.ndarray:
    """:func:`solve_theta` for every training parameter, shape ``(m, k)``."""
    return np.array([solve_theta(grid, mode_values, error_matrix[j], j) for j in range(grid.m)])


# ---------------------------------------------------------------------------
# model


@dataclass
class NeimMode:
    """One term of the expansion.

    Exactly one of ``network`` and ``constant`` is set.
    ``target_at_selected`` is the orthonormalized target at the selected
    sample, i.e. the exact vector the term stands for. ``targets`` holds the
    per-sample training targets and is not serialized.
    """

    step: int
    selected_index: int
    selected_param: np.ndarray
    target_at_selected: np.ndarray
    network: Mlp | None = None
    constant: np.ndarray | None = None
    train_loss: float | None = None
    targets: np.ndarray | None = field(default=None, repr=False)

    def __call__(self, reduced_state) -> np.ndarray:
        x = np.asarray(reduced_state, dtype=np.float64)
        if self.constant is not None:
            if x.shape[-1] != self.constant.size:
                raise DimensionError(f"input of length {x.shape[-1]} for a mode of size {self.constant.size}")
            return np.broadcast_to(self.constant, x.shape).copy()
        return mlp_forward(self.network, x)


@dataclass
class TrainingLog:
    """Per-step record of the greedy loop.

    ``errors[s]`` holds the error quadrature at every training parameter
    after step ``s`` (``s = 0`` is the empty expansion).
    """

    errors: list = field(default_factory=list)
    selected: list = field(default_factory=list)
    ortho_inner_max: list = field(default_factory=list)
    norm_deviation_max: list = field(default_factory=list)
    dropped_samples: list = field(default_factory=list)
    status: str = ""

    @property
    def max_errors(self) -> np.ndarray:
        return np.array([float(np.max(e)) for e in self.errors])

    def truncate(self, k: int) -> "TrainingLog":
        return TrainingLog(
            [e.copy() for e in self.errors[: k + 1]],
            list(self.selected[:k]),
            list(self.ortho_inner_max[:k]),
            list(self.norm_deviation_max[:k]),
            [list(d) for d in self.dropped_samples[:k]],
            self.status if k == len(self.selected) else "truncated",
        )

    def to_dict(self) -> dict:
        return {
            "errors": [e.tolist() for e in self.errors],
            "max_errors": self.max_errors.tolist(),
            "selected": [int(s) for s in self.selected],
            "ortho_inner_max": [float(x) for x in self.ortho_inner_max],
            "norm_deviation_max": [float(x) for x in self.norm_deviation_max],
            "dropped_samples": [[int(i) for i in d] for d in self.dropped_samples],
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, d) -> "TrainingLog":
        return cls(
            [np.array(e, dtype=np.float64) for e in d["errors"]],
            list(d["selected"]),
            list(d["ortho_inner_max"]),
            list(d["norm_deviation_max"]),
            [list(x) for x in d["dropped_samples"]],
            d["status"],
        )


class ThetaInterpolant:
    """Coefficient interpolant over the training parameters.

    One-dimensional parameters use piecewise-linear or cubic-spline
    (not-a-knot) interpolation, clamped to the training interval and exact
    at the nodes. Higher-dimensional parameters fall back to nearest
    neighbour.
    """

    def __init__(self, params, table, method: str = "cubic_spline"):
        if method not in INTERPOLATIONS:
            raise ConfigurationError(f"unknown interpolation {method!r}")
        p = _param_rows(params)
        table = np.asarray(table, dtype=np.float64)
        if table.ndim == 1:
            table = table[:, None]
        if table.shape[0] != p.shape[0]:
            raise DimensionError(f"theta table has {table.shape[0]} rows for {p.shape[0]} parameters")
        if np.unique(p, axis=0).shape[0] != p.shape[0]:
            raise DataError("duplicate training parameters")
        self.method = method
        self.one_d = p.shape[1] == 1
        if self.one_d:
            order = np.argsort(p[:, 0], kind="stable")
            self.nodes = p[order, 0]
            self.values = table[order]
        else:
            self.nodes = p
            self.values = table
        self._spline = None
        if self.one_d and method == "cubic_spline" and self.nodes.size >= 2:
            self._spline = CubicSpline(self.nodes, self.values, axis=0, bc_type="not-a-knot")

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def __call__(self, mu) -> np.ndarray:
        if not self.one_d:
            q = np.asarray(mu, dtype=np.float64).reshape(-1, self.nodes.shape[1])
            d2 = np.sum((q[:, None, :] - self.nodes[None]) ** 2, axis=2)
            out = self.values[np.argmin(d2, axis=1)]
            return out[0] if np.ndim(mu) <= 1 and q.shape[0] == 1 else out
        scalar = np.ndim(mu) == 0 or (np.ndim(mu) == 1 and np.size(mu) == 1 and not isinstance(mu, np.ndarray))
        x = np.clip(np.asarray(mu, dtype=np.float64).reshape(-1), self.nodes[0], self.nodes[-1])
        if self.nodes.size == 1:
            out = np.repeat(self.values, x.size, axis=0)
        elif self._spline is not None:
            out = np.asarray(self._spline(x))
        else:
            idx = np.clip(np.searchsorted(self.nodes, x, side="right") - 1, 0, self.nodes.size - 2)
            x0 = self.nodes[idx]
            x1 = self.nodes[idx + 1]
            t = ((x - x0) / (x1 - x0))[:, None]
            out = (1.0 - t) * self.values[idx] + t * self.values[idx + 1]
        pos = np.clip(np.searchsorted(self.nodes, x), 0, self.nodes.size - 1)
        hit = self.nodes[pos] == x
        if hit.any():
            out = np.array(out)
            out[hit] = self.values[pos[hit]]
        return out[0] if scalar else out


def finalize_theta(table, params, method: str = "cubic_spline") -> ThetaInterpolant:
    """Interpolate each coefficient column of ``table`` over ``params``."""
    return ThetaInterpolant(params, table, method)


@dataclass
class NeimModel:
    """Trained expansion with its coefficient history.

    ``theta_history[k - 1]`` is the ``(m, k)`` table solved after step
    ``k``; the model uses the last one. :meth:`truncate` recovers the
    ``k``-term model exactly as it stood after step ``k``.
    """

    basis: PodBasis
    params: np.ndarray
    modes: list
    theta_history: list
    interpolation: str
    weights: WeightScheme
    log: TrainingLog
    exact_mode: bool = False
    net_config: MlpConfig | None = None
    _interp: ThetaInterpolant | None = field(default=None, repr=False, compare=False)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def r(self) -> int:
        return self.basis.r

    @property
    def theta_table(self) -> np.ndarray:
        if not self.theta_history:
            return np.zeros((np.asarray(self.params).shape[0], 0))
        return self.theta_history[-1]

    @property
    def selected_params(self) -> np.ndarray:
        return np.array([m.selected_param for m in self.modes])

    def interpolant(self) -> ThetaInterpolant:
        if self._interp is None:
            self._interp = finalize_theta(self.theta_table, self.params, self.interpolation)
        return self._interp

    def theta(self, mu) -> np.ndarray:
        if self.n_modes == 0:
            return np.zeros(0)
        return self.interpolant()(mu)

    def mode_values(self, reduced_states) -> np.ndarray:
        """Mode outputs for a batch of states, shape ``(m, k, r)``."""
        x = np.atleast_2d(np.asarray(reduced_states, dtype=np.float64))
        if not self.modes:
            return np.zeros((x.shape[0], 0, self.r))
        return np.stack([mode(x) for mode in self.modes], axis=1)

    def truncate(self, k: int) -> "NeimModel":
        if not 0 <= k <= self.n_modes:
            raise ConfigurationError(f"cannot truncate a {self.n_modes}-mode model to {k}")
        return NeimModel(
            self.basis,
            self.params,
            self.modes[:k],
            self.theta_history[:k],
            self.interpolation,
            self.weights,
            self.log.truncate(k),
            self.exact_mode,
            self.net_config,
        )

    def __call__(self, reduced_state, mu) -> np.ndarray:
        return neim_eval(self, reduced_state, mu)


def neim_eval(model: NeimModel, reduced_state, mu) -> np.ndarray:
    """``sum_i theta_i(mu) * M_i(reduced_state)``."""
    x = np.asarray(reduced_state, dtype=np.float64)
    if x.shape != (model.r,):
        raise DimensionError(f"reduced state of shape {x.shape} for r={model.r}")
    out = np.zeros(model.r)
    if model.n_modes == 0:
        return out
    theta = model.theta(mu)
    for t, mode in zip(theta, model.modes):
        out += t * mode(x)
    return out


def _mode_seed(base: int, step: int) -> int:
    return int(np.random.SeedSequence([int(base), int(step)]).generate_state(1, np.uint64)[0])


def neim_train(
    params,
    snapshots,
    basis: PodBasis,
    nonlinearity=None,
    weights: WeightScheme | None = None,
    stop: StoppingCriteria | None = None,
    net_config: MlpConfig | None = None,
    exact_mode: bool = False,
    interpolation: str = "cubic_spline",
    grid: TrainingGrid | None = None,
) -> NeimModel:
    """Run the greedy NEIM loop.

    Parameters
    ----------
    params, snapshots
        Training parameters and the ``n x m`` snapshot matrix (or a
        :class:`SnapshotSet` with ``params=None``).
    basis : PodBasis
    nonlinearity : callable ``(v, mu) -> ndarray (n,)``
        Only needed when ``grid`` is not supplied.
    weights : WeightScheme
    stop : StoppingCriteria
        ``max_modes`` is further capped at ``r`` and ``m``.
    net_config : MlpConfig
        Architecture and optimizer for every term; ``layer_sizes`` must
        start and end with ``r``. Ignored in exact mode.
    exact_mode : bool
        Replace each network by the constant orthonormalized target at the
        selected sample.
    interpolation : {"piecewise_linear", "cubic_spline"}
    grid : TrainingGrid, optional
        Precomputed evaluations; reused e.g. for an exact-mode twin.
    """
    weights = weights or WeightScheme()
    stop = stop or StoppingCriteria()
    if interpolation not in INTERPOLATIONS:
        raise ConfigurationError(f"unknown interpolation {interpolation!r}")
    if grid is None:
        if nonlinearity is None:
            raise ConfigurationError("either a nonlinearity or a precomputed grid is required")
        grid = build_training_grid(params, snapshots, basis, nonlinearity)
    m, r = grid.m, grid.r
    if r != basis.r:
        raise DimensionError(f"grid has r={r} but basis has r={basis.r}")
    if not exact_mode:
        if net_config is None:
            raise ConfigurationError("net_config is required unless exact_mode is set")
        if net_config.layer_sizes[0] != r or net_config.layer_sizes[-1] != r:
            raise ConfigurationError(f"network sizes {net_config.layer_sizes} do not map R^{r} -> R^{r}")
    params = grid.params
    states = grid.reduced_states
    w_e = weights.error_matrix(params)

    modes: list[NeimMode] = []
    mode_values = np.zeros((m, 0, r))
    theta = np.zeros((m, 0))
    history: list[np.ndarray] = []
    tlog = TrainingLog()
    errors = error_quadratures(grid, mode_values, theta, w_e)
    tlog.errors.append(errors)
    cap = min(stop.max_modes, r, m)
    excluded: set[int] = set()

    while True:
        k = len(modes)
        max_hist = tlog.max_errors
        if k >= cap:
            tlog.status = STATUS_MAX_MODES
            break
        if max_hist[-1] <= stop.tol:
            tlog.status = STATUS_TOLERANCE
            break
        if stop.elbow_fraction > 0 and k >= 2:
            prev = max_hist[-3:]
            rel = [(prev[t] - prev[t + 1]) / prev[t] if prev[t] > 0 else 0.0 for t in range(2)]
            if all(x < stop.elbow_fraction for x in rel):
                tlog.status = STATUS_ELBOW
                break

        step = k + 1
        jsel = select_parameter(errors, excluded)
        y = grid.g[:, jsel]
        z = np.zeros((m, r))
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            try:
                z[i] = orthogonalize_targets(y[i], mode_values[i])
            except DegeneracyError:
                keep[i] = False
        dropped = [int(i) for i in np.flatnonzero(~keep)]
        if not keep[jsel]:
            tlog.status = STATUS_EXHAUSTED
            log.info("step %d: target at selected parameter %d is degenerate; stopping", step, jsel)
            break

        if exact_mode:
            const = z[jsel].copy()
            new_values = np.broadcast_to(const, (m, r)).copy()
            mode = NeimMode(step, jsel, params[jsel].copy(), const.copy(), constant=const, targets=z)
        else:
            wt = weights.training_weights(params, jsel)
            data = WeightedDataset(states[keep], z[keep], wt[keep])
            cfg = net_config.replace(seed=_mode_seed(net_config.seed, step))
            try:
                net, loss, _ = mlp_train(mlp_init(cfg), data, cfg)
            except DivergenceError as exc:
                raise DivergenceError(f"network for step {step} diverged: {exc}", epoch=exc.epoch, step=step) from exc
            new_values = mlp_forward(net, states)
            mode = NeimMode(step, jsel, params[jsel].copy(), z[jsel].copy(), network=net, train_loss=loss, targets=z)
            log.info("step %d: mu=%s, training loss %.3e", step, params[jsel], loss)

        inner = 0.0
        for i in np.flatnonzero(keep):
            for p in mode_values[i]:
                npn = np.linalg.norm(p)
                if npn > 0:
                    inner = max(inner, abs(z[i] @ p) / npn)
        normdev = float(np.max(np.abs(np.linalg.norm(z[keep], axis=1) - 1.0)))

        modes.append(mode)
        excluded.add(jsel)
        mode_values = np.concatenate([mode_values, new_values[:, None, :]], axis=1)
        theta = solve_theta_all(grid, mode_values, w_e)
        history.append(theta)
        errors = error_quadratures(grid, mode_values, theta, w_e)
        tlog.errors.append(errors)
        tlog.selected.append(jsel)
        tlog.ortho_inner_max.append(inner)
        tlog.norm_deviation_max.append(normdev)
        tlog.dropped_samples.append(dropped)
        log.info("step %d: max error quadrature %.3e", step, float(errors.max()))

    return NeimModel(
        basis,
        params,
        modes,
        history,
        interpolation,
        weights,
        tlog,
        exact_mode,
        None if exact_mode else net_config,
    )


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class ErrorDecomposition:
    """Error split at one parameter.

    ``total <= projection + training + interpolation`` whenever the
    re-solved coefficients are the local least-squares fit (always for
    parameters outside the training set, and at training parameters under
    kronecker error weights).
    """

    mu: float
    total: float
    projection: float
    training: float
    interpolation: float
    interaction: float


def error_decomposition_report(model: NeimModel, grid: TrainingGrid, dense_eval, test_params) -> list[ErrorDecomposition]:
    """Split the surrogate error at each test parameter.

    ``dense_eval(mu)`` returns ``(reduced_state, exact)`` with
    ``exact = U_r^T N(v(mu); mu)``.

    * projection: best fit of ``exact`` by the exact (target) vectors
    * training: gap between networks and exact vectors, weighted by that fit
    * interpolation: networks times (re-solved minus interpolated) coefficients;
      at training parameters the re-solve uses the model's own error weights
    * interaction: (networks - exact vectors) times the same coefficient gap
    """
    exact_vectors = np.column_stack([mode.target_at_selected for mode in model.modes])
    w_e = model.weights.error_matrix(grid.params)
    train_values = model.mode_values(grid.reduced_states)
    nodes = _param_rows(grid.params)
    rows = []
    for mu in test_params:
        state, exact = dense_eval(mu)
        state = np.asarray(state, dtype=np.float64)
        exact = np.asarray(exact, dtype=np.float64)
        net_vectors = model.mode_values(state)[0]  # (k, r)
        mhat = net_vectors.T
        theta_interp = model.theta(mu)
        theta_star = lstsq_svd(exact_vectors, exact)
        hit = np.flatnonzero(np.all(nodes == np.asarray(mu, dtype=np.float64).reshape(1, -1), axis=1))
        if hit.size:
            theta_fit = solve_theta(grid, train_values, w_e[hit[0]], int(hit[0]))
        else:
            theta_fit = lstsq_svd(mhat, exact)
        gap = theta_fit - theta_interp
        rows.append(
            ErrorDecomposition(
                float(np.asarray(mu).reshape(-1)[0]),
                float(np.linalg.norm(exact - mhat @ theta_interp)),
                float(np.linalg.norm(exact - exact_vectors @ theta_star)),
                float(np.linalg.norm((exact_vectors - mhat) @ theta_star)),
                float(np.linalg.norm(mhat @ gap)),
                float(np.linalg.norm((mhat - exact_vectors) @ gap)),
            )
        )
    return rows
