"""Command-line harness.

    neimkit snapshots --experiment exp1 --out runs/exp1
    neimkit train     --experiment exp1 --out runs/exp1 --exact-neim
    neimkit report    --experiment exp1 --out runs/exp1

``snapshots`` writes ``snapshots.csv``; ``train`` reads it and writes
``model.json``, ``training_log.csv`` and ``singular_values.csv``;
``report`` reads both and writes ``errors_by_modes.csv``,
``errors_by_parameter.csv`` and ``error_decomposition.csv``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .deim import deim_select
from .exceptions import ConfigurationError, DataError, NeimkitError
from .mlp import MlpConfig
from .modelio import load_bundle, save_bundle
from .neim import (
    ERROR_WEIGHTS,
    INTERPOLATIONS,
    TRAINING_WEIGHTS,
    StoppingCriteria,
    WeightScheme,
    build_training_grid,
    error_decomposition_report,
    neim_train,
)
from .numkit import EPS
from .pod import SnapshotSet, compute_pod
from .testbeds import DEFAULT_H_INV_SQ, DEFAULT_M, DEFAULT_M_TEST, DEFAULT_N, make_problem

log = logging.getLogger("neimkit")

SNAPSHOT_FILE = "snapshots.csv"
MODEL_FILE = "model.json"
TRAINING_LOG_FILE = "training_log.csv"
SINGULAR_VALUES_FILE = "singular_values.csv"
ERRORS_BY_MODES_FILE = "errors_by_modes.csv"
ERRORS_BY_PARAMETER_FILE = "errors_by_parameter.csv"
DECOMPOSITION_FILE = "error_decomposition.csv"
METHODS = ("deim", "neim", "neim_exact")

EXPERIMENT_DEFAULTS = {
    # all weights 1, one hidden neuron, 20000 epochs
    "exp1": dict(r=30, error_weights="uniform", training_weights="uniform", hidden_layers=[1], epochs=20000, max_modes=30),
    # kronecker error weights, 50 hidden neurons, 10000 epochs
    "exp2": dict(r=20, error_weights="kronecker", training_weights="uniform", hidden_layers=[50], epochs=10000, max_modes=20),
}


@dataclass
class RunConfig:
    experiment: str = "exp1"
    n: int = DEFAULT_N
    m: int = DEFAULT_M
    h_inv_sq: float = DEFAULT_H_INV_SQ
    m_test: int = DEFAULT_M_TEST
    r: int = 30
    mode_counts: list | None = None
    error_weights: str = "uniform"
    error_c: float = 1.0
    error_zeta: float = 1.0
    training_weights: str = "uniform"
    training_c: float = 1.0
    training_zeta: float = 1.0
    training_radius: float = 0.0
    hidden_layers: list = dataclasses.field(default_factory=lambda: [1])
    activation: str = "tanh"
    epochs: int = 20000
    learning_rate: float = 1e-3
    lr_decay_factor: float = 0.5
    lr_decay_every: int | None = None
    max_modes: int = 30
    tol: float = 0.0
    elbow_fraction: float = 0.0
    deim_modes: int | None = None
    seed: int = 0
    interpolation: str = "cubic_spline"
    exact_mode: bool = False
    out: str = "."

    @classmethod
    def for_experiment(cls, experiment: str, **overrides) -> "RunConfig":
        if experiment not in EXPERIMENT_DEFAULTS:
            raise ConfigurationError(f"unknown experiment {experiment!r}")
        values = dict(EXPERIMENT_DEFAULTS[experiment])
        values.update(overrides)
        cfg = cls(experiment=experiment, **values)
        cfg.validate()
        return cfg

    def validate(self):
        if self.experiment not in EXPERIMENT_DEFAULTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}")
        if self.n < 3 or self.m < 2 or self.m_test < 1:
            raise ConfigurationError("need n >= 3, m >= 2 and m_test >= 1")
        if not 1 <= self.r <= min(self.n, self.m):
            raise ConfigurationError(f"r={self.r} outside [1, {min(self.n, self.m)}]")
        if self.error_weights not in ERROR_WEIGHTS:
            raise ConfigurationError(f"error_weights must be one of {ERROR_WEIGHTS}")
        if self.training_weights not in TRAINING_WEIGHTS:
            raise ConfigurationError(f"training_weights must be one of {TRAINING_WEIGHTS}")
        if self.interpolation not in INTERPOLATIONS:
            raise ConfigurationError(f"interpolation must be one of {INTERPOLATIONS}")
        if self.mode_counts is not None and (not self.mode_counts or min(self.mode_counts) < 1):
            raise ConfigurationError("mode_counts must be a nonempty list of positive integers")
        if self.deim_modes is not None and self.deim_modes < 1:
            raise ConfigurationError("deim_modes must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        self.weight_scheme()
        self.stopping()
        self.net_config()

    def counts(self) -> list[int]:
        if self.mode_counts is None:
            return list(range(1, self.max_modes + 1))
        return sorted({int(k) for k in self.mode_counts})

    def weight_scheme(self) -> WeightScheme:
        return WeightScheme(
            self.error_weights,
            self.error_c,
            self.error_zeta,
            self.training_weights,
            self.training_c,
            self.training_zeta,
            self.training_radius,
        )

    def stopping(self) -> StoppingCriteria:
        return StoppingCriteria(self.tol, self.max_modes, self.elbow_fraction)

    def net_config(self) -> MlpConfig:
        return MlpConfig(
            tuple([self.r, *self.hidden_layers, self.r]),
            self.activation,
            self.seed,
            self.epochs,
            self.learning_rate,
            self.lr_decay_factor,
            self.lr_decay_every,
        )

    def problem(self):
        return make_problem(self.experiment, self.n, self.m, self.h_inv_sq)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_config(args) -> RunConfig:
    """Experiment defaults, then the JSON config file, then command-line flags."""
    file_values = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config file {path} not found")
        try:
            file_values = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(file_values, dict):
            raise ConfigurationError("config file must hold a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(file_values) - known)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    experiment = args.experiment or file_values.get("experiment")
    if experiment is None:
        raise ConfigurationError("no experiment given (use --experiment or the config file)")
    values = {k: v for k, v in file_values.items() if k != "experiment"}
    if args.seed is not None:
        values["seed"] = args.seed
    if args.out is not None:
        values["out"] = args.out
    if getattr(args, "exact_neim", False):
        values["exact_mode"] = True
    return RunConfig.for_experiment(experiment, **values)


# ---------------------------------------------------------------------------
# CSV helpers


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def format_csv(header, rows, comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment is not None:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def parse_csv(text: str):
    """Returns ``(comment, header, rows)`` with every cell as a string."""
    lines = text.splitlines(keepends=True)
    comment = None
    if lines and lines[0].startswith("# "):
        comment = lines[0][2:].rstrip("\n")
        lines = lines[1:]
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration as exc:
        raise DataError("empty CSV") from exc
    return comment, header, [row for row in reader]


def write_snapshot_csv(path, snapshots: SnapshotSet, experiment: str) -> Path:
    """Row ``j``: parameter ``mu_j`` followed by the ``n`` solution entries."""
    comment = f"neimkit snapshots experiment={experiment} n={snapshots.n} m={snapshots.m} version={__version__}"
    header = ["mu"] + [f"v_{i + 1}" for i in range(snapshots.n)]
    params = snapshots.parameters.reshape(snapshots.m)
    rows = ([mu] + list(snapshots.snapshots[:, j]) for j, mu in enumerate(params))
    path = Path(path)
    path.write_text(format_csv(header, rows, comment))
    return path


def read_snapshot_csv(path):
    """Returns ``(SnapshotSet, metadata)``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"snapshot file {path} not found (run the snapshots command first)")
    comment, header, rows = parse_csv(path.read_text())
    meta = {}
    if comment:
        for tok in comment.split()[2:] if comment.startswith("neimkit snapshots") else []:
            key, _, val = tok.partition("=")
            meta[key] = val
    if not rows or header[0] != "mu":
        raise DataError(f"{path} is not a snapshot file")
    try:
        data = np.array([[float(x) for x in row] for row in rows])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric entry ({exc})") from exc
    if data.shape[1] != len(header):
        raise DataError(f"{path}: ragged rows")
    return SnapshotSet(data[:, 0], data[:, 1:].T), meta


# ---------------------------------------------------------------------------
# commands


def numerical_rank(sigma, n: int, m: int) -> int:
    sigma = np.asarray(sigma)
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0
    return int(np.sum(sigma > max(n, m) * EPS * sigma[0]))


def cmd_snapshots(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    problem = cfg.problem()
    snaps = problem.snapshots()
    path = write_snapshot_csv(out / SNAPSHOT_FILE, snaps, cfg.experiment)
    log.info("wrote %s (%d snapshots of length %d)", path, snaps.m, snaps.n)
    return path


def _load_snapshots(cfg: RunConfig) -> SnapshotSet:
    snaps, meta = read_snapshot_csv(Path(cfg.out) / SNAPSHOT_FILE)
    if meta.get("experiment", cfg.experiment) != cfg.experiment:
        raise ConfigurationError(f"snapshot file is for {meta['experiment']}, not {cfg.experiment}")
    if snaps.n != cfg.n or snaps.m != cfg.m:
        raise ConfigurationError(f"snapshot file has n={snaps.n}, m={snaps.m}; config expects n={cfg.n}, m={cfg.m}")
    return snaps


def _nonlinear_snapshots(problem, snaps: SnapshotSet) -> np.ndarray:
    return np.column_stack([problem.nonlinearity(snaps.snapshots[:, j], mu) for j, mu in enumerate(snaps.parameters)])


def cmd_train(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    problem = cfg.problem()
    snaps = _load_snapshots(cfg)
    basis = compute_pod(snaps, rank=cfg.r)
    grid = build_training_grid(snaps.parameters, snaps.snapshots, basis, problem.nonlinearity)

    t0 = time.perf_counter()
    neim = neim_train(
        None,
        snaps,
        basis,
        weights=cfg.weight_scheme(),
        stop=cfg.stopping(),
        net_config=cfg.net_config(),
        interpolation=cfg.interpolation,
        grid=grid,
    )
    log.info("NEIM: %d modes (%s) in %.1f s", neim.n_modes, neim.log.status, time.perf_counter() - t0)
    exact = None
    if cfg.exact_mode:
        exact = neim_train(
            None,
            snaps,
            basis,
            weights=cfg.weight_scheme(),
            stop=cfg.stopping(),
            exact_mode=True,
            interpolation=cfg.interpolation,
            grid=grid,
        )
        log.info("exact NEIM: %d modes (%s)", exact.n_modes, exact.log.status)

    nl = _nonlinear_snapshots(problem, snaps)
    nl_sigma = compute_pod(nl).sigma
    rank = numerical_rank(nl_sigma, *nl.shape)
    k_req = cfg.deim_modes if cfg.deim_modes is not None else max(cfg.counts())
    k = min(k_req, rank, min(nl.shape))
    if k < k_req:
        log.warning("DEIM capped at %d modes: nonlinear snapshots have numerical rank %d", k, rank)
    deim = deim_select(nl, k, basis)

    meta = {"run_config": cfg.to_dict(), "experiment": cfg.experiment, "deim_rank_cap": rank}
    model_path = save_bundle(out / MODEL_FILE, basis, neim=neim, neim_exact=exact, deim=deim, metadata=meta)

    rows = []
    for name, model in (("neim", neim), ("neim_exact", exact)):
        if model is None:
            continue
        tl = model.log
        rows.append([name, 0, "", "", float(tl.max_errors[0]), "", "", 0, ""])
        for s in range(model.n_modes):
            rows.append(
                [
                    name,
                    s + 1,
                    tl.selected[s],
                    float(np.asarray(model.modes[s].selected_param).reshape(-1)[0]),
                    float(tl.max_errors[s + 1]),
                    float(tl.ortho_inner_max[s]),
                    float(tl.norm_deviation_max[s]),
                    len(tl.dropped_samples[s]),
                    "" if model.modes[s].train_loss is None else float(model.modes[s].train_loss),
                ]
            )
    header = ["model", "step", "selected_index", "selected_param", "max_error", "ortho_inner_max", "norm_deviation_max", "dropped_samples", "train_loss"]
    (out / TRAINING_LOG_FILE).write_text(format_csv(header, rows))

    sv_rows = []
    for i, (a, b) in enumerate(zip(basis.sigma, nl_sigma)):
        sv_rows.append([i + 1, float(a), float(a / basis.sigma[0]), float(b), float(b / nl_sigma[0])])
    (out / SINGULAR_VALUES_FILE).write_text(format_csv(["index", "solution_sigma", "solution_ratio", "nonlinear_sigma", "nonlinear_ratio"], sv_rows))
    log.info("wrote %s", model_path)
    return {"neim": neim, "neim_exact": exact, "deim": deim, "basis": basis}


def _reference(problem, basis, test_params):
    """Reduced states, exact reduced nonlinearity and full-order nonlinearity at test parameters."""
    states, exact, full = [], [], []
    u = basis.u_r
    for mu in test_params:
        vt = u.T @ problem.solve(mu)
        nl = problem.nonlinearity(u @ vt, mu)
        states.append(vt)
        exact.append(u.T @ nl)
        full.append(nl)
    return np.array(states), np.array(exact), np.array(full)


def neim_errors_by_modes(model, states, exact, test_params, counts):
    """Per-parameter ``|N_hat_k - exact|_2`` for each mode count ``k`` available in ``model``."""
    values = model.mode_values(states)  # (t, K, r)
    out = {}
    for k in counts:
        if k > model.n_modes:
            continue
        theta = model.truncate(k).interpolant()(np.asarray(test_params))
        theta = np.asarray(theta).reshape(len(test_params), k)
        approx = np.einsum("tl,tlr->tr", theta, values[:, :k])
        out[k] = np.linalg.norm(approx - exact, axis=1)
    return out


def deim_errors_by_modes(model, basis, full, exact, counts):
    out = {}
    for k in counts:
        if k > model.k:
            continue
        dk = model.truncate(k, basis)
        approx = full[:, dk.indices] @ dk.projector.T
        out[k] = np.linalg.norm(approx - exact, axis=1)
    return out


def cmd_report(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    bundle = load_bundle(out / MODEL_FILE)
    meta = bundle["metadata"]
    if meta.get("experiment", cfg.experiment) != cfg.experiment:
        raise ConfigurationError(f"model file is for {meta['experiment']}, not {cfg.experiment}")
    problem = cfg.problem()
    basis = bundle["pod_basis"]
    if basis.n != cfg.n:
        raise ConfigurationError(f"model basis has n={basis.n}, config expects n={cfg.n}")
    test_params = problem.test_params(cfg.m_test)
    counts = cfg.counts()
    states, exact, full = _reference(problem, basis, test_params)

    per_method = {}
    if bundle["deim"] is not None:
        per_method["deim"] = deim_errors_by_modes(bundle["deim"], basis, full, exact, counts)
    for name in ("neim", "neim_exact"):
        if bundle[name] is not None:
            per_method[name] = neim_errors_by_modes(bundle[name], states, exact, test_params, counts)

    summary_rows, param_rows = [], []
    for name in METHODS:
        for k, errs in per_method.get(name, {}).items():
            summary_rows.append([name, k, float(np.mean(errs))])
            param_rows.extend([name, k, float(mu), float(e)] for mu, e in zip(test_params, errs))
    (out / ERRORS_BY_MODES_FILE).write_text(format_csv(["method", "mode_count", "avg_abs_error"], summary_rows))
    (out / ERRORS_BY_PARAMETER_FILE).write_text(format_csv(["method", "mode_count", "mu", "abs_error"], param_rows))

    neim = bundle["neim"]
    if neim is not None and neim.n_modes > 0:
        snaps = _load_snapshots(cfg)
        grid = build_training_grid(snaps.parameters, snaps.snapshots, basis, problem.nonlinearity)
        lookup = {float(mu): (s, e) for mu, s, e in zip(test_params, states, exact)}
        rows = error_decomposition_report(neim, grid, lambda mu: lookup[float(mu)], test_params)
        (out / DECOMPOSITION_FILE).write_text(
            format_csv(
                ["mu", "total", "projection", "training", "interpolation", "interaction"],
                ([d.mu, d.total, d.projection, d.training, d.interpolation, d.interaction] for d in rows),
            )
        )
    for name, k, err in summary_rows:
        log.info("%-10s %3d modes: avg abs error %.3e", name, k, err)
    return {"summary": summary_rows, "per_method": per_method, "test_params": test_params}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="neimkit", description="POD, DEIM and NEIM hyper-reduction experiments")
    parser.add_argument("--version", action="version", version=f"neimkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "snapshots": "compute high-fidelity snapshots",
        "train": "train POD, DEIM and NEIM models",
        "report": "write error tables for trained models",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--experiment", choices=sorted(EXPERIMENT_DEFAULTS))
        p.add_argument("--config", help="JSON file with RunConfig overrides")
        p.add_argument("--out", help="output directory (default: current directory)")
        p.add_argument("--seed", type=int, help="base seed for network initialization")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "train":
            p.add_argument("--exact-neim", action="store_true", help="also train the constant-vector twin")
    return parser


COMMANDS = {"snapshots": cmd_snapshots, "train": cmd_train, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = load_config(args)
        COMMANDS[args.command](cfg)
    except (NeimkitError, OSError, ValueError) as exc:
        print(f"neimkit {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0
