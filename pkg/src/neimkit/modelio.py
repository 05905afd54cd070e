"""Versioned JSON model files.

A model file holds a POD basis and any of: a NEIM model, its exact-mode
twin, and a DEIM model. Floats are written with Python's shortest
round-trip representation, so loading reproduces every array bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import __version__
from .deim import DeimModel
from .exceptions import DataError
from .mlp import Mlp, MlpConfig
from .neim import NeimMode, NeimModel, TrainingLog, WeightScheme
from .pod import PodBasis

FORMAT = "neimkit-model"
FORMAT_VERSION = 1


def neim_to_dict(model: NeimModel, include_basis: bool = True) -> dict:
    params = np.asarray(model.params)
    modes = []
    for mode in model.modes:
        entry = {
            "step": mode.step,
            "selected_index": mode.selected_index,
            "selected_param": np.asarray(mode.selected_param).tolist(),
            "target_at_selected": mode.target_at_selected.tolist(),
            "train_loss": mode.train_loss,
        }
        if mode.network is not None:
            entry["network"] = mode.network.to_dict()
        else:
            entry["constant_vector"] = mode.constant.tolist()
        modes.append(entry)
    d = {
        "params": params.tolist(),
        "modes": modes,
        "theta_history": [t.tolist() for t in model.theta_history],
        "interpolation": model.interpolation,
        "weights": model.weights.to_dict(),
        "training_log": model.log.to_dict(),
        "exact_mode": model.exact_mode,
        "net_config": None if model.net_config is None else model.net_config.to_dict(),
    }
    if include_basis:
        d["pod_basis"] = model.basis.to_dict()
    return d


def neim_from_dict(d: dict, basis: PodBasis | None = None) -> NeimModel:
    if basis is None:
        basis = PodBasis.from_dict(d["pod_basis"])
    params = np.array(d["params"], dtype=np.float64)
    modes = []
    for e in d["modes"]:
        net = Mlp.from_dict(e["network"]) if "network" in e else None
        const = None if net is not None else np.array(e["constant_vector"], dtype=np.float64)
        modes.append(
            NeimMode(
                step=e["step"],
                selected_index=e["selected_index"],
                selected_param=np.array(e["selected_param"], dtype=np.float64),
                target_at_selected=np.array(e["target_at_selected"], dtype=np.float64),
                network=net,
                constant=const,
                train_loss=e.get("train_loss"),
            )
        )
    m = params.shape[0]
    history = [np.array(t, dtype=np.float64).reshape(m, k + 1) for k, t in enumerate(d["theta_history"])]
    cfg = d.get("net_config")
    return NeimModel(
        basis,
        params,
        modes,
        history,
        d["interpolation"],
        WeightScheme.from_dict(d["weights"]),
        TrainingLog.from_dict(d["training_log"]),
        bool(d.get("exact_mode", False)),
        None if cfg is None else MlpConfig.from_dict(cfg),
    )


def bundle_to_dict(basis: PodBasis, neim=None, neim_exact=None, deim=None, metadata=None) -> dict:
    return {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "code_version": __version__,
        "metadata": metadata or {},
        "pod_basis": basis.to_dict(),
        "neim": None if neim is None else neim_to_dict(neim, include_basis=False),
        "neim_exact": None if neim_exact is None else neim_to_dict(neim_exact, include_basis=False),
        "deim": None if deim is None else deim.to_dict(),
    }


def bundle_from_dict(d: dict) -> dict:
    """Inverse of :func:`bundle_to_dict`; returns a dict of model objects."""
    if d.get("format") != FORMAT:
        raise DataError(f"not a {FORMAT} document")
    if d.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported model format version {d.get('format_version')}")
    basis = PodBasis.from_dict(d["pod_basis"])
    return {
        "metadata": d.get("metadata", {}),
        "code_version": d.get("code_version"),
        "pod_basis": basis,
        "neim": None if d.get("neim") is None else neim_from_dict(d["neim"], basis),
        "neim_exact": None if d.get("neim_exact") is None else neim_from_dict(d["neim_exact"], basis),
        "deim": None if d.get("deim") is None else DeimModel.from_dict(d["deim"]),
    }


def save_bundle(path, basis, neim=None, neim_exact=None, deim=None, metadata=None) -> Path:
    path = Path(path)
    path.write_text(json.dumps(bundle_to_dict(basis, neim, neim_exact, deim, metadata)))
    return path


def load_bundle(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model file {path} not found")
    return bundle_from_dict(json.loads(path.read_text()))


def save_model(path, model: NeimModel) -> Path:
    """Write a single NEIM model (with its basis) to a model file."""
    return save_bundle(path, model.basis, neim=model)


def load_model(path) -> NeimModel:
    bundle = load_bundle(path)
    if bundle["neim"] is None:
        raise DataError(f"{path} holds no NEIM model")
    return bundle["neim"]
