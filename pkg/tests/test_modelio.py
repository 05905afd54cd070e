import json

import numpy as np
import pytest

from neimkit.deim import deim_select
from neimkit.exceptions import DataError
from neimkit.modelio import FORMAT_VERSION, load_bundle, load_model, save_bundle, save_model
from neimkit.neim import StoppingCriteria, WeightScheme, build_training_grid, neim_train
from neimkit.mlp import MlpConfig

from toy import toy_problem


@pytest.fixture(scope="module")
def models():
    snaps, basis, nl = toy_problem(m=6)
    grid = build_training_grid(None, snaps, basis, nl)
    kw = dict(weights=WeightScheme(error="gaussian", error_zeta=2.0), stop=StoppingCriteria(max_modes=3), grid=grid)
    net = neim_train(None, snaps, basis, net_config=MlpConfig((3, 6, 3), seed=3, epochs=200), **kw)
    exact = neim_train(None, snaps, basis, exact_mode=True, interpolation="piecewise_linear", **kw)
    nl_snaps = np.column_stack([nl(snaps.snapshots[:, j], mu) for j, mu in enumerate(snaps.parameters)])
    deim = deim_select(nl_snaps, 3, basis)
    return basis, net, exact, deim


def _random_pairs(rng, r, count=100):
    return [(rng.standard_normal(r) * 3, rng.uniform(0.8, 2.2)) for _ in range(count)]


def test_round_trip_bit_identical(models, tmp_path, rng):
    basis, net, exact, deim = models
    path = save_bundle(tmp_path / "m.json", basis, net, exact, deim, metadata={"note": "x"})
    b = load_bundle(path)
    assert b["metadata"] == {"note": "x"}
    np.testing.assert_array_equal(b["pod_basis"].u_r, basis.u_r)
    for vr, mu in _random_pairs(rng, basis.r):
        for name, model in (("neim", net), ("neim_exact", exact)):
            assert np.array_equal(b[name](vr, mu), model(vr, mu))
    np.testing.assert_array_equal(b["deim"].projector, deim.projector)
    np.testing.assert_array_equal(b["deim"].indices, deim.indices)
    assert b["neim"].log.errors[2].tolist() == net.log.errors[2].tolist()
    assert b["neim"].net_config == net.net_config
    assert b["neim_exact"].interpolation == "piecewise_linear"
    for k in range(1, net.n_modes + 1):
        vr, mu = _random_pairs(rng, basis.r, 1)[0]
        assert np.array_equal(b["neim"].truncate(k)(vr, mu), net.truncate(k)(vr, mu))


def test_save_is_deterministic(models, tmp_path):
    basis, net, exact, deim = models
    a = save_bundle(tmp_path / "a.json", basis, net, exact, deim).read_bytes()
    b = save_bundle(tmp_path / "b.json", basis, net, exact, deim).read_bytes()
    assert a == b
    # load then save again reproduces the file
    back = load_bundle(tmp_path / "a.json")
    c = save_bundle(tmp_path / "c.json", back["pod_basis"], back["neim"], back["neim_exact"], back["deim"]).read_bytes()
    assert c == a


def test_single_model_helpers(models, tmp_path, rng):
    basis, net, _, _ = models
    m = load_model(save_model(tmp_path / "n.json", net))
    vr = rng.standard_normal(basis.r)
    assert np.array_equal(m(vr, 1.3), net(vr, 1.3))


def test_version_and_format_checks(models, tmp_path):
    basis, net, _, _ = models
    path = save_model(tmp_path / "n.json", net)
    doc = json.loads(path.read_text())
    assert doc["format_version"] == FORMAT_VERSION
    doc["format_version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(DataError, match="version"):
        load_bundle(path)
    path.write_text(json.dumps({"format": "other"}))
    with pytest.raises(DataError):
        load_bundle(path)
    with pytest.raises(FileNotFoundError):
        load_bundle(tmp_path / "missing.json")
    only_basis = save_bundle(tmp_path / "b.json", basis)
    with pytest.raises(DataError):
        load_model(only_basis)
