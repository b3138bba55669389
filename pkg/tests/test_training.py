import json

import numpy as np
import pytest
from sklearn.base import clone

from sphloc.estimator import LocationClassifier
from sphloc.geometry import HALF_PI, to_cartesian
from sphloc.metrics import evaluate
from sphloc.encoders import encode_xyz
from sphloc.nn import LocationNet
from sphloc.optim import TrainConfig, TrainingError, run_training
from sphloc.synth import Dataset, MvMFSpec, generate, preset, sample_vmf
from sphloc.training import Checkpoint, grid_search, train

SMALL = dict(n_scales=4, hidden_dim=32, epochs=5, batch_size=64)


def antipodal_dataset(seed=0, n=200, kappa=100.0):
    rng = np.random.default_rng(seed)
    centers = np.array([[0.4, 0.3], [0.4 - np.pi, -0.3]])
    mus = to_cartesian(centers)
    pts = np.concatenate([sample_vmf(mus[c], kappa, n, rng) for c in range(2)])
    labels = np.repeat([0, 1], n)
    splits = np.tile(np.array(["train"] * 160 + ["val"] * 20 + ["test"] * 20), 2)
    return Dataset(pts, labels, splits, None, centers, np.full(2, kappa))


def test_single_class():
    rng = np.random.default_rng(0)
    pts = sample_vmf(np.array([0.0, 1.0, 0.0]), 5.0, 50, rng)
    splits = np.array(["train"] * 40 + ["val"] * 10)
    ds = Dataset(pts, np.zeros(50, np.int64), splits, None, np.array([[0.0, 0.0]]), np.array([5.0]))
    ckpt = train(ds, epochs=1, hidden_dim=8, n_scales=2)
    assert ckpt.val_top1 == 1.0
    assert evaluate(ckpt.model, *ds.split("val")[:2]).top1 == 1.0


def test_antipodal_vmf_sphereC_single_scale():
    ds = antipodal_dataset()
    X, y, _ = ds.split("val")
    assert np.mean(ds.oracle_predict(X) == y) >= 0.95
    ckpt = train(ds, encoder="sphereC", n_scales=1, epochs=20, hidden_dim=32, batch_size=32, lr=1e-2)
    assert ckpt.val_top1 >= 0.95


def test_same_seed_same_history():
    ds = generate(MvMFSpec(n_classes=5, samples_per_class=40, seed=1))
    a = train(ds, random_state=3, dropout=0.5, **SMALL)
    b = train(ds, random_state=3, dropout=0.5, **SMALL)
    assert a.history == b.history
    c = train(ds, random_state=4, dropout=0.5, **SMALL)
    assert c.history != a.history


def test_best_epoch_restored():
    ds = generate(MvMFSpec(n_classes=5, samples_per_class=40, seed=1))
    ckpt = train(ds, **SMALL)
    best = max(h["val_top1"] for h in ckpt.history)
    first_best = next(h["epoch"] for h in ckpt.history if h["val_top1"] == best)
    assert ckpt.epoch == first_best
    X, y, _ = ds.split("val")
    assert evaluate(ckpt.model, X, y).top1 == best


def test_no_validation_keeps_last_epoch():
    ds = generate(MvMFSpec(n_classes=3, samples_per_class=10, seed=0, split_fractions=(1.0, 0.0, 0.0)))
    ckpt = train(ds, epochs=3, hidden_dim=8, n_scales=2)
    assert ckpt.epoch == 3 and ckpt.val_top1 is None


@pytest.mark.parametrize("family", ["rbf", "rff", "tile", "wrap", "nerf", "theory", "dfs"])
def test_every_family_trains(family):
    ds = generate(MvMFSpec(n_classes=4, samples_per_class=20, seed=0))
    ckpt = train(ds, encoder=family, n_scales=2, epochs=2, hidden_dim=8, n_anchors=10, n_features=16)
    assert ckpt.epoch >= 1
    back = Checkpoint.from_dict(json.loads(json.dumps(ckpt.to_dict())))
    X, _, _ = ds.split("test")
    np.testing.assert_array_equal(back.model.decision_function(X), ckpt.model.decision_function(X))


def test_residual_network():
    ds = generate(MvMFSpec(n_classes=4, samples_per_class=20, seed=0))
    ckpt = train(ds, network="residual", hidden_layers=2, embed_dim=6, **SMALL)
    assert ckpt.model.embed(ds.points[:3]).shape == (3, 6)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nan_loss_raises():
    rng = np.random.default_rng(0)
    net = LocationNet.init(3, 2, hidden_dim=4, rng=rng)
    net.params["T"][0, 0] = np.nan
    F = rng.normal(size=(8, 3))
    config = TrainConfig(epochs=1, batch_size=4)
    rngs = {k: np.random.default_rng(1) for k in ("shuffle", "negatives", "dropout")}
    with pytest.raises(TrainingError) as err:
        run_training(net, encode_xyz, F, np.zeros(8, int), None, None, config, rngs)
    assert err.value.epoch == 1 and err.value.batch == 0


def test_estimator_api():
    ds = generate(MvMFSpec(n_classes=4, samples_per_class=20, seed=0))
    X, y, _ = ds.split("train")
    model = LocationClassifier(**SMALL).fit(X, y)
    p = model.predict_proba(X)
    np.testing.assert_allclose(p.sum(1), 1.0)
    assert np.all((model.predict_scores(X) > 0) & (model.predict_scores(X) < 1))
    np.testing.assert_array_equal(model.predict(X), np.argmax(model.decision_function(X), 1))
    assert 0 <= model.score(X, y) <= 1
    assert clone(model).get_params() == model.get_params()
    with pytest.raises(ValueError):
        LocationClassifier(n_classes=2, **SMALL).fit(X, y)


def test_checkpoint_files(tmp_path):
    ds = generate(MvMFSpec(n_classes=4, samples_per_class=20, seed=0))
    ckpt = train(ds, metadata={"note": "x"}, **SMALL)
    path = tmp_path / "m.json"
    ckpt.save(path)
    back = Checkpoint.load(path)
    assert back.metadata == {"note": "x"} and back.history == ckpt.history
    X, y, _ = ds.split("test")
    assert evaluate(back.model, X, y).to_dict() == evaluate(ckpt.model, X, y).to_dict()
    d = json.loads(path.read_text())
    assert d["format_version"] == 1 and d["train_config"]["lr"] == 1e-3
    d["format_version"] = 99
    with pytest.raises(ValueError):
        Checkpoint.from_dict(d)


def test_evaluate_with_image_scores():
    ds = generate(MvMFSpec(n_classes=5, samples_per_class=30, seed=2))
    ckpt = train(ds, **SMALL)
    X, y, _ = ds.split("test")
    base = evaluate(ckpt.model, X, y)
    ones = evaluate(ckpt.model, X, y, img_scores=np.ones((len(y), 5)))
    assert ones.top_k == base.top_k and ones.mrr == base.mrr and ones.cells == base.cells
    onehot = np.eye(5)[y]
    assert evaluate(ckpt.model, X, y, img_scores=onehot).top1 == 1.0
    with pytest.raises(ValueError):
        evaluate(ckpt.model, X, y, img_scores=np.ones((len(y), 4)))


def test_grid_search():
    ds = generate(MvMFSpec(n_classes=4, samples_per_class=30, seed=0))
    model = LocationClassifier(**SMALL)
    best, table = grid_search(ds, model, {"lr": [1e-2]})
    direct = train(ds, model, lr=1e-2)
    assert best.history == direct.history and len(table) == 1
    best, table = grid_search(ds, model, {"lr": [1e-12, 1e-2], "hidden_dim": [8, 16]})
    assert len(table) == 4
    assert best.model.lr == 1e-2
    assert [r["seed"] for r in table] == [0, 1, 2, 3]
    with pytest.raises(ValueError):
        grid_search(ds, model, {"dropout": [0.1]})


def test_grid_search_records_failures():
    ds = generate(MvMFSpec(n_classes=4, samples_per_class=30, seed=0))
    best, table = grid_search(ds, LocationClassifier(**SMALL), {"n_scales": [0, 2]})
    assert table[0]["error"] and table[0]["val_top1"] is None
    assert best is not None and best.model.n_scales == 2


@pytest.mark.slow
def test_oracle_bounds_trained_model():
    for seed in range(3):
        ds = generate(preset("U1", seed=seed))
        X, y, _ = ds.split("test")
        ckpt = train(ds, epochs=30)
        oracle = np.mean(ds.oracle_predict(X) == y)
        assert evaluate(ckpt.model, X, y).top1 <= oracle + 0.02
