"""scikit-learn style geographic prior classifier."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .encoders import PositionEncoder, canonical_family
from .nn import LocationNet, LossConfig, sigmoid
from .optim import TrainConfig, run_training
from .validation import check_labels, check_points

ENCODER_PARAMS = (
    "n_scales",
    "r_min",
    "r_max",
    "n_anchors",
    "sigma",
    "rbf_metric",
    "n_features",
    "bandwidth",
    "n_lon",
    "n_lat",
)


class LocationClassifier(ClassifierMixin, BaseEstimator):
    """Predict a class from a location alone: ``sigmoid(NN(PE(x)) @ T)``.

    ``X`` is ``(n, 2)`` (lon, lat) in radians; ``y`` holds integer class ids
    in ``[0, n_classes)``. Training maximizes the presence-only likelihood
    with uniformly drawn negative locations, using mini-batch Adam (or SGD).
    When ``fit`` gets an ``eval_set`` the parameters from the epoch with the
    best validation Top-1 are kept.

    Scores from :meth:`predict_scores` are independent per-class sigmoids;
    :meth:`predict_proba` renormalizes them to sum to one.
    """

    def __init__(
        self,
        encoder="sphereM_plus",
        n_scales=32,
        r_min=1e-2,
        r_max=1.0,
        n_anchors=200,
        sigma=1.0,
        rbf_metric="chord",
        n_features=256,
        bandwidth=1.0,
        n_lon=36,
        n_lat=18,
        network="ffn",
        hidden_layers=1,
        hidden_dim=256,
        embed_dim=None,
        dropout=0.5,
        lr=1e-3,
        epochs=100,
        batch_size=512,
        optimizer="adam",
        beta=None,
        n_negatives=1,
        eval_every=1,
        n_classes=None,
        random_state=0,
    ):
        self.encoder = encoder
        self.n_scales = n_scales
        self.r_min = r_min
        self.r_max = r_max
        self.n_anchors = n_anchors
        self.sigma = sigma
        self.rbf_metric = rbf_metric
        self.n_features = n_features
        self.bandwidth = bandwidth
        self.n_lon = n_lon
        self.n_lat = n_lat
        self.network = network
        self.hidden_layers = hidden_layers
        self.hidden_dim = hidden_dim
        self.embed_dim = embed_dim
        self.dropout = dropout
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.optimizer = optimizer
        self.beta = beta
        self.n_negatives = n_negatives
        self.eval_every = eval_every
        self.n_classes = n_classes
        self.random_state = random_state

    def train_config(self):
        return TrainConfig(
            lr=self.lr,
            epochs=self.epochs,
            batch_size=self.batch_size,
            optimizer=self.optimizer,
            seed=self.random_state,
            loss=LossConfig(beta=self.beta, n_negatives=self.n_negatives),
            eval_every=self.eval_every,
        )

    def _seeds(self):
        ss = np.random.SeedSequence(self.random_state)
        enc, init, shuffle, neg, drop = (np.random.default_rng(s) for s in ss.spawn(5))
        return enc, init, {"shuffle": shuffle, "negatives": neg, "dropout": drop}

    def fit(self, X, y, eval_set=None):
        X = check_points(X)
        y = check_labels(y, len(X))
        if len(X) == 0:
            raise ValueError("cannot fit on an empty training set")
        config = self.train_config()
        n_classes = self.n_classes or int(y.max()) + 1
        if y.max() >= n_classes:
            raise ValueError(f"label {y.max()} outside [0, {n_classes})")
        enc_rng, init_rng, rngs = self._seeds()

        family = canonical_family(self.encoder)
        enc_kw = {k: getattr(self, k) for k in ENCODER_PARAMS}
        enc_seed = int(enc_rng.integers(2**31))
        self.encoder_ = PositionEncoder(family=family, random_state=enc_seed, **enc_kw)
        self.encoder_.fit(X if family == "rbf" else None)

        self.net_ = LocationNet.init(
            self.encoder_.output_dim_,
            n_classes,
            kind=self.network,
            hidden_layers=self.hidden_layers,
            hidden_dim=self.hidden_dim,
            embed_dim=self.embed_dim,
            dropout=self.dropout,
            rng=init_rng,
        )
        F_val = y_val = None
        if eval_set is not None:
            X_val, y_val = eval_set
            X_val = check_points(X_val)
            y_val = check_labels(y_val, len(X_val))
            F_val = self.encoder_.encode(X_val)
        best, self.best_epoch_, self.history_ = run_training(
            self.net_, self.encoder_.encode, self.encoder_.encode(X), y,
            F_val, y_val, config, rngs,
        )
        self.net_.params = best
        self.classes_ = np.arange(n_classes)
        self.n_features_in_ = 2
        return self

    @property
    def best_val_top1_(self):
        vals = [h["val_top1"] for h in self.history_ if h["val_top1"] is not None]
        return max(vals) if vals else None

    def embed(self, X):
        """Eval-mode location embeddings ``NN(PE(x))``."""
        check_is_fitted(self, "net_")
        return self.net_.embed(self.encoder_.encode(check_points(X)))

    def decision_function(self, X):
        check_is_fitted(self, "net_")
        return self.net_.logits(self.encoder_.encode(check_points(X)))

    def predict_scores(self, X):
        return sigmoid(self.decision_function(X))

    def predict_proba(self, X):
        s = self.predict_scores(X)
        return s / s.sum(axis=1, keepdims=True)

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]

    def to_dict(self):
        check_is_fitted(self, "net_")
        return {
            "estimator_params": self.get_params(),
            "encoder": self.encoder_.to_dict(),
            "network": self.net_.to_dict(),
            "best_epoch": self.best_epoch_,
            "history": self.history_,
        }

    @classmethod
    def from_dict(cls, d):
        model = cls(**d["estimator_params"])
        model.encoder_ = PositionEncoder.from_dict(d["encoder"])
        model.net_ = LocationNet.from_dict(d["network"])
        model.best_epoch_ = d["best_epoch"]
        model.history_ = d["history"]
        model.classes_ = np.arange(model.net_.n_classes)
        model.n_features_in_ = 2
        return model


def forward_enc(encoder, net, X, train=False, rng=None):
    """``NN(PE(x))`` for a fitted :class:`PositionEncoder` and a :class:`LocationNet`."""
    return net.embed(encoder.encode(X), train=train, rng=rng)
