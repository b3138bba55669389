"""Optimizers and the mini-batch training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .metrics import ranks_from_scores, top_k
from .nn import LossConfig
from .synth import sample_uniform_sphere

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    """Raised when the loss stops being finite."""

    def __init__(self, epoch, batch, loss):
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for k, g in grads.items():
            params[k] -= self.lr * g


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for k, g in grads.items():
            m = self.m.get(k)
            if m is None:
                m = self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            v = self.v[k]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 100
    batch_size: int = 512
    optimizer: str = "adam"
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    eval_every: int = 1

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1 or self.epochs < 1 or self.eval_every < 1:
            raise ValueError("batch_size, epochs and eval_every must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if isinstance(self.loss, dict):
            self.loss = LossConfig(**self.loss)

    def make_optimizer(self):
        if self.optimizer == "sgd":
            return SGD(self.lr)
        return Adam(self.lr, *self.adam_betas, eps=self.adam_eps)

    def to_dict(self):
        d = asdict(self)
        d["adam_betas"] = list(self.adam_betas)
        return d


def run_training(net, encode, F_train, y_train, F_val, y_val, config, rngs):
    """Optimize ``net`` in place; return ``(best_params, best_epoch, history)``.

    ``encode`` maps (lon, lat) negatives to features. ``rngs`` is a dict with
    ``shuffle``, ``negatives`` and ``dropout`` generators. The best epoch is
    the one with the highest validation Top-1 (earliest on ties); without
    validation data it is the last epoch.
    """
    opt = config.make_optimizer()
    beta = config.loss.resolved_beta(net.n_classes)
    n_neg = config.loss.n_negatives
    n = len(y_train)
    history = []
    best_top1 = -math.inf
    best_params = None
    best_epoch = 0
    has_val = F_val is not None and len(y_val) > 0
    for epoch in range(1, config.epochs + 1):
        perm = rngs["shuffle"].permutation(n)
        losses = []
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = perm[start : start + config.batch_size]
            neg = sample_uniform_sphere(len(idx) * n_neg, rngs["negatives"])
            loss, grads = net.loss_and_grad(
                F_train[idx], y_train[idx], encode(neg), beta, n_neg,
                train=True, rng=rngs["dropout"],
            )
            if not math.isfinite(loss):
                raise TrainingError(epoch, b, loss)
            opt.step(net.params, grads)
            losses.append(loss)
        if epoch % config.eval_every and epoch != config.epochs:
            continue
        row = {"epoch": epoch, "train_loss": float(np.mean(losses)), "val_top1": None}
        if has_val:
            row["val_top1"] = top_k(ranks_from_scores(net.logits(F_val), y_val), 1)
            if row["val_top1"] > best_top1:
                best_top1 = row["val_top1"]
                best_params = {k: v.copy() for k, v in net.params.items()}
                best_epoch = epoch
        history.append(row)
        log.debug("epoch %d loss %.5f val_top1 %s", epoch, row["train_loss"], row["val_top1"])
    if best_params is None:
        best_params = {k: v.copy() for k, v in net.params.items()}
        best_epoch = config.epochs
    return best_params, best_epoch, history
