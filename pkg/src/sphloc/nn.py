"""Location network ``Enc(x) = NN(PE(x))`` with a sigmoid class decoder.

Everything is plain numpy with hand-written backward passes. Parameters are
kept in flat ``dict[str, ndarray]`` so the optimizers and the checkpoint
writer can treat every network the same way. Weight matrices are stored
``(fan_in, fan_out)`` and applied to row batches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG_EPS = math.log(1e-12)


def glorot(rng, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _log_sigmoid(z):
    return -np.logaddexp(0.0, -z)


def _dropout_mask(rng, shape, rate):
    keep = 1.0 - rate
    return (rng.random(shape) < keep) / keep


def _relu(z):
    return np.maximum(z, 0.0)


@dataclass
class LossConfig:
    """``beta`` weights the positive term; ``n_negatives`` uniform points per datum.

    ``beta=None`` means "use the class count".
    """

    beta: float | None = None
    n_negatives: int = 1

    def __post_init__(self):
        if self.beta is not None and not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.n_negatives < 1:
            raise ValueError("n_negatives must be >= 1")

    def resolved_beta(self, n_classes: int) -> float:
        return float(n_classes if self.beta is None else self.beta)


class LocationNet:
    """Encoder network plus class-embedding matrix ``T`` (``embed_dim x n_classes``).

    ``kind="ffn"``: ``hidden_layers`` blocks of Linear, ReLU, dropout; the last
    block is ``embed_dim`` wide and its output is the location embedding.

    ``kind="residual"``: Linear+ReLU into ``hidden_dim``, ``hidden_layers``
    residual blocks (Linear, ReLU, dropout, Linear, ReLU, skip), then a
    linear projection to ``embed_dim``.
    """

    def __init__(self, kind, params, dropout=0.5):
        if kind not in ("ffn", "residual"):
            raise ValueError(f"unknown network kind {kind!r}")
        if not 0.0 <= dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        self.kind = kind
        self.params = params
        self.dropout = float(dropout)

    @classmethod
    def init(
        cls,
        input_dim,
        n_classes,
        kind="ffn",
        hidden_layers=1,
        hidden_dim=256,
        embed_dim=None,
        dropout=0.5,
        rng=None,
    ):
        rng = np.random.default_rng(rng)
        embed_dim = hidden_dim if embed_dim is None else embed_dim
        if hidden_layers < 1 and kind == "ffn":
            raise ValueError("ffn needs at least one hidden layer")
        p = {}
        if kind == "ffn":
            widths = [input_dim] + [hidden_dim] * (hidden_layers - 1) + [embed_dim]
            for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
                p[f"W{i}"] = glorot(rng, a, b)
                p[f"b{i}"] = np.zeros(b)
        else:
            p["W_in"] = glorot(rng, input_dim, hidden_dim)
            p["b_in"] = np.zeros(hidden_dim)
            for i in range(hidden_layers):
                for j in (1, 2):
                    p[f"R{i}_W{j}"] = glorot(rng, hidden_dim, hidden_dim)
                    p[f"R{i}_b{j}"] = np.zeros(hidden_dim)
            p["W_out"] = glorot(rng, hidden_dim, embed_dim)
            p["b_out"] = np.zeros(embed_dim)
        p["T"] = glorot(rng, embed_dim, n_classes)
        return cls(kind, p, dropout)

    @property
    def input_dim(self):
        return self.params["W0" if self.kind == "ffn" else "W_in"].shape[0]

    @property
    def n_classes(self):
        return self.params["T"].shape[1]

    @property
    def embed_dim(self):
        return self.params["T"].shape[0]

    def _n_blocks(self):
        if self.kind == "ffn":
            return sum(1 for k in self.params if k.startswith("W"))
        return sum(1 for k in self.params if k.endswith("_W1"))

    # forward / backward

    def embed(self, F, train=False, rng=None):
        """Location embedding for encoded features ``F`` of shape ``(n, input_dim)``."""
        return self._forward(F, train, rng)[0]

    def _forward(self, F, train, rng):
        F = np.asarray(F, dtype=float)
        if F.shape[-1] != self.input_dim:
            raise ValueError(
                f"feature dim {F.shape[-1]} does not match network input dim {self.input_dim}"
            )
        drop = train and self.dropout > 0
        if drop and rng is None:
            raise ValueError("training-mode dropout needs an rng")
        p = self.params
        cache = {"F": F}
        if self.kind == "ffn":
            h = F
            for i in range(self._n_blocks()):
                z = h @ p[f"W{i}"] + p[f"b{i}"]
                a = _relu(z)
                m = _dropout_mask(rng, a.shape, self.dropout) if drop else None
                cache[i] = (h, z, m)
                h = a * m if m is not None else a
            return h, cache
        z = F @ p["W_in"] + p["b_in"]
        x = _relu(z)
        cache["in"] = z
        for i in range(self._n_blocks()):
            z1 = x @ p[f"R{i}_W1"] + p[f"R{i}_b1"]
            a1 = _relu(z1)
            m = _dropout_mask(rng, a1.shape, self.dropout) if drop else None
            d1 = a1 * m if m is not None else a1
            z2 = d1 @ p[f"R{i}_W2"] + p[f"R{i}_b2"]
            cache[i] = (x, z1, m, d1, z2)
            x = x + _relu(z2)
        cache["out"] = x
        return x @ p["W_out"] + p["b_out"], cache

    def _backward(self, cache, d_emb):
        p = self.params
        g = {}
        if self.kind == "ffn":
            dh = d_emb
            for i in reversed(range(self._n_blocks())):
                h_in, z, m = cache[i]
                if m is not None:
                    dh = dh * m
                dz = dh * (z > 0)
                g[f"W{i}"] = h_in.T @ dz
                g[f"b{i}"] = dz.sum(axis=0)
                dh = dz @ p[f"W{i}"].T
            return g
        x_out = cache["out"]
        g["W_out"] = x_out.T @ d_emb
        g["b_out"] = d_emb.sum(axis=0)
        dx = d_emb @ p["W_out"].T
        for i in reversed(range(self._n_blocks())):
            x_in, z1, m, d1, z2 = cache[i]
            dz2 = dx * (z2 > 0)
            g[f"R{i}_W2"] = d1.T @ dz2
            g[f"R{i}_b2"] = dz2.sum(axis=0)
            dd1 = dz2 @ p[f"R{i}_W2"].T
            if m is not None:
                dd1 = dd1 * m
            dz1 = dd1 * (z1 > 0)
            g[f"R{i}_W1"] = x_in.T @ dz1
            g[f"R{i}_b1"] = dz1.sum(axis=0)
            dx = dx + dz1 @ p[f"R{i}_W1"].T
        dz = dx * (cache["in"] > 0)
        g["W_in"] = cache["F"].T @ dz
        g["b_in"] = dz.sum(axis=0)
        return g

    # decoder

    def logits(self, F):
        return self.embed(F) @ self.params["T"]

    def scores(self, F):
        """Independent per-class sigmoid scores in eval mode."""
        return sigmoid(self.logits(F))

    def loss_and_grad(self, F_pos, y, F_neg, beta, n_negatives=1, train=False, rng=None):
        """Negative log-likelihood averaged over the batch, and its gradients.

        ``F_neg`` holds ``n_negatives`` rows per positive, grouped by datum.
        For each datum and each of its negatives the positive term, the
        in-sample negative terms and the uniform negative term are summed, so
        the first two are counted ``n_negatives`` times.
        """
        y = np.asarray(y)
        B = len(y)
        if B == 0:
            raise ValueError("empty batch")
        if len(F_neg) != B * n_negatives:
            raise ValueError("need n_negatives uniform points per datum")
        T = self.params["T"]
        F_all = np.concatenate([np.asarray(F_pos, float), np.asarray(F_neg, float)], axis=0)
        emb, cache = self._forward(F_all, train, rng)
        s = emb @ T
        s_pos, s_neg = s[:B], s[B:]
        rows = np.arange(B)

        pos_mask = np.zeros_like(s_pos, dtype=bool)
        pos_mask[rows, y] = True

        # log sigma(s) and log(1 - sigma(s)) = log sigma(-s), clamped at log(1e-12)
        ls_true = _log_sigmoid(s_pos[rows, y])
        lneg_pos = _log_sigmoid(-s_pos)
        lneg_neg = _log_sigmoid(-s_neg)
        ls_true_c = np.maximum(ls_true, LOG_EPS)
        lneg_pos_c = np.maximum(lneg_pos, LOG_EPS)
        lneg_neg_c = np.maximum(lneg_neg, LOG_EPS)

        pos_part = beta * ls_true_c + np.where(pos_mask, 0.0, lneg_pos_c).sum(axis=1)
        total = n_negatives * pos_part.sum() + lneg_neg_c.sum()
        loss = -total / B

        sig_pos = sigmoid(s_pos)
        d_pos = np.where(lneg_pos > LOG_EPS, sig_pos, 0.0)
        d_pos[pos_mask] = 0.0
        d_true = np.where(ls_true > LOG_EPS, -beta * (1.0 - sig_pos[rows, y]), 0.0)
        d_pos[rows, y] = d_true
        d_pos *= n_negatives
        d_neg = np.where(lneg_neg > LOG_EPS, sigmoid(s_neg), 0.0)
        ds = np.concatenate([d_pos, d_neg], axis=0) / B

        grads = {"T": emb.T @ ds}
        grads.update(self._backward(cache, ds @ T.T))
        return float(loss), grads

    def copy(self):
        return LocationNet(self.kind, {k: v.copy() for k, v in self.params.items()}, self.dropout)

    def to_dict(self):
        return {
            "kind": self.kind,
            "dropout": self.dropout,
            "params": {k: v.tolist() for k, v in self.params.items()},
        }

    @classmethod
    def from_dict(cls, d):
        params = {k: np.asarray(v, dtype=float) for k, v in d["params"].items()}
        return cls(d["kind"], params, d["dropout"])


def class_scores(emb, T):
    """Sigmoid of ``emb @ T``; not normalized across classes."""
    return sigmoid(np.asarray(emb, float) @ np.asarray(T, float))


def fuse(loc_scores, img_scores):
    """Combine location and image class scores by elementwise product."""
    loc = np.asarray(loc_scores, float)
    img = np.asarray(img_scores, float)
    if loc.shape != img.shape:
        raise ValueError(f"score shapes differ: {loc.shape} vs {img.shape}")
    if np.any(loc < 0) or np.any(img < 0):
        raise ValueError("scores must be non-negative")
    return loc * img
