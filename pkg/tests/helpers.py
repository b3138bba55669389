"""Shared oracles for the test modules."""

import numpy as np

from sphloc.encoders import encode
from sphloc.nn import LocationNet
from sphloc.synth import sample_uniform_sphere


def tiny_problem(kind, seed=0, S=2, k=8, c=3, batch=4, n_negatives=1):
    """Tiny net (h=1, dropout off) plus one encoded batch with uniform negatives."""
    rng = np.random.default_rng(seed)
    X = sample_uniform_sphere(batch, rng)
    X_neg = sample_uniform_sphere(batch * n_negatives, rng)
    F = encode(X, "sphereM_plus", n_scales=S)
    F_neg = encode(X_neg, "sphereM_plus", n_scales=S)
    y = rng.integers(0, c, batch)
    net = LocationNet.init(F.shape[1], c, kind=kind, hidden_layers=1, hidden_dim=k, dropout=0.0, rng=rng)
    # nonzero biases so every code path carries signal
    for name, v in net.params.items():
        if v.ndim == 1:
            net.params[name] = rng.normal(0, 0.1, v.shape)
    return net, F, y, F_neg


def gradient_check(net, F, y, F_neg, beta, n_negatives=1, eps=1e-5):
    """Max over tensors of ``|g_analytic - g_fd| / max(|g_analytic|, |g_fd|)`` (norms)."""
    _, grads = net.loss_and_grad(F, y, F_neg, beta, n_negatives)
    worst = {}
    for name, p in net.params.items():
        fd = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = p[idx]
            p[idx] = old + eps
            lp, _ = net.loss_and_grad(F, y, F_neg, beta, n_negatives)
            p[idx] = old - eps
            lm, _ = net.loss_and_grad(F, y, F_neg, beta, n_negatives)
            p[idx] = old
            fd[idx] = (lp - lm) / (2 * eps)
        num = np.linalg.norm(grads[name] - fd)
        den = max(np.linalg.norm(grads[name]), np.linalg.norm(fd), 1e-12)
        worst[name] = num / den
    return worst


# acceptance lines collected during the run, printed by conftest
ACCEPTANCE = []


def record(criterion, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return passed
