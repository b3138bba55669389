"""Desk-scale comparison of encoders on the synthetic mixture presets."""

from __future__ import annotations

import logging

import numpy as np

from .estimator import LocationClassifier
from .metrics import error_rate_change, evaluate
from .synth import PRESETS, generate, preset
from .training import train

log = logging.getLogger(__name__)

DEFAULT_DATASETS = tuple(["U1", "U2", "U3", "U4"] + [f"S{j}.{i}" for j in range(1, 5) for i in range(1, 5)])
DEFAULT_ENCODERS = ("xyz", "wrap", "wrap_ffn", "rff", "rbf", "grid", "theory", "nerf", "sphereM_plus")

# bench name -> (encoder family, network kind)
MODELS = {
    "wrap": ("wrap", "residual"),
    "wrap_ffn": ("wrap", "ffn"),
}


def model_for(name, **overrides):
    family, network = MODELS.get(name, (name, "ffn"))
    return LocationClassifier(encoder=family, network=network, **overrides)


def run_cell(dataset_name, encoder, seed, **overrides):
    """Test Top-1 of one (dataset preset, encoder, seed) run."""
    ds = generate(preset(dataset_name, seed=seed))
    ckpt = train(ds, model_for(encoder, **overrides), random_state=seed)
    X, y, _ = ds.split("test")
    return evaluate(ckpt.model, X, y).top1


def run_bench(datasets=DEFAULT_DATASETS, encoders=DEFAULT_ENCODERS, seeds=(0, 1, 2),
              model="sphereM_plus", progress=None, **overrides):
    """Mean/std test Top-1 per (dataset, encoder) plus the model's gain over the best baseline.

    ``delta_top1`` and ``er`` (relative error change, negative when the
    model reduces error) are filled on the ``model`` row of each dataset.
    A failing run is logged and counted in ``n_failed``; the suite keeps going.
    """
    for name in datasets:
        if name not in PRESETS:
            raise ValueError(f"unknown dataset preset {name!r}")
    rows = []
    for name in datasets:
        block = []
        for enc in encoders:
            scores, failed = [], 0
            for seed in seeds:
                try:
                    scores.append(run_cell(name, enc, seed, **overrides))
                except Exception as exc:
                    log.warning("%s/%s seed %s failed: %s", name, enc, seed, exc)
                    failed += 1
                if progress:
                    progress(name, enc, seed, scores[-1] if scores else None)
            block.append(
                {
                    "dataset": name,
                    "encoder": enc,
                    "n_ok": len(scores),
                    "n_failed": failed,
                    "mean_top1": float(np.mean(scores)) if scores else None,
                    "std_top1": float(np.std(scores)) if scores else None,
                    "seeds": " ".join(str(s) for s in seeds),
                    "best_baseline": None,
                    "delta_top1": None,
                    "er": None,
                }
            )
        _fill_deltas(block, model)
        rows.extend(block)
    return rows


def _fill_deltas(block, model):
    target = next((r for r in block if r["encoder"] == model), None)
    baselines = [r for r in block if r["encoder"] != model and r["mean_top1"] is not None]
    if target is None or target["mean_top1"] is None:
        return
    if not baselines:
        # nothing to compare against: report the model against itself
        baselines = [target]
    best = max(baselines, key=lambda r: r["mean_top1"])
    target["best_baseline"] = best["encoder"]
    target["delta_top1"] = target["mean_top1"] - best["mean_top1"]
    target["er"] = error_rate_change(target["mean_top1"], best["mean_top1"])
