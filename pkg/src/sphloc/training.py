"""Training entry points, hyperparameter sweeps and checkpoints."""

from __future__ import annotations

import json
import logging
import traceback
from dataclasses import dataclass, field
from pathlib import Path

from sklearn.base import clone
from sklearn.model_selection import ParameterGrid

from .estimator import LocationClassifier

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "sphloc-checkpoint"
CHECKPOINT_VERSION = 1
SEARCHABLE = {"lr", "n_scales", "r_min", "hidden_layers", "hidden_dim"}


@dataclass
class Checkpoint:
    model: LocationClassifier
    metadata: dict = field(default_factory=dict)

    @property
    def epoch(self):
        return self.model.best_epoch_

    @property
    def history(self):
        return self.model.history_

    @property
    def val_top1(self):
        return self.model.best_val_top1_

    def to_dict(self):
        d = {"format": CHECKPOINT_FORMAT, "format_version": CHECKPOINT_VERSION}
        d.update(self.model.to_dict())
        d["train_config"] = self.model.train_config().to_dict()
        d["metadata"] = self.metadata
        return d

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not a checkpoint document")
        if d.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {d.get('format_version')!r}")
        return cls(LocationClassifier.from_dict(d), d.get("metadata", {}))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def train(dataset, model=None, metadata=None, **params):
    """Fit on the train split, select on the val split, return a :class:`Checkpoint`.

    ``model`` is an unfitted :class:`LocationClassifier` (cloned, never
    mutated); extra keyword arguments override its parameters.
    """
    model = clone(model) if model is not None else LocationClassifier()
    params.setdefault("n_classes", dataset.n_classes)
    model.set_params(**params)
    X, y, _ = dataset.split("train")
    X_val, y_val, _ = dataset.split("val")
    eval_set = (X_val, y_val) if len(y_val) else None
    model.fit(X, y, eval_set=eval_set)
    return Checkpoint(model, dict(metadata or {}))


def grid_search(dataset, model=None, search_space=None, metadata=None):
    """Train every combination in ``search_space``; return ``(best, table)``.

    Cell ``i`` trains with ``random_state = base seed + i``. Failing cells are
    recorded in the table with their error and skipped. Ties on validation
    Top-1 keep the earlier cell.
    """
    model = model if model is not None else LocationClassifier()
    search_space = search_space or {}
    unknown = set(search_space) - SEARCHABLE
    if unknown:
        raise ValueError(f"cannot search over {sorted(unknown)}; allowed: {sorted(SEARCHABLE)}")
    base_seed = model.get_params()["random_state"] or 0
    best, table = None, []
    for i, cell in enumerate(ParameterGrid(search_space)):
        row = {"cell": i, **cell, "seed": base_seed + i}
        try:
            ckpt = train(dataset, model, metadata, random_state=base_seed + i, **cell)
        except Exception as exc:
            log.warning("grid cell %d failed: %s", i, exc)
            row.update(val_top1=None, epoch=None, error=f"{type(exc).__name__}: {exc}")
            log.debug(traceback.format_exc())
            table.append(row)
            continue
        row.update(val_top1=ckpt.val_top1, epoch=ckpt.epoch, error=None)
        table.append(row)
        score = ckpt.val_top1 if ckpt.val_top1 is not None else -1.0
        if best is None or score > (best.val_top1 if best.val_top1 is not None else -1.0):
            best = ckpt
    return best, table
