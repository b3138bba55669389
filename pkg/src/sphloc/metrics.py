"""Ranking metrics and latitude-band / lon-lat cell breakdowns."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_BAND_EDGES = np.radians(np.arange(-90, 91, 10))
DEFAULT_CELL_DEG = 15.0


def ranks_from_scores(scores, y):
    """1-based rank of the true class; ties count against the truth."""
    scores = np.asarray(scores, float)
    y = np.asarray(y)
    true = scores[np.arange(len(y)), y]
    return (scores >= true[:, None]).sum(axis=1)


def top_k(ranks, k):
    ranks = np.asarray(ranks)
    if ranks.size == 0:
        raise ValueError("top_k of empty rank list")
    if k < 1:
        raise ValueError("k must be >= 1")
    return float(np.mean(ranks <= k))


def mrr(ranks):
    ranks = np.asarray(ranks, float)
    if ranks.size == 0:
        raise ValueError("mrr of empty rank list")
    return float(np.mean(1.0 / ranks))


def _bin(values, edges):
    # internal edges go to the upper bin, the top edge to the last bin
    idx = np.searchsorted(edges, values, side="right") - 1
    return np.clip(idx, 0, len(edges) - 2)


def band_report(lat, ranks, edges=DEFAULT_BAND_EDGES):
    """Per latitude band: bounds, count and MRR (``None`` for empty bands)."""
    edges = np.asarray(edges, float)
    if np.any(np.diff(edges) <= 0):
        raise ValueError("band edges must be strictly increasing")
    lat = np.asarray(lat, float)
    ranks = np.asarray(ranks)
    idx = _bin(lat, edges)
    rows = []
    for b in range(len(edges) - 1):
        m = idx == b
        n = int(m.sum())
        rows.append(
            {
                "lat_lo": float(edges[b]),
                "lat_hi": float(edges[b + 1]),
                "n": n,
                "mrr": mrr(ranks[m]) if n else None,
            }
        )
    return rows


def cell_report(points, ranks, cell_deg=DEFAULT_CELL_DEG):
    """Per lon/lat cell of ``cell_deg`` degrees; only populated cells are listed."""
    points = np.asarray(points, float)
    ranks = np.asarray(ranks)
    lon_edges = np.radians(np.arange(-180.0, 180.0 + cell_deg / 2, cell_deg))
    lat_edges = np.radians(np.arange(-90.0, 90.0 + cell_deg / 2, cell_deg))
    i_lon = _bin(points[:, 0], lon_edges)
    i_lat = _bin(points[:, 1], lat_edges)
    rows = []
    for a in range(len(lat_edges) - 1):
        for b in range(len(lon_edges) - 1):
            m = (i_lat == a) & (i_lon == b)
            n = int(m.sum())
            if n:
                rows.append(
                    {
                        "lon_lo": float(lon_edges[b]),
                        "lon_hi": float(lon_edges[b + 1]),
                        "lat_lo": float(lat_edges[a]),
                        "lat_hi": float(lat_edges[a + 1]),
                        "n": n,
                        "mrr": mrr(ranks[m]),
                    }
                )
    return rows


@dataclass
class EvalReport:
    top_k: dict
    mrr: float
    n: int
    bands: list
    cells: list
    metadata: dict = field(default_factory=dict)

    @property
    def top1(self):
        return self.top_k[1]

    def to_dict(self):
        return {
            "top_k": {str(k): v for k, v in self.top_k.items()},
            "mrr": self.mrr,
            "n": self.n,
            "bands": self.bands,
            "cells": self.cells,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            top_k={int(k): v for k, v in d["top_k"].items()},
            mrr=d["mrr"],
            n=d["n"],
            bands=d["bands"],
            cells=d["cells"],
            metadata=d.get("metadata", {}),
        )


def build_report(points, ranks, ks=(1, 3, 5), band_edges=DEFAULT_BAND_EDGES,
                 cell_deg=DEFAULT_CELL_DEG, metadata=None):
    points = np.asarray(points, float)
    ranks = np.asarray(ranks)
    return EvalReport(
        top_k={k: top_k(ranks, k) for k in ks},
        mrr=mrr(ranks),
        n=len(ranks),
        bands=band_report(points[:, 1], ranks, band_edges),
        cells=cell_report(points, ranks, cell_deg),
        metadata=dict(metadata or {}),
    )


def _key(row):
    return tuple(row[k] for k in ("lon_lo", "lon_hi", "lat_lo", "lat_hi") if k in row)


def delta_report(report_a, report_b):
    """``MRR(a) - MRR(b)`` overall, per band and per cell.

    Bands must share bounds. Cells or bands empty in either report are left out.
    """
    bands_a = [_key(r) for r in report_a.bands]
    if bands_a != [_key(r) for r in report_b.bands]:
        raise ValueError("band partitions differ")
    bands = []
    for ra, rb in zip(report_a.bands, report_b.bands):
        if ra["mrr"] is None or rb["mrr"] is None:
            continue
        bands.append({**{k: ra[k] for k in ("lat_lo", "lat_hi", "n")},
                      "delta_mrr": ra["mrr"] - rb["mrr"]})
    cells_b = {_key(r): r for r in report_b.cells}
    cells = []
    for ra in report_a.cells:
        rb = cells_b.get(_key(ra))
        if rb is None:
            continue
        cells.append({**{k: ra[k] for k in ("lon_lo", "lon_hi", "lat_lo", "lat_hi", "n")},
                      "delta_mrr": ra["mrr"] - rb["mrr"]})
    return {"delta_mrr": report_a.mrr - report_b.mrr, "bands": bands, "cells": cells}


def error_rate_change(top1_model, top1_base):
    """Relative change in error rate, signed so a reduction is negative."""
    err_m, err_b = 1.0 - top1_model, 1.0 - top1_base
    if err_b == 0:
        return 0.0 if err_m == 0 else math.inf
    return (err_m - err_b) / err_b


def evaluate(model, X, y, point_ids=None, img_scores=None, metadata=None, **report_kw):
    """Rank classes for each point with a fitted model and assemble an :class:`EvalReport`.

    ``img_scores`` is an ``(n, n_classes)`` non-negative array aligned with
    ``X``; when given, ranking uses the product of location and image scores
    (computed in log space so saturated sigmoids do not create ties).
    """
    X = np.asarray(X, float)
    y = np.asarray(y)
    logits = model.decision_function(X)
    if logits.shape[1] <= (y.max() if len(y) else -1):
        raise ValueError("dataset has more classes than the model")
    if img_scores is None:
        ranking = logits
    else:
        img = np.asarray(img_scores, float)
        if img.shape != logits.shape:
            raise ValueError(f"image scores have shape {img.shape}, expected {logits.shape}")
        if np.any(img < 0):
            raise ValueError("image scores must be non-negative")
        with np.errstate(divide="ignore"):
            ranking = -np.logaddexp(0.0, -logits) + np.log(img)
    ranks = ranks_from_scores(ranking, y)
    meta = dict(metadata or {})
    meta["fused_with_image_scores"] = img_scores is not None
    return build_report(X, ranks, metadata=meta, **report_kw)
