"""File formats: dataset CSV + provenance JSON, image-score CSV, tables.

CSV outputs start with a ``#`` comment line carrying the format name,
version and the command flags that produced the file. Readers skip
comment lines.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .synth import Dataset, MvMFSpec

DATASET_FORMAT = "sphloc-dataset/1"
DATASET_HEADER = ["point_id", "lon_rad", "lat_rad", "class_id", "split"]


def _header_line(fmt, flags=None):
    meta = {"format": fmt}
    if flags:
        meta["flags"] = flags
    return "# " + json.dumps(meta, sort_keys=True) + "\n"


def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temp file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _rows(path):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.reader(lines))


def table_csv(rows, columns=None, fmt="sphloc-table/1", flags=None):
    """Render dict rows to CSV text with the comment header."""
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    buf = io.StringIO()
    buf.write(_header_line(fmt, flags))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if r.get(c) is None else _fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def dataset_csv(ds: Dataset, flags=None) -> str:
    buf = io.StringIO()
    buf.write(_header_line(DATASET_FORMAT, flags))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DATASET_HEADER)
    for pid, (lon, lat), c, s in zip(ds.point_ids, ds.points, ds.labels, ds.splits):
        w.writerow([int(pid), repr(float(lon)), repr(float(lat)), int(c), s])
    return buf.getvalue()


def provenance_json(ds: Dataset, flags=None) -> str:
    d = {"format": "sphloc-provenance/1", **ds.provenance()}
    if flags:
        d["flags"] = flags
    return json.dumps(d, indent=1, sort_keys=True) + "\n"


def write_dataset(ds: Dataset, path, flags=None):
    """Write ``path`` (CSV) and ``path`` with ``.json`` suffix (provenance)."""
    path = Path(path)
    csv_text = dataset_csv(ds, flags)
    prov_text = provenance_json(ds, flags)
    atomic_write(path, csv_text)
    atomic_write(provenance_path(path), prov_text)


def provenance_path(path):
    return Path(path).with_suffix(".json")


def read_dataset(path, degrees=False) -> Dataset:
    """Load a dataset CSV; picks up the provenance sidecar when present."""
    path = Path(path)
    rows = _rows(path)
    if not rows or rows[0] != DATASET_HEADER:
        raise ValueError(f"{path}: expected header {','.join(DATASET_HEADER)}")
    body = rows[1:]
    ids = np.array([int(r[0]) for r in body], dtype=np.int64)
    pts = np.array([[float(r[1]), float(r[2])] for r in body], dtype=float).reshape(-1, 2)
    if degrees:
        pts = np.radians(pts)
    labels = np.array([int(r[3]) for r in body], dtype=np.int64)
    splits = np.array([r[4] for r in body])
    spec = centers = kappas = None
    prov = provenance_path(path)
    if prov.exists():
        d = json.loads(prov.read_text())
        centers = np.asarray(d["centers_lonlat"], float)
        kappas = np.asarray(d["kappas"], float)
        if "spec" in d:
            s = dict(d["spec"])
            s["split_fractions"] = tuple(s["split_fractions"])
            spec = MvMFSpec(**s)
    return Dataset(pts, labels, splits, spec, centers, kappas, ids)


def read_img_scores(path, point_ids, n_classes):
    """Load ``point_id,score_0,...`` rows and align them to ``point_ids``."""
    rows = _rows(path)
    if not rows:
        raise ValueError(f"{path}: empty image-score file")
    header, body = rows[0], rows[1:]
    expected = ["point_id"] + [f"score_{i}" for i in range(n_classes)]
    if header != expected:
        raise ValueError(
            f"{path}: header has {len(header) - 1} score columns, model has {n_classes} classes"
        )
    table = {}
    for r in body:
        table[int(r[0])] = [float(v) for v in r[1:]]
    missing = [int(p) for p in point_ids if int(p) not in table]
    if missing:
        raise ValueError(f"{path}: no image scores for point ids {missing[:5]}...")
    return np.array([table[int(p)] for p in point_ids], dtype=float)
