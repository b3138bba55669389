"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .geometry import HALF_PI, wrap_lon


def check_points(X, degrees: bool = False) -> np.ndarray:
    """Validate an ``(n, 2)`` array of (lon, lat); returns radians with wrapped lon.

    Raises ``ValueError`` on non-finite values, wrong shape, or latitudes
    outside [-pi/2, pi/2].
    """
    X = check_array(X, dtype=np.float64, ensure_2d=True, copy=True)
    if X.shape[1] != 2:
        raise ValueError(f"expected (n, 2) array of (lon, lat), got shape {X.shape}")
    if degrees:
        X = np.radians(X)
    lat = X[:, 1]
    # allow a couple of ulps of slack from degree conversion
    if np.any(np.abs(lat) > HALF_PI * (1 + 1e-15)):
        raise ValueError("latitude outside [-pi/2, pi/2]")
    X[:, 1] = np.clip(lat, -HALF_PI, HALF_PI)
    X[:, 0] = wrap_lon(X[:, 0])
    return X


def check_labels(y, n_samples: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != n_samples:
        raise ValueError("y must be 1-d and aligned with X")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise ValueError("class labels must be integers in [0, n_classes)")
        y = y.astype(int)
    if len(y) and y.min() < 0:
        raise ValueError("class labels must be non-negative")
    return y.astype(np.int64)
