"""Position encoders mapping (lon, lat) points to fixed-length feature vectors.

Every family function takes points with a trailing ``(lon, lat)`` axis and
returns features with a trailing feature axis. Feature order is scale-major,
with terms inside each scale in the order they are written below; the
checkpoint format relies on this order being stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .geometry import as_points, to_cartesian
from .validation import check_points

FAMILIES = (
    "tile",
    "wrap",
    "xyz",
    "rbf",
    "rff",
    "grid",
    "theory",
    "nerf",
    "dfs",
    "sphereC",
    "sphereM",
    "sphereC_plus",
    "sphereM_plus",
)
MULTISCALE = ("grid", "theory", "dfs", "sphereC", "sphereM", "sphereC_plus", "sphereM_plus")
SPHERE_FAMILIES = ("dfs", "sphereC", "sphereC_plus", "sphereM", "sphereM_plus")

_ALIASES = {
    "sphereC+": "sphereC_plus",
    "sphereM+": "sphereM_plus",
    "NeRF": "nerf",
}

# Dimensions as listed in the original dimension table. The "+" variants there
# count fewer terms than the concatenation actually produces.
TABLE_DIMS = {
    "sphereC": lambda S: 3 * S,
    "sphereC_plus": lambda S: 6 * S,
    "sphereM": lambda S: 5 * S,
    "sphereM_plus": lambda S: 8 * S,
    "dfs": lambda S: 4 * S * S + 4 * S,
}

_THEORY_DIRS = np.array(
    [[1.0, 0.0], [-0.5, math.sqrt(3) / 2], [-0.5, -math.sqrt(3) / 2]]
)


def canonical_family(name: str) -> str:
    family = _ALIASES.get(name, name)
    if family not in FAMILIES:
        raise ValueError(f"unknown encoder family {name!r}; choose from {FAMILIES}")
    return family


@dataclass(frozen=True)
class ScaleSchedule:
    """Geometric scale factors ``r_min * (r_max / r_min) ** (s / (S - 1))``.

    With a single scale the only factor is ``r_max``.
    """

    n_scales: int = 32
    r_min: float = 1e-2
    r_max: float = 1.0

    def __post_init__(self):
        if int(self.n_scales) != self.n_scales or self.n_scales < 1:
            raise ValueError("n_scales must be a positive integer")
        if not (0 < self.r_min <= self.r_max):
            raise ValueError("need 0 < r_min <= r_max")
        object.__setattr__(self, "n_scales", int(self.n_scales))

    @property
    def factors(self) -> np.ndarray:
        S = self.n_scales
        if S == 1:
            return np.array([float(self.r_max)])
        g = self.r_max / self.r_min
        return self.r_min * g ** (np.arange(S) / (S - 1))


def _scaled(X, schedule: ScaleSchedule):
    pts = as_points(X)
    r = schedule.factors
    lon = pts[..., 0, None] / r
    lat = pts[..., 1, None] / r
    return pts, lon, lat


def _interleave(*terms):
    # terms: each (..., S); result (..., S * len(terms)), scale-major
    stacked = np.stack(terms, axis=-1)
    return stacked.reshape(*stacked.shape[:-2], -1)


def encode_grid(X, schedule: ScaleSchedule) -> np.ndarray:
    _, lon, lat = _scaled(X, schedule)
    return _interleave(np.sin(lat), np.cos(lat), np.sin(lon), np.cos(lon))


def encode_theory(X, schedule: ScaleSchedule) -> np.ndarray:
    _, lon, lat = _scaled(X, schedule)
    terms = []
    for a_lon, a_lat in _THEORY_DIRS:
        proj = lon * a_lon + lat * a_lat
        terms += [np.sin(proj), np.cos(proj)]
    return _interleave(*terms)


def encode_sphereC(X, schedule: ScaleSchedule) -> np.ndarray:
    _, lon, lat = _scaled(X, schedule)
    cos_lat = np.cos(lat)
    return _interleave(np.sin(lat), cos_lat * np.cos(lon), cos_lat * np.sin(lon))


def encode_sphereM(X, schedule: ScaleSchedule) -> np.ndarray:
    pts, lon, lat = _scaled(X, schedule)
    lon0, lat0 = pts[..., 0, None], pts[..., 1, None]
    cos_lat_s = np.cos(lat)
    cos_lat0 = np.cos(lat0)
    return _interleave(
        np.sin(lat),
        cos_lat_s * np.cos(lon0),
        cos_lat0 * np.cos(lon),
        cos_lat_s * np.sin(lon0),
        cos_lat0 * np.sin(lon),
    )


def encode_sphereC_plus(X, schedule: ScaleSchedule) -> np.ndarray:
    return np.concatenate([encode_sphereC(X, schedule), encode_grid(X, schedule)], axis=-1)


def encode_sphereM_plus(X, schedule: ScaleSchedule) -> np.ndarray:
    return np.concatenate([encode_sphereM(X, schedule), encode_grid(X, schedule)], axis=-1)


def encode_dfs(X, schedule: ScaleSchedule) -> np.ndarray:
    """Lat singles, lon singles, then all S*S lat/lon products (lat scale major)."""
    _, lon, lat = _scaled(X, schedule)
    s_lat, c_lat = np.sin(lat), np.cos(lat)
    s_lon, c_lon = np.sin(lon), np.cos(lon)
    lat_single = _interleave(s_lat, c_lat)
    lon_single = _interleave(s_lon, c_lon)
    inter = np.stack(
        [
            c_lat[..., :, None] * c_lon[..., None, :],
            c_lat[..., :, None] * s_lon[..., None, :],
            s_lat[..., :, None] * c_lon[..., None, :],
            s_lat[..., :, None] * s_lon[..., None, :],
        ],
        axis=-1,
    )
    inter = inter.reshape(*inter.shape[:-3], -1)
    return np.concatenate([lat_single, lon_single, inter], axis=-1)


def encode_xyz(X) -> np.ndarray:
    return to_cartesian(X)


def encode_wrap(X) -> np.ndarray:
    pts = as_points(X)
    lon, lat = pts[..., 0], pts[..., 1]
    return np.stack([np.sin(lon), np.cos(lon), np.sin(2 * lat), np.cos(2 * lat)], axis=-1)


def encode_nerf(X, n_scales: int) -> np.ndarray:
    """Fixed frequencies ``2**s * pi`` applied to each of z, x, y."""
    xyz = to_cartesian(X)
    freqs = math.pi * 2.0 ** np.arange(n_scales)
    # (..., S, 3)
    ang = freqs[:, None] * xyz[..., None, :]
    out = np.stack([np.sin(ang), np.cos(ang)], axis=-1)
    return out.reshape(*out.shape[:-3], -1)


def encode_rbf(X, anchors, sigma: float, metric: str = "chord") -> np.ndarray:
    if sigma <= 0:
        raise ValueError("rbf bandwidth sigma must be positive")
    anchors = as_points(anchors)
    if anchors.ndim != 2 or len(anchors) == 0:
        raise ValueError("rbf needs at least one anchor")
    pts = as_points(X)
    if metric == "chord":
        a, b = to_cartesian(pts), to_cartesian(anchors)
    elif metric == "lonlat":
        a, b = pts, anchors
    else:
        raise ValueError(f"unknown rbf metric {metric!r}")
    sq = np.sum((a[..., None, :] - b) ** 2, axis=-1)
    return np.exp(-sq / (2.0 * sigma**2))


def encode_rff(X, omega, offsets) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    D = len(offsets)
    return math.sqrt(2.0 / D) * np.cos(as_points(X) @ omega.T + offsets)


def tile_index(X, n_lon: int, n_lat: int) -> np.ndarray:
    """Row-major (latitude row, longitude column) cell id of each point."""
    if n_lon < 1 or n_lat < 1:
        raise ValueError("tile grid needs at least one cell per axis")
    pts = as_points(X)
    i_lon = np.floor((pts[..., 0] + math.pi) / (2 * math.pi) * n_lon).astype(int)
    i_lat = np.floor((pts[..., 1] + math.pi / 2) / math.pi * n_lat).astype(int)
    i_lon = np.clip(i_lon, 0, n_lon - 1)
    i_lat = np.clip(i_lat, 0, n_lat - 1)
    out = i_lat * n_lon + i_lon
    return out if out.ndim else int(out)


def encode_tile(X, n_lon: int, n_lat: int) -> np.ndarray:
    idx = np.asarray(tile_index(X, n_lon, n_lat))
    return np.eye(n_lon * n_lat)[idx]


_SCHEDULED = {
    "grid": encode_grid,
    "theory": encode_theory,
    "dfs": encode_dfs,
    "sphereC": encode_sphereC,
    "sphereM": encode_sphereM,
    "sphereC_plus": encode_sphereC_plus,
    "sphereM_plus": encode_sphereM_plus,
}


class PositionEncoder(TransformerMixin, BaseEstimator):
    """Position encoder for points on the sphere.

    ``X`` is an ``(n, 2)`` array of ``(lon, lat)`` radians. Only ``rbf``
    (anchors sampled from ``X``) and ``rff`` (random projections) learn
    anything in :meth:`fit`; for the other families fitting just validates
    the parameters and ``X`` may be omitted.

    Parameters
    ----------
    family : str
        One of :data:`FAMILIES` (``"sphereC+"`` style aliases accepted).
    n_scales, r_min, r_max : scale schedule for the multi-scale families.
        ``nerf`` uses ``n_scales`` with fixed frequencies ``2**s * pi``.
    n_anchors, sigma, rbf_metric : rbf anchor count, kernel width and
        distance (``"chord"`` on the unit sphere or raw ``"lonlat"``).
    n_features, bandwidth : rff output size and Gaussian-kernel bandwidth.
    n_lon, n_lat : tile grid resolution.
    random_state : seed for rbf/rff draws.
    """

    def __init__(
        self,
        family="sphereC",
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
        random_state=None,
    ):
        self.family = family
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
        self.random_state = random_state

    def fit(self, X=None, y=None):
        family = canonical_family(self.family)
        self.family_ = family
        self.schedule_ = ScaleSchedule(self.n_scales, self.r_min, self.r_max)
        rng = np.random.default_rng(self.random_state)
        if family == "rbf":
            if self.n_anchors <= 0:
                raise ValueError("rbf needs n_anchors > 0")
            if self.sigma <= 0:
                raise ValueError("rbf needs sigma > 0")
            if X is None:
                raise ValueError("rbf anchors are sampled from X; pass training points")
            pts = check_points(X)
            replace = len(pts) < self.n_anchors
            idx = rng.choice(len(pts), size=self.n_anchors, replace=replace)
            self.anchors_ = pts[np.sort(idx)]
        elif family == "rff":
            if self.n_features <= 0 or self.bandwidth <= 0:
                raise ValueError("rff needs n_features > 0 and bandwidth > 0")
            self.omega_ = rng.normal(0.0, 1.0 / self.bandwidth, size=(self.n_features, 2))
            self.offsets_ = rng.uniform(0.0, 2 * math.pi, size=self.n_features)
        elif family == "tile" and (self.n_lon < 1 or self.n_lat < 1):
            raise ValueError("tile needs n_lon, n_lat >= 1")
        self.output_dim_ = output_dim(family, self.n_scales, self._extra_dims())
        self.n_features_in_ = 2
        return self

    def _extra_dims(self):
        return {
            "rbf": self.n_anchors,
            "rff": self.n_features,
            "tile": self.n_lon * self.n_lat,
        }

    def encode(self, X) -> np.ndarray:
        """Encode without input validation; accepts a single point or any batch shape."""
        check_is_fitted(self, "output_dim_")
        family = self.family_
        if family in _SCHEDULED:
            return _SCHEDULED[family](X, self.schedule_)
        if family == "xyz":
            return encode_xyz(X)
        if family == "wrap":
            return encode_wrap(X)
        if family == "nerf":
            return encode_nerf(X, self.schedule_.n_scales)
        if family == "rbf":
            return encode_rbf(X, self.anchors_, self.sigma, self.rbf_metric)
        if family == "rff":
            return encode_rff(X, self.omega_, self.offsets_)
        return encode_tile(X, self.n_lon, self.n_lat)

    def transform(self, X):
        check_is_fitted(self, "output_dim_")
        return self.encode(check_points(X))

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "output_dim_")
        return np.array([f"{self.family_}_{i}" for i in range(self.output_dim_)], dtype=object)

    def to_dict(self) -> dict:
        check_is_fitted(self, "output_dim_")
        d = {"params": self.get_params(), "family": self.family_}
        if self.family_ == "rbf":
            d["anchors"] = self.anchors_.tolist()
        if self.family_ == "rff":
            d["omega"] = self.omega_.tolist()
            d["offsets"] = self.offsets_.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PositionEncoder":
        enc = cls(**d["params"])
        family = canonical_family(enc.family)
        # rbf/rff state is restored, not redrawn
        if family == "rbf":
            enc.fit(np.asarray(d["anchors"]))
            enc.anchors_ = np.asarray(d["anchors"], dtype=float)
        else:
            enc.fit()
        if family == "rff":
            enc.omega_ = np.asarray(d["omega"], dtype=float)
            enc.offsets_ = np.asarray(d["offsets"], dtype=float)
        return enc


def output_dim(family: str, n_scales: int = 1, extra: dict | None = None) -> int:
    """Feature length produced by a family; rbf/rff/tile sizes come from ``extra``."""
    family = canonical_family(family)
    S = n_scales
    fixed = {
        "sphereC": 3 * S,
        "sphereC_plus": 7 * S,
        "sphereM": 5 * S,
        "sphereM_plus": 9 * S,
        "dfs": 4 * S * S + 4 * S,
        "grid": 4 * S,
        "theory": 6 * S,
        "nerf": 6 * S,
        "wrap": 4,
        "xyz": 3,
    }
    if family in fixed:
        return fixed[family]
    extra = extra or {}
    return int(extra[family])


def encode(X, family: str = "sphereC", **params) -> np.ndarray:
    """One-shot helper: build a :class:`PositionEncoder`, fit it, encode ``X``."""
    enc = PositionEncoder(family=family, **params)
    enc.fit(X if canonical_family(family) == "rbf" else None)
    return enc.encode(X)
