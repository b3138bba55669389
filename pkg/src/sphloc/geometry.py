"""Spherical coordinates, Cartesian embedding and great-circle distance.

All angles are radians. Arrays of points use a trailing axis of length 2
holding ``(lon, lat)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

HALF_PI = 0.5 * math.pi
TWO_PI = 2.0 * math.pi


def wrap_lon(lon):
    """Map longitude(s) into [-pi, pi)."""
    out = np.mod(np.asarray(lon, dtype=float) + math.pi, TWO_PI) - math.pi
    # mod can round up to exactly pi for inputs a hair below -pi
    out = np.where(out >= math.pi, out - TWO_PI, out)
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class SphericalPoint:
    """A point on the unit sphere. Longitude is normalized on construction."""

    lon: float
    lat: float

    def __post_init__(self):
        lat = float(self.lat)
        if not (-HALF_PI <= lat <= HALF_PI):
            raise ValueError(f"latitude {lat!r} outside [-pi/2, pi/2]")
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", wrap_lon(float(self.lon)))

    @property
    def is_pole(self) -> bool:
        return abs(self.lat) == HALF_PI

    def __eq__(self, other):
        if not isinstance(other, SphericalPoint):
            return NotImplemented
        if self.lat != other.lat:
            return False
        return self.is_pole or self.lon == other.lon

    def __hash__(self):
        return hash((self.lat, None if self.is_pole else self.lon))

    def __array__(self, dtype=None, copy=None):
        return np.array([self.lon, self.lat], dtype=dtype or float)

    @classmethod
    def from_degrees(cls, lon: float, lat: float) -> "SphericalPoint":
        return cls(math.radians(lon), math.radians(lat))


def as_points(X) -> np.ndarray:
    """Coerce points to a float array with trailing (lon, lat) axis."""
    if isinstance(X, SphericalPoint):
        return np.array(X)
    arr = np.asarray(X, dtype=float)
    if arr.dtype == object or arr.shape[-1:] != (2,):
        arr = np.asarray([np.array(p) for p in X], dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError(f"expected trailing (lon, lat) axis, got shape {arr.shape}")
    return arr


def to_cartesian(X) -> np.ndarray:
    """Unit vectors ordered ``(z, x, y) = (sin lat, cos lat cos lon, cos lat sin lon)``."""
    pts = as_points(X)
    lon, lat = pts[..., 0], pts[..., 1]
    cos_lat = np.cos(lat)
    return np.stack([np.sin(lat), cos_lat * np.cos(lon), cos_lat * np.sin(lon)], axis=-1)


def from_cartesian(V) -> np.ndarray:
    """Inverse of :func:`to_cartesian` for ``(z, x, y)`` vectors of any norm."""
    V = np.asarray(V, dtype=float)
    z, x, y = V[..., 0], V[..., 1], V[..., 2]
    lat = np.arctan2(z, np.hypot(x, y))
    lon = wrap_lon(np.arctan2(y, x))
    return np.stack([np.broadcast_to(lon, lat.shape), lat], axis=-1)


def central_angle(X1, X2) -> np.ndarray:
    """Central angle between points, in [0, pi].

    Uses the atan2 (Vincenty) form on (lon, lat) directly, which stays
    accurate for both tiny and near-antipodal separations.
    """
    p1, p2 = as_points(X1), as_points(X2)
    lon1, lat1 = p1[..., 0], p1[..., 1]
    lon2, lat2 = p2[..., 0], p2[..., 1]
    dlon = lon2 - lon1
    s1, c1 = np.sin(lat1), np.cos(lat1)
    s2, c2 = np.sin(lat2), np.cos(lat2)
    cd = np.cos(dlon)
    num = np.hypot(c2 * np.sin(dlon), c1 * s2 - s1 * c2 * cd)
    den = s1 * s2 + c1 * c2 * cd
    out = np.arctan2(num, den)
    return out if np.ndim(out) else float(out)


def great_circle_distance(X1, X2, radius: float = 1.0):
    """Great-circle distance ``radius * central_angle``."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    return radius * central_angle(X1, X2)


def chord_distance(X1, X2):
    """Euclidean distance between unit-sphere embeddings."""
    d = np.linalg.norm(to_cartesian(X1) - to_cartesian(X2), axis=-1)
    return d if np.ndim(d) else float(d)


def same_point(X1, X2, atol: float = 0.0) -> np.ndarray:
    """Elementwise point equality that ignores longitude at the poles."""
    p1, p2 = as_points(X1), as_points(X2)
    same_lat = np.abs(p1[..., 1] - p2[..., 1]) <= atol
    at_pole = np.abs(np.abs(p1[..., 1]) - HALF_PI) <= atol
    dlon = np.abs(wrap_lon(p1[..., 0] - p2[..., 0]))
    return same_lat & (at_pole | (dlon <= atol))
