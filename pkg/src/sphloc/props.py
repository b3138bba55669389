"""Numerical checks of the distance and injectivity properties of the encoders.

Each check returns a :class:`PropertyResult`; :func:`run_all` bundles them
into a JSON-ready report. Checks are deterministic for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .encoders import (
    SPHERE_FAMILIES,
    ScaleSchedule,
    encode_grid,
    encode_nerf,
    encode_sphereC,
    encode,
)
from .geometry import HALF_PI, central_angle, same_point, to_cartesian
from .synth import sample_uniform_sphere

CLOSED_FORM_TOL = 1e-9
EXACT_TOL = 1e-12
REPORT_FORMAT = "sphloc-props"
REPORT_VERSION = 1


@dataclass
class PropertyResult:
    property_id: str
    n_trials: int
    max_error: float
    tolerance: float
    passed: bool
    seed: int | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _result(pid, n, err, tol, seed, passed=None, **details):
    err = float(err)
    ok = err <= tol if passed is None else bool(passed)
    return PropertyResult(pid, int(n), err, tol, ok, seed, details)


def _random_pairs(n, rng):
    return sample_uniform_sphere(n, rng), sample_uniform_sphere(n, rng)


def _near_pairs(n, rng, max_angle=1e-3):
    """Pairs separated by a random angle below ``max_angle``."""
    p1 = sample_uniform_sphere(n, rng)
    v = to_cartesian(p1)
    tangent = rng.normal(size=v.shape)
    tangent -= np.sum(tangent * v, axis=1, keepdims=True) * v
    tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
    ang = rng.uniform(0, max_angle, n)
    v2 = np.cos(ang)[:, None] * v + np.sin(ang)[:, None] * tangent
    lat = np.arctan2(v2[:, 0], np.hypot(v2[:, 1], v2[:, 2]))
    lon = np.arctan2(v2[:, 2], v2[:, 1])
    return p1, np.stack([lon, lat], axis=1)


def check_sphereC_distance(n=10_000, seed=0, radius=1.0):
    """Single-scale sphereC: inner product is cos of the central angle,
    distance is the chord ``2 sin(angle / 2)``, and tends to the angle itself."""
    rng = np.random.default_rng(seed)
    sched = ScaleSchedule(1, 1.0, 1.0)
    p1, p2 = _random_pairs(n, rng)
    e1, e2 = encode_sphereC(p1, sched), encode_sphereC(p2, sched)
    dd = radius * central_angle(p1, p2)
    dot_err = np.abs(np.sum(e1 * e2, axis=1) - np.cos(dd / radius))
    dist_err = np.abs(np.linalg.norm(e1 - e2, axis=1) - 2 * np.sin(dd / (2 * radius)))

    q1, q2 = _near_pairs(max(n // 10, 1), rng)
    f1, f2 = encode_sphereC(q1, sched), encode_sphereC(q2, sched)
    ang = central_angle(q1, q2)
    small_err = np.abs(np.linalg.norm(f1 - f2, axis=1) - ang)
    err = max(dot_err.max(), dist_err.max(), small_err.max())
    return _result(
        "sphereC_distance_identity", n, err, CLOSED_FORM_TOL, seed,
        max_dot_error=float(dot_err.max()),
        max_distance_error=float(dist_err.max()),
        max_small_angle_error=float(small_err.max()),
    )


def check_injectivity(n=10_000, seed=0, families=SPHERE_FAMILIES, n_scales=8, r_min=1e-2):
    """No collisions among distinct points for the spherical families.

    Half the pairs are uniform, half are close (separation below 1e-3) to
    probe the neighbourhood where collisions would be hardest to see.
    Reported error is ``EXACT_TOL`` minus the smallest encoding distance,
    floored at zero, so passing means every distance exceeded the tolerance.
    """
    rng = np.random.default_rng(seed)
    a1, a2 = _random_pairs(n - n // 2, rng)
    b1, b2 = _near_pairs(n // 2, rng)
    p1, p2 = np.concatenate([a1, b1]), np.concatenate([a2, b2])
    distinct = ~same_point(p1, p2)
    p1, p2 = p1[distinct], p2[distinct]
    min_dist = {}
    for fam in families:
        kw = dict(n_scales=n_scales, r_min=r_min, r_max=1.0)
        d = np.linalg.norm(encode(p1, fam, **kw) - encode(p2, fam, **kw), axis=1)
        min_dist[fam] = float(d.min())
    worst = min(min_dist.values())
    # single-scale sphereC/sphereM ignore longitude at a pole; dfs and the
    # grid-augmented variants keep raw longitude terms and do not
    pole_gap = 0.0
    for fam in ("sphereC", "sphereM"):
        for lat in (HALF_PI, -HALF_PI):
            e = encode(np.array([[0.3, lat], [-2.1, lat]]), fam, n_scales=1, r_min=1.0, r_max=1.0)
            pole_gap = max(pole_gap, float(np.linalg.norm(e[0] - e[1])))
    ok = worst > EXACT_TOL and pole_gap <= EXACT_TOL
    return _result(
        "sphere_family_injectivity", len(p1), max(0.0, EXACT_TOL - worst), EXACT_TOL, seed, ok,
        min_distance=min_dist, single_scale_pole_gap=pole_gap,
    )


def grid_norm_closed_form(p1, p2, schedule):
    """Squared grid-encoding distance expanded per scale: 4S - 2 sum(cos dlat/r + cos dlon/r)."""
    r = schedule.factors
    dlat = (p1[..., 1] - p2[..., 1])[..., None] / r
    dlon = (p1[..., 0] - p2[..., 0])[..., None] / r
    return 4 * len(r) - 2 * np.sum(np.cos(dlat) + np.cos(dlon), axis=-1)


def check_grid_pathology(schedules=None, n=1_000, seed=0):
    """grid sees latitude and longitude differences separately.

    (a) inner product equals the per-scale cosine sum; (b) the squared
    distance matches its expansion; (c) two points on the same parallel
    keep the same grid distance for every latitude while the true distance
    shrinks toward the poles, and single-scale sphereC follows the true
    distance down monotonically.
    """
    rng = np.random.default_rng(seed)
    if schedules is None:
        schedules = [ScaleSchedule(1, 1.0, 1.0), ScaleSchedule(4, 0.1, 1.0),
                     ScaleSchedule(16, 1e-2, 1.0), ScaleSchedule(32, 1e-3, 2 * math.pi)]
    p1, p2 = _random_pairs(n, rng)
    dot_err = norm_err = const_err = 0.0
    sweep = np.radians(np.arange(-85.0, 86.0, 5.0))
    lons = rng.uniform(-math.pi, math.pi, 2)
    x1 = np.stack([np.full_like(sweep, lons[0]), sweep], axis=1)
    x2 = np.stack([np.full_like(sweep, lons[1]), sweep], axis=1)
    for sched in schedules:
        e1, e2 = encode_grid(p1, sched), encode_grid(p2, sched)
        r = sched.factors
        closed = np.sum(
            np.cos((p1[:, 1:2] - p2[:, 1:2]) / r) + np.cos((p1[:, 0:1] - p2[:, 0:1]) / r), axis=1
        )
        dot_err = max(dot_err, np.abs(np.sum(e1 * e2, axis=1) - closed).max())
        sq = np.sum((e1 - e2) ** 2, axis=1)
        norm_err = max(norm_err, np.abs(sq - grid_norm_closed_form(p1, p2, sched)).max())
        d = np.linalg.norm(encode_grid(x1, sched) - encode_grid(x2, sched), axis=1)
        const_err = max(const_err, d.max() - d.min())

    gcd = central_angle(x1, x2)
    variation = (gcd.max() - gcd.min()) / gcd.max()
    sc = ScaleSchedule(1, 1.0, 1.0)
    sc_dist = np.linalg.norm(encode_sphereC(x1, sc) - encode_sphereC(x2, sc), axis=1)
    north = sweep >= 0
    south = sweep <= 0
    mono = bool(np.all(np.diff(sc_dist[north]) < 0) and np.all(np.diff(sc_dist[south]) > 0))
    err = max(dot_err, norm_err, const_err)
    ok = err <= CLOSED_FORM_TOL and variation > 0.5 and mono
    return _result(
        "grid_latitude_pathology", n * len(schedules), err, CLOSED_FORM_TOL, seed, ok,
        max_dot_error=float(dot_err),
        max_norm_identity_error=float(norm_err),
        constant_distance_spread=float(const_err),
        great_circle_relative_variation=float(variation),
        sphereC_monotone_toward_poles=mono,
    )


def nerf_distance_closed_form(p1, p2, n_scales):
    """Squared NeRF distance as a sum of 4 sin^2(2^(s-1) pi dq) over scales and axes."""
    dq = to_cartesian(p1) - to_cartesian(p2)
    half_freq = math.pi * 2.0 ** (np.arange(n_scales) - 1.0)
    return np.sum(4 * np.sin(half_freq[:, None] * dq[..., None, :]) ** 2, axis=(-1, -2))


AXIS_PAIRS = {
    "z": (np.array([0.0, HALF_PI]), np.array([0.0, -HALF_PI])),
    "x": (np.array([0.0, 0.0]), np.array([-math.pi, 0.0])),
    "y": (np.array([HALF_PI, 0.0]), np.array([-HALF_PI, 0.0])),
}


def check_nerf_distance(scales=(1, 4, 8), n=10_000, seed=0):
    """NeRF distance closed form, and identical codes for antipodal axis points."""
    rng = np.random.default_rng(seed)
    p1, p2 = _random_pairs(n, rng)
    id_err = 0.0
    axis_dist = {}
    for S in scales:
        sq = np.sum((encode_nerf(p1, S) - encode_nerf(p2, S)) ** 2, axis=1)
        id_err = max(id_err, np.abs(sq - nerf_distance_closed_form(p1, p2, S)).max())
        for name, (a, b) in AXIS_PAIRS.items():
            axis_dist[f"{name}@S={S}"] = float(np.linalg.norm(encode_nerf(a, S) - encode_nerf(b, S)))
    worst_axis = max(axis_dist.values())
    ok = id_err <= CLOSED_FORM_TOL and worst_axis <= EXACT_TOL
    return _result(
        "nerf_distance_and_collisions", n * len(scales), id_err, CLOSED_FORM_TOL, seed, ok,
        axis_pair_distance=axis_dist, axis_tolerance=EXACT_TOL,
    )


def run_all(n=10_000, seed=0):
    results = [
        check_sphereC_distance(n, seed),
        check_injectivity(n, seed),
        check_grid_pathology(n=max(n // 10, 1), seed=seed),
        check_nerf_distance(n=n, seed=seed),
    ]
    return {
        "format": REPORT_FORMAT,
        "format_version": REPORT_VERSION,
        "seed": seed,
        "n_trials": n,
        "passed": all(r.passed for r in results),
        "results": [r.to_dict() for r in results],
    }
