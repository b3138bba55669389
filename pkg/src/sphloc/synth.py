"""Synthetic benchmarks from mixtures of von Mises-Fisher distributions on S^2."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import HALF_PI, from_cartesian, to_cartesian

SPLITS = ("train", "val", "test")


def _orthonormal_frame(mu):
    """Two unit vectors completing ``mu`` to an orthonormal basis."""
    mu = np.asarray(mu, float)
    helper = np.eye(3)[np.argmin(np.abs(mu))]
    e1 = np.cross(mu, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(mu, e1)
    return e1, e2


def vmf_cosine_cdf(t, kappa):
    """CDF of ``t = mu . x`` under vMF(mu, kappa) on S^2, for t in [-1, 1]."""
    t = np.clip(np.asarray(t, float), -1.0, 1.0)
    # scaled by exp(-k) so large kappa cannot overflow
    return (np.exp(kappa * (t - 1.0)) - np.exp(-2.0 * kappa)) / -np.expm1(-2.0 * kappa)


def sample_vmf_cartesian(mu, kappa, n, rng):
    """Draw ``n`` unit vectors from vMF(mu, kappa); ``mu`` in (z, x, y) order."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    mu = np.asarray(mu, float)
    mu = mu / np.linalg.norm(mu)
    u = 1.0 - rng.random(n)  # (0, 1]
    # t = 1 + log(u + (1 - u) exp(-2k)) / k, in log space so large kappa is safe
    with np.errstate(divide="ignore"):
        log_arg = np.logaddexp(np.log(u), np.log1p(-u) - 2.0 * kappa)
    t = np.clip(1.0 + log_arg / kappa, -1.0, 1.0)
    theta = rng.uniform(0.0, 2 * math.pi, n)
    e1, e2 = _orthonormal_frame(mu)
    rad = np.sqrt(np.maximum(0.0, 1.0 - t * t))
    v = (
        t[:, None] * mu
        + (rad * np.cos(theta))[:, None] * e1
        + (rad * np.sin(theta))[:, None] * e2
    )
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sample_vmf(mu, kappa, n, rng):
    """Draw ``n`` (lon, lat) points from vMF(mu, kappa)."""
    return from_cartesian(sample_vmf_cartesian(mu, kappa, n, rng))


def sample_uniform_sphere(n, rng):
    """Area-uniform (lon, lat) points: sin(lat) ~ U(-1, 1), lon ~ U(-pi, pi)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    z = rng.uniform(-1.0, 1.0, n)
    lon = rng.uniform(-math.pi, math.pi, n)
    return np.stack([lon, np.arcsin(z)], axis=1)


def band_edges(n_bands):
    return np.linspace(-HALF_PI, HALF_PI, n_bands + 1)


def sample_stratified_centers(n_bands, per_band, rng):
    """``per_band`` area-uniform centers inside each of ``n_bands`` equal latitude bands.

    Returned in band order, south to north.
    """
    if n_bands < 1 or per_band < 1:
        raise ValueError("n_bands and per_band must be >= 1")
    edges = band_edges(n_bands)
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        z = rng.uniform(math.sin(lo), math.sin(hi), per_band)
        lon = rng.uniform(-math.pi, math.pi, per_band)
        lat = np.clip(np.arcsin(z), lo, hi)
        out.append(np.stack([lon, lat], axis=1))
    return np.concatenate(out, axis=0)


def log_vmf_density(X, mu, kappa):
    """log vMF density at (lon, lat) points; stable for large kappa."""
    v = to_cartesian(X)
    kappa = np.asarray(kappa, float)
    # log sinh k = k + log1p(-exp(-2k)) - log 2
    log_sinh = kappa + np.log1p(-np.exp(-2 * kappa)) - math.log(2)
    return np.log(kappa) - math.log(2 * math.pi) - log_sinh + kappa * (v @ np.asarray(mu, float).T)


@dataclass
class MvMFSpec:
    """Mixture recipe: placement of centers plus concentration range.

    ``placement="uniform"`` uses ``n_classes`` centers; ``"stratified"``
    uses ``n_bands * per_band`` centers. Each concentration is ``r**2``
    with ``r ~ U(kappa_min, kappa_max)``.
    """

    n_classes: int = 50
    samples_per_class: int = 100
    kappa_min: float = 1.0
    kappa_max: float = 16.0
    placement: str = "uniform"
    n_bands: int | None = None
    per_band: int | None = None
    seed: int = 0
    split_fractions: tuple = (0.8, 0.1, 0.1)

    def __post_init__(self):
        if self.placement not in ("uniform", "stratified"):
            raise ValueError(f"unknown placement {self.placement!r}")
        if self.placement == "stratified":
            if self.n_bands is None or self.per_band is None:
                raise ValueError("stratified placement needs n_bands and per_band")
            if self.n_bands * self.per_band != self.n_classes:
                raise ValueError(
                    f"stratified placement needs n_classes == n_bands * per_band "
                    f"({self.n_classes} != {self.n_bands} * {self.per_band})"
                )
        if self.n_classes < 1 or self.samples_per_class < 1:
            raise ValueError("n_classes and samples_per_class must be >= 1")
        if not 0 < self.kappa_min <= self.kappa_max:
            raise ValueError("need 0 < kappa_min <= kappa_max")
        fr = tuple(float(f) for f in self.split_fractions)
        if len(fr) != 3 or min(fr) < 0 or abs(sum(fr) - 1) > 1e-9:
            raise ValueError("split_fractions must be three non-negative numbers summing to 1")
        self.split_fractions = fr


@dataclass
class Dataset:
    """Labeled points with split assignment and the realized mixture."""

    points: np.ndarray
    labels: np.ndarray
    splits: np.ndarray
    spec: MvMFSpec | None = None
    centers: np.ndarray | None = None
    kappas: np.ndarray | None = None
    point_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.point_ids is None:
            self.point_ids = np.arange(len(self.labels))

    @property
    def n_classes(self):
        if self.kappas is not None:
            return len(self.kappas)
        return int(self.labels.max()) + 1

    def split(self, name):
        """(points, labels, point_ids) of one split."""
        m = self.splits == name
        return self.points[m], self.labels[m], self.point_ids[m]

    def oracle_predict(self, X):
        if self.centers is None:
            raise ValueError("dataset has no mixture parameters")
        return oracle_classify(self.centers, self.kappas, X)

    def provenance(self):
        d = {
            "centers_lonlat": self.centers.tolist(),
            "centers_zxy": to_cartesian(self.centers).tolist(),
            "kappas": self.kappas.tolist(),
        }
        if self.spec is not None:
            d["spec"] = asdict(self.spec)
            d["spec"]["split_fractions"] = list(self.spec.split_fractions)
        return d


def oracle_classify(centers, kappas, X):
    """Bayes-optimal class under an even prior; ties go to the lowest id."""
    mus = to_cartesian(centers)
    ll = log_vmf_density(np.atleast_2d(X), mus, kappas)
    out = np.argmax(ll, axis=1)
    return out if np.ndim(X) > 1 else int(out[0])


def _split_counts(n, fractions):
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    n_val = min(n_val, n - n_train)
    return n_train, n_val, n - n_train - n_val


def generate(spec: MvMFSpec) -> Dataset:
    """Sample a labeled dataset from ``spec``; deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    if spec.placement == "uniform":
        centers = sample_uniform_sphere(spec.n_classes, rng)
    else:
        centers = sample_stratified_centers(spec.n_bands, spec.per_band, rng)
    r = rng.uniform(spec.kappa_min, spec.kappa_max, spec.n_classes)
    kappas = r**2
    mus = to_cartesian(centers)
    pts, labels, splits = [], [], []
    n_train, n_val, n_test = _split_counts(spec.samples_per_class, spec.split_fractions)
    split_template = np.array(["train"] * n_train + ["val"] * n_val + ["test"] * n_test)
    for c in range(spec.n_classes):
        pts.append(sample_vmf(mus[c], kappas[c], spec.samples_per_class, rng))
        labels.append(np.full(spec.samples_per_class, c))
        splits.append(rng.permutation(split_template))
    return Dataset(
        points=np.concatenate(pts),
        labels=np.concatenate(labels).astype(np.int64),
        splits=np.concatenate(splits),
        spec=spec,
        centers=centers,
        kappas=kappas,
    )


# Benchmark presets: C=50, SP=100, kappa_min=1; U = uniform, S = stratified.
PRESETS = {}
for _i, _kmax in enumerate((16, 32, 64, 128), start=1):
    PRESETS[f"U{_i}"] = dict(placement="uniform", kappa_max=_kmax)
    for _j, (_nb, _pb) in enumerate(((5, 10), (10, 5), (25, 2), (50, 1)), start=1):
        PRESETS[f"S{_j}.{_i}"] = dict(
            placement="stratified", n_bands=_nb, per_band=_pb, kappa_max=_kmax
        )


def preset(name, seed=0, **overrides) -> MvMFSpec:
    kw = dict(n_classes=50, samples_per_class=100, kappa_min=1.0, seed=seed)
    kw.update(PRESETS[name])
    kw.update(overrides)
    return MvMFSpec(**kw)
