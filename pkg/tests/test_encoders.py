import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from sphloc.encoders import (
    FAMILIES,
    PositionEncoder,
    ScaleSchedule,
    canonical_family,
    encode,
    encode_dfs,
    encode_grid,
    encode_nerf,
    encode_sphereC,
    encode_sphereC_plus,
    encode_sphereM,
    encode_sphereM_plus,
    encode_theory,
    encode_wrap,
    output_dim,
    tile_index,
)
from sphloc.geometry import HALF_PI, central_angle, chord_distance
from sphloc.props import grid_norm_closed_form, nerf_distance_closed_form
from sphloc.synth import sample_uniform_sphere

S1 = ScaleSchedule(1, 1.0, 1.0)
ORIGIN = np.array([0.0, 0.0])
EXTRA = {"n_anchors": 7, "n_features": 11, "n_lon": 4, "n_lat": 3}


def _fitted(family, X, **kw):
    params = dict(EXTRA, n_scales=4, random_state=0)
    params.update(kw)
    return PositionEncoder(family=family, **params).fit(X)


def test_scale_schedule():
    np.testing.assert_allclose(ScaleSchedule(3, 0.01, 1.0).factors, [0.01, 0.1, 1.0])
    assert ScaleSchedule(1, 0.01, 2.0).factors.tolist() == [2.0]
    for bad in [(0, 0.1, 1.0), (2, 0.0, 1.0), (2, 2.0, 1.0)]:
        with pytest.raises(ValueError):
            ScaleSchedule(*bad)


def test_dfs_examples():
    e = encode_dfs(ORIGIN, S1)
    np.testing.assert_allclose(e, [0, 1, 0, 1, 1, 0, 0, 0], atol=1e-15)
    for S in (1, 2, 5):
        assert encode_dfs(ORIGIN, ScaleSchedule(S)).shape == (4 * S * S + 4 * S,)
    p = np.array([0.4, 0.3])
    np.testing.assert_allclose(encode_dfs(p, S1), encode_dfs(p + [2 * math.pi, 0.0], S1), atol=1e-12)


def test_grid_examples(random_points, rng):
    np.testing.assert_allclose(encode_grid(ORIGIN, S1), [0, 1, 0, 1], atol=1e-15)
    q = sample_uniform_sphere(len(random_points), rng)
    sched = ScaleSchedule(6, 0.05, 1.0)
    dot = np.sum(encode_grid(random_points, sched) * encode_grid(q, sched), axis=1)
    r = sched.factors
    closed = np.sum(np.cos((random_points[:, 1:] - q[:, 1:]) / r) + np.cos((random_points[:, :1] - q[:, :1]) / r), 1)
    np.testing.assert_allclose(dot, closed, atol=1e-9)
    sq = np.sum((encode_grid(random_points, sched) - encode_grid(q, sched)) ** 2, 1)
    np.testing.assert_allclose(sq, grid_norm_closed_form(random_points, q, sched), atol=1e-9)


def test_grid_distance_constant_along_parallel():
    lat = np.radians([-80.0, 0.0, 80.0])
    a = np.stack([np.full(3, -1.0), lat], 1)
    b = np.stack([np.full(3, 2.0), lat], 1)
    d = np.linalg.norm(encode_grid(a, ScaleSchedule(8)) - encode_grid(b, ScaleSchedule(8)), axis=1)
    assert np.ptp(d) <= 1e-9


def test_theory_examples():
    for S in (1, 3):
        e = encode_theory(ORIGIN, ScaleSchedule(S))
        assert e.shape == (6 * S,)
        np.testing.assert_allclose(e[0::2], 0, atol=1e-15)
        np.testing.assert_allclose(e[1::2], 1)
    # the three unit directions sum to zero, so do the S=1 projections
    p = np.array([0.7, -0.4])
    e = encode_theory(p, S1)
    ang = np.arctan2(e[0::2], e[1::2])
    assert abs(np.sum(ang)) < 1e-12


def test_sphereC_examples(random_points, rng):
    np.testing.assert_allclose(encode_sphereC(ORIGIN, S1), [0, 1, 0], atol=1e-15)
    q = sample_uniform_sphere(len(random_points), rng)
    e1, e2 = encode_sphereC(random_points, S1), encode_sphereC(q, S1)
    dd = central_angle(random_points, q)
    np.testing.assert_allclose(np.sum(e1 * e2, 1), np.cos(dd), atol=1e-9)
    np.testing.assert_allclose(np.linalg.norm(e1 - e2, axis=1), 2 * np.sin(dd / 2), atol=1e-9)
    # at S=1 the encoding is the unit-sphere embedding
    np.testing.assert_allclose(np.linalg.norm(e1 - e2, axis=1), chord_distance(random_points, q), atol=1e-12)


def test_sphereM_examples():
    np.testing.assert_allclose(encode_sphereM(ORIGIN, S1), [0, 1, 1, 0, 0], atol=1e-15)
    p = np.array([0.9, 0.2])
    e = encode_sphereM(p, S1)
    c = encode_sphereC(p, S1)
    np.testing.assert_allclose(e[[1, 2]], c[1], atol=1e-15)
    np.testing.assert_allclose(e[[3, 4]], c[2], atol=1e-15)
    assert encode_sphereM(ORIGIN, ScaleSchedule(4)).shape == (20,)
    top = encode_sphereM(np.array([1.1, HALF_PI]), ScaleSchedule(4))
    last = top[-5:]
    np.testing.assert_allclose(last[1:], 0, atol=1e-15)


def test_plus_variants_concatenate(random_points):
    sched = ScaleSchedule(5, 0.1, 1.0)
    np.testing.assert_allclose(encode_sphereC_plus(ORIGIN, S1), [0, 1, 0, 0, 1, 0, 1], atol=1e-15)
    c_plus = encode_sphereC_plus(random_points, sched)
    m_plus = encode_sphereM_plus(random_points, sched)
    np.testing.assert_array_equal(c_plus[:, :15], encode_sphereC(random_points, sched))
    np.testing.assert_array_equal(c_plus[:, 15:], encode_grid(random_points, sched))
    np.testing.assert_array_equal(m_plus[:, :25], encode_sphereM(random_points, sched))
    np.testing.assert_array_equal(m_plus[:, 25:], encode_grid(random_points, sched))


def test_nerf_examples(random_points, rng):
    e = encode_nerf(ORIGIN, 1)
    # (z, x, y) = (0, 1, 0): [sin 0, cos 0, sin pi, cos pi, sin 0, cos 0]
    np.testing.assert_allclose(e, [0, 1, 0, -1, 0, 1], atol=1e-15)
    for S in (1, 3, 8):
        np.testing.assert_allclose(
            encode_nerf((0.3, HALF_PI), S), encode_nerf((0.3, -HALF_PI), S), atol=1e-12
        )
    q = sample_uniform_sphere(len(random_points), rng)
    sq = np.sum((encode_nerf(random_points, 8) - encode_nerf(q, 8)) ** 2, 1)
    np.testing.assert_allclose(sq, nerf_distance_closed_form(random_points, q, 8), atol=1e-9)


def test_wrap_examples():
    np.testing.assert_allclose(encode_wrap(ORIGIN), [0, 1, 0, 1], atol=1e-15)
    np.testing.assert_allclose(encode_wrap((HALF_PI, math.pi / 4)), [1, 0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(encode_wrap((0.0, HALF_PI))[2:], [0, -1], atol=1e-15)
    np.testing.assert_allclose(encode_wrap((0.0, -HALF_PI))[2:], [0, -1], atol=1e-15)


def test_rbf_examples(random_points):
    enc = _fitted("rbf", random_points, n_anchors=5, sigma=1.0)
    a = enc.anchors_
    e = enc.transform(a)
    np.testing.assert_allclose(np.diag(e), 1.0)
    anti = np.stack([a[:, 0] + math.pi, -a[:, 1]], 1)
    np.testing.assert_allclose(np.diag(enc.transform(anti)), math.exp(-2), rtol=1e-12)
    full = enc.transform(random_points)
    assert np.all((full > 0) & (full <= 1))


def test_rbf_needs_points():
    with pytest.raises(ValueError):
        PositionEncoder("rbf").fit()
    with pytest.raises(ValueError):
        PositionEncoder("rbf", sigma=0).fit(np.zeros((3, 2)))


def test_rff_range_and_determinism(random_points):
    enc = _fitted("rff", None, n_features=64, bandwidth=0.5, random_state=3)
    e = enc.transform(random_points)
    bound = math.sqrt(2 / 64)
    assert np.all(np.abs(e) <= bound + 1e-15)
    again = _fitted("rff", None, n_features=64, bandwidth=0.5, random_state=3)
    np.testing.assert_array_equal(e, again.transform(random_points))


def test_rff_kernel_monte_carlo():
    D, bw = 100_000, 0.7
    enc = _fitted("rff", None, n_features=D, bandwidth=bw, random_state=11)
    x, xp = np.array([0.2, 0.1]), np.array([-0.3, 0.5])
    terms = 2 * np.cos(enc.omega_ @ x + enc.offsets_) * np.cos(enc.omega_ @ xp + enc.offsets_)
    est = float(enc.encode(x) @ enc.encode(xp))
    assert est == pytest.approx(terms.mean())
    target = math.exp(-np.sum((x - xp) ** 2) / (2 * bw**2))
    assert abs(est - target) <= 3 * terms.std() / math.sqrt(D)


def test_tile_examples():
    eps = 1e-9
    assert tile_index((2.0, 1.0), 1, 1) == 0
    assert tile_index((-math.pi + eps, -HALF_PI + eps), 2, 2) == 0
    assert tile_index((math.pi - eps, HALF_PI - eps), 2, 2) == 3
    assert tile_index((0.5, -0.5), 2, 2) == 1
    with pytest.raises(ValueError):
        tile_index((0, 0), 0, 2)


def test_encode_examples():
    np.testing.assert_allclose(encode(ORIGIN, "xyz"), [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(encode(ORIGIN, "grid", n_scales=1), [0, 1, 0, 1], atol=1e-15)


@pytest.mark.parametrize("family", FAMILIES)
def test_output_dim_contract(family, random_points):
    enc = _fitted(family, random_points[:100])
    out = enc.transform(random_points[:100])
    extra = {"rbf": 7, "rff": 11, "tile": 12}
    assert out.shape == (100, output_dim(family, 4, extra)) == (100, enc.output_dim_)
    assert len(enc.get_feature_names_out()) == enc.output_dim_


@pytest.mark.parametrize("family", FAMILIES)
def test_serialization_round_trip(family, random_points):
    enc = _fitted(family, random_points)
    back = PositionEncoder.from_dict(enc.to_dict())
    np.testing.assert_array_equal(back.transform(random_points), enc.transform(random_points))


def test_aliases_and_unknown():
    assert canonical_family("sphereM+") == "sphereM_plus"
    assert canonical_family("NeRF") == "nerf"
    with pytest.raises(ValueError):
        canonical_family("hexgrid")
    enc = PositionEncoder("sphereC+", n_scales=2).fit()
    assert enc.transform([[0.0, 0.0]]).shape == (1, 14)


def test_sklearn_params_and_clone():
    enc = PositionEncoder("grid", n_scales=3)
    assert clone(enc).get_params() == enc.get_params()
    X = np.array([[0.1, 0.2], [0.3, -0.4]])
    np.testing.assert_allclose(enc.fit_transform(X), encode_grid(X, ScaleSchedule(3)), atol=1e-13)


def test_batch_shapes_and_degree_free_inputs():
    enc = PositionEncoder("sphereM_plus", n_scales=3).fit()
    pts = np.zeros((2, 5, 2))
    assert enc.encode(pts).shape == (2, 5, 27)
    with pytest.raises(ValueError):
        enc.transform([[0.0, 2.0]])


lon = st.floats(-math.pi, math.pi, exclude_max=True)
lat = st.floats(-1.55, 1.55)


@settings(max_examples=200, deadline=None)
@given(st.tuples(lon, lat), st.tuples(lon, lat), st.sampled_from(["sphereC", "sphereM", "dfs", "sphereC_plus", "sphereM_plus"]))
def test_sphere_families_injective(p, q, family):
    if central_angle(p, q) < 1e-6:
        return
    d = np.linalg.norm(encode(np.array(p), family, n_scales=4) - encode(np.array(q), family, n_scales=4))
    assert d > 1e-12


@settings(max_examples=100, deadline=None)
@given(st.tuples(lon, lat), st.integers(1, 6))
def test_bounded_features(p, S):
    for family in ("grid", "theory", "sphereC", "sphereM", "dfs", "nerf"):
        e = encode(np.array(p), family, n_scales=S)
        assert np.all(np.abs(e) <= 1 + 1e-12)
