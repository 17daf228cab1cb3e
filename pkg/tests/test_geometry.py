import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capiso.geometry import (ball, ball_region, half_space, lower_half_space, parse_obstacle, parse_region,
                             polytope, polytope_from_points, spherical_cap_region, upper_half_space)
from capiso.measure import weighted_volume
from capiso.weights import DomainError, constant


def test_contains_examples():
    assert lower_half_space(2).contains([[1.0, -0.2]])[0]
    assert ball([0, 0], 1).contains([[0.5, 0.5]])[0]
    wedge = polytope([[1, 0], [0, 1], [-1, -1]], [0, 0, 0])
    assert wedge.contains([[0.0, 0.0]])[0]


def test_contains_rejects_non_finite():
    with pytest.raises(DomainError):
        ball([0, 0], 1).contains([[np.inf, 0.0]])


def test_outward_normals():
    assert np.allclose(ball([0, 0], 1).outward_normal([1.0, 0.0]), [1, 0])
    assert np.allclose(lower_half_space(2, 0.5).outward_normal([3.0, 0.5]), [0, 1])
    with pytest.raises(DomainError):
        ball([0, 0], 1).outward_normal([0.5, 0.0])


def test_polytope_vertex_normal_is_flagged():
    sq = polytope([[1, 0], [0, 1], [-1, 0], [0, -1]], [1, 1, 1, 1])
    nu, non_unique = sq.outward_normal([1.0, 1.0], return_flag=True)
    assert non_unique
    assert np.linalg.norm(nu) == pytest.approx(1.0)
    assert nu @ np.array([1.0, 0.0]) > 0 and nu @ np.array([0.0, 1.0]) > 0
    _, flag = sq.outward_normal([1.0, 0.2], return_flag=True)
    assert not flag


def test_hull_polytope_contains_its_points():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(20, 2))
    P = polytope_from_points(pts)
    assert np.all(P.contains(pts))
    b = P.sample_boundary(rng, 50)
    assert np.max(np.abs(P.signed_distance(b))) < 1e-9


def test_cap_areas():
    seg = math.acos(0.5) - 0.5 * math.sqrt(0.75)
    w = constant()
    assert weighted_volume(spherical_cap_region(1, 0, 2), w).value == pytest.approx(math.pi / 2)
    assert weighted_volume(spherical_cap_region(1, 0.5, 2), w).value == pytest.approx(seg)
    assert weighted_volume(spherical_cap_region(2, 0.5, 2), w).value == pytest.approx(4 * seg)


def test_ball_against_half_space_is_cap_shaped():
    E = lower_half_space(2)
    r = ball_region([0.0, 0.0], 1.0, E)
    est = weighted_volume(r, constant(), 400_000, 3, method="monte_carlo")
    assert est.contains(math.pi / 2)
    assert r.wetted


def test_detached_ball_has_no_wetted_part():
    r = ball_region([0.0, 3.0], 1.0, lower_half_space(2))
    assert not r.wetted


def test_parsers():
    E = parse_obstacle("halfspace:n=2:c=0", 2)
    assert E == lower_half_space(2)
    assert parse_obstacle("ball:0,0:1") == ball([0, 0], 1)
    assert parse_region("cap:1:0", 2, E).kind == "spherical_cap"
    for bad in ["halfspace:n=3:c=0", "ball:0,0", "cube:1"]:
        with pytest.raises(ValueError, match="obstacle"):
            parse_obstacle(bad, 2)
    with pytest.raises(ValueError, match="region"):
        parse_region("blob:1", 2, E)


def test_half_space_sampler_covers_heavy_tail():
    region = upper_half_space(2)
    pts, inv = region.volume_sampler()(np.random.default_rng(0), 100_000)
    assert np.all(pts[:, -1] >= 0)
    est = np.mean(inv * (np.linalg.norm(pts, axis=1) < 1))
    assert est == pytest.approx(math.pi / 2, rel=0.03)


def test_growing_balls_converge_to_closed_ball():
    probes = np.array([[0.5, 0.0], [0.0, 0.99], [1.2, 0.0], [0.0, -1.01]])
    inside = ball([0, 0], 1).contains(probes)
    for h in [10, 100, 1000, 10000]:
        approx = ball([0, 0], 1 + 1 / h).contains(probes)
        if h >= 1000:
            assert np.array_equal(approx, inside)


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.floats(0.1, 3.0))
@settings(max_examples=200, deadline=None)
def test_ball_signed_distance_is_one_lipschitz_and_zero_on_boundary(c, r):
    E = ball(c, r)
    rng = np.random.default_rng(0)
    b = E.sample_boundary(rng, 20)
    assert np.max(np.abs(E.signed_distance(b))) < 1e-12
    x, y = rng.normal(size=(2, 30, 2))
    d = np.abs(E.signed_distance(x) - E.signed_distance(y))
    assert np.all(d <= np.linalg.norm(x - y, axis=1) + 1e-12)


@given(st.lists(st.floats(-2, 2), min_size=2, max_size=2), st.floats(-1, 1))
@settings(max_examples=100, deadline=None)
def test_half_space_projection_is_nearest_point(nu, off):
    if np.linalg.norm(nu) < 1e-3:
        return
    E = half_space(nu, off)
    x = np.random.default_rng(1).normal(size=(10, 2)) * 3
    y = E.project(x)
    out = ~E.contains(x)
    assert np.max(np.abs(E.signed_distance(y[out])), initial=0.0) < 1e-12
    assert np.allclose(y[~out], x[~out])
