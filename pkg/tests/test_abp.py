import math

import numpy as np
import pytest

from capiso.abp import (BoundaryConfig, abp_parts, assign_cell, assign_cells, normal_ray_property,
                        random_config, random_polygon, read_config_csv, write_config_csv, zero_abp_suite)
from capiso.geometry import ball, lower_half_space
from capiso.weights import DomainError, WeightModel, constant, monomial_xn

SEG = math.acos(0.5) - 0.5 * math.sqrt(0.75)
DISC = ball([0.0, 0.0], 1.0)
TWO = BoundaryConfig.from_obstacle(DISC, [[1.0, 0.0], [-1.0, 0.0]], [0.0, 0.0])


def test_cell_assignment_examples():
    assert assign_cell(TWO, [0.3, 0.9]) == (0,)
    assert assign_cell(TWO, [0.0, 0.7]) == (0, 1)
    one = BoundaryConfig.from_obstacle(DISC, [[0.0, 1.0]], [0.3])
    xi = np.random.default_rng(0).normal(size=(100, 2))
    idx, ties = assign_cells(one, xi)
    assert np.all(idx == 0) and not ties.any()


def test_points_must_lie_on_boundary():
    with pytest.raises(DomainError):
        BoundaryConfig.from_obstacle(DISC, [[0.5, 0.0]], [0.0])


def test_two_point_deficits():
    p = abp_parts(TWO, 0.5, constant(), 400_000, 1)
    assert p.b_mass.contains(2 * SEG)
    assert p.cap_mass.contains(SEG)
    assert p.deficit.contains(SEG)
    p0 = abp_parts(TWO, 0.0, constant(), 400_000, 2)
    assert p0.deficit.contains(math.pi / 2)


def test_inward_normals_give_negative_deficit():
    # normals no convex boundary could produce: each cell sees a normal pointing away from it
    cfg = BoundaryConfig([[1.0, 0.0], [-1.0, 0.0]], [0.0, 0.0], [[-1.0, 0.0], [1.0, 0.0]])
    p = abp_parts(cfg, 0.9, constant(), 200_000, 3)
    assert p.b_mass.value == 0.0
    assert p.deficit.value < -3 * p.deficit.std_error


def test_normal_ray_examples():
    xi = np.array([0.3, 0.9])
    assert assign_cell(TWO, xi + 2 * TWO.normals[0]) == (0,)
    one = BoundaryConfig.from_obstacle(DISC, [[1.0, 0.0]], [0.0])
    assert normal_ray_property(one, 1000, 0).passed


def test_normal_ray_on_random_polygons():
    rng = np.random.default_rng(11)
    for k in range(3):
        cfg = random_config(random_polygon(rng), 12, rng)
        assert normal_ray_property(cfg, 10_000, k).passed


@pytest.mark.parametrize("lam", [0.0, 0.4])
@pytest.mark.parametrize("w", [constant(), monomial_xn(1)])
def test_deficit_scales_with_ball_radius(lam, w):
    cfg = random_config(DISC, 8, np.random.default_rng(4))
    for r in (0.5, 2.0):
        a = abp_parts(cfg.scaled(r), lam, w, 50_000, 5, radius=r).deficit
        b = abp_parts(cfg, lam, w, 50_000, 5).deficit
        assert a.value == pytest.approx(r ** (2 + w.alpha) * b.value, rel=1e-9)


def test_coincident_points_give_zero_deficit():
    E = lower_half_space(2)
    cfg = BoundaryConfig.from_obstacle(E, [[0.2, 0.0]] * 4, [0.5] * 4)
    p = abp_parts(cfg, 0.0, constant(), 100_000, 6)
    assert p.deficit.value == 0.0
    cfgd = BoundaryConfig.from_obstacle(DISC, [[0.6, 0.8]] * 3, [0.0] * 3)
    assert abs(abp_parts(cfgd, 0.0, monomial_xn(2), 200_000, 7).deficit.z_score(0.0)) < 3


def test_suite_refuses_odd_weight():
    odd = WeightModel(alpha=1.0, eval=lambda x: x[:, -1], even=False, spec="xn-signed")
    with pytest.raises(ValueError, match="even"):
        zero_abp_suite(DISC, odd, 2, 4, 1000, 0)


def test_small_suite_passes():
    rep = zero_abp_suite(DISC, constant(), 10, 8, 20_000, 1)
    assert rep.passed
    assert len(rep.rows) == 10


def test_config_csv_round_trip(tmp_path):
    cfg = random_config(DISC, 5, np.random.default_rng(2))
    path = tmp_path / "cfg.csv"
    write_config_csv(path, cfg, "generated now")
    back = read_config_csv(path)
    assert np.array_equal(back.points, cfg.points) and np.array_equal(back.values, cfg.values)
    again = read_config_csv(path, DISC)
    assert np.allclose(again.normals, cfg.normals)
