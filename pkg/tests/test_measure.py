import math

import numpy as np
import pytest

from capiso.gauges import capillary
from capiso.geometry import ball, detached_ball_region, half_ellipse_region, lower_half_space, spherical_cap_region
from capiso.measure import (capillary_energy, family_weights, iso_quotient_report, shape_family,
                            weighted_boundary_integral, weighted_volume)
from capiso.weights import constant, monomial_xn

SEG = math.acos(0.5) - 0.5 * math.sqrt(0.75)


def test_half_disc_volumes():
    half = spherical_cap_region(1, 0, 2)
    assert weighted_volume(half, constant()).value == pytest.approx(math.pi / 2)
    assert weighted_volume(half, monomial_xn(1)).value == pytest.approx(2 / 3)
    assert weighted_volume(half.scaled(2), monomial_xn(1)).value == pytest.approx(16 / 3)
    mc = weighted_volume(half.scaled(2), monomial_xn(1), 400_000, 1, method="monte_carlo")
    assert mc.contains(16 / 3)


def test_boundary_integrals():
    half = spherical_cap_region(1, 0, 2)
    arc = weighted_boundary_integral(half, "free", monomial_xn(1))
    assert arc.value == pytest.approx(2.0, abs=1e-9)
    assert arc.value / 3 == pytest.approx(2 / 3)
    aniso = weighted_boundary_integral(half, "free", constant(), capillary(0.5))
    assert aniso.value == pytest.approx(math.pi - 1, abs=1e-9)


def test_cap_energy_closed_form_and_flux_identity():
    rep = capillary_energy(spherical_cap_region(1, 0.5, 2), lower_half_space(2, 0.5), constant(), 0.5)
    exact = 2 * math.pi / 3 - 0.5 * math.sqrt(3)
    assert rep.energy.contains(exact)
    assert rep.identity_gap.contains(0.0)
    assert rep.energy.value == pytest.approx(2 * SEG, rel=1e-9)


def test_xn_weight_energy_at_zero_angle():
    rep = capillary_energy(spherical_cap_region(1, 0, 2), lower_half_space(2), monomial_xn(1), 0.0)
    assert rep.energy.value == pytest.approx(2.0, abs=1e-9)
    assert rep.energy.value == pytest.approx(rep.free_perimeter_w.value)


def test_flux_identity_skipped_when_assumption_missing():
    rep = capillary_energy(spherical_cap_region(1, 0.5, 2), None, monomial_xn(1), 0.5)
    assert rep.identity_gap is None
    assert any("assumption not declared" in s for s in rep.notes)


def test_detached_disc_and_half_ellipse_deficits():
    E = lower_half_space(2)
    det = iso_quotient_report(detached_ball_region([0.0, 3.0], 1.0, E), E, constant(), 0.0, 200_000, 1)
    assert det.quotient.contains(2 * math.sqrt(math.pi))
    assert det.reference.value == pytest.approx(math.sqrt(2 * math.pi), rel=1e-6)
    ell = iso_quotient_report(half_ellipse_region(1.0, 2.0, 2, E), E, constant(), 0.0, 400_000, 2)
    assert ell.deficit.value > 3 * ell.deficit.std_error


def test_obstacle_mismatch_is_rejected():
    with pytest.raises(ValueError):
        capillary_energy(spherical_cap_region(1, 0, 2), ball([0, 0], 1), constant(), 0.0)


def test_lambda_out_of_range():
    with pytest.raises(ValueError):
        capillary_energy(spherical_cap_region(1, 0, 2), None, constant(), 1.0)


@pytest.mark.parametrize("r", [0.5, 2.0, 3.0])
def test_quotient_is_scale_invariant(r):
    E = lower_half_space(2)
    base = half_ellipse_region(1.0, 2.0, 2, E)
    a = capillary_energy(base, E, constant(), 0.0, 200_000, 5, volume_method="monte_carlo").quotient
    b = capillary_energy(base.scaled(r), E.scaled(r), constant(), 0.0, 200_000, 5,
                         volume_method="monte_carlo").quotient
    assert b.value == pytest.approx(a.value, rel=1e-9)


def test_family_contents():
    ids = [s for s, _ in shape_family("half_space", 2)]
    assert ids == ["half_ball", "shifted_cap", "half_ellipse", "wall_box", "detached_ball"]
    assert [w.spec for w in family_weights("ball")] == ["const"]
