"""Weighted volumes, boundary integrals, capillary energies and isoperimetric quotients."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .estimate import Estimate, combine, mc_estimates
from .gauges import Gauge
from .geometry import (
    ConvexObstacle, Region, ball, ball_region, half_ellipse_region, lower_half_space,
    spherical_cap_region, wall_box_region,
)
from .weights import WeightModel, fd_gradient

DEFAULT_SAMPLES = 1_000_000
QUAD_FLOOR = 1e-11


class ConfigurationError(ValueError):
    pass


def default_resolution(n: int) -> int:
    return 2048 if n == 2 else 96


def _unit_ball_volume(k: int) -> float:
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


def _cap_volume_exact(region: Region, w: WeightModel) -> Optional[Estimate]:
    """Closed form (constant weight) or 1-D quadrature over slices (``|x_n|**a``)."""
    if region.kind != "spherical_cap":
        return None
    n = region.n
    r, lam = region.params["r"], region.params["lam"]
    if w.spec == "const":
        if n == 2:
            return Estimate(r * r * (math.acos(lam) - lam * math.sqrt(1 - lam * lam)))
        if n == 3:
            return Estimate(math.pi * r ** 3 * (2 - 3 * lam + lam ** 3) / 3)
    if w.spec.startswith("monomial:xn:") or w.spec == "const":
        a = w.alpha
        k = n - 1
        vk = _unit_ball_volume(k)
        f = lambda t: abs(t) ** a * vk * (r * r - t * t) ** (k / 2)
        pts = [0.0] if lam < 0 else None
        val, err = quad(f, r * lam, r, points=pts, epsabs=0, epsrel=1e-13, limit=200)
        return Estimate(val, err, 0, None, "parametric_quadrature")
    return None


def weighted_volume(region: Region, w: WeightModel, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                    method: str = "auto") -> Estimate:
    """``∫_Ω w dx``: closed form for caps when available, otherwise uniform Monte Carlo on the bbox."""
    if method in ("auto", "exact"):
        est = _cap_volume_exact(region, w)
        if est is not None:
            return est
        if method == "exact":
            raise ConfigurationError("no closed form for this region/weight")
    ind = region.indicator
    integrand = lambda x: np.where(ind(x), w.eval(x), 0.0)
    return mc_estimates(integrand, region.uniform_sampler(), samples, seed)[0]


def _gauge_factor(gauge: Optional[Gauge], nu: np.ndarray) -> np.ndarray:
    return np.ones(len(nu)) if gauge is None else gauge.value(nu)


def weighted_boundary_integral(region: Region, part: str, w: WeightModel, gauge: Optional[Gauge] = None,
                               samples: int = DEFAULT_SAMPLES, seed: int = 0,
                               resolution: Optional[int] = None) -> Estimate:
    """``∫ w F(ν) dH^{n-1}`` over the free or wetted boundary (F ≡ 1 without a gauge).

    Parametric pieces use tensor quadrature; the reported error is the gap to a
    half-resolution rule.  Implicit regions use banded Monte Carlo.
    """
    if part not in ("free", "wetted"):
        raise ValueError("part must be 'free' or 'wetted'")
    if not region.parametric:
        return _banded_boundary(region, part, w, gauge, samples, seed)
    res = resolution or default_resolution(region.n)
    patches = region.free if part == "free" else region.wetted
    f = lambda x, nu: w.eval(x) * _gauge_factor(gauge, nu)
    fine = sum(p.integrate(f, res) for p in patches)
    coarse = sum(p.integrate(f, max(res // 2, 2)) for p in patches)
    # floor for the finite-difference frame and summation rounding
    err = abs(fine - coarse) + QUAD_FLOOR * abs(fine)
    return Estimate(float(fine), err, 0, None, "parametric_quadrature")


def _banded_boundary(region: Region, part: str, w: WeightModel, gauge: Optional[Gauge],
                     samples: int, seed: int) -> Estimate:
    """Coarea estimate ``(1/2ε) ∫_{|φ|<ε} w |∇φ| F(∇φ/|∇φ|) dx`` with ``ε = L δ``."""
    if region.lipschitz is None:
        raise ConfigurationError("implicit boundary needs a Lipschitz bound")
    delta = region.bbox_diagonal * 1e-3
    E = region.obstacle
    if part == "free":
        level = region.phi
        eps = region.lipschitz * delta
        keep = (lambda x: E.signed_distance(x) > 0) if E is not None else (lambda x: np.ones(len(x), bool))
        sign = 1.0
    else:
        if E is None:
            return Estimate(0.0, 0.0, samples, seed, "monte_carlo")
        level = E.signed_distance
        eps = delta
        keep = lambda x: region.phi(x) < 0
        sign = -1.0  # outward normal of Ω points into E

    def integrand(x):
        out = np.zeros(len(x))
        band = (np.abs(level(x)) < eps) & keep(x)
        if band.any():
            xb = x[band]
            g = fd_gradient(level, xb)
            gn = np.linalg.norm(g, axis=1)
            nu = sign * g / gn[:, None]
            out[band] = w.eval(xb) * gn * _gauge_factor(gauge, nu) / (2 * eps)
        return out

    lo = np.asarray(region.bbox[0]) - eps
    hi = np.asarray(region.bbox[1]) + eps
    vol = float(np.prod(hi - lo))

    def sampler(rng, m):
        return lo + (hi - lo) * rng.uniform(size=(m, len(lo))), np.full(m, vol)

    return mc_estimates(integrand, sampler, samples, seed)[0]


@dataclass
class EnergyReport:
    volume_w: Estimate
    free_perimeter_w: Estimate
    wetted_area_w: Estimate
    energy: Estimate
    neumann_c: float
    quotient: Estimate
    lam: float
    dimension: float
    identity_gap: Optional[Estimate] = None
    notes: list = field(default_factory=list)


def _quotient(energy: Estimate, vol: Estimate, N: float) -> Estimate:
    power = (N - 1.0) / N
    val = energy.value / vol.value ** power
    g_e = 1.0 / vol.value ** power
    g_v = -power * energy.value / vol.value ** (power + 1)
    return combine(val, [energy, vol], [g_e, g_v])


def capillary_energy(region: Region, E: Optional[ConvexObstacle], w: WeightModel, lam: float,
                     samples: int = DEFAULT_SAMPLES, seed: int = 0, gauge: Optional[Gauge] = None,
                     volume_method: str = "auto") -> EnergyReport:
    """``J = ∫_Σ w - lam ∫_Γ w`` with volume, the Neumann constant ``J/∫w`` and the quotient.

    For caps centred at the origin over their own half-space, the flux identity
    ``J(B_r) = (n+α) ∫ w / r`` is cross-checked when it applies.
    """
    if not -1.0 < lam < 1.0:
        raise ValueError("lambda must lie in (-1, 1)")
    if E is not None and region.obstacle is not None and E != region.obstacle:
        raise ValueError("region was built against a different obstacle")
    n = region.n
    N = n + w.alpha
    vol = weighted_volume(region, w, samples, seed, volume_method)
    free = weighted_boundary_integral(region, "free", w, gauge, samples, seed + 1)
    wet = weighted_boundary_integral(region, "wetted", w, gauge, samples, seed + 2)
    value = free.value - lam * wet.value
    energy = combine(value, [free, wet], [1.0, -lam])
    notes = []
    c = value / vol.value if vol.value > 0 else math.nan
    quotient = _quotient(energy, vol, N) if vol.value > 0 else Estimate(math.nan)
    gap = None
    if region.kind == "spherical_cap":
        r, cap_lam = region.params["r"], region.params["lam"]
        if abs(cap_lam - lam) > 1e-15:
            notes.append("flux identity skipped: lambda differs from the cap's contact parameter")
        elif lam != 0 and not w.xn_independent:
            notes.append("flux identity skipped: assumption not declared (weight not xn-independent)")
        else:
            target = vol.scaled(N / r)
            diff = energy - target
            rel = diff.value / target.value
            gap = Estimate(rel, diff.std_error / target.value, diff.samples, diff.seed, diff.method)
    return EnergyReport(vol, free, wet, energy, c, quotient, lam, N, gap, notes)


@dataclass
class IsoReport:
    shape_id: str
    n: int
    alpha: float
    lam: float
    energy: Optional[EnergyReport]
    quotient: Estimate
    reference: Estimate
    deficit: Estimate
    z_score: float
    status: str = "ok"

    def csv_row(self) -> list:
        e = self.energy
        return [self.shape_id, self.n, _num(self.alpha), _num(self.lam),
                _num(e.volume_w.value), _num(e.volume_w.std_error), _num(e.energy.value),
                _num(e.energy.std_error), _num(self.quotient.value), _num(self.reference.value),
                _num(self.deficit.value), _num(self.z_score)]


CSV_COLUMNS = ["shape_id", "n", "alpha", "lambda", "volume_w", "volume_se", "energy", "energy_se",
               "quotient", "reference_quotient", "deficit", "z_score"]


def _num(v) -> str:
    return f"{float(v):.12g}"


def reference_quotient(n: int, w: WeightModel, lam: float, samples: int = DEFAULT_SAMPLES,
                       seed: int = 0) -> Estimate:
    """Quotient of the unit cap ``B^lam`` over ``{x_n <= lam}``."""
    rep = capillary_energy(spherical_cap_region(1.0, lam, n), None, w, lam, samples, seed)
    return rep.quotient


def iso_quotient_report(region: Region, E: Optional[ConvexObstacle], w: WeightModel, lam: float,
                        samples: int = DEFAULT_SAMPLES, seed: int = 0, shape_id: str = "region",
                        reference: Optional[Estimate] = None,
                        volume_method: str = "auto") -> IsoReport:
    """Quotient of ``region`` against the unit-cap reference, with deficit and z-score.

    The reference uses an independent seed so the two errors combine in quadrature.
    """
    rep = capillary_energy(region, E, w, lam, samples, seed, volume_method=volume_method)
    if reference is None:
        reference = reference_quotient(region.n, w, lam, samples, seed + 1000)
    vol = rep.volume_w
    if not vol.value > 0 or vol.value <= 3 * vol.std_error:
        nan = Estimate(math.nan)
        return IsoReport(shape_id, region.n, w.alpha, lam, rep, nan, reference, nan, math.nan,
                         "error: weighted volume is indistinguishable from zero")
    deficit = rep.quotient - reference
    return IsoReport(shape_id, region.n, w.alpha, lam, rep, rep.quotient, reference, deficit,
                     deficit.z_score(0.0))


def boundary_flux_balance(n: int, w: WeightModel, lam: float = 0.0, resolution: Optional[int] = None):
    """``∫_{∂B_1 \\ H} w ν_n`` against ``∫_{B_1 ∩ ∂H} w`` for ``H = {x_n <= lam}``."""
    region = spherical_cap_region(1.0, lam, n)
    res = resolution or default_resolution(n)
    f = lambda x, nu: w.eval(x) * nu[:, -1]
    top = sum(p.integrate(f, res) for p in region.free)
    top_c = sum(p.integrate(f, res // 2) for p in region.free)
    base = weighted_boundary_integral(region, "wetted", w, resolution=res)
    return Estimate(top, abs(top - top_c), 0, None, "parametric_quadrature"), base


# --------------------------------------------------------------------------- shape family


def shape_family(obstacle: str, n: int = 2) -> list[tuple[str, Region]]:
    """Bundled test shapes against ``{x_n <= 0}`` (``"half_space"``) or the unit ball (``"ball"``)."""
    e = np.eye(n)[-1]
    if obstacle == "half_space":
        E = lower_half_space(n)
        return [
            ("half_ball", spherical_cap_region(1.0, 0.0, n)),
            ("shifted_cap", ball_region(0.4 * e + 0.3 * np.eye(n)[0], 0.8, E)),
            ("half_ellipse", half_ellipse_region(1.0, 2.0, n, E)),
            ("wall_box", wall_box_region(0.5, 0.8, n, E)),
            ("detached_ball", ball_region(2.0 * e, 0.7, E)),
        ]
    if obstacle == "ball":
        E = ball(np.zeros(n), 1.0)
        return [
            ("half_ball", ball_region(e, 0.5, E)),
            ("shifted_cap", ball_region(1.3 * e, 0.6, E)),
            ("half_ellipse", half_ellipse_region(0.5, 1.0, n, E, center=e)),
            ("wall_box", wall_box_region(0.4, 0.8, n, E, base=1.0, lift=0.2)),
            ("detached_ball", ball_region(3.0 * e, 0.7, E)),
        ]
    raise ValueError(f"unknown obstacle family {obstacle!r}")


def family_weights(obstacle: str) -> list[WeightModel]:
    """Weights admissible for each family: ``x_n`` only where its root is concave outside E."""
    from .weights import constant, monomial_xn
    if obstacle == "half_space":
        return [constant(), monomial_xn(1.0)]
    return [constant()]


def write_iso_csv(path, reports: list[IsoReport], header: Optional[str] = None) -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        for r in reports:
            wr.writerow(r.csv_row())
