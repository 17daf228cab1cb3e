"""Weighted distribution functions and the half-ball radial rearrangement."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .estimate import CheckResult, Estimate, ValidationReport, sample_means
from .geometry import Region, spherical_cap_region
from .measure import weighted_boundary_integral
from .weights import DomainError, WeightModel

DEFAULT_LEVELS = 64
DEFAULT_SAMPLES = 1_000_000


class DomainRescaleError(DomainError):
    """The field's domain carries more weighted volume than the unit half-ball."""


@dataclass(frozen=True)
class ScalarField:
    """A nonnegative function on a region, with optional analytic gradient.

    ``neumann`` declares a vanishing normal derivative on the wetted boundary;
    ``zero_trace`` declares ``u = 0`` on the free boundary.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    domain: Region
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    neumann: bool = False
    zero_trace: bool = False
    name: str = "field"
    sup: Optional[float] = None
    sobolev: bool = True
    profile: Optional["SymmetrizationProfile"] = None

    def __call__(self, x) -> np.ndarray:
        return self.eval(np.atleast_2d(np.asarray(x, dtype=float)))


def half_ball_constant(n: int, w: WeightModel) -> float:
    """``C_{n,w} = ∫_{B_1 ∩ R^n_+} w``, via the hemisphere integral divided by ``n + alpha``."""
    cap = spherical_cap_region(1.0, 0.0, n)
    return weighted_boundary_integral(cap, "free", w).value / (n + w.alpha)


# --------------------------------------------------------------------------- bundled fields


def field_one_minus_r(n: int = 2) -> ScalarField:
    def g(x):
        r = np.linalg.norm(x, axis=1, keepdims=True)
        return -x / np.where(r > 0, r, 1.0)
    return ScalarField(lambda x: 1.0 - np.linalg.norm(x, axis=1), spherical_cap_region(1, 0, n), g,
                       neumann=True, zero_trace=True, name="one_minus_r", sup=1.0)


def field_coordinate_xn(n: int = 2) -> ScalarField:
    def g(x):
        out = np.zeros_like(x)
        out[:, -1] = 1.0
        return out
    return ScalarField(lambda x: np.clip(x[:, -1], 0.0, None), spherical_cap_region(1, 0, n), g,
                       neumann=False, zero_trace=False, name="coordinate_xn", sup=1.0)


def field_plateau(n: int = 2, center=None, radius: float = 0.35) -> ScalarField:
    """Indicator of a ball meeting the wall (a sub-cap) inside the unit half-ball."""
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    if center is None:
        c[0], c[-1] = 0.3, 0.2
    return ScalarField(lambda x: (np.linalg.norm(x - c, axis=1) < radius).astype(float),
                       spherical_cap_region(1, 0, n), lambda x: np.zeros_like(x),
                       neumann=False, zero_trace=True, name="plateau", sup=1.0, sobolev=False)


def field_tilted(n: int = 2, tilt: float = 0.5) -> ScalarField:
    """``(1 - |x|^2)(1 + tilt x_1)``: vanishes on the sphere, flat in ``x_n`` at the wall."""
    def ev(x):
        return (1.0 - np.einsum("ij,ij->i", x, x)) * (1.0 + tilt * x[:, 0])

    def g(x):
        r2 = np.einsum("ij,ij->i", x, x)
        out = -2.0 * x * (1.0 + tilt * x[:, :1])
        out[:, 0] += tilt * (1.0 - r2)
        return out
    return ScalarField(ev, spherical_cap_region(1, 0, n), g, neumann=True, zero_trace=True,
                       name="tilted", sup=None)


def bundled_fields(n: int = 2) -> list[ScalarField]:
    return [field_one_minus_r(n), field_coordinate_xn(n), field_plateau(n), field_tilted(n)]


# --------------------------------------------------------------------------- profiles


def _pav_decreasing(y: np.ndarray, w: Optional[np.ndarray] = None) -> np.ndarray:
    """Pool-adjacent-violators fit of a non-increasing sequence."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    vals, wts, sizes = [], [], []
    for yi, wi in zip(y, w):
        vals.append(yi)
        wts.append(wi)
        sizes.append(1)
        while len(vals) > 1 and vals[-2] < vals[-1]:
            v = (vals[-2] * wts[-2] + vals[-1] * wts[-1]) / (wts[-2] + wts[-1])
            wsum = wts[-2] + wts[-1]
            n = sizes[-2] + sizes[-1]
            vals[-2:], wts[-2:], sizes[-2:] = [v], [wsum], [n]
    return np.repeat(vals, sizes)

# pieces starting this close to the full mass are the boundary trace of u*, not interior slope
RIM_TOL = 1e-4


@dataclass
class SymmetrizationProfile:
    """Distribution function ``mu(t) = ∫_{u>t} w`` on a level grid and its inverse ``u#``.

    ``mu_left`` holds ``∫_{u>=t} w``; the pair brackets each atom of ``u`` so
    plateaus map to flat pieces of ``u#``.
    """

    t_grid: np.ndarray
    mu: list
    mu_left: np.ndarray
    c_nw: float
    dimension: float
    s_nodes: np.ndarray = field(default=None)
    t_nodes: np.ndarray = field(default=None)
    cov: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.s_nodes is None:
            mu = _pav_decreasing(np.array([m.value for m in self.mu]))
            left = np.maximum(_pav_decreasing(self.mu_left), mu)
            # nodes in increasing s: (mu(t_i), t_i), (mu(t_i^-), t_i) for t from the top down
            s = np.empty(2 * len(mu))
            t = np.empty(2 * len(mu))
            s[0::2] = mu[::-1]
            s[1::2] = left[::-1]
            t[0::2] = self.t_grid[::-1]
            t[1::2] = self.t_grid[::-1]
            self.s_nodes = np.maximum.accumulate(s)
            self.t_nodes = t

    @property
    def mu_values(self) -> np.ndarray:
        return np.array([m.value for m in self.mu])

    @property
    def mu_se(self) -> np.ndarray:
        return np.array([m.std_error for m in self.mu])

    @property
    def r_of_t(self) -> np.ndarray:
        return (np.clip(self.mu_values, 0, None) / self.c_nw) ** (1.0 / self.dimension)

    def u_sharp(self, s) -> np.ndarray:
        """Non-increasing generalised inverse of ``mu``, zero beyond the support."""
        s = np.asarray(s, dtype=float)
        return np.interp(s, self.s_nodes, self.t_nodes, left=self.t_nodes[0], right=0.0)

    def u_sharp_slope(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        ds = np.diff(self.s_nodes)
        dt = np.diff(self.t_nodes)
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.where(ds > 0, dt / ds, 0.0)
        k = np.clip(np.searchsorted(self.s_nodes, s, side="right") - 1, 0, len(ds) - 1)
        return np.where(s < self.s_nodes[-1], slope[k], 0.0)

    def radius_at_level(self, t: float) -> float:
        """Radius where ``u*`` crosses level ``t`` (interpolated through the profile)."""
        return float((self.mu_at(t) / self.c_nw) ** (1.0 / self.dimension))

    def mu_at(self, t: float) -> float:
        """``s`` with ``u#(s) = t`` from the interpolant (inverse of a monotone piecewise-linear map)."""
        s, tt = self.s_nodes[::-1], self.t_nodes[::-1]
        return float(np.interp(t, tt, s))

    def ds_dt(self, t: float, window: float = 0.0) -> float:
        """``-mu'(t)`` from a least-squares quadratic over levels within ``window`` of ``t``."""
        mu = self.mu_values
        tg = self.t_grid
        idx = np.flatnonzero(np.abs(tg - t) <= window)
        if len(idx) < 3:
            i = int(np.clip(np.searchsorted(tg, t), 1, len(tg) - 2))
            idx = np.array([i - 1, i, i + 1])
        coef = np.polyfit(tg[idx], mu[idx], 2)
        return float(-np.polyval(np.polyder(coef), t))

    def energy(self, p: float) -> float:
        """``∫ w |∇u*|^p`` over the half-ball, exact for the piecewise-linear ``u#``.

        With ``s = C|x|^N``, the integral is ``∫ |u#'(s)|^p (N C^{1/N} s^{(N-1)/N})^p ds``.
        """
        N, C = self.dimension, self.c_nw
        g = p * (N - 1.0) / N
        s, t = self.s_nodes, self.t_nodes
        rim = s[-1] * (1.0 - RIM_TOL)
        total = 0.0
        for a, b, ta, tb in zip(s[:-1], s[1:], t[:-1], t[1:]):
            if ta == tb or b == 0.0 or a >= rim:
                # flat pieces, the null spike at s = 0 and the trace jump at the rim carry no energy
                continue
            if b <= a:
                return math.inf
            m = abs((tb - ta) / (b - a))
            total += m ** p * N ** p * C ** (p / N) * (b ** (g + 1) - a ** (g + 1)) / (g + 1)
        return total

    def moment(self, q: float) -> float:
        """``∫ w |u*|^q = ∫_0^C u#(s)^q ds``, exact for the piecewise-linear ``u#``."""
        s, t = self.s_nodes, self.t_nodes
        total = 0.0
        for a, b, ta, tb in zip(s[:-1], s[1:], t[:-1], t[1:]):
            if b <= a:
                continue
            if ta == tb:
                total += (b - a) * abs(ta) ** q
            else:
                total += (b - a) * (tb ** (q + 1) - ta ** (q + 1)) / ((q + 1) * (tb - ta))
        return total

    def moment_se(self, q: float) -> float:
        """Standard error of :meth:`moment` from the covariance of the level masses (delta method)."""
        return self._delta_se(lambda prof: prof.moment(q))

    def energy_se(self, p: float) -> float:
        """Standard error of :meth:`energy` by the same delta method."""
        return self._delta_se(lambda prof: prof.energy(p))

    def _delta_se(self, fn) -> float:
        cov = self.cov
        if cov is None:
            return 0.0
        L = len(self.t_grid)
        base = np.concatenate([self.mu_values, self.mu_left])
        g = np.zeros(2 * L)
        for i in range(2 * L):
            h = 1e-6 * max(abs(base[i]), 1e-3)
            hi, lo = base.copy(), base.copy()
            hi[i] += h
            lo[i] -= h
            g[i] = (fn(self._with_masses(hi)) - fn(self._with_masses(lo))) / (2 * h)
        return float(math.sqrt(max(g @ cov @ g, 0.0)))

    def _with_masses(self, vec: np.ndarray) -> "SymmetrizationProfile":
        L = len(self.t_grid)
        return SymmetrizationProfile(self.t_grid, [Estimate(v) for v in vec[:L]], vec[L:], self.c_nw,
                                     self.dimension)

    def mu_se_at(self, t) -> np.ndarray:
        return np.interp(t, self.t_grid, self.mu_se)

    def to_csv(self, path, header: Optional[str] = None) -> None:
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["t", "mu", "mu_se", "r_of_t"])
            for t, m, se, r in zip(self.t_grid, self.mu_values, self.mu_se, self.r_of_t):
                wr.writerow([f"{t:.12g}", f"{m:.12g}", f"{se:.12g}", f"{r:.12g}"])


def _field_range(u: ScalarField, seed: int) -> tuple[float, float]:
    rng = np.random.default_rng([seed, 1])
    pts, _ = u.domain.volume_sampler()(rng, 1 << 18)
    vals = u.eval(pts[u.domain.indicator(pts)])
    hi = float(u.sup) if u.sup is not None else float(np.max(vals, initial=0.0))
    return (float(np.min(vals)) if vals.size else 0.0), hi


def default_levels(u: ScalarField, levels: int, seed: int) -> np.ndarray:
    """Uniform levels over the sampled range of ``u``.

    When ``u`` stays well above zero the grid starts at its sampled minimum and
    keeps ``t = 0`` as an extra first level, so every level resolves the field
    and the drop to zero sits entirely at the rim.
    """
    lo, hi = _field_range(u, seed)
    if lo > 0.05 * hi and hi - lo > 1e-9 * hi:
        return np.concatenate([[0.0], np.linspace(lo, hi, levels)])
    return np.linspace(0.0, hi, levels + 1)


def _level_integrand(u: ScalarField, w: WeightModel, t_grid: np.ndarray):
    ind = u.domain.indicator

    def f(x):
        inside = ind(x)
        vals = np.where(inside, u.eval(x), -np.inf)
        wx = np.where(inside, w.eval(x), 0.0)
        gt = (vals[:, None] > t_grid[None, :]) * wx[:, None]
        ge = (vals[:, None] >= t_grid[None, :]) * wx[:, None]
        return np.hstack([gt, ge])

    return f


def distribution_function(u: ScalarField, w: WeightModel, t_grid: Optional[Sequence[float]] = None,
                          samples: int = DEFAULT_SAMPLES, seed: int = 0,
                          levels: int = DEFAULT_LEVELS, c_nw: Optional[float] = None) -> SymmetrizationProfile:
    """``mu(t)`` on a level grid from one shared sample set (common random numbers)."""
    if t_grid is None:
        t_grid = default_levels(u, levels, seed)
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be increasing")
    n = u.domain.n
    mean, cov = sample_means(_level_integrand(u, w, t_grid), u.domain.volume_sampler(), samples, seed)
    L = len(t_grid)
    se = np.sqrt(np.clip(np.diag(cov), 0, None))
    mu = [Estimate(float(mean[i]), float(se[i]), samples, seed, "monte_carlo") for i in range(L)]
    c = half_ball_constant(n, w) if c_nw is None else c_nw
    return SymmetrizationProfile(t_grid, mu, mean[L:], c, n + w.alpha, cov=cov)


def symmetrize(u: ScalarField, w: WeightModel, levels: int = DEFAULT_LEVELS,
               samples: int = DEFAULT_SAMPLES, seed: int = 0, sigma: float = 3.0) -> ScalarField:
    """``u*(x) = u#(C |x|^N)`` on the unit half-ball."""
    prof = distribution_function(u, w, None, samples, seed, levels)
    total = prof.mu_left[0]
    cov = prof.cov
    L = len(prof.t_grid)
    total_se = math.sqrt(max(cov[L, L], 0.0))
    if total > prof.c_nw + sigma * total_se + 1e-12 * prof.c_nw:
        raise DomainRescaleError(
            f"weighted volume {total:.6g} exceeds C_n,w = {prof.c_nw:.6g}; rescale the domain")
    return star_from_profile(prof, u.domain.n, name=f"{u.name}*", neumann=u.neumann,
                             zero_trace=u.zero_trace, sobolev=u.sobolev)


def star_from_profile(prof: SymmetrizationProfile, n: int, name: str = "u*", **flags) -> ScalarField:
    N, C = prof.dimension, prof.c_nw

    def ev(x):
        r = np.linalg.norm(x, axis=1)
        return prof.u_sharp(C * r ** N)

    def g(x):
        r = np.linalg.norm(x, axis=1)
        slope = prof.u_sharp_slope(C * r ** N)
        radial = slope * N * C * r ** (N - 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = radial[:, None] * x / r[:, None]
        return np.nan_to_num(out)

    return ScalarField(ev, spherical_cap_region(1.0, 0.0, n), g, name=name,
                       sup=float(prof.t_nodes[0]), profile=prof, **flags)


def radial_slice(u_star: ScalarField, points: int = 101) -> tuple[np.ndarray, np.ndarray]:
    n = u_star.domain.n
    r = np.linspace(0.0, 1.0, points)
    x = np.zeros((points, n))
    x[:, -1] = r
    return r, u_star.eval(x)


def write_slice_csv(path, u_star: ScalarField, points: int = 101, header: Optional[str] = None) -> None:
    r, v = radial_slice(u_star, points)
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["r", "u_star"])
        for a, b in zip(r, v):
            wr.writerow([f"{a:.12g}", f"{b:.12g}"])


# --------------------------------------------------------------------------- checks


def _moments(u: ScalarField, w: WeightModel, t_check, qs, samples, seed):
    ind = u.domain.indicator

    def f(x):
        inside = ind(x)
        vals = np.where(inside, u.eval(x), 0.0)
        wx = np.where(inside, w.eval(x), 0.0)
        cols = [(vals[:, None] > t_check[None, :]) * wx[:, None]]
        cols.append(np.abs(vals[:, None]) ** np.asarray(qs)[None, :] * wx[:, None])
        return np.hstack(cols)

    mean, cov = sample_means(f, u.domain.volume_sampler(), samples, seed)
    return mean, np.sqrt(np.clip(np.diag(cov), 0, None))


def check_equimeasurable(u: ScalarField, u_star: ScalarField, w: WeightModel, q_list=(1, 2, 6),
                         samples: int = DEFAULT_SAMPLES, seed: int = 0, t_check=None,
                         sigma: float = 3.0, coarea_t: float = 0.5, coarea_h: float = 0.05,
                         coarea_tol: float = 0.01, coarea_samples: int = 4 * DEFAULT_SAMPLES
                         ) -> ValidationReport:
    """Distribution functions, ``L^q`` moments and the radial coarea identity of ``u*``.

    Both fields are sampled with the same seed; the joint error adds the two
    standard errors in quadrature, which is conservative under the positive
    correlation this induces.
    """
    rep = ValidationReport(subject=f"equimeasurability {u.name} vs {u_star.name} ({w.spec})")
    sup = max(_field_range(u, seed)[1], 1e-300)
    if t_check is None:
        t_check = sup * np.linspace(0.05, 0.95, 10)
    t_check = np.asarray(t_check, dtype=float)
    qs = list(q_list)
    a, sa = _moments(u, w, t_check, qs, samples, seed)
    b, sb = _moments(u_star, w, t_check, qs, samples, seed)
    L = len(t_check)
    prof = u_star.profile
    extra = np.zeros(len(a))
    if prof is not None:
        # u* is itself built from a sampled profile; carry that error too
        extra[:L] = prof.mu_se_at(t_check)
        extra[L:] = [prof.moment_se(q) for q in qs]
    joint = np.sqrt(sa ** 2 + sb ** 2 + extra ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(joint > 0, (a - b) / joint, np.where(a == b, 0.0, np.inf))
    zl = z[:L]
    i = int(np.argmax(np.abs(zl)))
    ok = bool(np.all(np.abs(zl) <= sigma))
    rep.add(CheckResult("equimeasurable", ok, sigma, None if ok else {"t": t_check[i], "mu_u": a[i],
                        "mu_star": b[i], "z": zl[i]}, float(np.max(np.abs(zl)))))
    for k, q in enumerate(qs):
        zq = float(z[L + k])
        ok = abs(zq) <= sigma
        rep.add(CheckResult(f"lq_norm_q{q:g}", ok, sigma,
                            None if ok else {"u": a[L + k], "u_star": b[L + k], "z": zq}, zq))
    if prof is not None and u_star.sobolev and coarea_t + coarea_h <= prof.t_grid[-1]:
        lo_hi = np.array([coarea_t - coarea_h, coarea_t + coarea_h])
        m, _ = _moments(u_star, w, lo_hi, [], coarea_samples, seed + 7)
        fd = (m[0] - m[1]) / (2 * coarea_h)
        radial = coarea_radial(prof, coarea_t, coarea_h)
        gap = abs(fd - radial) / abs(radial)
        ok = bool(gap < coarea_tol)
        rep.add(CheckResult("coarea_radial", ok, coarea_tol,
                            None if ok else {"fd": fd, "radial": radial}, float(gap),
                            detail=f"-mu'({coarea_t}) fd={fd:.6g} radial={radial:.6g}"))
    return rep


def coarea_radial(prof: SymmetrizationProfile, t: float, window: float = 0.05) -> float:
    """``∫_{u*=t} w/|∇u*| = r^{N-1} P_+ / |∂_r u*|`` at ``r = r(t)``, ``P_+ = N C``.

    ``∂_r u*`` is taken from a local quadratic fit of the profile levels.
    """
    N, C = prof.dimension, prof.c_nw
    s = prof.mu_at(t)
    r = (s / C) ** (1.0 / N)
    dudr = N * C * r ** (N - 1) / prof.ds_dt(t, window)
    return r ** (N - 1) * N * C / dudr


def idempotence_gap(u: ScalarField, w: WeightModel, probes: int = 1000, samples: int = DEFAULT_SAMPLES,
                    seed: int = 0, levels: int = DEFAULT_LEVELS) -> float:
    """Max ``|u**(x) - u*(x)|`` on random half-ball probes."""
    s1 = symmetrize(u, w, levels, samples, seed)
    s2 = symmetrize(s1, w, levels, samples, seed + 1)
    rng = np.random.default_rng(seed + 2)
    pts, _ = s1.domain.uniform_sampler()(rng, 4 * probes)
    pts = pts[s1.domain.indicator(pts)][:probes]
    return float(np.max(np.abs(s2.eval(pts) - s1.eval(pts))))


def check_field(u: ScalarField, probes: int = 1000, seed: int = 0) -> ValidationReport:
    """Nonnegativity on the domain and zero trace on the free boundary when declared."""
    rep = ValidationReport(subject=f"field {u.name}")
    rng = np.random.default_rng(seed)
    pts, _ = u.domain.volume_sampler()(rng, 4 * probes)
    pts = pts[u.domain.indicator(pts)]
    v = u.eval(pts)
    i = int(np.argmin(v)) if len(v) else 0
    ok = bool(len(v) == 0 or v[i] >= 0)
    rep.add(CheckResult("nonnegative", ok, 0.0, None if ok else {"x": pts[i]}, float(v.min(initial=0))))
    if u.zero_trace and u.domain.free:
        b = np.concatenate([p.sample(rng, probes) for p in u.domain.free])
        tv = np.abs(u.eval(b))
        ok = bool(tv.max() <= 1e-9)
        rep.add(CheckResult("zero_trace", ok, 1e-9, None if ok else {"x": b[int(np.argmax(tv))]},
                            float(tv.max())))
    return rep
