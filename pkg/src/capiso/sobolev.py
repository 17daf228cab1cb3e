"""Sobolev quotients, extremal profiles and the sharp half-space constant."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.integrate import quad
from scipy.special import beta as beta_fn

from .estimate import Estimate, combine, mc_estimates, ratio_power, sample_means
from .geometry import spherical_cap_region, upper_half_space
from .measure import ConfigurationError, weighted_boundary_integral
from .rearrange import ScalarField, half_ball_constant, symmetrize
from .weights import WeightModel, fd_gradient

DEFAULT_SAMPLES = 1_000_000
TAIL_RADIUS = 50.0


@dataclass(frozen=True)
class SobolevSetting:
    n: int
    p: float
    weight: WeightModel

    def __post_init__(self):
        if self.n < self.weight.min_dim:
            raise ConfigurationError(f"weight {self.weight.spec} needs n >= {self.weight.min_dim}")
        if not 1.0 < self.p < self.N:
            raise ConfigurationError(f"p must lie in (1, n+alpha) = (1, {self.N:g}); got {self.p:g}")

    @property
    def alpha(self) -> float:
        return self.weight.alpha

    @property
    def N(self) -> float:
        return self.n + self.weight.alpha

    @property
    def p_star(self) -> float:
        return self.N * self.p / (self.N - self.p)

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def k(self) -> float:
        return (self.N - self.p) / self.p


# --------------------------------------------------------------------------- bubbles


@dataclass(frozen=True)
class Bubble:
    """``U(x) = (eta^{1/(p-1)} / (eta^q + |x - x0|^q))^k`` with ``q = p/(p-1)``, ``k = (N-p)/p``."""

    setting: SobolevSetting
    eta: float = 1.0
    x0: Optional[tuple] = None

    def center(self, n: int) -> np.ndarray:
        return np.zeros(n) if self.x0 is None else np.asarray(self.x0, dtype=float)

    def radial(self, r) -> np.ndarray:
        s = self.setting
        r = np.asarray(r, dtype=float)
        return (self.eta ** (1.0 / (s.p - 1.0)) / (self.eta ** s.q + r ** s.q)) ** s.k

    def radial_derivative(self, r) -> np.ndarray:
        s = self.setting
        r = np.asarray(r, dtype=float)
        return -s.k * s.q * r ** (s.q - 1.0) * self.radial(r) / (self.eta ** s.q + r ** s.q)

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.radial(np.linalg.norm(x - self.center(x.shape[1]), axis=1))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        d = x - self.center(x.shape[1])
        r = np.linalg.norm(d, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            g = (self.radial_derivative(r) / r)[:, None] * d
        return np.where(r[:, None] > 0, g, 0.0)


@dataclass(frozen=True)
class BubbleEval:
    value: float | np.ndarray
    gradient: np.ndarray
    at_center: bool | np.ndarray


def bubble_eval(b: Bubble, x) -> BubbleEval:
    """Value and analytic gradient; the gradient at the centre is zero and flagged."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    pts = np.atleast_2d(arr)
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite point")
    v = b.value(pts)
    g = b.gradient(pts)
    flag = np.linalg.norm(pts - b.center(pts.shape[1]), axis=1) == 0
    if single:
        return BubbleEval(float(v[0]), g[0], bool(flag[0]))
    return BubbleEval(v, g, flag)


def bubble_field(setting: SobolevSetting, eta: float = 1.0) -> ScalarField:
    """The bubble centred on the wall, on the whole upper half-space."""
    b = Bubble(setting, eta)
    return ScalarField(b.value, upper_half_space(setting.n, scale=eta), b.gradient, neumann=True,
                       zero_trace=False, name=f"bubble(eta={eta:g})", sup=1.0 / eta ** (setting.k / (setting.p - 1)))


def bubble_half_ball_field(setting: SobolevSetting) -> ScalarField:
    """The unit bubble restricted to the unit half-ball (radial about the wall centre)."""
    b = Bubble(setting)
    return ScalarField(b.value, spherical_cap_region(1.0, 0.0, setting.n), b.gradient, neumann=True,
                       zero_trace=False, name="bubble_half_ball", sup=1.0)


# --------------------------------------------------------------------------- quotients


def _grad(u: ScalarField, x: np.ndarray) -> np.ndarray:
    return u.grad(x) if u.grad is not None else fd_gradient(u.eval, x)


def sobolev_quotient(u: ScalarField, setting: SobolevSetting, samples: int = DEFAULT_SAMPLES,
                     seed: int = 0) -> Estimate:
    """``∫ w|∇u|^p / (∫ w|u|^{p*})^{p/p*}`` by Monte Carlo with the delta method.

    A vanishing denominator gives a NaN estimate.
    """
    w, p, ps = setting.weight, setting.p, setting.p_star
    ind = u.domain.indicator

    def f(x):
        inside = ind(x)
        wx = np.where(inside, w.eval(x), 0.0)
        g = np.linalg.norm(_grad(u, x), axis=1)
        v = np.abs(np.where(inside, u.eval(x), 0.0))
        return np.column_stack([wx * g ** p, wx * v ** ps])

    mean, cov = sample_means(f, u.domain.volume_sampler(), samples, seed)
    if not mean[1] > 0:
        return Estimate(math.nan, math.nan, samples, seed, "monte_carlo")
    val, se = ratio_power(mean[0], mean[1], p / ps, cov)
    return Estimate(val, se, samples, seed, "monte_carlo")


# --------------------------------------------------------------------------- sharp constant


def hemisphere_integral(n: int, w: WeightModel) -> Estimate:
    """``P_+ = ∫_{S^{n-1} ∩ {x_n > 0}} w`` by parametric quadrature."""
    cap = spherical_cap_region(1.0, 0.0, n)
    return weighted_boundary_integral(cap, "free", w)


def hemisphere_integral_mc(n: int, w: WeightModel, samples: int, seed: int) -> Estimate:
    """``P_+`` as hemisphere area times the mean of ``w`` over uniform directions."""
    area = math.pi ** (n / 2) / math.gamma(n / 2)

    def sampler(rng, m):
        u = rng.normal(size=(m, n))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        u[:, -1] = np.abs(u[:, -1])
        return u, np.full(m, area)

    return mc_estimates(w.eval, sampler, samples, seed)[0]


def _tail_series(A: float, e: float, eta: float, q: float, m: float, R: float, terms: int = 8):
    """``∫_R^∞ A r^e (1 + eta^q r^{-q})^{-m} dr`` from the binomial series; returns (value, last term)."""
    total, last, coef = 0.0, 0.0, 1.0
    for j in range(terms):
        ex = e - q * j + 1.0
        last = A * coef * eta ** (q * j) * R ** ex / (-ex)
        total += last
        coef *= -(m + j) / (j + 1.0)
    return total, abs(last)


@lru_cache(maxsize=8)
def _panels(R: float, count: int, order: int):
    edges = np.concatenate([[0.0], np.geomspace(1e-4, R, count)])
    g, gw = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    r = (0.5 * (b - a) * g + 0.5 * (a + b)).ravel()
    wts = (0.5 * (b - a) * gw).ravel()
    return r, wts


def radial_integrals(setting: SobolevSetting, eta: float = 1.0, R: Optional[float] = None,
                     panels: int = 48, order: int = 24):
    """``I1 = ∫_0^∞ U^{p*} r^{N-1}`` and ``I2 = ∫_0^∞ |U'|^p r^{N-1}`` by composite Gauss-Legendre
    on ``[0, R]`` plus the algebraic tail; each with an error estimate."""
    s = setting
    R = TAIL_RADIUS * eta if R is None else R
    b = Bubble(s, eta)
    N, p, q, k = s.N, s.p, s.q, s.k

    def body(pc, od):
        r, wts = _panels(R, pc, od)
        i1 = np.sum(wts * b.radial(r) ** s.p_star * r ** (N - 1))
        i2 = np.sum(wts * np.abs(b.radial_derivative(r)) ** p * r ** (N - 1))
        return i1, i2

    f1, f2 = body(panels, order)
    c1, c2 = body(panels // 2, order // 2)
    t1, l1 = _tail_series(eta ** (N / (p - 1)), N - 1 - q * N, eta, q, N, R)
    t2, l2 = _tail_series((k * q) ** p * eta ** ((N - p) / (p - 1)), q + N - 1 - q * N, eta, q, N, R)
    return (Estimate(f1 + t1, abs(f1 - c1) + l1 + 1e-14 * f1, 0, None, "parametric_quadrature"),
            Estimate(f2 + t2, abs(f2 - c2) + l2 + 1e-14 * f2, 0, None, "parametric_quadrature"))


def radial_integrals_beta(setting: SobolevSetting) -> tuple[float, float]:
    """Closed forms of the two radial integrals for ``eta = 1`` via the Beta function."""
    N, q, k, p = setting.N, setting.q, setting.k, setting.p
    i1 = beta_fn(N / q, N - N / q) / q
    i2 = (k * q) ** p * beta_fn((N + q) / q, N - (N + q) / q) / q
    return float(i1), float(i2)


def radial_integrals_oracle(setting: SobolevSetting) -> tuple[Estimate, Estimate]:
    """Adaptive quadrature on ``[0, ∞)`` (scipy), split at 1."""
    b = Bubble(setting)
    N, p = setting.N, setting.p
    f1 = lambda r: b.radial(r) ** setting.p_star * r ** (N - 1)
    f2 = lambda r: abs(float(b.radial_derivative(r))) ** p * r ** (N - 1)
    out = []
    for f in (f1, f2):
        a, ea = quad(f, 0.0, 1.0, epsabs=0, epsrel=1e-12, limit=200)
        c, ec = quad(f, 1.0, np.inf, epsabs=0, epsrel=1e-12, limit=200)
        out.append(Estimate(a + c, ea + ec, 0, None, "parametric_quadrature"))
    return out[0], out[1]


def _constant_from(P: Estimate, i1: Estimate, i2: Estimate, setting: SobolevSetting) -> Estimate:
    """``C = (P I1)^{(N-p)/N} / (P I2)`` with first-order error propagation."""
    e = (setting.N - setting.p) / setting.N
    val = (P.value * i1.value) ** e / (P.value * i2.value)
    grads = [(e - 1.0) * val / P.value, e * val / i1.value, -val / i2.value]
    return combine(val, [P, i1, i2], grads)


def sharp_constant(setting: SobolevSetting, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                   method: str = "quadrature") -> Estimate:
    """``C = (∫_{R^n_+} w U^{p*})^{(N-p)/N} / ∫_{R^n_+} w |∇U|^p`` for the unit bubble.

    ``quadrature``: hemisphere quadrature times truncated Gauss-Legendre plus tail.
    ``oracle``: Monte Carlo hemisphere mean times adaptive quadrature on [0, ∞).
    ``beta``: hemisphere quadrature times the Beta closed forms.
    """
    n, w = setting.n, setting.weight
    if method == "quadrature":
        P = hemisphere_integral(n, w)
        i1, i2 = radial_integrals(setting)
    elif method == "oracle":
        P = hemisphere_integral_mc(n, w, samples, seed)
        i1, i2 = radial_integrals_oracle(setting)
    elif method == "beta":
        P = hemisphere_integral(n, w)
        i1, i2 = (Estimate(v) for v in radial_integrals_beta(setting))
    else:
        raise ValueError(f"unknown method {method!r}")
    return _constant_from(P, i1, i2, setting)


# --------------------------------------------------------------------------- cutoff family


def bump_cutoff(r, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """``η = 1`` on ``[0, δ]``, ``exp(1 - 1/(1-s^2))`` with ``s = (r-δ)/δ`` on ``(δ, 2δ)``, 0 beyond."""
    r = np.asarray(r, dtype=float)
    s = (r - delta) / delta
    mid = (s > 0) & (s < 1)
    sm = np.where(mid, s, 0.5)
    e = np.exp(1.0 - 1.0 / (1.0 - sm * sm))
    val = np.where(s <= 0, 1.0, np.where(mid, e, 0.0))
    der = np.where(mid, e * (-2.0 * sm / (1.0 - sm * sm) ** 2) / delta, 0.0)
    return val, der


def cutoff_quotient(setting: SobolevSetting, ratio: float) -> float:
    """Quotient of ``η_δ U_ε`` on ``R^n_+`` with ``ε/δ = ratio`` (depends only on the ratio)."""
    eps = 1.0
    delta = eps / ratio
    b = Bubble(setting, eps)
    N, p = setting.N, setting.p

    def v(r):
        c, _ = bump_cutoff(r, delta)
        return c * b.radial(r)

    def dv(r):
        c, dc = bump_cutoff(r, delta)
        return dc * b.radial(r) + c * b.radial_derivative(r)

    pts = [x for x in (1.0, 10.0, 100.0) if x < delta]
    segs = [(0.0, delta, pts), (delta, 2 * delta, None)]
    num = den = 0.0
    for a, c, br in segs:
        num += quad(lambda r: abs(float(dv(r))) ** p * r ** (N - 1), a, c, points=br, limit=400,
                    epsabs=0, epsrel=1e-11)[0]
        den += quad(lambda r: abs(float(v(r))) ** setting.p_star * r ** (N - 1), a, c, points=br,
                    limit=400, epsabs=0, epsrel=1e-11)[0]
    P = hemisphere_integral(setting.n, setting.weight).value
    return P * num / (P * den) ** (p / setting.p_star)


# --------------------------------------------------------------------------- stationarity probe


def _polar_grid(n: int, R: float, panels: int = 28, order: int = 12, angular: int = 32):
    r, wr = _panels(R, panels, order)
    if n == 2:
        g, gw = np.polynomial.legendre.leggauss(2 * angular)
        th = 0.5 * math.pi * (g + 1)
        wt = 0.5 * math.pi * gw
        dirs = np.column_stack([np.cos(th), np.sin(th)])
        dw = wt
    elif n == 3:
        g, gw = np.polynomial.legendre.leggauss(angular)
        th = 0.25 * math.pi * (g + 1)
        wt = 0.25 * math.pi * gw * np.sin(th)
        m = 2 * angular
        ph = 2 * math.pi * (np.arange(m) + 0.5) / m
        T, P = np.meshgrid(th, ph, indexing="ij")
        dirs = np.column_stack([(np.sin(T) * np.cos(P)).ravel(), (np.sin(T) * np.sin(P)).ravel(),
                                np.cos(T).ravel()])
        dw = (wt[:, None] * np.full(m, 2 * math.pi / m)[None, :]).ravel()
    else:
        raise NotImplementedError("tensor quadrature supports n in {2, 3}")
    pts = (r[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    wts = (wr[:, None] * r[:, None] ** (n - 1) * dw[None, :]).ravel()
    return pts, wts


@dataclass
class ProbeResult:
    base: float
    perturbed: list = field(default_factory=list)
    tolerance: float = 1e-3

    @property
    def worst_ratio(self) -> float:
        return min(self.perturbed) / self.base

    @property
    def passed(self) -> bool:
        return all(v >= self.base * (1.0 - self.tolerance) for v in self.perturbed)


def perturbation_probe(setting: SobolevSetting, bumps: int = 20, amplitude: float = 0.01, seed: int = 0,
                       tolerance: float = 1e-3) -> ProbeResult:
    """Quotients of ``U ± amplitude·φ`` for random Gaussian bumps ``φ`` (max 1) against ``U``.

    Integrals use a polar tensor grid on ``[0, R] x hemisphere`` plus the radial
    tail of ``U`` beyond ``R``, where the bumps are negligible.
    """
    n, w, p, ps = setting.n, setting.weight, setting.p, setting.p_star
    R = TAIL_RADIUS
    pts, wts = _polar_grid(n, R)
    wx = w.eval(pts) * wts
    b = Bubble(setting)
    U = b.value(pts)
    gU = b.gradient(pts)
    P = hemisphere_integral(n, w).value
    N, q = setting.N, setting.q
    t1, _ = _tail_series(1.0, N - 1 - q * N, 1.0, q, N, R)
    t2, _ = _tail_series((setting.k * q) ** p, q + N - 1 - q * N, 1.0, q, N, R)
    tail_den, tail_num = P * t1, P * t2

    def quotient(u, g):
        num = np.sum(wx * np.linalg.norm(g, axis=1) ** p) + tail_num
        den = np.sum(wx * np.abs(u) ** ps) + tail_den
        return num / den ** (p / ps)

    res = ProbeResult(quotient(U, gU), tolerance=tolerance)
    rng = np.random.default_rng(seed)
    for _ in range(bumps):
        d = rng.normal(size=n)
        d /= np.linalg.norm(d)
        d[-1] = abs(d[-1])
        c = rng.uniform(0.0, 1.5) * d
        sig = rng.uniform(0.2, 0.8)
        diff = pts - c
        phi = np.exp(-np.einsum("ij,ij->i", diff, diff) / (2 * sig * sig))
        gphi = -diff / (sig * sig) * phi[:, None]
        for sgn in (1.0, -1.0):
            res.perturbed.append(quotient(U + sgn * amplitude * phi, gU + sgn * amplitude * gphi))
    return res


# --------------------------------------------------------------------------- Pólya–Szegő and embeddings


@dataclass
class GapResult:
    gap: Estimate
    energy_u: Estimate
    energy_star: Estimate
    status: str = "ok"

    @property
    def z_score(self) -> float:
        return self.gap.z_score(0.0)


def dirichlet_energy(u: ScalarField, w: WeightModel, p: float, samples: int, seed: int) -> Estimate:
    ind = u.domain.indicator

    def f(x):
        inside = ind(x)
        return np.where(inside, w.eval(x) * np.linalg.norm(_grad(u, x), axis=1) ** p, 0.0)

    return mc_estimates(f, u.domain.volume_sampler(), samples, seed)[0]


def polya_szego_gap(u: ScalarField, w: WeightModel, p: float, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                    levels: int = 128) -> GapResult:
    """``∫ w|∇u|^p - ∫ w|∇u*|^p`` with the rearranged energy exact per profile segment.

    The rearranged energy's error comes from the level-mass covariance by the
    delta method.  Fields without the Neumann declaration are still evaluated
    but marked ``hypothesis undeclared``.  Any ``p >= 1`` is allowed.
    """
    if p < 1:
        raise ConfigurationError(f"p must be >= 1; got {p:g}")
    e_u = dirichlet_energy(u, w, p, samples, seed)
    prof = symmetrize(u, w, levels, samples, seed + 1).profile
    e_star = Estimate(prof.energy(p), prof.energy_se(p), samples, seed + 1, "monte_carlo")
    gap = e_u - e_star
    status = "ok" if u.neumann else "hypothesis undeclared"
    return GapResult(gap, e_u, e_star, status)


def embedding_constant_p1(n: int, w: WeightModel) -> float:
    """``(1/N) C_{n,w}^{-1/N}``, the explicit constant of the ``p = 1`` chain."""
    N = n + w.alpha
    return (1.0 / N) * half_ball_constant(n, w) ** (-1.0 / N)


def check_embedding_p1(u: ScalarField, w: WeightModel, samples: int = DEFAULT_SAMPLES, seed: int = 0):
    """Slack ``K ∫ w|∇u| - (∫ w|u|^{N/(N-1)})^{(N-1)/N}`` with its delta-method error."""
    n = u.domain.n
    N = n + w.alpha
    K = embedding_constant_p1(n, w)
    ind = u.domain.indicator
    r = N / (N - 1.0)

    def f(x):
        inside = ind(x)
        wx = np.where(inside, w.eval(x), 0.0)
        v = np.abs(np.where(inside, u.eval(x), 0.0))
        return np.column_stack([wx * v ** r, wx * np.linalg.norm(_grad(u, x), axis=1)])

    mean, cov = sample_means(f, u.domain.volume_sampler(), samples, seed)
    lhs = mean[0] ** (1.0 / r)
    val = K * mean[1] - lhs
    g = np.array([-(1.0 / r) * mean[0] ** (1.0 / r - 1.0), K])
    se = math.sqrt(max(float(g @ cov @ g), 0.0))
    return Estimate(val, se, samples, seed, "monte_carlo"), K


def write_sobolev_csv(path, setting: SobolevSetting, constant: Estimate, rows: list, header: Optional[str] = None):
    """``rows``: (field, quotient Estimate, z) tuples."""
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["n", "p", "alpha", "weight", "constant", "constant_se", "field", "quotient",
                     "quotient_se", "z_score"])
        for name, est, z in rows:
            wr.writerow([setting.n, f"{setting.p:.12g}", f"{setting.alpha:.12g}", setting.weight.spec,
                         f"{constant.value:.12g}", f"{constant.std_error:.12g}", name,
                         f"{est.value:.12g}", f"{est.std_error:.12g}", f"{z:.12g}"])
