"""Capillary gauge, its polar, and the Wulff-ball identities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .estimate import CheckResult, ValidationReport
from .weights import DomainError, fd_gradient

BISECT_TOL = 1e-12
BISECT_MAXITER = 200
SUPPORT_DIRECTIONS = 4096


@dataclass(frozen=True)
class Gauge:
    """A convex, positively one-homogeneous gauge on R^n.

    ``value`` and ``dual_closed`` act on ``(m, n)`` arrays.  ``polar_member``
    is a membership test for the polar body ``{F° <= 1}`` used by the
    Minkowski route to the dual.
    """

    value: Callable[[np.ndarray], np.ndarray]
    dual_closed: Optional[Callable[[np.ndarray], np.ndarray]] = None
    polar_member: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lam: float = 0.0
    kind: str = "custom"

    def __call__(self, xi) -> np.ndarray:
        return self.value(np.atleast_2d(np.asarray(xi, dtype=float)))

    @property
    def spec(self) -> str:
        if self.kind == "euclidean":
            return "euclidean"
        if self.kind == "capillary":
            return f"capillary:{self.lam!r}"
        return "custom"


def euclidean() -> Gauge:
    norm = lambda x: np.linalg.norm(x, axis=1)
    return Gauge(value=norm, dual_closed=norm,
                 polar_member=lambda y: np.linalg.norm(y, axis=1) <= 1.0,
                 lam=0.0, kind="euclidean")


def capillary(lam: float) -> Gauge:
    """``F(xi) = |xi| - lam <xi, e_n>`` for ``lam`` in (-1, 1)."""
    lam = float(lam)
    if not -1.0 < lam < 1.0:
        raise ValueError("capillary gauge needs lambda in (-1, 1)")

    def value(xi):
        return np.linalg.norm(xi, axis=1) - lam * xi[:, -1]

    def dual(x):
        r2 = np.einsum("ij,ij->i", x, x)
        xn = x[:, -1]
        den = np.sqrt(lam * lam * xn * xn + (1.0 - lam * lam) * r2) - lam * xn
        with np.errstate(invalid="ignore", divide="ignore"):
            out = r2 / den
        return np.where(r2 == 0.0, 0.0, out)

    def member(y):
        # polar body is the unit ball centred at -lam e_n
        z = y.copy()
        z[:, -1] += lam
        return np.einsum("ij,ij->i", z, z) <= 1.0

    return Gauge(value=value, dual_closed=dual, polar_member=member, lam=lam, kind="capillary")


def parse_gauge(spec: str) -> Gauge:
    s = spec.strip()
    if s == "euclidean":
        return euclidean()
    if s.startswith("capillary:"):
        try:
            return capillary(float(s.split(":", 1)[1]))
        except ValueError:
            pass
    raise ValueError(f"gauge: cannot parse gauge spec {spec!r}")


def _points(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if not np.all(np.isfinite(arr)):
        raise DomainError("non-finite input")
    return arr, single


def gauge_value(g: Gauge, xi):
    pts, single = _points(xi)
    v = g.value(pts)
    return float(v[0]) if single else v


class DualValue(NamedTuple):
    value: float | np.ndarray
    method: str
    lower_bound: bool


def minkowski_dual(g: Gauge, x: np.ndarray, tol: float = BISECT_TOL,
                   maxiter: int = BISECT_MAXITER) -> np.ndarray:
    """``inf{t > 0 : x/t in K°}`` by vectorised bisection on ``t``."""
    if g.polar_member is None:
        raise ValueError("gauge has no polar-body membership test")
    r = np.linalg.norm(x, axis=1)
    if np.any(r == 0.0):
        raise DomainError("minkowski dual needs x != 0")
    # |x/t + c| <= 1 brackets for the shifted-ball polar bodies
    lo = r / (1.0 + abs(g.lam))
    hi = r / (1.0 - abs(g.lam))
    lo = lo * (1 - 1e-12)
    hi = hi * (1 + 1e-12)
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        inside = g.polar_member(x / mid[:, None])
        hi = np.where(inside, mid, hi)
        lo = np.where(inside, lo, mid)
        if np.all(hi - lo <= tol * np.maximum(1.0, hi)):
            break
    return 0.5 * (lo + hi)


def sphere_directions(n: int, count: int = SUPPORT_DIRECTIONS, seed: int = 0) -> np.ndarray:
    """Deterministic near-uniform directions: circle grid, Fibonacci lattice, or seeded Gaussians."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        th = 2 * np.pi * (np.arange(count) + 0.5) / count
        return np.column_stack([np.cos(th), np.sin(th)])
    if n == 3:
        i = np.arange(count) + 0.5
        z = 1 - 2 * i / count
        phi = np.pi * (1 + 5 ** 0.5) * i
        rho = np.sqrt(1 - z * z)
        return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    v = np.random.default_rng(seed).normal(size=(count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def support_dual(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                 directions: np.ndarray) -> np.ndarray:
    """``max_k <x, xi_k> / f(xi_k)`` over sampled directions (a lower bound for the sup)."""
    fv = f(directions)
    return np.max((x @ directions.T) / fv[None, :], axis=1)


def dual_gauge_value(g: Gauge, x, method: str = "closed_form",
                     directions: Optional[np.ndarray] = None) -> DualValue:
    pts, single = _points(x)
    if method == "closed_form":
        if g.dual_closed is None:
            raise ValueError("gauge has no closed-form dual")
        v, lb = g.dual_closed(pts), False
    elif method == "minkowski":
        v, lb = minkowski_dual(g, pts), False
    elif method == "support":
        if directions is None:
            directions = sphere_directions(pts.shape[1])
        v, lb = support_dual(g.value, pts, directions), True
    else:
        raise ValueError(f"unknown dual method {method!r}")
    return DualValue(float(v[0]) if single else v, method, lb)


def dual_literal(lam: float, x: np.ndarray) -> np.ndarray:
    """The dual formula read with the division ending before the subtracted term.

    Kept only to document why it is rejected: at ``x = e_n`` it gives
    ``1 - lam`` instead of ``1/(1 - lam)``.
    """
    r2 = np.einsum("ij,ij->i", x, x)
    xn = x[:, -1]
    return r2 / np.sqrt(lam * lam * xn * xn + (1 - lam * lam) * r2) - lam * xn


def wulff_member(g: Gauge, x: np.ndarray, radius: float = 1.0, center=None) -> np.ndarray:
    """``F°(x - c) <= r``; for the capillary gauge centred at ``r lam e_n`` this is ``B_r``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if center is None:
        center = np.zeros(x.shape[1])
        center[-1] = radius * g.lam
    return g.dual_closed(x - center) <= radius


def _random_nonzero(rng, m, n, min_norm=1e-3):
    x = rng.normal(size=(m, n)) * rng.uniform(0.1, 3.0, size=(m, 1))
    bad = np.linalg.norm(x, axis=1) < min_norm
    while bad.any():
        x[bad] = rng.normal(size=(int(bad.sum()), n))
        bad = np.linalg.norm(x, axis=1) < min_norm
    return x


def verify_polar_identities(g: Gauge, samples: int, seed: int, n: int = 2,
                            tol: float = 1e-5, probes: int = 1000) -> ValidationReport:
    """Finite-difference check of the three polar identities and Wulff-ball membership."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    rep = ValidationReport(subject=f"gauge {g.spec} (n={n})")
    x = _random_nonzero(rng, samples, n)
    # both gauges are smooth away from the origin; resample probes too close to it
    small = np.linalg.norm(x, axis=1) < 1e-2
    resampled = int(small.sum())
    if small.any():
        x[small] = _random_nonzero(rng, resampled, n, min_norm=1e-2)

    dual = g.dual_closed
    grad_dual = fd_gradient(dual, x)
    f_at = g.value(grad_dual)
    err1 = np.abs(f_at - 1.0)
    grad_f = fd_gradient(g.value, x)
    err2 = np.abs(np.einsum("ij,ij->i", grad_f, x) - g.value(x)) / (1.0 + g.value(x))
    grad_f_at = fd_gradient(g.value, grad_dual)
    recon = dual(x)[:, None] * grad_f_at
    err3 = np.linalg.norm(recon - x, axis=1) / (1.0 + np.linalg.norm(x, axis=1))
    for name, err in (("unit_gauge_of_dual_gradient", err1), ("gauge_euler_identity", err2),
                      ("polar_reconstruction", err3)):
        i = int(np.argmax(err))
        ok = bool(err[i] <= tol)
        rep.add(CheckResult(name, ok, tol, None if ok else {"x": x[i], "error": err[i]},
                            float(err[i]), detail=f"resampled={resampled}"))

    # Wulff ball {F°(x - lam e_n) <= 1} against the Euclidean unit ball
    shift = np.zeros(n)
    shift[-1] = g.lam
    u = rng.normal(size=(probes, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    z = rng.uniform(-1.5, 1.5, size=(probes, n))
    z = z[np.abs(np.linalg.norm(z, axis=1) - 1.0) > 1e-9]
    mism = (dual(z - shift) <= 1.0) != (np.linalg.norm(z, axis=1) <= 1.0)
    near_in = dual(0.999 * u - shift) <= 1.0
    near_out = dual(1.001 * u - shift) > 1.0
    ok = bool(not mism.any() and near_in.all() and near_out.all())
    wit = None
    if not ok:
        if mism.any():
            wit = {"point": z[mism][0]}
        elif not near_in.all():
            wit = {"point": 0.999 * u[~near_in][0]}
        else:
            wit = {"point": 1.001 * u[~near_out][0]}
    rep.add(CheckResult("wulff_ball_is_unit_ball", ok, 0.0, wit, float(mism.sum())))
    return rep


def duality_agreement(g: Gauge, samples: int, seed: int, n: int) -> float:
    """Max relative gap between closed-form and Minkowski duals on random points."""
    rng = np.random.default_rng(seed)
    x = _random_nonzero(rng, samples, n)
    a = g.dual_closed(x)
    b = minkowski_dual(g, x)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


def double_dual_gap(g: Gauge, n: int, directions: int = SUPPORT_DIRECTIONS,
                    count: int = 100, seed: int = 0) -> float:
    """Apply the support dual twice and compare with the gauge on random directions."""
    dirs = sphere_directions(n, directions, seed)
    rng = np.random.default_rng(seed + 1)
    x = rng.normal(size=(count, n))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    dual_on_dirs = support_dual(g.value, dirs, dirs)
    back = np.max((x @ dirs.T) / dual_on_dirs[None, :], axis=1)
    return float(np.max(np.abs(back - g.value(x)) / g.value(x)))


def sphere_resolution(n: int, count: int) -> float:
    """Typical angular spacing of ``count`` directions on S^{n-1}."""
    if n == 2:
        return 2 * math.pi / count
    area = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    return (area / count) ** (1.0 / (n - 1))
