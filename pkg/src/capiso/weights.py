"""Homogeneous weights and their validation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .estimate import CheckResult, ValidationReport

FD_REL_STEP = 1e-6


class DomainError(ValueError):
    """Input outside the domain where an operation is defined."""


class SingularGradientWarning(RuntimeWarning):
    pass


def _as_points(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if not np.all(np.isfinite(arr)):
        raise DomainError("non-finite point")
    return arr, single


@dataclass(frozen=True)
class WeightModel:
    """A nonnegative weight ``w`` with ``w(tx) = t**alpha * w(x)``.

    ``eval``/``grad``/``valid`` act on ``(m, n)`` arrays.  ``valid`` marks the
    region where positivity and concavity of ``w**(1/alpha)`` are asserted.
    """

    alpha: float
    eval: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    valid: Callable[[np.ndarray], np.ndarray] = lambda x: np.ones(len(x), dtype=bool)
    even: bool = False
    xn_independent: bool = False
    spec: str = "custom"
    min_dim: int = 1

    def __call__(self, x) -> np.ndarray:
        return self.eval(np.atleast_2d(np.asarray(x, dtype=float)))

    @property
    def translation_invariant(self) -> bool:
        return self.alpha == 0


def constant(value: float = 1.0) -> WeightModel:
    return WeightModel(
        alpha=0.0,
        eval=lambda x: np.full(len(x), float(value)),
        grad=lambda x: np.zeros_like(x),
        even=True,
        xn_independent=True,
        spec="const" if value == 1.0 else f"const*{value!r}",
    )


def monomial_xn(alpha: float) -> WeightModel:
    """``w(x) = |x_n|**alpha``; concave root on the upper half-space."""
    a = float(alpha)
    if a < 0:
        raise ValueError("alpha must be nonnegative")

    def ev(x):
        return np.abs(x[:, -1]) ** a

    def gr(x):
        g = np.zeros_like(x)
        xn = x[:, -1]
        if a == 0:
            return g
        with np.errstate(divide="ignore", invalid="ignore"):
            g[:, -1] = a * np.sign(xn) * np.abs(xn) ** (a - 1.0)
        return g

    return WeightModel(alpha=a, eval=ev, grad=gr, valid=lambda x: x[:, -1] > 0,
                       even=True, xn_independent=(a == 0), spec=f"monomial:xn:{_fmt(a)}")


def monomial_product(exponents) -> WeightModel:
    """``w(x) = prod_i |x_i|**a_i`` over the first ``k`` coordinates."""
    a = np.asarray(exponents, dtype=float)
    if np.any(a < 0):
        raise ValueError("exponents must be nonnegative")
    k = len(a)

    def ev(x):
        return np.prod(np.abs(x[:, :k]) ** a, axis=1)

    def gr(x):
        g = np.zeros_like(x)
        base = np.abs(x[:, :k])
        for i in range(k):
            if a[i] == 0:
                continue
            others = np.prod(np.delete(base, i, axis=1) ** np.delete(a, i), axis=1)
            g[:, i] = a[i] * np.sign(x[:, i]) * base[:, i] ** (a[i] - 1.0) * others
        return g

    def valid(x):
        return np.all(x[:, :k][:, a > 0] > 0, axis=1)

    spec = "monomial:product:" + ",".join(_fmt(v) for v in a)

    return WeightModel(alpha=float(a.sum()), eval=ev, grad=gr, valid=valid, even=True,
                       xn_independent=False, spec=spec, min_dim=k)


def radial(alpha: float) -> WeightModel:
    """``w(x) = |x|**alpha``; its root is convex, so it fails the concavity test."""
    a = float(alpha)

    def gr(x):
        r = np.linalg.norm(x, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (a * r ** (a - 2.0))[:, None] * x

    return WeightModel(alpha=a, eval=lambda x: np.linalg.norm(x, axis=1) ** a, grad=gr,
                       valid=lambda x: np.linalg.norm(x, axis=1) > 0, even=True,
                       xn_independent=False, spec=f"radial:{_fmt(a)}")


def _fmt(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def parse_weight(spec: str, n: Optional[int] = None) -> WeightModel:
    """Parse ``const``, ``monomial:xn:<a>``, ``monomial:product:<a1,..>``, ``radial:<a>``."""
    parts = spec.strip().split(":")
    try:
        if parts == ["const"]:
            return constant()
        if parts[0] == "monomial" and len(parts) == 3 and parts[1] == "xn":
            return monomial_xn(float(parts[2]))
        if parts[0] == "monomial" and len(parts) == 3 and parts[1] == "product":
            exps = [float(s) for s in parts[2].split(",") if s]
            if not exps:
                raise ValueError
            w = monomial_product(exps)
            if n is not None and len(exps) > n:
                raise ValueError
            if n is not None and (len(exps) < n or exps[-1] == 0):
                w = _replace(w, xn_independent=True)
            return w
        if parts[0] == "radial" and len(parts) == 2:
            return radial(float(parts[1]))
    except ValueError:
        pass
    raise ValueError(f"weight: cannot parse weight spec {spec!r}")


def _replace(w: WeightModel, **kw) -> WeightModel:
    from dataclasses import replace
    return replace(w, **kw)


def eval_weight(model: WeightModel, x) -> float | np.ndarray:
    pts, single = _as_points(x)
    vals = model.eval(pts)
    return float(vals[0]) if single else vals


def fd_gradient(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    """Central differences with step ``1e-6 * (1 + |x|)`` for each row of ``x``."""
    x = np.atleast_2d(x)
    m, n = x.shape
    h = FD_REL_STEP * (1.0 + np.linalg.norm(x, axis=1))
    g = np.empty_like(x)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        step = h[:, None] * e
        g[:, i] = (f(x + step) - f(x - step)) / (2.0 * h)
    return g


def gradient_weight(model: WeightModel, x) -> np.ndarray:
    """Analytic gradient when available, otherwise central differences.

    Emits :class:`SingularGradientWarning` where ``w`` vanishes at ``x`` (the
    boundary of the validity region for the monomial weights).
    """
    pts, single = _as_points(x)
    if model.alpha > 0 and np.any(model.eval(pts) == 0.0):
        warnings.warn("gradient requested where the weight vanishes", SingularGradientWarning,
                      stacklevel=2)
    g = model.grad(pts) if model.grad is not None else fd_gradient(model.eval, pts)
    return g[0] if single else g


def am_gm_gap(s, t, alpha, n) -> np.ndarray:
    """Log-gap of ``s**a t**n <= ((a s + n t)/(a + n))**(a + n)``; nonnegative."""
    s, t, alpha, n = (np.asarray(v, dtype=float) for v in (s, t, alpha, n))
    rhs = (alpha + n) * np.log((alpha * s + n * t) / (alpha + n))
    lhs = alpha * np.log(s) + n * np.log(t)
    return rhs - lhs


def sample_valid(model: WeightModel, n: int, m: int, rng: np.random.Generator,
                 box: float = 2.0, margin: float = 1e-3) -> np.ndarray:
    """Rejection-sample ``m`` interior points of the validity region."""
    out = []
    got = 0
    tries = 0
    while got < m:
        x = rng.uniform(-box, box, size=(4 * m, n))
        ok = model.valid(x)
        # stay off the region boundary where w may vanish
        if model.alpha > 0:
            ok &= model.eval(x) > margin
        x = x[ok]
        out.append(x)
        got += len(x)
        tries += 1
        if tries > 100:
            raise DomainError("validity region too small to sample")
    return np.concatenate(out)[:m]


def validate_weight(model: WeightModel, samples: int, seed: int, n: int = 2,
                    tol_homog: float = 1e-9, tol_concave: float = 1e-9,
                    tol_euler: float = 1e-5) -> ValidationReport:
    """Statistical check of homogeneity, symmetry flags and the concavity criterion.

    The concavity criterion is ``alpha (w(y)/w(x))**(1/alpha) <= grad w(x).y / w(x)``
    on pairs from the validity region; the coordinate axes are always probed
    first so the canonical witnesses are found deterministically.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if n < model.min_dim:
        raise ValueError(f"weight {model.spec} needs dimension >= {model.min_dim}")
    rng = np.random.default_rng(seed)
    rep = ValidationReport(subject=f"weight {model.spec} (n={n})")
    x = sample_valid(model, n, samples, rng)

    # homogeneity
    t = rng.uniform(0.0, 4.0, size=samples)
    t[t == 0.0] = 4.0
    wx = model.eval(x)
    wtx = model.eval(t[:, None] * x)
    err = np.abs(wtx - t ** model.alpha * wx) / (1.0 + t ** model.alpha * wx)
    i = int(np.argmax(err))
    ok = bool(err[i] <= tol_homog)
    rep.add(CheckResult("homogeneity", ok, tol_homog,
                        None if ok else {"x": x[i], "t": t[i], "error": err[i]}, float(err[i])))

    # Euler identity grad w(x).x = alpha w(x)
    g = gradient_weight(model, x) if model.grad is not None else fd_gradient(model.eval, x)
    lhs = np.einsum("ij,ij->i", g, x)
    err = np.abs(lhs - model.alpha * wx) / (1e-12 + np.abs(model.alpha * wx) + (model.alpha == 0))
    i = int(np.argmax(err))
    ok = bool(err[i] <= tol_euler)
    rep.add(CheckResult("euler_identity", ok, tol_euler,
                        None if ok else {"x": x[i], "error": err[i]}, float(err[i])))

    if model.even:
        err = np.abs(model.eval(-x) - wx) / (1.0 + wx)
        i = int(np.argmax(err))
        ok = bool(err[i] <= tol_homog)
        rep.add(CheckResult("evenness", ok, tol_homog, None if ok else {"x": x[i]}, float(err[i])))
    if model.xn_independent:
        y = x.copy()
        y[:, -1] = rng.uniform(-2, 2, size=samples)
        keep = model.valid(y)
        err = np.abs(model.eval(y[keep]) - wx[keep]) / (1.0 + wx[keep]) if keep.any() else np.zeros(1)
        i = int(np.argmax(err))
        ok = bool(err[i] <= tol_homog)
        rep.add(CheckResult("xn_independence", ok, tol_homog,
                            None if ok else {"x": x[keep][i]}, float(err[i])))

    # concavity criterion
    if model.alpha == 0:
        rep.add(CheckResult("concavity_criterion", True, tol_concave, skipped=True,
                            detail="skipped: criterion undefined for alpha = 0"))
    else:
        axes = np.vstack([np.eye(n), -np.eye(n)])
        axes = axes[model.valid(axes) & (model.eval(axes) > 0)]
        pairs_x = [np.repeat(axes, len(axes), axis=0)] if len(axes) else []
        pairs_y = [np.tile(axes, (len(axes), 1))] if len(axes) else []
        pairs_x.append(x)
        pairs_y.append(sample_valid(model, n, samples, rng))
        px = np.concatenate(pairs_x)
        py = np.concatenate(pairs_y)
        margin = concavity_margin(model, px, py)
        i = int(np.argmin(margin))
        ok = bool(margin[i] >= -tol_concave)
        tight = bool(np.all(np.abs(margin) <= 1e-9 * (1 + np.abs(margin))))
        detail = "equality at every sampled pair" if ok and tight else ""
        rep.add(CheckResult("concavity_criterion", ok, tol_concave,
                            None if ok else {"x": px[i], "y": py[i], "margin": margin[i]},
                            float(margin[i]), detail))

    # AM-GM self-test
    s = rng.uniform(0, 10, size=samples) + 1e-12
    tt = rng.uniform(0, 10, size=samples) + 1e-12
    a = rng.uniform(0, 5, size=samples) + 1e-12
    nn = rng.integers(1, 7, size=samples)
    gap = am_gm_gap(s, tt, a, nn)
    eq = am_gm_gap(s, s, a, nn)
    rel = gap / (1.0 + np.abs(a * np.log(s) + nn * np.log(tt)))
    i = int(np.argmin(rel))
    ok = bool(rel[i] >= -1e-9 and np.all(np.abs(eq) <= 1e-9 * (1 + np.abs((a + nn) * np.log(s)))))
    base = am_gm_gap(1.0, 1.0, 1.0, 2)
    rep.add(CheckResult("am_gm", ok, 1e-9, None if ok else {"s": s[i], "t": tt[i], "alpha": a[i], "n": int(nn[i])},
                        float(base), detail="equality at s=t=1, alpha=1, n=2"
                        if abs(base) <= 1e-15 else ""))
    return rep


def concavity_margin(model: WeightModel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``grad w(x).y / w(x) - alpha (w(y)/w(x))**(1/alpha)``; >= 0 iff criterion holds."""
    wx = model.eval(x)
    wy = model.eval(y)
    g = model.grad(x) if model.grad is not None else fd_gradient(model.eval, x)
    rhs = np.einsum("ij,ij->i", g, y) / wx
    lhs = model.alpha * (wy / wx) ** (1.0 / model.alpha)
    return rhs - lhs
