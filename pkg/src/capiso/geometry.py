"""Convex obstacles, regions outside them, and parametric boundary patches."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import ConvexHull

from .weights import DomainError

COLLAR = 1e-9


# --------------------------------------------------------------------------- obstacles


@dataclass(frozen=True, eq=False)
class ConvexObstacle:
    """Closed convex set ``E``.

    ``kind`` is ``half_space`` ({normal.x <= offset}), ``ball``, ``slab``
    ({lo <= normal.x <= hi}) or ``polytope`` ({A x <= b}, rows of A unit).
    """

    kind: str
    normal: Optional[np.ndarray] = None
    offset: float = 0.0
    center: Optional[np.ndarray] = None
    radius: float = 0.0
    lo: float = 0.0
    hi: float = 0.0
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    vertices: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        if self.kind == "ball":
            return len(self.center)
        if self.kind == "polytope":
            return self.A.shape[1]
        return len(self.normal)

    @property
    def spec(self) -> str:
        fmt = lambda v: ",".join(repr(float(t)) for t in v)
        if self.kind == "half_space":
            return f"halfspace:{fmt(self.normal)}:{self.offset!r}"
        if self.kind == "ball":
            return f"ball:{fmt(self.center)}:{self.radius!r}"
        if self.kind == "slab":
            return f"slab:{fmt(self.normal)}:{self.lo!r}:{self.hi!r}"
        return "polytope:" + ";".join(fmt(a) + "|" + repr(float(c)) for a, c in zip(self.A, self.b))

    def __eq__(self, other) -> bool:
        return isinstance(other, ConvexObstacle) and self.spec == other.spec

    def __hash__(self) -> int:
        return hash(self.spec)

    def signed_distance(self, x) -> np.ndarray:
        """Negative inside, zero on the boundary, Euclidean distance outside."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "half_space":
            return x @ self.normal - self.offset
        if self.kind == "ball":
            return np.linalg.norm(x - self.center, axis=1) - self.radius
        if self.kind == "slab":
            s = x @ self.normal
            return np.maximum(self.lo - s, s - self.hi)
        g = x @ self.A.T - self.b
        inside = g.max(axis=1)
        out = inside > 0
        if out.any():
            proj = self.project(x[out])
            inside[out] = np.linalg.norm(x[out] - proj, axis=1)
        return inside

    def contains(self, x) -> np.ndarray | bool:
        arr = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise DomainError("non-finite point")
        single = arr.ndim == 1
        arr = np.atleast_2d(arr)
        if self.kind == "polytope":
            res = np.all(arr @ self.A.T <= self.b + COLLAR, axis=1)
        else:
            res = self.signed_distance(arr) <= COLLAR
        return bool(res[0]) if single else res

    def outward_normal(self, p, return_flag: bool = False):
        """Unit outward normal at a boundary point; at polytope corners a normal-cone element."""
        p = np.asarray(p, dtype=float)
        if abs(float(self.signed_distance(p)[0])) > COLLAR:
            raise DomainError("point is not on the obstacle boundary")
        non_unique = False
        if self.kind == "half_space":
            nu = self.normal.copy()
        elif self.kind == "ball":
            nu = (p - self.center) / self.radius
        elif self.kind == "slab":
            s = float(p @ self.normal)
            nu = self.normal.copy() if abs(s - self.hi) <= abs(s - self.lo) else -self.normal
        else:
            active = np.abs(self.A @ p - self.b) <= COLLAR
            nu = self.A[active].sum(axis=0)
            non_unique = int(active.sum()) > 1
        nu = nu / np.linalg.norm(nu)
        return (nu, non_unique) if return_flag else nu

    def normals(self, pts: np.ndarray) -> np.ndarray:
        """Vectorised outward normals for boundary points (no boundary check)."""
        if self.kind == "half_space":
            return np.tile(self.normal, (len(pts), 1))
        if self.kind == "ball":
            return (pts - self.center) / self.radius
        return np.array([self.outward_normal(p) for p in pts])

    def project(self, x) -> np.ndarray:
        """Nearest point of ``E``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "half_space":
            s = np.maximum(x @ self.normal - self.offset, 0.0)
            return x - s[:, None] * self.normal
        if self.kind == "ball":
            d = x - self.center
            r = np.linalg.norm(d, axis=1)
            f = np.where(r > self.radius, self.radius / np.where(r > 0, r, 1.0), 1.0)
            return self.center + d * f[:, None]
        if self.kind == "slab":
            s = x @ self.normal
            return x + (np.clip(s, self.lo, self.hi) - s)[:, None] * self.normal
        out = np.empty_like(x)
        cons = {"type": "ineq", "fun": lambda y: self.b - self.A @ y, "jac": lambda y: -self.A}
        for i, xi in enumerate(x):
            if np.all(self.A @ xi <= self.b):
                out[i] = xi
                continue
            res = minimize(lambda y: 0.5 * np.sum((y - xi) ** 2), xi, jac=lambda y: y - xi,
                           constraints=[cons], method="SLSQP", options={"ftol": 1e-15, "maxiter": 200})
            out[i] = res.x
        return out

    def sample_boundary(self, rng: np.random.Generator, m: int, patch: float = 1.0) -> np.ndarray:
        """Points on the boundary, uniform on spheres, on bounded polygons, and in a box patch of hyperplanes."""
        n = self.n
        if self.kind == "ball":
            u = rng.normal(size=(m, n))
            return self.center + self.radius * u / np.linalg.norm(u, axis=1, keepdims=True)
        if self.kind in ("half_space", "slab"):
            basis = _complement(self.normal)
            pts = rng.uniform(-patch, patch, size=(m, n - 1)) @ basis
            if self.kind == "half_space":
                return pts + self.offset * self.normal
            side = rng.integers(0, 2, size=m)
            return pts + np.where(side, self.hi, self.lo)[:, None] * self.normal
        if self.vertices is not None and n == 2:
            v = self.vertices
            w = np.roll(v, -1, axis=0)
            lengths = np.linalg.norm(w - v, axis=1)
            k = rng.choice(len(v), size=m, p=lengths / lengths.sum())
            s = rng.uniform(size=(m, 1))
            return v[k] + s * (w[k] - v[k])
        # project exterior points from a box; lands on the boundary
        out = []
        while sum(len(o) for o in out) < m:
            x = rng.uniform(-patch, patch, size=(2 * m, n))
            x = x[~self.contains(x)]
            out.append(self.project(x))
        return np.concatenate(out)[:m]

    def scaled(self, r: float) -> "ConvexObstacle":
        if self.kind == "half_space":
            return replace(self, offset=self.offset * r)
        if self.kind == "ball":
            return replace(self, center=self.center * r, radius=self.radius * r)
        if self.kind == "slab":
            return replace(self, lo=self.lo * r, hi=self.hi * r)
        return replace(self, b=self.b * r, vertices=None if self.vertices is None else self.vertices * r)


def half_space(normal, offset: float = 0.0) -> ConvexObstacle:
    nu = np.asarray(normal, dtype=float)
    s = np.linalg.norm(nu)
    return ConvexObstacle("half_space", normal=nu / s, offset=float(offset / s))


def lower_half_space(n: int, offset: float = 0.0) -> ConvexObstacle:
    """``{x_n <= offset}``."""
    e = np.zeros(n)
    e[-1] = 1.0
    return half_space(e, offset)


def ball(center, radius: float) -> ConvexObstacle:
    if radius <= 0:
        raise ValueError("radius must be positive")
    return ConvexObstacle("ball", center=np.asarray(center, dtype=float), radius=float(radius))


def slab(normal, lo: float, hi: float) -> ConvexObstacle:
    nu = np.asarray(normal, dtype=float)
    s = np.linalg.norm(nu)
    return ConvexObstacle("slab", normal=nu / s, lo=float(lo / s), hi=float(hi / s))


def polytope(A, b) -> ConvexObstacle:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    s = np.linalg.norm(A, axis=1)
    return ConvexObstacle("polytope", A=A / s[:, None], b=b / s)


def polytope_from_points(points) -> ConvexObstacle:
    """Convex hull of a point cloud as an H-polytope (scipy/Qhull)."""
    pts = np.asarray(points, dtype=float)
    hull = ConvexHull(pts)
    A = hull.equations[:, :-1]
    b = -hull.equations[:, -1]
    verts = pts[hull.vertices] if pts.shape[1] == 2 else None
    return replace(polytope(A, b), vertices=verts)


def parse_obstacle(spec: str, n: Optional[int] = None) -> ConvexObstacle:
    """``halfspace:n=<axis>:c=<offset>`` is ``{x_axis <= c}`` (1-based axis); ``ball:<c1,..>:<r>``."""
    parts = spec.strip().split(":")
    try:
        if parts[0] == "halfspace" and len(parts) == 3:
            kv = dict(p.split("=", 1) for p in parts[1:])
            axis = int(kv["n"])
            dim = n if n is not None else axis
            if not 1 <= axis <= dim:
                raise ValueError
            e = np.zeros(dim)
            e[axis - 1] = 1.0
            return half_space(e, float(kv["c"]))
        if parts[0] == "ball" and len(parts) == 3:
            c = [float(v) for v in parts[1].split(",")]
            if n is not None and len(c) != n:
                raise ValueError
            return ball(c, float(parts[2]))
    except (ValueError, KeyError):
        pass
    raise ValueError(f"obstacle: cannot parse obstacle spec {spec!r}")


def _complement(u: np.ndarray) -> np.ndarray:
    """Orthonormal basis (rows) of the complement of unit vector ``u``."""
    n = len(u)
    q, _ = np.linalg.qr(np.column_stack([u, np.eye(n)]))
    basis = q[:, 1:n].T
    if n == 2:
        basis = np.array([[-u[1], u[0]]])
    return basis


# --------------------------------------------------------------------------- patches


@dataclass(frozen=True)
class Patch:
    """A parametrised hypersurface piece ``map: (m, n-1) params -> (m, n) points``.

    Normals and area elements come from central differences of ``map``;
    ``orientation`` is fixed so that normals point out of the region.
    ``clip`` drops parameter nodes whose image falls outside the piece.
    """

    map: Callable[[np.ndarray], np.ndarray]
    lo: tuple
    hi: tuple
    periodic: tuple
    clip: Optional[Callable[[np.ndarray], np.ndarray]] = None
    orientation: float = 1.0
    label: str = ""

    @property
    def dim(self) -> int:
        return len(self.lo)

    def frame(self, params: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Points, unit normals and area elements at parameter nodes."""
        pts = self.map(params)
        tangents = []
        for k in range(self.dim):
            # fourth-order central stencil
            h = 1e-3 * max(1.0, abs(self.hi[k] - self.lo[k]))
            e = np.zeros(self.dim)
            e[k] = h
            f = self.map
            tangents.append((8 * (f(params + e) - f(params - e)) - (f(params + 2 * e) - f(params - 2 * e)))
                            / (12 * h))
        n = pts.shape[1]
        if n == 2:
            t = tangents[0]
            nv = np.column_stack([t[:, 1], -t[:, 0]])
        elif n == 3:
            nv = np.cross(tangents[0], tangents[1])
        else:
            raise NotImplementedError("parametric patches support n in {2, 3}")
        jac = np.linalg.norm(nv, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = nv / jac[:, None]
        unit = np.nan_to_num(unit) * self.orientation
        return pts, unit, jac

    def nodes(self, res: int) -> tuple[np.ndarray, np.ndarray]:
        """Tensor nodes and parameter-space weights.

        Gauss-Legendre on bounded unclipped directions, midpoint rule on periodic
        or clipped ones (the clip makes the integrand discontinuous).
        """
        axes, wts = [], []
        for k in range(self.dim):
            a, b = self.lo[k], self.hi[k]
            m = res if k == 0 else 2 * res
            if self.periodic[k] or self.clip is not None:
                if self.clip is not None and not self.periodic[k]:
                    m *= 8
                t = a + (b - a) * (np.arange(m) + 0.5) / m
                w = np.full(m, (b - a) / m)
            else:
                g, gw = _leggauss(m)
                t = 0.5 * (b - a) * g + 0.5 * (a + b)
                w = 0.5 * (b - a) * gw
            axes.append(t)
            wts.append(w)
        grids = np.meshgrid(*axes, indexing="ij")
        wgrid = np.meshgrid(*wts, indexing="ij")
        params = np.column_stack([g.ravel() for g in grids])
        weights = np.prod(np.column_stack([w.ravel() for w in wgrid]), axis=1)
        return params, weights

    def integrate(self, f: Callable[[np.ndarray, np.ndarray], np.ndarray], res: int) -> float:
        params, weights = self.nodes(res)
        pts, nu, jac = self.frame(params)
        vals = f(pts, nu) * jac * weights
        if self.clip is not None:
            vals = np.where(self.clip(pts), vals, 0.0)
        return float(np.sum(vals))

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        """Points on the patch (uniform in parameters, then clipped)."""
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        out = []
        got = 0
        for _ in range(100):
            p = self.map(lo + (hi - lo) * rng.uniform(size=(2 * m, self.dim)))
            if self.clip is not None:
                p = p[self.clip(p)]
            out.append(p)
            got += len(p)
            if got >= m:
                break
        return np.concatenate(out)[:m]

    def scaled(self, r: float) -> "Patch":
        clip = self.clip
        return replace(self, map=lambda t, f=self.map: r * f(t),
                       clip=None if clip is None else (lambda x, c=clip: c(x / r)))


def sphere_patch(center, radius: float, axis, cos_min: float = -1.0,
                 clip=None, label: str = "sphere") -> Patch:
    """Points ``c + rho (cos t u + sin t v)`` with ``cos t >= cos_min`` about axis ``u``."""
    c = np.asarray(center, dtype=float)
    u = np.asarray(axis, dtype=float)
    u = u / np.linalg.norm(u)
    tmax = math.acos(max(-1.0, min(1.0, cos_min)))
    basis = _complement(u)
    n = len(c)
    if n == 2:
        v = basis[0]
        return Patch(lambda t: c + radius * (np.cos(t[:, :1]) * u + np.sin(t[:, :1]) * v),
                     (-tmax,), (tmax,), (tmax >= math.pi,), clip, 1.0, label)
    if n == 3:
        e1, e2 = basis

        def f(t):
            th, ph = t[:, :1], t[:, 1:2]
            return c + radius * (np.cos(th) * u + np.sin(th) * (np.cos(ph) * e1 + np.sin(ph) * e2))

        return Patch(f, (0.0, 0.0), (tmax, 2 * math.pi), (False, True), clip, 1.0, label)
    raise NotImplementedError("sphere patches support n in {2, 3}")


def flat_patch(center, normal, radius: float, clip=None, label: str = "flat") -> Patch:
    """A segment (n=2) or disc (n=3) of the given radius in the hyperplane through ``center``."""
    c = np.asarray(center, dtype=float)
    nu = np.asarray(normal, dtype=float)
    basis = _complement(nu / np.linalg.norm(nu))
    n = len(c)
    if n == 2:
        v = basis[0]
        return Patch(lambda t: c + t[:, :1] * v, (-radius,), (radius,), (False,), clip, 1.0, label)
    if n == 3:
        e1, e2 = basis

        def f(t):
            rho, ph = t[:, :1], t[:, 1:2]
            return c + rho * (np.cos(ph) * e1 + np.sin(ph) * e2)

        return Patch(f, (0.0, 0.0), (radius, 2 * math.pi), (False, True), clip, 1.0, label)
    raise NotImplementedError("flat patches support n in {2, 3}")


def ellipse_patch(center, axes, t_range=None, clip=None, label: str = "ellipse") -> Patch:
    """Ellipse (n=2) or spheroid about the last axis (n=3) with the given semi-axes."""
    c = np.asarray(center, dtype=float)
    a = np.asarray(axes, dtype=float)
    n = len(c)
    if n == 2:
        lo, hi = t_range if t_range is not None else (0.0, 2 * math.pi)
        return Patch(lambda t: c + np.column_stack([a[0] * np.cos(t[:, 0]), a[1] * np.sin(t[:, 0])]),
                     (lo,), (hi,), (hi - lo >= 2 * math.pi,), clip, 1.0, label)
    if n == 3:
        lo, hi = t_range if t_range is not None else (0.0, math.pi)

        def f(t):
            th, ph = t[:, 0], t[:, 1]
            return c + np.column_stack([a[0] * np.sin(th) * np.cos(ph), a[1] * np.sin(th) * np.sin(ph),
                                        a[2] * np.cos(th)])

        return Patch(f, (lo, 0.0), (hi, 2 * math.pi), (False, True), clip, 1.0, label)
    raise NotImplementedError("ellipse patches support n in {2, 3}")


def box_patches(lo, hi, clip=None) -> list[Patch]:
    """The 2n faces of an axis-aligned box, labelled ``face<i><-|+>``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = len(lo)
    out = []
    for i in range(n):
        others = [k for k in range(n) if k != i]
        for side, val in (("-", lo[i]), ("+", hi[i])):
            def f(t, i=i, val=val, others=others):
                p = np.empty((len(t), n))
                p[:, i] = val
                p[:, others] = t
                return p
            out.append(Patch(f, tuple(lo[others]), tuple(hi[others]), (False,) * (n - 1), clip, 1.0,
                             f"face{i + 1}{side}"))
    return out


@lru_cache(maxsize=32)
def _leggauss(m: int):
    return np.polynomial.legendre.leggauss(m)


def _orient(patch: Patch, indicator, scale: float) -> Patch:
    """Flip the patch so its normal points out of the region (Ω lies on the -normal side)."""
    params, _ = patch.nodes(4)
    pts, nu, jac = patch.frame(params)
    keep = jac > 0
    if patch.clip is not None:
        keep &= patch.clip(pts)
    if not keep.any():
        params, _ = patch.nodes(64)
        pts, nu, jac = patch.frame(params)
        keep = (jac > 0) & (patch.clip(pts) if patch.clip is not None else True)
    if not np.any(keep):
        return patch
    eps = 1e-6 * scale
    inside_minus = indicator(pts[keep] - eps * nu[keep])
    inside_plus = indicator(pts[keep] + eps * nu[keep])
    score = np.sum(inside_minus) - np.sum(inside_plus)
    return patch if score >= 0 else replace(patch, orientation=-patch.orientation)


# --------------------------------------------------------------------------- regions


@dataclass(frozen=True)
class Region:
    """A bounded open set ``Ω`` outside a closed convex obstacle.

    ``free`` patches parametrise ``Σ = ∂Ω \\ E``; ``wetted`` patches ``Γ = ∂Ω ∩ ∂E``.
    Implicit regions instead carry a level function ``phi`` (``Ω = {phi < 0} \\ E``)
    with a Lipschitz bound used to size sampling bands.
    """

    indicator: Callable[[np.ndarray], np.ndarray]
    bbox: tuple
    obstacle: Optional[ConvexObstacle]
    free: tuple = ()
    wetted: tuple = ()
    kind: str = "implicit"
    params: dict = field(default_factory=dict)
    phi: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lipschitz: Optional[float] = None
    importance: Optional[Callable] = None

    @property
    def n(self) -> int:
        return len(self.bbox[0])

    @property
    def bbox_volume(self) -> float:
        return float(np.prod(np.asarray(self.bbox[1]) - np.asarray(self.bbox[0])))

    @property
    def bbox_diagonal(self) -> float:
        return float(np.linalg.norm(np.asarray(self.bbox[1]) - np.asarray(self.bbox[0])))

    @property
    def parametric(self) -> bool:
        return self.phi is None

    def contains(self, x) -> np.ndarray:
        return self.indicator(np.atleast_2d(np.asarray(x, dtype=float)))

    def uniform_sampler(self):
        lo = np.asarray(self.bbox[0], dtype=float)
        hi = np.asarray(self.bbox[1], dtype=float)
        vol = self.bbox_volume

        def sampler(rng, m):
            return lo + (hi - lo) * rng.uniform(size=(m, len(lo))), np.full(m, vol)

        return sampler

    def volume_sampler(self):
        """Importance sampler if the region carries one (unbounded regions), else uniform on the bbox."""
        return self.importance if self.importance is not None else self.uniform_sampler()

    def scaled(self, r: float) -> "Region":
        if r <= 0:
            raise ValueError("scale must be positive")
        ind = self.indicator
        params = dict(self.params)
        params["scale"] = params.get("scale", 1.0) * r
        if "r" in params:
            params["r"] = params["r"] * r
        phi = None if self.phi is None else (lambda x, f=self.phi: r * f(x / r))
        return Region(lambda x: ind(x / r),
                      (tuple(r * np.asarray(self.bbox[0])), tuple(r * np.asarray(self.bbox[1]))),
                      None if self.obstacle is None else self.obstacle.scaled(r),
                      tuple(p.scaled(r) for p in self.free), tuple(p.scaled(r) for p in self.wetted),
                      self.kind, params, phi, self.lipschitz)

    def check_disjoint(self, samples: int = 10000, seed: int = 0) -> bool:
        """``Ω ∩ E = ∅`` on uniform probes of the bounding box."""
        if self.obstacle is None:
            return True
        pts, _ = self.uniform_sampler()(np.random.default_rng(seed), samples)
        inside = self.contains(pts)
        return not np.any(self.obstacle.signed_distance(pts[inside]) < -COLLAR)


def _minus_obstacle(shape_ind, E: Optional[ConvexObstacle]):
    if E is None:
        return shape_ind
    return lambda x: shape_ind(x) & (E.signed_distance(x) > COLLAR)


def _finish(ind, bbox, E, free, wetted, kind, params) -> Region:
    lo, hi = bbox
    scale = float(np.max(np.asarray(hi) - np.asarray(lo)))
    free = tuple(_orient(p, ind, scale) for p in free)
    wetted = tuple(_orient(p, ind, scale) for p in wetted)
    return Region(ind, (tuple(map(float, lo)), tuple(map(float, hi))), E, free, wetted, kind, params)


def spherical_cap_region(r: float, lam: float, n: int) -> Region:
    """``B_r^lam = {|x| < r, x_n > r lam}`` over the half-space ``{x_n <= r lam}``."""
    if r <= 0:
        raise ValueError("radius must be positive")
    if not -1.0 < lam < 1.0:
        raise ValueError("lambda must lie in (-1, 1)")
    e = np.zeros(n)
    e[-1] = 1.0
    E = lower_half_space(n, r * lam)
    ind = lambda x: (np.einsum("ij,ij->i", x, x) < r * r) & (x[:, -1] > r * lam)
    free = [sphere_patch(np.zeros(n), r, e, lam, label="cap")]
    wetted = [flat_patch(r * lam * e, e, r * math.sqrt(1 - lam * lam), label="base")]
    lo = [-r] * (n - 1) + [r * lam]
    hi = [r] * n
    return _finish(ind, (lo, hi), E, free, wetted, "spherical_cap", {"r": r, "lam": lam})


def ball_region(center, rho: float, E: ConvexObstacle) -> Region:
    """``B_rho(center) \\ E`` with exact spherical pieces for half-space and ball obstacles."""
    c = np.asarray(center, dtype=float)
    n = len(c)
    ball_ind = lambda x: np.linalg.norm(x - c, axis=1) < rho
    ind = _minus_obstacle(ball_ind, E)
    bbox = (c - rho, c + rho)
    if E.kind == "half_space":
        s = float(c @ E.normal - E.offset)
        if s <= -rho:
            raise DomainError("ball lies inside the obstacle")
        if s >= rho:
            return _finish(ind, bbox, E, [sphere_patch(c, rho, E.normal, -1.0)], [], "detached_ball",
                           {"center": c, "rho": rho})
        free = [sphere_patch(c, rho, E.normal, -s / rho, label="cap")]
        wetted = [flat_patch(c - s * E.normal, E.normal, math.sqrt(rho * rho - s * s), label="base")]
        return _finish(ind, _trim_bbox(bbox, E), E, free, wetted, "shifted_ball",
                       {"center": c, "rho": rho})
    if E.kind == "ball":
        d_vec = c - E.center
        d = float(np.linalg.norm(d_vec))
        R = E.radius
        if d + rho <= R:
            raise DomainError("ball lies inside the obstacle")
        if d >= rho + R:
            return _finish(ind, bbox, E, [sphere_patch(c, rho, np.eye(n)[-1], -1.0)], [],
                           "detached_ball", {"center": c, "rho": rho})
        u = d_vec / d if d > 0 else np.eye(n)[-1]
        cos_free = (R * R - d * d - rho * rho) / (2 * d * rho) if d > 0 else -1.0
        cos_wet = (R * R + d * d - rho * rho) / (2 * d * R) if d > 0 else -1.0
        free = [sphere_patch(c, rho, u, cos_free, label="cap")]
        wetted = [sphere_patch(E.center, R, u, cos_wet, label="contact")]
        return _finish(ind, bbox, E, free, wetted, "shifted_ball", {"center": c, "rho": rho})
    return clipped_region(ball_ind, bbox, [sphere_patch(c, rho, np.eye(n)[-1])], E, "shifted_ball",
                          {"center": c, "rho": rho})


def obstacle_patches(E: ConvexObstacle, bbox) -> list[Patch]:
    """Parametric cover of ``∂E`` near a bounding box (half-spaces and balls)."""
    lo, hi = np.asarray(bbox[0], dtype=float), np.asarray(bbox[1], dtype=float)
    if E.kind == "half_space":
        mid = 0.5 * (lo + hi)
        c = mid - (mid @ E.normal - E.offset) * E.normal
        return [flat_patch(c, E.normal, float(np.linalg.norm(hi - lo)), label="wall")]
    if E.kind == "ball":
        return [sphere_patch(E.center, E.radius, np.eye(len(lo))[-1], -1.0, label="wall")]
    raise NotImplementedError("wetted patches need a half-space or ball obstacle")


def _trim_bbox(bbox, E: ConvexObstacle):
    """Cut the box at an axis-aligned half-space obstacle."""
    lo = np.array(bbox[0], dtype=float)
    hi = np.array(bbox[1], dtype=float)
    if E.kind == "half_space" and np.max(np.abs(E.normal)) == 1.0:
        k = int(np.argmax(np.abs(E.normal)))
        if E.normal[k] > 0:
            lo[k] = max(lo[k], E.offset)
        else:
            hi[k] = min(hi[k], -E.offset)
    return lo, hi


def clipped_region(shape_ind, bbox, shape_patches: Sequence[Patch], E: Optional[ConvexObstacle],
                   kind: str, params: dict) -> Region:
    """``shape \\ E`` with boundary pieces obtained by clipping full parametrisations."""
    ind = _minus_obstacle(shape_ind, E)
    if E is None:
        free = list(shape_patches)
        wetted = []
    else:
        outside = lambda x: E.signed_distance(x) > COLLAR
        free = [replace(p, clip=outside if p.clip is None else (lambda x, c=p.clip: c(x) & outside(x)))
                for p in shape_patches]
        wetted = [replace(p, clip=shape_ind) for p in obstacle_patches(E, bbox)]
        bbox = _trim_bbox(bbox, E)
    return _finish(ind, bbox, E, free, wetted, kind, params)


def half_ellipse_region(a: float, b: float, n: int = 2, E: Optional[ConvexObstacle] = None,
                        center=None) -> Region:
    """Ellipse (spheroid for n=3) with semi-axes ``a`` (horizontal) and ``b`` (along e_n), minus ``E``.

    Default obstacle is ``{x_n <= 0}`` with the ellipse centred at the origin,
    which gives the half-ellipse resting on the wall.
    """
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    E = lower_half_space(n) if E is None else E
    axes = np.array([a] * (n - 1) + [b], dtype=float)

    def ind(x):
        return np.sum(((x - c) / axes) ** 2, axis=1) < 1.0

    bbox = (c - axes, c + axes)
    params = {"a": a, "b": b, "center": c}
    if E.kind == "half_space" and np.allclose(E.normal, np.eye(n)[-1]) and abs(E.offset - c[-1]) < 1e-15:
        t_range = (0.0, math.pi) if n == 2 else (0.0, math.pi / 2)
        free = [ellipse_patch(c, axes, t_range, label="arc")]
        wetted = [flat_patch(c, E.normal, a, label="base")]
        lo = c - axes
        lo[-1] = c[-1]
        return _finish(_minus_obstacle(ind, E), (lo, c + axes), E, free, wetted, "ellipsoid_cap", params)
    return clipped_region(ind, bbox, [ellipse_patch(c, axes)], E, "ellipsoid_cap", params)


def wall_box_region(half_width: float, height: float, n: int = 2, E: Optional[ConvexObstacle] = None,
                    base: float = 0.0, lift: float = 0.0) -> Region:
    """Box ``[-a, a]^{n-1} x [base - lift, base + height]`` minus ``E`` (default ``{x_n <= base}``)."""
    E = lower_half_space(n, base) if E is None else E
    lo = np.array([-half_width] * (n - 1) + [base - lift])
    hi = np.array([half_width] * (n - 1) + [base + height])
    ind = lambda x: np.all((x > lo) & (x < hi), axis=1)
    params = {"half_width": half_width, "height": height, "base": base}
    faces = box_patches(lo, hi)
    if E.kind == "half_space" and lift == 0.0 and np.allclose(E.normal, np.eye(n)[-1]) \
            and abs(E.offset - base) < 1e-15:
        bottom = [f for f in faces if f.label == f"face{n}-"]
        free = [f for f in faces if f.label != f"face{n}-"]
        return _finish(_minus_obstacle(ind, E), (lo, hi), E, free, bottom, "box", params)
    return clipped_region(ind, (lo, hi), faces, E, "box", params)


def implicit_region(phi: Callable[[np.ndarray], np.ndarray], bbox, E: Optional[ConvexObstacle],
                    lipschitz: Optional[float] = None, params: Optional[dict] = None) -> Region:
    """``{phi < 0} \\ E``; boundary integrals use banded Monte Carlo."""
    lo = np.asarray(bbox[0], dtype=float)
    hi = np.asarray(bbox[1], dtype=float)
    ind = _minus_obstacle(lambda x: phi(x) < 0.0, E)
    return Region(ind, (tuple(lo), tuple(hi)), E, (), (), "implicit", dict(params or {}), phi, lipschitz)


def upper_half_space(n: int, scale: float = 1.0, shape: float = 0.5) -> Region:
    """``R^n_+ = {x_n > 0}`` with a heavy-tailed radial importance sampler.

    Radii follow a Lomax law ``f(r) = a s^a / (r + s)^(a+1)``; directions are
    uniform on the upper hemisphere.  The tail is heavy enough for integrands
    decaying like the extremal profiles.
    """
    a, s = shape, scale
    k = n / 2
    half_sphere = math.pi ** k / math.gamma(k)

    def sampler(rng, m):
        u = rng.normal(size=(m, n))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        u[:, -1] = np.abs(u[:, -1])
        v = rng.uniform(size=m)
        r = s * ((1.0 - v) ** (-1.0 / a) - 1.0)
        dens_r = a * s ** a / (r + s) ** (a + 1)
        with np.errstate(divide="ignore"):
            inv = r ** (n - 1) * half_sphere / dens_r
        return r[:, None] * u, inv

    big = 1e300
    E = lower_half_space(n)
    return Region(lambda x: x[:, -1] > 0, (tuple([-big] * (n - 1) + [0.0]), tuple([big] * n)), E, (), (),
                  "half_space_domain", {"scale": s}, None, None, sampler)


def detached_ball_region(center, rho: float, E: ConvexObstacle) -> Region:
    r = ball_region(center, rho, E)
    if r.wetted:
        raise DomainError("ball touches the obstacle")
    return r


def parse_region(spec: str, n: int, E: ConvexObstacle) -> Region:
    """``cap:<r>:<lam>``, ``ball:<c1,..>:<rho>``, ``halfellipse:<a>:<b>``, ``box:<a>:<h>``."""
    parts = spec.strip().split(":")
    try:
        if parts[0] == "cap" and len(parts) == 3:
            return spherical_cap_region(float(parts[1]), float(parts[2]), n)
        if parts[0] == "ball" and len(parts) == 3:
            c = [float(v) for v in parts[1].split(",")]
            if len(c) != n:
                raise ValueError
            return ball_region(c, float(parts[2]), E)
        if parts[0] == "halfellipse" and len(parts) == 3:
            return half_ellipse_region(float(parts[1]), float(parts[2]), n, E)
        if parts[0] == "box" and len(parts) == 3:
            return wall_box_region(float(parts[1]), float(parts[2]), n, E)
    except ValueError:
        pass
    raise ValueError(f"region: cannot parse region spec {spec!r}")
