"""Subdifferential cells of finite boundary configurations and the ABP deficit."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .estimate import CheckResult, Estimate, ValidationReport, sample_means
from .geometry import ConvexObstacle, polytope_from_points
from .weights import DomainError, WeightModel

ON_BOUNDARY_TOL = 1e-9
TIE_TOL = 1e-12


@dataclass(frozen=True)
class BoundaryConfig:
    """Finitely many boundary points ``x_i`` of an obstacle with values ``v_i`` and outward normals."""

    points: np.ndarray
    values: np.ndarray
    normals: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        vals = np.asarray(self.values, dtype=float).ravel()
        nrm = np.atleast_2d(np.asarray(self.normals, dtype=float))
        if len(pts) == 0:
            raise ValueError("config needs at least one point")
        if len(vals) != len(pts) or nrm.shape != pts.shape:
            raise ValueError("points, values and normals must have matching lengths")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "normals", nrm)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @classmethod
    def from_obstacle(cls, E: ConvexObstacle, points, values) -> "BoundaryConfig":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.abs(E.signed_distance(pts))
        if np.any(d > ON_BOUNDARY_TOL):
            i = int(np.argmax(d))
            raise DomainError(f"point {i} is {d[i]:.3g} off the obstacle boundary")
        normals = np.array([E.outward_normal(p) for p in pts])
        return cls(pts, values, normals)

    def scaled(self, r: float) -> "BoundaryConfig":
        """Same points with values times ``r``: its cells and ``B`` in ``B_r`` are ``r`` times those of ``self`` in ``B_1``."""
        return BoundaryConfig(self.points, self.values * r, self.normals)


def random_config(E: ConvexObstacle, m: int, rng: np.random.Generator, patch: float = 1.0) -> BoundaryConfig:
    """Uniform boundary points (within a box patch for unbounded boundaries), values uniform in [-1, 1]."""
    pts = E.sample_boundary(rng, m, patch)
    vals = rng.uniform(-1.0, 1.0, size=m)
    return BoundaryConfig.from_obstacle(E, pts, vals)


def random_polygon(rng: np.random.Generator, vertices: int = 10) -> ConvexObstacle:
    """Convex hull of random points in the unit disc."""
    th = rng.uniform(0, 2 * math.pi, size=vertices)
    rad = np.sqrt(rng.uniform(0.3, 1.0, size=vertices))
    return polytope_from_points(np.column_stack([rad * np.cos(th), rad * np.sin(th)]))


def _scores(config: BoundaryConfig, xi: np.ndarray) -> np.ndarray:
    return config.values[None, :] - xi @ config.points.T


def assign_cell(config: BoundaryConfig, xi, tol: float = TIE_TOL) -> tuple[int, ...]:
    """All (0-based) indices minimising ``v_j - xi·x_j``."""
    s = _scores(config, np.atleast_2d(np.asarray(xi, dtype=float)))[0]
    lo = s.min()
    return tuple(int(j) for j in np.flatnonzero(s <= lo + tol * (1.0 + abs(lo))))


def assign_cells(config: BoundaryConfig, xi: np.ndarray, tol: float = TIE_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Lowest minimising index per row and whether the row is a tie."""
    s = _scores(config, xi)
    idx = np.argmin(s, axis=1)
    lo = s[np.arange(len(s)), idx]
    ties = np.sum(s <= (lo + tol * (1.0 + np.abs(lo)))[:, None], axis=1) > 1
    return idx, ties


def ball_sampler(n: int, radius: float = 1.0):
    vol = math.pi ** (n / 2) / math.gamma(n / 2 + 1) * radius ** n

    def sampler(rng, m):
        u = rng.normal(size=(m, n))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = radius * rng.uniform(size=m) ** (1.0 / n)
        return u * r[:, None], np.full(m, vol)

    return sampler


@dataclass
class DeficitParts:
    deficit: Estimate
    b_mass: Estimate
    cap_mass: Estimate
    ball_mass: Estimate
    reflection_slack: Estimate
    tie_fraction: float


def abp_parts(config: BoundaryConfig, lam: float, w: WeightModel, samples: int = 100_000, seed: int = 0,
              radius: float = 1.0) -> DeficitParts:
    """Masses of ``B ∩ B_r``, of the cap ``{ξ_n > rλ} ∩ B_r`` and of ``B_r`` from one sample set.

    ``ξ`` belongs to ``B`` when ``ξ·ν(x_i) > rλ`` for its (lowest-index) cell ``i``.
    ``reflection_slack`` is ``∫_{B ∩ B_r} w - ½∫_{B_r} w``.
    """
    if not -1.0 < lam < 1.0:
        raise ValueError("lambda must lie in (-1, 1)")
    thr = radius * lam
    ties = [0]

    def f(xi):
        idx, tie = assign_cells(config, xi)
        ties[0] += int(tie.sum())
        wx = w.eval(xi)
        inb = np.einsum("ij,ij->i", xi, config.normals[idx]) > thr
        cap = xi[:, -1] > thr
        # the ball is symmetric, so pairing ξ with -ξ gives an unbiased slack whose
        # variance vanishes when exactly one of ξ, -ξ lies in B
        ridx, _ = assign_cells(config, -xi)
        rin = np.einsum("ij,ij->i", -xi, config.normals[ridx]) > thr
        slack = 0.5 * (wx * inb + w.eval(-xi) * rin - wx)
        return np.column_stack([wx * (inb.astype(float) - cap), wx * inb, wx * cap, wx, slack])

    mean, cov = sample_means(f, ball_sampler(config.n, radius), samples, seed)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    est = [Estimate(float(m), float(s), samples, seed, "monte_carlo") for m, s in zip(mean, se)]
    return DeficitParts(est[0], est[1], est[2], est[3], est[4], ties[0] / samples)


def abp_deficit(config: BoundaryConfig, lam: float, w: WeightModel, samples: int = 100_000, seed: int = 0,
                radius: float = 1.0) -> Estimate:
    """``∫_{B ∩ B_r} w - ∫_{cap} w``; positive values certify the ABP lower bound for this config."""
    return abp_parts(config, lam, w, samples, seed, radius).deficit


def normal_ray_property(config: BoundaryConfig, trials: int = 10_000, seed: int = 0,
                        box: float = 2.0, t_max: float = 5.0) -> ValidationReport:
    """Moving along the outward normal of a point never leaves that point's cell."""
    rng = np.random.default_rng(seed)
    rep = ValidationReport(subject=f"normal ray ({config.size} points)")
    xi = rng.uniform(-box, box, size=(trials, config.n))
    t = t_max * (1.0 - rng.uniform(size=trials))
    idx, tie = assign_cells(config, xi)
    moved = xi + t[:, None] * config.normals[idx]
    s = _scores(config, moved)
    lo = s.min(axis=1)
    own = s[np.arange(trials), idx]
    fail = (~tie) & (own > lo + 1e-9 * (1.0 + np.abs(lo)))
    wit = None
    if fail.any():
        k = int(np.flatnonzero(fail)[0])
        wit = {"xi": xi[k], "t": float(t[k]), "cell": int(idx[k]), "moved_cell": assign_cell(config, moved[k])}
    rep.add(CheckResult("normal_ray", not fail.any(), 0.0, wit, float(fail.sum()),
                        detail=f"trials={trials} ties_skipped={int(tie.sum())}"))
    return rep


def _child_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([seed, i]).generate_state(1)[0])


def zero_abp_suite(E: ConvexObstacle, w: WeightModel, configs: int = 100, points: int = 8,
                   samples: int = 100_000, seed: int = 0, sigma: float = 3.0, patch: float = 1.0) -> ValidationReport:
    """Random configurations on ``∂E`` at ``λ = 0``: every deficit and reflection slack must be ``>= -sigma``·se."""
    if not w.even:
        raise ValueError(f"weight {w.spec} is not even; the zero-angle ABP bound needs an even weight")
    rep = ValidationReport(subject=f"zero-angle ABP on {E.spec} ({w.spec})")
    zs, rz, ties = [], [], []
    for i in range(configs):
        rng = np.random.default_rng(_child_seed(seed, 2 * i))
        cfg = random_config(E, points, rng, patch)
        parts = abp_parts(cfg, 0.0, w, samples, _child_seed(seed, 2 * i + 1))
        z = parts.deficit.z_score(0.0)
        zr = parts.reflection_slack.z_score(0.0)
        zs.append(z)
        rz.append(zr)
        ties.append(parts.tie_fraction)
        rep.rows.append({"config_id": i, "lambda": 0.0, "deficit": parts.deficit.value,
                         "se": parts.deficit.std_error, "z": z})
    zs, rz = np.array(zs), np.array(rz)
    k = int(np.argmin(zs))
    rep.add(CheckResult("zero_abp_deficit", bool(zs.min() >= -sigma), sigma,
                        None if zs.min() >= -sigma else {"config_id": k, "z": float(zs[k])},
                        float(zs.min()), detail=f"configs={configs} min_z={zs.min():.3f}"))
    k = int(np.argmin(rz))
    rep.add(CheckResult("reflection_bound", bool(rz.min() >= -sigma), sigma,
                        None if rz.min() >= -sigma else {"config_id": k, "z": float(rz[k])},
                        float(rz.min()), detail=f"min_z={rz.min():.3f}"))
    rep.add(CheckResult("tie_fraction", bool(max(ties) < 1e-3), 1e-3, None, float(max(ties))))
    return rep


def read_config_csv(path, E: Optional[ConvexObstacle] = None) -> BoundaryConfig:
    """Rows ``x1..xn, value``; normals come from ``E`` when given, else from ``nu1..nun`` columns."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    head, body = rows[0], np.array([[float(v) for v in r] for r in rows[1:] if r])
    xs = [i for i, h in enumerate(head) if h.startswith("x")]
    nus = [i for i, h in enumerate(head) if h.startswith("nu")]
    vi = head.index("value")
    if E is not None:
        return BoundaryConfig.from_obstacle(E, body[:, xs], body[:, vi])
    if not nus:
        raise ValueError("config file has no normals and no obstacle was given")
    return BoundaryConfig(body[:, xs], body[:, vi], body[:, nus])


def write_config_csv(path, config: BoundaryConfig, header: Optional[str] = None) -> None:
    n = config.n
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow([f"x{i + 1}" for i in range(n)] + ["value"] + [f"nu{i + 1}" for i in range(n)])
        for x, v, nu in zip(config.points, config.values, config.normals):
            wr.writerow([f"{c:.17g}" for c in x] + [f"{v:.17g}"] + [f"{c:.17g}" for c in nu])


def write_deficit_csv(path, rows: list[dict], header: Optional[str] = None) -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["config_id", "lambda", "deficit", "se", "z"])
        for r in rows:
            wr.writerow([r["config_id"], f"{r['lambda']:.12g}", f"{r['deficit']:.12g}", f"{r['se']:.12g}",
                         f"{r['z']:.12g}"])
