"""Monte Carlo estimates, batched sampling, and pass/fail reports."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

BATCH_SIZE = 1 << 16


@dataclass(frozen=True)
class Estimate:
    """A numerical value with its standard error.

    ``method`` is one of ``monte_carlo``, ``parametric_quadrature`` or
    ``closed_form``.  For quadrature the error is the gap between two
    resolutions; for closed forms it is zero.
    """

    value: float
    std_error: float = 0.0
    samples: int = 0
    seed: Optional[int] = None
    method: str = "closed_form"

    def interval(self, k: float = 3.0) -> tuple[float, float]:
        return self.value - k * self.std_error, self.value + k * self.std_error

    def contains(self, x: float, k: float = 3.0, atol: float = 0.0) -> bool:
        lo, hi = self.interval(k)
        return lo - atol <= x <= hi + atol

    def z_score(self, reference: float = 0.0) -> float:
        diff = self.value - reference
        if self.std_error == 0.0:
            if diff == 0.0:
                return 0.0
            return math.copysign(math.inf, diff)
        return diff / self.std_error

    @property
    def rel_error(self) -> float:
        return self.std_error / abs(self.value) if self.value else math.inf

    def scaled(self, c: float) -> "Estimate":
        return Estimate(c * self.value, abs(c) * self.std_error, self.samples, self.seed, self.method)

    def __sub__(self, other: "Estimate") -> "Estimate":
        # independent errors
        return combine(self.value - other.value, [self, other])

    def __add__(self, other: "Estimate") -> "Estimate":
        return combine(self.value + other.value, [self, other])


def combine(value: float, parts: Sequence[Estimate], grads: Optional[Sequence[float]] = None) -> Estimate:
    """First-order error propagation over independent estimates."""
    if grads is None:
        grads = [1.0] * len(parts)
    var = sum((g * p.std_error) ** 2 for g, p in zip(grads, parts))
    methods = {p.method for p in parts}
    method = "monte_carlo" if "monte_carlo" in methods else (
        "parametric_quadrature" if "parametric_quadrature" in methods else "closed_form")
    seeds = [p.seed for p in parts if p.seed is not None]
    return Estimate(float(value), math.sqrt(var), max((p.samples for p in parts), default=0),
                    seeds[0] if seeds else None, method)


Sampler = Callable[[np.random.Generator, int], tuple[np.ndarray, np.ndarray]]


def sample_means(
    integrand: Callable[[np.ndarray], np.ndarray],
    sampler: Sampler,
    samples: int,
    seed: int,
    batch_size: int = BATCH_SIZE,
) -> tuple[np.ndarray, np.ndarray]:
    """Importance-sampled means of several integrands sharing one sample set.

    ``sampler(rng, m)`` returns ``(points, inv_density)``; ``integrand(points)``
    returns an ``(m, k)`` array.  Returns the vector of integral estimates and
    the covariance matrix of those estimates.  Batches are drawn sequentially
    from one generator, so the result depends only on ``(seed, samples,
    batch_size)``.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    rng = np.random.default_rng(seed)
    s1 = None
    s2 = None
    done = 0
    while done < samples:
        m = min(batch_size, samples - done)
        pts, inv_density = sampler(rng, m)
        vals = np.asarray(integrand(pts), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        vals = vals * np.asarray(inv_density, dtype=float)[:, None]
        if s1 is None:
            s1 = vals.sum(axis=0)
            s2 = vals.T @ vals
        else:
            s1 += vals.sum(axis=0)
            s2 += vals.T @ vals
        done += m
    mean = s1 / samples
    cov = (s2 / samples - np.outer(mean, mean)) * samples / (samples - 1)
    return mean, cov / samples


def mc_estimates(integrand, sampler: Sampler, samples: int, seed: int) -> list[Estimate]:
    mean, cov = sample_means(integrand, sampler, samples, seed)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return [Estimate(float(m), float(s), samples, seed, "monte_carlo") for m, s in zip(mean, se)]


def ratio_power(num: float, den: float, power: float, cov: np.ndarray) -> tuple[float, float]:
    """Value and delta-method error of ``num / den**power`` with correlated inputs."""
    val = num / den ** power
    g = np.array([1.0 / den ** power, -power * num / den ** (power + 1.0)])
    var = float(g @ cov @ g)
    return val, math.sqrt(max(var, 0.0))


@dataclass
class CheckResult:
    property: str
    passed: bool
    tolerance: float
    witness: Optional[dict] = None
    value: Optional[float] = None
    detail: str = ""
    skipped: bool = False


@dataclass
class ValidationReport:
    subject: str
    checks: list[CheckResult] = field(default_factory=list)
    rows: list[dict] = field(default_factory=list)

    def add(self, check: CheckResult) -> CheckResult:
        self.checks.append(check)
        return check

    @property
    def passed(self) -> bool:
        return all(c.passed or c.skipped for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.property == name:
                return c
        raise KeyError(name)

    def to_json(self) -> str:
        rows = []
        for c in self.checks:
            rows.append({
                "property": c.property,
                "pass": "skipped" if c.skipped else bool(c.passed),
                "witness": _jsonable(c.witness),
                "tolerance": c.tolerance,
            })
        return json.dumps({"subject": self.subject, "checks": rows}, indent=2)


def _jsonable(obj):
    if obj is None:
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def estimate_dict(est: Estimate) -> dict:
    return asdict(est)
