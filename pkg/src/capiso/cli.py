"""Command-line driver: ``capiso <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from . import abp, gauges, measure, rearrange, sobolev
from .estimate import Estimate, ValidationReport
from .geometry import parse_obstacle, parse_region
from .weights import DomainError, parse_weight, validate_weight

SUBCOMMANDS = ("validate-weight", "gauge-check", "iso", "symmetrize", "sobolev", "abp")

# check id prefix -> the result each check is about
ANCHORS = {
    "homogeneity": "weight homogeneity",
    "euler_identity": "weight Euler identity",
    "evenness": "weight evenness flag",
    "xn_independence": "weight x_n-independence flag",
    "concavity_criterion": "weight concavity criterion",
    "am_gm": "weighted AM-GM step",
    "dual_agreement": "closed-form vs Minkowski dual gauge",
    "unit_gauge_of_dual_gradient": "polar identity F(grad F°) = 1",
    "gauge_euler_identity": "polar identity grad F . x = F",
    "polar_reconstruction": "polar identity F° grad F(grad F°) = x",
    "wulff_ball_is_unit_ball": "Wulff ball of the capillary gauge",
    "isoperimetric_deficit": "capillary isoperimetric inequality",
    "equimeasurable": "equimeasurability of the symmetrization",
    "lq_norm": "L^q preservation under symmetrization",
    "coarea_radial": "coarea formula for the radial rearrangement",
    "sharp_constant_agreement": "sharp constant, two quadratures",
    "bubble_quotient": "equality attained by the bubble",
    "zero_abp_deficit": "zero-angle ABP lower bound",
    "reflection_bound": "reflection argument for the zero-angle ABP bound",
    "tie_fraction": "subdifferential cells overlap on a null set",
    "abp_deficit": "ABP lower bound for a given configuration",
}


def anchor(check_id: str) -> str:
    for key, val in ANCHORS.items():
        if check_id.startswith(key):
            return val
    return "artifact check"


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str = "iso"
    weight: str = "const"
    gauge: str = "euclidean"
    region: Optional[str] = None
    obstacle: Optional[str] = None
    field: Optional[str] = None
    config_file: Optional[str] = None
    n: int = 2
    alpha: Optional[float] = None
    lam: float = 0.0
    p: float = 2.0
    samples: int = 100_000
    seed: int = 0
    sigma: float = 3.0
    tolerance: Optional[float] = None
    levels: int = 64
    configs: int = 100
    points: int = 8
    output: str = "capiso-out"

    def to_text(self) -> str:
        """Normalised ``key = value`` lines; unset options are omitted."""
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            key = "lambda" if f.name == "lam" else f.name.replace("_", "-")
            lines.append(f"{key} = {_fmt(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls().updated(parse_config_text(text))

    def updated(self, values: dict) -> "RunConfig":
        kinds = {f.name: f.type for f in fields(self)}
        out = {}
        for key, raw in values.items():
            name = "lam" if key == "lambda" else key.replace("-", "_")
            if name not in kinds:
                raise UsageError(f"config: unknown key {key!r}")
            out[name] = _coerce(name, kinds[name], raw)
        cfg = replace(self, **out)
        if cfg.subcommand not in SUBCOMMANDS:
            raise UsageError(f"subcommand: unknown subcommand {cfg.subcommand!r}")
        return cfg


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(name: str, kind: str, raw):
    if raw is None or not isinstance(raw, str):
        return raw
    try:
        if "int" in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
    except ValueError:
        raise UsageError(f"{name}: cannot parse {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict:
    out = {}
    for k, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise UsageError(f"config: line {k} is not 'key = value'")
        key, val = (t.strip() for t in s.split("=", 1))
        out[key] = val
    return out


# --------------------------------------------------------------------------- reporting


@dataclass
class SummaryRow:
    check_id: str
    value: Optional[float]
    se: Optional[float]
    z: Optional[float]
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return {"check_id": self.check_id, "paper_anchor": anchor(self.check_id), "value": _clean(self.value),
                "se": _clean(self.se), "z": _clean(self.z), "pass": bool(self.passed)}

    def line(self) -> str:
        parts = [("PASS" if self.passed else "FAIL"), self.check_id, f"[{anchor(self.check_id)}]"]
        if self.value is not None:
            parts.append(f"value={self.value:.6g}")
        if self.se is not None:
            parts.append(f"se={self.se:.3g}")
        if self.z is not None:
            parts.append(f"z={self.z:.3f}")
        if self.detail:
            parts.append(self.detail)
        return " ".join(parts)


def _clean(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def rows_from_report(rep: ValidationReport, prefix: str = "") -> list[SummaryRow]:
    out = []
    for c in rep.checks:
        if c.skipped:
            continue
        out.append(SummaryRow(prefix + c.property, c.value, None, None, bool(c.passed), c.detail))
    return out


def csv_header() -> str:
    return f"generated {datetime.now(timezone.utc).isoformat(timespec='seconds')}"


# --------------------------------------------------------------------------- subcommands


def _weight(cfg: RunConfig):
    w = parse_weight(cfg.weight, cfg.n)
    if cfg.alpha is not None and abs(cfg.alpha - w.alpha) > 1e-12:
        raise UsageError(f"alpha: {cfg.alpha:g} does not match the degree {w.alpha:g} of weight {cfg.weight!r}")
    return w


def run_validate_weight(cfg: RunConfig, out: Path) -> list[SummaryRow]:
    w = _weight(cfg)
    kw = {} if cfg.tolerance is None else {"tol_homog": cfg.tolerance, "tol_concave": cfg.tolerance}
    return rows_from_report(validate_weight(w, cfg.samples, cfg.seed, cfg.n, **kw))


def run_gauge_check(cfg: RunConfig, out: Path) -> list[SummaryRow]:
    g = gauges.parse_gauge(cfg.gauge)
    tol = 1e-5 if cfg.tolerance is None else cfg.tolerance
    rows = []
    if g.polar_member is not None:
        gap = gauges.duality_agreement(g, cfg.samples, cfg.seed, cfg.n)
        rows.append(SummaryRow("dual_agreement", gap, None, None, gap <= 1e-10))
    rep = gauges.verify_polar_identities(g, cfg.samples, cfg.seed, cfg.n, tol=tol)
    return rows + rows_from_report(rep)


def run_iso(cfg: RunConfig, out: Path) -> list[SummaryRow]:
    w = _weight(cfg)
    E = parse_obstacle(cfg.obstacle or f"halfspace:n={cfg.n}:c=0", cfg.n)
    if cfg.region is not None:
        shapes = [(cfg.region, parse_region(cfg.region, cfg.n, E))]
    else:
        shapes = measure.shape_family("ball" if E.kind == "ball" else "half_space", cfg.n)
        if E.kind not in ("ball", "half_space"):
            raise UsageError("obstacle: the bundled shape family needs a half-space or ball obstacle")
    ref = measure.reference_quotient(cfg.n, w, cfg.lam, cfg.samples, cfg.seed + 1000)
    reports, rows = [], []
    for sid, region in shapes:
        method = "auto" if cfg.region is not None else "monte_carlo"
        rep = measure.iso_quotient_report(region, E, w, cfg.lam, cfg.samples, cfg.seed, sid, ref, method)
        reports.append(rep)
        if rep.status != "ok":
            rows.append(SummaryRow(f"isoperimetric_deficit:{sid}", None, None, None, False, rep.status))
            continue
        rows.append(SummaryRow(f"isoperimetric_deficit:{sid}", rep.deficit.value, rep.deficit.std_error,
                               rep.z_score, rep.z_score >= -cfg.sigma))
    measure.write_iso_csv(out / "iso.csv", [r for r in reports if r.energy is not None], csv_header())
    return rows


FIELDS = {
    "one_minus_r": rearrange.field_one_minus_r,
    "coordinate_xn": rearrange.field_coordinate_xn,
    "plateau": rearrange.field_plateau,
    "tilted": rearrange.field_tilted,
}


def run_symmetrize(cfg: RunConfig, out: Path) -> list[SummaryRow]:
    w = _weight(cfg)
    name = cfg.field or "coordinate_xn"
    if name not in FIELDS:
        raise UsageError(f"field: unknown field {name!r}; choose from {', '.join(FIELDS)}")
    u = FIELDS[name](cfg.n)
    star = rearrange.symmetrize(u, w, cfg.levels, cfg.samples, cfg.seed, cfg.sigma)
    star.profile.to_csv(out / "profile.csv", csv_header())
    rearrange.write_slice_csv(out / "slice.csv", star, header=csv_header())
    rep = rearrange.check_equimeasurable(u, star, w, samples=cfg.samples, seed=cfg.seed + 1, sigma=cfg.sigma)
    return rows_from_report(rep)


def run_sobolev(cfg: RunConfig, out: Path) -> list[SummaryRow]:
    w = _weight(cfg)
    setting = sobolev.SobolevSetting(cfg.n, cfg.p, w)
    tol = 5e-3 if cfg.tolerance is None else cfg.tolerance
    c_quad = sobolev.sharp_constant(setting)
    c_oracle = sobolev.sharp_constant(setting, cfg.samples, cfg.seed, method="oracle")
    rel = abs(c_quad.value - c_oracle.value) / c_quad.value
    rows = [SummaryRow("sharp_constant_agreement", c_quad.value, c_quad.std_error, None, rel <= tol,
                       f"oracle={c_oracle.value:.9g} rel_gap={rel:.2e}")]
    q = sobolev.sobolev_quotient(sobolev.bubble_field(setting), setting, cfg.samples, cfg.seed + 1)
    inv = 1.0 / c_quad.value
    qrel = abs(q.value / inv - 1.0) if math.isfinite(q.value) else math.inf
    zq = q.z_score(inv)
    rows.append(SummaryRow("bubble_quotient", q.value, q.std_error, zq, qrel <= 0.02,
                           f"reciprocal_constant={inv:.9g} rel_gap={qrel:.2e}"))
    sobolev.write_sobolev_csv(out / "sobolev.csv", setting, c_quad, [("bubble", q, zq)], csv_header())
    return rows


def run_abp(cfg: RunConfig, out: Path) -> list[SummaryRow]:
    w = _weight(cfg)
    E = parse_obstacle(cfg.obstacle or f"ball:{','.join(['0'] * cfg.n)}:1", cfg.n)
    if cfg.config_file is not None:
        conf = abp.read_config_csv(cfg.config_file, E)
        parts = abp.abp_parts(conf, cfg.lam, w, cfg.samples, cfg.seed)
        z = parts.deficit.z_score(0.0)
        abp.write_deficit_csv(out / "abp.csv", [{"config_id": 0, "lambda": cfg.lam, "deficit": parts.deficit.value,
                                                "se": parts.deficit.std_error, "z": z}], csv_header())
        if cfg.lam != 0.0:
            # exploratory: no bound is claimed away from zero angle
            return [SummaryRow("abp_deficit:exploratory", parts.deficit.value, parts.deficit.std_error, z, True,
                               "not asserted for lambda != 0")]
        return [SummaryRow("abp_deficit", parts.deficit.value, parts.deficit.std_error, z, z >= -cfg.sigma)]
    if cfg.lam != 0.0:
        raise UsageError("lambda: the random-configuration suite is defined at lambda = 0 only")
    rep = abp.zero_abp_suite(E, w, cfg.configs, cfg.points, cfg.samples, cfg.seed, cfg.sigma)
    abp.write_deficit_csv(out / "abp.csv", rep.rows, csv_header())
    return rows_from_report(rep)


RUNNERS = {
    "validate-weight": run_validate_weight,
    "gauge-check": run_gauge_check,
    "iso": run_iso,
    "symmetrize": run_symmetrize,
    "sobolev": run_sobolev,
    "abp": run_abp,
}


def run(cfg: RunConfig) -> int:
    """Run one subcommand; 0 when every check passes, 1 otherwise."""
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    rows = RUNNERS[cfg.subcommand](cfg, out)
    for r in rows:
        print(r.line())
    (out / "summary.json").write_text(json.dumps([r.as_dict() for r in rows], indent=2) + "\n")
    (out / "run.cfg").write_text(cfg.to_text())
    return 0 if all(r.passed for r in rows) else 1


# --------------------------------------------------------------------------- argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="capiso", description="Numerical checks for weighted capillary "
                                 "isoperimetric and Sobolev inequalities.")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key = value file; flags override it")
        sp.add_argument("--weight")
        sp.add_argument("--gauge")
        sp.add_argument("--region")
        sp.add_argument("--obstacle")
        sp.add_argument("--field", help="symmetrize: " + ", ".join(FIELDS))
        sp.add_argument("--config-file", dest="config_file", help="abp: CSV of boundary points and values")
        sp.add_argument("--n", type=int)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--lambda", dest="lam", type=float)
        sp.add_argument("--p", type=float)
        sp.add_argument("--samples", type=lambda s: int(float(s)))
        sp.add_argument("--seed", type=int)
        sp.add_argument("--sigma", type=float, help="assertion threshold in standard errors (default 3)")
        sp.add_argument("--tolerance", type=float)
        sp.add_argument("--levels", type=int)
        sp.add_argument("--configs", type=int)
        sp.add_argument("--points", type=int)
        sp.add_argument("--out", dest="output")
    return ap


def config_from_args(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(subcommand=args.subcommand)
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"config: cannot read {args.config!r}: {exc.strerror}") from None
        cfg = cfg.updated(parse_config_text(text))
        cfg = replace(cfg, subcommand=args.subcommand)
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "subcommand")}
    return replace(cfg, **flags)


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
        return run(cfg)
    except (UsageError, measure.ConfigurationError, DomainError, ValueError) as exc:
        print(f"capiso: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
