"""Quotient deficits of the bundled shape family against the half-space and the unit ball."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from _common import parse_into
from capiso.geometry import ball, lower_half_space
from capiso.measure import family_weights, iso_quotient_report, shape_family, write_iso_csv


@dataclass
class IsoFamilyConfig:
    n: int = 2
    lam: float = 0.0
    samples: int = 1_000_000
    seed: int = 0
    out: str = "results/iso_family.csv"


def main(cfg: IsoFamilyConfig):
    reports = []
    for obstacle, E in (("half_space", lower_half_space(cfg.n)), ("ball", ball(np.zeros(cfg.n), 1.0))):
        for w in family_weights(obstacle):
            ref = None
            for i, (name, region) in enumerate(shape_family(obstacle, cfg.n)):
                r = iso_quotient_report(region, E, w, cfg.lam, cfg.samples, cfg.seed + 10 * i,
                                        f"{obstacle}/{name}/{w.spec}", ref, "monte_carlo")
                ref = r.reference
                reports.append(r)
                print(f"{r.shape_id:40s} deficit {r.deficit.value:+.5f} +- {r.deficit.std_error:.5f}  "
                      f"z {r.z_score:+.2f}")
    Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
    write_iso_csv(cfg.out, [r for r in reports if r.energy is not None])


if __name__ == "__main__":
    main(parse_into(IsoFamilyConfig, __doc__))
