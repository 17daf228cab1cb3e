"""ABP deficits of random boundary configurations across contact angles.

Only lambda = 0 carries a proven bound; other angles are printed for exploration.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from _common import parse_into
from capiso.abp import _child_seed, abp_parts, random_config, write_deficit_csv
from capiso.geometry import parse_obstacle
from capiso.weights import parse_weight


@dataclass
class AbpExploreConfig:
    obstacle: str = "ball:0,0:1"
    weight: str = "const"
    n: int = 2
    configs: int = 20
    points: int = 8
    lambdas: str = "-0.5,-0.25,0,0.25,0.5"
    samples: int = 100_000
    seed: int = 0
    out: str = "results/abp_explore.csv"


def main(cfg: AbpExploreConfig):
    E = parse_obstacle(cfg.obstacle, cfg.n)
    w = parse_weight(cfg.weight, cfg.n)
    lams = [float(v) for v in cfg.lambdas.split(",")]
    rows = []
    for i in range(cfg.configs):
        conf = random_config(E, cfg.points, np.random.default_rng(_child_seed(cfg.seed, 2 * i)))
        for lam in lams:
            d = abp_parts(conf, lam, w, cfg.samples, _child_seed(cfg.seed, 2 * i + 1)).deficit
            rows.append({"config_id": i, "lambda": lam, "deficit": d.value, "se": d.std_error, "z": d.z_score(0.0)})
    for lam in lams:
        zs = [r["z"] for r in rows if r["lambda"] == lam]
        tag = "" if lam == 0 else "  (exploratory)"
        print(f"lambda {lam:+.2f}: min z {min(zs):+.2f}, negative {sum(z < -3 for z in zs)}/{len(zs)}{tag}")
    Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
    write_deficit_csv(cfg.out, rows)


if __name__ == "__main__":
    main(parse_into(AbpExploreConfig, __doc__))
