import argparse
from dataclasses import fields


def parse_into(cfg_cls, description: str):
    """Build a dataclass config from command-line flags named after its fields."""
    ap = argparse.ArgumentParser(description=description)
    for f in fields(cfg_cls):
        kind = type(f.default)
        ap.add_argument("--" + f.name.replace("_", "-"), type=kind, default=f.default)
    return cfg_cls(**vars(ap.parse_args()))
