"""JSON schemas for the command-line inputs and outputs."""

import json
from importlib.resources import files

NAMES = ("params", "state", "covariance", "fit", "fit_config", "sim_config", "sim_covariance", "manifest")


def load(name: str) -> dict:
    if name not in NAMES:
        raise KeyError(f"no schema named {name!r}")
    return json.loads(files(__name__).joinpath(f"{name}.schema.json").read_text())
