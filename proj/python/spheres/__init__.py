"""Concentric-spheres toolkit: dataset, models, manifold attacks, geometry oracles."""

import json as _json

from ._spheres import *  # noqa: F401,F403
from ._spheres import train as _train


def train(model, steps, **kwargs):
    """Train `model` in place; metric records come back as dicts."""
    out = _train(model, steps, **kwargs)
    out["metrics"] = [_json.loads(line) for line in out["metrics"]]
    if out["abort"] is not None:
        out["abort"] = _json.loads(out["abort"])
    return out
