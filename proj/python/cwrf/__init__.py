"""Randomness-hardened random forests and evasion attack experiments."""

import json

from ._cwrf import (
    Error,
    Model,
    compute_weights,
    generate_synthetic,
    information_gain,
    load_rows,
)
from . import _cwrf

__all__ = [
    "Error",
    "Model",
    "compute_weights",
    "generate_synthetic",
    "information_gain",
    "load_rows",
    "run_experiment",
    "sweep",
    "train",
]


def run_experiment(config):
    """Run the repeated experiment described by a config dict; returns the summary dict."""
    return json.loads(_cwrf.run_experiment(json.dumps(config)))


def sweep(config, parameter, values):
    """Repeat the experiment for each value of `parameter` (r, s, q, k or M)."""
    return json.loads(_cwrf.sweep(json.dumps(config), parameter, [float(v) for v in values]))


def train(config, seed=1):
    """Train a model on the config's full dataset."""
    return Model.train(json.dumps(config), seed)
