"""Python front end for the spoofwatch native core.

Configs are plain dicts with the same layout as the JSON config files.
"""

import json

from . import _spoofwatch as _core
from ._spoofwatch import (
    Bocpd,
    ConfigError,
    CorruptFileError,
    GeometryError,
    InsufficientDataError,
    bocpd_flag,
    bocpd_oracle,
    fit_nominal_profile,
    make_constellation,
    oracle_check,
    pseudoranges,
    solve_pvt,
)

__all__ = [
    "Bocpd",
    "ConfigError",
    "CorruptFileError",
    "GeometryError",
    "InsufficientDataError",
    "bocpd_flag",
    "bocpd_oracle",
    "config_hash",
    "default_config",
    "evaluate",
    "fit_nominal_profile",
    "load_config",
    "make_constellation",
    "oracle_check",
    "pseudoranges",
    "resolve_config",
    "solve_pvt",
    "train",
]


def _dump(config):
    return "" if config is None else json.dumps(config)


def default_config():
    return json.loads(_core.default_config_json())


def load_config(path):
    return json.loads(_core.load_config_json(str(path)))


def resolve_config(config):
    """Fill defaults and validate; raises ConfigError."""
    return json.loads(_core.resolve_config_json(_dump(config)))


def config_hash(config=None):
    return _core.config_hash(_dump(config))


def train(config=None, seed=0, checkpoint=None):
    """Train an agent; returns the per-episode reward history."""
    return _core.train(_dump(config), seed, "" if checkpoint is None else str(checkpoint))


def evaluate(checkpoint, config=None, seed=0, out_dir=None):
    """Profile detectors, run the nominal/attacked evaluation, return the summary dict."""
    text = _core.evaluate(_dump(config), seed, str(checkpoint), "" if out_dir is None else str(out_dir))
    return json.loads(text)
