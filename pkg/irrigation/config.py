"""Run configuration: built-in defaults, YAML overrides and thread limits."""

import copy
import logging
import os
from typing import Any, Dict, Optional

import yaml

logger = logging.getLogger(__name__)

THREADS_ENV = "IRR_THREADS"

DEFAULT_CONFIG: Dict[str, Any] = {
    "construct": {
        "levels": 4,
        "time_split": "geometric",
        "geometric_ratio": 2.0 ** -1.5,
        "coarse_level": None,
    },
    "optimizer": {
        "max_iters": 2000,
        "step_rule": "backtracking-armijo",
        "init_step": 1e-2,
        "grad_tol": 1e-7,
        "merge_tol": 1e-3,
        "topology_moves": False,
        "moves_per_round": 8,
        "max_rounds": 10,
        "seed": 0,
    },
    "potential": {
        "mode": "disk",
        "quadrature_order": 8,
    },
    "analysis": {
        "alpha": 2.0,
        "alpha_grid": [1.0, 1.2, 1.4, 1.6, 1.8, 2.0],
        "radii": None,
        "holder_shells": 11,
        "holder_pairs_per_shell": 64,
    },
    "sweep": {
        "R": [1.0, 2.0, 4.0],
        "T": [1.0, 2.0, 4.0],
        "leaves": 16,
        "epsilon": 0.05,
    },
    "cache": {
        "enabled": False,
        "cache_dir": "cache",
        "redis_url": None,
        "ttl": 86400,
    },
}


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path: Optional[str] = None) -> Dict[str, Any]:
    """
    Load the run configuration.

    Args:
        path: Optional YAML file whose sections override the defaults

    Returns:
        Merged configuration mapping
    """
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    with open(path, "r") as f:
        user = yaml.safe_load(f) or {}
    if not isinstance(user, dict):
        raise ValueError(f"Configuration file {path} must contain a mapping")
    return _deep_merge(DEFAULT_CONFIG, user)


def max_workers() -> int:
    """Worker thread cap taken from IRR_THREADS."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return max(1, os.cpu_count() or 1)
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning("Ignoring invalid %s=%r, using 1 thread", THREADS_ENV, raw)
        return 1
