"""Benchmark environments, registered under stable names."""

from __future__ import annotations

from ..errors import ConfigError
from .carshare import (
    CarsharePricing2,
    CarsharePricing4,
    CarshareRepositioning,
    make_carshare_pricing_2,
    make_carshare_pricing_4,
    make_carshare_repositioning,
)
from .example1 import Example1, make_example1
from .gridworld import StormyGridworld, WindyGridworld, make_stormy_gridworld, make_windy_gridworld

ENVIRONMENTS = {
    "example1": make_example1,
    "wg": make_windy_gridworld,
    "sg": make_stormy_gridworld,
    "2-cs-r": make_carshare_repositioning,
    "2-cs": make_carshare_pricing_2,
    "4-cs": make_carshare_pricing_4,
}

_CACHE = {}


def make_env(name, gamma=None):
    """Build (or fetch the cached) environment registered as ``name``.

    Models are immutable, so instances are shared.
    """
    if name not in ENVIRONMENTS:
        raise ConfigError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}")
    key = (name, gamma)
    if key not in _CACHE:
        factory = ENVIRONMENTS[name]
        _CACHE[key] = factory() if gamma is None else factory(gamma=gamma)
    return _CACHE[key]


__all__ = [
    "ENVIRONMENTS",
    "make_env",
    "Example1",
    "WindyGridworld",
    "StormyGridworld",
    "CarshareRepositioning",
    "CarsharePricing2",
    "CarsharePricing4",
    "make_example1",
    "make_windy_gridworld",
    "make_stormy_gridworld",
    "make_carshare_repositioning",
    "make_carshare_pricing_2",
    "make_carshare_pricing_4",
]
