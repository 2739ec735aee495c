"""Named source profiles (e1)-(e5) on T = 1.

Jumps are right-continuous: the value at a jump time belongs to the
interval that starts there.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import ConfigError
from ..fracops import TimeGrid

__all__ = ["Preset", "PRESETS", "preset_profiles", "get_preset"]

Profile = Callable[[np.ndarray], np.ndarray]


def smooth_g1(t):
    t = np.asarray(t, dtype=float)
    return t + np.sin(2 * np.pi * t) + np.sin(3 * np.pi * t)


def jump_sine(t):
    t = np.asarray(t, dtype=float)
    return np.sin(2 * np.pi * t) + np.where(t < 0.5, -0.3, 0.3)


def half_sine(t):
    return np.sin(np.pi * np.asarray(t, dtype=float))


def staircase(t):
    t = np.asarray(t, dtype=float)
    return np.select([t < 0.3, t < 0.6], [4.0, 2.0], default=1.0)


@dataclass(frozen=True)
class Preset:
    name: str
    g1: Profile
    g2: Profile
    description: str


PRESETS = {
    "e1": Preset("e1", smooth_g1, jump_sine, "g1 smooth, g2 sine with a jump at 1/2"),
    "e2": Preset("e2", smooth_g1, half_sine, "g1 smooth, g2 = sin(pi t)"),
    "e3": Preset("e3", jump_sine, half_sine, "g1 sine with a jump at 1/2, g2 = sin(pi t)"),
    "e4": Preset("e4", smooth_g1, staircase, "g1 smooth, g2 staircase 4/2/1"),
    "e5": Preset("e5", jump_sine, staircase, "g1 sine with a jump, g2 staircase 4/2/1"),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


def preset_profiles(name: str, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """(g1, g2) sampled on the grid nodes."""
    p = get_preset(name)
    t = grid.nodes
    return p.g1(t) * np.ones_like(t), p.g2(t) * np.ones_like(t)
