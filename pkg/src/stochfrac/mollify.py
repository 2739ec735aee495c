"""Mollification of sampled moment series by a compactly supported bump."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import DomainError
from .fracops import TimeGrid

__all__ = [
    "MollifierParams",
    "bump_normalization",
    "mollifier_value",
    "periodic_extend",
    "mollify_series",
]

# Minimum number of quadrature nodes across one kernel support.
MIN_QUAD_POINTS = 64
# Extra nodes per grid cell so that the piecewise-linear data is resolved.
POINTS_PER_CELL = 4


def _bump(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    out = np.zeros_like(t)
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ti * ti))
    return out


@lru_cache(maxsize=1)
def bump_normalization() -> float:
    """c such that c * int_{-1}^{1} exp(-1/(1-t^2)) dt = 1."""
    mass, _ = integrate.quad(lambda s: math.exp(-1.0 / (1.0 - s * s)), -1.0, 1.0, epsabs=1e-14, epsrel=1e-13)
    return 1.0 / mass


@dataclass(frozen=True)
class MollifierParams:
    epsilon: float
    quad_points: int = MIN_QUAD_POINTS

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        if self.quad_points < 2:
            raise DomainError("quad_points must be at least 2")

    @property
    def c(self) -> float:
        return bump_normalization()


def mollifier_value(t, params: MollifierParams):
    """J_eps(t) = c/eps * exp(-1/(1-(t/eps)^2)) inside the support, 0 outside."""
    eps = params.epsilon
    val = params.c / eps * _bump(np.asarray(t, dtype=float) / eps)
    return float(val) if np.ndim(val) == 0 else val


def periodic_extend(series, grid: TimeGrid) -> Callable[[np.ndarray], np.ndarray]:
    """Even reflection at 0 and T followed by 2T-periodic continuation.

    The returned evaluator interpolates linearly between grid nodes.
    """
    values = np.asarray(series, dtype=float)
    if values.shape != (grid.N + 1,):
        raise DomainError(f"series has shape {values.shape}, grid needs {(grid.N + 1,)}")
    T = grid.T
    nodes = grid.nodes

    def evaluate(t):
        s = np.mod(np.asarray(t, dtype=float), 2.0 * T)
        s = np.where(s > T, 2.0 * T - s, s)
        out = np.interp(s, nodes, values)
        return float(out) if np.ndim(out) == 0 else out

    return evaluate


def mollify_series(series, params: MollifierParams, grid: TimeGrid) -> np.ndarray:
    """(J_eps * extended series)(t_n) for every grid node.

    Composite trapezoid on a uniform lattice across [-eps, eps]; the kernel
    and all its derivatives vanish at the ends, so the rule converges fast
    for smooth data, and the lattice is fine enough to resolve every grid cell.
    The discrete weights are rescaled to sum to one so constants are kept.
    """
    eps = params.epsilon
    if eps >= grid.T:
        raise DomainError(f"epsilon={eps} must be smaller than T={grid.T}")
    extend = periodic_extend(series, grid)
    cells = math.ceil(2.0 * eps / grid.dt)
    k = max(params.quad_points, POINTS_PER_CELL * cells) + 1
    offsets = np.linspace(-eps, eps, k)
    w = _bump(offsets / eps)
    w /= w.sum()
    t = grid.nodes
    out = np.empty(grid.N + 1)
    # chunk rows so the evaluation matrix stays small for wide kernels
    step = max(1, 2_000_000 // k)
    for lo in range(0, t.size, step):
        tt = t[lo : lo + step, None] - offsets[None, :]
        out[lo : lo + step] = extend(tt) @ w
    return out
