"""Discrete fractional calculus on a uniform time grid."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special

from .errors import DomainError

__all__ = [
    "TimeGrid",
    "L1Weights",
    "l1_weights",
    "frac_integral_matrix",
    "frac_integral_series",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform mesh t_n = n T / N, n = 0..N."""

    T: float
    N: int

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError(f"T must be positive, got {self.T}")
        if int(self.N) != self.N or self.N < 2:
            raise DomainError(f"N must be an integer >= 2, got {self.N}")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @cached_property
    def nodes(self) -> np.ndarray:
        # n/N * T keeps nodes such as 0.3 and 0.5 exactly representable.
        return np.arange(self.N + 1) / self.N * self.T

    def __len__(self) -> int:
        return self.N + 1


@dataclass(frozen=True)
class L1Weights:
    """L1 weights b_{n,k} = scale * lag[n-k], with lag[j] = j^(1-a) - (j-1)^(1-a).

    ``lag`` is indexed from 0 with ``lag[0]`` unused (set to 0) so that
    ``lag[n - k]`` reads naturally.
    """

    alpha: float
    dt: float
    scale: float
    lag: np.ndarray

    def b(self, n: int, k: int) -> float:
        if not 0 <= k < n:
            raise IndexError(f"b_{{n,k}} needs 0 <= k < n, got n={n}, k={k}")
        return self.scale * self.lag[n - k]

    def row(self, n: int) -> np.ndarray:
        """b_{n,k} for k = 0..n-1."""
        return self.scale * self.lag[n:0:-1]

    @property
    def leading(self) -> float:
        """b_{n,n-1}, identical for every n."""
        return self.scale


def l1_weights(alpha: float, grid: TimeGrid) -> L1Weights:
    if not 0.5 < alpha < 1.0:
        raise DomainError(f"L1 scheme is used for alpha in (1/2, 1), got {alpha}")
    j = np.arange(grid.N + 1, dtype=float)
    lag = np.zeros(grid.N + 1)
    lag[1:] = j[1:] ** (1.0 - alpha) - j[:-1] ** (1.0 - alpha)
    scale = grid.dt ** (-alpha) / special.gamma(2.0 - alpha)
    return L1Weights(alpha=alpha, dt=grid.dt, scale=scale, lag=lag)


def frac_integral_matrix(alpha_int: float, grid: TimeGrid) -> np.ndarray:
    """Lower-triangular matrix Q with (Q u)_n = I^alpha u(t_n) for piecewise-linear u.

    Product-integration weights: the kernel (t_n - s)^(alpha-1)/Gamma(alpha)
    is integrated exactly against the hat functions of the grid.
    """
    if not 0.0 < alpha_int < 1.0:
        raise DomainError(f"fractional integral order must lie in (0, 1), got {alpha_int}")
    a = alpha_int
    N = grid.N
    c = grid.dt**a / special.gamma(a + 2.0)
    m = np.arange(N + 2, dtype=float)
    p = m ** (a + 1.0)
    # interior weight for lag d = n - j >= 1
    inner = np.zeros(N + 1)
    inner[1:] = p[2 : N + 2] - 2.0 * p[1 : N + 1] + p[0:N]
    Q = np.zeros((N + 1, N + 1))
    n_idx, j_idx = np.tril_indices(N + 1)
    lag = n_idx - j_idx
    Q[n_idx, j_idx] = inner[lag]
    np.fill_diagonal(Q, 1.0)
    n = np.arange(1, N + 1, dtype=float)
    Q[1:, 0] = (n - 1.0) ** (a + 1.0) - (n - 1.0 - a) * n**a
    Q[0, 0] = 0.0
    return c * Q


def frac_integral_series(alpha_int: float, series, grid: TimeGrid) -> np.ndarray:
    """I^alpha of one path (1-D) or many paths (2-D, time along the last axis)."""
    u = np.asarray(series, dtype=float)
    if u.shape[-1] != grid.N + 1:
        raise DomainError(f"series has {u.shape[-1]} samples, grid has {grid.N + 1} nodes")
    Q = frac_integral_matrix(alpha_int, grid)
    return u @ Q.T
