"""Second-kind Volterra equations Y = X + K*X and the source reconstruction built on them."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError
from .forward import KernelTables
from .fracops import TimeGrid

log = logging.getLogger(__name__)

__all__ = [
    "VolterraProblem",
    "VolterraSolution",
    "ReconstructionResult",
    "convolution_operator",
    "solve_volterra2",
    "reconstruct_G1",
    "reconstruct_G2",
    "differentiate_antiderivative",
    "abs_from_squared_rate",
    "error_metrics",
    "reconstruct",
]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200


POLICIES = ("regular", "singular-first-cell", "product")


@dataclass
class VolterraProblem:
    """Data Y and convolution kernel K sampled on the same grid.

    ``policy`` selects how the kernel enters the quadrature:

    * ``"regular"``: K is finite everywhere and is used through its samples;
    * ``"singular-first-cell"``: K ~ s^(order-1) at the origin; ``K[0]`` is
      ignored and the first cell uses ``first_cell`` (the integral of K
      over [0, dt]) with that power-law shape;
    * ``"product"``: the kernel is described by its running integral
      ``antiderivative`` (P(t_n) = int_0^{t_n} K), optionally with
      ``second_antiderivative`` (int_0^{t_n} P); weights are then exact
      integrals of K against the hat functions of X.
    """

    Y: np.ndarray
    K: np.ndarray | None = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    policy: str = "regular"
    first_cell: float | None = None
    singular_order: float | None = None
    antiderivative: np.ndarray | None = None
    second_antiderivative: np.ndarray | None = None

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise DomainError(f"unknown kernel policy {self.policy!r}")
        if self.policy == "product" and self.antiderivative is None:
            raise DomainError("product policy needs the kernel antiderivative")
        if self.policy != "product" and self.K is None:
            raise DomainError("kernel samples are required")
        if self.policy == "singular-first-cell" and self.first_cell is None:
            raise DomainError("singular-first-cell policy needs the first-cell integral")


@dataclass
class VolterraSolution:
    X: np.ndarray
    iterations: int
    residuals: list[float] = field(default_factory=list)


def _cell_moments(problem: VolterraProblem, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """m0[j] = int K, m1[j] = int (s - t_j) K over cell [t_j, t_{j+1}], j = 0..N-1."""
    dt = grid.dt
    if problem.policy == "product":
        P = np.asarray(problem.antiderivative, dtype=float)
        m0 = np.diff(P)
        if problem.second_antiderivative is not None:
            cell_P = np.diff(np.asarray(problem.second_antiderivative, dtype=float))
        else:
            cell_P = 0.5 * dt * (P[1:] + P[:-1])
        return m0, dt * P[1:] - cell_P
    K = np.asarray(problem.K, dtype=float)
    # linear interpolant of K integrated against 1 and (s - t_j)
    m0 = 0.5 * dt * (K[:-1] + K[1:])
    m1 = dt * dt * (K[:-1] + 2.0 * K[1:]) / 6.0
    if problem.policy == "singular-first-cell":
        order = problem.singular_order if problem.singular_order is not None else 1.0
        m0[0] = float(problem.first_cell)
        m1[0] = m0[0] * dt * order / (order + 1.0)
    return m0, m1


def convolution_operator(problem: VolterraProblem, grid: TimeGrid) -> np.ndarray:
    """Matrix A with (A X)_n ~ int_0^{t_n} X(t_n - s) K(s) ds.

    X is replaced by its piecewise-linear interpolant and integrated against
    the kernel cell by cell.
    """
    N, dt = grid.N, grid.dt
    if np.shape(problem.Y) != (N + 1,):
        raise DomainError("data must be sampled on the grid")
    for name in ("K", "antiderivative", "second_antiderivative"):
        arr = getattr(problem, name)
        if arr is not None and np.shape(arr) != (N + 1,):
            raise DomainError(f"{name} must be sampled on the grid")
    m0, m1 = _cell_moments(problem, grid)
    # cell j = [t_j, t_{j+1}] in the lag variable s touches X at lags j and j+1
    near = m0 - m1 / dt
    far = m1 / dt
    lag_w = np.zeros(N + 1)
    lag_w[:N] += near
    lag_w[1:] += far
    A = np.zeros((N + 1, N + 1))
    n_idx, j_idx = np.tril_indices(N + 1)
    A[n_idx, j_idx] = lag_w[n_idx - j_idx]
    # at lag n only the far end of the last cell contributes
    rows = np.arange(1, N + 1)
    A[rows, 0] = far[rows - 1]
    A[0, 0] = 0.0
    return A


def solve_volterra2(problem: VolterraProblem, grid: TimeGrid, operator: np.ndarray | None = None) -> VolterraSolution:
    """Picard iteration X_{k+1} = Y - K*X_k from X_0 = Y.

    Stops when the relative L2 change drops to ``tol``; raises
    ConvergenceError with the change history after ``max_iter`` sweeps.
    """
    A = convolution_operator(problem, grid) if operator is None else operator
    Y = np.asarray(problem.Y, dtype=float)
    X = Y.copy()
    history = []
    for it in range(1, problem.max_iter + 1):
        X_new = Y - A @ X
        change = np.linalg.norm(X_new - X)
        scale = np.linalg.norm(X_new)
        rel = change / scale if scale > 0 else change
        history.append(float(rel))
        X = X_new
        if rel <= problem.tol:
            return VolterraSolution(X, it, history)
        if not np.isfinite(rel):
            break
    raise ConvergenceError(
        f"Picard iteration did not reach tol={problem.tol:g} in {problem.max_iter} iterations "
        f"(last relative change {history[-1]:.3e})",
        stage="volterra",
        history=history,
    )


def _as_series(data, attr: str) -> np.ndarray:
    # accepts a plain array or a moments record carrying the series as ``attr``
    if not isinstance(data, np.ndarray) and hasattr(data, attr):
        data = getattr(data, attr)
    return np.asarray(data, dtype=float)


def reconstruct_G1(mean, kernels: KernelTables, f_x0: float | None = None, *, tol=DEFAULT_TOL,
                   max_iter=DEFAULT_MAX_ITER) -> VolterraSolution:
    """Recover G1 = int g1 from the mean of I^{1-alpha} h.

    Y = E / f(x0) and K = v_t(x0, .) / f(x0), whose running integral is
    (v - v(0)) / f(x0).
    """
    f0 = kernels.f_x0 if f_x0 is None else f_x0
    Y = _as_series(mean, "mean") / f0
    t = kernels.grid.nodes
    P = (kernels.v - kernels.v[0]) / f0
    PP = (kernels.v_int - kernels.v[0] * t) / f0
    problem = VolterraProblem(Y, kernels.vt / f0, tol, max_iter, policy="product",
                              antiderivative=P, second_antiderivative=PP)
    return solve_volterra2(problem, kernels.grid)


def reconstruct_G2(variance, kernels: KernelTables, f_x0: float | None = None, *, tol=DEFAULT_TOL,
                   max_iter=DEFAULT_MAX_ITER) -> VolterraSolution:
    """Recover G2 = int g2^2 from the variance of I^{1-alpha} h.

    Y = V / f(x0)^2 and K = 2 v v_t / f(x0)^2 = (v^2)_t / f(x0)^2.
    """
    f0 = kernels.f_x0 if f_x0 is None else f_x0
    Y = _as_series(variance, "variance") / f0**2
    P = (kernels.v**2 - kernels.v[0] ** 2) / f0**2
    problem = VolterraProblem(Y, 2.0 * kernels.v * kernels.vt / f0**2, tol, max_iter, policy="product",
                              antiderivative=P)
    return solve_volterra2(problem, kernels.grid)


def differentiate_antiderivative(G, grid: TimeGrid) -> np.ndarray:
    """Centred differences inside, second-order one-sided at both ends."""
    G = np.asarray(G, dtype=float)
    if G.shape != (grid.N + 1,):
        raise DomainError(f"path has shape {G.shape}, grid needs {(grid.N + 1,)}")
    return np.gradient(G, grid.dt, edge_order=2)


def abs_from_squared_rate(rate) -> tuple[np.ndarray, int]:
    """|g2| from an estimate of g2^2; negative values are clamped to zero.

    Returns the magnitude and the number of clamped samples.
    """
    rate = np.asarray(rate, dtype=float)
    neg = rate < 0
    return np.sqrt(np.where(neg, 0.0, rate)), int(np.count_nonzero(neg))


def error_metrics(truth, estimate, grid: TimeGrid) -> float:
    """Trapezoid-weighted discrete L2 norm of truth - estimate on [0, T]."""
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape or truth.shape != (grid.N + 1,):
        raise DomainError("truth and estimate must both be sampled on the grid")
    p = np.full(grid.N + 1, 2.0)
    p[0] = p[-1] = 1.0
    return float(np.sqrt(0.5 * grid.dt * np.sum(p * (truth - estimate) ** 2)))


@dataclass
class ReconstructionResult:
    grid: TimeGrid
    G1_hat: np.ndarray
    G2_hat: np.ndarray
    g1_hat: np.ndarray
    g2abs_hat: np.ndarray
    iterations_G1: int
    iterations_G2: int
    clamp_count: int
    g1_true: np.ndarray | None = None
    g2abs_true: np.ndarray | None = None
    er_g1: float | None = None
    er_g2abs: float | None = None


def reconstruct(mean, variance, kernels: KernelTables, g1_true=None, g2_true=None, *, tol=DEFAULT_TOL,
                max_iter=DEFAULT_MAX_ITER) -> ReconstructionResult:
    """Both inversions, differentiation and (when the truth is known) the L2 errors."""
    grid = kernels.grid
    s1 = reconstruct_G1(mean, kernels, tol=tol, max_iter=max_iter)
    s2 = reconstruct_G2(variance, kernels, tol=tol, max_iter=max_iter)
    g1_hat = differentiate_antiderivative(s1.X, grid)
    g2abs_hat, clamped = abs_from_squared_rate(differentiate_antiderivative(s2.X, grid))
    if clamped:
        log.info("clamped %d negative samples of the g2^2 estimate", clamped)
    result = ReconstructionResult(grid, s1.X, s2.X, g1_hat, g2abs_hat, s1.iterations, s2.iterations, clamped)
    if g1_true is not None:
        result.g1_true = np.asarray(g1_true, dtype=float)
        result.er_g1 = error_metrics(result.g1_true, g1_hat, grid)
    if g2_true is not None:
        result.g2abs_true = np.abs(np.asarray(g2_true, dtype=float))
        result.er_g2abs = error_metrics(result.g2abs_true, g2abs_hat, grid)
    return result
