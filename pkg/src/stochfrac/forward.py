"""Forward solvers on D = (0, 1) with homogeneous Dirichlet data.

Two independent routes are provided:

* ``spectral_kernels`` evaluates the eigenfunction expansion of the
  source-free problem with initial value f, giving v(x0, t) and v_t(x0, t);
* ``solve_deterministic_l1`` / ``solve_sde_realization`` march a P1 finite
  element discretisation in time with the L1 scheme.

On a uniform grid the L1 march is a discrete convolution in time, so the
response at x0 to an arbitrary source sequence equals the source convolved
with the scheme's impulse response (``impulse_response``). Ensembles use that
form; a single realisation can always be recomputed by direct marching.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import fft as sfft
from scipy.linalg import toeplitz

from .errors import ConfigError, DomainError, KernelTailError, NumericalFailure
from .fracops import L1Weights, TimeGrid, l1_weights
from .mlfunc import MLParams, ml_eval, ml_time_derivative


__all__ = [
    "SpatialMesh1D",
    "SourceSpec",
    "TridiagonalOperator",
    "TridiagonalLU",
    "KernelTables",
    "assemble_fem",
    "spectral_kernels",
    "solve_deterministic_l1",
    "solve_sde_realization",
    "impulse_response",
    "source_sequence",
    "convolution_matrix",
    "convolve_sources",
]

Profile = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SpatialMesh1D:
    """m interior nodes x_j = j h, h = 1/(m+1); x0 must be one of them."""

    m: int
    x0: float = 0.5

    def __post_init__(self):
        if self.m < 3:
            raise DomainError(f"need at least 3 interior nodes, got m={self.m}")
        j = self.x0 * (self.m + 1)
        if abs(j - round(j)) > 1e-9 or not 1 <= round(j) <= self.m:
            raise DomainError(f"x0={self.x0} is not an interior node of the mesh with m={self.m}")

    @property
    def h(self) -> float:
        return 1.0 / (self.m + 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(1, self.m + 1) / (self.m + 1)

    @property
    def obs_index(self) -> int:
        """0-based position of x0 in ``nodes``."""
        return int(round(self.x0 * (self.m + 1))) - 1

    def refined(self) -> "SpatialMesh1D":
        """Halve h; x0 stays a node."""
        return SpatialMesh1D(2 * (self.m + 1) - 1, self.x0)


@dataclass(frozen=True)
class SourceSpec:
    """Problem instance: order, spatial profile, time profiles and observation point.

    ``f`` is ``"sin_pi"``, a vectorised callable on [0, 1], or samples on the
    interior nodes of a mesh (linearly interpolated, zero at the boundary).
    ``g1``/``g2`` are vectorised callables of t or samples on a time grid.
    """

    alpha: float
    g1: Profile
    g2: Profile
    f: Union[str, Callable[[np.ndarray], np.ndarray], np.ndarray] = "sin_pi"
    x0: float = 0.5

    def __post_init__(self):
        if not 0.5 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (1/2, 1), got {self.alpha}")
        if abs(self.f_at(self.x0)) < 1e-14:
            raise DomainError("f(x0) must be nonzero")

    def f_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        f = self.f
        if isinstance(f, str):
            if f != "sin_pi":
                raise ConfigError(f"unknown spatial profile {f!r}")
            return np.sin(np.pi * x)
        if callable(f):
            return np.asarray(f(x), dtype=float)
        samples = np.asarray(f, dtype=float)
        xs = np.arange(samples.size + 2) / (samples.size + 1)
        return np.interp(x, xs, np.concatenate([[0.0], samples, [0.0]]))

    def _profile(self, g: Profile, grid: TimeGrid) -> np.ndarray:
        if callable(g):
            return np.asarray(g(grid.nodes), dtype=float) * np.ones(grid.N + 1)
        arr = np.asarray(g, dtype=float)
        if arr.shape != (grid.N + 1,):
            raise DomainError(f"time profile has shape {arr.shape}, grid needs {(grid.N + 1,)}")
        return arr

    def g1_on(self, grid: TimeGrid) -> np.ndarray:
        return self._profile(self.g1, grid)

    def g2_on(self, grid: TimeGrid) -> np.ndarray:
        return self._profile(self.g2, grid)

    def with_profiles(self, g1: Profile, g2: Profile) -> "SourceSpec":
        return SourceSpec(alpha=self.alpha, g1=g1, g2=g2, f=self.f, x0=self.x0)


@dataclass(frozen=True)
class TridiagonalOperator:
    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    @property
    def size(self) -> int:
        return self.diag.size

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """A @ x for x of shape (m,) or (m, k)."""
        y = self.diag.reshape((-1,) + (1,) * (x.ndim - 1)) * x
        y[1:] += self.sub.reshape((-1,) + (1,) * (x.ndim - 1)) * x[:-1]
        y[:-1] += self.sup.reshape((-1,) + (1,) * (x.ndim - 1)) * x[1:]
        return y

    def combine(self, a: float, other: "TridiagonalOperator", b: float) -> "TridiagonalOperator":
        """a * self + b * other."""
        return TridiagonalOperator(
            a * self.sub + b * other.sub, a * self.diag + b * other.diag, a * self.sup + b * other.sup
        )

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)


class TridiagonalLU:
    """Thomas algorithm with the forward sweep factored once for repeated solves."""

    def __init__(self, op: TridiagonalOperator):
        m = op.size
        self._sub = op.sub.copy()
        cp = np.empty(max(m - 1, 0))
        denom = np.empty(m)
        denom[0] = op.diag[0]
        for i in range(m - 1):
            if denom[i] == 0.0:
                raise NumericalFailure("zero pivot in tridiagonal factorisation", stage="thomas")
            cp[i] = op.sup[i] / denom[i]
            denom[i + 1] = op.diag[i + 1] - op.sub[i] * cp[i]
        if denom[-1] == 0.0:
            raise NumericalFailure("zero pivot in tridiagonal factorisation", stage="thomas")
        self._cp = cp
        self._denom = denom

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        d = np.array(rhs, dtype=float, copy=True)
        m = d.shape[0]
        d[0] /= self._denom[0]
        for i in range(1, m):
            d[i] = (d[i] - self._sub[i - 1] * d[i - 1]) / self._denom[i]
        for i in range(m - 2, -1, -1):
            d[i] -= self._cp[i] * d[i + 1]
        return d


def assemble_fem(mesh: SpatialMesh1D) -> tuple[TridiagonalOperator, TridiagonalOperator]:
    """P1 mass (h/6)[1,4,1] and stiffness (1/h)[-1,2,-1] matrices, Dirichlet rows removed."""
    m, h = mesh.m, mesh.h
    off = np.full(m - 1, 1.0)
    mass = TridiagonalOperator(off * h / 6.0, np.full(m, 4.0 * h / 6.0), off * h / 6.0)
    stiff = TridiagonalOperator(-off / h, np.full(m, 2.0 / h), -off / h)
    return mass, stiff


@dataclass(frozen=True)
class KernelTables:
    """v(x0, t_n), v_t(x0, t_n) and int_0^{t_n} v(x0, s) ds on a grid.

    ``vt[0]`` is NaN: v_t behaves like t^(alpha-1) at the origin. Quadratures
    that need v_t near 0 integrate it through v, which is bounded
    (``policy = "product"``).
    """

    grid: TimeGrid
    alpha: float
    v: np.ndarray
    vt: np.ndarray
    v_int: np.ndarray
    n_modes: int
    tail_bound: float
    policy: str = "product"

    @property
    def vt_first_cell(self) -> float:
        return float(self.v[1] - self.v[0])

    @property
    def f_x0(self) -> float:
        return float(self.v[0])


def _sine_coefficients(spec: SourceSpec, count: int) -> np.ndarray:
    """f_n = <f, sqrt(2) sin(n pi x)> for n = 1..count."""
    if isinstance(spec.f, str) and spec.f == "sin_pi":
        coef = np.zeros(count)
        coef[0] = np.sqrt(0.5)
        return coef
    M = max(8192, 16 * count)
    x = np.arange(1, M) / M
    # Trapezoid rule on a fine grid is a type-I DST.
    fx = spec.f_at(x)
    dst = sfft.dst(fx, type=1) / (2.0 * M)
    return np.sqrt(2.0) * dst[:count]


def spectral_kernels(spec: SourceSpec, grid: TimeGrid, n_modes: int = 1, tail_tol: float = 1e-8) -> KernelTables:
    """Tabulate v(x0, .) and v_t(x0, .) from the sine expansion of f.

    With lambda_n = (n pi)^2 and phi_n = sqrt(2) sin(n pi x),
    v(x0, t) = sum_n f_n phi_n(x0) E_{a,1}(-lambda_n t^a).
    """
    if n_modes < 1:
        raise DomainError("n_modes must be >= 1")
    check = max(4 * n_modes, 64)
    coef = _sine_coefficients(spec, check)
    n = np.arange(1, check + 1)
    weights = coef * np.sqrt(2.0) * np.sin(n * np.pi * spec.x0)
    if isinstance(spec.f, str):
        # single mode; avoids sqrt(1/2) * sqrt(2) != 1 in floating point
        weights[0] = np.sin(np.pi * spec.x0)
    # |E_{a,1}| <= 1 on the negative axis, so the dropped modes move v by at
    # most sqrt(2) * sum |f_n|.
    tail = float(np.sqrt(2.0) * np.sum(np.abs(coef[n_modes:])))
    if tail > tail_tol:
        raise KernelTailError(
            f"sine coefficients of f decay too slowly: tail bound {tail:.3e} exceeds {tail_tol:.1e} "
            f"with {n_modes} modes",
            stage="spectral_kernels",
        )
    a = spec.alpha
    t = grid.nodes
    v = np.zeros(grid.N + 1)
    v_int = np.zeros(grid.N + 1)
    vt = np.full(grid.N + 1, np.nan)
    vt[1:] = 0.0
    for k in range(n_modes):
        w = weights[k]
        if w == 0.0:
            continue
        lam = ((k + 1) * np.pi) ** 2
        z = -lam * t**a
        v += w * ml_eval(MLParams(a, 1.0), z)
        # int_0^t E_{a,1}(-lam s^a) ds = t E_{a,2}(-lam t^a)
        v_int += w * t * ml_eval(MLParams(a, 2.0), z)
        vt[1:] += w * ml_time_derivative(a, lam, t[1:])
    return KernelTables(grid=grid, alpha=a, v=v, vt=vt, v_int=v_int, n_modes=n_modes, tail_bound=tail)


def _history_coefficients(w: L1Weights) -> np.ndarray:
    """c[j] = b_{n,n-j} - b_{n,n-j-1} for lag j = n - k >= 1 (c[0] unused)."""
    c = np.zeros_like(w.lag)
    c[1:-1] = w.scale * (w.lag[1:-1] - w.lag[2:])
    return c


def _march(mesh, grid, alpha, u0, source):
    """L1/FEM march; ``source[n]`` is the nodal source vector at step n >= 1.

    Returns the full field, shape (N+1, m).
    """
    mass, stiff = assemble_fem(mesh)
    w = l1_weights(alpha, grid)
    lu = TridiagonalLU(mass.combine(w.leading, stiff, 1.0))
    c = _history_coefficients(w)
    N, m = grid.N, mesh.m
    U = np.zeros((N + 1, m))
    U[0] = u0
    for n in range(1, N + 1):
        rhs = w.scale * w.lag[n] * u0
        if n > 1:
            rhs = rhs + c[n - 1 : 0 : -1] @ U[1:n]
        U[n] = lu.solve(mass.matvec(rhs + source[n]))
    return U


def solve_deterministic_l1(spec: SourceSpec, mesh: SpatialMesh1D, grid: TimeGrid, full: bool = False):
    """L1/FEM solution of the source-free problem with initial value f.

    Returns v(x0, t_n), or the whole field when ``full`` is set.
    """
    u0 = spec.f_at(mesh.nodes)
    U = _march(mesh, grid, spec.alpha, u0, np.zeros((grid.N + 1, mesh.m)))
    return U if full else U[:, mesh.obs_index].copy()


def _check_increments(increments, grid: TimeGrid) -> np.ndarray:
    dW = np.asarray(increments, dtype=float)
    if dW.shape[-1] != grid.N:
        raise DomainError(f"need {grid.N} Wiener increments, got {dW.shape[-1]}")
    return dW


def source_sequence(spec: SourceSpec, grid: TimeGrid, increments) -> np.ndarray:
    """s_n = g1(t_n) + g2(t_n) dW_n / dt for n = 1..N (shape (..., N))."""
    dW = _check_increments(increments, grid)
    g1 = spec.g1_on(grid)[1:]
    g2 = spec.g2_on(grid)[1:]
    return g1 + g2 * dW / grid.dt


def solve_sde_realization(spec: SourceSpec, mesh: SpatialMesh1D, grid: TimeGrid, increments) -> np.ndarray:
    """One observation path h(t_n) = u(x0, t_n) by direct L1/FEM marching.

    ``increments`` are the N Wiener increments W(t_n) - W(t_{n-1}).
    """
    s = source_sequence(spec, grid, increments)
    fvec = spec.f_at(mesh.nodes)
    src = np.zeros((grid.N + 1, mesh.m))
    src[1:] = s[:, None] * fvec[None, :]
    U = _march(mesh, grid, spec.alpha, np.zeros(mesh.m), src)
    return U[:, mesh.obs_index].copy()


def impulse_response(spec: SourceSpec, mesh: SpatialMesh1D, grid: TimeGrid) -> np.ndarray:
    """w[j] = u(x0, t_{1+j}) for a unit source at step 1 only, j = 0..N-1.

    Any path then satisfies h_n = sum_{k=1}^{n} w[n-k] s_k.
    """
    fvec = spec.f_at(mesh.nodes)
    src = np.zeros((grid.N + 1, mesh.m))
    src[1] = fvec
    U = _march(mesh, grid, spec.alpha, np.zeros(mesh.m), src)
    return U[1:, mesh.obs_index].copy()


def convolution_matrix(w: np.ndarray) -> np.ndarray:
    """Lower-triangular Toeplitz matrix W with W[n-1, k-1] = w[n-k]."""
    return toeplitz(w, np.zeros_like(w))


def convolve_sources(w: np.ndarray, sources: np.ndarray, matrix: np.ndarray | None = None) -> np.ndarray:
    """Paths h (..., N+1) with h_0 = 0 from source sequences (..., N)."""
    W = convolution_matrix(w) if matrix is None else matrix
    s = np.asarray(sources, dtype=float)
    out = np.zeros(s.shape[:-1] + (s.shape[-1] + 1,))
    out[..., 1:] = s @ W.T
    return out
