"""Wiener increments, seeded ensembles, observation noise and moment estimation."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericalFailure
from .forward import SourceSpec, SpatialMesh1D, convolution_matrix, convolve_sources, impulse_response
from .fracops import TimeGrid, frac_integral_matrix

__all__ = [
    "EnsembleObservations",
    "MomentSeries",
    "MomentAccumulator",
    "ItoReport",
    "path_generator",
    "wiener_increments",
    "run_ensemble",
    "add_observation_noise",
    "estimate_moments",
    "simulate_moments",
    "ito_isometry_check",
]

# Stream identifiers in the seed derivation; paths never share a stream.
STREAM_WIENER = 0
STREAM_NOISE = 1
STREAM_ITO = 2

# Paths per block. Block boundaries are fixed so that every reduction is
# carried out in the same order whatever the number of workers.
CHUNK = 500


def path_generator(master_seed: int, stream: int, index: int) -> np.random.Generator:
    """Independent generator for path ``index`` of ``stream``, keyed on the master seed."""
    if master_seed < 0:
        raise DomainError("master_seed must be nonnegative")
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(stream, index)))


def wiener_increments(grid: TimeGrid, rng: np.random.Generator) -> np.ndarray:
    """N independent N(0, dt) increments."""
    return rng.normal(0.0, math.sqrt(grid.dt), grid.N)


@dataclass
class EnsembleObservations:
    """R observation paths h(t_n, omega_r), one row per path."""

    grid: TimeGrid
    paths: np.ndarray
    master_seed: int
    sigma: float = 0.0
    noise_seed: int | None = None

    @property
    def R(self) -> int:
        return self.paths.shape[0]

    def seed_of(self, r: int, stream: int = STREAM_WIENER) -> tuple[int, tuple[int, int]]:
        """(entropy, spawn_key) that reproduces the generator of path r."""
        base = self.master_seed if stream == STREAM_WIENER else self.noise_seed
        return base, (stream, r)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            fh.write(f"# master_seed={self.master_seed} R={self.R} sigma={self.sigma!r} "
                     f"noise_seed={self.noise_seed} T={self.grid.T!r} N={self.grid.N}\n")
            w = csv.writer(fh)
            w.writerow(["path"] + [repr(float(t)) for t in self.grid.nodes])
            for r, row in enumerate(self.paths):
                w.writerow([r] + [repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path) -> "EnsembleObservations":
        meta, header, rows = _read_csv(path)
        nodes = np.array([float(x) for x in header[1:]])
        grid = TimeGrid(float(meta.get("T", nodes[-1])), int(meta.get("N", nodes.size - 1)))
        paths = np.array([[float(x) for x in row[1:]] for row in rows])
        noise_seed = meta.get("noise_seed")
        return cls(grid, paths, int(meta.get("master_seed", 0)), float(meta.get("sigma", 0.0)),
                   None if noise_seed in (None, "None") else int(noise_seed))


@dataclass
class MomentSeries:
    """Per-node sample mean and unbiased sample variance of I^{1-alpha} h."""

    grid: TimeGrid
    mean: np.ndarray
    variance: np.ndarray
    R: int
    master_seed: int | None = None
    sigma: float = 0.0

    def __post_init__(self):
        # rounding in the merge can leave -1e-20 where the spread is zero
        self.variance = np.maximum(self.variance, 0.0)

    @property
    def stderr_mean(self) -> np.ndarray:
        return np.sqrt(self.variance / self.R)

    def to_csv(self, path, extra: dict[str, np.ndarray] | None = None) -> None:
        cols = {"t": self.grid.nodes, "mean": self.mean, "variance": self.variance}
        cols.update(extra or {})
        meta = {"master_seed": self.master_seed, "R": self.R, "sigma": self.sigma,
                "T": self.grid.T, "N": self.grid.N, "variance_divisor": "R-1"}
        write_columns(path, cols, meta)

    @classmethod
    def from_csv(cls, path) -> "MomentSeries":
        meta, header, rows = _read_csv(path)
        data = np.array([[float(x) for x in row] for row in rows])
        col = {name: data[:, i] for i, name in enumerate(header)}
        grid = TimeGrid(float(meta.get("T", col["t"][-1])), int(meta.get("N", data.shape[0] - 1)))
        seed = meta.get("master_seed")
        return cls(grid, col["mean"], col["variance"], int(meta.get("R", 0)),
                   None if seed in (None, "None") else int(seed), float(meta.get("sigma", 0.0)))


def write_columns(path, columns: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """CSV with an optional ``# key=value`` metadata line and a header row."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
    with Path(path).open("w", newline="") as fh:
        if meta:
            fh.write("# " + " ".join(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}"
                                     for k, v in meta.items()) + "\n")
        w = csv.writer(fh)
        w.writerow(names)
        for row in data:
            w.writerow([repr(float(x)) for x in row])


def _read_csv(path):
    meta: dict[str, str] = {}
    rows = []
    header = None
    with Path(path).open(newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                for item in line[1:].split():
                    if "=" in item:
                        k, v = item.split("=", 1)
                        meta[k] = v
                continue
            rows.append(line)
    reader = list(csv.reader(rows))
    header, body = reader[0], [r for r in reader[1:] if r]
    return meta, header, body


class MomentAccumulator:
    """Block-wise merge of means and centred second moments.

    Blocks are merged with the pairwise update of Chan, Golub and LeVeque,
    which stays accurate when the mean is large compared with the spread.
    """

    def __init__(self, width: int):
        self.n = 0
        self.mean = np.zeros(width)
        self.m2 = np.zeros(width)

    def update(self, block: np.ndarray) -> None:
        block = np.atleast_2d(block)
        nb = block.shape[0]
        if nb == 0:
            return
        mb = block.mean(axis=0)
        m2b = ((block - mb) ** 2).sum(axis=0)
        n = self.n + nb
        delta = mb - self.mean
        self.mean = self.mean + delta * (nb / n)
        self.m2 = self.m2 + m2b + delta**2 * (self.n * nb / n)
        self.n = n

    def variance(self) -> np.ndarray:
        if self.n < 2:
            raise DomainError("variance needs at least two paths")
        return self.m2 / (self.n - 1)


def _blocks(R: int, chunk: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, R)) for lo in range(0, R, chunk)]


def _map_blocks(fn: Callable[[int, int], np.ndarray], R: int, chunk: int, workers: int) -> Iterator[np.ndarray]:
    """Evaluate fn on every block, yielding results in block order."""
    blocks = _blocks(R, chunk)
    if workers <= 1:
        for lo, hi in blocks:
            yield fn(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # at most 2 * workers blocks in flight keeps memory bounded
        pending = []
        it = iter(blocks)
        for lo, hi in it:
            pending.append(pool.submit(fn, lo, hi))
            if len(pending) >= 2 * workers:
                break
        for lo, hi in it:
            yield pending.pop(0).result()
            pending.append(pool.submit(fn, lo, hi))
        for fut in pending:
            yield fut.result()


class _PathFactory:
    """Builds blocks of observation paths from per-path seeds."""

    def __init__(self, spec: SourceSpec, mesh: SpatialMesh1D, grid: TimeGrid, master_seed: int,
                 response: np.ndarray | None = None):
        self.grid = grid
        self.master_seed = int(master_seed)
        w = impulse_response(spec, mesh, grid) if response is None else response
        self.W = convolution_matrix(w)
        self.w = w
        self.g1 = spec.g1_on(grid)[1:]
        self.g2 = spec.g2_on(grid)[1:]

    def increments(self, lo: int, hi: int) -> np.ndarray:
        return np.stack([wiener_increments(self.grid, path_generator(self.master_seed, STREAM_WIENER, r))
                         for r in range(lo, hi)])

    def __call__(self, lo: int, hi: int) -> np.ndarray:
        dW = self.increments(lo, hi)
        sources = self.g1 + self.g2 * (dW / self.grid.dt)
        return convolve_sources(self.w, sources, self.W)


def _noise_block(shape: tuple[int, int], lo: int, sigma: float, seed: int) -> np.ndarray:
    return np.stack([path_generator(seed, STREAM_NOISE, lo + i).normal(0.0, sigma, shape[1])
                     for i in range(shape[0])])


def run_ensemble(spec: SourceSpec, mesh: SpatialMesh1D, grid: TimeGrid, R: int, master_seed: int, *,
                 workers: int = 1, chunk: int = CHUNK, response: np.ndarray | None = None) -> EnsembleObservations:
    """R paths of h(t_n) = u(x0, t_n), path r driven by its own derived generator.

    Paths come from the discrete impulse response of the FEM/L1 scheme at
    x0, which reproduces step-by-step marching exactly because the scheme is
    linear and time-invariant.
    """
    if int(R) != R or R < 1:
        raise DomainError(f"R must be a positive integer, got {R}")
    factory = _PathFactory(spec, mesh, grid, master_seed, response)
    paths = np.empty((R, grid.N + 1))
    try:
        for (lo, hi), block in zip(_blocks(R, chunk), _map_blocks(factory, R, chunk, workers)):
            paths[lo:hi] = block
    except MemoryError as exc:
        raise NumericalFailure("ensemble generation ran out of memory", stage="ensemble") from exc
    return EnsembleObservations(grid, paths, int(master_seed))


def add_observation_noise(obs: EnsembleObservations, sigma: float, seed: int, *,
                          chunk: int = CHUNK) -> EnsembleObservations:
    """h^sigma = h + xi with xi ~ N(0, sigma^2) independently at every node of every path."""
    if not sigma >= 0:
        raise DomainError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0:
        return EnsembleObservations(obs.grid, obs.paths.copy(), obs.master_seed, 0.0, None)
    noisy = np.empty_like(obs.paths)
    for lo, hi in _blocks(obs.R, chunk):
        noisy[lo:hi] = obs.paths[lo:hi] + _noise_block((hi - lo, obs.grid.N + 1), lo, sigma, seed)
    return EnsembleObservations(obs.grid, noisy, obs.master_seed, float(sigma), int(seed))


def estimate_moments(obs: EnsembleObservations, alpha: float, *, chunk: int = CHUNK) -> MomentSeries:
    """Mean and unbiased variance of I^{1-alpha} h over the ensemble."""
    if obs.R < 2:
        raise DomainError("variance estimation needs R >= 2")
    Q = frac_integral_matrix(1.0 - alpha, obs.grid)
    acc = MomentAccumulator(obs.grid.N + 1)
    for lo, hi in _blocks(obs.R, chunk):
        acc.update(obs.paths[lo:hi] @ Q.T)
    return MomentSeries(obs.grid, acc.mean, acc.variance(), obs.R, obs.master_seed, obs.sigma)


def simulate_moments(spec: SourceSpec, mesh: SpatialMesh1D, grid: TimeGrid, R: int, master_seed: int, *,
                     sigma: float = 0.0, noise_seed: int | None = None, workers: int = 1, chunk: int = CHUNK,
                     response: np.ndarray | None = None) -> MomentSeries:
    """Moments without storing the ensemble.

    Bitwise equal to ``estimate_moments(add_observation_noise(run_ensemble(...)))``
    for the same seeds and block size, with memory O(chunk * N).
    """
    if int(R) != R or R < 2:
        raise DomainError(f"moment estimation needs an integer R >= 2, got {R}")
    if not sigma >= 0:
        raise DomainError(f"sigma must be nonnegative, got {sigma}")
    factory = _PathFactory(spec, mesh, grid, master_seed, response)
    nseed = int(master_seed if noise_seed is None else noise_seed)
    Q = frac_integral_matrix(1.0 - spec.alpha, grid)

    def block(lo: int, hi: int) -> np.ndarray:
        h = factory(lo, hi)
        if sigma > 0:
            h = h + _noise_block(h.shape, lo, sigma, nseed)
        return h @ Q.T

    acc = MomentAccumulator(grid.N + 1)
    try:
        for F in _map_blocks(block, R, chunk, workers):
            acc.update(F)
    except MemoryError as exc:
        raise NumericalFailure("moment simulation ran out of memory", stage="ensemble") from exc
    return MomentSeries(grid, acc.mean, acc.variance(), R, int(master_seed), float(sigma))


@dataclass(frozen=True)
class ItoReport:
    R: int
    mc_second_moment: float
    stderr: float
    reference: float
    z: float

    def passed(self, bound: float = 4.0) -> bool:
        return abs(self.z) <= bound


def ito_isometry_check(psi, grid: TimeGrid, R: int, seed: int, *, chunk: int = 2000) -> ItoReport:
    """Compare a Monte Carlo estimate of E[(int psi dW)^2] with int psi^2.

    The stochastic integral is the left-point (Ito) sum over the grid; the
    reference is adaptive quadrature when ``psi`` is callable, trapezoid on
    the samples otherwise. Integrable endpoint singularities of ``psi`` are
    fine: the left-point sum never evaluates psi at T.
    """
    if R < 2:
        raise DomainError("R must be at least 2")
    t = grid.nodes
    if callable(psi):
        with np.errstate(divide="ignore"):
            left = np.asarray(psi(t[:-1]), dtype=float) * np.ones(grid.N)
        reference, _ = integrate.quad(lambda s: float(psi(np.array(s))) ** 2, 0.0, grid.T, limit=500)
    else:
        samples = np.asarray(psi, dtype=float)
        if samples.shape != (grid.N + 1,):
            raise DomainError("psi samples must match the grid")
        left = samples[:-1]
        reference = float(integrate.trapezoid(samples**2, t))
    if not np.all(np.isfinite(left)):
        raise DomainError("psi must be finite on [0, T)")
    sq = np.empty(R)
    for lo, hi in _blocks(R, chunk):
        dW = np.stack([wiener_increments(grid, path_generator(seed, STREAM_ITO, r)) for r in range(lo, hi)])
        sq[lo:hi] = (dW @ left) ** 2
    est = float(sq.mean())
    se = float(sq.std(ddof=1) / math.sqrt(R))
    return ItoReport(R, est, se, float(reference), (est - reference) / se if se > 0 else 0.0)
