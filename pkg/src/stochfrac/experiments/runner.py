"""Experiment pipeline: ensemble, noise, moments, mollification, inversion, report."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import mpmath
import numpy as np
import scipy

from .. import __version__
from ..errors import ConfigError, NumericalFailure
from ..forward import KernelTables, SourceSpec, SpatialMesh1D, impulse_response, spectral_kernels
from ..fracops import TimeGrid
from ..mollify import MollifierParams, mollify_series
from ..stochastic import MomentSeries, simulate_moments, write_columns
from ..volterra import ReconstructionResult, reconstruct
from .config import ExperimentConfig
from .presets import get_preset

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentOutcome",
    "SweepTable",
    "SWEEP_AXES",
    "build_spec",
    "cached_kernels",
    "cached_response",
    "run_experiment",
    "sweep",
    "write_summary",
    "read_summary",
    "write_dat",
]

SWEEP_AXES = ("samples", "epsilon", "sigma")

# Fixed method choices, echoed into every summary.
METHOD_NOTES = {
    "variance_estimator": "unbiased (divisor R-1)",
    "rng": "numpy PCG64, SeedSequence(master_seed, spawn_key=(stream, path))",
    "frac_integral": "product integration on the piecewise-linear interpolant",
    "volterra_quadrature": "product integration of the kernel against linear hats",
    "differentiation": "centred differences, second-order one-sided at the ends",
    "kernels": "spectral sine series with Mittag-Leffler modes",
    "observations": "FEM (P1) in space, L1 scheme in time",
}


def _load_profile(path: str, grid: TimeGrid) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read profile file {path}: {exc}") from None
    if data.shape[1] < 2:
        raise ConfigError(f"profile file {path} needs two columns t,value")
    return np.interp(grid.nodes, data[:, 0], data[:, 1])


def build_spec(config: ExperimentConfig, grid: TimeGrid) -> SourceSpec:
    if config.preset == "custom":
        g1 = _load_profile(config.g1_file, grid)
        g2 = _load_profile(config.g2_file, grid)
    else:
        p = get_preset(config.preset)
        g1, g2 = p.g1, p.g2
    return SourceSpec(alpha=config.alpha, g1=g1, g2=g2, x0=config.x0)


def _zero(t):
    return np.zeros_like(np.asarray(t, dtype=float))


@lru_cache(maxsize=16)
def _kernels(alpha: float, x0: float, T: float, N: int, n_modes: int) -> KernelTables:
    spec = SourceSpec(alpha=alpha, g1=_zero, g2=_zero, x0=x0)
    return spectral_kernels(spec, TimeGrid(T, N), n_modes=n_modes)


def cached_kernels(config: ExperimentConfig) -> KernelTables:
    """Spectral kernel tables, memoised on the parameters they depend on."""
    return _kernels(config.alpha, config.x0, config.T, config.N, config.n_modes)


@lru_cache(maxsize=16)
def _response(alpha: float, x0: float, T: float, N: int, m: int) -> np.ndarray:
    spec = SourceSpec(alpha=alpha, g1=_zero, g2=_zero, x0=x0)
    w = impulse_response(spec, SpatialMesh1D(m, x0), TimeGrid(T, N))
    w.setflags(write=False)
    return w


def cached_response(config: ExperimentConfig) -> np.ndarray:
    """Impulse response of the FEM/L1 scheme at x0, memoised."""
    return _response(config.alpha, config.x0, config.T, config.N, config.m)


@dataclass
class ExperimentOutcome:
    config: ExperimentConfig
    moments: MomentSeries
    mean_used: np.ndarray
    variance_used: np.ndarray
    result: ReconstructionResult
    summary: dict[str, object]
    files: list[Path] = field(default_factory=list)


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except NumericalFailure as exc:
        if exc.stage is None:
            exc.stage = name
        raise
    except MemoryError as exc:
        raise NumericalFailure(f"{name}: out of memory", stage=name) from exc


def _moments(config: ExperimentConfig, spec: SourceSpec, grid: TimeGrid) -> MomentSeries:
    return simulate_moments(spec, SpatialMesh1D(config.m, config.x0), grid, config.R, config.master_seed,
                            sigma=config.sigma, workers=config.workers, chunk=config.chunk,
                            response=cached_response(config))


def _invert(config, moments, kernels, spec, grid):
    if config.epsilon > 0:
        params = MollifierParams(config.epsilon)
        mean = _stage("mollify", mollify_series, moments.mean, params, grid)
        var = _stage("mollify", mollify_series, moments.variance, params, grid)
    else:
        mean, var = moments.mean, moments.variance
    result = _stage("volterra", reconstruct, mean, var, kernels, spec.g1_on(grid), spec.g2_on(grid),
                    tol=config.tol, max_iter=config.max_iter)
    return mean, var, result


def run_experiment(config: ExperimentConfig, *, write: bool = True, moments: MomentSeries | None = None
                   ) -> ExperimentOutcome:
    """Run the whole pipeline for one configuration.

    With ``write`` the CSV series, figure data, gnuplot script and summary
    are written to ``config.output_dir``. Passing ``moments`` skips the
    ensemble stage.
    """
    grid = TimeGrid(config.T, config.N)
    spec = _stage("setup", build_spec, config, grid)
    kernels = _stage("kernels", cached_kernels, config)
    if moments is None:
        moments = _stage("ensemble", _moments, config, spec, grid)
    mean, var, result = _invert(config, moments, kernels, spec, grid)
    summary = make_summary(config, result, moments)
    outcome = ExperimentOutcome(config, moments, mean, var, result, summary)
    if write:
        outcome.files = emit_experiment(outcome, kernels)
    return outcome


def make_summary(config: ExperimentConfig, result: ReconstructionResult, moments: MomentSeries) -> dict[str, object]:
    s: dict[str, object] = {}
    for key, value in config.items():
        if key in ("output_dir", "workers", "figures"):
            # presentation only; results do not depend on them
            continue
        s[f"config.{key}"] = value
    s["moments.R"] = moments.R
    s["moments.master_seed"] = moments.master_seed
    s["er_g1"] = result.er_g1
    s["er_g2abs"] = result.er_g2abs
    s["iterations_G1"] = result.iterations_G1
    s["iterations_G2"] = result.iterations_G2
    s["clamp_count"] = result.clamp_count
    for key, value in METHOD_NOTES.items():
        s[f"method.{key}"] = value
    s["version.stochfrac"] = __version__
    s["version.numpy"] = np.__version__
    s["version.scipy"] = scipy.__version__
    s["version.mpmath"] = mpmath.__version__
    return s


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_summary(path, summary: dict[str, object]) -> None:
    """One ``key=value`` per line, in insertion order."""
    Path(path).write_text("".join(f"{k}={_fmt(v)}\n" for k, v in summary.items()))


def read_summary(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line and not line.startswith("#"):
            k, v = line.split("=", 1)
            out[k] = v
    return out


def write_dat(path, columns: dict[str, np.ndarray]) -> None:
    """Whitespace-separated columns with a ``#`` header, readable by gnuplot."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
    with Path(path).open("w") as fh:
        fh.write("# " + " ".join(names) + "\n")
        for row in data:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


GNUPLOT_EXPERIMENT = """\
set terminal pngcairo size 900,600
set xlabel 't'
set output 'fig_mean.png'
plot 'fig_mean.dat' using 1:2 with lines title 'E hat'{mean_moll}
set output 'fig_variance.png'
plot 'fig_variance.dat' using 1:2 with lines title 'V hat'{var_moll}
set output 'fig_g1.png'
plot 'fig_g1.dat' using 1:2 with lines title 'g1', '' using 1:3 with lines title 'g1 hat'
set output 'fig_g2abs.png'
plot 'fig_g2abs.dat' using 1:2 with lines title '|g2|', '' using 1:3 with lines title '|g2| hat'
"""


def emit_experiment(outcome: ExperimentOutcome, kernels: KernelTables) -> list[Path]:
    cfg, res, mom = outcome.config, outcome.result, outcome.moments
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t = res.grid.nodes
    files = []

    def target(name):
        p = out / name
        files.append(p)
        return p

    meta = {"preset": cfg.preset, "master_seed": cfg.master_seed, "R": cfg.R, "epsilon": cfg.epsilon,
            "sigma": cfg.sigma}
    write_columns(target("reconstruction.csv"),
                  {"t": t, "g1_true": res.g1_true, "g1_hat": res.g1_hat,
                   "g2abs_true": res.g2abs_true, "g2abs_hat": res.g2abs_hat}, meta)
    extra = {}
    if cfg.epsilon > 0:
        extra = {"mean_mollified": outcome.mean_used, "variance_mollified": outcome.variance_used}
    mom.to_csv(target("moments.csv"), extra)
    write_columns(target("kernels.csv"), {"t": t, "v": kernels.v, "vt": kernels.vt}, {"alpha": cfg.alpha})

    moll = cfg.epsilon > 0
    write_dat(target("fig_mean.dat"), {"t": t, "E_hat": mom.mean, **({"E_mollified": outcome.mean_used} if moll else {})})
    write_dat(target("fig_variance.dat"),
              {"t": t, "V_hat": mom.variance, **({"V_mollified": outcome.variance_used} if moll else {})})
    write_dat(target("fig_g1.dat"), {"t": t, "g1": res.g1_true, "g1_hat": res.g1_hat})
    write_dat(target("fig_g2abs.dat"), {"t": t, "g2abs": res.g2abs_true, "g2abs_hat": res.g2abs_hat})
    script = GNUPLOT_EXPERIMENT.format(
        mean_moll=", '' using 1:3 with lines title 'mollified'" if moll else "",
        var_moll=", '' using 1:3 with lines title 'mollified'" if moll else "",
    )
    target("plot.gp").write_text(script)
    write_summary(target("summary.txt"), outcome.summary)
    if cfg.figures:
        from .figures import render_experiment

        files.extend(render_experiment(out, outcome))
    return files


@dataclass
class SweepTable:
    axis: str
    values: list[float]
    er_g1: list[float]
    er_g2abs: list[float]
    iterations: list[tuple[int, int]]
    outcomes: list[ExperimentOutcome] = field(default_factory=list, repr=False)
    files: list[Path] = field(default_factory=list)

    def rows(self):
        return list(zip(self.values, self.er_g1, self.er_g2abs))


def _axis_change(axis: str, value: float) -> dict:
    if axis == "samples":
        if value != int(value):
            raise ConfigError(f"sample counts must be integers, got {value}")
        return {"R": int(value)}
    if axis == "epsilon":
        return {"epsilon": float(value)}
    return {"sigma": float(value)}


def sweep(config: ExperimentConfig, axis: str, values, *, write: bool = True) -> SweepTable:
    """One pipeline run per value of ``axis``; the remaining settings are held fixed.

    Every cell draws its Wiener paths and observation noise from the same
    master seed (common random numbers), so differences along the curve
    come from the swept parameter rather than from a fresh draw. Cells that
    only differ in epsilon share one ensemble.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {', '.join(SWEEP_AXES)}, got {axis!r}")
    values = [float(v) for v in values]
    if not values:
        raise ConfigError("sweep needs at least one value")
    grid = TimeGrid(config.T, config.N)
    spec = build_spec(config, grid)
    cache: dict[tuple[int, float], MomentSeries] = {}
    table = SweepTable(axis, values, [], [], [])
    for value in values:
        cell = config.replace(**_axis_change(axis, value))
        key = (cell.R, cell.sigma)
        if key not in cache:
            cache[key] = _stage("ensemble", _moments, cell, spec, grid)
        outcome = run_experiment(cell, write=False, moments=cache[key])
        table.outcomes.append(outcome)
        table.er_g1.append(outcome.result.er_g1)
        table.er_g2abs.append(outcome.result.er_g2abs)
        table.iterations.append((outcome.result.iterations_G1, outcome.result.iterations_G2))
    if write:
        table.files = emit_sweep(config, table)
    return table


def emit_sweep(config: ExperimentConfig, table: SweepTable) -> list[Path]:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = {table.axis: table.values, "er_g1": table.er_g1, "er_g2abs": table.er_g2abs,
            "iterations_G1": [i for i, _ in table.iterations], "iterations_G2": [j for _, j in table.iterations]}
    csv_path = out / f"sweep_{table.axis}.csv"
    write_columns(csv_path, cols, {"preset": config.preset, "master_seed": config.master_seed})
    dat_path = out / f"sweep_{table.axis}.dat"
    write_dat(dat_path, {table.axis: table.values, "er_g1": table.er_g1, "er_g2abs": table.er_g2abs})
    summary = make_summary(config, table.outcomes[0].result, table.outcomes[0].moments)
    for k in ("er_g1", "er_g2abs", "iterations_G1", "iterations_G2", "clamp_count", "moments.R"):
        summary.pop(k, None)
    summary["sweep.axis"] = table.axis
    summary["sweep.values"] = ",".join(repr(v) for v in table.values)
    summary["sweep.seeding"] = "common master seed in every cell"
    for i, (v, e1, e2) in enumerate(table.rows()):
        summary[f"sweep.cell{i}"] = f"{v!r},{e1!r},{e2!r}"
        summary[f"sweep.cell{i}.clamp_count"] = table.outcomes[i].result.clamp_count
    sum_path = out / f"sweep_{table.axis}_summary.txt"
    write_summary(sum_path, summary)
    files = [csv_path, dat_path, sum_path]
    if config.figures:
        from .figures import render_sweep

        files.extend(render_sweep(out, table))
    return files

