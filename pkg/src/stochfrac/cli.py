"""Command line interface.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, NumericalFailure
from .experiments.config import ExperimentConfig, load_config
from .experiments.presets import PRESETS
from .experiments.runner import (
    SWEEP_AXES,
    build_spec,
    cached_kernels,
    cached_response,
    run_experiment,
    sweep,
)
from .forward import SpatialMesh1D, solve_deterministic_l1, solve_sde_realization
from .fracops import TimeGrid
from .mollify import MollifierParams, mollify_series
from .stochastic import (
    STREAM_WIENER,
    EnsembleObservations,
    MomentSeries,
    add_observation_noise,
    estimate_moments,
    path_generator,
    run_ensemble,
    simulate_moments,
    wiener_increments,
    write_columns,
)
from .volterra import reconstruct

log = logging.getLogger("stochfrac")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

# flag name -> config key
_FLAG_KEYS = {
    "preset": "preset", "alpha": "alpha", "x0": "x0", "T": "T", "N": "N", "m": "m", "R": "R",
    "epsilon": "epsilon", "sigma": "sigma", "seed": "master_seed", "out": "output_dir",
    "workers": "workers", "n_modes": "n_modes", "tol": "tol", "max_iter": "max_iter", "chunk": "chunk",
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any configuration key (repeatable)")
    p.add_argument("--preset", choices=sorted(PRESETS) + ["custom"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--x0", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--m", type=int, help="interior FEM nodes")
    p.add_argument("--R", type=lambda s: int(float(s)), help="number of realizations")
    p.add_argument("--epsilon", type=float, help="mollifier half-width; 0 disables")
    p.add_argument("--sigma", type=float, help="observation noise standard deviation")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int)
    p.add_argument("--n-modes", dest="n_modes", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--chunk", type=int)
    p.add_argument("--figures", action="store_true", help="also render PNG files (needs matplotlib)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochfrac", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernels", help="tabulate v(x0, t) and v_t(x0, t)")
    _common(p)

    p = sub.add_parser("forward", help="deterministic L1/FEM solve or one stochastic realization")
    _common(p)
    p.add_argument("--mode", choices=["deterministic", "realization"], default="deterministic")
    p.add_argument("--path-index", type=int, default=0, help="realization index for --mode realization")

    p = sub.add_parser("ensemble", help="simulate R observation paths")
    _common(p)

    p = sub.add_parser("moments", help="mean and variance of I^{1-alpha} h")
    _common(p)
    p.add_argument("--paths", help="ensemble CSV written by 'ensemble'; simulated when omitted")

    p = sub.add_parser("invert", help="reconstruct g1 and |g2| from a moments CSV")
    _common(p)
    p.add_argument("--moments", required=True, help="moments CSV written by 'moments'")

    p = sub.add_parser("experiment", help="full pipeline for a preset")
    _common(p)
    p.add_argument("name", choices=sorted(PRESETS) + ["custom"])

    p = sub.add_parser("sweep", help="error curve over samples, epsilon or sigma")
    _common(p)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True, help="comma-separated values")
    return parser


def config_from_args(args) -> ExperimentConfig:
    overrides: dict[str, object] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    for flag, key in _FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "name", None):
        overrides["preset"] = args.name
    if args.figures:
        overrides["figures"] = True
    return load_config(args.config, overrides)


def _out(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_kernels(cfg: ExperimentConfig, args) -> Path:
    k = cached_kernels(cfg)
    path = _out(cfg) / "kernels.csv"
    write_columns(path, {"t": k.grid.nodes, "v": k.v, "vt": k.vt},
                  {"alpha": cfg.alpha, "x0": cfg.x0, "n_modes": k.n_modes, "tail_bound": k.tail_bound})
    return path


def cmd_forward(cfg: ExperimentConfig, args) -> Path:
    grid = TimeGrid(cfg.T, cfg.N)
    mesh = SpatialMesh1D(cfg.m, cfg.x0)
    spec = build_spec(cfg, grid)
    out = _out(cfg)
    if args.mode == "deterministic":
        u = solve_deterministic_l1(spec, mesh, grid)
        k = cached_kernels(cfg)
        path = out / "forward_deterministic.csv"
        write_columns(path, {"t": grid.nodes, "u_fem": u, "v_spectral": k.v},
                      {"alpha": cfg.alpha, "m": cfg.m, "N": cfg.N, "max_abs_gap": float(np.max(np.abs(u - k.v)))})
    else:
        rng = path_generator(cfg.master_seed, STREAM_WIENER, args.path_index)
        h = solve_sde_realization(spec, mesh, grid, wiener_increments(grid, rng))
        path = out / "forward_realization.csv"
        write_columns(path, {"t": grid.nodes, "h": h},
                      {"preset": cfg.preset, "master_seed": cfg.master_seed, "path_index": args.path_index})
    return path


def cmd_ensemble(cfg: ExperimentConfig, args) -> Path:
    grid = TimeGrid(cfg.T, cfg.N)
    spec = build_spec(cfg, grid)
    obs = run_ensemble(spec, SpatialMesh1D(cfg.m, cfg.x0), grid, cfg.R, cfg.master_seed,
                       workers=cfg.workers, chunk=cfg.chunk, response=cached_response(cfg))
    if cfg.sigma > 0:
        obs = add_observation_noise(obs, cfg.sigma, cfg.master_seed, chunk=cfg.chunk)
    path = _out(cfg) / "ensemble.csv"
    obs.to_csv(path)
    return path


def cmd_moments(cfg: ExperimentConfig, args) -> Path:
    grid = TimeGrid(cfg.T, cfg.N)
    if args.paths:
        obs = EnsembleObservations.from_csv(args.paths)
        if cfg.sigma > 0 and obs.sigma == 0:
            obs = add_observation_noise(obs, cfg.sigma, cfg.master_seed, chunk=cfg.chunk)
        mom = estimate_moments(obs, cfg.alpha, chunk=cfg.chunk)
    else:
        spec = build_spec(cfg, grid)
        mom = simulate_moments(spec, SpatialMesh1D(cfg.m, cfg.x0), grid, cfg.R, cfg.master_seed, sigma=cfg.sigma,
                               workers=cfg.workers, chunk=cfg.chunk, response=cached_response(cfg))
    extra = {}
    if cfg.epsilon > 0:
        params = MollifierParams(cfg.epsilon)
        extra = {"mean_mollified": mollify_series(mom.mean, params, mom.grid),
                 "variance_mollified": mollify_series(mom.variance, params, mom.grid)}
    path = _out(cfg) / "moments.csv"
    mom.to_csv(path, extra)
    return path


def cmd_invert(cfg: ExperimentConfig, args) -> Path:
    mom = MomentSeries.from_csv(args.moments)
    cfg = cfg.replace(T=mom.grid.T, N=mom.grid.N)
    if mom.R >= 2:
        cfg = cfg.replace(R=mom.R)
    run_experiment(cfg, write=True, moments=mom)
    return Path(cfg.output_dir) / "summary.txt"


def cmd_experiment(cfg: ExperimentConfig, args) -> Path:
    outcome = run_experiment(cfg, write=True)
    res = outcome.result
    print(f"{cfg.preset}: er_g1={res.er_g1:.6f} er_g2abs={res.er_g2abs:.6f} "
          f"iterations={res.iterations_G1}/{res.iterations_G2} clamped={res.clamp_count}")
    return Path(cfg.output_dir) / "summary.txt"


def cmd_sweep(cfg: ExperimentConfig, args) -> Path:
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse --values {args.values!r}") from None
    table = sweep(cfg, args.axis, values, write=True)
    print(f"{'value':>12} {'er_g1':>12} {'er_g2abs':>12}")
    for v, e1, e2 in table.rows():
        print(f"{v:12.6g} {e1:12.6f} {e2:12.6f}")
    return Path(cfg.output_dir) / f"sweep_{args.axis}.csv"


COMMANDS = {
    "kernels": cmd_kernels,
    "forward": cmd_forward,
    "ensemble": cmd_ensemble,
    "moments": cmd_moments,
    "invert": cmd_invert,
    "experiment": cmd_experiment,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        path = COMMANDS[args.command](cfg, args)
    except NumericalFailure as exc:
        stage = f" [stage {exc.stage}]" if exc.stage else ""
        print(f"numerical failure{stage}: {exc}", file=sys.stderr)
        if exc.history:
            print(f"last residuals: {exc.history[-5:]}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DomainError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
