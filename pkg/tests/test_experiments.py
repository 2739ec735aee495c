import filecmp

import numpy as np
import pytest

from stochfrac.cli import main
from stochfrac.errors import ConfigError
from stochfrac.experiments import (
    PRESETS,
    ExperimentConfig,
    load_config,
    parse_assignments,
    preset_profiles,
    read_summary,
    run_experiment,
    sweep,
)
from stochfrac.fracops import TimeGrid

G = TimeGrid(1.0, 1000)


def value_at(name, which, t):
    g1, g2 = preset_profiles(name, G)
    return (g1 if which == 1 else g2)[int(round(t * 1000))]


def test_preset_values():
    assert value_at("e1", 1, 0.25) == pytest.approx(0.25 + 1 + np.sqrt(2) / 2, abs=1e-12)
    assert value_at("e4", 2, 0.45) == 2.0
    assert value_at("e3", 1, 0.5) == pytest.approx(0.3, abs=1e-12)
    assert value_at("e1", 2, 0.5) == pytest.approx(0.3, abs=1e-12)
    assert value_at("e1", 2, 0.499) == pytest.approx(np.sin(2 * np.pi * 0.499) - 0.3)
    assert value_at("e5", 2, 0.3) == 2.0 and value_at("e5", 2, 0.6) == 1.0 and value_at("e5", 2, 0.0) == 4.0
    assert value_at("e2", 2, 0.5) == 1.0
    with pytest.raises(ConfigError):
        preset_profiles("e9", G)


def test_config_defaults_and_validation():
    c = ExperimentConfig()
    assert (c.alpha, c.x0, c.T, c.N, c.m) == (0.8, 0.5, 1.0, 1000, 199)
    for bad in ({"R": 0}, {"R": 1}, {"preset": "e7"}, {"alpha": 1.0}, {"epsilon": 1.5}, {"sigma": -1.0},
                {"preset": "custom"}):
        with pytest.raises(ConfigError):
            c.replace(**bad)


def test_config_file_and_overrides(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# comment\npreset = e3\nR = 1e4  # ten thousand\nepsilon=0.05\nfigures = yes\n\n")
    c = load_config(f, {"sigma": "0.01"})
    assert (c.preset, c.R, c.epsilon, c.sigma, c.figures) == ("e3", 10_000, 0.05, 0.01, True)
    with pytest.raises(ConfigError):
        parse_assignments(["no equals sign"])
    with pytest.raises(ConfigError):
        load_config(None, {"bogus": "1"})
    with pytest.raises(ConfigError):
        load_config(None, {"R": "many"})
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


SMALL = dict(R=200, N=200, m=39)


def test_run_experiment_outputs(tmp_path):
    cfg = ExperimentConfig(preset="e2", epsilon=0.05, output_dir=str(tmp_path), **SMALL)
    out = run_experiment(cfg)
    names = {p.name for p in out.files}
    assert {"reconstruction.csv", "moments.csv", "summary.txt", "kernels.csv", "fig_g1.dat",
            "fig_g2abs.dat", "fig_mean.dat", "fig_variance.dat", "plot.gp"} <= names
    summary = read_summary(tmp_path / "summary.txt")
    assert summary["config.master_seed"] == str(cfg.master_seed)
    assert float(summary["er_g1"]) == out.result.er_g1
    for key in ("iterations_G1", "clamp_count", "version.numpy", "method.variance_estimator"):
        assert key in summary
    header = (tmp_path / "reconstruction.csv").read_text().splitlines()[1]
    assert header == "t,g1_true,g1_hat,g2abs_true,g2abs_hat"


def test_custom_profiles(tmp_path):
    t = np.linspace(0, 1, 11)
    (tmp_path / "g1.csv").write_text("t,value\n" + "".join(f"{a},{1 + a}\n" for a in t))
    (tmp_path / "g2.csv").write_text("t,value\n" + "".join(f"{a},0.5\n" for a in t))
    cfg = ExperimentConfig(preset="custom", g1_file=str(tmp_path / "g1.csv"), g2_file=str(tmp_path / "g2.csv"),
                           output_dir=str(tmp_path / "o"), **SMALL)
    res = run_experiment(cfg, write=False).result
    assert res.er_g1 < 1.0


def test_sweep_tables(tmp_path):
    cfg = ExperimentConfig(preset="e1", output_dir=str(tmp_path), **SMALL)
    table = sweep(cfg, "epsilon", [0.0, 0.01, 0.05])
    assert len(table.rows()) == 3
    assert (tmp_path / "sweep_epsilon.csv").exists() and (tmp_path / "sweep_epsilon.dat").exists()
    with pytest.raises(ConfigError):
        sweep(cfg, "alpha", [0.7])
    with pytest.raises(ConfigError):
        sweep(cfg, "samples", [])
    with pytest.raises(ConfigError):
        sweep(cfg, "samples", [10.5])


def test_cli_exit_codes(tmp_path, capsys):
    base = ["--N", "200", "--m", "39", "--R", "100", "--out", str(tmp_path)]
    assert main(["experiment", "e1"] + base) == 0
    assert main(["experiment", "e1", "--R", "0", "--out", str(tmp_path)]) == 2
    assert main(["experiment", "e1", "--max-iter", "2"] + base) == 3
    assert main(["sweep", "--axis", "sigma", "--values", "0,0.01"] + base) == 0
    assert main(["sweep", "--axis", "sigma", "--values", "a,b"] + base) == 2
    assert main(["kernels"] + base) == 0
    assert main(["forward", "--mode", "realization"] + base) == 0
    assert main(["forward"] + base) == 0
    assert main(["ensemble", "--R", "5"] + base[:-4] + ["--out", str(tmp_path)]) == 0
    assert main(["moments", "--paths", str(tmp_path / "ensemble.csv")] + base[:4] + ["--out", str(tmp_path)]) == 0
    assert main(["invert", "--moments", str(tmp_path / "moments.csv"), "--set", "preset=e1"] + base) == 0
    assert main(["experiment", "e1", "--set", "nonsense"] + base) == 2
    capsys.readouterr()


def test_cli_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["experiment", "e3", "--N", "200", "--m", "39", "--R", "1500", "--epsilon", "0.05", "--sigma", "0.01"]
    assert main(args + ["--out", str(a), "--workers", "1"]) == 0
    assert main(args + ["--out", str(b), "--workers", "4", "--chunk", "500"]) == 0
    cmp = filecmp.dircmp(a, b)
    assert not cmp.diff_files and not cmp.left_only and not cmp.right_only


def test_figures_optional(tmp_path):
    pytest.importorskip("matplotlib")
    cfg = ExperimentConfig(preset="e1", figures=True, output_dir=str(tmp_path), **SMALL)
    names = {p.name for p in run_experiment(cfg).files}
    assert {"fig_g1.png", "fig_g2abs.png", "fig_mean.png", "fig_variance.png"} <= names


def test_presets_registry():
    assert sorted(PRESETS) == ["e1", "e2", "e3", "e4", "e5"]
