"""PNG rendering of experiment and sweep data (needs the optional matplotlib extra)."""

from __future__ import annotations

import logging
from pathlib import Path

log = logging.getLogger(__name__)

__all__ = ["render_experiment", "render_sweep"]


def _pyplot():
    try:
        import matplotlib
    except ImportError:
        log.warning("matplotlib is not installed; skipping PNG figures (install the 'plot' extra)")
        return None
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


# Fixed metadata keeps the PNG bytes independent of the run date.
_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=120, metadata=_META)
    return path


def render_experiment(out: Path, outcome) -> list[Path]:
    plt = _pyplot()
    if plt is None:
        return []
    res, mom, cfg = outcome.result, outcome.moments, outcome.config
    t = res.grid.nodes
    files = []
    panels = [
        ("fig_mean.png", [(mom.mean, "E hat"), (outcome.mean_used, "mollified")], "mean of I^{1-a} h"),
        ("fig_variance.png", [(mom.variance, "V hat"), (outcome.variance_used, "mollified")], "variance of I^{1-a} h"),
        ("fig_g1.png", [(res.g1_true, "g1"), (res.g1_hat, "g1 hat")], f"er(g1) = {res.er_g1:.4g}"),
        ("fig_g2abs.png", [(res.g2abs_true, "|g2|"), (res.g2abs_hat, "|g2| hat")], f"er(|g2|) = {res.er_g2abs:.4g}"),
    ]
    for name, curves, title in panels:
        if cfg.epsilon <= 0 and curves[1][1] == "mollified":
            curves = curves[:1]
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for y, label in curves:
            ax.plot(t, y, lw=1.0, label=label)
        ax.set_xlabel("t")
        ax.set_title(f"{cfg.preset}, R={cfg.R}: {title}")
        ax.legend()
        fig.tight_layout()
        files.append(_save(fig, Path(out) / name))
        plt.close(fig)
    return files


def render_sweep(out: Path, table) -> list[Path]:
    plt = _pyplot()
    if plt is None:
        return []
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6))
    for ax, ys, label in zip(axes, (table.er_g1, table.er_g2abs), ("er(g1)", "er(|g2|)")):
        ax.plot(table.values, ys, "o-")
        ax.set_xlabel(table.axis)
        ax.set_ylabel(label)
        if table.axis in ("samples", "epsilon") and min(table.values) > 0:
            ax.set_xscale("log")
    fig.tight_layout()
    path = _save(fig, Path(out) / f"sweep_{table.axis}.png")
    plt.close(fig)
    return [path]
