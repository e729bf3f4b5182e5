"""Figure rendering for analysis reports: lambda(d) bin plots and
empirical-vs-fitted CDF comparisons, written as PNG files next to the CSV
outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import statdist
from .analyze import AnalysisReport, AttributeReport, CurveReport, SampleTable
from .scenarios import ScenarioModel

_FIG_KW = {"figsize": (5.2, 3.4), "dpi": 130}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def _lambda_figure(curve: CurveReport, reference_poly, path: Path, ylabel: str) -> Path:
    fig, ax = plt.subplots(**_FIG_KW)
    d = np.array([b.d_center for b in curve.bins])
    means = np.array([b.mean for b in curve.bins])
    stds = np.array([np.sqrt(b.var) for b in curve.bins])
    ax.errorbar(d, means, yerr=stds, fmt="o", ms=4, capsize=2, label="bin mean ± std")
    grid = np.linspace(d.min(), d.max(), 200)
    ax.plot(grid, statdist.eval_lambda(curve.poly, grid), "-", label="fitted λ(d)")
    if reference_poly is not None:
        ax.plot(grid, statdist.eval_lambda(reference_poly, grid), "--", label="reference λ(d)")
    ax.set_xlabel("Tx–Rx distance d [m]")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def _cdf_figure(samples: np.ndarray, attr: AttributeReport, path: Path, xlabel: str) -> Path:
    x = np.sort(samples[samples > 0])
    if x.size == 0:
        return path
    fig, ax = plt.subplots(**_FIG_KW)
    emp = (np.arange(1, x.size + 1) - 0.5) / x.size
    ax.step(x, emp, where="post", label="empirical", lw=1.2)
    grid = np.linspace(x[0], x[-1], 400)
    prim = attr.primary.spec
    alt = attr.alternative.spec
    ax.plot(grid, statdist.eval_cdf(prim, grid), "-",
            label=f"{prim.family.value} fit")
    ax.plot(grid, statdist.eval_cdf(alt, grid), "--",
            label=f"{alt.family.value} fit")
    if x[-1] / max(x[0], 1e-12) > 300:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("CDF")
    ax.legend(fontsize=8, loc="lower right")
    ax.grid(alpha=0.3)
    return _save(fig, path)


def render_figures(
    report: AnalysisReport,
    tables: list[SampleTable],
    outdir: str | Path,
    reference: ScenarioModel | None = None,
) -> list[Path]:
    """Render the report's figures to PNG files; returns the written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = [
        _lambda_figure(
            report.number,
            reference.number.poly if reference else None,
            outdir / "number_lambda.png",
            "number of MPCs λ(d)",
        ),
        _lambda_figure(
            report.birth, None, outdir / "birth_lambda.png", "birth rate λ(d) [1/m]"
        ),
        _cdf_figure(
            np.concatenate([t.lifetimes_m for t in tables]),
            report.lifetime,
            outdir / "lifetime_cdf.png",
            "MPC lifetime [m]",
        ),
        _cdf_figure(
            np.concatenate([t.excess_delays_ns for t in tables]),
            report.excess_delay,
            outdir / "excess_delay_cdf.png",
            "newborn excess delay [ns]",
        ),
        _cdf_figure(
            np.abs(np.concatenate([t.rel_dopplers for t in tables])),
            report.rel_doppler,
            outdir / "rel_doppler_cdf.png",
            "newborn relative Doppler |νⁿ|",
        ),
    ]
    return paths
