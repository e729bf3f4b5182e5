"""Report output: structured-text (JSON) analysis reports and the plot-ready
CSV files behind the lambda(d) and CDF comparison figures."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import statdist
from .analyze import AnalysisReport, AttributeReport, CurveReport, Deviation, SampleTable
from .scenarios import LambdaPoly, ScenarioModel
from .statdist import DistSpec, Family, GofResult


def _gof_dict(g: GofResult | None) -> dict | None:
    if g is None:
        return None
    return {
        "statistic": g.statistic,
        "p_value": g.p_value,
        "reject_at_5pct": g.reject_at_5pct,
        "n": g.n,
        "dof": g.dof,
    }


def _spec_dict(spec: DistSpec) -> dict:
    return {"family": spec.family.value, "params": list(spec.params)}


def _curve_dict(c: CurveReport) -> dict:
    return {
        "name": c.name,
        "poly": {"p0": c.poly.p0, "p1": c.poly.p1, "p2": c.poly.p2,
                 "valid_range": list(c.poly.valid_range)},
        "mse": c.mse,
        "stdev": c.stdev,
        "chi2_reject_rate": c.chi2_reject_rate,
        "comparison_reject_rate": c.comparison_reject_rate,
        "cdf_mse": c.cdf_mse,
        "comparison_cdf_mse": c.comparison_cdf_mse,
        "n_bins_tested": c.n_bins_tested,
        "bins": [
            {"d_center": b.d_center, "mean": b.mean, "var": b.var, "n": b.n}
            for b in c.bins
        ],
    }


def _attr_dict(a: AttributeReport) -> dict:
    def fit_dict(f):
        return {
            "spec": _spec_dict(f.spec),
            "cdf_mse": f.cdf_mse,
            "chi2": _gof_dict(f.chi2),
            "ks": _gof_dict(f.ks),
            "run_reject_rate": f.run_reject_rate,
            "n_runs_tested": f.n_runs_tested,
        }

    return {
        "name": a.name,
        "n": a.n,
        "primary": fit_dict(a.primary),
        "alternative": fit_dict(a.alternative),
        "counters": {k: v for k, v in a.counters.items()},
    }


def report_to_dict(report: AnalysisReport) -> dict:
    return {
        "meta": report.meta,
        "number": _curve_dict(report.number),
        "birth": _curve_dict(report.birth),
        "lifetime": _attr_dict(report.lifetime),
        "excess_delay": _attr_dict(report.excess_delay),
        "rel_doppler": _attr_dict(report.rel_doppler),
    }


def write_report_json(report: AnalysisReport, path: str | Path,
                      deviations: list[Deviation] | None = None) -> None:
    payload = report_to_dict(report)
    if deviations is not None:
        payload["deviations"] = [
            {"name": d.name, "reference": d.reference, "recovered": d.recovered,
             "rel_error": d.rel_error}
            for d in deviations
        ]
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _curve_csv(path: Path, curve: CurveReport, reference_poly: LambdaPoly | None) -> None:
    header = ["d_center_m", "mean", "var", "n", "lambda_fit"]
    if reference_poly is not None:
        header.append("lambda_reference")
    rows = []
    for b in curve.bins:
        row = [
            f"{b.d_center:.6g}", f"{b.mean:.8g}", f"{b.var:.8g}", b.n,
            f"{float(statdist.eval_lambda(curve.poly, b.d_center)):.8g}",
        ]
        if reference_poly is not None:
            row.append(f"{float(statdist.eval_lambda(reference_poly, b.d_center)):.8g}")
        rows.append(row)
    _write_csv(path, header, rows)


def _cdf_csv(path: Path, samples: np.ndarray, attr: AttributeReport) -> None:
    x = np.sort(samples[samples > 0])
    if x.size == 0:
        return
    emp = (np.arange(1, x.size + 1) - 0.5) / x.size
    prim = np.asarray(statdist.eval_cdf(attr.primary.spec, x))
    alt = np.asarray(statdist.eval_cdf(attr.alternative.spec, x))
    _write_csv(
        path,
        ["x", "ecdf",
         f"cdf_{attr.primary.spec.family.value}",
         f"cdf_{attr.alternative.spec.family.value}"],
        (
            [f"{xi:.8g}", f"{e:.8g}", f"{p:.8g}", f"{a:.8g}"]
            for xi, e, p, a in zip(x, emp, prim, alt)
        ),
    )


def write_csv_outputs(
    report: AnalysisReport,
    tables: list[SampleTable],
    outdir: str | Path,
    reference: ScenarioModel | None = None,
) -> list[Path]:
    """Write the delimited outputs: lambda(d) bin tables for counts and birth
    rate, and empirical-vs-fitted CDF tables per attribute statistic."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []

    p = outdir / "number_lambda.csv"
    _curve_csv(p, report.number, reference.number.poly if reference else None)
    paths.append(p)

    p = outdir / "birth_lambda.csv"
    _curve_csv(p, report.birth, None)
    paths.append(p)

    pools = {
        "lifetime_cdf.csv": (np.concatenate([t.lifetimes_m for t in tables]), report.lifetime),
        "excess_delay_cdf.csv": (
            np.concatenate([t.excess_delays_ns for t in tables]), report.excess_delay),
        "rel_doppler_cdf.csv": (
            np.abs(np.concatenate([t.rel_dopplers for t in tables])), report.rel_doppler),
    }
    for name, (samples, attr) in pools.items():
        p = outdir / name
        _cdf_csv(p, samples, attr)
        paths.append(p)
    return paths


def format_deviation_table(deviations: list[Deviation], tolerance: float) -> str:
    lines = [f"{'parameter':<22} {'reference':>12} {'recovered':>12} {'rel_err':>9}  status"]
    for d in deviations:
        status = "ok" if d.rel_error <= tolerance else "EXCEEDS"
        lines.append(
            f"{d.name:<22} {d.reference:>12.4g} {d.recovered:>12.4g} "
            f"{d.rel_error:>8.1%}  {status}"
        )
    return "\n".join(lines)
