"""Track statistics: per-set alive/newborn counts, birth rate per meter
traveled, lifetimes in meters, excess delays against the LOS path and
relative Doppler of newborn tracks; distance binning, model fitting with
goodness-of-fit, and comparison against a reference scenario model.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import statdist
from .errors import InsufficientDataError, NoLosTrackError
from .extract import ExtractionResult, SetInfo, Track, find_los_track
from .scenarios import LambdaPoly, ScenarioModel
from .simulate import C0, SPEED_EXCLUSION_MS, GroundTruth
from .statdist import DistSpec, Family, GofResult, fit

DEFAULT_BIN_WIDTH_M = 10.0


@dataclass(frozen=True)
class SetStats:
    """Per-set track counts: P alive, P_b newly observed."""

    index: int
    d: float
    v_tx: float
    v_rx: float
    p: int
    p_b: int

    @property
    def v_sum(self) -> float:
        return self.v_tx + self.v_rx

    @property
    def speed_excluded(self) -> bool:
        return self.v_tx < SPEED_EXCLUSION_MS or self.v_rx < SPEED_EXCLUSION_MS


def set_stats(tracks: list[Track], set_info: list[SetInfo]) -> list[SetStats]:
    """Count alive tracks (first_set <= i <= last_set) and newborn tracks
    (first_set == i) per recording set."""
    alive = {s.index: 0 for s in set_info}
    born = {s.index: 0 for s in set_info}
    for t in tracks:
        for i in range(t.first_set, t.last_set + 1):
            if i in alive:
                alive[i] += 1
        if t.first_set in born:
            born[t.first_set] += 1
    return [
        SetStats(index=s.index, d=s.d, v_tx=s.v_tx, v_rx=s.v_rx,
                 p=alive[s.index], p_b=born[s.index])
        for s in set_info
    ]


@dataclass(frozen=True)
class BirthRateSample:
    meter_index: int
    r: int       # newborn tracks within ~1 m of relative travel
    d: float     # mean distance over the window
    n_sets: int


def birth_rate(
    stats: list[SetStats],
    set_period: float,
    exclude_first_set: bool = True,
) -> list[BirthRateSample]:
    """Newborn counts per meter of relative travel.

    The window length is round(1 m / (T_r * v_sum)) sets; windows never span
    speed-excluded sets, and trailing partial windows are kept so the summed
    R equals the summed P_b over included sets exactly.  The first recording
    set is excluded by default: every pre-existing track is "newly observed"
    there.
    """
    samples: list[BirthRateSample] = []
    first_index = stats[0].index if stats else 0
    included = [
        s for s in stats
        if not s.speed_excluded
        and s.v_sum > 0
        and not (exclude_first_set and s.index == first_index)
    ]
    if not included:
        warnings.warn("all sets excluded from birth-rate accounting", RuntimeWarning)
        return samples
    meter = 0
    pos = 0
    while pos < len(included):
        s0 = included[pos]
        width = max(1, round(1.0 / (set_period * s0.v_sum)))
        window = [s0]
        prev = s0.index
        while len(window) < width and pos + len(window) < len(included):
            nxt = included[pos + len(window)]
            if nxt.index != prev + 1:
                break  # excluded or missing set interrupts the window
            window.append(nxt)
            prev = nxt.index
        samples.append(
            BirthRateSample(
                meter_index=meter,
                r=sum(s.p_b for s in window),
                d=float(np.mean([s.d for s in window])),
                n_sets=len(window),
            )
        )
        meter += 1
        pos += len(window)
    return samples


@dataclass
class SampleTable:
    """Pooled per-track statistics of one extracted run."""

    lifetimes_m: np.ndarray
    lifetime_d: np.ndarray
    excess_delays_ns: np.ndarray
    delay_d: np.ndarray
    rel_dopplers: np.ndarray  # signed
    doppler_d: np.ndarray
    counters: dict = field(default_factory=dict)


def _border_track(track: Track, set_info: list[SetInfo]) -> tuple[bool, bool]:
    first = set_info[0].index
    last = set_info[-1].index
    return track.first_set == first, track.last_set == last


def lifetimes(
    tracks: list[Track],
    set_info: list[SetInfo],
    set_period: float,
) -> tuple[list[tuple[float, float]], dict]:
    """Track lifetimes translated to meters: Y = Psi * T_r * (v_tx + v_rx),
    with the mean relative speed over the track's life.

    Tracks touching the run boundaries are censored and skipped; single-set
    tracks (Psi = 0) are excluded from fitting but counted.
    """
    info = {s.index: s for s in set_info}
    out: list[tuple[float, float]] = []
    n_zero = n_censored = 0
    for t in tracks:
        left, right = _border_track(t, set_info)
        if left or right:
            n_censored += 1
            continue
        v_mean = float(np.mean([info[p.set_index].v_sum for p in t.points]))
        y = t.lifetime_sets * set_period * v_mean
        if t.lifetime_sets == 0:
            n_zero += 1
            continue
        out.append((y, info[t.first_set].d))
    return out, {"n_zero_lifetime": n_zero, "n_censored": n_censored}


def excess_delays(
    tracks: list[Track],
    los: Track,
    set_info: list[SetInfo],
    geometric_fallback: bool = False,
) -> tuple[list[tuple[float, float]], dict]:
    """Excess delay of each newborn track: mean delay at the birth set minus
    the LOS delay there.  Values in [-0.5 ns, 0) clamp to zero; more negative
    values are discarded with a warning count."""
    if los is None:
        raise NoLosTrackError(
            "no LOS track; rerun with geometric_fallback=True to use d/c0"
        )
    los_delay = {p.set_index: p.delay_ns for p in los.points}
    geo = {s.index: s.d / C0 * 1e9 for s in set_info}
    info = {s.index: s for s in set_info}
    first_index = set_info[0].index
    out: list[tuple[float, float]] = []
    n_clamped = n_discarded = 0
    for t in tracks:
        if t is los or t.first_set == first_index:
            continue
        i = t.first_set
        ref = los_delay.get(i)
        if ref is None:
            if not geometric_fallback:
                raise NoLosTrackError(f"LOS track has no point at set {i}")
            ref = geo[i]
        tau_x = t.points[0].delay_ns - ref
        if tau_x < -0.5:
            n_discarded += 1
            continue
        if tau_x < 0.0:
            tau_x = 0.0
            n_clamped += 1
        out.append((tau_x, info[i].d))
    if n_discarded:
        warnings.warn(
            f"{n_discarded} newborn tracks had delay > 0.5 ns below the LOS; discarded",
            RuntimeWarning,
        )
    return out, {"n_clamped": n_clamped, "n_discarded": n_discarded}


def rel_dopplers(
    tracks: list[Track],
    set_info: list[SetInfo],
    carrier_hz: float,
    los: Track | None = None,
) -> tuple[list[tuple[float, float]], dict]:
    """Relative Doppler of each newborn track: nu / ((f_c/c0) * v_sum) at the
    birth set, signed.  Birth sets below the speed exclusion are dropped, as
    are exact zeros (outside the fitting support)."""
    info = {s.index: s for s in set_info}
    first_index = set_info[0].index
    out: list[tuple[float, float]] = []
    n_excluded = n_zero = 0
    for t in tracks:
        if (los is not None and t is los) or t.first_set == first_index:
            continue
        s = info[t.first_set]
        if s.v_tx < SPEED_EXCLUSION_MS or s.v_rx < SPEED_EXCLUSION_MS or s.v_sum <= 0:
            n_excluded += 1
            continue
        nu_n = t.points[0].doppler_hz / ((carrier_hz / C0) * s.v_sum)
        if nu_n == 0.0:
            n_zero += 1
            continue
        out.append((nu_n, s.d))
    return out, {"n_speed_excluded": n_excluded, "n_zero_doppler": n_zero}


def collect_run_samples(result: ExtractionResult) -> tuple[list[SetStats], list[BirthRateSample], SampleTable]:
    """Per-run front half of the analysis: set stats, birth-rate windows and
    the per-track sample table."""
    stats = set_stats(result.tracks, result.set_info)
    births = birth_rate(stats, result.set_period)
    try:
        los = find_los_track(result.tracks, result.set_info)
    except NoLosTrackError:
        los = None
    life, life_ctr = lifetimes(result.tracks, result.set_info, result.set_period)
    if los is not None:
        # the LOS chain can break at crossings; fall back to the geometric
        # delay for sets it misses
        delays, delay_ctr = excess_delays(
            result.tracks, los, result.set_info, geometric_fallback=True
        )
    else:
        delays, delay_ctr = [], {"n_clamped": 0, "n_discarded": 0, "no_los": 1}
    dopp, dopp_ctr = rel_dopplers(result.tracks, result.set_info, result.carrier_hz, los)
    counters = {**life_ctr, **delay_ctr, **dopp_ctr, "n_tracks": len(result.tracks)}
    table = SampleTable(
        lifetimes_m=np.array([v for v, _ in life]),
        lifetime_d=np.array([d for _, d in life]),
        excess_delays_ns=np.array([v for v, _ in delays]),
        delay_d=np.array([d for _, d in delays]),
        rel_dopplers=np.array([v for v, _ in dopp]),
        doppler_d=np.array([d for _, d in dopp]),
        counters=counters,
    )
    return stats, births, table


@dataclass(frozen=True)
class BinStat:
    d_center: float
    mean: float
    var: float
    n: int


def bin_by_distance(values, distances, width: float = DEFAULT_BIN_WIDTH_M) -> list[BinStat]:
    """Per-bin mean/variance/count with bin centers at width/2, 3*width/2, ..."""
    values = np.asarray(values, dtype=float)
    distances = np.asarray(distances, dtype=float)
    if values.size == 0:
        raise InsufficientDataError("cannot bin zero samples")
    idx = np.floor(distances / width).astype(int)
    out = []
    for b in sorted(set(idx.tolist())):
        mask = idx == b
        vals = values[mask]
        out.append(
            BinStat(
                d_center=(b + 0.5) * width,
                mean=float(vals.mean()),
                var=float(vals.var()),
                n=int(vals.size),
            )
        )
    return out


@dataclass
class DistFit:
    spec: DistSpec
    cdf_mse: float
    chi2: GofResult | None
    ks: GofResult | None
    run_reject_rate: float | None = None
    n_runs_tested: int = 0


@dataclass
class AttributeReport:
    name: str
    n: int
    primary: DistFit
    alternative: DistFit
    counters: dict


@dataclass
class CurveReport:
    name: str
    bins: list[BinStat]
    poly: LambdaPoly
    mse: float
    stdev: float
    chi2_reject_rate: float | None
    comparison_reject_rate: float | None
    cdf_mse: float | None
    comparison_cdf_mse: float | None
    n_bins_tested: int


@dataclass
class AnalysisReport:
    meta: dict
    number: CurveReport
    birth: CurveReport
    lifetime: AttributeReport
    excess_delay: AttributeReport
    rel_doppler: AttributeReport


def _binned_count_report(
    name: str,
    values: np.ndarray,
    distances: np.ndarray,
    comparison: Family,
    bin_width: float,
    degree: int,
) -> CurveReport:
    bins = bin_by_distance(values, distances, bin_width)
    usable = [b for b in bins if b.n >= 2]
    if len(usable) < degree + 2:
        raise InsufficientDataError(
            f"{name}: only {len(usable)} usable distance bins for a degree-{degree} fit"
        )
    poly, mse = statdist.fit_lambda([(b.d_center, b.mean, b.n) for b in usable], degree)
    stdev = float(np.mean([math.sqrt(b.var) for b in usable]))

    idx = np.floor(distances / bin_width).astype(int)
    rejected = comp_rejected = 0
    tested = comp_tested = 0
    mses, comp_mses = [], []
    for b in usable:
        mask = (idx + 0.5) * bin_width == b.d_center
        samples = values[mask]
        if samples.size < 30 or samples.max() == samples.min():
            continue
        try:
            spec = fit(Family.POISSON, samples)
            res = statdist.chi2_gof(samples, spec, n_fitted=1)
            tested += 1
            rejected += int(res.reject_at_5pct)
            mses.append(statdist.cdf_mse(samples, spec))
        except (InsufficientDataError, statdist.DegenerateFitError):
            pass
        try:
            cspec = fit(comparison, samples)
            cres = statdist.chi2_gof(samples, cspec, n_fitted=2)
            comp_tested += 1
            comp_rejected += int(cres.reject_at_5pct)
            comp_mses.append(statdist.cdf_mse(samples, cspec))
        except (InsufficientDataError, statdist.DegenerateFitError):
            pass
    return CurveReport(
        name=name,
        bins=bins,
        poly=poly,
        mse=mse,
        stdev=stdev,
        chi2_reject_rate=(rejected / tested) if tested else None,
        comparison_reject_rate=(comp_rejected / comp_tested) if comp_tested else None,
        cdf_mse=float(np.mean(mses)) if mses else None,
        comparison_cdf_mse=float(np.mean(comp_mses)) if comp_mses else None,
        n_bins_tested=tested,
    )


def _attribute_report(
    name: str,
    pooled: np.ndarray,
    per_run: list[np.ndarray],
    primary: Family,
    alternative: Family,
    counters: dict,
    use_ks: bool,
) -> AttributeReport:
    pooled = pooled[pooled > 0]
    if pooled.size < 10:
        raise InsufficientDataError(f"{name}: only {pooled.size} positive samples")

    def one_fit(family: Family) -> DistFit:
        spec = fit(family, pooled)
        chi2 = None
        try:
            chi2 = statdist.chi2_gof(pooled, spec)
        except InsufficientDataError:
            pass
        ks = statdist.ks_test(pooled, spec) if use_ks else None
        rej = tested = 0
        for run_vals in per_run:
            vals = run_vals[run_vals > 0]
            if vals.size < 30:
                continue
            try:
                rspec = fit(family, vals)
                res = statdist.chi2_gof(vals, rspec)
                tested += 1
                rej += int(res.reject_at_5pct)
            except (InsufficientDataError, statdist.DegenerateFitError):
                continue
        return DistFit(
            spec=spec,
            cdf_mse=statdist.cdf_mse(pooled, spec),
            chi2=chi2,
            ks=ks,
            run_reject_rate=(rej / tested) if tested else None,
            n_runs_tested=tested,
        )

    return AttributeReport(
        name=name,
        n=int(pooled.size),
        primary=one_fit(primary),
        alternative=one_fit(alternative),
        counters=counters,
    )


def build_report(
    runs: list[tuple[list[SetStats], list[BirthRateSample], SampleTable]],
    bin_width: float = DEFAULT_BIN_WIDTH_M,
    number_degree: int = 1,
    birth_degree: int = 1,
    meta: dict | None = None,
) -> AnalysisReport:
    """Full statistical report over one or more extracted runs.

    Counts and birth rates are fitted per distance bin (Poisson, with the
    discretized Normal and discretized Gamma comparison fits); lifetime,
    excess delay and relative Doppler are fitted on the pooled samples with
    their paper/alternative family pairs.
    """
    if not runs:
        raise InsufficientDataError("no runs to analyze")
    all_stats = [s for stats, _, _ in runs for s in stats]
    if not all_stats:
        raise InsufficientDataError("no recording sets in the analysis input")

    p_vals = np.array([s.p for s in all_stats], dtype=float)
    p_d = np.array([s.d for s in all_stats], dtype=float)
    number = _binned_count_report(
        "number_of_mpcs", p_vals, p_d, Family.DISCRETIZED_NORMAL, bin_width, number_degree
    )

    births = [b for _, bs, _ in runs for b in bs]
    if not births:
        raise InsufficientDataError("no birth-rate windows (all sets excluded?)")
    r_vals = np.array([b.r for b in births], dtype=float)
    r_d = np.array([b.d for b in births], dtype=float)
    birth = _binned_count_report(
        "birth_rate", r_vals, r_d, Family.DISCRETIZED_GAMMA, bin_width, birth_degree
    )

    def pool(attr: str) -> tuple[np.ndarray, list[np.ndarray]]:
        per_run = [np.abs(getattr(t, attr)) for _, _, t in runs]
        return np.concatenate(per_run) if per_run else np.empty(0), per_run

    life_pool, life_runs = pool("lifetimes_m")
    delay_pool, delay_runs = pool("excess_delays_ns")
    dopp_pool, dopp_runs = pool("rel_dopplers")
    counters: dict = {}
    for _, _, t in runs:
        for k, v in t.counters.items():
            counters[k] = counters.get(k, 0) + v
    signed = np.concatenate([t.rel_dopplers for _, _, t in runs])
    counters["doppler_fraction_toward"] = (
        float(np.mean(signed > 0)) if signed.size else None
    )

    lifetime = _attribute_report(
        "lifetime_m", life_pool, life_runs,
        Family.BIRNBAUM_SAUNDERS, Family.LOGNORMAL, counters, use_ks=True,
    )
    excess = _attribute_report(
        "excess_delay_ns", delay_pool, delay_runs,
        Family.LOGNORMAL, Family.EXPONENTIAL, counters, use_ks=True,
    )
    doppler = _attribute_report(
        "rel_doppler", dopp_pool, dopp_runs,
        Family.WEIBULL, Family.GAMMA, counters, use_ks=True,
    )

    return AnalysisReport(
        meta={
            "n_runs": len(runs),
            "n_sets": len(all_stats),
            "bin_width_m": bin_width,
            **(meta or {}),
        },
        number=number,
        birth=birth,
        lifetime=lifetime,
        excess_delay=excess,
        rel_doppler=doppler,
    )


# --- model comparison ----------------------------------------------------------

@dataclass(frozen=True)
class Deviation:
    name: str
    reference: float
    recovered: float

    @property
    def rel_error(self) -> float:
        if self.reference == 0.0:
            return math.inf if self.recovered != 0.0 else 0.0
        return abs(self.recovered - self.reference) / abs(self.reference)


def compare_models(report: AnalysisReport, reference: ScenarioModel) -> list[Deviation]:
    """Relative errors of the recovered parameters against a reference model.

    Distribution parameters are compared directly; lambda(d) curves are
    compared through their mean value over the report's distance bins.
    """
    devs = [
        Deviation("lifetime.eta", reference.lifetime.eta, report.lifetime.primary.spec.params[0]),
        Deviation("lifetime.gamma", reference.lifetime.gamma, report.lifetime.primary.spec.params[1]),
        Deviation("excess_delay.psi", reference.excess_delay.psi, report.excess_delay.primary.spec.params[0]),
        Deviation("excess_delay.rho", reference.excess_delay.rho, report.excess_delay.primary.spec.params[1]),
        Deviation("rel_doppler.zeta", reference.rel_doppler.zeta, report.rel_doppler.primary.spec.params[0]),
        Deviation("rel_doppler.kappa", reference.rel_doppler.kappa, report.rel_doppler.primary.spec.params[1]),
    ]
    centers = np.array([b.d_center for b in report.number.bins])
    lam_rec = np.asarray(statdist.eval_lambda(report.number.poly, centers))
    lam_ref = np.asarray(statdist.eval_lambda(reference.number.poly, centers))
    devs.append(Deviation("number.lambda_mean", float(lam_ref.mean()), float(lam_rec.mean())))

    b_centers = np.array([b.d_center for b in report.birth.bins])
    birth_ref = np.array(
        [statdist.eval_lambda(reference.birth.poly_at(d), d) for d in b_centers]
    )
    birth_rec = np.asarray(statdist.eval_lambda(report.birth.poly, b_centers))
    devs.append(Deviation("birth.lambda_mean", float(birth_ref.mean()), float(birth_rec.mean())))
    return devs


# --- extraction scoring against ground truth -----------------------------------

@dataclass
class TrackScore:
    mpc_id: int
    recovered: bool
    coverage: float
    delay_rmse_ns: float | None
    doppler_rel_err: float | None


@dataclass
class ScoreSummary:
    scores: list[TrackScore]
    n_eligible: int
    n_recovered: int

    @property
    def recovery_rate(self) -> float:
        return self.n_recovered / self.n_eligible if self.n_eligible else math.nan


def score_extraction(
    truth: GroundTruth,
    tracks: list[Track],
    min_alive_sets: int = 5,
    delay_rmse_limit_ns: float = 0.5,
    doppler_rel_limit: float = 0.15,
    coverage_limit: float = 0.8,
    match_window_ns: float = 1.0,
) -> ScoreSummary:
    """Match ground-truth MPCs to extracted tracks.

    An MPC counts as recovered when one track matches its per-set true delay
    within the match window over at least the coverage fraction of its alive
    sets, with delay RMSE and median Doppler relative error inside the
    limits.
    """
    per_mpc: dict[int, dict[int, tuple[float, float, float]]] = {}
    for set_i, mpc_id, a, tau, nu in truth.per_set:
        per_mpc.setdefault(mpc_id, {})[set_i] = (a, tau, nu)

    track_points = [
        {p.set_index: p for p in t.points} for t in tracks
    ]
    scores: list[TrackScore] = []
    for m in truth.mpcs:
        if m.is_los:
            continue
        rows = per_mpc.get(m.id, {})
        if len(rows) < min_alive_sets:
            continue
        best = None
        for tp in track_points:
            overlap = [i for i in rows if i in tp]
            matched = [i for i in overlap if abs(tp[i].delay_ns - rows[i][1]) <= match_window_ns]
            if not matched:
                continue
            coverage = len(matched) / len(rows)
            if best is None or coverage > best[0]:
                errs = np.array([tp[i].delay_ns - rows[i][1] for i in matched])
                rel = [
                    abs(tp[i].doppler_hz - rows[i][2]) / abs(rows[i][2])
                    for i in matched
                    if rows[i][2] != 0.0
                ]
                best = (
                    coverage,
                    float(np.sqrt(np.mean(errs**2))),
                    float(np.median(rel)) if rel else None,
                )
        if best is None:
            scores.append(TrackScore(m.id, False, 0.0, None, None))
            continue
        coverage, rmse, dop_err = best
        ok = (
            coverage >= coverage_limit
            and rmse <= delay_rmse_limit_ns
            and (dop_err is None or dop_err <= doppler_rel_limit)
        )
        scores.append(TrackScore(m.id, ok, coverage, rmse, dop_err))

    return ScoreSummary(
        scores=scores,
        n_eligible=len(scores),
        n_recovered=sum(1 for s in scores if s.recovered),
    )
