"""MPC track recovery from CIR recording sets.

Stages: per-snapshot noise-floor estimation and search-and-subtract peak
detection (matched to the sounder pulse, sub-bin delays from quadratic
interpolation on the oversampled correlation), greedy short-term association
within a set, long-term chaining of full-lifetime tracks across set gaps with
bidirectional delay prediction, and power-loss accounting for the energy the
tracking stages leave behind.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, NoLosTrackError, UndefinedLossError
from .pulse import SounderPulse
from .simulate import C0, DEFAULT_CARRIER_HZ, CirSnapshot, RecordingSet

LN2 = math.log(2.0)
THRESHOLD_DB_ABOVE_FLOOR = 6.0
# Short-term search ranges: wide two-dimensional gate for the second
# snapshot, tighter delay gate around the extrapolated prediction afterwards.
# Magnitude gates must absorb the phasor wobble of close components.
SEED_DELAY_GATE_NS = 1.5
SEED_MAG_GATE_DB = 8.0
FOLLOW_DELAY_GATE_NS = 1.0
FOLLOW_MAG_GATE_DB = 6.0
# Detections this much weaker than a neighbor within the window are treated
# as subtraction residue (misfit lobes land within the pulse mainlobe span).
RESIDUE_WINDOW_NS = 4.0
RESIDUE_RATIO = 10.0 ** (-20.0 / 20.0)
# Long-term association: both the forward and backward delay predictions must
# agree within this threshold (doubled relative to the dense-tunnel tuning).
LONG_TERM_CHI_NS = 2.0
LOS_MATCH_WINDOW_NS = 3.0


def estimate_noise_floor(snapshot: CirSnapshot | np.ndarray) -> float:
    """Mean noise power per bin, from the median of |h|^2 over all bins.

    For exponentially distributed noise power the median is mean*ln(2); the
    median keeps the estimate robust against the sparse MPC peaks.
    """
    h = snapshot.h if isinstance(snapshot, CirSnapshot) else np.asarray(snapshot)
    if h.size < 64:
        raise InsufficientDataError(f"noise floor needs >= 64 bins, got {h.size}")
    power = h.real.astype(np.float64) ** 2 + h.imag.astype(np.float64) ** 2
    return float(np.median(power)) / LN2


def detection_threshold(noise_floor: float, db_above: float = THRESHOLD_DB_ABOVE_FLOOR) -> float:
    """Detection power threshold: noise floor plus the configured margin."""
    return noise_floor * 10.0 ** (db_above / 10.0)


def _parabolic_peak(grid: np.ndarray, values: np.ndarray, step: float) -> float:
    """Location of the maximum refined by a three-point parabola."""
    j = int(np.argmax(values))
    if 0 < j < values.size - 1:
        g0, g1, g2 = values[j - 1], values[j], values[j + 1]
        denom = g0 - 2.0 * g1 + g2
        shift = 0.0 if denom >= 0 else 0.5 * (g0 - g2) / denom
        return float(grid[j] + np.clip(shift, -1.0, 1.0) * step)
    return float(grid[j])


@dataclass(frozen=True)
class Detection:
    t: float
    delay_ns: float   # absolute delay
    amplitude: float  # linear
    phase: float


@dataclass
class DetectResult:
    detections: list[Detection]
    converged: bool
    residual_peak_power: float
    threshold_power: float


def detect(
    snapshot: CirSnapshot,
    pulse: SounderPulse,
    threshold_power: float | None = None,
    max_iterations: int | None = None,
) -> DetectResult:
    """Search-and-subtract detection on one snapshot.

    Repeatedly takes the strongest residual peak above the threshold,
    refines its delay on the oversampled matched correlation (quadratic
    interpolation between lag samples), estimates the complex amplitude by
    least-squares projection on the pulse, and subtracts the fitted pulse.
    Aborts flagged if the residual peak ever grows.
    """
    h = snapshot.h.astype(np.complex128)
    n = h.size
    if threshold_power is None:
        threshold_power = detection_threshold(estimate_noise_floor(snapshot))
    power = h.real**2 + h.imag**2
    lags, W, norms = pulse.tap_matrix()
    half = pulse.half_width_bins
    lag_step = lags[1] - lags[0]
    t_bin = pulse.t_bin_ns
    if max_iterations is None:
        max_iterations = n

    detections: list[Detection] = []
    converged = True
    prev_peak = math.inf
    for _ in range(max_iterations):
        u = int(np.argmax(power))
        peak = power[u]
        if peak < threshold_power:
            break
        # Subtracting overlapping pulses legitimately perturbs neighboring
        # bins by small amounts; only meaningful growth signals divergence.
        if peak > prev_peak * 1.5:
            converged = False
            break
        prev_peak = min(prev_peak, peak)

        lo = u - half
        hi = u + half + 1
        a, b = max(lo, 0), min(hi, n)
        seg = h[a:b]
        w_lo, w_hi = a - lo, W.shape[1] - (hi - b)
        Wseg = W[:, w_lo:w_hi]
        seg_norms = norms if (a == lo and b == hi) else np.sum(Wseg * Wseg, axis=1)
        corr = Wseg @ seg
        gain = (corr.real**2 + corr.imag**2) / seg_norms

        def gain_at(fracs: np.ndarray) -> np.ndarray:
            taps_f = pulse.amplitude(
                (pulse.bin_offsets()[None, :] - fracs[:, None]) * pulse.t_bin_ns
            )[:, w_lo:w_hi]
            c = taps_f @ seg
            return (c.real**2 + c.imag**2) / np.sum(taps_f * taps_f, axis=1)

        frac = _parabolic_peak(lags, gain, lag_step)
        if peak > threshold_power * 300.0:
            # second, finer pass: the subtraction residue scales with the
            # squared delay error, and at high SNR a coarse-grid error would
            # re-trigger detection on its own residue
            fine = frac + np.array([-lag_step / 4.0, 0.0, lag_step / 4.0])
            frac = _parabolic_peak(fine, gain_at(fine), lag_step / 4.0)

        taps = pulse.taps(frac)[w_lo:w_hi]
        tnorm = float(np.dot(taps, taps))
        amp_c = complex(np.dot(taps, seg)) / tnorm
        h[a:b] -= amp_c * taps
        power[a:b] = h[a:b].real ** 2 + h[a:b].imag ** 2

        detections.append(
            Detection(
                t=snapshot.t,
                delay_ns=snapshot.reference_delay_ns + (u + frac) * t_bin,
                amplitude=abs(amp_c),
                phase=math.atan2(amp_c.imag, amp_c.real) % (2.0 * math.pi),
            )
        )

    # Residue dedup: a detection much weaker than a nearby stronger one is
    # subtraction residue, not a separate component.  Comparable amplitudes
    # at small separation are genuine close components and are kept.
    detections.sort(key=lambda d: -d.amplitude)
    kept: list[Detection] = []
    for det in detections:
        shadowed = any(
            abs(det.delay_ns - k.delay_ns) < RESIDUE_WINDOW_NS
            and det.amplitude < k.amplitude * RESIDUE_RATIO
            for k in kept
        )
        if not shadowed:
            kept.append(det)

    residual = float(power.max()) if n else 0.0
    return DetectResult(
        detections=kept,
        converged=converged,
        residual_peak_power=residual,
        threshold_power=threshold_power,
    )


@dataclass
class ShortTrack:
    """Detections of one MPC within a single recording set (at most one per
    snapshot, consecutive snapshots)."""

    first_snapshot: int
    times: np.ndarray
    delays_ns: np.ndarray
    amplitudes: np.ndarray
    phases: np.ndarray
    full_lifetime: bool

    def __len__(self) -> int:
        return len(self.times)

    @property
    def mean_amplitude(self) -> float:
        return float(self.amplitudes.mean())

    @property
    def mean_delay_ns(self) -> float:
        return float(self.delays_ns.mean())

    @property
    def mean_time(self) -> float:
        return float(self.times.mean())

    def doppler_hz(self, carrier_hz: float) -> float:
        """Doppler from the within-set delay change.

        The coarse estimate is the median of pairwise delay slopes
        (nu = -f_c * d(tau)/dt).  The fine estimate is the slope of the
        matched-filter phase ramp, which measures the same delay change
        interferometrically at the carrier scale and is orders of magnitude
        less sensitive to noise and to the bias wobble of nearby components;
        the coarse estimate only resolves its phase-wrap ambiguity.
        """
        n = len(self.times)
        i, j = np.triu_indices(n, k=1)
        slopes = (self.delays_ns[j] - self.delays_ns[i]) / (self.times[j] - self.times[i])
        nu_pairs = -carrier_hz * slopes * 1e-9
        nu_coarse = float(np.median(nu_pairs))

        steps = np.diff(self.phases)
        steps = (steps + math.pi) % (2.0 * math.pi) - math.pi
        unwrapped = np.concatenate([[0.0], np.cumsum(steps)])
        t = self.times - self.times[0]
        tc = t - t.mean()
        nu_phase = float(np.dot(tc, unwrapped - unwrapped.mean()) / np.dot(tc, tc)) / (
            2.0 * math.pi
        )
        dt = float(np.median(np.diff(self.times)))
        if dt <= 0:
            return nu_coarse
        # The coarse slope resolves the phase ambiguity (multiples of 1/dt)
        # only when its own scatter is well below the ambiguity spacing;
        # interference between crossing components inflates the scatter, and
        # then the smallest-magnitude branch is the safer choice.
        scatter = 1.4826 * float(np.median(np.abs(nu_pairs - nu_coarse)))
        if scatter < 0.25 / dt:
            wraps = round((nu_coarse - nu_phase) * dt)
        else:
            wraps = round(-nu_phase * dt)
        return nu_phase + wraps / dt

    def energy(self, pulse_energy: float = 1.0) -> float:
        return float(np.sum(self.amplitudes**2)) * pulse_energy


def track_short(detections_per_snapshot: list[list[Detection]]) -> list[ShortTrack]:
    """Greedy strongest-first association of detections into short tracks.

    A track is confirmed once it spans three consecutive snapshots; gates use
    the observed delay and magnitude changes to predict the next position.
    Confirmed tracks claim their detections; the rest seed later attempts.
    """
    n_snap = len(detections_per_snapshot)
    if n_snap < 3:
        raise InsufficientDataError(f"short-term tracking needs >= 3 snapshots, got {n_snap}")

    delays = [np.array([d.delay_ns for d in dets]) for dets in detections_per_snapshot]
    amps_db = [
        20.0 * np.log10(np.maximum([d.amplitude for d in dets], 1e-300))
        for dets in detections_per_snapshot
    ]
    amps_db = [np.asarray(a) for a in amps_db]
    free = [np.ones(len(dets), dtype=bool) for dets in detections_per_snapshot]
    seed_spent = [np.zeros(len(dets), dtype=bool) for dets in detections_per_snapshot]

    def pick(s: int, tau_pred: float, db_pred: float, gate_ns: float, gate_db: float) -> int | None:
        d_err = np.abs(delays[s] - tau_pred)
        a_err = np.abs(amps_db[s] - db_pred)
        mask = free[s] & (d_err <= gate_ns) & (a_err <= gate_db)
        if not mask.any():
            return None
        # joint two-dimensional score so a close crossing component with the
        # wrong magnitude does not steal the association
        idx = np.flatnonzero(mask)
        score = (d_err[idx] / gate_ns) ** 2 + (a_err[idx] / gate_db) ** 2
        return int(idx[np.argmin(score)])

    tracks: list[ShortTrack] = []
    for s0 in range(n_snap - 2):
        while True:
            seedable = free[s0] & ~seed_spent[s0]
            if not seedable.any():
                break
            i0 = int(np.flatnonzero(seedable)[np.argmax(amps_db[s0][seedable])])
            seed_spent[s0][i0] = True
            chain = [(s0, i0)]
            for s in range(s0 + 1, n_snap):
                if len(chain) == 1:
                    tau_pred = delays[s0][i0]
                    db_pred = amps_db[s0][i0]
                    gate_ns, gate_db = SEED_DELAY_GATE_NS, SEED_MAG_GATE_DB
                else:
                    # extrapolate the delay drift; hold the magnitude (the
                    # per-snapshot magnitude change is interference wobble,
                    # extrapolating it runs away at close crossings)
                    (sp, ip), (sq, iq) = chain[-2], chain[-1]
                    tau_pred = 2.0 * delays[sq][iq] - delays[sp][ip]
                    db_pred = amps_db[sq][iq]
                    gate_ns, gate_db = FOLLOW_DELAY_GATE_NS, FOLLOW_MAG_GATE_DB
                i = pick(s, tau_pred, db_pred, gate_ns, gate_db)
                if i is None:
                    break
                chain.append((s, i))
            if len(chain) >= 3:
                for s, i in chain:
                    free[s][i] = False
                dets = [detections_per_snapshot[s][i] for s, i in chain]
                tracks.append(
                    ShortTrack(
                        first_snapshot=s0,
                        times=np.array([d.t for d in dets]),
                        delays_ns=np.array([d.delay_ns for d in dets]),
                        amplitudes=np.array([d.amplitude for d in dets]),
                        phases=np.array([d.phase for d in dets]),
                        full_lifetime=(s0 == 0 and len(chain) == n_snap),
                    )
                )
    return tracks


@dataclass(frozen=True)
class TrackPoint:
    """Per-set summary of one tracked MPC: mean amplitude, mean delay and the
    within-set Doppler estimate."""

    set_index: int
    amplitude: float
    delay_ns: float
    doppler_hz: float
    t_mean: float


@dataclass
class Track:
    """A long-term tracked MPC: one TrackPoint per set over a contiguous set
    range.  Lifetime is last set minus first set."""

    id: int
    points: list[TrackPoint] = field(default_factory=list)

    def __post_init__(self):
        idx = [p.set_index for p in self.points]
        if any(b != a + 1 for a, b in zip(idx, idx[1:])):
            raise ValueError("track set indices must be contiguous")

    @property
    def first_set(self) -> int:
        return self.points[0].set_index

    @property
    def last_set(self) -> int:
        return self.points[-1].set_index

    @property
    def lifetime_sets(self) -> int:
        return self.last_set - self.first_set

    @property
    def mean_amplitude(self) -> float:
        return float(np.mean([p.amplitude for p in self.points]))


def _chain_doppler(points: list[TrackPoint], tail: bool) -> float:
    """Representative Doppler of a chain end: median over the last (or first)
    few points.  A single set's slope estimate can be badly corrupted when
    two components cross in delay; the median rides through."""
    window = points[-5:] if tail else points[:5]
    return float(np.median([p.doppler_hz for p in window]))


def track_long(
    points_per_set: list[tuple[int, list[TrackPoint]]],
    carrier_hz: float = DEFAULT_CARRIER_HZ,
    chi_ns: float = LONG_TERM_CHI_NS,
) -> list[Track]:
    """Chain per-set track points across adjacent sets.

    Chains are extended strongest-first; a candidate joins only if the
    forward-predicted delay (the chain's Doppler over the gap) and the
    backward-predicted delay (candidate's Doppler) both deviate from the
    observations by less than chi.  Gaps are never bridged: a missing set
    ends the chain.  A final repair pass re-applies the same bidirectional
    test to fragments that abut at consecutive sets, using the fragments'
    median Dopplers, which reconnects chains that broke on a single
    interference-corrupted Doppler estimate.
    """
    chains: list[list[TrackPoint]] = []
    open_chains: list[list[TrackPoint]] = []
    prev_index: int | None = None

    for set_index, points in points_per_set:
        adjacent = prev_index is not None and set_index == prev_index + 1
        if not adjacent:
            chains.extend(open_chains)
            open_chains = []
        claimed = np.zeros(len(points), dtype=bool)
        cand_delays = np.array([p.delay_ns for p in points]) if points else np.empty(0)
        next_open: list[list[TrackPoint]] = []
        for chain in sorted(open_chains, key=lambda c: -c[-1].amplitude):
            last = chain[-1]
            nu_chain = _chain_doppler(chain, tail=True)
            matched = None
            if len(points):
                dt = np.array([p.t_mean for p in points]) - last.t_mean
                fwd = last.delay_ns - (nu_chain / carrier_hz) * dt * 1e9
                bwd = cand_delays + np.array(
                    [p.doppler_hz for p in points]
                ) / carrier_hz * dt * 1e9
                ok = (
                    ~claimed
                    & (np.abs(fwd - cand_delays) < chi_ns)
                    & (np.abs(bwd - last.delay_ns) < chi_ns)
                )
                if ok.any():
                    idx = np.flatnonzero(ok)
                    matched = int(idx[np.argmin(np.abs(fwd - cand_delays)[idx])])
            if matched is None:
                chains.append(chain)
            else:
                claimed[matched] = True
                chain.append(points[matched])
                next_open.append(chain)
        for i, p in enumerate(points):
            if not claimed[i]:
                next_open.append([p])
        open_chains = next_open
        prev_index = set_index

    chains.extend(open_chains)
    chains = _repair_chains(chains, carrier_hz, chi_ns)
    chains.sort(key=lambda c: (c[0].set_index, c[0].delay_ns))
    return [Track(id=k, points=c) for k, c in enumerate(chains)]


def _repair_chains(
    chains: list[list[TrackPoint]], carrier_hz: float, chi_ns: float
) -> list[list[TrackPoint]]:
    changed = True
    while changed:
        changed = False
        by_start: dict[int, list[int]] = {}
        for idx, c in enumerate(chains):
            by_start.setdefault(c[0].set_index, []).append(idx)
        merged_into: dict[int, int] = {}
        consumed: set[int] = set()
        order = sorted(range(len(chains)), key=lambda i: -chains[i][-1].amplitude)
        for i in order:
            if i in consumed or i in merged_into:
                continue
            tail = chains[i][-1]
            candidates = [
                j
                for j in by_start.get(tail.set_index + 1, [])
                if j != i and j not in consumed and j not in merged_into
            ]
            best = None
            for j in candidates:
                head = chains[j][0]
                dt = head.t_mean - tail.t_mean
                fwd = tail.delay_ns - (_chain_doppler(chains[i], True) / carrier_hz) * dt * 1e9
                bwd = head.delay_ns + (_chain_doppler(chains[j], False) / carrier_hz) * dt * 1e9
                if abs(fwd - head.delay_ns) < chi_ns and abs(bwd - tail.delay_ns) < chi_ns:
                    err = abs(fwd - head.delay_ns)
                    if best is None or err < best[0]:
                        best = (err, j)
            if best is not None:
                j = best[1]
                chains[i] = chains[i] + chains[j]
                consumed.add(j)
                changed = True
        if consumed:
            chains = [c for k, c in enumerate(chains) if k not in consumed]
    return chains


def power_loss(
    recording_sets: list[RecordingSet],
    short_tracks_per_set: list[list[ShortTrack]],
    pulse: SounderPulse,
    threshold_db_above_floor: float = THRESHOLD_DB_ABOVE_FLOOR,
) -> tuple[float, float]:
    """(detection_loss_dB, longterm_loss_dB).

    Detection loss compares the above-threshold snapshot energy against the
    energy captured by short tracks; long-term loss compares short-track
    energy against the full-lifetime subset that long-term tracking keeps.
    """
    above = 0.0
    for rset in recording_sets:
        for snap in rset.snapshots:
            power = snap.h.real.astype(np.float64) ** 2 + snap.h.imag.astype(np.float64) ** 2
            thr = detection_threshold(estimate_noise_floor(power), threshold_db_above_floor)
            above += float(power[power >= thr].sum())
    e_pulse = pulse.sample_energy
    short = sum(t.energy(e_pulse) for tracks in short_tracks_per_set for t in tracks)
    full = sum(
        t.energy(e_pulse) for tracks in short_tracks_per_set for t in tracks if t.full_lifetime
    )
    if short <= 0.0:
        raise UndefinedLossError("no energy captured by short-term tracking")
    if full <= 0.0:
        raise UndefinedLossError("no energy captured by full-lifetime tracks")
    detection_loss_db = 10.0 * math.log10(max(above, short) / short)
    longterm_loss_db = 10.0 * math.log10(short / full)
    return detection_loss_db, longterm_loss_db


@dataclass(frozen=True)
class SetInfo:
    index: int
    t0: float
    t_mean: float
    d: float
    v_tx: float
    v_rx: float
    n_snapshots: int

    @property
    def v_sum(self) -> float:
        return self.v_tx + self.v_rx


@dataclass
class ExtractionResult:
    tracks: list[Track]
    set_info: list[SetInfo]
    carrier_hz: float
    bandwidth_hz: float
    set_period: float
    detection_loss_db: float
    longterm_loss_db: float
    n_detections: int
    n_short_tracks: int
    n_full_lifetime: int
    n_aborted_snapshots: int


def _process_set(rset: RecordingSet, pulse: SounderPulse) -> tuple[list[ShortTrack], int, int]:
    per_snap = []
    n_det = 0
    n_aborted = 0
    for snap in rset.snapshots:
        res = detect(snap, pulse)
        per_snap.append(res.detections)
        n_det += len(res.detections)
        n_aborted += 0 if res.converged else 1
    return track_short(per_snap), n_det, n_aborted


def extract_run(
    recording_sets: list[RecordingSet],
    bandwidth_hz: float,
    carrier_hz: float = DEFAULT_CARRIER_HZ,
    chi_ns: float = LONG_TERM_CHI_NS,
    jobs: int = 1,
) -> ExtractionResult:
    """Full extraction pipeline for one recording: detection, short-term
    tracking per set (parallelizable), long-term tracking across sets, and
    power-loss accounting."""
    if not recording_sets:
        raise InsufficientDataError("no recording sets to extract")
    pulse = SounderPulse(bandwidth_hz)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            processed = list(pool.map(lambda r: _process_set(r, pulse), recording_sets))
    else:
        processed = [_process_set(r, pulse) for r in recording_sets]

    short_per_set = [p[0] for p in processed]
    n_detections = sum(p[1] for p in processed)
    n_aborted = sum(p[2] for p in processed)

    points_per_set = []
    for rset, shorts in zip(recording_sets, short_per_set):
        points = [
            TrackPoint(
                set_index=rset.index,
                amplitude=st.mean_amplitude,
                delay_ns=st.mean_delay_ns,
                doppler_hz=st.doppler_hz(carrier_hz),
                t_mean=st.mean_time,
            )
            for st in shorts
            if st.full_lifetime
        ]
        points.sort(key=lambda p: -p.amplitude)
        points_per_set.append((rset.index, points))

    tracks = track_long(points_per_set, carrier_hz=carrier_hz, chi_ns=chi_ns)
    det_loss, lt_loss = power_loss(recording_sets, short_per_set, pulse)

    set_info = [
        SetInfo(
            index=r.index,
            t0=r.t0,
            t_mean=float(np.mean([s.t for s in r.snapshots])),
            d=r.d,
            v_tx=r.v_tx,
            v_rx=r.v_rx,
            n_snapshots=len(r.snapshots),
        )
        for r in recording_sets
    ]
    periods = [b.t0 - a.t0 for a, b in zip(recording_sets, recording_sets[1:])]
    set_period = float(np.median(periods)) if periods else 0.0

    return ExtractionResult(
        tracks=tracks,
        set_info=set_info,
        carrier_hz=carrier_hz,
        bandwidth_hz=bandwidth_hz,
        set_period=set_period,
        detection_loss_db=det_loss,
        longterm_loss_db=lt_loss,
        n_detections=n_detections,
        n_short_tracks=sum(len(s) for s in short_per_set),
        n_full_lifetime=sum(1 for s in short_per_set for t in s if t.full_lifetime),
        n_aborted_snapshots=n_aborted,
    )


def find_los_track(tracks: list[Track], set_info: list[SetInfo]) -> Track:
    """Identify the line-of-sight track: the one whose per-set delay stays
    closest to the geometric d/c0, within the 3 ns window; falls back to the
    earliest-delay track covering at least half the sets."""
    if not tracks:
        raise NoLosTrackError("no tracks available")
    geo = {s.index: s.d / C0 * 1e9 for s in set_info}
    best = None
    best_dev = math.inf
    for track in tracks:
        devs = [abs(p.delay_ns - geo[p.set_index]) for p in track.points if p.set_index in geo]
        if not devs:
            continue
        dev = float(np.median(devs))
        if dev < best_dev:
            best, best_dev = track, dev
    if best is not None and best_dev <= LOS_MATCH_WINDOW_NS:
        return best
    half = len(set_info) / 2.0
    spanning = [t for t in tracks if len(t.points) >= half]
    if spanning:
        return min(spanning, key=lambda t: float(np.mean([p.delay_ns for p in t.points])))
    raise NoLosTrackError(
        "no track matches the geometric LOS delay within 3 ns and none spans half the run"
    )
