"""Ground-truth channel generator: a distance-driven birth/death process for
individual multipath components (MPCs), parameterized by a scenario model,
plus synthesis of noisy wideband CIR recording sets on a 1/B delay grid.

Timing follows the measurement structure: bursts of 6-13 snapshots spaced
0.2-0.7 ms, with burst (set) periods of 10-100 ms.  Births are counted per
meter of relative Tx+Rx travel; lifetimes are drawn in meters of relative
travel and expire on the set grid, so a dead MPC's recorded lifetime always
equals (death_set - birth_set) * T_r * (v_tx + v_rx).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import statdist
from .errors import ConfigError, GridOverflowError
from .pulse import SounderPulse
from .scenarios import ScenarioModel, group_of
from .statdist import eval_lambda, eval_ppf, substream

C0 = 299_792_458.0  # m/s
DEFAULT_BANDWIDTH_HZ = 1e9
DEFAULT_CARRIER_HZ = 5.7e9
# Per-vehicle speed floor below which newborn MPCs are not counted, mirroring
# the data exclusion used when the models were fitted.
SPEED_EXCLUSION_MS = 5.0 / 3.6


def db_to_power(db: float) -> float:
    return 10.0 ** (db / 10.0)


def db_to_amplitude(db: float) -> float:
    return 10.0 ** (db / 20.0)


@dataclass(frozen=True)
class Kinematics:
    """Constant-speed relative geometry of the Tx/Rx pair.

    closing=True models an oncoming link whose distance shrinks at the
    combined speed; otherwise (convoy) the distance holds at d0.
    """

    v_tx: float  # m/s
    v_rx: float  # m/s
    d0: float    # m
    closing: bool = False

    def __post_init__(self):
        if self.v_tx < 0 or self.v_rx < 0:
            raise ConfigError("vehicle speeds must be >= 0")
        if self.d0 <= 0:
            raise ConfigError("initial distance must be > 0")

    @property
    def v_sum(self) -> float:
        return self.v_tx + self.v_rx

    def distance(self, t: float) -> float:
        if self.closing:
            return max(self.d0 - self.v_sum * t, 0.0)
        return self.d0

    def traveled(self, t: float) -> float:
        """Relative distance covered since t=0 (negative before run start)."""
        return self.v_sum * t


@dataclass(frozen=True)
class SimConfig:
    scenario: ScenarioModel
    kinematics: Kinematics
    duration: float                    # s
    set_period: float = 0.05           # T_r, s; 10-100 ms
    snapshots_per_set: int = 6         # 6-13
    snapshot_interval: float = 0.5e-3  # s; 0.2-0.7 ms
    bandwidth_hz: float = DEFAULT_BANDWIDTH_HZ
    carrier_hz: float = DEFAULT_CARRIER_HZ
    delay_grid_bins: int | None = None  # None: auto-sized from the delay model
    noise_floor_db: float = -45.0       # noise power per delay bin, dB
    amplitude_decay_const_ns: float = 100.0
    shadowing_db: float = 3.0
    p_toward: float | None = None       # None: 1.0 oncoming group, 0.5 otherwise
    calibrate_birth: bool = False
    warmup_distance_m: float | None = None  # None: lifetime 99% quantile
    back_porch_ns: float = 32.0         # grid origin margin below the LOS delay
    reference_distance_m: float = 100.0  # free-space amplitude is 1 here
    seed: int = 0

    def __post_init__(self):
        if self.duration <= 0:
            raise ConfigError("duration must be > 0")
        if not (0.01 - 1e-12 <= self.set_period <= 0.1 + 1e-12):
            raise ConfigError(f"set_period must be 10-100 ms, got {self.set_period} s")
        if not (6 <= self.snapshots_per_set <= 13):
            raise ConfigError(f"snapshots_per_set must be 6-13, got {self.snapshots_per_set}")
        if not (0.2e-3 - 1e-12 <= self.snapshot_interval <= 0.7e-3 + 1e-12):
            raise ConfigError(
                f"snapshot_interval must be 0.2-0.7 ms, got {self.snapshot_interval} s"
            )
        if self.snapshot_interval * self.snapshots_per_set >= self.set_period:
            raise ConfigError("snapshot burst must fit inside the set period")
        if self.bandwidth_hz <= 0 or self.carrier_hz <= 0:
            raise ConfigError("bandwidth and carrier must be > 0")
        if self.p_toward is not None and not (0.0 <= self.p_toward <= 1.0):
            raise ConfigError("p_toward must lie in [0, 1]")
        u = self.delay_grid_bins
        if u is None:
            u = auto_grid_bins(self)
            object.__setattr__(self, "delay_grid_bins", u)
        if u < 64:
            raise ConfigError("delay grid needs at least 64 bins")
        q999 = float(eval_ppf(delay_spec(self.scenario), 0.999))
        if u * self.t_bin_ns <= q999:
            raise ConfigError(
                f"delay grid ({u} bins x {self.t_bin_ns:g} ns) cannot hold the "
                f"99.9% excess-delay quantile ({q999:.0f} ns)"
            )

    @property
    def t_bin_ns(self) -> float:
        return 1e9 / self.bandwidth_hz

    @property
    def doppler_sign_p_toward(self) -> float:
        if self.p_toward is not None:
            return self.p_toward
        return 1.0 if group_of(self.scenario.id) == "oncoming" else 0.5

    def los_amplitude(self, d: float) -> float:
        # Free-space 1/d roll-off, unity at the reference distance.
        return self.reference_distance_m / max(d, 1.0)


def delay_spec(scenario: ScenarioModel) -> statdist.DistSpec:
    return statdist.lognormal(scenario.excess_delay.psi, scenario.excess_delay.rho)


def lifetime_spec(scenario: ScenarioModel) -> statdist.DistSpec:
    return statdist.birnbaum_saunders(scenario.lifetime.eta, scenario.lifetime.gamma)


def doppler_spec(scenario: ScenarioModel) -> statdist.DistSpec:
    return statdist.weibull(scenario.rel_doppler.zeta, scenario.rel_doppler.kappa)


def auto_grid_bins(config: SimConfig) -> int:
    q999 = float(eval_ppf(delay_spec(config.scenario), 0.999))
    need_ns = q999 + config.back_porch_ns + 32.0
    bins = 256
    while bins * (1e9 / config.bandwidth_hz) <= need_ns:
        bins *= 2
    return bins


@dataclass(frozen=True)
class Mpc:
    """One ground-truth multipath component.

    delay_ns and phase are the current values and evolve over the MPC's life;
    the remaining attributes are fixed at birth.  doppler_hz > 0 means the
    path shortens (delay decreases).
    """

    id: int
    birth_time: float      # s (set-grid aligned)
    birth_set: int
    tau_x_ns: float        # excess delay at birth; 0 iff is_los
    nu_n: float            # signed relative Doppler
    doppler_hz: float      # signed
    lifetime_m: float      # Y, meters of relative travel
    amplitude: float       # linear, constant over the lifetime
    phase: float           # rad, current
    delay_ns: float        # absolute delay, current
    is_los: bool = False

    def __post_init__(self):
        if self.is_los:
            if self.tau_x_ns != 0.0:
                raise ValueError("LOS component must have zero excess delay")
        elif self.tau_x_ns < 0:
            raise ValueError("excess delay must be >= 0")
        if self.lifetime_m <= 0 or self.amplitude <= 0:
            raise ValueError("lifetime and amplitude must be > 0")
        if not (0.0 <= self.phase < 2.0 * math.pi):
            object.__setattr__(self, "phase", self.phase % (2.0 * math.pi))


def evolve_mpc(mpc: Mpc, dt: float, carrier_hz: float = DEFAULT_CARRIER_HZ) -> Mpc:
    """Advance an MPC by dt: the delay drifts by -(nu/f_c)*dt and the phase
    by 2*pi*nu*dt; the amplitude stays constant within the lifetime."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if dt == 0.0:
        return mpc
    new_delay = mpc.delay_ns - (mpc.doppler_hz / carrier_hz) * dt * 1e9
    new_phase = (mpc.phase + 2.0 * math.pi * mpc.doppler_hz * dt) % (2.0 * math.pi)
    return replace(mpc, delay_ns=new_delay, phase=new_phase)


@dataclass(frozen=True)
class CirSnapshot:
    t: float
    reference_delay_ns: float  # absolute delay of grid bin 0
    h: np.ndarray              # complex64, length U


@dataclass(frozen=True)
class RecordingSet:
    index: int
    t0: float
    d: float
    v_tx: float
    v_rx: float
    snapshots: tuple[CirSnapshot, ...]

    def __post_init__(self):
        times = [s.t for s in self.snapshots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot timestamps must strictly increase")


@dataclass(frozen=True)
class PlannedSet:
    index: int
    t0: float
    d: float
    snapshot_times: tuple[float, ...]


@dataclass(frozen=True)
class RunPlan:
    sets: tuple[PlannedSet, ...]
    set_period: float
    v_tx: float
    v_rx: float

    @property
    def v_sum(self) -> float:
        return self.v_tx + self.v_rx

    @property
    def meters_per_set(self) -> float:
        return self.v_sum * self.set_period


def plan_run(config: SimConfig) -> RunPlan:
    """Lay out recording-set start times and per-set kinematics over the run
    duration; a closing run is truncated once the distance reaches zero."""
    kin = config.kinematics
    sets = []
    n_max = int(math.floor(config.duration / config.set_period + 1e-9))
    for i in range(n_max):
        t0 = i * config.set_period
        if t0 >= config.duration:
            break
        d = kin.distance(t0)
        if kin.closing and d <= 0.0:
            break
        times = tuple(t0 + s * config.snapshot_interval for s in range(config.snapshots_per_set))
        sets.append(PlannedSet(index=i, t0=t0, d=d, snapshot_times=times))
    if not sets:
        raise ConfigError("run plan is empty (duration shorter than one set period)")
    return RunPlan(sets=tuple(sets), set_period=config.set_period, v_tx=kin.v_tx, v_rx=kin.v_rx)


def synth_snapshot(
    active: list[Mpc],
    t: float,
    reference_delay_ns: float,
    n_bins: int,
    pulse: SounderPulse,
    noise_power: float = 0.0,
    noise_rng: np.random.Generator | None = None,
) -> CirSnapshot:
    """Sampled CIR: h[u] = sum_k a_k e^{j phi_k} w(u T_b - tau_k) plus complex
    white noise of the given per-bin power.  Every active MPC's delay must sit
    on the grid."""
    h = np.zeros(n_bins, dtype=np.complex128)
    t_bin = pulse.t_bin_ns
    if active:
        delays = np.array([m.delay_ns for m in active])
        pos = (delays - reference_delay_ns) / t_bin
        bad = (pos < 0.0) | (pos > n_bins - 1)
        if np.any(bad):
            names = [active[i].id for i in np.flatnonzero(bad)]
            raise GridOverflowError(f"MPC delay outside grid for id(s) {names}")
        amps = np.array([m.amplitude for m in active])
        phases = np.array([m.phase for m in active])
        base = np.round(pos).astype(int)
        frac = pos - base
        offsets = pulse.bin_offsets()
        taps = pulse.amplitude((offsets[None, :] - frac[:, None]) * t_bin)
        contrib = (amps * np.exp(1j * phases))[:, None] * taps
        idx = base[:, None] + offsets[None, :]
        ok = (idx >= 0) & (idx < n_bins)
        np.add.at(h, idx[ok], contrib[ok])
    if noise_power > 0.0:
        if noise_rng is None:
            raise ValueError("noise_power > 0 requires a noise stream")
        scale = math.sqrt(noise_power / 2.0)
        noise = noise_rng.standard_normal(2 * n_bins)
        h += scale * (noise[:n_bins] + 1j * noise[n_bins:])
    return CirSnapshot(t=t, reference_delay_ns=reference_delay_ns, h=h.astype(np.complex64))


def expected_alive_scale(scenario: ScenarioModel, meters_per_set: float) -> float:
    """Mean alive residence E[ceil(Y / dm)] * dm in meters for lifetimes Y on
    a set grid of dm meters: the stationary alive count per unit birth rate,
    used by the birth calibration."""
    spec = lifetime_spec(scenario)
    dm = meters_per_set
    if dm <= 0:
        raise ConfigError("calibration requires relative motion (v_sum > 0)")
    total = 0.0
    k0 = 0
    block = 4096
    while True:
        ks = np.arange(k0, k0 + block) * dm
        surv = 1.0 - np.asarray(statdist.eval_cdf(spec, ks))
        total += float(surv.sum()) * dm
        if surv[-1] < 1e-9 or k0 > 10_000_000:
            break
        k0 += block
    return total


@dataclass
class GroundTruthMpc:
    id: int
    birth_set: int        # first recorded set
    death_set: int | None  # last alive set; None if alive at run end
    birth_time: float
    tau_x_ns: float
    nu_n: float
    doppler_hz: float
    lifetime_m: float
    amplitude: float
    is_los: bool


@dataclass
class GroundTruth:
    """Per-MPC birth attributes plus per-(set, MPC) true amplitude / mean
    delay / Doppler rows for extractor scoring."""

    mpcs: list[GroundTruthMpc]
    per_set: list[tuple[int, int, float, float, float]]  # (set, id, a, tau_ns, nu_hz)
    metadata: dict


@dataclass
class SimOutput:
    recording_sets: list[RecordingSet]
    truth: GroundTruth
    plan: RunPlan
    config: SimConfig


@dataclass
class _SimState:
    config: SimConfig
    streams: dict
    birth_rate_scale: float  # calibration: lambda_eff = number(d)/scale; 0 = off
    next_id: int = 1


def _birth_lambda(state: _SimState, d: float) -> float:
    config = state.config
    if state.birth_rate_scale > 0.0:
        return eval_lambda(config.scenario.number.poly, d) / state.birth_rate_scale
    return eval_lambda(config.scenario.birth.poly_at(d), d)


def step_births(state: _SimState, meter_index: int) -> list[Mpc]:
    """Newborn MPCs for one meter of relative travel.

    The count is Poisson with the (possibly calibrated) birth rate at the
    current distance; each newborn draws excess delay, relative Doppler,
    lifetime, phase and shadowed amplitude from its own named stream.  Births
    are placed uniformly within the meter and snapped to the next set start.
    No births are counted while either vehicle is below the 5 km/h exclusion
    floor.
    """
    config = state.config
    kin = config.kinematics
    if kin.v_tx < SPEED_EXCLUSION_MS or kin.v_rx < SPEED_EXCLUSION_MS:
        return []
    v = kin.v_sum
    t_meter = meter_index / v
    d = kin.distance(t_meter)
    lam = _birth_lambda(state, d)
    count = int(state.streams["birth_counts"].poisson(lam))
    if count == 0:
        return []

    scenario = config.scenario
    t_r = config.set_period
    f_ratio = config.carrier_hz / C0
    born: list[Mpc] = []
    u_place = state.streams["birth_placement"].random(count)
    tau_x = statdist.draw(delay_spec(scenario), count, state.streams["birth_delay"])
    nu_mag = statdist.draw(doppler_spec(scenario), count, state.streams["birth_doppler"])
    life = statdist.draw(lifetime_spec(scenario), count, state.streams["birth_lifetime"])
    phases = state.streams["birth_phase"].random(count) * 2.0 * math.pi
    shadows_db = state.streams["birth_shadow"].normal(0.0, config.shadowing_db, size=count)
    toward = state.streams["birth_sign"].random(count) < config.doppler_sign_p_toward

    for j in range(count):
        raw_t = (meter_index + u_place[j]) / v
        birth_set = math.ceil(raw_t / t_r - 1e-12)
        birth_time = birth_set * t_r
        d_birth = kin.distance(birth_time)
        sign = 1.0 if toward[j] else -1.0
        nu = sign * nu_mag[j] * f_ratio * v
        decay = 10.0 ** (-tau_x[j] / (10.0 * config.amplitude_decay_const_ns))
        amp = config.los_amplitude(d_birth) * decay * db_to_amplitude(shadows_db[j])
        mpc = Mpc(
            id=state.next_id,
            birth_time=birth_time,
            birth_set=birth_set,
            tau_x_ns=float(tau_x[j]),
            nu_n=float(sign * nu_mag[j]),
            doppler_hz=float(nu),
            lifetime_m=float(life[j]),
            amplitude=float(amp),
            phase=float(phases[j]),
            delay_ns=float(d_birth / C0 * 1e9 + tau_x[j]),
            is_los=False,
        )
        state.next_id += 1
        born.append(mpc)
    return born


def _alive_sets(lifetime_m: float, meters_per_set: float) -> int:
    """Number of consecutive sets an MPC is alive: ceil(Y / dm)."""
    return max(int(math.ceil(lifetime_m / meters_per_set - 1e-12)), 1)


def _delay_at(mpc: Mpc, t: float, carrier_hz: float) -> float:
    return mpc.delay_ns - (mpc.doppler_hz / carrier_hz) * (t - mpc.birth_time) * 1e9


def run_simulation(config: SimConfig) -> SimOutput:
    """Generate a full run: plan sets, drive the per-meter birth/death
    process (with a stationarity warm-up before t=0), synthesize noisy CIR
    snapshots, and record per-set ground truth.

    Deterministic for a given config seed.
    """
    plan = plan_run(config)
    kin = config.kinematics
    v = kin.v_sum
    t_r = config.set_period
    dm = plan.meters_per_set
    pulse = SounderPulse(config.bandwidth_hz)
    n_bins = config.delay_grid_bins
    noise_power = db_to_power(config.noise_floor_db)
    streams = {p: substream(config.seed, p) for p in statdist.STREAM_PURPOSES}

    birth_scale = 0.0
    if config.calibrate_birth and v > 0:
        birth_scale = expected_alive_scale(config.scenario, dm)

    state = _SimState(config=config, streams=streams, birth_rate_scale=birth_scale)

    # Birth process, including a warm-up stretch before t=0 so the population
    # is stationary from the first recorded set.  MPCs are stored in their
    # birth state; snapshot states come from the exact linear drift law.
    births_by_set: dict[int, list[Mpc]] = {}
    n_mpcs_total = 0
    last_set_index = plan.sets[-1].index
    if v > 0:
        warmup_m = config.warmup_distance_m
        if warmup_m is None:
            # The heavy lifetime tail contributes noticeably to the standing
            # population; warm up over its 99.99% quantile.
            warmup_m = float(eval_ppf(lifetime_spec(config.scenario), 0.9999))
            warmup_m = min(max(warmup_m, 50.0), 5000.0)
        first_meter = -int(math.ceil(warmup_m))
        last_meter = int(math.ceil(v * plan.sets[-1].t0)) + 1
        for meter in range(first_meter, last_meter):
            for mpc in step_births(state, meter):
                if mpc.birth_set > last_set_index:
                    continue
                if mpc.birth_set + _alive_sets(mpc.lifetime_m, dm) <= 0:
                    continue  # died before the run started
                births_by_set.setdefault(mpc.birth_set, []).append(mpc)
                n_mpcs_total += 1

    # LOS component: always present, excess delay 0, geometric delay d(t)/c0.
    nu_los = (config.carrier_hz / C0) * v if kin.closing else 0.0
    los = Mpc(
        id=0,
        birth_time=plan.sets[0].t0,
        birth_set=plan.sets[0].index,
        tau_x_ns=0.0,
        nu_n=1.0 if kin.closing else 0.0,
        doppler_hz=nu_los,
        lifetime_m=max(v * config.duration, 1.0) + 1.0,
        amplitude=config.los_amplitude(kin.distance(0.0)),
        phase=0.0,
        delay_ns=kin.distance(plan.sets[0].t0) / C0 * 1e9,
        is_los=True,
    )

    alive: dict[int, Mpc] = {}  # birth-state MPCs currently alive
    first_record: dict[int, int] = {}
    last_record: dict[int, int] = {}
    catalog: dict[int, Mpc] = {}
    per_set_rows: list[tuple[int, int, float, float, float]] = []
    recording_sets: list[RecordingSet] = []
    n_grid_exits = 0
    pending_sets = sorted(births_by_set)
    pending_pos = 0

    for pset in plan.sets:
        j = pset.index
        while pending_pos < len(pending_sets) and pending_sets[pending_pos] <= j:
            for mpc in births_by_set[pending_sets[pending_pos]]:
                alive[mpc.id] = mpc
                catalog[mpc.id] = mpc
            pending_pos += 1
        # expire lifetimes on the set grid: alive during set j iff
        # (j - birth_set) * dm < Y
        for mid in list(alive):
            m = alive[mid]
            if (j - m.birth_set) * dm >= m.lifetime_m - 1e-12:
                del alive[mid]

        los = replace(los, amplitude=config.los_amplitude(pset.d))
        t_first, t_last = pset.snapshot_times[0], pset.snapshot_times[-1]
        reference = kin.distance(t_first) / C0 * 1e9 - config.back_porch_ns

        # cull components that sit or drift off the observable grid this set
        for mid in list(alive):
            m = alive[mid]
            p0 = (_delay_at(m, t_first, config.carrier_hz) - reference) / config.t_bin_ns
            p1 = (_delay_at(m, t_last, config.carrier_hz) - reference) / config.t_bin_ns
            if min(p0, p1) < 0.0 or max(p0, p1) > n_bins - 1:
                del alive[mid]
                n_grid_exits += 1

        actors_birth = [los] + [alive[k] for k in sorted(alive)]
        snapshots = []
        delay_sums = np.zeros(len(actors_birth))
        for ts in pset.snapshot_times:
            current = [
                evolve_mpc(m, ts - m.birth_time, config.carrier_hz) for m in actors_birth
            ]
            # pin the LOS delay to the exact geometric value (identical to its
            # drift law for the linear distance trajectory, immune to rounding)
            current[0] = replace(current[0], delay_ns=kin.distance(ts) / C0 * 1e9)
            snapshots.append(
                synth_snapshot(
                    current, ts, reference, n_bins, pulse,
                    noise_power=noise_power, noise_rng=streams["noise"],
                )
            )
            delay_sums += np.array([m.delay_ns for m in current])

        n_snap = len(pset.snapshot_times)
        for m, dsum in zip(actors_birth, delay_sums):
            per_set_rows.append((j, m.id, m.amplitude, float(dsum) / n_snap, m.doppler_hz))
            first_record.setdefault(m.id, j)
            last_record[m.id] = j

        recording_sets.append(
            RecordingSet(
                index=j, t0=pset.t0, d=pset.d, v_tx=kin.v_tx, v_rx=kin.v_rx,
                snapshots=tuple(snapshots),
            )
        )

    truth_mpcs = [
        GroundTruthMpc(
            id=0,
            birth_set=plan.sets[0].index,
            death_set=None,
            birth_time=los.birth_time,
            tau_x_ns=0.0,
            nu_n=los.nu_n,
            doppler_hz=los.doppler_hz,
            lifetime_m=los.lifetime_m,
            amplitude=los.amplitude,
            is_los=True,
        )
    ]
    for mid in sorted(catalog):
        if mid not in first_record:
            continue  # culled before ever being recorded
        mpc = catalog[mid]
        nominal_death = mpc.birth_set + _alive_sets(mpc.lifetime_m, dm) - 1
        death: int | None = last_record[mid]
        if nominal_death > last_set_index and death == last_set_index:
            death = None  # censored by run end
        truth_mpcs.append(
            GroundTruthMpc(
                id=mid,
                birth_set=first_record[mid],
                death_set=death,
                birth_time=mpc.birth_time,
                tau_x_ns=mpc.tau_x_ns,
                nu_n=mpc.nu_n,
                doppler_hz=mpc.doppler_hz,
                lifetime_m=mpc.lifetime_m,
                amplitude=mpc.amplitude,
                is_los=False,
            )
        )

    metadata = {
        "scenario": str(config.scenario.id),
        "seed": config.seed,
        "duration": config.duration,
        "set_period": config.set_period,
        "snapshots_per_set": config.snapshots_per_set,
        "snapshot_interval": config.snapshot_interval,
        "bandwidth_hz": config.bandwidth_hz,
        "carrier_hz": config.carrier_hz,
        "delay_grid_bins": config.delay_grid_bins,
        "noise_floor_db": config.noise_floor_db,
        "amplitude_decay_const_ns": config.amplitude_decay_const_ns,
        "shadowing_db": config.shadowing_db,
        "p_toward": config.doppler_sign_p_toward,
        "calibrate_birth": config.calibrate_birth,
        "birth_rate_scale_m": birth_scale,
        "back_porch_ns": config.back_porch_ns,
        "reference_distance_m": config.reference_distance_m,
        "v_tx": kin.v_tx,
        "v_rx": kin.v_rx,
        "d0": kin.d0,
        "closing": kin.closing,
        "n_sets": len(recording_sets),
        "n_mpcs_born": n_mpcs_total,
        "n_grid_exit_deaths": n_grid_exits,
    }
    truth = GroundTruth(mpcs=truth_mpcs, per_set=per_set_rows, metadata=metadata)
    return SimOutput(recording_sets=recording_sets, truth=truth, plan=plan, config=config)
