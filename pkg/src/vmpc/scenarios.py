"""Scenario catalog: the eight vehicular scenario identities and their fitted
per-scenario parameter sets (MPC count and birth-rate polynomials, lifetime,
excess delay and relative Doppler distributions), plus load/save of
user-defined models in a JSON-shaped text format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import ModelFormatError, ModelValidationError

# Default distance support of the fitted polynomials, meters.  Evaluation
# outside this range clamps the distance to the nearest endpoint.
DEFAULT_VALID_RANGE = (10.0, 500.0)

# Cap applied to evaluated lambda(d).  The H2I rows carry a literal quadratic
# coefficient that blows up past ~50 m; values are clamped here rather than
# rewriting the stored coefficients.
LAMBDA_CAP = 60.0


class ScenarioId(str, Enum):
    """The eight measured vehicular communication scenarios."""

    H2I = "H2I"  # highway to infrastructure
    HCT = "HCT"  # highway convoy traffic
    HOT = "HOT"  # highway oncoming traffic
    RCT = "RCT"  # rural convoy traffic
    ROT = "ROT"  # rural oncoming traffic
    TCT = "TCT"  # tunnel convoy traffic
    UCT = "UCT"  # urban convoy traffic
    UOT = "UOT"  # urban oncoming traffic

    def __str__(self) -> str:  # round-trips through str()
        return self.value


# Doppler behavior groups: oncoming links show relative Dopplers pinned near 1,
# convoy and urban links show curved distributions with both signs plausible.
SCENARIO_GROUPS: dict[str, tuple[ScenarioId, ...]] = {
    "oncoming": (ScenarioId.H2I, ScenarioId.HOT, ScenarioId.ROT),
    "convoy": (ScenarioId.HCT, ScenarioId.RCT, ScenarioId.TCT),
    "urban": (ScenarioId.UCT, ScenarioId.UOT),
}


def group_of(scenario: ScenarioId) -> str:
    for name, members in SCENARIO_GROUPS.items():
        if scenario in members:
            return name
    raise ModelValidationError(f"unknown scenario {scenario!r}")


@dataclass(frozen=True)
class LambdaPoly:
    """Distance polynomial lambda(d) = p0 + p1*d + p2*d^2.

    p0 is dimensionless, p1 per meter, p2 per meter^2.  Evaluation clamps d
    into valid_range and the result into [0, cap] (see statdist.eval_lambda).
    """

    p0: float
    p1: float
    p2: float = 0.0
    valid_range: tuple[float, float] = DEFAULT_VALID_RANGE

    def __post_init__(self):
        lo, hi = self.valid_range
        if not (lo < hi):
            raise ModelValidationError(
                f"valid_range must be a non-empty interval, got {self.valid_range}"
            )


@dataclass(frozen=True)
class BirthSegment:
    """One distance interval [d_min, d_max) with its birth-rate polynomial."""

    d_min: float
    d_max: float
    poly: LambdaPoly

    def __post_init__(self):
        if not (self.d_min < self.d_max):
            raise ModelValidationError(
                f"birth segment interval [{self.d_min}, {self.d_max}) is empty"
            )


@dataclass(frozen=True)
class BirthRateModel:
    """Birth rate lambda(d) in newborn MPCs per meter of relative travel.

    Most scenarios use a single segment; UOT uses two segments with a
    crossover at 300 m (rising below, falling above).
    """

    segments: tuple[BirthSegment, ...]

    def __post_init__(self):
        if not self.segments:
            raise ModelValidationError("birth model needs at least one segment")
        segs = self.segments
        for a, b in zip(segs, segs[1:]):
            if b.d_min != a.d_max:
                raise ModelValidationError(
                    "birth segments must cover a contiguous range without overlap: "
                    f"[{a.d_min},{a.d_max}) followed by [{b.d_min},{b.d_max})"
                )

    def poly_at(self, d: float) -> LambdaPoly:
        """Polynomial for distance d; d outside the covered range uses the
        nearest segment."""
        segs = self.segments
        if d < segs[0].d_min:
            return segs[0].poly
        for seg in segs:
            if seg.d_min <= d < seg.d_max:
                return seg.poly
        return segs[-1].poly


@dataclass(frozen=True)
class NumberModel:
    """Number-of-MPCs model: Poisson lambda(d) polynomial plus the mean
    per-bin standard deviation observed around it."""

    poly: LambdaPoly
    stdev: float

    def __post_init__(self):
        if self.stdev < 0:
            raise ModelValidationError(f"number stdev must be >= 0, got {self.stdev}")


@dataclass(frozen=True)
class LifetimeModel:
    """Birnbaum-Saunders lifetime parameters: eta (scale, meters of relative
    travel) and gamma (shape)."""

    eta: float
    gamma: float

    def __post_init__(self):
        if self.eta <= 0 or self.gamma <= 0:
            raise ModelValidationError(
                f"lifetime requires eta>0 and gamma>0, got ({self.eta}, {self.gamma})"
            )


@dataclass(frozen=True)
class ExcessDelayModel:
    """Log-normal excess-delay parameters: psi (ln-ns location) and rho
    (ln-ns scale)."""

    psi: float
    rho: float

    def __post_init__(self):
        if self.rho <= 0:
            raise ModelValidationError(f"excess delay requires rho>0, got {self.rho}")


@dataclass(frozen=True)
class RelDopplerModel:
    """Weibull relative-Doppler parameters: zeta (scale) and kappa (shape),
    both dimensionless."""

    zeta: float
    kappa: float

    def __post_init__(self):
        if self.zeta <= 0 or self.kappa <= 0:
            raise ModelValidationError(
                f"rel_doppler requires zeta>0 and kappa>0, got ({self.zeta}, {self.kappa})"
            )


@dataclass(frozen=True)
class ScenarioModel:
    """Complete per-scenario parameter set."""

    id: ScenarioId
    number: NumberModel
    birth: BirthRateModel
    lifetime: LifetimeModel
    excess_delay: ExcessDelayModel
    rel_doppler: RelDopplerModel
    # Extra free-form notes carried through save/load.
    notes: str = field(default="", compare=False)


# --- built-in tables ---------------------------------------------------------
# Number-of-MPCs rows: (stdev, p0, p1, p2).
_NUMBER_TABLE: dict[ScenarioId, tuple[float, float, float, float]] = {
    ScenarioId.H2I: (2.08, 18.9, -5.37e-2, 3.99),
    ScenarioId.HCT: (1.63, 10.2, -1.62e-2, 0.0),
    ScenarioId.HOT: (0.92, 7.97, -2.14e-2, 1.54e-5),
    ScenarioId.RCT: (1.38, 9.73, -1.70e-2, 0.0),
    ScenarioId.ROT: (1.62, 7.11, -0.95e-2, 0.0),
    ScenarioId.TCT: (0.87, 12.2, 0.0, 0.0),
    ScenarioId.UCT: (1.69, 14.5, -2.61e-2, 0.0),
    ScenarioId.UOT: (1.82, 16.9, -3.05e-2, 0.0),
}

# Birth-rate rows: (p0, p1, p2).  UOT is split: the "B" polynomial rises below
# the 300 m crossover, the "A" polynomial falls above it.
_BIRTH_TABLE: dict[ScenarioId, tuple[float, float, float]] = {
    ScenarioId.H2I: (15.8, -5.45e-2, 5.21),
    ScenarioId.HCT: (7.26, -1.25e-2, 0.0),
    ScenarioId.HOT: (5.26, -1.77e-2, 1.58e-5),
    ScenarioId.RCT: (6.90, -1.25e-2, 0.0),
    ScenarioId.ROT: (3.49, -0.34e-2, 0.0),
    ScenarioId.TCT: (9.82, -0.61e-2, 0.0),
    ScenarioId.UCT: (13.8, -2.86e-2, 0.0),
}
_UOT_BIRTH_LOW = (9.01e-1, 6.13e-2, 0.0)   # below 300 m, rising
_UOT_BIRTH_HIGH = (41.1, -6.93e-2, 0.0)    # above 300 m, falling
UOT_BIRTH_CROSSOVER_M = 300.0

# Documented alternative for the sparse tunnel birth data: a constant rate.
TCT_CONSTANT_BIRTH_LAMBDA = 7.5

# Lifetime / excess delay / relative Doppler rows:
# (eta, gamma, psi, rho, zeta, kappa).
_ATTRIBUTE_TABLE: dict[ScenarioId, tuple[float, float, float, float, float, float]] = {
    ScenarioId.H2I: (13.62, 1.867, 3.110, 2.096, 1.041, 2.679),
    ScenarioId.HCT: (52.07, 1.355, 2.071, 1.718, 0.152, 0.910),
    ScenarioId.HOT: (22.01, 2.319, 2.160, 1.534, 0.993, 3.517),
    ScenarioId.RCT: (19.52, 2.031, 2.041, 1.600, 0.289, 0.862),
    ScenarioId.ROT: (10.87, 2.169, 1.955, 1.399, 1.061, 2.650),
    ScenarioId.TCT: (4.554, 2.011, 3.021, 1.435, 0.414, 1.013),
    ScenarioId.UCT: (2.248, 2.789, 3.288, 1.385, 1.134, 1.051),
    ScenarioId.UOT: (3.999, 2.539, 2.709, 1.435, 1.317, 1.306),
}


def builtin_model(scenario: ScenarioId | str, *, tct_constant_birth: bool = False) -> ScenarioModel:
    """Built-in parameter set for one of the eight scenarios.

    tct_constant_birth swaps the fitted TCT birth polynomial for the
    documented constant-7.5 alternative (the tunnel birth data is sparse and a
    constant rate is equally defensible).
    """
    scenario = ScenarioId(scenario)
    lo, hi = DEFAULT_VALID_RANGE
    stdev, n0, n1, n2 = _NUMBER_TABLE[scenario]
    number = NumberModel(poly=LambdaPoly(n0, n1, n2), stdev=stdev)

    if scenario is ScenarioId.UOT:
        xover = UOT_BIRTH_CROSSOVER_M
        low = LambdaPoly(*_UOT_BIRTH_LOW, valid_range=(lo, xover))
        high = LambdaPoly(*_UOT_BIRTH_HIGH, valid_range=(xover, hi))
        birth = BirthRateModel(
            segments=(
                BirthSegment(0.0, xover, low),
                BirthSegment(xover, float("inf"), high),
            )
        )
    elif scenario is ScenarioId.TCT and tct_constant_birth:
        poly = LambdaPoly(TCT_CONSTANT_BIRTH_LAMBDA, 0.0, 0.0)
        birth = BirthRateModel(segments=(BirthSegment(0.0, float("inf"), poly),))
    else:
        b0, b1, b2 = _BIRTH_TABLE[scenario]
        poly = LambdaPoly(b0, b1, b2)
        birth = BirthRateModel(segments=(BirthSegment(0.0, float("inf"), poly),))

    eta, gamma, psi, rho, zeta, kappa = _ATTRIBUTE_TABLE[scenario]
    return ScenarioModel(
        id=scenario,
        number=number,
        birth=birth,
        lifetime=LifetimeModel(eta, gamma),
        excess_delay=ExcessDelayModel(psi, rho),
        rel_doppler=RelDopplerModel(zeta, kappa),
    )


def all_builtin_models() -> list[ScenarioModel]:
    return [builtin_model(s) for s in ScenarioId]


# --- structured-text model files --------------------------------------------

def _poly_to_dict(p: LambdaPoly) -> dict:
    return {"p0": p.p0, "p1": p.p1, "p2": p.p2, "valid_range": list(p.valid_range)}


def model_to_dict(model: ScenarioModel) -> dict:
    return {
        "id": str(model.id),
        "number": {"poly": _poly_to_dict(model.number.poly), "stdev": model.number.stdev},
        "birth": {
            "segments": [
                {"d_min": s.d_min, "d_max": s.d_max, "poly": _poly_to_dict(s.poly)}
                for s in model.birth.segments
            ]
        },
        "lifetime": {"eta": model.lifetime.eta, "gamma": model.lifetime.gamma},
        "excess_delay": {"psi": model.excess_delay.psi, "rho": model.excess_delay.rho},
        "rel_doppler": {"zeta": model.rel_doppler.zeta, "kappa": model.rel_doppler.kappa},
        "notes": model.notes,
    }


def _require(mapping: dict, key: str, context: str):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ModelFormatError(f"missing required field '{context}{key}'")
    return mapping[key]


def _number(mapping: dict, key: str, context: str) -> float:
    value = _require(mapping, key, context)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelFormatError(f"field '{context}{key}' must be a number, got {value!r}")
    return float(value)


def _poly_from_dict(d: dict, context: str) -> LambdaPoly:
    rng = _require(d, "valid_range", context)
    if (
        not isinstance(rng, (list, tuple))
        or len(rng) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in rng)
    ):
        raise ModelFormatError(f"field '{context}valid_range' must be [lo, hi]")
    return LambdaPoly(
        p0=_number(d, "p0", context),
        p1=_number(d, "p1", context),
        p2=_number(d, "p2", context),
        valid_range=(float(rng[0]), float(rng[1])),
    )


def model_from_dict(data: dict) -> ScenarioModel:
    raw_id = _require(data, "id", "")
    try:
        scenario = ScenarioId(raw_id)
    except ValueError as exc:
        raise ModelFormatError(f"field 'id' must be one of {[s.value for s in ScenarioId]}, got {raw_id!r}") from exc

    number_d = _require(data, "number", "")
    number = NumberModel(
        poly=_poly_from_dict(_require(number_d, "poly", "number."), "number.poly."),
        stdev=_number(number_d, "stdev", "number."),
    )

    birth_d = _require(data, "birth", "")
    raw_segments = _require(birth_d, "segments", "birth.")
    if not isinstance(raw_segments, list) or not raw_segments:
        raise ModelFormatError("field 'birth.segments' must be a non-empty list")
    segments = []
    for i, seg in enumerate(raw_segments):
        ctx = f"birth.segments[{i}]."
        segments.append(
            BirthSegment(
                d_min=_number(seg, "d_min", ctx),
                d_max=_number(seg, "d_max", ctx),
                poly=_poly_from_dict(_require(seg, "poly", ctx), ctx + "poly."),
            )
        )
    birth = BirthRateModel(segments=tuple(segments))

    life_d = _require(data, "lifetime", "")
    delay_d = _require(data, "excess_delay", "")
    dopp_d = _require(data, "rel_doppler", "")
    return ScenarioModel(
        id=scenario,
        number=number,
        birth=birth,
        lifetime=LifetimeModel(_number(life_d, "eta", "lifetime."), _number(life_d, "gamma", "lifetime.")),
        excess_delay=ExcessDelayModel(_number(delay_d, "psi", "excess_delay."), _number(delay_d, "rho", "excess_delay.")),
        rel_doppler=RelDopplerModel(_number(dopp_d, "zeta", "rel_doppler."), _number(dopp_d, "kappa", "rel_doppler.")),
        notes=str(data.get("notes", "")),
    )


def save_model(model: ScenarioModel, path: str | Path) -> None:
    """Write a scenario model as a one-scenario JSON text file."""
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> ScenarioModel:
    """Read a scenario model file; save -> load is the identity."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ModelFormatError(f"model file {path} must contain a JSON object")
    return model_from_dict(data)
