"""Probability engine: density/CDF/sampling/fitting for every distribution
family used by the channel models, the three goodness-of-fit measures
(chi-square, Kolmogorov-Smirnov, CDF mean-square error), and the
distance-binned lambda(d) polynomial fit.

All samplers are pure functions of an explicit seed or generator; named
substreams derived from one master seed keep component counts and attribute
draws independently reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import optimize, special

from .errors import (
    DegenerateFitError,
    InsufficientDataError,
    ModelValidationError,
    UnsupportedFamilyError,
)
from .scenarios import LAMBDA_CAP, LambdaPoly

_SQRT2PI = math.sqrt(2.0 * math.pi)


class Family(str, Enum):
    POISSON = "poisson"
    DISCRETIZED_NORMAL = "discretized_normal"
    DISCRETIZED_GAMMA = "discretized_gamma"
    BIRNBAUM_SAUNDERS = "birnbaum_saunders"
    LOGNORMAL = "lognormal"
    WEIBULL = "weibull"
    EXPONENTIAL = "exponential"
    GAMMA = "gamma"


DISCRETE_FAMILIES = frozenset(
    {Family.POISSON, Family.DISCRETIZED_NORMAL, Family.DISCRETIZED_GAMMA}
)

# Families whose maximum-likelihood fit involves a shape parameter and a
# safeguarded scalar iteration; these need a minimum sample count.
SHAPE_FAMILIES = frozenset(
    {Family.WEIBULL, Family.GAMMA, Family.BIRNBAUM_SAUNDERS, Family.DISCRETIZED_GAMMA}
)

_PARAM_COUNT = {
    Family.POISSON: 1,
    Family.DISCRETIZED_NORMAL: 2,
    Family.DISCRETIZED_GAMMA: 2,
    Family.BIRNBAUM_SAUNDERS: 2,
    Family.LOGNORMAL: 2,
    Family.WEIBULL: 2,
    Family.EXPONENTIAL: 1,
    Family.GAMMA: 2,
}


@dataclass(frozen=True)
class DistSpec:
    """A distribution family with its parameter vector.

    Parameter order per family:
      poisson (lam), discretized_normal (mu, sigma), discretized_gamma
      (shape, scale), birnbaum_saunders (eta, gamma), lognormal (psi, rho),
      weibull (zeta, kappa), exponential (mean), gamma (shape, scale).
    """

    family: Family
    params: tuple[float, ...]

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        if len(params) != _PARAM_COUNT[family]:
            raise ModelValidationError(
                f"{family.value} takes {_PARAM_COUNT[family]} parameters, got {len(params)}"
            )
        if not all(np.isfinite(params)):
            raise ModelValidationError(f"{family.value} parameters must be finite: {params}")
        if family is Family.DISCRETIZED_NORMAL:
            if params[1] <= 0:
                raise ModelValidationError(f"sigma must be > 0, got {params[1]}")
        elif any(p <= 0 for p in params):
            raise ModelValidationError(
                f"{family.value} parameters must be positive, got {params}"
            )

    @property
    def is_discrete(self) -> bool:
        return self.family in DISCRETE_FAMILIES

    @property
    def n_params(self) -> int:
        return len(self.params)


def poisson(lam: float) -> DistSpec:
    return DistSpec(Family.POISSON, (lam,))


def discretized_normal(mu: float, sigma: float) -> DistSpec:
    return DistSpec(Family.DISCRETIZED_NORMAL, (mu, sigma))


def discretized_gamma(shape: float, scale: float) -> DistSpec:
    return DistSpec(Family.DISCRETIZED_GAMMA, (shape, scale))


def birnbaum_saunders(eta: float, gamma: float) -> DistSpec:
    return DistSpec(Family.BIRNBAUM_SAUNDERS, (eta, gamma))


def lognormal(psi: float, rho: float) -> DistSpec:
    return DistSpec(Family.LOGNORMAL, (psi, rho))


def weibull(zeta: float, kappa: float) -> DistSpec:
    return DistSpec(Family.WEIBULL, (zeta, kappa))


def exponential(mean: float) -> DistSpec:
    return DistSpec(Family.EXPONENTIAL, (mean,))


def gamma_dist(shape: float, scale: float) -> DistSpec:
    return DistSpec(Family.GAMMA, (shape, scale))


# --- density / CDF -----------------------------------------------------------

def _discretized_normal_z(mu: float, sigma: float) -> float:
    # Renormalization over k >= 0: discard the mass the rounded normal would
    # place below zero.
    return 1.0 - special.ndtr((-0.5 - mu) / sigma)


def eval_density(spec: DistSpec, x) -> np.ndarray | float:
    """pmf (discrete families, integer support) or pdf (continuous).

    Points outside the support return 0; non-integer points of a discrete
    family return 0.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.zeros_like(x)
    fam = spec.family

    if fam in DISCRETE_FAMILIES:
        is_int = (x >= 0) & (np.floor(x) == x)
        k = np.where(is_int, x, 0.0)
        if fam is Family.POISSON:
            (lam,) = spec.params
            logpmf = k * math.log(lam) - lam - special.gammaln(k + 1.0)
            vals = np.exp(logpmf)
        elif fam is Family.DISCRETIZED_NORMAL:
            mu, sigma = spec.params
            z = _discretized_normal_z(mu, sigma)
            vals = (
                special.ndtr((k + 0.5 - mu) / sigma) - special.ndtr((k - 0.5 - mu) / sigma)
            ) / z
        else:  # discretized gamma
            shape, scale = spec.params
            upper = special.gammainc(shape, (k + 0.5) / scale)
            lower = special.gammainc(shape, np.maximum(k - 0.5, 0.0) / scale)
            vals = upper - lower
        out = np.where(is_int, vals, 0.0)
    else:
        pos = x > 0
        xs = np.where(pos, x, 1.0)
        if fam is Family.LOGNORMAL:
            psi, rho = spec.params
            vals = np.exp(-((np.log(xs) - psi) ** 2) / (2 * rho * rho)) / (xs * rho * _SQRT2PI)
        elif fam is Family.WEIBULL:
            zeta, kappa = spec.params
            r = xs / zeta
            vals = (kappa / zeta) * r ** (kappa - 1.0) * np.exp(-(r**kappa))
        elif fam is Family.BIRNBAUM_SAUNDERS:
            eta, gam = spec.params
            a = np.sqrt(xs / eta)
            b = np.sqrt(eta / xs)
            xi = (a - b) / gam
            vals = (a + b) / (2 * gam * xs) * np.exp(-xi * xi / 2.0) / _SQRT2PI
        elif fam is Family.GAMMA:
            shape, scale = spec.params
            logpdf = (
                special.xlogy(shape - 1.0, xs)
                - xs / scale
                - special.gammaln(shape)
                - shape * math.log(scale)
            )
            vals = np.exp(logpdf)
        elif fam is Family.EXPONENTIAL:
            (m,) = spec.params
            vals = np.exp(-xs / m) / m
            pos = x >= 0  # exponential support includes 0
            vals = np.where(x >= 0, np.exp(-np.maximum(x, 0.0) / m) / m, 0.0)
        else:  # pragma: no cover
            raise UnsupportedFamilyError(str(fam))
        out = np.where(pos, vals, 0.0)

    return float(out[0]) if scalar else out


def eval_cdf(spec: DistSpec, x) -> np.ndarray | float:
    """Cumulative distribution; monotone non-decreasing with limits 0 and 1."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    fam = spec.family

    if fam in DISCRETE_FAMILIES:
        k = np.floor(np.maximum(x, -1.0))
        kk = np.maximum(k, 0.0)
        if fam is Family.POISSON:
            (lam,) = spec.params
            vals = special.pdtr(kk, lam)
        elif fam is Family.DISCRETIZED_NORMAL:
            mu, sigma = spec.params
            z = _discretized_normal_z(mu, sigma)
            lo = special.ndtr((-0.5 - mu) / sigma)
            vals = (special.ndtr((kk + 0.5 - mu) / sigma) - lo) / z
        else:
            shape, scale = spec.params
            vals = special.gammainc(shape, (kk + 0.5) / scale)
        out = np.where(k < 0, 0.0, vals)
    else:
        pos = x > 0
        xs = np.where(pos, x, 1.0)
        if fam is Family.LOGNORMAL:
            psi, rho = spec.params
            vals = special.ndtr((np.log(xs) - psi) / rho)
        elif fam is Family.WEIBULL:
            zeta, kappa = spec.params
            vals = -np.expm1(-((xs / zeta) ** kappa))
        elif fam is Family.BIRNBAUM_SAUNDERS:
            eta, gam = spec.params
            xi = (np.sqrt(xs / eta) - np.sqrt(eta / xs)) / gam
            vals = special.ndtr(xi)
        elif fam is Family.GAMMA:
            shape, scale = spec.params
            vals = special.gammainc(shape, xs / scale)
        elif fam is Family.EXPONENTIAL:
            (m,) = spec.params
            vals = -np.expm1(-xs / m)
        else:  # pragma: no cover
            raise UnsupportedFamilyError(str(fam))
        out = np.where(pos, vals, 0.0)

    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


def eval_ppf(spec: DistSpec, q) -> np.ndarray | float:
    """Quantile function; continuous families only (used for chi-square
    binning and exact-quantile test constructions)."""
    q = np.asarray(q, dtype=float)
    scalar = q.ndim == 0
    q = np.atleast_1d(q)
    if np.any((q <= 0) | (q >= 1)):
        raise ModelValidationError("quantile levels must lie strictly in (0, 1)")
    fam = spec.family
    if fam is Family.LOGNORMAL:
        psi, rho = spec.params
        out = np.exp(psi + rho * special.ndtri(q))
    elif fam is Family.WEIBULL:
        zeta, kappa = spec.params
        out = zeta * (-np.log1p(-q)) ** (1.0 / kappa)
    elif fam is Family.BIRNBAUM_SAUNDERS:
        eta, gam = spec.params
        z = special.ndtri(q)
        out = eta / 4.0 * (gam * z + np.sqrt((gam * z) ** 2 + 4.0)) ** 2
    elif fam is Family.GAMMA:
        shape, scale = spec.params
        out = scale * special.gammaincinv(shape, q)
    elif fam is Family.EXPONENTIAL:
        (m,) = spec.params
        out = -m * np.log1p(-q)
    else:
        raise UnsupportedFamilyError(f"no quantile function for {fam.value}")
    return float(out[0]) if scalar else out


# --- sampling ----------------------------------------------------------------

# Named substream purposes; the index is the spawn key, so each purpose gets a
# fixed, reproducible stream for a given master seed.
STREAM_PURPOSES = (
    "birth_counts",
    "birth_delay",
    "birth_doppler",
    "birth_lifetime",
    "birth_phase",
    "birth_shadow",
    "birth_sign",
    "birth_placement",
    "noise",
    "warmup",
    "generic",
)


def substream(seed: int, purpose: str) -> np.random.Generator:
    """Independent, reproducible random stream for one draw purpose."""
    if purpose not in STREAM_PURPOSES:
        raise ValueError(f"unknown stream purpose {purpose!r}")
    key = STREAM_PURPOSES.index(purpose)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


def draw(spec: DistSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n variates from spec using the caller's stream."""
    fam = spec.family
    if fam is Family.POISSON:
        return rng.poisson(spec.params[0], size=n).astype(float)
    if fam is Family.LOGNORMAL:
        psi, rho = spec.params
        return np.exp(rng.normal(psi, rho, size=n))
    if fam is Family.WEIBULL:
        zeta, kappa = spec.params
        return zeta * rng.weibull(kappa, size=n)
    if fam is Family.BIRNBAUM_SAUNDERS:
        eta, gam = spec.params
        z = rng.standard_normal(n)
        return eta / 4.0 * (gam * z + np.sqrt((gam * z) ** 2 + 4.0)) ** 2
    if fam is Family.EXPONENTIAL:
        return rng.exponential(spec.params[0], size=n)
    if fam is Family.GAMMA:
        shape, scale = spec.params
        return rng.gamma(shape, scale, size=n)
    if fam is Family.DISCRETIZED_GAMMA:
        shape, scale = spec.params
        return np.round(rng.gamma(shape, scale, size=n))
    if fam is Family.DISCRETIZED_NORMAL:
        mu, sigma = spec.params
        out = np.empty(n)
        filled = 0
        while filled < n:
            block = np.round(rng.normal(mu, sigma, size=max(n - filled, 16)))
            block = block[block >= 0]
            take = min(block.size, n - filled)
            out[filled : filled + take] = block[:take]
            filled += take
        return out
    raise UnsupportedFamilyError(str(fam))  # pragma: no cover


def sample(spec: DistSpec, n: int, seed: int | np.random.Generator) -> np.ndarray:
    """Deterministic sample of size n given (spec, n, seed)."""
    if n < 1:
        raise InsufficientDataError(f"sample size must be >= 1, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return draw(spec, n, rng)


# --- maximum-likelihood fitting ----------------------------------------------

def _check_samples(family: Family, samples: np.ndarray) -> np.ndarray:
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise InsufficientDataError("cannot fit a distribution to zero samples")
    if not np.all(np.isfinite(samples)):
        raise ValueError("samples must be finite")
    if family in DISCRETE_FAMILIES:
        if np.any(samples < 0) or np.any(np.floor(samples) != samples):
            raise ValueError(f"{family.value} requires non-negative integer samples")
    elif family is Family.EXPONENTIAL:
        if np.any(samples < 0):
            raise ValueError("exponential requires samples >= 0")
    else:
        if np.any(samples <= 0):
            raise ValueError(f"{family.value} requires samples > 0")
    if family in SHAPE_FAMILIES and samples.size < 10:
        raise InsufficientDataError(
            f"{family.value} fit needs >= 10 samples, got {samples.size}"
        )
    return samples


def _fit_weibull(x: np.ndarray) -> DistSpec:
    # Profile likelihood over the shape parameter; scale follows in closed
    # form.  Solved on log-scaled data for numerical range safety.
    logx = np.log(x)
    mean_logx = logx.mean()
    y = x / np.exp(mean_logx)  # geometric-mean scaling, shape-invariant
    logy = np.log(y)

    def g(kappa: float) -> float:
        w = y**kappa
        return float(np.sum(w * logy) / np.sum(w) - 1.0 / kappa - logy.mean())

    lo, hi = 1e-2, 8.0
    while g(hi) < 0 and hi < 1e4:
        hi *= 2.0
    while g(lo) > 0 and lo > 1e-6:
        lo /= 2.0
    if g(lo) > 0 or g(hi) < 0:
        raise DegenerateFitError("weibull profile equation has no root in range")
    kappa = optimize.brentq(g, lo, hi, xtol=1e-12, rtol=1e-12, maxiter=200)
    zeta = float(np.mean(x**kappa) ** (1.0 / kappa))
    return weibull(zeta, kappa)


def _fit_gamma(x: np.ndarray) -> DistSpec:
    s = math.log(x.mean()) - float(np.log(x).mean())
    if s <= 0:
        raise DegenerateFitError("gamma fit: degenerate log-moment spread")

    def g(k: float) -> float:
        return math.log(k) - float(special.digamma(k)) - s

    # Minka's closed-form start, then a bracketing solve.
    k0 = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    lo, hi = k0 / 8.0, k0 * 8.0
    while g(lo) < 0 and lo > 1e-9:
        lo /= 4.0
    while g(hi) > 0 and hi < 1e9:
        hi *= 4.0
    shape = optimize.brentq(g, lo, hi, xtol=1e-12, rtol=1e-12, maxiter=200)
    return gamma_dist(shape, x.mean() / shape)


def _fit_birnbaum_saunders(x: np.ndarray) -> DistSpec:
    # Scale MLE solves a scalar equation whose root lies between the harmonic
    # and arithmetic means; the bracket doubles as the safeguard.  Tolerance
    # 1e-9 relative on the parameter.
    s = float(x.mean())
    r = float(1.0 / np.mean(1.0 / x))

    def k_fn(b: float) -> float:
        return float(1.0 / np.mean(1.0 / (x + b)))

    def g(b: float) -> float:
        k = k_fn(b)
        return b * b - b * (2.0 * r + k) + r * (s + k)

    lo = r * (1.0 - 1e-12)
    hi = s * (1.0 + 1e-12)
    if hi <= lo:
        raise DegenerateFitError("birnbaum-saunders fit: harmonic mean >= mean")
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        eta = lo
    elif ghi == 0.0:
        eta = hi
    else:
        if glo * ghi > 0:  # widen once; the root is known to be near [r, s]
            lo, hi = r * 0.5, s * 2.0
            if g(lo) * g(hi) > 0:
                raise DegenerateFitError("birnbaum-saunders profile equation has no root")
        eta = optimize.brentq(g, lo, hi, xtol=1e-9 * s, rtol=1e-12, maxiter=200)
    gam2 = s / eta + eta / r - 2.0
    if gam2 <= 0:
        raise DegenerateFitError("birnbaum-saunders fit produced non-positive shape")
    return birnbaum_saunders(float(eta), math.sqrt(gam2))


def fit(family: Family | str, samples) -> DistSpec:
    """Maximum-likelihood fit of one family to samples.

    Poisson and exponential use the sample mean; log-normal uses mean/std of
    ln x; Weibull, gamma and Birnbaum-Saunders use safeguarded scalar profile
    iterations (bracketed Brent, tolerance 1e-9 relative, <= 200 iterations).
    The discretized count families use moment matching of the underlying
    continuous law, which is the estimator the comparison fits need.
    """
    family = Family(family)
    x = _check_samples(family, samples)
    spread = float(np.ptp(x))

    if family is Family.POISSON:
        lam = float(x.mean())
        if lam <= 0:
            raise DegenerateFitError("poisson fit: all counts are zero")
        return poisson(lam)
    if family is Family.EXPONENTIAL:
        m = float(x.mean())
        if m <= 0:
            raise DegenerateFitError("exponential fit: all samples are zero")
        return exponential(m)
    if family is Family.LOGNORMAL:
        if spread == 0.0:
            raise DegenerateFitError("lognormal fit: all samples equal")
        logx = np.log(x)
        return lognormal(float(logx.mean()), float(logx.std()))
    if family is Family.DISCRETIZED_NORMAL:
        if spread == 0.0:
            raise DegenerateFitError("discretized normal fit: all samples equal")
        return discretized_normal(float(x.mean()), float(x.std()))
    if family is Family.DISCRETIZED_GAMMA:
        m, v = float(x.mean()), float(x.var())
        if v <= 0 or m <= 0:
            raise DegenerateFitError("discretized gamma fit: degenerate samples")
        return discretized_gamma(m * m / v, v / m)
    if spread == 0.0:
        raise DegenerateFitError(f"{family.value} fit: all samples equal")
    if family is Family.WEIBULL:
        return _fit_weibull(x)
    if family is Family.GAMMA:
        return _fit_gamma(x)
    if family is Family.BIRNBAUM_SAUNDERS:
        return _fit_birnbaum_saunders(x)
    raise UnsupportedFamilyError(str(family))  # pragma: no cover


# --- goodness of fit ---------------------------------------------------------

@dataclass(frozen=True)
class GofResult:
    statistic: float
    p_value: float
    reject_at_5pct: bool
    n: int
    dof: int | None = None


def _merge_bins(observed: np.ndarray, expected: np.ndarray, min_expected: float):
    """Greedy left-to-right merge until every bin's expected count reaches
    min_expected; a trailing short group is folded into its predecessor."""
    obs_groups: list[float] = []
    exp_groups: list[float] = []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            obs_groups.append(acc_o)
            exp_groups.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0:
        if obs_groups:
            obs_groups[-1] += acc_o
            exp_groups[-1] += acc_e
        else:
            obs_groups.append(acc_o)
            exp_groups.append(acc_e)
    return np.asarray(obs_groups), np.asarray(exp_groups)


def chi2_gof(
    samples,
    spec: DistSpec,
    significance: float = 0.05,
    n_fitted: int | None = None,
) -> GofResult:
    """Pearson chi-square goodness-of-fit test.

    Bins are merged until every expected count is >= 5.  Degrees of freedom
    are bins - 1 - n_fitted; n_fitted defaults to the family's parameter
    count (assuming spec was fitted from these samples, which is how the
    extraction pipeline uses it).  Pass n_fitted=0 when testing against an
    a-priori distribution.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 30:
        raise InsufficientDataError(f"chi-square test needs n >= 30, got {x.size}")
    n = x.size
    if n_fitted is None:
        n_fitted = spec.n_params

    if spec.is_discrete:
        if np.any(x < 0) or np.any(np.floor(x) != x):
            raise ValueError("discrete chi-square test requires integer samples >= 0")
        kmax = int(x.max())
        ks = np.arange(kmax + 1)
        probs = eval_density(spec, ks.astype(float))
        tail = max(1.0 - eval_cdf(spec, float(kmax)), 0.0)
        cell_probs = np.concatenate([probs, [tail]])
        counts = np.bincount(x.astype(int), minlength=kmax + 1).astype(float)
        observed = np.concatenate([counts, [0.0]])
        expected = n * cell_probs
    else:
        k_target = int(min(max(4, math.ceil(2.0 * n**0.4)), n // 5))
        edges = eval_ppf(spec, np.arange(1, k_target) / k_target)
        observed = np.histogram(x, bins=np.concatenate([[-np.inf], edges, [np.inf]]))[0].astype(float)
        expected = np.full(k_target, n / k_target)

    obs_g, exp_g = _merge_bins(observed, expected, 5.0)
    if obs_g.size < 3:
        raise InsufficientDataError(
            f"chi-square test needs >= 3 usable bins, got {obs_g.size}"
        )
    dof = obs_g.size - 1 - n_fitted
    if dof < 1:
        raise InsufficientDataError(
            f"chi-square test has no degrees of freedom left ({obs_g.size} bins, {n_fitted} fitted params)"
        )
    stat = float(np.sum((obs_g - exp_g) ** 2 / exp_g))
    p = float(special.chdtrc(dof, stat))
    return GofResult(stat, p, p < significance, n, dof)


def ks_test(samples, spec: DistSpec, significance: float = 0.05) -> GofResult:
    """One-sample Kolmogorov-Smirnov test with asymptotic p-value.

    Continuous families only.
    """
    if spec.is_discrete:
        raise UnsupportedFamilyError(
            f"KS test requires a continuous family, got {spec.family.value}"
        )
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 10:
        raise InsufficientDataError(f"KS test needs n >= 10, got {n}")
    cdf = eval_cdf(spec, x)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - cdf)
    d_minus = np.max(cdf - (i - 1) / n)
    stat = float(max(d_plus, d_minus))
    p = float(special.kolmogorov(math.sqrt(n) * stat))
    return GofResult(stat, p, p < significance, n, dof=None)


def cdf_mse(samples, spec: DistSpec) -> float:
    """Mean squared deviation between the empirical CDF (evaluated as
    (i - 1/2)/n at the sorted sample points) and the model CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 2:
        raise InsufficientDataError(f"cdf_mse needs n >= 2, got {n}")
    emp = (np.arange(1, n + 1) - 0.5) / n
    model = eval_cdf(spec, x)
    return float(np.mean((emp - model) ** 2))


# --- lambda(d) polynomials ----------------------------------------------------

def eval_lambda(poly: LambdaPoly, d, cap: float = LAMBDA_CAP) -> np.ndarray | float:
    """Evaluate lambda(d) = p0 + p1 d + p2 d^2 with d clamped into the
    polynomial's valid range and the result clamped into [0, cap]."""
    d = np.asarray(d, dtype=float)
    scalar = d.ndim == 0
    lo, hi = poly.valid_range
    dc = np.clip(d, lo, hi)
    val = poly.p0 + poly.p1 * dc + poly.p2 * dc * dc
    val = np.clip(val, 0.0, cap)
    return float(val) if scalar else val


def fit_lambda(bin_stats, degree: int) -> tuple[LambdaPoly, float]:
    """Count-weighted least-squares polynomial over distance-bin means.

    bin_stats is an iterable of (d_center [m], mean, count).  Returns the
    fitted polynomial (valid over the observed bin span) and the unweighted
    mean squared residual of the curve against the bin means, matching the
    table semantics of the built-in catalog.
    """
    if degree not in (1, 2):
        raise ValueError(f"degree must be 1 or 2, got {degree}")
    stats = [(float(d), float(m), float(c)) for d, m, c in bin_stats]
    if len(stats) < degree + 2:
        raise InsufficientDataError(
            f"lambda fit of degree {degree} needs >= {degree + 2} bins, got {len(stats)}"
        )
    d = np.array([s[0] for s in stats])
    m = np.array([s[1] for s in stats])
    c = np.array([s[2] for s in stats])
    if np.any(c <= 0):
        raise ValueError("bin counts must be positive")
    coeffs = np.polynomial.polynomial.polyfit(d, m, deg=degree, w=np.sqrt(c))
    p0, p1 = float(coeffs[0]), float(coeffs[1])
    p2 = float(coeffs[2]) if degree == 2 else 0.0
    poly = LambdaPoly(p0, p1, p2, valid_range=(float(d.min()), float(d.max())))
    fitted = p0 + p1 * d + p2 * d * d
    mse = float(np.mean((fitted - m) ** 2))
    return poly, mse
