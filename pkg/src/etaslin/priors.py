"""Priors expressed as links from standard-normal internal parameters.

Every model parameter ``eta`` is written as ``eta = F^{-1}(Phi(theta))`` where
``theta ~ N(0, 1)`` and ``F`` is the CDF of the desired prior. Pushing the
standard normal through the link therefore reproduces the prior exactly.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import (gammainc, gammaincc, gammainccinv, gammaincinv,
                           gammaln, ndtr, ndtri)

from .model import PARAM_NAMES

THETA_CLAMP = 8.0
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class PriorError(ValueError):
    pass


def _std_normal_logpdf(theta):
    return -0.5 * np.square(theta) - _LOG_SQRT_2PI


def _clamp(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(theta)):
        raise PriorError("internal parameter must be finite")
    if np.any(np.abs(theta) > THETA_CLAMP):
        warnings.warn(f"internal parameter beyond +/-{THETA_CLAMP} clamped",
                      RuntimeWarning, stacklevel=3)
        theta = np.clip(theta, -THETA_CLAMP, THETA_CLAMP)
    return theta


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


class PriorSpec:
    """Base class; subclasses define ``link``, ``jacobian`` and ``cdf``."""

    def link(self, theta):
        raise NotImplementedError

    def jacobian(self, theta):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def logpdf(self, x):
        raise NotImplementedError

    def sample(self, n, rng):
        return self.link(rng.standard_normal(n))

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(PriorSpec):
    low: float
    high: float

    def __post_init__(self):
        if not self.high > self.low:
            raise PriorError("uniform prior needs high > low")

    def link(self, theta):
        theta = _clamp(theta)
        w = self.high - self.low
        out = np.where(theta <= 0, self.low + w * ndtr(theta),
                       self.high - w * ndtr(-theta))
        return _scalar(out)

    def jacobian(self, theta):
        theta = _clamp(theta)
        return _scalar((self.high - self.low)
                       * np.exp(_std_normal_logpdf(theta)))

    def cdf(self, x):
        return _scalar(np.clip((np.asarray(x) - self.low)
                               / (self.high - self.low), 0.0, 1.0))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.low) & (x <= self.high)
        return _scalar(np.where(inside, -math.log(self.high - self.low),
                                -np.inf))

    def to_dict(self):
        return {"family": "uniform", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class Gamma(PriorSpec):
    """Gamma(shape, rate), optionally shifted: ``shift + Gamma``."""

    shape: float
    rate: float
    shift: float = 0.0

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise PriorError("gamma prior needs shape > 0 and rate > 0")

    def _std_variate(self, theta):
        # lower tail through P, upper tail through Q, so neither loses digits
        with np.errstate(under="ignore"):
            return np.where(theta <= 0,
                            gammaincinv(self.shape, ndtr(theta)),
                            gammainccinv(self.shape, ndtr(-theta)))

    def link(self, theta):
        theta = _clamp(theta)
        return _scalar(self.shift + self._std_variate(theta) / self.rate)

    def jacobian(self, theta):
        theta = _clamp(theta)
        x = self._std_variate(theta)
        if np.any(x <= 0) and self.shape > 1:
            raise PriorError("gamma density is zero at the linked value")
        with np.errstate(divide="ignore"):
            log_f = (math.log(self.rate) + (self.shape - 1.0) * np.log(x)
                     - x - gammaln(self.shape))
        return _scalar(np.exp(_std_normal_logpdf(theta) - log_f))

    def cdf(self, x):
        z = np.maximum((np.asarray(x, dtype=float) - self.shift) * self.rate,
                       0.0)
        return _scalar(gammainc(self.shape, z))

    def sf(self, x):
        z = np.maximum((np.asarray(x, dtype=float) - self.shift) * self.rate,
                       0.0)
        return _scalar(gammaincc(self.shape, z))

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.shift) * self.rate
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (math.log(self.rate) + (self.shape - 1.0) * np.log(z) - z
                   - gammaln(self.shape))
        return _scalar(np.where(z > 0, out, -np.inf))

    def to_dict(self):
        d = {"family": "gamma", "shape": self.shape, "rate": self.rate}
        if self.shift:
            d["shift"] = self.shift
        return d


@dataclass(frozen=True)
class LogNormal(PriorSpec):
    meanlog: float
    sdlog: float

    def __post_init__(self):
        if not self.sdlog > 0:
            raise PriorError("lognormal prior needs sdlog > 0")

    def link(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(~np.isfinite(theta)):
            raise PriorError("internal parameter must be finite")
        return _scalar(np.exp(self.meanlog + self.sdlog * theta))

    def jacobian(self, theta):
        return _scalar(self.sdlog * np.asarray(self.link(theta)))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return _scalar(ndtr((np.log(x) - self.meanlog) / self.sdlog))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lx = np.log(x)
            out = (-lx - math.log(self.sdlog) - _LOG_SQRT_2PI
                   - 0.5 * ((lx - self.meanlog) / self.sdlog) ** 2)
        return _scalar(np.where(x > 0, out, -np.inf))

    def to_dict(self):
        return {"family": "lognormal", "meanlog": self.meanlog,
                "sdlog": self.sdlog}


def link(theta, spec):
    return spec.link(theta)


def inverse_link(value, spec):
    """Internal value whose link equals ``value`` (upper tail kept exact)."""
    lower = np.asarray(spec.cdf(value), dtype=float)
    if hasattr(spec, "sf"):
        upper = np.asarray(spec.sf(value), dtype=float)
    else:
        upper = 1.0 - lower
    return _scalar(np.where(lower <= 0.5, ndtri(lower), -ndtri(upper)))


def link_jacobian(theta, spec):
    """Derivative of the natural parameter with respect to ``theta``."""
    jac = spec.jacobian(theta)
    if np.any(np.asarray(jac) <= 0):
        raise PriorError("link jacobian vanished (target density is zero)")
    return jac


def prior_from_dict(d):
    """Build a prior from a mapping such as ``{"family": "gamma", ...}``."""
    d = dict(d)
    family = str(d.pop("family", "")).lower().replace("_", "-")
    try:
        if family == "uniform":
            return Uniform(float(d["low"]), float(d["high"]))
        if family == "gamma":
            return Gamma(float(d["shape"]), float(d["rate"]),
                         float(d.get("shift", 0.0)))
        if family == "shifted-gamma":
            return Gamma(float(d["shape"]), float(d["rate"]),
                         float(d["shift"]))
        if family == "lognormal":
            return LogNormal(float(d["meanlog"]), float(d["sdlog"]))
    except KeyError as exc:
        raise PriorError(f"{family} prior missing field {exc.args[0]!r}")
    raise PriorError(f"unknown prior family {family!r}")


class PriorSet(tuple):
    """Five priors in (mu, K, alpha, c, p) order."""

    def __new__(cls, priors):
        priors = tuple(priors)
        if len(priors) != len(PARAM_NAMES):
            raise PriorError(f"need {len(PARAM_NAMES)} priors")
        return super().__new__(cls, priors)

    @classmethod
    def from_mapping(cls, mapping):
        missing = [k for k in PARAM_NAMES if k not in mapping]
        if missing:
            raise PriorError(f"priors missing for {missing}")
        return cls(m if isinstance(m, PriorSpec) else prior_from_dict(m)
                   for m in (mapping[k] for k in PARAM_NAMES))

    def link(self, theta):
        return np.array([s.link(t) for s, t in zip(self, theta)])

    def jacobian(self, theta):
        return np.array([s.jacobian(t) for s, t in zip(self, theta)])

    def to_dict(self):
        return {k: s.to_dict() for k, s in zip(PARAM_NAMES, self)}


def replicate_priors():
    """Uniform-based priors with a lognormal prior on K."""
    return PriorSet([Gamma(0.1, 0.1), LogNormal(-1.0, 2.03),
                     Uniform(0.0, 10.0), Uniform(0.0, 10.0),
                     Uniform(1.0, 10.0)])


def gamma_priors():
    """Scale-aware gamma priors for every parameter."""
    return PriorSet([Gamma(0.1, 1.0), Gamma(1.0, 0.5), Gamma(1.0, 0.5),
                     Gamma(0.1, 1.0), Gamma(0.1, 0.5, shift=1.0)])


def scaled_gamma_priors(gamma):
    """Gamma family with the same means as :func:`gamma_priors`.

    Larger ``gamma`` means smaller prior variance.
    """
    if not gamma > 0:
        raise PriorError("gamma scale must be positive")
    g = float(gamma)
    return PriorSet([Gamma(g, 10 * g), Gamma(2 * g, g), Gamma(2 * g, g),
                     Gamma(g, 10 * g), Gamma(g, 5 * g, shift=1.0)])


PRESETS = {"replicate": replicate_priors, "gamma": gamma_priors}


def match_lognormal_to_quantiles(q_low, q_high, p_low=0.01, p_high=0.99):
    """Lognormal whose ``p_low``/``p_high`` quantiles equal the inputs."""
    if not 0 < q_low < q_high:
        raise PriorError("need 0 < q_low < q_high")
    z_low, z_high = ndtri(p_low), ndtri(p_high)
    sdlog = (math.log(q_high) - math.log(q_low)) / (z_high - z_low)
    meanlog = math.log(q_low) - sdlog * z_low
    return LogNormal(meanlog, sdlog)


SUMMARY_PROBS = (0.01, 0.25, 0.5, 0.75, 0.99)


def _summarize(x):
    row = {"mean": float(np.mean(x)), "sd": float(np.std(x, ddof=1))}
    for q, v in zip(SUMMARY_PROBS, np.quantile(x, SUMMARY_PROBS)):
        row[f"q{q:g}"] = float(v)
    return row


def empirical_Kb_prior(n=1_000_000, seed=0, K_range=(0.0, 10.0),
                       c_range=(0.0, 10.0), p_range=(1.0, 10.0)):
    """Monte Carlo summary of ``K/(c (p - 1))`` under uniform K, c, p priors."""
    if n < 10_000:
        raise PriorError("need at least 1e4 draws")
    rng = np.random.default_rng(seed)
    K = rng.uniform(*K_range, size=n)
    c = rng.uniform(*c_range, size=n)
    p = rng.uniform(*p_range, size=n)
    return _summarize(K / (c * (p - 1.0)))


def prior_summary(spec, n=1_000_000, seed=0):
    """Mean, sd and quantiles of a prior, estimated from ``n`` link draws."""
    if n < 10_000:
        raise PriorError("need at least 1e4 draws")
    rng = np.random.default_rng(seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return _summarize(spec.sample(n, rng))
