"""Exact temporal ETAS quantities: kernels, intensity, compensator, likelihood.

The working parametrization is

    lambda(t) = mu + K * sum_{t_h < t} exp(alpha (m_h - M0)) ((t - t_h)/c + 1)^(-p)

with an unnormalized Omori kernel. :class:`LegacyEtasParams` carries the
normalized-kernel form, ``K c^(p-1)/(p-1) (t - t_h + c)^(-p)``.
"""

import math
from dataclasses import astuple, dataclass

import numpy as np
from scipy.special import exprel

PARAM_NAMES = ("mu", "K", "alpha", "c", "p")

# below this |p - 1| * L the Omori integral uses its series expansion
_SERIES_EPS = 1e-8


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class EtasParams:
    """Natural-scale ETAS parameters (mu, K, alpha, c, p)."""

    mu: float
    K: float
    alpha: float
    c: float
    p: float

    def __post_init__(self):
        vals = astuple(self)
        if not all(math.isfinite(v) for v in vals):
            raise ParameterError(f"non-finite parameter in {self}")
        if self.mu < 0 or self.K < 0 or self.alpha < 0:
            raise ParameterError("mu, K and alpha must be nonnegative")
        if self.c <= 0:
            raise ParameterError("c must be positive")
        # p == 1 is representable when p - 1 underflows; finite windows
        # keep every integral finite there
        if self.p < 1:
            raise ParameterError("p must be >= 1")

    def as_array(self):
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, values):
        return cls(*(float(v) for v in values))

    def as_dict(self):
        return dict(zip(PARAM_NAMES, astuple(self)))


@dataclass(frozen=True)
class LegacyEtasParams:
    """Normalized-kernel ETAS parameters."""

    mu: float
    K: float
    alpha: float
    c: float
    p: float

    def __post_init__(self):
        if min(self.mu, self.K, self.alpha, self.c) < 0:
            raise ParameterError("mu, K, alpha, c must be nonnegative")
        if self.p <= 1:
            raise ParameterError("legacy parametrization needs p > 1")


def convert_legacy(params):
    """Map normalized-kernel parameters to the working parametrization."""
    if params.p <= 1:
        raise ParameterError("conversion undefined at p = 1")
    if params.c <= 0:
        raise ParameterError("conversion needs c > 0")
    kb = params.K / (params.c * (params.p - 1.0))
    return EtasParams(params.mu, kb, params.alpha, params.c, params.p)


def _check_nonneg(dt):
    dt = np.asarray(dt, dtype=float)
    if np.any(dt < 0):
        raise ValueError("negative time lag; kernels are defined for dt >= 0")
    return dt


def omori_kernel(dt, c, p):
    """``(dt/c + 1)^(-p)``; 1 at ``dt = 0`` and decreasing."""
    if c <= 0:
        raise ValueError("c must be positive")
    dt = _check_nonneg(dt)
    out = np.exp(-p * np.log1p(dt / c))
    return out if out.ndim else float(out)


def exp_kernel(dt, alpha, beta):
    """Exponential time kernel ``beta * exp(-alpha dt)``."""
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be nonnegative")
    dt = _check_nonneg(dt)
    out = beta * np.exp(-alpha * dt)
    return out if out.ndim else float(out)


def magnitude_factor(m, K, alpha, M0):
    m = np.asarray(m, dtype=float)
    if np.any(m < M0):
        raise ValueError("magnitude below cutoff M0")
    out = K * np.exp(alpha * (m - M0))
    return out if out.ndim else float(out)


def _mean_truncated_exp(s, L):
    """Mean of y on [0, L] under density proportional to exp(-s y)."""
    sL = s * L
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        full = 1.0 / s - L / np.expm1(sL)
        series = L / 2.0 - s * L * L / 12.0
        inf_L = np.where(s > 0, 1.0 / s, np.inf)
    out = np.where(np.abs(sL) < 1e-4, series, full)
    return np.where(np.isinf(L), inf_L, out)


def log_omori_integral(x_lo, x_hi, c, p, grad=False):
    """Log of the Omori kernel integral over lags ``[x_lo, x_hi]``.

    Evaluated as ``log c - (p-1) log A + log h`` with ``A = x_lo/c + 1``,
    ``L = log((x_hi + c)/(x_lo + c))`` and ``h = L * exprel(-(p-1) L)``, which
    is stable for narrow bins far from the trigger and continuous through
    ``p = 1``. With ``grad=True`` also returns the derivatives of the log
    integral with respect to ``c`` and ``p``.
    """
    x_lo = np.asarray(x_lo, dtype=float)
    x_hi = np.asarray(x_hi, dtype=float)
    s = p - 1.0
    log_a = np.log1p(x_lo / c)
    with np.errstate(divide="ignore", invalid="ignore"):
        L = np.where(np.isinf(x_hi), np.inf,
                     np.log1p((x_hi - x_lo) / (x_lo + c)))
        finite = np.isfinite(L)
        h = np.where(finite, L * exprel(-s * np.where(finite, L, 0.0)),
                     1.0 / s if s > 0 else np.inf)
        log_i = math.log(c) - s * log_a + np.log(h)
    if not grad:
        return log_i
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        d_p = -log_a - _mean_truncated_exp(s, L)
        # exp(-sL)/h == 1/(L exprel(sL))
        tail = np.where(finite, 1.0 / (L * exprel(s * np.where(finite, L, 0.0))),
                        0.0)
        inv_hi = np.where(np.isinf(x_hi), 0.0, 1.0 / (x_hi + c))
        d_c = p / c - s / (x_lo + c) + tail * (inv_hi - 1.0 / (x_lo + c))
    return log_i, d_c, d_p


def omori_integral(t_lo, t_hi, t_h, c, p):
    """Integral of the Omori kernel triggered at ``t_h`` over ``[t_lo, t_hi]``.

    ``t_hi`` may be ``inf`` (requires ``p > 1``). Closed form, nonnegative and
    additive over adjacent bins.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    t_lo = np.asarray(t_lo, dtype=float)
    t_hi = np.asarray(t_hi, dtype=float)
    if np.any(t_lo < t_h) or np.any(t_hi < t_lo):
        raise ValueError("need t_h <= t_lo <= t_hi")
    if p <= 1 and np.any(np.isinf(t_hi)):
        raise ValueError("Omori integral to infinity diverges for p <= 1")
    out = np.exp(log_omori_integral(t_lo - t_h, t_hi - t_h, c, p))
    return out if out.ndim else float(out)


def segment_sums(values, n):
    """Per-target sums of pair values laid out as ``catalog.pairs`` orders
    them (target-major, each target's sources contiguous)."""
    out = np.zeros(n)
    if n > 1:
        starts = np.arange(1, n) * np.arange(0, n - 1) // 2
        out[1:] = np.add.reduceat(values, starts)
    return out


def _productivity(catalog, params):
    return params.K * np.exp(params.alpha * catalog.rel_magnitudes)


def event_intensities(catalog, params):
    """Conditional intensity at every event time (left limit)."""
    n = len(catalog)
    out = np.full(n, params.mu)
    if n < 2 or params.K == 0:
        return out
    target, source = catalog.pairs
    t = catalog.rel_times
    prod = _productivity(catalog, params)
    terms = prod[source] * np.exp(-params.p * np.log1p(
        (t[target] - t[source]) / params.c))
    return out + segment_sums(terms, n)


def conditional_intensity(t, catalog, params):
    """Ground intensity at time(s) ``t``; events at exactly ``t`` excluded."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float)) - catalog.window.t_start
    times = catalog.rel_times
    prod = _productivity(catalog, params)
    out = np.empty(t_arr.shape)
    for i, ti in enumerate(t_arr):
        k = int(np.searchsorted(times, ti, side="left"))
        terms = prod[:k] * np.exp(-params.p * np.log1p((ti - times[:k])
                                                        / params.c))
        out[i] = params.mu + math.fsum(terms)
    return out if np.ndim(t) else float(out[0])


def triggered_mass(catalog, params, t_end=None):
    """Expected offspring of each event inside ``[t_h, t_end]``."""
    if t_end is None:
        t_end = catalog.window.length
    x_hi = np.maximum(t_end - catalog.rel_times, 0.0)
    log_i = log_omori_integral(np.zeros_like(x_hi), x_hi, params.c, params.p)
    return _productivity(catalog, params) * np.exp(log_i)


def compensator(t, catalog, params):
    """Expected number of events in ``[t_start, t]``; nondecreasing in t."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float)) - catalog.window.t_start
    times = catalog.rel_times
    prod = _productivity(catalog, params)
    out = np.empty(t_arr.shape)
    for i, ti in enumerate(t_arr):
        k = int(np.searchsorted(times, ti, side="left"))
        base = params.mu * ti
        if k == 0 or params.K == 0:
            out[i] = base
            continue
        log_i = log_omori_integral(np.zeros(k), ti - times[:k],
                                   params.c, params.p)
        out[i] = base + math.fsum(prod[:k] * np.exp(log_i))
    return out if np.ndim(t) else float(out[0])


def compensator_at_events(catalog, params):
    """``compensator(t_i)`` for every event, in one vectorized pass."""
    n = len(catalog)
    t = catalog.rel_times
    out = params.mu * t
    if n < 2 or params.K == 0:
        return out
    target, source = catalog.pairs
    prod = _productivity(catalog, params)
    log_i = log_omori_integral(np.zeros(target.size), t[target] - t[source],
                               params.c, params.p)
    return out + segment_sums(prod[source] * np.exp(log_i), n)


def exact_log_likelihood(catalog, params):
    """Point-process log-likelihood ``-Lambda(T) + sum log lambda(t_h)``.

    Returns ``-inf`` (not an exception) when some event has zero intensity.
    """
    total_mass = params.mu * catalog.window.length
    if len(catalog) == 0:
        return -total_mass
    lam = event_intensities(catalog, params)
    if np.any(lam <= 0):
        return -math.inf
    trig = triggered_mass(catalog, params)
    return math.fsum(np.log(lam)) - total_mass - math.fsum(trig)


def exact_log_likelihood_legacy(catalog, params):
    """Log-likelihood under the normalized kernel, computed directly."""
    t = catalog.rel_times
    T = catalog.window.length
    n = len(catalog)
    s = params.p - 1.0
    prod = params.K * np.exp(params.alpha * catalog.rel_magnitudes)
    norm = params.c ** s / s
    lam = np.full(n, params.mu)
    if n > 1:
        target, source = catalog.pairs
        terms = prod[source] * norm * (t[target] - t[source]
                                       + params.c) ** (-params.p)
        lam += segment_sums(terms, n)
    if np.any(lam <= 0):
        return -math.inf
    integ = prod * norm * (params.c ** -s - (T - t + params.c) ** -s) / s
    return math.fsum(np.log(lam)) - params.mu * T - math.fsum(integ)


def branching_ratio(params, gr_beta):
    """Expected direct offspring per event with GR magnitudes, infinite time."""
    if params.alpha >= gr_beta or params.p <= 1:
        return math.inf
    return (params.K * gr_beta / (gr_beta - params.alpha)
            * params.c / (params.p - 1.0))


class LikelihoodEvaluator:
    """Exact log-likelihood with memoized pair terms.

    Component-wise samplers change one parameter at a time; the Omori pair
    terms depend only on (c, p) and the productivity-weighted sums only on
    (alpha, c, p), so most proposals reuse earlier work. Results are
    bit-identical to :func:`exact_log_likelihood` up to summation order.
    """

    def __init__(self, catalog, cache_size=4):
        self.catalog = catalog
        self.n = len(catalog)
        t = catalog.rel_times
        self._target, source = catalog.pairs
        self._source = source
        self._dt = t[self._target] - t[source]
        self._dm = catalog.rel_magnitudes
        self._x_end = catalog.window.length - t
        self._size = cache_size
        self._log1p = {}
        self._kernel = {}
        self._unit = {}

    def _memo(self, store, key, fn):
        try:
            return store[key]
        except KeyError:
            pass
        val = fn()
        if len(store) >= self._size:
            store.pop(next(iter(store)))
        store[key] = val
        return val

    def _unit_sums(self, alpha, c, p):
        """Per-event sum of exp(alpha dm_k) kernel(t_i - t_k) and the
        per-event unit offspring mass exp(alpha dm_h) I(t_h -> T)."""
        def compute():
            L = self._memo(self._log1p, c, lambda: np.log1p(self._dt / c))
            kern = self._memo(self._kernel, (c, p), lambda: np.exp(-p * L))
            w = np.exp(alpha * self._dm)
            s = segment_sums(w[self._source] * kern, self.n)
            mass = w * np.exp(log_omori_integral(
                np.zeros(self.n), self._x_end, c, p))
            return s, math.fsum(mass)
        return self._memo(self._unit, (alpha, c, p), compute)

    def __call__(self, params):
        mu, K = params.mu, params.K
        total = mu * self.catalog.window.length
        if self.n == 0:
            return -total
        s, mass = self._unit_sums(params.alpha, params.c, params.p)
        lam = mu + K * s
        if np.any(lam <= 0):
            return -math.inf
        return math.fsum(np.log(lam)) - total - K * mass
