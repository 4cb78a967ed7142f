"""Surrogate Poisson dataset and linearized log-likelihood.

The log-likelihood is split into the integrated background rate (part I),
the expected offspring of each event split over time bins (part II) and the
sum of log-intensities at the events (part III). Each log-component is
expanded to first order in the internal parameters around a linearization
point; the result is a Poisson log-likelihood over pseudo-observations with
counts/exposures (0, 1) for parts I-II and (1, 0) for part III.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .model import EtasParams, log_omori_integral, segment_sums

logger = logging.getLogger(__name__)

PART_I, PART_II, PART_III = 1, 2, 3
PART_LABELS = {PART_I: "I", PART_II: "II", PART_III: "III"}

# part-II bins whose integral falls below this are dropped from the solve
UNDERFLOW_LOG = math.log(1e-300)


@dataclass(frozen=True)
class BinningConfig:
    """Geometric time bins: first bin ``delta``, growth factor ``1 + growth``."""

    delta: float = 0.1
    growth: float = 2.0
    n_max: int = 10

    def __post_init__(self):
        if not (self.delta > 0 and self.growth > 0 and self.n_max >= 0):
            raise ValueError("need delta > 0, growth > 0, n_max >= 0")


def time_bins(t_h, window, cfg=BinningConfig()):
    """Bin breakpoints for the offspring of an event at ``t_h``.

    ``t_h, t_h + delta, t_h + delta (1 + growth), ...,
    t_h + delta (1 + growth)^n_max`` truncated to the window, then ``t_end``.
    """
    start = max(window.t_start, t_h)
    k = np.arange(cfg.n_max + 1)
    inner = t_h + cfg.delta * (1.0 + cfg.growth) ** k
    inner = inner[(inner > start) & (inner < window.t_end)]
    points = np.concatenate(([start], inner, [window.t_end]))
    return points[np.concatenate(([True], np.diff(points) > 0))]


@dataclass(frozen=True)
class SurrogateRow:
    part: str
    event_index: int | None
    bin: tuple | None
    count: int
    exposure: int


@dataclass(frozen=True)
class SurrogateDataset:
    """Columnar pseudo-observations; times relative to the window start."""

    part: np.ndarray
    event: np.ndarray
    t_lo: np.ndarray
    t_hi: np.ndarray
    count: np.ndarray
    exposure: np.ndarray
    catalog: object
    binning: BinningConfig

    def __len__(self):
        return self.part.size

    @property
    def rows(self):
        out = []
        for i in range(len(self)):
            part = int(self.part[i])
            out.append(SurrogateRow(
                PART_LABELS[part],
                None if part == PART_I else int(self.event[i]),
                (float(self.t_lo[i]), float(self.t_hi[i]))
                if part == PART_II else None,
                int(self.count[i]), int(self.exposure[i])))
        return out

    def to_text(self, delimiter=","):
        t0 = self.catalog.window.t_start
        lines = [delimiter.join(("part", "event", "t_lo", "t_hi", "count",
                                 "exposure"))]
        for i in range(len(self)):
            part = int(self.part[i])
            if part == PART_II:
                lo, hi = repr(float(self.t_lo[i] + t0)), repr(
                    float(self.t_hi[i] + t0))
            else:
                lo = hi = ""
            ev = "" if part == PART_I else str(int(self.event[i]))
            lines.append(delimiter.join((PART_LABELS[part], ev, lo, hi,
                                         str(int(self.count[i])),
                                         str(int(self.exposure[i])))))
        return "\n".join(lines) + "\n"


def build_surrogate(catalog, cfg=BinningConfig()):
    """Pseudo-observations: 1 background row, bin rows per event, n event rows."""
    n = len(catalog)
    if n == 0:
        raise ValueError("surrogate needs a nonempty catalog")
    w = catalog.window
    rel_window = type(w)(0.0, w.length, w.m_cutoff)
    lo_parts, hi_parts, ev_parts = [], [], []
    for h, t_h in enumerate(catalog.rel_times):
        if t_h >= rel_window.t_end:
            continue
        b = time_bins(t_h, rel_window, cfg)
        lo_parts.append(b[:-1])
        hi_parts.append(b[1:])
        ev_parts.append(np.full(b.size - 1, h))
    lo2 = np.concatenate(lo_parts) if lo_parts else np.empty(0)
    hi2 = np.concatenate(hi_parts) if hi_parts else np.empty(0)
    ev2 = np.concatenate(ev_parts) if ev_parts else np.empty(0, dtype=int)
    m = lo2.size
    part = np.concatenate(([PART_I], np.full(m, PART_II), np.full(n, PART_III)))
    event = np.concatenate(([-1], ev2, np.arange(n))).astype(int)
    nan = np.full(n, np.nan)
    t_lo = np.concatenate(([0.0], lo2, nan))
    t_hi = np.concatenate(([w.length], hi2, nan))
    count = (part == PART_III).astype(int)
    exposure = 1 - count
    return SurrogateDataset(part, event, t_lo, t_hi, count, exposure,
                            catalog, cfg)


@dataclass
class Predictor:
    """Log-scale predictor value and its internal-scale gradient."""

    value: float
    gradient: np.ndarray


def _natural(theta, priors):
    eta = priors.link(theta)
    jac = priors.jacobian(theta)
    return eta, jac


def _dlog_link(eta, jac):
    # d log(eta)/d theta, with the p coordinate left to the caller
    with np.errstate(divide="ignore", invalid="ignore"):
        return jac / eta


def _part1(eta, jac, length):
    mu = eta[0]
    grad = np.zeros(5)
    with np.errstate(divide="ignore"):
        value = math.log(length) + (math.log(mu) if mu > 0 else -math.inf)
    grad[0] = _dlog_link(mu, jac[0])
    return value, grad


def _part2(eta, jac, surrogate, rows):
    cat = surrogate.catalog
    mu, K, alpha, c, p = eta
    ev = surrogate.event[rows]
    t_h = cat.rel_times[ev]
    dm = cat.rel_magnitudes[ev]
    log_i, d_c, d_p = log_omori_integral(surrogate.t_lo[rows] - t_h,
                                         surrogate.t_hi[rows] - t_h, c, p,
                                         grad=True)
    with np.errstate(divide="ignore"):
        value = math.log(K) + alpha * dm + log_i
    grad = np.zeros((rows.size, 5))
    grad[:, 1] = _dlog_link(K, jac[1])
    grad[:, 2] = dm * jac[2]
    grad[:, 3] = d_c * jac[3]
    grad[:, 4] = d_p * jac[4]
    return value, grad


def _part3(eta, jac, surrogate, rows):
    cat = surrogate.catalog
    mu, K, alpha, c, p = eta
    n = len(cat)
    ev = surrogate.event[rows]
    dlam = np.zeros((n, 5))
    dlam[:, 0] = 1.0
    lam = np.full(n, mu)
    if n > 1:
        target, source = cat.pairs
        t = cat.rel_times
        dt = t[target] - t[source]
        dm = cat.rel_magnitudes[source]
        log1p_dt = np.log1p(dt / c)
        unit = np.exp(alpha * dm - p * log1p_dt)
        term = K * unit
        lam += segment_sums(term, n)
        dlam[:, 1] = segment_sums(unit, n)
        dlam[:, 2] = segment_sums(term * dm, n)
        dlam[:, 3] = segment_sums(term * p * dt / (c * (dt + c)), n)
        dlam[:, 4] = segment_sums(-term * log1p_dt, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.log(lam[ev])
        grad = dlam[ev] * jac / lam[ev, None]
    return value, grad


def evaluate_predictors(theta, surrogate, priors):
    """Values (N,) and internal-scale gradients (N, 5) for every row."""
    theta = np.asarray(theta, dtype=float)
    eta, jac = _natural(theta, priors)
    EtasParams.from_array(eta)
    values = np.empty(len(surrogate))
    grads = np.zeros((len(surrogate), 5))
    part = surrogate.part
    r1 = np.flatnonzero(part == PART_I)
    r2 = np.flatnonzero(part == PART_II)
    r3 = np.flatnonzero(part == PART_III)
    v, g = _part1(eta, jac, surrogate.catalog.window.length)
    values[r1], grads[r1] = v, g
    if r2.size:
        values[r2], grads[r2] = _part2(eta, jac, surrogate, r2)
    values[r3], grads[r3] = _part3(eta, jac, surrogate, r3)
    return values, grads


def _row_predictor(theta, surrogate, priors, rows, fn):
    eta, jac = _natural(np.asarray(theta, dtype=float), priors)
    v, g = fn(eta, jac, surrogate, np.atleast_1d(rows))
    return Predictor(float(v[0]), g[0])


def predictor_part1(theta, surrogate, priors):
    eta, jac = _natural(np.asarray(theta, dtype=float), priors)
    v, g = _part1(eta, jac, surrogate.catalog.window.length)
    return Predictor(v, g)


def predictor_part2(theta, row, surrogate, priors):
    if surrogate.part[row] != PART_II:
        raise ValueError(f"row {row} is not a part-II row")
    return _row_predictor(theta, surrogate, priors, row, _part2)


def predictor_part3(theta, event_index, surrogate, priors):
    rows = np.flatnonzero((surrogate.part == PART_III)
                          & (surrogate.event == event_index))
    if rows.size != 1:
        raise ValueError(f"no part-III row for event {event_index}")
    return _row_predictor(theta, surrogate, priors, rows, _part3)


class LinearizedLikelihood:
    """First-order expansion of all row predictors around ``theta_star``.

    Part-II rows whose bin integral underflows are dropped and counted in
    ``n_inert``.
    """

    def __init__(self, theta_star, surrogate, priors):
        self.theta_star = np.array(theta_star, dtype=float)
        values, grads = evaluate_predictors(self.theta_star, surrogate, priors)
        inert = (surrogate.part == PART_II) & ~(values > UNDERFLOW_LOG)
        self.n_inert = int(inert.sum())
        if self.n_inert:
            logger.debug("%d part-II rows dropped as inert", self.n_inert)
        keep = ~inert
        self.values = values[keep]
        self.grads = grads[keep]
        self.count = surrogate.count[keep].astype(float)
        self.exposure = surrogate.exposure[keep].astype(float)
        self.finite = bool(np.all(np.isfinite(self.values))
                           and np.all(np.isfinite(self.grads)))

    def predictors(self, theta):
        return self.values + self.grads @ (np.asarray(theta) - self.theta_star)

    def log_likelihood(self, theta):
        if not self.finite:
            return -math.inf
        eta_bar = self.predictors(theta)
        with np.errstate(over="ignore"):
            terms = self.count * eta_bar - self.exposure * np.exp(eta_bar)
        return math.fsum(terms)

    def derivatives(self, theta):
        """Log-likelihood, gradient and Hessian at ``theta``."""
        eta_bar = self.predictors(theta)
        with np.errstate(over="ignore"):
            rate = self.exposure * np.exp(eta_bar)
        value = math.fsum(self.count * eta_bar - rate)
        grad = self.grads.T @ (self.count - rate)
        hess = -(self.grads.T * rate) @ self.grads
        return value, grad, hess


def approx_log_likelihood(theta, theta_star, surrogate, priors):
    """Linearized log-likelihood at ``theta`` expanded around ``theta_star``."""
    return LinearizedLikelihood(theta_star, surrogate, priors).log_likelihood(
        theta)
