"""Iterative linearized posterior: inner Newton solve, line search, stopping."""

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .linearization import (BinningConfig, LinearizedLikelihood,
                            build_surrogate)
from .model import (PARAM_NAMES, EtasParams, LikelihoodEvaluator,
                    ParameterError, exact_log_likelihood)
from .priors import THETA_CLAMP, PriorSet, gamma_priors

logger = logging.getLogger(__name__)

ALPHA_FLOOR = 2.0 ** -10
GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


class InferenceError(RuntimeError):
    pass


class NewtonError(InferenceError):
    def __init__(self, message, last_iterate):
        super().__init__(message)
        self.last_iterate = last_iterate


class LineSearchError(InferenceError):
    pass


class NotConvergedError(InferenceError):
    pass


@dataclass(frozen=True)
class FitConfig:
    priors: PriorSet = field(default_factory=gamma_priors)
    binning: BinningConfig = field(default_factory=BinningConfig)
    theta0: tuple = (0.0, 0.0, 0.0, 0.0, 0.0)
    max_outer: int = 100
    convergence_frac: float = 0.01
    expand_steps: bool = True

    def __post_init__(self):
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")
        if not self.convergence_frac > 0:
            raise ValueError("convergence_frac must be positive")
        if len(self.theta0) != 5:
            raise ValueError("theta0 needs 5 entries")
        object.__setattr__(self, "priors", PriorSet(self.priors))
        object.__setattr__(self, "theta0",
                           tuple(float(v) for v in self.theta0))


@dataclass(frozen=True)
class GaussianApprox:
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def sd(self):
        return np.sqrt(np.diag(self.covariance))


@dataclass(frozen=True)
class TraceEntry:
    theta_star: np.ndarray
    theta_hat: np.ndarray
    alpha: float
    log_posterior: float
    line_search_floor: bool = False


@dataclass(frozen=True)
class PosteriorResult:
    theta_star: np.ndarray
    gaussian: GaussianApprox
    trace: list
    converged: bool
    iterations: int
    priors: PriorSet
    message: str = ""
    last_deltas: np.ndarray = None

    @property
    def params(self):
        """Natural-scale parameters at the linearization point."""
        return EtasParams.from_array(self.priors.link(self.theta_star))


def exact_log_posterior(theta, catalog, priors, loglik=None):
    """Exact log-likelihood at ``link(theta)`` plus the N(0, I) log-prior.

    ``loglik`` may supply a memoizing :class:`LikelihoodEvaluator`.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(np.abs(theta) > THETA_CLAMP):
        return -math.inf
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            params = EtasParams.from_array(priors.link(theta))
    except ParameterError:
        return -math.inf
    if loglik is None:
        ll = exact_log_likelihood(catalog, params)
    else:
        ll = loglik(params)
    return ll - 0.5 * float(theta @ theta)


def linearized_log_posterior(theta, theta_star, surrogate, priors):
    """Surrogate Poisson log-likelihood plus the standard-normal log-prior."""
    lin = LinearizedLikelihood(theta_star, surrogate, priors)
    theta = np.asarray(theta, dtype=float)
    return lin.log_likelihood(theta) - 0.5 * float(theta @ theta)


def _inner_newton(lin, start, tol=1e-8, max_iter=200):
    theta = np.array(start, dtype=float)

    def objective(x):
        return lin.log_likelihood(x) - 0.5 * float(x @ x)

    f = objective(theta)
    if not math.isfinite(f):
        raise NewtonError("linearized posterior not finite at start", theta)
    eye = np.eye(theta.size)
    for _ in range(max_iter):
        _, g, H = lin.derivatives(theta)
        g = g - theta
        H = H - eye
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
            raise NewtonError("non-finite gradient or Hessian", theta)
        if np.linalg.norm(g) < tol:
            return theta, H
        step = np.linalg.solve(-H, g)
        if not np.all(np.isfinite(step)):
            raise NewtonError("non-finite Newton step", theta)
        t = 1.0
        while True:
            cand = theta + t * step
            fc = objective(cand)
            if math.isfinite(fc) and fc >= f:
                break
            t *= 0.5
            if t < 1e-12:
                break
        if t < 1e-12:
            # no ascent possible at working precision
            return theta, H
        small = np.max(np.abs(t * step)) < 1e-14 * (1 + np.max(np.abs(theta)))
        theta, f = cand, fc
        if small:
            break
    _, g, H = lin.derivatives(theta)
    return theta, H - eye


def inner_mode(theta_star, surrogate, priors, lin=None):
    """Mode and inverse negative Hessian of the linearized posterior."""
    if lin is None:
        lin = LinearizedLikelihood(theta_star, surrogate, priors)
    mean, H = _inner_newton(lin, lin.theta_star)
    cov = np.linalg.inv(-H)
    cov = 0.5 * (cov + cov.T)
    np.linalg.cholesky(cov)
    return GaussianApprox(mean, cov)


def line_search(theta_old, theta_hat, exact_posterior_fn, floor=ALPHA_FLOOR,
                expand=True, max_alpha=GOLDEN ** 30):
    """Step along ``theta_old -> theta_hat`` chosen on the exact log-posterior.

    Backtracks through ``alpha = 1, 1/2, 1/4, ...`` until the exact
    log-posterior does not decrease. When the full step is accepted and
    ``expand`` is set, the step is stretched by the golden ratio while the
    log-posterior keeps increasing (up to ``max_alpha``), which removes the
    slow creep of the fixed-point iteration along poorly curved directions.

    Returns ``(alpha, theta_new, hit_floor)``; if no candidate down to
    ``floor`` qualifies, ``alpha = floor`` and ``hit_floor`` is True.
    """
    theta_old = np.asarray(theta_old, dtype=float)
    direction = np.asarray(theta_hat, dtype=float) - theta_old
    f_old = exact_posterior_fn(theta_old)
    alpha = 1.0
    any_finite = math.isfinite(f_old)
    while alpha >= floor:
        cand = theta_old + alpha * direction
        f = exact_posterior_fn(cand)
        any_finite = any_finite or math.isfinite(f)
        if math.isfinite(f) and f >= f_old:
            break
        alpha *= 0.5
    else:
        if not any_finite:
            raise LineSearchError("exact posterior is -inf at every candidate")
        warnings.warn("line search reached the step floor", RuntimeWarning,
                      stacklevel=2)
        return floor, theta_old + floor * direction, True
    if expand and alpha == 1.0:
        while alpha * GOLDEN <= max_alpha:
            cand_next = theta_old + alpha * GOLDEN * direction
            f_next = exact_posterior_fn(cand_next)
            if not (math.isfinite(f_next) and f_next > f):
                break
            alpha, cand, f = alpha * GOLDEN, cand_next, f_next
    return alpha, cand, False


def fit(catalog, config=None):
    """Iterate linearize -> inner mode -> line search until the linearization
    point moves less than ``convergence_frac`` posterior sds in every
    coordinate."""
    config = config or FitConfig()
    if len(catalog) == 0:
        raise ValueError("cannot fit an empty catalog")
    priors = config.priors
    surrogate = build_surrogate(catalog, config.binning)

    evaluator = LikelihoodEvaluator(catalog)

    def post(theta):
        return exact_log_posterior(theta, catalog, priors, evaluator)

    theta = np.array(config.theta0, dtype=float)
    trace = []
    gaussian = None
    deltas = None
    message = ""
    converged = False
    it = 0
    for it in range(1, config.max_outer + 1):
        try:
            gaussian = inner_mode(theta, surrogate, priors)
            theta_hat = gaussian.mean
            if np.array_equal(theta_hat, theta):
                alpha, theta_new, floor = 1.0, theta.copy(), False
            else:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    alpha, theta_new, floor = line_search(
                        theta, theta_hat, post, expand=config.expand_steps)
        except (InferenceError, np.linalg.LinAlgError,
                ParameterError) as exc:
            message = f"iteration {it}: {exc}"
            logger.warning("fit stopped: %s", message)
            break
        deltas = np.abs(theta_new - theta)
        trace.append(TraceEntry(theta_new.copy(), theta_hat.copy(), alpha,
                                post(theta_new), floor))
        logger.debug("iter %d alpha=%g logpost=%.6f", it, alpha,
                     trace[-1].log_posterior)
        theta = theta_new
        if np.all(deltas < config.convergence_frac * gaussian.sd):
            converged = True
            break
    else:
        message = f"no convergence after {config.max_outer} iterations"

    if gaussian is None:
        raise InferenceError(message or "fit failed before first iteration")
    return PosteriorResult(theta, gaussian, trace, converged,
                           len(trace), priors, message, deltas)


def sample_posterior(result, n, seed=None, force=False):
    """Natural-scale draws from the Gaussian approximation, pushed through
    the prior links. Columns follow ``PARAM_NAMES``."""
    if not result.converged and not force:
        raise NotConvergedError("posterior did not converge; pass force=True")
    rng = np.random.default_rng(seed)
    g = result.gaussian
    z = rng.multivariate_normal(g.mean, g.covariance, size=n, method="eigh")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return np.column_stack([spec.link(z[:, j])
                                for j, spec in enumerate(result.priors)])


def posterior_summary(result, n=10_000, seed=0, force=False):
    """Per-parameter mean, sd and 1/25/50/75/99% quantiles (natural scale)."""
    draws = sample_posterior(result, n, seed, force=force)
    probs = (0.01, 0.25, 0.5, 0.75, 0.99)
    table = {}
    for j, name in enumerate(PARAM_NAMES):
        x = draws[:, j]
        row = {"mean": float(x.mean()), "sd": float(x.std(ddof=1))}
        for q, v in zip(probs, np.quantile(x, probs)):
            row[f"q{q:g}"] = float(v)
        table[name] = row
    return table
