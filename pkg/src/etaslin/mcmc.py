"""Exact-likelihood random-walk Metropolis-Hastings over internal parameters.

Serves as the reference posterior against which the linearized approximation
is checked. The target is ``loglik(link(theta)) - |theta|^2 / 2``.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import PARAM_NAMES
from .priors import PriorSet, gamma_priors

logger = logging.getLogger(__name__)

STUCK_STEPS = 10_000


@dataclass(frozen=True)
class McmcConfig:
    n_iter: int = 15_000
    burn_in: int = 5_000
    proposal_scales: tuple = (0.5, 0.5, 0.5, 0.5, 0.5)
    seed: int = 0
    priors: PriorSet = field(default_factory=gamma_priors)
    adapt: bool = True
    theta0: tuple = (0.0, 0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError("need 0 <= burn_in < n_iter")
        if len(self.proposal_scales) != 5 or min(self.proposal_scales) <= 0:
            raise ValueError("need five positive proposal scales")
        object.__setattr__(self, "priors", PriorSet(self.priors))


@dataclass
class Chains:
    theta: np.ndarray
    natural: np.ndarray
    acceptance: np.ndarray
    scales: np.ndarray
    stuck: bool = False

    def to_text(self, delimiter=","):
        cols = [f"theta_{k}" for k in PARAM_NAMES] + list(PARAM_NAMES)
        lines = [delimiter.join(cols)]
        for a, b in zip(self.theta, self.natural):
            lines.append(delimiter.join(repr(float(v))
                                        for v in np.concatenate((a, b))))
        return "\n".join(lines) + "\n"


def mh_sample(catalog, config=McmcConfig(), log_target=None):
    """Component-wise Gaussian random-walk Metropolis-Hastings.

    Proposal scales adapt towards 20-40% acceptance during burn-in only and
    are frozen afterwards. ``log_target`` overrides the default posterior
    (used to check the sampler on known targets).
    """
    priors = config.priors
    if log_target is None:
        from .inference import exact_log_posterior
        from .model import LikelihoodEvaluator

        evaluator = LikelihoodEvaluator(catalog)

        def log_target(theta):
            return exact_log_posterior(theta, catalog, priors, evaluator)

    rng = np.random.default_rng(config.seed)
    d = 5
    theta = np.array(config.theta0, dtype=float)
    logp = log_target(theta)
    if not math.isfinite(logp):
        raise ValueError("target is not finite at the starting point")
    log_scale = np.log(np.asarray(config.proposal_scales, dtype=float))
    keep = config.n_iter - config.burn_in
    out = np.empty((keep, d))
    accepted = np.zeros(d)
    window_acc = np.zeros(d)
    window_len = 0
    since_accept = 0
    stuck = False
    for it in range(config.n_iter):
        moved = False
        steps = rng.standard_normal(d)
        logu = np.log(rng.uniform(size=d))
        for j in range(d):
            prop = theta.copy()
            prop[j] += math.exp(log_scale[j]) * steps[j]
            lp = log_target(prop)
            if math.isfinite(lp) and logu[j] < lp - logp:
                theta, logp = prop, lp
                moved = True
                if it >= config.burn_in:
                    accepted[j] += 1
                else:
                    window_acc[j] += 1
        if it < config.burn_in and config.adapt:
            window_len += 1
            if window_len == 50:
                rate = window_acc / window_len
                delta = min(0.5, 5.0 / math.sqrt(it + 1))
                log_scale += np.where(rate > 0.4, delta,
                                      np.where(rate < 0.2, -delta, 0.0))
                window_acc[:] = 0
                window_len = 0
        since_accept = 0 if moved else since_accept + 1
        if since_accept == STUCK_STEPS and not stuck:
            stuck = True
            warnings.warn("chain rejected every proposal for 1e4 steps",
                          RuntimeWarning, stacklevel=2)
        if it >= config.burn_in:
            out[it - config.burn_in] = theta
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        natural = np.column_stack([spec.link(out[:, j])
                                   for j, spec in enumerate(priors)])
    return Chains(out, natural, accepted / keep, np.exp(log_scale), stuck)


def effective_sample_size(x):
    """ESS from the autocorrelation function with Geyer's initial positive
    sequence truncation. Returns ``nan`` for a constant chain."""
    x = np.asarray(x, dtype=float)
    n = x.size
    xc = x - x.mean()
    var = float(xc @ xc) / n
    if var == 0 or n < 4:
        return math.nan
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acf = np.fft.irfft(f * np.conj(f), size)[:n] / (n * var)
    # sums of adjacent pairs, truncated at the first non-positive pair
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = acf[k] + acf[k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return n / max(tau, 1e-12)


def chain_diagnostics(chains):
    """Per-coordinate acceptance, ESS, mean, sd and quantiles."""
    if isinstance(chains, Chains):
        draws, acc = chains.natural, chains.acceptance
    else:
        draws = np.atleast_2d(np.asarray(chains, dtype=float))
        if draws.shape[0] == 1:
            draws = draws.T
        acc = np.full(draws.shape[1], math.nan)
    if draws.shape[0] == 0:
        raise ValueError("empty chain")
    names = PARAM_NAMES if draws.shape[1] == 5 else [
        f"x{j}" for j in range(draws.shape[1])]
    report = {}
    for j, name in enumerate(names):
        x = draws[:, j]
        ess = effective_sample_size(x)
        row = {"acceptance": float(acc[j]), "ess": ess,
               "degenerate": not math.isfinite(ess),
               "mean": float(x.mean()),
               "sd": float(x.std(ddof=1)) if x.size > 1 else 0.0}
        for q, v in zip((0.01, 0.25, 0.5, 0.75, 0.99),
                        np.quantile(x, (0.01, 0.25, 0.5, 0.75, 0.99))):
            row[f"q{q:g}"] = float(v)
        report[name] = row
    return report
