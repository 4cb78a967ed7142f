"""Residual analysis by random time change, and predictive compensator bands.

Under the true model the compensator values ``Lambda(t_1) < ... < Lambda(t_n)``
are the arrival times of a unit-rate Poisson process.
"""

import numpy as np
from scipy import stats

from .inference import NotConvergedError, sample_posterior
from .model import EtasParams, compensator_at_events


def transformed_times(catalog, params):
    """Compensator at each event time."""
    return compensator_at_events(catalog, params)


def uniformity_test(transformed, total=None):
    """Kolmogorov-Smirnov test of rescaled transformed times against U(0, 1).

    With ``total=None`` the values are divided by the last one, which is then
    dropped: given the n-th arrival of a unit Poisson process, the first
    ``n - 1`` arrivals are iid uniform below it. Passing ``total`` divides by
    that value and keeps every point.

    Returns ``(statistic, p_value)`` with the asymptotic p-value.
    """
    x = np.asarray(transformed, dtype=float)
    if x.size < 5:
        raise ValueError("need at least 5 points")
    if total is None:
        total = x[-1]
        x = x[:-1]
    if not total > 0:
        # all mass at the origin: maximally non-uniform
        return 1.0, 0.0
    x = x / total
    res = stats.kstest(x, "uniform", method="asymp")
    return float(res.statistic), float(res.pvalue)


BAND_PROBS = (0.025, 0.25, 0.5, 0.75, 0.975)


def predictive_band(catalog, posterior, n_samples=1000, seed=0, force=False):
    """Posterior-predictive envelope of the compensator at the event times.

    Returns a dict with the event times (original units), the observed
    cumulative count, and compensator percentiles over posterior draws
    (keys ``q2.5``, ``q25``, ``q50``, ``q75``, ``q97.5``).
    """
    if not posterior.converged and not force:
        raise NotConvergedError("posterior did not converge; pass force=True")
    draws = sample_posterior(posterior, n_samples, seed, force=True)
    curves = np.empty((n_samples, len(catalog)))
    for s, row in enumerate(draws):
        curves[s] = compensator_at_events(catalog, EtasParams.from_array(row))
    qs = np.quantile(curves, BAND_PROBS, axis=0)
    band = {"t": catalog.times.copy(),
            "n_obs": np.arange(1, len(catalog) + 1, dtype=float)}
    for p, q in zip(BAND_PROBS, qs):
        band[f"q{100 * p:g}"] = q
    return band


def band_to_text(band, delimiter=","):
    cols = ["t", "n_obs", "q2.5", "q25", "q50", "q75", "q97.5"]
    lines = [delimiter.join(cols)]
    for i in range(band["t"].size):
        vals = [repr(float(band[c][i])) for c in cols]
        vals[1] = str(int(band["n_obs"][i]))
        lines.append(delimiter.join(vals))
    return "\n".join(lines) + "\n"
