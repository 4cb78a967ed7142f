"""scikit-learn style wrapper around the linearized fit.

``X`` is either an :class:`EventCatalog` or an ``(n, 2)`` array of
``[time, magnitude]`` rows. Arrays need the observation window, which is
taken from the ``t_start``/``t_end``/``m_cutoff`` hyperparameters.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .catalog import EventCatalog, ObservationWindow
from .diagnostics import transformed_times
from .inference import FitConfig, fit, posterior_summary
from .linearization import BinningConfig
from .model import LikelihoodEvaluator
from .priors import PRESETS, PriorSet


def check_events(X, t_start=None, t_end=None, m_cutoff=None):
    """Coerce ``X`` to an EventCatalog.

    Rows outside the window or below the cutoff are rejected rather than
    dropped; use :func:`parse_catalog` for lenient loading.
    """
    if isinstance(X, EventCatalog):
        return X
    X = check_array(X, dtype=np.float64, ensure_min_samples=0)
    if X.shape[1] != 2:
        raise ValueError(f"expected 2 columns (time, magnitude), got {X.shape[1]}")
    if t_start is None or t_end is None or m_cutoff is None:
        raise ValueError("t_start, t_end and m_cutoff are required for array input")
    order = np.argsort(X[:, 0], kind="stable")
    return EventCatalog(X[order, 0], X[order, 1],
                        ObservationWindow(t_start, t_end, m_cutoff))


def check_priors(priors):
    if priors is None:
        priors = "gamma"
    if isinstance(priors, str):
        if priors not in PRESETS:
            raise ValueError(f"unknown prior preset {priors!r}")
        return PRESETS[priors]()
    if isinstance(priors, dict):
        return PriorSet.from_mapping(priors)
    return PriorSet(priors)


class LinearizedETAS(TransformerMixin, BaseEstimator):
    """Approximate ETAS posterior by iterated linearization.

    Parameters
    ----------
    priors : str, dict or sequence of PriorSpec, default "gamma"
        Preset name, mapping of parameter name to prior, or five priors.
    delta, growth, n_max : binning of the post-event time axis.
    max_outer : int
        Cap on expansion-point updates.
    convergence_frac : float
        Stop when every coordinate moves less than this many sds.
    t_start, t_end, m_cutoff : float, optional
        Window for array input.
    n_samples : int
        Draws used for the marginal summaries.
    random_state : int
        Seed for the summary draws.

    Attributes
    ----------
    posterior_ : PosteriorResult
    params_ : EtasParams at the final expansion point
    summary_ : dict of marginal summaries
    converged_ : bool
    n_iter_ : int
    """

    def __init__(self, priors="gamma", delta=0.1, growth=2.0, n_max=10,
                 max_outer=100, convergence_frac=0.01, t_start=None,
                 t_end=None, m_cutoff=None, n_samples=10_000, random_state=0):
        self.priors = priors
        self.delta = delta
        self.growth = growth
        self.n_max = n_max
        self.max_outer = max_outer
        self.convergence_frac = convergence_frac
        self.t_start = t_start
        self.t_end = t_end
        self.m_cutoff = m_cutoff
        self.n_samples = n_samples
        self.random_state = random_state

    def _catalog(self, X):
        return check_events(X, self.t_start, self.t_end, self.m_cutoff)

    def fit(self, X, y=None):
        catalog = self._catalog(X)
        config = FitConfig(
            priors=check_priors(self.priors),
            binning=BinningConfig(self.delta, self.growth, self.n_max),
            max_outer=self.max_outer,
            convergence_frac=self.convergence_frac)
        self.posterior_ = fit(catalog, config)
        self.params_ = self.posterior_.params
        self.converged_ = self.posterior_.converged
        self.n_iter_ = self.posterior_.iterations
        self.summary_ = posterior_summary(self.posterior_, self.n_samples,
                                          self.random_state, force=True)
        return self

    def transform(self, X):
        """Compensator values at each event (random time change)."""
        check_is_fitted(self, "posterior_")
        return transformed_times(self._catalog(X), self.params_)

    def score(self, X, y=None):
        """Exact log-likelihood at the fitted expansion point."""
        check_is_fitted(self, "posterior_")
        return float(LikelihoodEvaluator(self._catalog(X))(self.params_))
