"""Approximate Bayesian inference for temporal ETAS Hawkes processes.

The posterior is found by linearizing the log-likelihood around a moving
expansion point, so each step reduces to a Poisson regression on a
surrogate dataset. An exact-likelihood Metropolis sampler and
random-time-change residuals are provided for checking the approximation.
"""

__version__ = "0.1.0"

from .catalog import (CatalogError, CatalogParseError, EmptyCatalogError,
                      Event, EventCatalog, ObservationWindow, history_before,
                      parse_catalog, read_catalog, write_catalog)
from .diagnostics import (band_to_text, predictive_band, transformed_times,
                          uniformity_test)
from .estimator import LinearizedETAS
from .inference import (FitConfig, GaussianApprox, InferenceError,
                        PosteriorResult, exact_log_posterior, fit,
                        inner_mode, line_search, posterior_summary,
                        sample_posterior)
from .linearization import (BinningConfig, LinearizedLikelihood,
                            SurrogateDataset, approx_log_likelihood,
                            build_surrogate, evaluate_predictors, time_bins)
from .mcmc import (Chains, McmcConfig, chain_diagnostics,
                   effective_sample_size, mh_sample)
from .model import (PARAM_NAMES, EtasParams, LegacyEtasParams,
                    LikelihoodEvaluator, ParameterError, branching_ratio,
                    compensator, conditional_intensity, convert_legacy,
                    exact_log_likelihood, exact_log_likelihood_legacy,
                    omori_integral, omori_kernel)
from .priors import (Gamma, LogNormal, PriorSet, Uniform, empirical_Kb_prior,
                     gamma_priors, match_lognormal_to_quantiles,
                     prior_summary, replicate_priors, scaled_gamma_priors)
from .simulator import SimConfig, simulate

__all__ = [name for name in dir() if not name.startswith("_")]
