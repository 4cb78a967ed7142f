"""Synthetic ETAS catalogs by Ogata thinning, with Gutenberg-Richter marks."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .catalog import EventCatalog, ObservationWindow
from .model import EtasParams, branching_ratio

logger = logging.getLogger(__name__)


class SimulationOverflow(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    params: EtasParams
    window: ObservationWindow
    gr_beta: float = math.log(10.0)
    seed: int = 0
    max_events: int = 1_000_000

    def __post_init__(self):
        if not self.gr_beta > 0:
            raise ValueError("gr_beta must be positive")
        if self.max_events < 1:
            raise ValueError("max_events must be positive")
        ratio = branching_ratio(self.params, self.gr_beta)
        if ratio >= 1:
            logger.warning("branching ratio %.3g >= 1: supercritical", ratio)

    @property
    def branching_ratio(self):
        return branching_ratio(self.params, self.gr_beta)


def sample_magnitude(gr_beta, M0, rng, size=None):
    """``M0`` plus an exponential draw with rate ``gr_beta``."""
    if not gr_beta > 0:
        raise ValueError("gr_beta must be positive")
    return M0 + rng.exponential(1.0 / gr_beta, size=size)


def estimate_gr_beta(catalog):
    """Maximum-likelihood GR rate ``1 / mean(m - M0)``."""
    if len(catalog) < 2:
        raise ValueError("need at least two events")
    excess = float(np.mean(catalog.rel_magnitudes))
    if excess <= 0:
        raise ValueError("all magnitudes equal the cutoff")
    return 1.0 / excess


def simulate(config):
    """Simulate a catalog whose ground intensity is the ETAS intensity.

    Between events the intensity only decays, so its value just after the
    current time bounds it until the next accepted event.
    """
    p = config.params
    w = config.window
    rng = np.random.default_rng(config.seed)
    T = w.length
    cap = 1024
    times = np.empty(cap)
    prod = np.empty(cap)
    mags = np.empty(cap)
    n = 0
    t = 0.0

    def intensity(at):
        if n == 0 or p.K == 0:
            return p.mu
        lag = at - times[:n]
        return p.mu + math.fsum(prod[:n] * np.exp(-p.p * np.log1p(lag / p.c)))

    while True:
        bound = intensity(t)
        if bound <= 0:
            break
        t += rng.exponential(1.0 / bound)
        if t > T:
            break
        u = rng.uniform()
        if u * bound > intensity(t):
            continue
        if n == config.max_events:
            raise SimulationOverflow(
                f"more than {config.max_events} events; branching ratio "
                f"{config.branching_ratio:.3g}")
        if n == cap:
            cap *= 2
            times = np.resize(times, cap)
            prod = np.resize(prod, cap)
            mags = np.resize(mags, cap)
        m = sample_magnitude(config.gr_beta, w.m_cutoff, rng)
        times[n] = t
        mags[n] = m
        prod[n] = p.K * math.exp(p.alpha * (m - w.m_cutoff))
        n += 1

    return EventCatalog(times[:n] + w.t_start, mags[:n], w)
