"""Structured run configuration (YAML) shared by the command-line tools."""

import math

import yaml

from .catalog import ObservationWindow
from .inference import FitConfig
from .linearization import BinningConfig
from .mcmc import McmcConfig
from .model import PARAM_NAMES, EtasParams
from .priors import PRESETS, PriorSet, scaled_gamma_priors
from .simulator import SimConfig


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def load_config(path):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}")
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return data


def _section(data, name, required=True):
    sec = data.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"missing section '{name}'")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    return sec


def _number(sec, key, prefix, default=None, cast=float):
    if key not in sec:
        if default is None:
            raise ConfigError(f"missing field '{prefix}{key}'")
        return default
    try:
        return cast(sec[key])
    except (TypeError, ValueError):
        raise ConfigError(f"field '{prefix}{key}' is not a number")


def window_from(data):
    sec = _section(data, "window")
    try:
        return ObservationWindow(_number(sec, "t_start", "window."),
                                 _number(sec, "t_end", "window."),
                                 _number(sec, "m_cutoff", "window."))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"window: {exc}")


def params_from(data):
    sec = _section(data, "params")
    values = [_number(sec, k, "params.") for k in PARAM_NAMES]
    try:
        return EtasParams(*values)
    except ValueError as exc:
        raise ConfigError(f"params: {exc}")


def sim_config_from(data, seed=None):
    return SimConfig(
        params=params_from(data),
        window=window_from(data),
        gr_beta=_number(data, "gr_beta", "", default=math.log(10.0)),
        seed=seed if seed is not None else _number(data, "seed", "", 0, int),
        max_events=_number(data, "max_events", "", 1_000_000, int))


def priors_from(data, preset=None, gamma_scale=None):
    if gamma_scale is None:
        gamma_scale = data.get("gamma_scale")
    if gamma_scale is not None:
        return scaled_gamma_priors(float(gamma_scale))
    spec = preset if preset is not None else data.get("priors", "gamma")
    if isinstance(spec, str):
        if spec not in PRESETS:
            raise ConfigError(f"unknown prior preset '{spec}'")
        return PRESETS[spec]()
    if isinstance(spec, dict):
        try:
            return PriorSet.from_mapping(spec)
        except ValueError as exc:
            raise ConfigError(f"priors: {exc}")
    raise ConfigError("field 'priors' must be a preset name or a mapping")


def binning_from(data, **overrides):
    sec = _section(data, "binning", required=False)
    vals = {"delta": _number(sec, "delta", "binning.", 0.1),
            "growth": _number(sec, "growth", "binning.", 2.0),
            "n_max": _number(sec, "n_max", "binning.", 10, int)}
    vals.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return BinningConfig(**vals)
    except ValueError as exc:
        raise ConfigError(f"binning: {exc}")


def fit_config_from(data, preset=None, gamma_scale=None, binning=None):
    sec = _section(data, "fit", required=False)
    theta0 = sec.get("theta0", (0.0,) * 5)
    try:
        return FitConfig(
            priors=priors_from(data, preset, gamma_scale),
            binning=binning or binning_from(data),
            theta0=tuple(theta0),
            max_outer=_number(sec, "max_outer", "fit.", 100, int),
            convergence_frac=_number(sec, "convergence_frac", "fit.", 0.01),
            expand_steps=bool(sec.get("expand_steps", True)))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"fit: {exc}")


def mcmc_config_from(data, seed=None, preset=None, gamma_scale=None):
    sec = _section(data, "mcmc", required=False)
    try:
        return McmcConfig(
            n_iter=_number(sec, "n_iter", "mcmc.", 15_000, int),
            burn_in=_number(sec, "burn_in", "mcmc.", 5_000, int),
            proposal_scales=tuple(sec.get("proposal_scales", (0.5,) * 5)),
            seed=seed if seed is not None else _number(
                sec, "seed", "mcmc.", _number(data, "seed", "", 0, int), int),
            priors=priors_from(data, preset, gamma_scale))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"mcmc: {exc}")
