"""JSON round-trip for fit results."""

import json

import numpy as np

from .inference import GaussianApprox, PosteriorResult, TraceEntry
from .model import PARAM_NAMES
from .priors import PriorSet


def _floats(a):
    return [float(v) for v in np.ravel(a)]


def result_to_dict(result, summary=None, extra=None):
    d = {
        "converged": bool(result.converged),
        "iterations": int(result.iterations),
        "message": result.message,
        "parameters": list(PARAM_NAMES),
        "theta_star": _floats(result.theta_star),
        "params_at_theta_star": result.params.as_dict(),
        "gaussian": {
            "mean": _floats(result.gaussian.mean),
            "covariance": [_floats(r) for r in result.gaussian.covariance],
        },
        "priors": result.priors.to_dict(),
        "trace": [{"iteration": i + 1,
                   "alpha": float(e.alpha),
                   "log_posterior": float(e.log_posterior),
                   "line_search_floor": bool(e.line_search_floor),
                   "theta_star": _floats(e.theta_star)}
                  for i, e in enumerate(result.trace)],
    }
    if result.last_deltas is not None:
        d["last_deltas"] = _floats(result.last_deltas)
    if summary is not None:
        d["summary"] = summary
    if extra:
        d.update(extra)
    return d


def result_from_dict(d):
    trace = [TraceEntry(np.array(e["theta_star"]), np.array(e["theta_star"]),
                        e["alpha"], e["log_posterior"],
                        e.get("line_search_floor", False))
             for e in d.get("trace", [])]
    g = d["gaussian"]
    return PosteriorResult(
        theta_star=np.array(d["theta_star"], dtype=float),
        gaussian=GaussianApprox(np.array(g["mean"], dtype=float),
                                np.array(g["covariance"], dtype=float)),
        trace=trace,
        converged=bool(d["converged"]),
        iterations=int(d["iterations"]),
        priors=PriorSet.from_mapping(d["priors"]),
        message=d.get("message", ""),
        last_deltas=(np.array(d["last_deltas"])
                     if "last_deltas" in d else None))


def dumps(d):
    return json.dumps(d, indent=2, sort_keys=True) + "\n"


def write_result(result, path, summary=None, extra=None):
    with open(path, "w") as fh:
        fh.write(dumps(result_to_dict(result, summary, extra)))


def read_result(path):
    with open(path) as fh:
        return result_from_dict(json.load(fh))
