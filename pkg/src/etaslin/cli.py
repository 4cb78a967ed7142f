"""Command-line entry point: ``etaslin {simulate,fit,mcmc,diagnose,sweep-bins}``.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure.
"""

import argparse
import datetime as dt
import itertools
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import CatalogError, read_catalog, write_catalog
from .config import (ConfigError, binning_from, fit_config_from, load_config,
                     mcmc_config_from, sim_config_from, window_from)
from .diagnostics import (band_to_text, predictive_band, transformed_times,
                          uniformity_test)
from .inference import InferenceError, fit, posterior_summary
from .linearization import build_surrogate
from .mcmc import chain_diagnostics, mh_sample
from .priors import PriorError
from .serialize import dumps, read_result, result_to_dict
from .simulator import SimulationOverflow, simulate

logger = logging.getLogger("etaslin")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write(path, text):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _load_catalog(path, data, jitter):
    if not Path(path).is_file():
        raise UsageError(f"catalog file not found: {path}")
    if jitter is None:
        jitter = data.get("jitter_ties")
    return read_catalog(path, window_from(data), jitter_ties=jitter)


def cmd_simulate(args):
    data = load_config(args.config)
    cfg = sim_config_from(data, seed=args.seed)
    catalog = simulate(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_catalog(catalog, out)
    manifest = {
        "command": "simulate",
        "config_file": str(args.config),
        "config": data,
        "seed": cfg.seed,
        "n_events": len(catalog),
        "branching_ratio": cfg.branching_ratio,
        "catalog_file": str(out),
        "version": __version__,
        "created": dt.datetime.now(dt.timezone.utc).isoformat(),
    }
    _write(args.manifest or out.with_suffix(".manifest.json"),
           json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    print(f"wrote {len(catalog)} events to {out}")
    return EXIT_OK


def _fit_payload(catalog, cfg, n_samples, seed):
    result = fit(catalog, cfg)
    summary = posterior_summary(result, n_samples, seed, force=True)
    w = catalog.window
    extra = {"n_events": len(catalog),
             "window": {"t_start": w.t_start, "t_end": w.t_end,
                        "m_cutoff": w.m_cutoff},
             "binning": {"delta": cfg.binning.delta,
                         "growth": cfg.binning.growth,
                         "n_max": cfg.binning.n_max},
             "summary_samples": n_samples, "seed": seed}
    return result, result_to_dict(result, summary, extra)


def cmd_fit(args):
    data = load_config(args.config)
    catalog = _load_catalog(args.catalog, data, args.jitter_ties)
    binning = binning_from(data, delta=args.delta, growth=args.growth,
                           n_max=args.n_max)
    cfg = fit_config_from(data, args.preset, args.gamma_scale, binning)
    seed = args.seed if args.seed is not None else int(data.get("seed", 0))
    n_samples = args.n_samples or int(
        data.get("fit", {}).get("n_samples", 10_000))
    result, payload = _fit_payload(catalog, cfg, n_samples, seed)
    _write(args.out, dumps(payload))
    if args.surrogate_out:
        _write(args.surrogate_out,
               build_surrogate(catalog, cfg.binning).to_text())
    state = "converged" if result.converged else "NOT converged"
    print(f"{state} after {result.iterations} iterations; wrote {args.out}")
    return EXIT_OK


def cmd_mcmc(args):
    data = load_config(args.config)
    catalog = _load_catalog(args.catalog, data, args.jitter_ties)
    cfg = mcmc_config_from(data, args.seed, args.preset, args.gamma_scale)
    if args.n_iter is not None or args.burn_in is not None:
        cfg = type(cfg)(n_iter=args.n_iter or cfg.n_iter,
                        burn_in=(args.burn_in if args.burn_in is not None
                                 else cfg.burn_in),
                        proposal_scales=cfg.proposal_scales, seed=cfg.seed,
                        priors=cfg.priors)
    chains = mh_sample(catalog, cfg)
    _write(args.out, chains.to_text())
    report = chain_diagnostics(chains)
    report_path = args.report or Path(args.out).with_suffix(".diag.json")
    _write(report_path, json.dumps(
        {"n_iter": cfg.n_iter, "burn_in": cfg.burn_in, "seed": cfg.seed,
         "stuck": chains.stuck, "proposal_scales": chains.scales.tolist(),
         "diagnostics": report}, indent=2, sort_keys=True) + "\n")
    print(f"wrote {cfg.n_iter - cfg.burn_in} draws to {args.out}")
    return EXIT_OK


def cmd_diagnose(args):
    if not Path(args.result).is_file():
        raise UsageError(f"result file not found: {args.result}")
    result = read_result(args.result)
    if not result.converged and not args.force:
        raise UsageError("result did not converge; rerun with --force")
    if args.config:
        data = load_config(args.config)
    else:
        stored = json.loads(Path(args.result).read_text()).get("window")
        if stored is None:
            raise UsageError("result has no window; pass --config")
        data = {"window": stored}
    catalog = _load_catalog(args.catalog, data, args.jitter_ties)
    trans = transformed_times(catalog, result.params)
    stat, pval = uniformity_test(trans)
    band = predictive_band(catalog, result, args.n_samples, args.seed,
                           force=args.force)
    out = Path(args.out)
    _write(out, band_to_text(band))
    rows = ["index,t,transformed"] + [
        f"{i + 1},{float(t)!r},{float(v)!r}"
        for i, (t, v) in enumerate(zip(catalog.times, trans))]
    _write(out.with_name(out.stem + ".transformed.csv"), "\n".join(rows) + "\n")
    report = {"ks_statistic": stat, "ks_p_value": pval,
              "n_events": len(catalog),
              "compensator_total": float(trans[-1]),
              "n_samples": args.n_samples, "seed": args.seed}
    _write(args.report or out.with_suffix(".ks.json"),
           json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"KS statistic {stat:.4f}, p-value {pval:.4f}; wrote {out}")
    return EXIT_OK


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _sweep_cell(job):
    catalog, cfg, n_samples, seed = job
    try:
        result, payload = _fit_payload(catalog, cfg, n_samples, seed)
    except (InferenceError, ValueError, np.linalg.LinAlgError) as exc:
        return {"growth": cfg.binning.growth, "n_max": cfg.binning.n_max,
                "delta": cfg.binning.delta, "iterations": -1,
                "converged": False, "message": str(exc)}
    row = {"growth": cfg.binning.growth, "n_max": cfg.binning.n_max,
           "delta": cfg.binning.delta, "iterations": result.iterations,
           "converged": result.converged, "message": result.message}
    for k in ("K", "c", "p"):
        row[f"{k}_mean"] = payload["summary"][k]["mean"]
        row[f"{k}_sd"] = payload["summary"][k]["sd"]
        row[f"{k}_median"] = payload["summary"][k]["q0.5"]
    return row


SWEEP_COLUMNS = ("growth", "n_max", "delta", "iterations", "converged",
                 "K_mean", "K_sd", "K_median", "c_mean", "c_sd", "c_median",
                 "p_mean", "p_sd", "p_median", "message")


def sweep_table(rows, delimiter=","):
    lines = [delimiter.join(SWEEP_COLUMNS)]
    for r in rows:
        vals = []
        for c in SWEEP_COLUMNS:
            v = r.get(c, "")
            vals.append(repr(v) if isinstance(v, float) else
                        json.dumps(v) if c == "message" else str(v))
        lines.append(delimiter.join(vals))
    return "\n".join(lines) + "\n"


def run_sweep(catalog, data, growths, n_maxes, deltas, preset=None,
              gamma_scale=None, n_samples=2000, seed=0, jobs=1):
    """Fit every binning combination; rows sorted by iteration count."""
    jobs_list = []
    for g, nm, d in itertools.product(growths, n_maxes, deltas):
        binning = binning_from(data, delta=d, growth=g, n_max=int(nm))
        cfg = fit_config_from(data, preset, gamma_scale, binning)
        jobs_list.append((catalog, cfg, n_samples, seed))
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_sweep_cell, jobs_list))
    else:
        rows = [_sweep_cell(j) for j in jobs_list]
    order = sorted(range(len(rows)),
                   key=lambda i: (rows[i]["iterations"] < 0,
                                  rows[i]["iterations"], i))
    return [rows[i] for i in order]


def cmd_sweep_bins(args):
    data = load_config(args.config)
    catalog = _load_catalog(args.catalog, data, args.jitter_ties)
    seed = args.seed if args.seed is not None else int(data.get("seed", 0))
    rows = run_sweep(catalog, data, _floats(args.growth),
                     [int(v) for v in _floats(args.n_max)],
                     _floats(args.delta), args.preset, args.gamma_scale,
                     args.n_samples, seed, args.jobs)
    _write(args.out, sweep_table(rows))
    n_conv = sum(r["converged"] for r in rows)
    print(f"{n_conv}/{len(rows)} cells converged; wrote {args.out}")
    return EXIT_OK


def build_parser():
    p = _Parser(prog="etaslin", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, catalog=True):
        if catalog:
            sp.add_argument("catalog", help="delimited catalog file")
            sp.add_argument("--jitter-ties", type=float, default=None,
                            metavar="EPS",
                            help="separate tied times by EPS days")
        sp.add_argument("--seed", type=int, default=None)

    def prior_flags(sp):
        sp.add_argument("--preset", choices=("replicate", "gamma"))
        sp.add_argument("--gamma-scale", type=float, default=None,
                        metavar="GAMMA",
                        help="mean-preserving gamma priors, variance ~ 1/GAMMA")

    sp = sub.add_parser("simulate", help="simulate an ETAS catalog")
    sp.add_argument("config")
    sp.add_argument("-o", "--out", default="catalog.csv")
    sp.add_argument("--manifest", default=None)
    common(sp, catalog=False)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="linearized posterior fit")
    common(sp)
    sp.add_argument("config")
    sp.add_argument("-o", "--out", default="result.json")
    sp.add_argument("--n-samples", type=int, default=None)
    sp.add_argument("--delta", type=float, default=None)
    sp.add_argument("--growth", type=float, default=None)
    sp.add_argument("--n-max", type=int, default=None)
    sp.add_argument("--surrogate-out", default=None,
                    help="also export the surrogate dataset table")
    prior_flags(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("mcmc", help="exact-likelihood MCMC reference")
    common(sp)
    sp.add_argument("config")
    sp.add_argument("-o", "--out", default="chains.csv")
    sp.add_argument("--report", default=None)
    sp.add_argument("--n-iter", type=int, default=None)
    sp.add_argument("--burn-in", type=int, default=None)
    prior_flags(sp)
    sp.set_defaults(func=cmd_mcmc)

    sp = sub.add_parser("diagnose", help="time-change residuals and bands")
    common(sp)
    sp.add_argument("result")
    sp.add_argument("--config", default=None)
    sp.add_argument("-o", "--out", default="envelope.csv")
    sp.add_argument("--report", default=None)
    sp.add_argument("--n-samples", type=int, default=1000)
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("sweep-bins", help="binning sensitivity grid")
    common(sp)
    sp.add_argument("config")
    sp.add_argument("-o", "--out", default="sweep.csv")
    sp.add_argument("--growth", default="1,2,3,5,7,10")
    sp.add_argument("--delta", default="0.1,0.2,0.5")
    sp.add_argument("--n-max", default="3,10")
    sp.add_argument("--n-samples", type=int, default=2000)
    sp.add_argument("--jobs", type=int, default=1)
    prior_flags(sp)
    sp.set_defaults(func=cmd_sweep_bins)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "seed", None) is None and args.command == "diagnose":
        args.seed = 0
    try:
        return args.func(args)
    except (UsageError, ConfigError, CatalogError, PriorError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InferenceError, SimulationOverflow, np.linalg.LinAlgError,
            FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
