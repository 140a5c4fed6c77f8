"""Command-line interface: ``serolatent <command> [options]``.

Options may come from a JSON config (``--config FILE`` or inline JSON);
explicit flags override config entries, whose keys are the long option
names with dashes replaced by underscores.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 convergence
failure, 5 numerical failure. Errors print one line on stderr of the form
``serolatent: error <code> <kind>: <message>``.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .age import expected_y, simulate_at_ages
from .estimation.families import FAMILIES, get_family
from .estimation.fitting import METHODS, fit
from .inference import (
    DEFAULT_BOOTSTRAP,
    DEFAULT_ENVELOPE,
    AgeGroupScheme,
    compare_models,
    parametric_bootstrap,
    validate_envelopes,
)
from .io import (
    ConfigError,
    DataError,
    load_json_arg,
    read_csv,
    write_data_csv,
    write_json,
    write_table,
)
from .latent import simulate
from .simstudy import CSV_COLUMNS, DEFAULT_REPLICATES, DEFAULT_SIZES, get_scenario, run_study

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CONVERGENCE, EXIT_NUMERIC = 0, 2, 3, 4, 5
SEED_ENV = "SEROLATENT_SEED"

BOOTSTRAP_COLUMNS = ("parameter", "estimate", "sd", "q025", "q500", "q975")
ENVELOPE_COLUMNS = ("group", "bin_mid", "observed", "lo", "med", "hi")
COMPARE_COLUMNS = ("group", "method", "n", "bic_gmm", "bic_lbm", "delta_bic",
                   "time_gmm_s", "time_lbm_s", "failed")


class ConvergenceFailure(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# ---------------------------------------------------------------------------
# Argument layout
# ---------------------------------------------------------------------------

# Built-in defaults; applied after config and flags so the precedence is
# flag > config > default.
DEFAULTS = {
    "model": "beta",
    "method": "l2",
    "n": 1000,
    "B": DEFAULT_BOOTSTRAP,
    "R": DEFAULT_ENVELOPE,
    "band": "range",
    "age_range": [1.0, 100.0],
    "methods": ["mle", "l2"],
    "replicates": DEFAULT_REPLICATES,
    "sizes": list(DEFAULT_SIZES),
    "scenarios": ["BM", "HT", "IT", "LT"],
    "curve_points": 100,
    "warm_start": True,
}


def _common(p, data=True):
    p.add_argument("--config", help="JSON config file or inline JSON object")
    p.add_argument("--seed", type=int, help=f"random seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--threads", type=int, help="worker processes (default: CPU count)")
    p.add_argument("--out", help="output path (default: stdout)")
    if data:
        p.add_argument("--data", help="CSV with header y or y,age")
        p.add_argument("--log-input", action="store_true", default=None,
                       help="take natural log of y on read")


def _model_opts(p, method=True):
    p.add_argument("--model", choices=sorted(FAMILIES), help="model family (default: beta)")
    if method:
        p.add_argument("--method", choices=METHODS, help="criterion (default: l2)")
    p.add_argument("--bins", type=int, help="histogram bins (default: Sturges)")
    p.add_argument("--fixed", help="JSON object of parameters held fixed")
    p.add_argument("--init", help="JSON object of start values")


def _groups_opt(p):
    p.add_argument("--groups", type=float, nargs="+", metavar="CUT",
                   help="age-group cut points, e.g. 1 6 10 15 20 30 45 100")


def build_parser():
    parser = _Parser(prog="serolatent", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a dataset")
    _common(p, data=False)
    p.add_argument("--scenario", help="built-in scenario: BM, HT, IT or LT")
    p.add_argument("--model", choices=sorted(FAMILIES))
    p.add_argument("--params", help="JSON object with every parameter of --model")
    p.add_argument("--n", type=int, help="sample size (default 1000)")
    p.add_argument("--ages-from", help="copy ages from this CSV")
    p.add_argument("--age-range", type=float, nargs=2, metavar=("LO", "HI"),
                   help="uniform age range for age-dependent models (default 1 100)")

    p = sub.add_parser("fit", help="fit a model and write JSON")
    _common(p)
    _model_opts(p)
    p.add_argument("--emit-curve", help="also write an (age, expected_y) CSV here")
    p.add_argument("--curve-points", type=int, help="ages in the curve grid (default 100)")

    p = sub.add_parser("bootstrap", help="parametric bootstrap of a fit")
    _common(p)
    _model_opts(p)
    p.add_argument("--B", type=int, help=f"replicates (default {DEFAULT_BOOTSTRAP})")
    p.add_argument("--cold-start", dest="warm_start", action="store_false", default=None,
                   help="refit replicates from the default init")
    p.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")

    p = sub.add_parser("validate", help="simulation envelopes by age group")
    _common(p)
    _model_opts(p)
    _groups_opt(p)
    p.add_argument("--R", type=int, help=f"replicates (default {DEFAULT_ENVELOPE})")
    p.add_argument("--band", choices=("range", "quantile"))

    p = sub.add_parser("compare", help="two-point vs single-Beta latent BIC table")
    _common(p)
    _groups_opt(p)
    p.add_argument("--methods", nargs="+", choices=("mle", "l2", "kl", "hybrid"))

    p = sub.add_parser("simstudy", help="simulation study of both estimators")
    _common(p, data=False)
    p.add_argument("--scenarios", nargs="+")
    p.add_argument("--sizes", type=int, nargs="+")
    p.add_argument("--replicates", type=int)
    p.add_argument("--methods", nargs="+", choices=("mle", "l2", "kl", "hybrid"))
    return parser


def resolve(args):
    """Merge flags over config over defaults into a plain namespace."""
    config = load_json_arg(args.config, "config") or {}
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    flags = vars(args)
    unknown = set(config) - set(flags) - {"command"}
    if unknown:
        raise ConfigError(f"unknown config keys for {args.command}: {sorted(unknown)}")
    merged = {}
    for key, value in flags.items():
        if value is None:
            value = config.get(key, DEFAULTS.get(key))
        merged[key] = value
    if merged.get("seed") is None:
        env = os.environ.get(SEED_ENV)
        try:
            merged["seed"] = int(env) if env else 0
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    if merged.get("threads") is None:
        merged["threads"] = os.cpu_count() or 1
    for key in ("n", "B", "R", "replicates", "bins", "threads", "curve_points"):
        v = merged.get(key)
        if v is not None and (not isinstance(v, int) or v < 1):
            raise ConfigError(f"{key} must be a positive integer, got {v!r}")
    for key in ("B", "R"):
        if merged.get(key) is not None and merged[key] < 2:
            raise ConfigError(f"{key} must be at least 2, got {merged[key]!r}")
    return argparse.Namespace(**merged)


def _dict_opt(value, what):
    if value is None or isinstance(value, dict):
        return value
    obj = load_json_arg(value, what)
    if not isinstance(obj, dict):
        raise ConfigError(f"{what} must be a JSON object")
    return obj


def _load(cfg):
    if not cfg.data:
        raise ConfigError("--data is required")
    return read_csv(cfg.data, log_input=bool(cfg.log_input))


def _scheme(cfg):
    return None if not cfg.groups else AgeGroupScheme(tuple(cfg.groups))


def _fit(cfg, data):
    fam = get_family(cfg.model)
    ages = data.require_ages(f"model {fam.name}") if fam.age_dependent else None
    return fit(
        data.y,
        fam,
        cfg.method,
        ages=ages,
        fixed=_dict_opt(cfg.fixed, "--fixed"),
        init=_dict_opt(cfg.init, "--init"),
        bins=cfg.bins,
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def command_simulate(cfg):
    rng = np.random.default_rng(cfg.seed)
    if cfg.scenario:
        if cfg.params is not None:
            raise ConfigError("give either --scenario or --model/--params, not both")
        try:
            scen = get_scenario(cfg.scenario)
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from None
        write_data_csv(cfg.out, simulate(scen.params, cfg.n, rng))
        return EXIT_OK
    if cfg.params is None:
        raise ConfigError("simulate needs --scenario or --params (with --model)")
    fam = get_family(cfg.model)
    params = _dict_opt(cfg.params, "--params")
    missing = [k for k in fam.names if k not in params]
    extra = [k for k in params if k not in fam.names]
    if missing or extra:
        raise ConfigError(f"{fam.name} parameters: missing {missing}, unexpected {extra}")
    try:
        cond, latent = fam.build([float(params[k]) for k in fam.names])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid parameters: {exc}") from None
    if not fam.age_dependent:
        write_data_csv(cfg.out, simulate_at_ages(cond, latent, np.ones(cfg.n), rng))
        return EXIT_OK
    if cfg.ages_from:
        ages = read_csv(cfg.ages_from).require_ages("--ages-from")
    else:
        lo, hi = cfg.age_range
        if not 0 < lo < hi:
            raise ConfigError("--age-range needs 0 < LO < HI")
        ages = rng.uniform(lo, hi, cfg.n)
    write_data_csv(cfg.out, simulate_at_ages(cond, latent, ages, rng), ages)
    return EXIT_OK


def command_fit(cfg):
    data = _load(cfg)
    res = _fit(cfg, data)
    write_json(cfg.out, res.to_dict())
    if cfg.emit_curve:
        if data.ages is not None:
            grid = np.linspace(data.ages.min(), data.ages.max(), cfg.curve_points)
        else:
            grid = np.linspace(1.0, 100.0, cfg.curve_points)
        params = res.params
        ey = expected_y(params.cond, params.latent, grid)
        write_table(cfg.emit_curve, ({"age": float(a), "expected_y": float(v)}
                                     for a, v in zip(grid, ey)), ("age", "expected_y"))
    return _converged(res)


def _converged(res):
    if not res.converged:
        raise ConvergenceFailure(f"{res.method} fit did not converge")
    return EXIT_OK


def command_bootstrap(cfg):
    data = _load(cfg)
    res = _fit(cfg, data)
    _converged(res)
    fam = get_family(cfg.model)
    summary = parametric_bootstrap(
        res,
        ages=data.ages if fam.age_dependent else None,
        B=cfg.B,
        seed=cfg.seed,
        warm_start=cfg.warm_start,
        threads=cfg.threads,
    )
    if (cfg.format or "csv") == "json":
        write_json(cfg.out, {"fit": res.to_dict(), **summary.to_dict()})
    else:
        write_table(cfg.out, summary.rows(), BOOTSTRAP_COLUMNS)
    return EXIT_OK


def command_validate(cfg):
    data = _load(cfg)
    scheme = _scheme(cfg)
    res = _fit(cfg, data)
    ages = data.ages
    if scheme is not None:
        ages = data.require_ages("--groups")
    env = validate_envelopes(res, data.y, ages, scheme, R=cfg.R, band=cfg.band, seed=cfg.seed)
    write_table(cfg.out, env.rows(), ENVELOPE_COLUMNS)
    return EXIT_OK


def command_compare(cfg):
    data = _load(cfg)
    scheme = _scheme(cfg)
    ages = data.require_ages("--groups") if scheme is not None else None
    rows = compare_models(data.y, ages, scheme, methods=tuple(cfg.methods))
    write_table(cfg.out, (r.as_dict() for r in rows), COMPARE_COLUMNS)
    return EXIT_OK


def command_simstudy(cfg):
    try:
        scenarios = [get_scenario(s) for s in cfg.scenarios]
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    study = run_study(
        scenarios,
        sizes=tuple(cfg.sizes),
        replicates=cfg.replicates,
        methods=tuple(cfg.methods),
        seed=cfg.seed,
        threads=cfg.threads,
    )
    write_table(cfg.out, study.rows(), CSV_COLUMNS)
    return EXIT_OK


COMMANDS = {
    "simulate": command_simulate,
    "fit": command_fit,
    "bootstrap": command_bootstrap,
    "validate": command_validate,
    "compare": command_compare,
    "simstudy": command_simstudy,
}


def _fail(code, kind, message):
    print(f"serolatent: error {code} {kind}: {message}", file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve(args)
        return COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    except DataError as exc:
        return _fail(EXIT_DATA, "data", exc)
    except ConvergenceFailure as exc:
        return _fail(EXIT_CONVERGENCE, "convergence", exc)
    except KeyError as exc:
        return _fail(EXIT_CONFIG, "config", exc.args[0] if exc.args else exc)
    except FloatingPointError as exc:
        return _fail(EXIT_NUMERIC, "numeric", exc)
    except ValueError as exc:
        # invalid data-dependent settings surface from the fitting layer
        return _fail(EXIT_DATA, "data", exc)


if __name__ == "__main__":
    sys.exit(main())
