"""``pnr-count`` batch command line.

    pnr-count simulate   --M 40 --p 0.2 --nu 100 --seed 1 --output hist.csv
    pnr-count estimate   hist.csv [--M-max 10000] [--output report.json]
    pnr-count crlb       --M 40 --p 0.2 --nu 10000 [--coverage 0.95]
    pnr-count montecarlo --M 40 --p 0.2 --nu-list 1000,10000 --runs 500 --seed 7 --output study.csv
    pnr-count plan       --target 0.01 --output plan.csv

Values come from built-in defaults, then ``--config FILE`` (JSON object), then
command-line flags.  Unknown config keys are rejected.
"""
import argparse
import json
import secrets
import sys
from pathlib import Path

import numpy as np

from . import io as fmt
from .estimation import UnidentifiableError, mle
from .fisher import SingularFisherError, crlb, ellipse, ellipse_transform_beta_to_theta, fim
from .model import EmitterModel, ModelError, pmf_theta, sample_histogram, to_beta
from .montecarlo import scaling_study, study_table
from .planner import experiments_needed, plan_grid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_UNIDENTIFIABLE = 4
EXIT_NUMERICAL = 5


class ConfigError(Exception):
    pass


def _int_list(s):
    return [int(float(x)) for x in str(s).split(",") if x.strip()]


def _float_list(s):
    return [float(x) for x in str(s).split(",") if x.strip()]


# key -> (type, default); REQUIRED marks keys without a default
REQUIRED = object()
SCHEMAS = {
    "simulate": {"M": (int, REQUIRED), "p": (float, REQUIRED), "nu": (int, REQUIRED), "seed": (int, None),
                 "output": (str, REQUIRED), "threads": (int, 1)},
    "estimate": {"input": (str, REQUIRED), "M_max": (int, None), "output": (str, "-"), "profile": (bool, True),
                 "threads": (int, 1)},
    "crlb": {"M": (int, REQUIRED), "p": (float, REQUIRED), "nu": (int, 1), "coverage": (float, 0.95),
             "boundary_points": (int, 100), "output": (str, "-"), "threads": (int, 1)},
    "montecarlo": {"M": (int, REQUIRED), "p": (float, REQUIRED), "nu_list": (list, [100, 1000, 10000, 100000]),
                   "runs": (int, 500), "seed": (int, None), "M_max": (int, None), "output": (str, REQUIRED),
                   "format": (str, "csv"), "threads": (int, 1)},
    "plan": {"M_range": (list, [2, 2000]), "p_range": (list, [1e-3, 0.999]), "resolution": (list, [50, 50]),
             "target": (float, 0.01), "lambdas": (list, [5, 10, 20, 50]), "pulse_period": (float, 1e-6),
             "output": (str, REQUIRED), "contours_output": (str, None), "format": (str, "csv"),
             "threads": (int, 1)},
}


def _coerce(key, typ, value):
    if value is None:
        return None
    try:
        if typ is bool:
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "on")
            return bool(value)
        if typ is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if typ is list:
            return list(value)
        return typ(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot interpret {value!r} as {typ.__name__}") from None


def resolve_config(command, file_values, flag_values):
    schema = SCHEMAS[command]
    unknown = sorted(set(file_values) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config field(s) for {command}: {', '.join(unknown)}")
    cfg = {"command": command}
    for key, (typ, default) in schema.items():
        val = flag_values.get(key)
        if val is None:
            val = file_values.get(key)
        if val is None:
            if default is REQUIRED:
                raise ConfigError(f"missing required setting {key!r}")
            val = default
        cfg[key] = _coerce(key, typ, val)
    if "seed" in schema and cfg["seed"] is None:
        cfg["seed"] = secrets.randbits(63)
        print(f"seed: {cfg['seed']}", file=sys.stderr)
    return cfg


def _model(cfg):
    try:
        return EmitterModel(cfg["M"], cfg["p"])
    except ModelError as e:
        raise ConfigError(str(e)) from None


def _write(path, text):
    if path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot write {path}: {e}") from None


def _sidecar(path):
    return str(Path(path).with_suffix(".json"))


# ----------------------------------------------------------------- commands

def cmd_simulate(cfg):
    model = _model(cfg)
    if cfg["nu"] < 1:
        raise ConfigError("nu must be >= 1")
    hist = sample_histogram(model, cfg["nu"], cfg["seed"], workers=cfg["threads"])
    _write(cfg["output"], fmt.format_histogram(hist, cfg))
    N = np.arange(model.M + 1)
    body = {"histogram": hist.as_dict(), "nu": hist.nu,
            "ideal_pmf": [[int(n), float(v)] for n, v in zip(N, pmf_theta(N, model))],
            "relative_frequency": [[n, c / hist.nu] for n, c in hist.as_dict().items()]}
    _write(_sidecar(cfg["output"]), fmt.dumps_report("simulate", cfg, body))


def cmd_estimate(cfg):
    try:
        hist = fmt.read_histogram(cfg["input"])
    except OSError as e:
        raise ConfigError(f"cannot read {cfg['input']}: {e}") from None
    res = mle(hist, M_max=cfg["M_max"], keep_profile=cfg["profile"])
    body = {"estimate": res.to_dict(with_profile=cfg["profile"]), "nu": hist.nu, "max_count": hist.max_count}
    _write(cfg["output"], fmt.dumps_report("estimate", cfg, body))


def _ellipse_doc(ell, n):
    return {"center": ell.center, "semi_axes": ell.semi_axes, "orientation": ell.orientation,
            "coverage": ell.coverage, "quantile": ell.quantile, "boundary": ell.boundary(n)}


def cmd_crlb(cfg):
    model = _model(cfg)
    if not 0.0 < model.p < 1.0:
        raise ConfigError("crlb needs 0 < p < 1")
    beta = to_beta(model)
    body = {}
    for kind, center in (("theta", (model.M, model.p)), ("beta", (beta.lam, beta.xi))):
        info = fim(model, kind)
        cov = crlb(model, cfg["nu"], kind)
        body[kind] = {"fim": info.entries, "truncation": info.truncation,
                      "covariance": cov.entries, "covariance_per_experiment": cov.per_experiment,
                      "ellipse": _ellipse_doc(ellipse(cov, center, cfg["coverage"]), cfg["boundary_points"])}
    curve, valid = ellipse_transform_beta_to_theta(body["beta"]["ellipse"]["boundary"])
    body["theta"]["mapped_region"] = {"boundary": np.where(valid[:, None], curve, np.nan), "valid": valid}
    body["beta_model"] = {"lambda": beta.lam, "xi": beta.xi}
    req = experiments_needed(model, 0.01)
    body["experiments_for_1pct"] = {"nu_exact": req.nu_exact, "nu": req.nu}
    _write(cfg["output"], fmt.dumps_report("crlb", cfg, body))


STUDY_COLUMNS = ["nu", "parameter", "truth", "sample_mean", "sample_variance", "crlb_variance", "variance_ratio",
                 "runs", "runs_used", "unidentifiable", "not_converged", "inside_ellipse_fraction"]


def cmd_montecarlo(cfg):
    model = _model(cfg)
    nus = _int_list(",".join(map(str, cfg["nu_list"])))
    res = scaling_study(model, nus, cfg["runs"], cfg["seed"], M_max=cfg["M_max"], workers=cfg["threads"])
    rows = study_table(res)
    if cfg["format"] == "json":
        _write(cfg["output"], fmt.dumps_report("montecarlo", cfg, {"rows": rows}))
    elif cfg["format"] == "csv":
        _write(cfg["output"], fmt.format_table(rows, STUDY_COLUMNS, cfg))
    else:
        raise ConfigError(f"unknown format {cfg['format']!r}")


def cmd_plan(cfg):
    res = cfg["resolution"]
    grid = plan_grid(tuple(cfg["M_range"]), tuple(cfg["p_range"]), tuple(res) if len(res) == 2 else res[0],
                     cfg["target"], tuple(cfg["lambdas"]), workers=cfg["threads"])
    if cfg["format"] == "json":
        body = {"M_axis": grid.M_axis, "p_axis": grid.p_axis, "nu_exact": grid.nu_exact,
                "nu_required": grid.nu_required,
                "acquisition_seconds": grid.nu_exact * cfg["pulse_period"],
                "contours": [{"lambda": lam, "points": prof} for lam, prof in grid.contours]}
        _write(cfg["output"], fmt.dumps_report("plan", cfg, body))
        return
    if cfg["format"] != "csv":
        raise ConfigError(f"unknown format {cfg['format']!r}")
    _write(cfg["output"], fmt.format_plan_matrix(grid, cfg))
    contours = cfg["contours_output"] or str(Path(cfg["output"]).with_name(Path(cfg["output"]).stem + "_contours.csv"))
    _write(contours, fmt.format_contours(grid, cfg))


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "crlb": cmd_crlb,
            "montecarlo": cmd_montecarlo, "plan": cmd_plan}


def build_parser():
    ap = argparse.ArgumentParser(prog="pnr-count", description="Emitter counting with photon-number-resolving detectors.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seeded=False):
        p.add_argument("--config", help="JSON object with settings; flags override it")
        p.add_argument("--output", "-o")
        p.add_argument("--threads", type=int)
        if seeded:
            p.add_argument("--seed", type=int)
        return p

    def model_flags(p):
        p.add_argument("--M", type=int, dest="M")
        p.add_argument("--p", type=float, dest="p")

    s = common(sub.add_parser("simulate", help="sample a synthetic photon histogram"), seeded=True)
    model_flags(s)
    s.add_argument("--nu", type=int)

    e = common(sub.add_parser("estimate", help="maximum-likelihood (M, p) from a histogram CSV"))
    e.add_argument("input", nargs="?")
    e.add_argument("--M-max", type=int, dest="M_max")
    e.add_argument("--no-profile", action="store_const", const=False, dest="profile")

    c = common(sub.add_parser("crlb", help="Fisher information, CRLB and 95%% ellipses"))
    model_flags(c)
    c.add_argument("--nu", type=int)
    c.add_argument("--coverage", type=float)
    c.add_argument("--boundary-points", type=int, dest="boundary_points")

    m = common(sub.add_parser("montecarlo", help="variance-vs-nu Monte-Carlo study"), seeded=True)
    model_flags(m)
    m.add_argument("--nu-list", type=_int_list, dest="nu_list")
    m.add_argument("--runs", type=int)
    m.add_argument("--M-max", type=int, dest="M_max")
    m.add_argument("--format", choices=["csv", "json"])

    p = common(sub.add_parser("plan", help="experiments needed over an (M, p) grid"))
    p.add_argument("--M-range", type=_int_list, dest="M_range")
    p.add_argument("--p-range", type=_float_list, dest="p_range")
    p.add_argument("--resolution", type=_int_list)
    p.add_argument("--target", type=float)
    p.add_argument("--lambdas", type=_float_list)
    p.add_argument("--pulse-period", type=float, dest="pulse_period")
    p.add_argument("--contours-output", dest="contours_output")
    p.add_argument("--format", choices=["csv", "json"])
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        file_values = {}
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    file_values = json.load(fh)
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"cannot load config {args.config}: {e}") from None
            if not isinstance(file_values, dict):
                raise ConfigError("config file must hold a JSON object")
        cfg = resolve_config(args.command, file_values, flags)
        COMMANDS[args.command](cfg)
    except ConfigError as e:
        print(f"pnr-count: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except fmt.HistogramParseError as e:
        print(f"pnr-count: parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except UnidentifiableError as e:
        print(f"pnr-count: {e}", file=sys.stderr)
        return EXIT_UNIDENTIFIABLE
    except (SingularFisherError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"pnr-count: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, ModelError) as e:
        print(f"pnr-count: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
