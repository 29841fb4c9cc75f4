"""Command-line interface: ``pswdisparity {load,fit,balance,estimate,iomc,simulate}``.

Exit status is 0 on success, 2 for invalid input or configuration and 1 for
numerical failures. Warnings are echoed to stderr and embedded in the JSON
output. Outputs carry no timestamps, so a rerun with the same config and seed
rewrites byte-identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import load_config
from .data import design_columns, load_dataset
from .diagnostics import balance_report, love_plot_svg, overlap_summary, ps_density_svg
from .errors import DataError, NumericError, TailMassWarning
from .estimation import estimate_wacd
from .iomc import iomc_disparity
from .propensity import fit_logistic
from .synth import generate, load_scenario, replicate_study
from .weighting import Scheme, balancing_weights

TAIL_MASS_WARN = 0.10


def _parse_trim(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected two numbers 'lo,hi'") from None
    return [lo, hi]


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _header(cfg_hash: str, subcommand: str) -> dict:
    return {"config_hash": cfg_hash, "version": __version__, "command": subcommand}


def _check_tail_mass(model, group):
    summary = overlap_summary(model, group)
    for g in (1, 0):
        if summary.tail_mass[g] > TAIL_MASS_WARN:
            warnings.warn(
                f"{summary.tail_mass[g]:.1%} of group-{g} units have propensity "
                "below 0.05 or above 0.95; overlap is limited",
                TailMassWarning, stacklevel=2,
            )
    return summary


def _load(args):
    cfg = load_config(args.config)
    overrides = {}
    for key in ("scheme", "variance", "reps", "seed", "trim"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if getattr(args, "out", None):
        overrides["output_dir"] = args.out
    cfg = cfg.with_overrides(**overrides)
    try:
        ds = load_dataset(cfg.data_path(), cfg)
    except FileNotFoundError:
        raise DataError(f"data file not found: {cfg.data_path()}") from None
    out = Path(cfg.output_dir)
    if not out.is_absolute() and cfg.base_dir is not None and not getattr(args, "out", None):
        out = Path(cfg.base_dir) / out
    return cfg, ds, out


def _estimate_json(est, ds, scheme) -> dict:
    lo, hi = est.ci_95
    return {
        "estimate": est.tau_hat,
        "se": est.se,
        "ci": [lo, hi],
        "scheme": scheme.value,
        "n": ds.n_units,
        "ess_1": est.ess[0],
        "ess_0": est.ess[1],
        "group_means": list(est.group_means),
        "variance_method": est.variance_method,
        "reps": est.n_reps,
        "seed": est.seed,
        "n_trimmed": est.n_trimmed,
        "n_redrawn": est.n_redrawn,
    }


def cmd_load(args) -> tuple[dict, Path, str]:
    cfg, ds, out = _load(args)
    result = {
        **_header(cfg.config_hash(), "load"),
        "n": ds.n_units,
        "n_group": {"1": int(ds.group.sum()), "0": int(ds.n_units - ds.group.sum())},
        "group": ds.group_name,
        "outcome": ds.outcome_name,
        "columns": list(ds.covariate_names),
        "roles": {c: ds.roles[c] for c in ds.covariate_names},
        "propensity_columns": list(design_columns(ds, cfg.covariate_spec())),
    }
    return result, out, "dataset_summary.json"


def cmd_fit(args) -> tuple[dict, Path, str]:
    cfg, ds, out = _load(args)
    model = fit_logistic(ds, cfg.covariate_spec())
    result = {**_header(cfg.config_hash(), "fit"), "model": model.to_dict()}
    return result, out, "propensity_model.json"


def cmd_balance(args) -> tuple[dict, Path, str]:
    cfg, ds, out = _load(args)
    model = fit_logistic(ds, cfg.covariate_spec())
    _check_tail_mass(model, ds.group)
    report = balance_report(ds, model, ("ipw", "att", "ow"), cfg.threshold, cfg.bins)
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(out / "balance_report.csv")
    report.propensity_summary.to_csv(out / "ps_histogram.csv")
    if args.svg or cfg.svg:
        _write(out / "love_plot.svg", love_plot_svg(report))
        _write(out / "ps_density.svg", ps_density_svg(
            report.propensity_summary, (f"{cfg.group}=1", f"{cfg.group}=0")))
    result = {
        **_header(cfg.config_hash(), "balance"),
        "threshold": cfg.threshold,
        "exact_balance_ow": report.exact_balance_ok,
        "max_asd": {"unweighted": report.max_asd(),
                    **{s.value: report.max_asd(s) for s in report.schemes}},
        "flags": {k if isinstance(k, str) else k.value: v for k, v in report.flags.items()},
        "tail_mass": {str(g): v for g, v in report.propensity_summary.tail_mass.items()},
    }
    return result, out, "balance.json"


def cmd_estimate(args) -> tuple[dict, Path, str]:
    cfg, ds, out = _load(args)
    scheme = Scheme.parse(cfg.scheme)
    spec = cfg.covariate_spec()
    model = fit_logistic(ds, spec)
    _check_tail_mass(model, ds.group)
    est = estimate_wacd(ds, spec, scheme, cfg.variance, cfg.reps, cfg.seed, cfg.trim,
                        model=model, extreme_multiple=cfg.extreme_weight_multiple)
    result = {**_header(cfg.config_hash(), "estimate"), **_estimate_json(est, ds, scheme),
              "trim": list(cfg.trim) if cfg.trim else None}
    if args.weights:
        ws = balancing_weights(model, ds.group, scheme, cfg.trim, cfg.extreme_weight_multiple)
        out.mkdir(parents=True, exist_ok=True)
        ws.to_csv(out / "weights.csv")
    return result, out, "estimate.json"


def cmd_iomc(args) -> tuple[dict, Path, str]:
    cfg, ds, out = _load(args)
    scheme = Scheme.parse(cfg.scheme)
    model = fit_logistic(ds, cfg.covariate_spec())
    _check_tail_mass(model, ds.group)
    est = iomc_disparity(ds, model, scheme, reps=cfg.reps, seed=cfg.seed, trim=cfg.trim,
                         extreme_multiple=cfg.extreme_weight_multiple)
    result = {
        **_header(cfg.config_hash(), "iomc"), **_estimate_json(est, ds, scheme),
        "gamma1": est.extra["gamma1"],
        "n_replaced_identity": est.extra["n_replaced_identity"],
        "ecdf_sup_distance_per_group": {
            str(g): v for g, v in est.extra["ecdf_sup_distance_per_group"].items()},
    }
    return result, out, "iomc.json"


def cmd_simulate(args) -> tuple[dict, Path, str]:
    sc = load_scenario(args.scenario)
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    blob = json.dumps(sc.to_dict(), sort_keys=True, separators=(",", ":"))
    cfg_hash = hashlib.sha256(f"{blob}|reps={args.reps}".encode()).hexdigest()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = replicate_study(sc, args.reps)
    table.to_csv(out / "simulation_results.csv")
    _, truth = generate(sc)
    _write(out / "ground_truth.json", _dump({**_header(cfg_hash, "simulate"),
                                             "scenario": sc.to_dict(), **truth.to_dict()}))
    result = {**_header(cfg_hash, "simulate"), "reps": args.reps,
              "results": [r.as_dict() for r in table.rows]}
    return result, out, "simulation.json"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pswdisparity", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="analysis config JSON")
        p.add_argument("--out", help="output directory (overrides config output_dir)")

    p = sub.add_parser("load", help="validate config and data, summarize the dataset")
    common(p)
    p.set_defaults(func=cmd_load)

    p = sub.add_parser("fit", help="fit the logistic propensity model")
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("balance", help="ASD balance report and propensity histograms")
    common(p)
    p.add_argument("--svg", action="store_true", help="also write love_plot.svg and ps_density.svg")
    p.set_defaults(func=cmd_balance)

    for name, func in (("estimate", cmd_estimate), ("iomc", cmd_iomc)):
        p = sub.add_parser(name, help="Hajek WACD estimate" if name == "estimate"
                           else "IOM-concordant estimate with rank-and-replace")
        common(p)
        p.add_argument("--scheme", choices=["ipw", "att", "atc", "ow"])
        if name == "estimate":
            p.add_argument("--variance", choices=["sandwich", "bootstrap"])
            p.add_argument("--weights", action="store_true", help="write weights.csv for audit")
        p.add_argument("--reps", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--trim", type=_parse_trim, help="propensity bounds 'lo,hi'")
        p.set_defaults(func=func)

    p = sub.add_parser("simulate", help="Monte-Carlo study of a synthetic scenario")
    p.add_argument("--scenario", required=True, help="scenario JSON")
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="sim_out")
    p.set_defaults(func=cmd_simulate)
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            result, out, fname = args.func(args)
        except DataError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        except NumericError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    messages = []
    for w in caught:
        msg = f"{w.category.__name__}: {w.message}"
        if msg not in messages:
            messages.append(msg)
    for msg in messages:
        print(f"warning: {msg}", file=sys.stderr)
    result["warnings"] = messages
    text = _dump(result)
    _write(out / fname, text)
    sys.stdout.write(text)
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
