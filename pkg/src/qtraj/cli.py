"""Command-line interface.

Exit codes: 0 success, 1 usage/config/IO error, 2 negative verdict
(non-commutative measurement), 3 numerical failure (diverged integration or
an oracle disagreement).
"""

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import commute, ensemble, network
from .errors import (
    ConfigurationError,
    ImpossibleJumpError,
    IntegrationDivergedError,
    InvalidDimensionError,
    OracleMismatchError,
    ShapeError,
)
from .serialize import from_pairs, git_blob_hash

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NEGATIVE = 2
EXIT_NUMERICAL = 3


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def load_json(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from None


def parse_overrides(items):
    """``["k=v", ...]`` -> dict; values are parsed as JSON when possible."""
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise CliError(f"override {item!r} is not of the form key=value")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _sim_config(path, overrides):
    data = load_json(path)
    if not isinstance(data, dict):
        raise CliError(f"{path}: config must be a JSON object")
    data.update(parse_overrides(overrides))
    if data.get("records_path") and not os.path.isabs(data["records_path"]):
        data["records_path"] = os.path.abspath(data["records_path"])
    return ensemble.SimulationConfig.from_dict(data)


def _write_outputs(outdir, stem, config_dict, header, rows, metadata):
    os.makedirs(outdir, exist_ok=True)
    buf = io.StringIO()
    buf.write("# config=" + json.dumps(config_dict, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(x)) for x in row])
    data = buf.getvalue().encode()
    csv_path = os.path.join(outdir, stem + ".csv")
    with open(csv_path, "wb") as fh:
        fh.write(data)
    metadata = dict(metadata)
    metadata["config"] = config_dict
    metadata["csv"] = os.path.basename(csv_path)
    metadata["content_hash"] = git_blob_hash(data)
    with open(os.path.join(outdir, stem + ".json"), "w") as fh:
        json.dump(metadata, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return csv_path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def cmd_simulate(args):
    config = _sim_config(args.config, args.set)
    cfg = config.to_dict()
    if config.mode == "filter-from-records":
        rec = ensemble.filter_records(config)
        analytic = [ensemble.analytic_mean_number(config.n0, config.gamma, t) for t in rec.times]
        rows = zip(rec.times, rec.expectations["N"], analytic)
        meta = {"mode": config.mode, "n_jumps": rec.n_jumps, "n_records": len(rec.records)}
        path = _write_outputs(args.output, "filtered", cfg, ["t", "N", "analytic_N"], rows, meta)
    else:
        summary = ensemble.run_ensemble(config, threads=args.threads)
        rows = zip(summary.times, summary.mean_N, summary.stderr_N, summary.analytic_N)
        path = _write_outputs(args.output, "ensemble", cfg, ["t", "mean_N", "stderr_N", "analytic_N"], rows, summary.metadata)
    print(path)
    return EXIT_OK


def cmd_compare(args):
    config = _sim_config(args.config, args.set)
    if config.n_traj < 2:
        raise CliError("compare-kuramochi needs n_traj >= 2 (the standard error is undefined for one trajectory)")
    rep = ensemble.compare_filters(config, threads=args.threads)
    header = ["t", "mean_corrected", "mean_kuramochi", "analytic", "z_corrected", "z_kuramochi"]
    rows = zip(rep.times, rep.mean_corrected, rep.mean_kuramochi, rep.analytic, rep.z_corrected, rep.z_kuramochi)
    meta = dict(rep.metadata)
    meta["max_abs_z_corrected"] = float(np.max(np.abs(rep.z_corrected)))
    meta["max_abs_z_kuramochi"] = float(np.max(np.abs(rep.z_kuramochi)))
    path = _write_outputs(args.output, "comparison", config.to_dict(), header, rows, meta)
    print(path)
    print(json.dumps({k: meta[k] for k in ("max_abs_z_corrected", "max_abs_z_kuramochi")}))
    return EXIT_OK


def cmd_check_commute(args):
    data = load_json(args.config)
    if not isinstance(data, dict) or "F" not in data or "G" not in data:
        raise CliError(f"{args.config}: expected an object with keys F and G")
    spec = commute.MeasurementSpec(from_pairs(data["F"], 2, "F"), from_pairs(data["G"], 2, "G"))
    report = commute.check_self_commutative(spec, tol=data.get("tol"))
    out = report.to_dict()
    if args.oracle:
        commute.cross_validate(spec, trials=args.oracle, rng=np.random.default_rng(args.seed))
        out["oracle_trials"] = args.oracle
        out["oracle_agrees"] = True
    print(json.dumps(out, indent=2))
    return EXIT_OK if report.commutative else EXIT_NEGATIVE


def cmd_slh_compose(args):
    data = load_json(args.config)
    if not isinstance(data, dict) or "components" not in data or "expression" not in data:
        raise CliError(f"{args.config}: expected an object with keys components and expression")
    comps = {name: network.SLHModel.from_dict(d, name) for name, d in data["components"].items()}
    result = network.compose(data["expression"], comps)
    print(json.dumps(result.to_dict()))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="qtraj", description="Quantum filters for joint homodyne and photon-counting measurement.")
    sub = p.add_subparsers(dest="command", required=True)

    def sim_args(sp):
        sp.add_argument("config", help="simulation config JSON")
        sp.add_argument("-o", "--output", required=True, help="output directory")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (default: $QTRAJ_THREADS or 1)")

    sp = sub.add_parser("simulate", help="run an ensemble or filter a measured record")
    sim_args(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("compare-kuramochi", help="corrected vs Kuramochi filter on shared noise")
    sim_args(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("check-commute", help="self-commutativity verdict for a measurement (F, G)")
    sp.add_argument("config", help="JSON with F and G as nested [re, im] pairs or reals")
    sp.add_argument("--oracle", type=int, default=0, metavar="N", help="also cross-check against N random Ito expansions")
    sp.add_argument("--seed", type=int, default=0, help="seed for the oracle's random systems")
    sp.set_defaults(func=cmd_check_commute)

    sp = sub.add_parser("slh-compose", help="compose SLH components with series/concat")
    sp.add_argument("config", help="JSON with components and expression")
    sp.set_defaults(func=cmd_slh_compose)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigurationError, ShapeError, InvalidDimensionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OracleMismatchError as exc:
        print(f"oracle mismatch: {exc}", file=sys.stderr)
        print(json.dumps(exc.instance), file=sys.stderr)
        return EXIT_NUMERICAL
    except (IntegrationDivergedError, ImpossibleJumpError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
