"""Command-line front end.

Subcommands::

    privfunnel gen        --c 2 --a 5 [--shape 3,3,4] [--dist jeffreys] --seed 1 --out prior.json
    privfunnel optimal    --metric lip --prior prior.json --epsilon 1 --out bundle.json
    privfunnel solve      --protocol cr --prior prior.json --epsilon 1
    privfunnel eval       --channel bundle.json --prior prior.json
    privfunnel ingest     adult.csv --secret marital-status --data education --out prior.json
    privfunnel experiment ldp-vs-lip --eps-grid 0.5,1,1.5,2 --instances 10 --out results/

Exit status is 0 on success, 2 when a problem is infeasible, a budget is
exhausted or a certificate fails, and 3 on bad input. Failures print a JSON
object with ``error`` and ``message`` keys on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import data, errors, experiments
from .mechanisms import (Channel, SecretAwareChannel, _json_float, ldp_of, lip_of,
                         utility)
from .optimal import srlip_check, synthesize
from .prob import sample_jeffreys, sample_uniform_normalised

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT = 0, 2, 3

_INFEASIBLE = (errors.EmptyPolytope, errors.UnboundedPolytope, errors.BudgetExceeded,
               errors.LPInfeasible, errors.LPUnbounded, errors.AttributeBudgetExceeded,
               errors.AlphabetTooLarge, errors.NonMonotoneDetected)
_INPUT = (errors.InvalidDistribution, errors.ZeroProbabilityEvent, errors.DimensionMismatch,
          errors.SchemaMismatch, errors.EmptyAfterFiltering, ValueError, KeyError,
          FileNotFoundError, IsADirectoryError, PermissionError, json.JSONDecodeError)


class CertificateFailed(errors.PrivFunnelError):
    """A synthesised protocol did not pass its independent leakage check."""


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.replace("x", ",").split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _pairs(text: str) -> list[tuple[int, int]]:
    out = []
    for item in text.split(","):
        a, _, c = item.partition("x")
        try:
            out.append((int(a), int(c)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected AxC pairs such as 5x2, got {item!r}")
    return out


def _emit(obj, args) -> None:
    text = json.dumps(obj, indent=1)
    if getattr(args, "out", None):
        Path(args.out).write_text(text + "\n")
    print(text)


def _bits(nats: float) -> float:
    return nats / math.log(2)


# subcommands -------------------------------------------------------------------

def cmd_gen(args) -> int:
    shape = args.shape
    a = math.prod(shape) if shape else args.a
    if a is None:
        raise ValueError("give --a or --shape")
    sampler = sample_jeffreys if args.dist == "jeffreys" else sample_uniform_normalised
    j = sampler(args.c, a, args.seed, shape=shape if shape and len(shape) > 1 else None)
    _emit(j.to_dict(), args)
    return EXIT_OK


def cmd_optimal(args) -> int:
    j = data.load_joint(args.prior)
    if args.shape:
        j = j.with_shape(args.shape)
    kw = {}
    if args.budgets is not None:
        kw["budgets"] = args.budgets
    res = synthesize(args.metric, j, args.epsilon, **kw)
    out = res.to_dict()
    out["seconds"] = res.seconds
    if args.bits:
        out["utility_bits"] = _bits(res.utility)
    _emit(out, args)
    if not res.certified:
        raise CertificateFailed(
            f"measured {res.certificate.kind} {res.certificate.value} exceeds {args.epsilon}")
    return EXIT_OK


def cmd_solve(args) -> int:
    j = data.load_joint(args.prior)
    grid = args.eps_grid if args.eps_grid else [args.epsilon]
    if grid == [None]:
        raise ValueError("give --epsilon or --eps-grid")
    rows = []
    for eps in grid:
        alpha, leak, util = experiments.calibrated(args.protocol, j, eps)
        row = {"protocol": args.protocol, "epsilon": eps, "alpha": _json_float(alpha),
               "leakage": leak, "utility_nats": util,
               "normalised_utility": util / j.h_x() if j.h_x() > 0 else 0.0}
        if args.bits:
            row["utility_bits"] = _bits(util)
        rows.append(row)
    if args.format == "csv":
        fh = open(args.out, "w", newline="") if args.out else sys.stdout
        try:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
        finally:
            if args.out:
                fh.close()
    else:
        _emit(rows[0] if len(rows) == 1 else rows, args)
    return EXIT_OK


def _load_channel(path):
    with open(path) as fh:
        d = json.load(fh)
    if "channel" in d:       # protocol bundle
        d = d["channel"]
    Q = np.asarray(d.get("Q", []), dtype=float)
    if Q.ndim == 3:          # secret-aware tensor Q[y, x, s]
        return SecretAwareChannel(Q)
    return Channel.from_dict(d)


def cmd_eval(args) -> int:
    j = data.load_joint(args.prior)
    if args.shape:
        j = j.with_shape(args.shape)
    Q = _load_channel(args.channel)
    metrics = ["ldp", "lip"] if args.metric == "all" else [args.metric]
    if args.metric == "all" and j.shape is not None and isinstance(Q, Channel):
        metrics.append("srlip")
    out = {}
    for m in metrics:
        if m == "ldp":
            rep = ldp_of(Q, j)
        elif m == "lip":
            rep = lip_of(Q, j)
        else:
            rep = srlip_check(Q, j)
        d = rep.to_dict()
        if args.epsilon is not None:
            d["satisfies"] = rep.satisfies(args.epsilon)
        out[m] = d
    if isinstance(Q, Channel):
        out["utility_nats"] = utility(Q, j)
        if args.bits:
            out["utility_bits"] = _bits(out["utility_nats"])
    _emit(out, args)
    return EXIT_OK


def cmd_ingest(args) -> int:
    schema = data.DatasetSchema(args.csv, args.secret, tuple(args.data),
                                delimiter=args.delimiter, missing=args.missing)
    res = data.ingest(schema, smoothing=args.smoothing)
    _emit(res.to_dict(), args)
    return EXIT_OK


def cmd_experiment(args) -> int:
    prior = data.load_joint(args.prior) if args.prior else None
    cfg = experiments.ExperimentConfig(
        kind=args.kind,
        eps_grid=args.eps_grid or experiments.DEFAULT_EPS_GRID,
        instances=args.instances, seed=args.seed, c=args.c, a=args.a or 5,
        shape=args.shape, pairs=args.pairs or experiments.SYNTHETIC_PAIRS,
        prior=prior, out_dir=args.out or ".")
    rows = experiments.run_experiment(cfg)
    summary = experiments.summarise(rows)
    failed = sum(r.get("status") != "ok" and not str(r.get("status")).startswith("skipped")
                 for r in rows)
    bad_cert = sum(r.get("certificate") == "fail" for r in rows)
    print(json.dumps({"experiment": cfg.kind, "rows": len(rows), "failures": failed,
                      "certificate_failures": bad_cert,
                      "csv": str(Path(cfg.out_dir) / f"{cfg.kind}.csv"),
                      "summary": str(Path(cfg.out_dir) / f"{cfg.kind}_summary.csv"),
                      "groups": len(summary)}, indent=1))
    return EXIT_INFEASIBLE if bad_cert else EXIT_OK


# parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="privfunnel",
                                description="Optimal and explicit local sanitisation protocols.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="sample a synthetic prior")
    g.add_argument("--c", type=int, default=2)
    g.add_argument("--a", type=int)
    g.add_argument("--shape", type=_ints)
    g.add_argument("--dist", choices=["jeffreys", "uniform"], default="jeffreys")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(fn=cmd_gen)

    o = sub.add_parser("optimal", help="synthesise an optimal protocol")
    o.add_argument("--metric", choices=["ldp", "lip", "srlip"], required=True)
    o.add_argument("--prior", required=True)
    o.add_argument("--epsilon", type=float, required=True)
    o.add_argument("--shape", type=_ints, help="attribute sizes (overrides the prior file)")
    o.add_argument("--budgets", type=_floats, help="per-attribute budgets for srlip")
    o.add_argument("--bits", action="store_true", help="also report utility in bits")
    o.add_argument("--out")
    o.set_defaults(fn=cmd_optimal)

    s = sub.add_parser("solve", help="calibrate GRR, OUE or CR to a leakage target")
    s.add_argument("--protocol", choices=["grr", "oue", "cr"], required=True)
    s.add_argument("--prior", required=True)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--eps-grid", type=_floats)
    s.add_argument("--format", choices=["json", "csv"], default="json")
    s.add_argument("--bits", action="store_true")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_solve)

    e = sub.add_parser("eval", help="measure the leakage of a channel file")
    e.add_argument("--channel", required=True)
    e.add_argument("--prior", required=True)
    e.add_argument("--metric", choices=["ldp", "lip", "srlip", "all"], default="all")
    e.add_argument("--epsilon", type=float)
    e.add_argument("--shape", type=_ints)
    e.add_argument("--bits", action="store_true")
    e.add_argument("--out")
    e.set_defaults(fn=cmd_eval)

    i = sub.add_parser("ingest", help="empirical prior from a categorical CSV")
    i.add_argument("csv")
    i.add_argument("--secret", required=True)
    i.add_argument("--data", nargs="+", required=True)
    i.add_argument("--delimiter", default=",")
    i.add_argument("--missing", default="?")
    i.add_argument("--smoothing", type=float, default=0.0)
    i.add_argument("--out")
    i.set_defaults(fn=cmd_ingest)

    x = sub.add_parser("experiment", help="run a sweep and write CSV files")
    x.add_argument("kind", choices=experiments.KINDS)
    x.add_argument("--eps-grid", type=_floats)
    x.add_argument("--instances", type=int, default=10)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--c", type=int, default=2)
    x.add_argument("--a", type=int)
    x.add_argument("--shape", type=_ints)
    x.add_argument("--pairs", type=_pairs, help="comma-separated AxC pairs, e.g. 5x2,2x5")
    x.add_argument("--prior")
    x.add_argument("--format", choices=["csv"], default="csv")
    x.add_argument("--out", help="output directory")
    x.set_defaults(fn=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (CertificateFailed, *_INFEASIBLE) as exc:
        err, code = exc, EXIT_INFEASIBLE
    except _INPUT as exc:
        err, code = exc, EXIT_INPUT
    print(json.dumps({"error": type(err).__name__, "message": str(err), "exit_code": code}),
          file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
