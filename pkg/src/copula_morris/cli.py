"""Command line entry point: ``copula-morris {plan,run,analyze,demo,bufferbox}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import bufferbox, config as config_mod
from .campaign import (
    PLAN_FILE,
    RECORDS_FILE,
    MissingEvaluations,
    analyze_campaign,
    load_campaign,
    plan_campaign,
    run_campaign,
    write_json,
    write_report,
)
from .config import ConfigError
from .copula import CdfAccuracyError
from .evaluator import EvaluationError, read_records
from .objective import ObjectiveError
from .plotting import plot_series

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EVALUATION = 3
EXIT_INCOMPLETE = 4

log = logging.getLogger("copula_morris")


def _add_design_flags(p):
    p.add_argument("--seed", type=int, help="sampling seed")
    p.add_argument("--levels", type=int, help="grid levels p")
    p.add_argument("--step", type=int, help="Morris step s in cells")
    p.add_argument("--paths", type=int, help="number of elementary paths r")
    p.add_argument("--copula", choices=config_mod.COPULA_KINDS, help="dependence model")


def _overrides(args) -> dict:
    return {k: getattr(args, k) for k in ("seed", "levels", "step", "paths", "copula")}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="copula-morris", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="sample elementary paths from a campaign config")
    p.add_argument("config")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    _add_design_flags(p)

    p = sub.add_parser("run", help="evaluate the model at every plan point")
    p.add_argument("plan")
    p.add_argument("--out", help="directory for records.jsonl (default: next to the plan)")
    p.add_argument("--workers", type=int, help="concurrent evaluations")
    p.add_argument("--timeout", type=float, help="per-evaluation timeout in seconds")

    p = sub.add_parser("analyze", help="compute mu, mu*, sigma and write the report")
    p.add_argument("plan")
    p.add_argument("--records", help="records file (default: records.jsonl next to the plan)")
    p.add_argument("--out", help="report directory (default: next to the plan)")
    p.add_argument("--composite", action="store_true", help="add the sqrt(mu^2 + sigma^2) column")

    p = sub.add_parser("demo", help="run the shipped North Sea buffer-model campaign end to end")
    p.add_argument("--out", default="demo-out")
    p.add_argument("--workers", type=int, default=1)
    _add_design_flags(p)

    p = sub.add_parser("bufferbox", help="simulate one buffer-model scenario")
    p.add_argument("scenario", nargs="?", help="scenario JSON (default: baseline parameters)")
    p.add_argument("--out", default=".")
    return parser


def cmd_plan(args) -> int:
    cfg = config_mod.load(args.config).replace(**_overrides(args))
    campaign = plan_campaign(cfg)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, PLAN_FILE)
    write_json(path, campaign.to_dict())
    print(f"{path}: {len(campaign.plan.paths)} paths over {campaign.plan.cfg.n_factors} factors, "
          f"{campaign.plan.n_evaluations} evaluation points")
    return EXIT_OK


def cmd_run(args) -> int:
    campaign = load_campaign(args.plan)
    out = args.out or os.path.dirname(os.path.abspath(args.plan))
    os.makedirs(out, exist_ok=True)
    records = os.path.join(out, RECORDS_FILE)
    workers = args.workers or campaign.config.workers
    n = run_campaign(campaign, records, workers=workers, timeout=args.timeout)
    print(f"{records}: {n} new evaluation(s)")
    return EXIT_OK


def cmd_analyze(args) -> int:
    campaign = load_campaign(args.plan)
    here = os.path.dirname(os.path.abspath(args.plan))
    records = read_records(args.records or os.path.join(here, RECORDS_FILE))
    report = analyze_campaign(campaign, records)
    paths = write_report(report, args.out or here, composite=args.composite)
    print(report.table())
    print(f"wrote {paths['csv']}, {paths['json']}, {paths['svg']}")
    return EXIT_OK


def cmd_demo(args) -> int:
    cfg = config_mod.shipped_config("northsea").replace(**_overrides(args))
    os.makedirs(args.out, exist_ok=True)
    campaign = plan_campaign(cfg)
    plan_path = os.path.join(args.out, PLAN_FILE)
    write_json(plan_path, campaign.to_dict())
    records = os.path.join(args.out, RECORDS_FILE)
    run_campaign(campaign, records, workers=args.workers)
    report = analyze_campaign(campaign, read_records(records))
    write_report(report, args.out)
    print(report.table())
    print(f"{campaign.plan.n_evaluations} evaluation points; outputs in {args.out}")
    return EXIT_OK


def cmd_bufferbox(args) -> int:
    if args.scenario:
        sc = bufferbox.load_scenario(args.scenario)
    else:
        sc = {"params": bufferbox.BufferParams.baseline()}
    result = bufferbox.run(**sc)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "bufferbox.csv")
    with open(csv_path, "w", newline="") as fh:
        fh.write(result.to_csv())
    series = {f"IM{i + 1}": result.concentration[:, i] for i in range(bufferbox.N_FRACTIONS)}
    series["total"] = result.total
    plot_series(result.times, series, os.path.join(args.out, "bufferbox.svg"))
    print(f"mean total concentration {result.qoi:.6g} g/m3; wrote {csv_path}")
    return EXIT_OK


COMMANDS = {
    "plan": cmd_plan,
    "run": cmd_run,
    "analyze": cmd_analyze,
    "demo": cmd_demo,
    "bufferbox": cmd_bufferbox,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (EvaluationError, ObjectiveError, CdfAccuracyError) as exc:
        print(f"evaluation failed: {exc}", file=sys.stderr)
        return EXIT_EVALUATION
    except MissingEvaluations as exc:
        print(f"incomplete records: {exc}", file=sys.stderr)
        return EXIT_INCOMPLETE
    except (ConfigError, OSError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
