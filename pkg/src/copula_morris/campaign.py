"""Plan, execute and analyse a screening campaign."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .config import CampaignConfig, from_dict
from .effects import SensitivityReport, elementary_effects, measures
from .evaluator import Evaluator, make_model, read_records, scale
from .plotting import plot_measures
from .sampler import SamplingPlan, build_plan

PLAN_FILE = "plan.json"
RECORDS_FILE = "records.jsonl"


class MissingEvaluations(RuntimeError):
    def __init__(self, missing):
        self.missing = missing
        shown = ", ".join(f"path {i} point {k} {list(lv)}" for i, k, lv in missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        super().__init__(f"{len(missing)} evaluation(s) missing: {shown}{more}")


@dataclass
class Campaign:
    config: CampaignConfig
    plan: SamplingPlan

    def physical_points(self):
        """Physical vectors and grid levels for every path point, in plan order."""
        groups = self.plan.model.groups
        p = self.plan.cfg.levels
        out = []
        for path in self.plan.paths:
            out.append([(scale(pt, self.config.parameters, groups, p), pt) for pt in path.points])
        return out

    def to_dict(self) -> dict:
        doc = self.plan.to_dict()
        doc["campaign"] = self.config.to_dict()
        return doc


def plan_campaign(config: CampaignConfig) -> Campaign:
    model = config.dependence_model()
    cfg = config.grid(model)
    plan = build_plan(model, cfg, config.paths, config.seed, corner_mode=config.corner_mode,
                      factor_names=config.factor_names(model))
    return Campaign(config, plan)


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_campaign(path) -> Campaign:
    with open(path) as fh:
        doc = json.load(fh)
    config = from_dict(doc["campaign"])
    return Campaign(config, SamplingPlan.from_dict(doc))


def make_evaluator(config: CampaignConfig, records_path=None, timeout=None) -> Evaluator:
    model_id, fn, wants_mapping = make_model(config.model_section(), config.names, timeout)
    return Evaluator(model_id, fn, config.names, wants_mapping=wants_mapping, records_path=records_path)


def run_campaign(campaign: Campaign, records_path, workers: int = 1, timeout=None) -> int:
    """Evaluate every distinct plan point not already in ``records_path``.

    Returns the number of new model evaluations.
    """
    ev = make_evaluator(campaign.config, records_path, timeout)
    ev.preload(read_records(records_path))
    todo = {}
    for path in campaign.physical_points():
        for x, lv in path:
            todo.setdefault(ev.key(x), (x, lv))
    xs = [x for x, _ in todo.values()]
    lvs = [lv for _, lv in todo.values()]
    ev.evaluate_many(xs, lvs, workers=workers)
    return ev.calls


def collect_outputs(campaign: Campaign, records) -> np.ndarray:
    ev = make_evaluator(campaign.config)
    by_key = {r.key: r.output for r in records if r.model == ev.model_id}
    outputs = []
    missing = []
    for i, path in enumerate(campaign.physical_points()):
        row = []
        for k, (x, lv) in enumerate(path):
            y = by_key.get(ev.key(x))
            if y is None:
                missing.append((i, k, lv))
                y = np.nan
            row.append(y)
        outputs.append(row)
    if missing:
        raise MissingEvaluations(missing)
    return np.array(outputs)


def analyze_campaign(campaign: Campaign, records) -> SensitivityReport:
    plan = campaign.plan
    config = campaign.config
    outputs = collect_outputs(campaign, records)
    effects = elementary_effects(plan, outputs)
    meta = {
        "name": config.name,
        "paths": len(plan.paths),
        "levels": plan.cfg.levels,
        "step": plan.cfg.step,
        "seed": plan.seed,
        "copula": config.copula,
        "correlation_scale": config.correlation_scale,
        "corner_mode": plan.corner_mode,
        "factors": plan.cfg.n_factors,
        "evaluations": plan.n_evaluations,
        "distinct_evaluations": len(plan.distinct_points()),
        "excluded_paths": list(effects.excluded_paths),
        "model": make_evaluator(config).model_id,
    }
    return measures(effects, plan.factor_names, meta)


def write_report(report: SensitivityReport, out_dir, stem: str = "report", composite: bool = False):
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "csv": os.path.join(out_dir, f"{stem}.csv"),
        "json": os.path.join(out_dir, f"{stem}.json"),
        "svg": os.path.join(out_dir, f"{stem}.svg"),
    }
    with open(paths["csv"], "w", newline="") as fh:
        fh.write(report.to_csv(composite=composite))
    with open(paths["json"], "w") as fh:
        fh.write(report.to_json())
    title = f"{report.metadata.get('name', '')}: p={report.metadata.get('levels')}, " \
            f"s={report.metadata.get('step')}, r={report.metadata.get('paths')}"
    plot_measures(report, paths["svg"], title=title)
    return paths
