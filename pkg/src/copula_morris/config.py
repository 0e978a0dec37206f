"""Campaign configuration: parameters, dependence, design and model."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .copula import DependenceError, DependenceModel, build_dependence_model
from .evaluator import BUILTIN_MODELS, ParameterSpec
from .grid import GridConfig

COPULA_KINDS = ("gaussian", "independence")
CORNER_MODES = ("exact", "mc", "invariant")


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class CampaignConfig:
    parameters: tuple[ParameterSpec, ...]
    correlations: tuple[tuple[str, str, float], ...] = ()
    correlation_scale: str = "spearman"
    copula: str = "gaussian"
    levels: int = 4
    step: int = 2
    paths: int = 10
    seed: int = 0
    corner_mode: str = "exact"
    cdf_tolerance: float = 5e-4
    model: dict = field(default_factory=lambda: {"id": "linear"})
    objective: object = "mean"
    workers: int = 1
    name: str = "campaign"

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.parameters]

    def correlation_matrix(self) -> np.ndarray:
        idx = {n: i for i, n in enumerate(self.names)}
        corr = np.eye(len(self.parameters))
        for a, b, rho in self.correlations:
            corr[idx[a], idx[b]] = corr[idx[b], idx[a]] = rho
        return corr

    def dependence_model(self) -> DependenceModel:
        try:
            return build_dependence_model(
                self.correlation_matrix(), scale=self.correlation_scale, kind=self.copula,
                tol=self.cdf_tolerance, seed=self.seed,
            )
        except DependenceError as exc:
            raise ConfigError("correlations", str(exc)) from exc

    def grid(self, model: DependenceModel | None = None) -> GridConfig:
        model = model or self.dependence_model()
        return GridConfig(model.n_factors, self.levels, self.step)

    def factor_names(self, model: DependenceModel) -> list[str]:
        return [" -- ".join(self.names[i] for i, _ in g) for g in model.groups]

    def model_section(self) -> dict:
        """Model config with the objective folded into built-in options."""
        model = dict(self.model)
        if model.get("id") == "bufferbox":
            model["options"] = dict(model.get("options", {}), objective=self.objective)
        return model

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "parameters": [
                {k: v for k, v in (("name", p.name), ("min", p.minimum), ("max", p.maximum),
                                   ("baseline", p.baseline)) if v is not None}
                for p in self.parameters
            ],
            "correlations": [{"pair": [a, b], "rho": rho} for a, b, rho in self.correlations],
            "correlation_scale": self.correlation_scale,
            "copula": self.copula,
            "levels": self.levels,
            "step": self.step,
            "paths": self.paths,
            "seed": self.seed,
            "corner_mode": self.corner_mode,
            "cdf_tolerance": self.cdf_tolerance,
            "model": self.model,
            "objective": self.objective,
            "workers": self.workers,
        }

    def replace(self, **changes) -> "CampaignConfig":
        d = self.to_dict()
        d.update({k: v for k, v in changes.items() if v is not None})
        return from_dict(d)


def _require(d, key, kind, field_name=None):
    name = field_name or key
    if key not in d:
        raise ConfigError(name, "missing")
    value = d[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, f"expected a number, got {value!r}")
        return float(value)
    return value


def from_dict(d: dict, base_dir: str | None = None) -> CampaignConfig:
    if not isinstance(d, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    raw_params = d.get("parameters")
    if not raw_params:
        raise ConfigError("parameters", "at least one parameter is required")
    params = []
    seen = set()
    for i, p in enumerate(raw_params):
        where = f"parameters[{i}]"
        name = _require(p, "name", str, where + ".name")
        if not isinstance(name, str) or not name:
            raise ConfigError(where + ".name", "must be a non-empty string")
        if name in seen:
            raise ConfigError(where + ".name", f"duplicate parameter name {name!r}")
        seen.add(name)
        lo = _require(p, "min", float, where + ".min")
        hi = _require(p, "max", float, where + ".max")
        if not lo < hi:
            raise ConfigError(where, f"min {lo} must be < max {hi}")
        base = p.get("baseline")
        if base is not None:
            base = float(base)
            if not lo <= base <= hi:
                raise ConfigError(where + ".baseline", f"{base} outside [{lo}, {hi}]")
        params.append(ParameterSpec(name, lo, hi, base))

    corrs = []
    for i, c in enumerate(d.get("correlations", [])):
        where = f"correlations[{i}]"
        pair = c.get("pair")
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ConfigError(where + ".pair", "expected a list of two parameter names")
        for n in pair:
            if n not in seen:
                raise ConfigError(where + ".pair", f"unknown parameter {n!r}")
        if pair[0] == pair[1]:
            raise ConfigError(where + ".pair", "a parameter cannot be paired with itself")
        rho = _require(c, "rho", float, where + ".rho")
        if not -1.0 <= rho <= 1.0:
            raise ConfigError(where + ".rho", f"{rho} outside [-1, 1]")
        corrs.append((pair[0], pair[1], rho))

    scale = d.get("correlation_scale", "spearman")
    if scale not in ("spearman", "pearson"):
        raise ConfigError("correlation_scale", f"expected 'spearman' or 'pearson', got {scale!r}")
    copula = d.get("copula", "gaussian")
    if copula not in COPULA_KINDS:
        raise ConfigError("copula", f"expected one of {COPULA_KINDS}, got {copula!r}")
    corner_mode = d.get("corner_mode", "exact")
    if corner_mode not in CORNER_MODES:
        raise ConfigError("corner_mode", f"expected one of {CORNER_MODES}, got {corner_mode!r}")

    levels = _require(d, "levels", int)
    if levels < 2:
        raise ConfigError("levels", f"must be >= 2, got {levels}")
    step = _require(d, "step", int)
    if not 1 <= step <= levels - 1:
        raise ConfigError("step", f"must lie in [1, {levels - 1}], got {step}")
    paths = _require(d, "paths", int)
    if paths < 1:
        raise ConfigError("paths", f"must be >= 1, got {paths}")
    seed = _require(d, "seed", int) if "seed" in d else 0
    workers = d.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers", f"must be a positive integer, got {workers!r}")
    tol = float(d.get("cdf_tolerance", 5e-4))
    if not tol > 0:
        raise ConfigError("cdf_tolerance", "must be positive")

    model = d.get("model")
    if not isinstance(model, dict):
        raise ConfigError("model", "expected an object with 'id' or 'command'")
    model = dict(model)
    if "command" in model:
        cmd = model["command"]
        if not cmd:
            raise ConfigError("model.command", "must not be empty")
    elif model.get("id") not in BUILTIN_MODELS:
        raise ConfigError("model.id", f"unknown model {model.get('id')!r}; known: {sorted(BUILTIN_MODELS)}")

    objective = d.get("objective", "mean")
    if objective != "mean":
        if model.get("id") != "bufferbox":
            raise ConfigError("objective", "only the bufferbox model supports an error objective")
        if not isinstance(objective, dict) or objective.get("kind") != "epsilon":
            raise ConfigError("objective", "expected 'mean' or {\"kind\": \"epsilon\", ...}")
        if "reference" in objective and base_dir is not None:
            objective = dict(objective, reference=os.path.join(base_dir, objective["reference"]))

    cfg = CampaignConfig(
        parameters=tuple(params), correlations=tuple(corrs), correlation_scale=scale,
        copula=copula, levels=levels, step=step, paths=paths, seed=seed, corner_mode=corner_mode,
        cdf_tolerance=tol, model=model, objective=objective, workers=workers,
        name=str(d.get("name", "campaign")),
    )
    cfg.dependence_model()  # surfaces correlation errors at load time
    return cfg


def load(path) -> CampaignConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"{path}: invalid JSON ({exc})") from exc
    return from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def shipped_config(name: str = "northsea") -> CampaignConfig:
    text = resources.files("copula_morris").joinpath("data", f"{name}.json").read_text()
    return from_dict(json.loads(text))
