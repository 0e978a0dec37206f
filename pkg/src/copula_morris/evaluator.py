"""Model evaluation: scaling grid points to physical values, running models, caching.

External models are driven through a file protocol. The runner writes
``{"parameters": {name: value, ...}}`` to a temporary JSON file, calls
``<command> <file>`` and reads one decimal number from the last non-empty
line of standard output.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shlex
import subprocess
import tempfile
import threading
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from . import bufferbox
from .objective import ReferenceSet, align, epsilon, read_reference_csv

log = logging.getLogger(__name__)

TMPDIR_ENV = "COPULA_MORRIS_TMPDIR"


class EvaluationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    minimum: float
    maximum: float
    baseline: float | None = None

    def __post_init__(self):
        if not self.minimum < self.maximum:
            raise ValueError(f"parameter {self.name!r}: minimum {self.minimum} must be < maximum {self.maximum}")

    def at(self, fraction: float) -> float:
        if fraction == 0:
            return self.minimum
        if fraction == 1:
            return self.maximum
        return self.minimum + fraction * (self.maximum - self.minimum)


def member_levels(levels: Sequence[int], groups, p: int) -> list[int]:
    """Per-parameter levels; members with sign -1 sit at the mirrored level."""
    n = sum(len(g) for g in groups)
    out = [0] * n
    for g, members in enumerate(groups):
        for idx, sign in members:
            out[idx] = int(levels[g]) if sign > 0 else p - 1 - int(levels[g])
    return out


def scale(levels: Sequence[int], params: Sequence[ParameterSpec], groups, p: int) -> np.ndarray:
    """Physical parameter vector for an effective-factor grid point."""
    if len(levels) != len(groups):
        raise ValueError(f"point has {len(levels)} levels but there are {len(groups)} groups")
    lv = member_levels(levels, groups, p)
    if len(lv) != len(params):
        raise ValueError(f"groups cover {len(lv)} parameters, {len(params)} specified")
    return np.array([spec.at(k / (p - 1)) for spec, k in zip(params, lv)])


def content_hash(model_id: str, names: Sequence[str], values: Sequence[float]) -> str:
    text = model_id + "\n" + "\n".join(f"{n}={float(v):.17g}" for n, v in zip(names, values))
    return hashlib.sha256(text.encode()).hexdigest()


# built-in models --------------------------------------------------------------

def _coefficients(options: Mapping, names: Sequence[str]) -> np.ndarray:
    a = options.get("coefficients")
    if a is None:
        return np.ones(len(names))
    if isinstance(a, Mapping):
        return np.array([float(a.get(n, 0.0)) for n in names])
    if len(a) != len(names):
        raise ValueError(f"{len(a)} coefficients for {len(names)} parameters")
    return np.asarray(a, dtype=float)


def linear_model(options, names):
    a = _coefficients(options, names)
    c = float(options.get("intercept", 0.0))
    return lambda x: c + float(a @ x)


def quadratic_model(options, names):
    a = _coefficients(options, names)
    return lambda x: float(a @ (x * x))


def product_model(options, names):
    """``scale * x_i * x_j`` for each listed pair; all parameters multiplied by default."""
    s = float(options.get("scale", 1.0))
    pairs = options.get("pairs")
    if pairs is None:
        return lambda x: s * float(np.prod(x))
    idx = [(names.index(a), names.index(b)) for a, b in pairs]
    return lambda x: s * sum(float(x[i] * x[j]) for i, j in idx)


def bufferbox_model(options, names):
    """Buffer model QoI: mean total concentration, or error against a reference."""
    forcing = bufferbox.Forcing(**options.get("forcing", {}))
    horizon = float(options.get("horizon", 30.0))
    dt = float(options.get("dt", 0.002))
    init = options.get("initial", {})
    objective = options.get("objective", "mean")
    reference = None
    if isinstance(objective, Mapping):
        if objective.get("kind") != "epsilon":
            raise ValueError(f"unknown objective {objective!r}")
        reference = load_objective_reference(objective, forcing, horizon, dt, init)
    elif objective != "mean":
        raise ValueError(f"unknown objective {objective!r}")
    fixed = {k: v[1] for k, v in bufferbox.PARAMETER_TABLE.items()}

    def evaluate(x):
        values = dict(fixed, **dict(zip(names, map(float, x))))
        result = bufferbox.run(bufferbox.BufferParams.from_mapping(values), forcing, horizon, dt,
                               bufferbox.initial_state(**init))
        if reference is None:
            return result.qoi
        model = align(reference, result.times, ["0"], result.total[:, None])
        return epsilon(model, reference)

    return evaluate


def load_objective_reference(objective, forcing, horizon, dt, init) -> ReferenceSet:
    if "reference" in objective:
        return read_reference_csv(objective["reference"])
    syn = objective.get("synthetic", {})
    values = {k: v[1] for k, v in bufferbox.PARAMETER_TABLE.items()}
    for k, factor in syn.get("scale", {}).items():
        values[k] = values[k] * float(factor)
    result = bufferbox.run(bufferbox.BufferParams.from_mapping(values), forcing, horizon, dt,
                           bufferbox.initial_state(**init))
    return bufferbox.synthetic_reference(
        result, coverage=float(syn.get("coverage", 0.6)), noise=float(syn.get("noise", 0.0)),
        seed=int(syn.get("seed", 0)),
    )


BUILTIN_MODELS: dict[str, Callable] = {
    "linear": linear_model,
    "quadratic": quadratic_model,
    "product": product_model,
    "bufferbox": bufferbox_model,
}


class ExternalModel:
    def __init__(self, command, timeout: float | None = None, tmpdir: str | None = None):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.command:
            raise ValueError("external model command is empty")
        self.timeout = timeout
        self.tmpdir = tmpdir

    def __call__(self, parameters: Mapping[str, float]) -> float:
        tmpdir = self.tmpdir or os.environ.get(TMPDIR_ENV) or None
        fd, path = tempfile.mkstemp(prefix="cm-params-", suffix=".json", dir=tmpdir)
        try:
            with os.fdopen(fd, "w") as fh:
                json.dump({"parameters": {k: float(v) for k, v in parameters.items()}}, fh)
            try:
                proc = subprocess.run(
                    [*self.command, path], capture_output=True, text=True, timeout=self.timeout
                )
            except subprocess.TimeoutExpired as exc:
                raise EvaluationError(f"external model timed out after {self.timeout}s") from exc
            except OSError as exc:
                raise EvaluationError(f"cannot start external model: {exc}") from exc
        finally:
            os.unlink(path)
        if proc.returncode != 0:
            raise EvaluationError(
                f"external model exited with status {proc.returncode}: {proc.stderr[-500:].strip()}"
            )
        lines = [ln.strip() for ln in proc.stdout.splitlines() if ln.strip()]
        try:
            return float(lines[-1])
        except (IndexError, ValueError) as exc:
            tail = lines[-1] if lines else "<empty>"
            raise EvaluationError(
                f"cannot parse a number from external model output {tail!r}; "
                f"stderr: {proc.stderr[-500:].strip()}"
            ) from exc


@dataclass(frozen=True)
class EvaluationRecord:
    key: str
    model: str
    levels: tuple[int, ...]
    parameters: dict
    output: float
    wall_time: float

    def to_json(self) -> str:
        return json.dumps({
            "hash": self.key,
            "model": self.model,
            "levels": list(self.levels),
            "parameters": self.parameters,
            "output": self.output,
            "wall_time": self.wall_time,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "EvaluationRecord":
        d = json.loads(line)
        return cls(d["hash"], d["model"], tuple(d["levels"]), d["parameters"], float(d["output"]),
                   float(d.get("wall_time", 0.0)))


def read_records(path) -> list[EvaluationRecord]:
    if not os.path.exists(path):
        return []
    with open(path) as fh:
        return [EvaluationRecord.from_json(line) for line in fh if line.strip()]


class Evaluator:
    """Evaluate a model on physical parameter vectors with a content-hash cache.

    ``fn`` receives a numpy vector for built-in models or a name->value
    mapping for external ones (``wants_mapping=True``). Concurrent requests
    for the same key share one evaluation.
    """

    def __init__(self, model_id: str, fn: Callable, names: Sequence[str], *,
                 wants_mapping: bool = False, records_path=None):
        self.model_id = model_id
        self.fn = fn
        self.names = list(names)
        self.wants_mapping = wants_mapping
        self.records_path = records_path
        self.calls = 0
        self._futures: dict[str, Future] = {}
        self._lock = threading.Lock()

    def preload(self, records):
        for rec in records:
            if rec.model != self.model_id:
                continue
            fut: Future = Future()
            fut.set_result(rec.output)
            self._futures.setdefault(rec.key, fut)

    def key(self, x) -> str:
        return content_hash(self.model_id, self.names, x)

    def evaluate(self, x, levels=()) -> float:
        x = np.asarray(x, dtype=float)
        k = self.key(x)
        with self._lock:
            fut = self._futures.get(k)
            owner = fut is None
            if owner:
                fut = Future()
                self._futures[k] = fut
        if not owner:
            return fut.result()
        try:
            t0 = time.perf_counter()
            arg = dict(zip(self.names, x.tolist())) if self.wants_mapping else x
            y = float(self.fn(arg))
            wall = time.perf_counter() - t0
        except BaseException as exc:
            with self._lock:
                del self._futures[k]
            fut.set_exception(exc)
            raise
        with self._lock:
            self.calls += 1
            if self.records_path is not None:
                rec = EvaluationRecord(k, self.model_id, tuple(int(v) for v in levels),
                                       dict(zip(self.names, x.tolist())), y, wall)
                with open(self.records_path, "a") as fh:
                    fh.write(rec.to_json() + "\n")
        fut.set_result(y)
        return y

    def evaluate_many(self, xs, levels=None, workers: int = 1) -> list[float]:
        levels = levels if levels is not None else [()] * len(xs)
        if workers <= 1:
            return [self.evaluate(x, lv) for x, lv in zip(xs, levels)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(self.evaluate, xs, levels))


def make_model(model_cfg: Mapping, names: Sequence[str], timeout: float | None = None):
    """Return ``(model_id, callable, wants_mapping)`` for a model section of a config."""
    if "command" in model_cfg:
        cmd = model_cfg["command"]
        model_id = "external:" + (cmd if isinstance(cmd, str) else shlex.join(cmd))
        ext = ExternalModel(cmd, timeout=model_cfg.get("timeout", timeout))
        return model_id, ext, True
    mid = model_cfg.get("id")
    if mid not in BUILTIN_MODELS:
        raise ValueError(f"unknown built-in model {mid!r}; known: {sorted(BUILTIN_MODELS)}")
    options = model_cfg.get("options", {})
    model_id = mid if not options else mid + ":" + json.dumps(options, sort_keys=True)
    return model_id, BUILTIN_MODELS[mid](options, list(names)), False
