import sys
import time

import numpy as np
import pytest

from copula_morris.bufferbox import PARAMETER_TABLE
from copula_morris.config import shipped_config
from copula_morris.evaluator import (
    EvaluationError,
    EvaluationRecord,
    Evaluator,
    ExternalModel,
    ParameterSpec,
    content_hash,
    make_model,
    member_levels,
    read_records,
    scale,
)

PY = sys.executable


def script(tmp_path, body, name="model.py"):
    path = tmp_path / name
    path.write_text(body)
    return f"{PY} {path}"


SUM_MODEL = """
import json, sys, pathlib
count = pathlib.Path(sys.argv[0]).with_suffix(".count")
count.write_text(str(int(count.read_text()) + 1) if count.exists() else "1")
p = json.load(open(sys.argv[1]))["parameters"]
print("some log line")
print(sum(p.values()))
"""


@pytest.fixture
def northsea():
    return shipped_config()


def test_scale_examples(northsea):
    model = northsea.dependence_model()
    params = northsea.parameters
    names = northsea.names
    p = 4
    g = next(i for i, grp in enumerate(model.groups) if names[grp[0][0]] == "V_sed_IM1")
    levels = [0] * model.n_factors
    levels[g] = 3
    x = scale(levels, params, model.groups, p)
    assert x[names.index("V_sed_IM1")] == 43.2
    assert x[names.index("Fr_IM1_sed_S2")] == 0.05
    levels[g] = 0
    x = scale(levels, params, model.groups, p)
    assert x[names.index("V_sed_IM1")] == PARAMETER_TABLE["V_sed_IM1"][0]
    assert x[names.index("Fr_IM1_sed_S2")] == PARAMETER_TABLE["Fr_IM1_sed_S2"][2]


def test_parameter_spec_endpoints():
    s = ParameterSpec("a", 0.1, 0.7)
    assert s.at(0) == 0.1 and s.at(1) == 0.7
    assert s.at(0.5) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        ParameterSpec("b", 1.0, 1.0)


def test_member_levels_reflect():
    groups = (((0, 1), (2, -1)), ((1, 1),))
    assert member_levels([1, 3], groups, 4) == [1, 3, 2]


def test_scale_dimension_mismatch():
    with pytest.raises(ValueError):
        scale([0, 1], [ParameterSpec("a", 0, 1)], (((0, 1),),), 4)


def test_linear_builtin():
    _, fn, wants = make_model({"id": "linear", "options": {"coefficients": [2, -3]}}, ["a", "b"])
    assert not wants
    assert fn(np.array([0.5, 0.5])) == -0.5
    _, fn, _ = make_model({"id": "linear", "options": {"coefficients": {"b": 1.0}}}, ["a", "b"])
    assert fn(np.array([4.0, 2.0])) == 2.0


def test_unknown_builtin():
    with pytest.raises(ValueError):
        make_model({"id": "nope"}, ["a"])


def test_external_cache_one_call(tmp_path):
    cmd = script(tmp_path, SUM_MODEL)
    ev = Evaluator("ext", ExternalModel(cmd), ["a", "b"], wants_mapping=True)
    assert ev.evaluate([1.0, 2.5]) == 3.5
    assert ev.evaluate([1.0, 2.5]) == 3.5
    assert (tmp_path / "model.count").read_text() == "1"
    assert ev.calls == 1


def test_external_tmpdir_env(tmp_path, monkeypatch):
    cmd = script(tmp_path, "import sys\nassert 'scratch' in sys.argv[1]\nprint(1.0)\n")
    scratch = tmp_path / "scratch"
    scratch.mkdir()
    monkeypatch.setenv("COPULA_MORRIS_TMPDIR", str(scratch))
    assert ExternalModel(cmd)({"a": 1.0}) == 1.0
    assert list(scratch.iterdir()) == []  # parameter file cleaned up


@pytest.mark.parametrize("body, match", [
    ("import sys\nsys.stderr.write('boom')\nsys.exit(3)\n", "status 3.*boom"),
    ("print('not a number')\n", "cannot parse"),
    ("", "cannot parse"),
    ("import time\ntime.sleep(5)\n", "timed out"),
])
def test_external_errors(tmp_path, body, match):
    model = ExternalModel(script(tmp_path, body), timeout=0.5)
    with pytest.raises(EvaluationError, match=match):
        model({"a": 1.0})


def test_failed_evaluation_is_not_cached(tmp_path):
    calls = []

    def flaky(x):
        calls.append(x)
        if len(calls) == 1:
            raise EvaluationError("first call fails")
        return 1.0

    ev = Evaluator("m", flaky, ["a"])
    with pytest.raises(EvaluationError):
        ev.evaluate([0.5])
    assert ev.evaluate([0.5]) == 1.0


def test_records_roundtrip(tmp_path):
    path = tmp_path / "records.jsonl"
    ev = Evaluator("lin", lambda x: float(x.sum()), ["a", "b"], records_path=path)
    ev.evaluate([0.1, 0.2], (0, 1))
    ev.evaluate([0.3, 0.2], (1, 1))
    recs = read_records(path)
    assert [r.levels for r in recs] == [(0, 1), (1, 1)]
    assert recs[0].parameters == {"a": 0.1, "b": 0.2}
    assert recs[0].key == content_hash("lin", ["a", "b"], [0.1, 0.2])
    assert EvaluationRecord.from_json(recs[1].to_json()) == recs[1]


def test_preload_skips_model_calls(tmp_path):
    path = tmp_path / "records.jsonl"
    Evaluator("lin", lambda x: 7.0, ["a"], records_path=path).evaluate([0.25])
    fresh = Evaluator("lin", lambda x: pytest.fail("should be cached"), ["a"])
    fresh.preload(read_records(path))
    assert fresh.evaluate([0.25]) == 7.0
    other = Evaluator("other", lambda x: 1.0, ["a"])
    other.preload(read_records(path))
    assert other.evaluate([0.25]) == 1.0


def test_hash_depends_on_model_and_value():
    a = content_hash("m", ["x"], [0.1])
    assert a == content_hash("m", ["x"], [0.1])
    assert a != content_hash("n", ["x"], [0.1])
    assert a != content_hash("m", ["x"], [0.1 + 1e-16 * 2])
    assert a != content_hash("m", ["y"], [0.1])


def test_concurrent_same_key_runs_once():
    count = []

    def slow(x):
        count.append(1)
        time.sleep(0.2)
        return float(x[0])

    ev = Evaluator("slow", slow, ["a"])
    out = ev.evaluate_many([[1.0]] * 8, workers=8)
    assert out == [1.0] * 8
    assert len(count) == 1


def test_cache_is_transparent():
    def f(x):
        return float(np.sin(x).sum())

    xs = np.random.default_rng(0).random((20, 3))
    xs = np.vstack([xs, xs[:5]])
    ev = Evaluator("f", f, ["a", "b", "c"])
    assert ev.evaluate_many(xs, workers=4) == [f(x) for x in xs]
    assert ev.calls == 20


def test_bufferbox_builtin_baseline():
    names = list(PARAMETER_TABLE)
    _, fn, _ = make_model({"id": "bufferbox"}, names)
    base = np.array([v[1] for v in PARAMETER_TABLE.values()])
    assert fn(base) == pytest.approx(10.07487, rel=1e-5)


def test_bufferbox_epsilon_objective_zero_at_truth():
    names = list(PARAMETER_TABLE)
    opts = {"horizon": 5, "objective": {"kind": "epsilon", "synthetic": {"coverage": 0.5, "seed": 2}}}
    _, fn, _ = make_model({"id": "bufferbox", "options": opts}, names)
    base = np.array([v[1] for v in PARAMETER_TABLE.values()])
    assert fn(base) == pytest.approx(0.0, abs=1e-12)
    shifted = base.copy()
    shifted[names.index("V_sed_IM1")] = 30.0
    assert fn(shifted) > 0
