"""Masked mean-absolute-error objective against reference observations."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


class ObjectiveError(ValueError):
    pass


@dataclass(frozen=True)
class ReferenceSet:
    """Observations on a ``(time, cell)`` grid; ``mask`` marks available entries."""

    times: tuple[float, ...]
    cells: tuple[str, ...]
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        shape = (len(self.times), len(self.cells))
        if self.values.shape != shape or self.mask.shape != shape:
            raise ObjectiveError(
                f"values {self.values.shape} and mask {self.mask.shape} must both be {shape}"
            )

    @property
    def n_available(self) -> int:
        return int(self.mask.sum())

    @classmethod
    def from_rows(cls, rows) -> "ReferenceSet":
        rows = [(float(t), str(c), float(v)) for t, c, v in rows]
        times = tuple(sorted({r[0] for r in rows}))
        cells = tuple(sorted({r[1] for r in rows}))
        ti = {t: i for i, t in enumerate(times)}
        ci = {c: j for j, c in enumerate(cells)}
        values = np.full((len(times), len(cells)), np.nan)
        mask = np.zeros_like(values, dtype=bool)
        for t, c, v in rows:
            if mask[ti[t], ci[c]]:
                raise ObjectiveError(f"duplicate reference entry at time {t}, cell {c}")
            values[ti[t], ci[c]] = v
            mask[ti[t], ci[c]] = True
        return cls(times, cells, values, mask)

    def rows(self):
        for i, t in enumerate(self.times):
            for j, c in enumerate(self.cells):
                if self.mask[i, j]:
                    yield t, c, float(self.values[i, j])


def epsilon(model_vals, reference: ReferenceSet) -> float:
    """Mean absolute difference over the entries where a reference exists."""
    model_vals = np.asarray(model_vals, dtype=float)
    if model_vals.shape != reference.values.shape:
        raise ObjectiveError(
            f"model values have shape {model_vals.shape}, reference has {reference.values.shape}"
        )
    n = reference.n_available
    if n == 0:
        raise ObjectiveError("objective undefined: no reference values available")
    picked = model_vals[reference.mask]
    if not np.all(np.isfinite(picked)):
        raise ObjectiveError("model value is not finite where a reference value exists")
    return float(np.abs(picked - reference.values[reference.mask]).sum() / n)


def read_reference_csv(path) -> ReferenceSet:
    """Read ``time,cell,value`` rows; absent rows are masked out."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"time", "cell", "value"} - set(reader.fieldnames or ())
        if missing:
            raise ObjectiveError(f"{path}: missing columns {sorted(missing)}")
        rows = [(r["time"], r["cell"], r["value"]) for r in reader if r["value"].strip() != ""]
    return ReferenceSet.from_rows(rows)


def write_reference_csv(reference: ReferenceSet, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "cell", "value"])
        for t, c, v in reference.rows():
            w.writerow([repr(t), c, repr(v)])


def align(reference: ReferenceSet, times, cells, values) -> np.ndarray:
    """Model values rearranged onto the reference grid (NaN where the model has none)."""
    values = np.asarray(values, dtype=float)
    ti = {round(float(t), 9): i for i, t in enumerate(times)}
    ci = {str(c): j for j, c in enumerate(cells)}
    out = np.full(reference.values.shape, np.nan)
    for i, t in enumerate(reference.times):
        for j, c in enumerate(reference.cells):
            a, b = ti.get(round(t, 9)), ci.get(c)
            if a is not None and b is not None:
                out[i, j] = values[a, b]
    return out
