"""Zero-dimensional two-layer seabed buffer model.

Three suspended fractions exchange mass with a fluffy top layer (S1, eroded
by ordinary tidal stress) and a sandy buffer layer (S2, released only above
the Shields threshold). Time is in days, concentrations in g/m3 and areal
masses in g/m2. The pick-up factor is given per second and converted here.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

SECONDS_PER_DAY = 86400.0
N_FRACTIONS = 3
HOURS_PER_DAY = 24

# name: (minimum, baseline, maximum)
PARAMETER_TABLE = {
    "V_sed_IM1": (5.04, 10.8, 43.2),
    "V_sed_IM2": (43.2, 86.4, 172.8),
    "V_sed_IM3": (0.1, 0.1, 5.04),
    "Fr_IM1_sed_S2": (0.05, 0.15, 0.4),
    "Fr_IM2_sed_S2": (0.05, 0.15, 0.4),
    "Fr_IM3_sed_S2": (0.05, 0.15, 0.4),
    "V_res_IM1": (0.05, 0.2, 0.5),
    "V_res_IM2": (0.2, 1.0, 1.2),
    "V_res_IM3": (0.2, 1.0, 1.2),
    "Fact_res_Pup": (8e-9, 3e-8, 8e-8),
    "tau_cr_S1_IM1": (0.05, 0.1, 0.2),
    "tau_cr_S1_IM2": (0.05, 0.1, 0.2),
    "tau_cr_S1_IM3": (0.05, 0.1, 0.2),
    "tau_Shields": (0.4, 0.8, 1.2),
}


@dataclass(frozen=True)
class BufferParams:
    v_sed: np.ndarray
    fr_sed2: np.ndarray
    v_res: np.ndarray
    tau_cr1: np.ndarray
    fact_pup: float  # kg/m2/s as tabulated
    tau_shields: float

    @classmethod
    def from_mapping(cls, values: Mapping[str, float]) -> "BufferParams":
        def triple(fmt):
            return np.array([float(values[fmt.format(i)]) for i in range(1, N_FRACTIONS + 1)])

        missing = [k for k in PARAMETER_TABLE if k not in values]
        if missing:
            raise KeyError(f"missing buffer model parameters: {missing}")
        return cls(
            v_sed=triple("V_sed_IM{}"),
            fr_sed2=triple("Fr_IM{}_sed_S2"),
            v_res=triple("V_res_IM{}"),
            tau_cr1=triple("tau_cr_S1_IM{}"),
            fact_pup=float(values["Fact_res_Pup"]),
            tau_shields=float(values["tau_Shields"]),
        )

    @classmethod
    def baseline(cls) -> "BufferParams":
        return cls.from_mapping({k: v[1] for k, v in PARAMETER_TABLE.items()})

    def to_mapping(self) -> dict[str, float]:
        out = {}
        for i in range(N_FRACTIONS):
            out[f"V_sed_IM{i + 1}"] = float(self.v_sed[i])
            out[f"Fr_IM{i + 1}_sed_S2"] = float(self.fr_sed2[i])
            out[f"V_res_IM{i + 1}"] = float(self.v_res[i])
            out[f"tau_cr_S1_IM{i + 1}"] = float(self.tau_cr1[i])
        out["Fact_res_Pup"] = self.fact_pup
        out["tau_Shields"] = self.tau_shields
        return out


@dataclass(frozen=True)
class BoxState:
    c: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    t: float = 0.0
    depth: float = 20.0

    def total_mass(self) -> float:
        return self.depth * float(self.c.sum()) + float(self.m1.sum()) + float(self.m2.sum())


def initial_state(depth: float = 20.0, c=(10.0, 20.0, 5.0), m1=(5.0, 5.0, 5.0), m2=(5000.0, 5000.0, 5000.0)) -> BoxState:
    return BoxState(np.array(c, float), np.array(m1, float), np.array(m2, float), 0.0, float(depth))


@dataclass(frozen=True)
class Forcing:
    """Bed shear stress: rectified semidiurnal tide plus one storm plateau."""

    tidal_amplitude: float = 0.5
    tidal_period: float = 0.5175
    storm_start: float = 14.0
    storm_duration: float = 2.0
    storm_stress: float = 1.5

    def __call__(self, t):
        tau = self.tidal_amplitude * np.abs(np.sin(2.0 * np.pi * np.asarray(t) / self.tidal_period))
        storm = (np.asarray(t) >= self.storm_start) & (np.asarray(t) < self.storm_start + self.storm_duration)
        return np.where(storm, np.maximum(tau, self.storm_stress), tau)


def deposition_fluxes(params: BufferParams, state: BoxState) -> tuple[np.ndarray, np.ndarray]:
    settling = params.v_sed * state.c
    return (1.0 - params.fr_sed2) * settling, params.fr_sed2 * settling


def erosion_flux_s1(params: BufferParams, state: BoxState, tau: float) -> np.ndarray:
    # no erosion below the critical stress
    excess = np.maximum(tau / params.tau_cr1 - 1.0, 0.0)
    return params.v_res * state.m1 * excess


def erosion_flux_s2(params: BufferParams, state: BoxState, tau: float) -> np.ndarray:
    excess = max(tau / params.tau_shields - 1.0, 0.0)
    return params.fact_pup * SECONDS_PER_DAY * state.m2 * excess**1.5


def _coefficients(params: BufferParams):
    fractions = tuple(
        (float(params.v_sed[i]), float(params.fr_sed2[i]), float(params.v_res[i]), float(params.tau_cr1[i]))
        for i in range(N_FRACTIONS)
    )
    return fractions, params.fact_pup * SECONDS_PER_DAY, params.tau_shields


def _advance(coef, c, m1, m2, depth: float, tau: float, dt: float):
    """Scalar kernel shared by ``step`` and ``run``; returns new ``(c, m1, m2)`` lists."""
    fractions, pick_rate, tau_shields = coef
    ex2 = tau / tau_shields - 1.0
    pick = pick_rate * ex2**1.5 if ex2 > 0.0 else 0.0
    c_new, m1_new, m2_new = [], [], []
    for i in range(N_FRACTIONS):
        v_sed, fr, v_res, tau_cr = fractions[i]
        ci, m1i, m2i = c[i], m1[i], m2[i]
        settle = v_sed * ci * dt
        water = depth * ci
        if settle > water:
            settle = water
        dep1 = (1.0 - fr) * settle
        dep2 = fr * settle
        ex1 = tau / tau_cr - 1.0
        ero1 = v_res * m1i * ex1 * dt if ex1 > 0.0 else 0.0
        if ero1 > m1i:
            ero1 = m1i
        ero2 = pick * m2i * dt
        if ero2 > m2i:
            ero2 = m2i
        water_new = water + ero1 + ero2 - dep1 - dep2
        a = m1i + dep1 - ero1
        b = m2i + dep2 - ero2
        if min(water_new, a, b) < -1e-9 * (water + m1i + m2i + 1.0):
            raise RuntimeError("negative state after flux limiting")
        c_new.append(max(water_new, 0.0) / depth)
        m1_new.append(max(a, 0.0))
        m2_new.append(max(b, 0.0))
    return c_new, m1_new, m2_new


def step(params: BufferParams, state: BoxState, tau: float, dt: float) -> BoxState:
    """One explicit Euler step; an outflow never removes more than its pool holds."""
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    c, m1, m2 = _advance(_coefficients(params), state.c.tolist(), state.m1.tolist(), state.m2.tolist(),
                         state.depth, float(tau), dt)
    return BoxState(np.array(c), np.array(m1), np.array(m2), state.t + dt, state.depth)


@dataclass
class BufferRun:
    times: np.ndarray  # days, hourly
    concentration: np.ndarray  # (n_hours + 1, 3) g/m3
    states: list = field(default_factory=list, repr=False)

    @property
    def total(self) -> np.ndarray:
        return self.concentration.sum(axis=1)

    @property
    def qoi(self) -> float:
        """Time mean of the total suspended concentration."""
        return float(self.total.mean())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time_day", "C_IM1", "C_IM2", "C_IM3", "C_total"])
        for t, c in zip(self.times, self.concentration):
            w.writerow([repr(float(t)), *(repr(float(x)) for x in c), repr(float(c.sum()))])
        return buf.getvalue()


def run(
    params: BufferParams,
    forcing: Forcing | None = None,
    horizon: float = 30.0,
    dt: float = 0.002,
    state: BoxState | None = None,
    keep_states: bool = False,
) -> BufferRun:
    """Integrate over ``horizon`` days, reporting hourly.

    Each hour is split into equal sub-steps no longer than ``dt`` so the
    output times are exact.
    """
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    forcing = Forcing() if forcing is None else forcing
    state = initial_state() if state is None else state
    hour = 1.0 / HOURS_PER_DAY
    n_hours = int(round(horizon * HOURS_PER_DAY))
    substeps = math.ceil(hour / dt - 1e-12)
    h = hour / substeps
    t0 = state.t
    step_times = t0 + (np.arange(n_hours * substeps) // substeps) * hour + (np.arange(n_hours * substeps) % substeps) * h
    taus = np.asarray(forcing(step_times), dtype=float).tolist()
    coef = _coefficients(params)
    c, m1, m2 = state.c.tolist(), state.m1.tolist(), state.m2.tolist()
    conc = np.empty((n_hours + 1, N_FRACTIONS))
    conc[0] = c
    states = [state] if keep_states else []
    n = 0
    for k in range(n_hours):
        for j in range(substeps):
            c, m1, m2 = _advance(coef, c, m1, m2, state.depth, taus[n], h)
            n += 1
            if keep_states:
                states.append(BoxState(np.array(c), np.array(m1), np.array(m2), t0 + k * hour + (j + 1) * h, state.depth))
        conc[k + 1] = c
    times = t0 + np.arange(n_hours + 1) * hour
    return BufferRun(times, conc, states)


def load_scenario(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    params = dict({k: v[1] for k, v in PARAMETER_TABLE.items()}, **doc.get("parameters", {}))
    init = doc.get("initial", {})
    return {
        "params": BufferParams.from_mapping(params),
        "forcing": Forcing(**doc.get("forcing", {})),
        "horizon": float(doc.get("horizon", 30.0)),
        "dt": float(doc.get("dt", 0.002)),
        "state": initial_state(**init),
    }


def synthetic_reference(result: BufferRun, coverage: float = 0.6, noise: float = 0.0, seed: int = 0):
    """Stand-in observations: a random subset of the hourly totals of ``result``.

    ``coverage`` is the kept fraction of entries; ``noise`` is a relative
    Gaussian perturbation.
    """
    from .objective import ReferenceSet

    if not 0.0 < coverage <= 1.0:
        raise ValueError(f"coverage must lie in (0, 1], got {coverage}")
    rng = np.random.default_rng(seed)
    keep = rng.random(len(result.times)) < coverage
    values = result.total * (1.0 + noise * rng.standard_normal(len(result.times)))
    rows = [(float(t), "0", float(v)) for t, v, k in zip(result.times, values, keep) if k]
    return ReferenceSet.from_rows(rows)
