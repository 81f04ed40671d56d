"""Scenario runner: fine-step controller integration with GEKF updates every T_out."""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field as dc_field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from . import field as fld
from . import gekf as gk
from . import kernels
from .errors import NumericalAbort
from .esc import EscParams, filter_output
from .integrate import rk4_step  # noqa: F401  (re-exported)

log = logging.getLogger(__name__)

RNG_ALGORITHM = "numpy.random.PCG64"
CADENCES = ("fine", "t_out")
COLUMNS = ("t", "x", "y", "f_true", "f_meas", "a_x", "a_y", "J_x", "J_y",
           "gx_est", "gy_est", "gx_true", "gy_true", "P11", "P22", "P33", "P44", "P55")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass
class Scenario:
    """Complete description of one run.

    ``gekf`` may be None for the baseline variant; when present on a baseline
    run the filter runs as a passive observer (its J is recorded, not applied).
    """

    name: str = "scenario"
    field: Mapping | fld.ScalarField = dc_field(default_factory=lambda: {
        "kind": "quadratic", "peak": 10.0, "center": [1.0, 1.0], "weights": [0.5, 1.5]})
    esc: EscParams = dc_field(default_factory=EscParams)
    gekf: gk.GekfParams | None = dc_field(default_factory=gk.GekfParams)
    gekf_P0: tuple[float, ...] = (4.0, 4.0, 4.0, 4.0, 4.0)
    gekf_x0: tuple[float, ...] | None = None
    noise_std: float = 0.0
    p0: tuple[float, float] = (2.0, 2.0)
    duration: float = 100.0
    dt: float = 1e-3
    output_interval: float = 0.01
    measurement_cadence: str = "fine"
    seed: int = 0
    allow_unstable: bool = False

    def build_field(self) -> fld.ScalarField:
        return fld.build_field(self.field)

    @property
    def sample_interval(self) -> float:
        return self.gekf.t_out if self.gekf is not None else 0.1

    def validate(self) -> "Scenario":
        self.esc.validate(self.allow_unstable)
        self.build_field()
        if not (self.duration >= 0 and math.isfinite(self.duration)):
            raise ValueError(f"duration must be >= 0, got {self.duration}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        limit = (2 * math.pi / self.esc.omega) / 50
        if self.dt > limit * (1 + 1e-12):
            raise ValueError(f"dt={self.dt} does not resolve the dither; need dt <= {limit:.6g}")
        if self.measurement_cadence not in CADENCES:
            raise ValueError(f"measurement_cadence must be one of {CADENCES}")
        if not self.noise_std >= 0:
            raise ValueError("noise_std must be >= 0")
        if self.gekf is not None:
            self.gekf_params().validate()
            gk.init(self.initial_x(0.0), self.gekf_P0)
        elif self.esc.adaptive:
            raise ValueError("the adaptive variant needs GEKF settings")
        if not self.output_interval > 0:
            raise ValueError("output_interval must be positive")
        return self

    def gekf_params(self) -> gk.GekfParams:
        return replace(self.gekf, omega=self.esc.omega, c=self.esc.c,
                       a_x=self.esc.a_x0, a_y=self.esc.a_y0)

    def initial_x(self, f0: float) -> np.ndarray:
        if self.gekf_x0 is not None:
            return np.asarray(self.gekf_x0, dtype=float)
        return np.array([0.0, 0.0, 0.0, 0.0, f0])

    def steps(self, interval: float, what: str) -> int:
        n = max(1, int(round(interval / self.dt)))
        if not math.isclose(n * self.dt, interval, rel_tol=1e-9, abs_tol=1e-12):
            log.warning("%s=%g is not a multiple of dt=%g; using %g", what, interval, self.dt, n * self.dt)
        return n

    def to_dict(self) -> dict:
        from .config import scenario_to_dict
        return scenario_to_dict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class TrajectoryRecord:
    """Uniformly sampled run output; rows follow ``COLUMNS``.

    Equality compares the sampled data only, never the metadata.
    """

    columns = COLUMNS

    def __init__(self, data: np.ndarray | Sequence[Sequence[float]], metadata: dict | None = None):
        arr = np.asarray(data, dtype=float)
        self.data = arr.reshape(-1, len(COLUMNS)) if arr.size else np.empty((0, len(COLUMNS)))
        self.metadata = dict(metadata or {})

    def __len__(self) -> int:
        return self.data.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrajectoryRecord):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data, equal_nan=True)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, COLUMNS.index(name)]

    @property
    def t(self) -> np.ndarray:
        return self["t"]

    @property
    def positions(self) -> np.ndarray:
        return self.data[:, 1:3]

    def window(self, t0: float, t1: float) -> "TrajectoryRecord":
        m = (self.t >= t0 - 1e-12) & (self.t <= t1 + 1e-12)
        return TrajectoryRecord(self.data[m], self.metadata)


def run_scenario(sc: Scenario, backend: str | None = None,
                 j_hook: Callable[[float, tuple[float, float]], Sequence[float]] | None = None,
                 on_update: Callable[[float, gk.GekfState], None] | None = None) -> TrajectoryRecord:
    """Integrate a scenario and return its trajectory record.

    ``j_hook(t, J)`` can replace the J estimate after each measurement (test hook);
    ``on_update(t, state)`` sees every filter state right after its update.
    Raises NumericalAbort, carrying the partial record, if the state goes non-finite.
    """
    sc.validate()
    field = sc.build_field()
    esc = sc.esc
    dt = sc.dt
    rng = make_rng(sc.seed)
    sensor = fld.SensorModel(sc.noise_std, rng)
    n_total = int(round(sc.duration / dt))
    rec_every = sc.steps(sc.output_interval, "output_interval")
    meas_every = sc.steps(sc.sample_interval, "t_out")
    t_out_eff = meas_every * dt
    hold = sc.measurement_cadence == "t_out"
    switch_steps = sorted({int(round(ts / dt)) for ts in field.switch_times() if 0 < ts / dt < n_total})
    custom = field.kind_code < 0

    y0 = fld.measure(sensor, field, sc.p0, 0.0)
    state = np.array([sc.p0[0], sc.p0[1], esc.a_x0, esc.a_y0, y0, y0], dtype=float)
    jf = np.zeros(4)
    gparams = None
    gstate = None
    if sc.gekf is not None:
        gparams = replace(sc.gekf_params(), t_out=t_out_eff)
        gstate = gk.init(sc.initial_x(y0), sc.gekf_P0)
    J = (0.0, 0.0)
    grad_est = (0.0, 0.0) if gstate is not None else (math.nan, math.nan)
    f_hold = y0
    f_meas = y0
    filter_j = esc.adaptive and esc.filter_target == "j-signal"
    washed = (esc.filter_target == "measurement" and (esc.h1 > 0 or esc.h2 > 0)
              and sc.gekf is not None and sc.gekf.dither_drive == "filtered")
    alphas = esc.alphas
    n_meas = 0

    meta = {
        "scenario": sc.name,
        "scenario_hash": sc.digest(),
        "seed": int(sc.seed),
        "rng": RNG_ALGORITHM,
        "backend": kernels.get_backend(backend).BACKEND if not custom else "python",
        "measurement_model": gparams.model if gparams is not None else None,
    }
    rows: list[tuple] = []

    def row(k: int):
        t = k * dt
        x, y = state[0], state[1]
        gt = fld.grad(field, (x, y), t)
        jx, jy = (jf[1], jf[3]) if filter_j else J
        pd = np.diag(gstate.P) if gstate is not None else (math.nan,) * 5
        return (t, x, y, fld.eval_at(field, x, y, t), f_meas, state[2], state[3], jx, jy,
                grad_est[0], grad_est[1], gt[0], gt[1], *pd)

    def abort(msg: str):
        meta.update(status="aborted", error=msg, n_measurements=n_meas)
        raise NumericalAbort(msg, TrajectoryRecord(rows, meta))

    rows.append(row(0))
    k = 0
    while k < n_total:
        nxt = min((k // rec_every + 1) * rec_every, n_total)
        if gparams is not None or hold:
            nxt = min(nxt, (k // meas_every + 1) * meas_every)
        for s in switch_steps:
            if s > k:
                nxt = min(nxt, s)
                break
        n = nxt - k
        t_chunk = k * dt
        noise = None if hold else sensor.noise(n)
        fn = (lambda u, v, _t=t_chunk: fld.eval_at(field, u, v, _t)) if custom else None
        f_last = kernels.advance(
            state=state, jf=jf, k0=k, nsteps=n, dt=dt, omega=esc.omega, c=esc.c,
            lam_x=esc.lambda_x, lam_y=esc.lambda_y, J_x=J[0], J_y=J[1], h1=esc.h1, h2=esc.h2,
            adaptive=esc.adaptive, target=0 if esc.filter_target == "measurement" else 1,
            kind=0 if esc.filter_kind == "highpass" else 1, field_kind=field.kind_code,
            fparams=field.params_at(t_chunk), noise=noise, f_hold=f_hold, hold=hold,
            field_fn=fn, backend=backend)
        k = nxt
        f_drive = f_last
        f_meas = f_last
        if not np.all(np.isfinite(state)) or not math.isfinite(f_meas):
            abort(f"controller state became non-finite by t={k * dt:.6g}")

        if k % meas_every == 0 and (gparams is not None or hold):
            t = k * dt
            y = fld.measure(sensor, field, state[:2], t)
            if hold:
                f_hold = y
                f_meas = y
            if gparams is not None:
                drive = None
                if washed:
                    drive = (filter_output(f_drive, state[4], esc.h1, esc.filter_kind),
                             filter_output(f_drive, state[5], esc.h2, esc.filter_kind))
                gp = gparams.with_amplitudes(state[2], state[3], drive)
                gstate = gk.update(gk.predict(gstate, gp), y, gp, t - 0.5 * t_out_eff)
                n_meas += 1
                if on_update is not None:
                    on_update(t, gstate)
                if not (np.all(np.isfinite(gstate.X)) and np.all(np.isfinite(gstate.P))):
                    abort(f"GEKF state became non-finite at t={t:.6g}")
                ge = gk.gradient_estimate(gstate, gp)
                grad_est = (float(ge[0]), float(ge[1]))
                est = gk.lbs_estimate(ge, *alphas)
                J = (est.J_x, est.J_y)
                if esc.j_mode == "magnitude":
                    J = (abs(J[0]), abs(J[1]))
                if j_hook is not None:
                    jx, jy = j_hook(t, J)
                    J = (float(jx), float(jy))
        if k % rec_every == 0:
            rows.append(row(k))

    meta.update(status="ok", n_measurements=n_meas)
    return TrajectoryRecord(rows, meta)
