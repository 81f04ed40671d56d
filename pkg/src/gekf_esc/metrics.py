"""Post-processing of trajectory records: convergence, oscillation envelope,
path length, gradient-estimate error and the decaying-bound check on J."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import field as fld
from .sim import TrajectoryRecord

P_GRID = np.round(np.arange(1.01, 4.0 + 1e-9, 0.01), 2)
BOUND_RTOL = 1e-12


@dataclass
class RunMetrics:
    convergence_time: float | None
    final_distance: float
    path_length: float
    path_length_to_entry: float | None
    envelope_initial: float
    envelope_final: float
    attenuation_ratio: float
    gradient_rmse: tuple[float, float] | None
    bound_p_fit: float | None
    bound_t_star: float | None
    bound_satisfied: bool | None
    amplitude_final: float

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["gradient_rmse"] is not None:
            d["gradient_rmse"] = list(d["gradient_rmse"])
        return d


@dataclass
class BoundFit:
    p: float | None
    t_star: float | None
    satisfied: bool


def _targets(target, n: int) -> np.ndarray:
    tg = np.asarray(target, dtype=float)
    return np.broadcast_to(tg, (n, 2)) if tg.shape == (2,) else tg


def convergence_time(t: Sequence[float], positions, target, eps: float) -> float | None:
    """First time after which the trajectory stays strictly inside the eps-ball.

    ``target`` is a fixed position or one target per sample.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    t = np.asarray(t, dtype=float)
    pos = np.asarray(positions, dtype=float)
    d = np.hypot(*(pos - _targets(target, len(pos))).T)
    outside = np.flatnonzero(d >= eps)
    if outside.size == 0:
        return float(t[0])
    i = outside[-1] + 1
    return float(t[i]) if i < len(t) else None


def first_entry_index(positions, target, eps: float) -> int | None:
    pos = np.asarray(positions, dtype=float)
    d = np.hypot(*(pos - _targets(target, len(pos))).T)
    inside = np.flatnonzero(d < eps)
    return int(inside[0]) if inside.size else None


def path_length(positions) -> float:
    pos = np.asarray(positions, dtype=float)
    if len(pos) < 2:
        return 0.0
    return float(np.sum(np.hypot(*np.diff(pos, axis=0).T)))


def envelope(t: Sequence[float], series: Sequence[float], window: float) -> tuple[np.ndarray, np.ndarray]:
    """Peak-to-peak value in every sliding window of the given duration.

    Returns ``(window_start_times, peak_to_peak)``. Samples are assumed uniform.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(series, dtype=float)
    if len(t) < 2:
        return t[:1], np.zeros(min(1, len(t)))
    step = (t[-1] - t[0]) / (len(t) - 1)
    n = int(round(window / step)) + 1
    if n > len(x):
        raise ValueError("window is longer than the series")
    w = sliding_window_view(x, n)
    return t[: len(w)], w.max(axis=1) - w.min(axis=1)


def segment_envelope(t, series, t0: float, t1: float, window: float) -> float:
    """Largest sliding-window peak-to-peak inside [t0, t1]."""
    t = np.asarray(t, dtype=float)
    m = (t >= t0 - 1e-9) & (t <= t1 + 1e-9)
    _, pp = envelope(t[m], np.asarray(series)[m], min(window, t[m][-1] - t[m][0]))
    return float(pp.max())


def default_window(omega: float) -> float:
    """Five dither periods."""
    return 5 * 2 * math.pi / omega


def bound_fit(t: Sequence[float], J: Sequence[float], tail_fraction: float = 0.8,
              p_grid: Sequence[float] = P_GRID) -> BoundFit:
    """Largest p on the grid with |J(t)| <= t^-p throughout the trailing tail.

    For each p, t* is the last recorded time violating the bound (or the first
    positive time if none does); p qualifies when t* lies at or before the start
    of the trailing ``tail_fraction`` of the run. Only recorded samples are used.
    """
    t = np.asarray(t, dtype=float)
    J = np.abs(np.asarray(J, dtype=float))
    m = t > 0
    t, J = t[m], J[m]
    if len(t) == 0:
        return BoundFit(None, None, False)
    t_tail = (1.0 - tail_fraction) * t[-1]
    t_star_min = None
    for p in sorted(p_grid, reverse=True):
        viol = J > t ** (-p) * (1 + BOUND_RTOL)
        t_star = float(t[np.flatnonzero(viol)[-1]]) if viol.any() else float(t[0])
        if t_star <= t_tail:
            return BoundFit(float(p), t_star, True)
        t_star_min = t_star
    return BoundFit(None, t_star_min, False)


def gradient_rmse(rec: TrajectoryRecord, t0: float, t1: float) -> tuple[float, float]:
    w = rec.window(t0, t1)
    if len(w) == 0:
        raise ValueError("segment contains no samples")
    ex = w["gx_est"] - w["gx_true"]
    ey = w["gy_est"] - w["gy_true"]
    return float(np.sqrt(np.mean(ex ** 2))), float(np.sqrt(np.mean(ey ** 2)))


def target_series(rec: TrajectoryRecord, field: fld.ScalarField) -> np.ndarray:
    return np.array([fld.extremum_at(field, t) for t in rec.t])


def compute_metrics(rec: TrajectoryRecord, field: fld.ScalarField, omega: float, eps: float = 0.1,
                    window: float | None = None, segment_fraction: float = 0.1,
                    tail_fraction: float = 0.8) -> RunMetrics:
    """Summary metrics of one run; envelopes are on x over the first/last ``segment_fraction``."""
    window = default_window(omega) if window is None else window
    t = rec.t
    pos = rec.positions
    tg = target_series(rec, field)
    T0, T1 = t[0], t[-1]
    span = T1 - T0
    seg = segment_fraction * span
    if len(t) > 2 and seg > 0:
        env0 = segment_envelope(t, rec["x"], T0, T0 + seg, window)
        env1 = segment_envelope(t, rec["x"], T1 - seg, T1, window)
    else:
        env0 = env1 = 0.0
    entry = first_entry_index(pos, tg, eps)
    has_est = np.all(np.isfinite(rec["gx_est"]))
    rmse = gradient_rmse(rec, T0 + 0.5 * span, T1) if has_est and len(t) else None
    bx = by = None
    if has_est and len(t) > 1:
        bx = bound_fit(t, rec["J_x"], tail_fraction)
        by = bound_fit(t, rec["J_y"], tail_fraction)
    if bx is not None and bx.satisfied and by.satisfied:
        p_fit, t_star, ok = min(bx.p, by.p), max(bx.t_star, by.t_star), True
    elif bx is not None:
        p_fit, t_star, ok = None, None, False
    else:
        p_fit, t_star, ok = None, None, None
    return RunMetrics(
        convergence_time=convergence_time(t, pos, tg, eps),
        final_distance=float(np.hypot(*(pos[-1] - tg[-1]))),
        path_length=path_length(pos),
        path_length_to_entry=None if entry is None else path_length(pos[: entry + 1]),
        envelope_initial=env0,
        envelope_final=env1,
        attenuation_ratio=env1 / env0 if env0 > 0 else 0.0,
        gradient_rmse=rmse,
        bound_p_fit=p_fit,
        bound_t_star=t_star,
        bound_satisfied=ok,
        amplitude_final=float(max(abs(rec["a_x"][-1]), abs(rec["a_y"][-1]))),
    )
