from __future__ import annotations

from typing import Callable

import numpy as np


def rk4_step(state, rhs: Callable[[float, np.ndarray], np.ndarray], t: float, dt: float) -> np.ndarray:
    """Classical four-stage Runge-Kutta step."""
    s = np.asarray(state, dtype=float)
    k1 = np.asarray(rhs(t, s), dtype=float)
    k2 = np.asarray(rhs(t + 0.5 * dt, s + 0.5 * dt * k1), dtype=float)
    k3 = np.asarray(rhs(t + 0.5 * dt, s + 0.5 * dt * k2), dtype=float)
    k4 = np.asarray(rhs(t + dt, s + dt * k3), dtype=float)
    return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
