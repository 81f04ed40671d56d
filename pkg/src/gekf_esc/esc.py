"""Amended single-integrator ESC with amplitude adaptation.

Planar dynamics, with dithers sin(w t) and cos(w t):

    x'   =  c F_x sqrt(w) sin(w t) + a_x sqrt(w) cos(w t)
    y'   = -c F_y sqrt(w) cos(w t) + a_y sqrt(w) sin(w t)
    a_x' = -lambda_x (a_x - J_x)
    a_y' = -lambda_y (a_y - J_y)

F_x, F_y are the objective measurement after the optional first-order
filters (corner h1 for the x channel, h2 for y). With ``filter_target =
"measurement"`` (default) the filters act on the measurement driving each
channel and are integrated as continuous states z' = h (f - z), the
high-pass output being f - z. With ``filter_target = "j-signal"`` the raw
measurement drives the loop and the J channels go through a backward-Euler
washout before the adaptation law. A corner of 0 disables a filter.

``j_mode`` selects whether the adaptation law tracks the signed J (default)
or its magnitude. The ascent part of the averaged flow is c a_i df/di / 2, so
a signed J that turns negative pushes the position away from the extremum;
the magnitude form keeps a_i >= 0 and lets the amplitude re-grow toward the
source after it moves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalAbort
from .integrate import rk4_step

VARIANTS = ("gekf-adaptive", "baseline-constant")
FILTER_TARGETS = ("measurement", "j-signal")
FILTER_KINDS = ("highpass", "lowpass")
J_MODES = ("signed", "magnitude")


@dataclass(frozen=True)
class EscParams:
    omega: float = 30.0
    c: float = 0.3
    lambda_x: float = 0.015
    lambda_y: float = 0.0995
    a_x0: float = 1.0
    a_y0: float = 1.0
    variant: str = "gekf-adaptive"
    h1: float = 0.0
    h2: float = 0.0
    filter_target: str = "measurement"
    filter_kind: str = "highpass"
    alpha: tuple[float, float] | None = None  # None -> (c/2, c/2)
    j_mode: str = "signed"

    @property
    def adaptive(self) -> bool:
        return self.variant == "gekf-adaptive"

    @property
    def alphas(self) -> tuple[float, float]:
        if self.alpha is None:
            return (0.5 * self.c, 0.5 * self.c)
        return tuple(self.alpha)

    def validate(self, allow_unstable: bool = False) -> "EscParams":
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.filter_target not in FILTER_TARGETS:
            raise ValueError(f"filter_target must be one of {FILTER_TARGETS}")
        if self.filter_kind not in FILTER_KINDS:
            raise ValueError(f"filter_kind must be one of {FILTER_KINDS}")
        if self.j_mode not in J_MODES:
            raise ValueError(f"j_mode must be one of {J_MODES}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.h1 < 0 or self.h2 < 0:
            raise ValueError(f"filter corners must be >= 0, got {(self.h1, self.h2)}")
        if self.adaptive and not allow_unstable and not (self.lambda_x > 0 and self.lambda_y > 0):
            raise ValueError(f"lambda must be positive for the adaptive variant, got "
                             f"{(self.lambda_x, self.lambda_y)}")
        vals = (self.c, self.lambda_x, self.lambda_y, self.a_x0, self.a_y0, *self.alphas)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("controller parameters must be finite")
        return self


@dataclass(frozen=True)
class EscState:
    x: float
    y: float
    a_x: float
    a_y: float
    # low-pass internal state of the measurement filters, one per channel
    z_x: float = 0.0
    z_y: float = 0.0
    # backward-Euler washout memory for the J channels: (in_x, out_x, in_y, out_y)
    j_filter: tuple[float, float, float, float] = field(default=(0.0, 0.0, 0.0, 0.0))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.a_x, self.a_y, self.z_x, self.z_y])

    @classmethod
    def initial(cls, p0: Sequence[float], params: EscParams, f0: float = 0.0) -> "EscState":
        """Start state with the measurement filters primed at f0 (zero initial high-pass output)."""
        return cls(float(p0[0]), float(p0[1]), params.a_x0, params.a_y0, f0, f0)


def esc_rhs(s: EscState, f_meas: float | tuple[float, float], p: EscParams, t: float) -> np.ndarray:
    """Position derivative. ``f_meas`` may be a per-channel pair (x drive, y drive)."""
    fx, fy = (f_meas, f_meas) if np.isscalar(f_meas) else f_meas
    sw = math.sqrt(p.omega)
    sn, cs = math.sin(p.omega * t), math.cos(p.omega * t)
    return np.array([
        p.c * fx * sw * sn + s.a_x * sw * cs,
        -p.c * fy * sw * cs + s.a_y * sw * sn,
    ])


def adaptation_rhs(a: float, J: float, lam: float) -> float:
    return -lam * (a - J)


def washout_step(state: tuple[float, float], u: float, h: float, dt: float,
                 kind: str = "highpass") -> tuple[tuple[float, float], float]:
    """One backward-Euler step of s/(s+h) (or h/(s+h) for ``kind="lowpass"``).

    ``state`` is (previous input, previous output). h = 0 passes the input through.
    """
    u_prev, y_prev = state
    if h == 0:
        return (u, u), u
    if kind == "highpass":
        y = (y_prev + u - u_prev) / (1.0 + h * dt)
    else:
        y = (y_prev + h * dt * u) / (1.0 + h * dt)
    return (u, y), y


def filter_output(f: float, z: float, h: float, kind: str) -> float:
    """Output of the continuous first-order filter with low-pass state z."""
    if h == 0:
        return f
    return f - z if kind == "highpass" else z


def controller_step(s: EscState, f_meas: float | Callable[[float, float, float], float],
                    J: Sequence[float], p: EscParams, t: float, dt: float) -> EscState:
    """One RK4 step of (x, y, a_x, a_y) plus the measurement-filter states.

    ``f_meas`` is either a held measurement value or a callable ``f(x, y, t)``
    evaluated at every RK4 stage (continuous sensing). J is held over the step;
    for the baseline variant it is ignored and the amplitudes stay fixed.
    """
    if dt == 0:
        return s
    jx, jy = float(J[0]), float(J[1])
    j_filter = s.j_filter
    if p.adaptive and p.filter_target == "j-signal":
        sx, jx = washout_step(j_filter[0:2], jx, p.h1, dt, p.filter_kind)
        sy, jy = washout_step(j_filter[2:4], jy, p.h2, dt, p.filter_kind)
        j_filter = (*sx, *sy)

    filt = p.filter_target == "measurement"
    hx, hy = (p.h1, p.h2) if filt else (0.0, 0.0)
    sw = math.sqrt(p.omega)

    def rhs(tt, v):
        x, y, ax, ay, zx, zy = v
        fv = f_meas(x, y, tt) if callable(f_meas) else f_meas
        dx = filter_output(fv, zx, hx, p.filter_kind)
        dy = filter_output(fv, zy, hy, p.filter_kind)
        sn, cs = math.sin(p.omega * tt), math.cos(p.omega * tt)
        return np.array([
            p.c * dx * sw * sn + ax * sw * cs,
            -p.c * dy * sw * cs + ay * sw * sn,
            -p.lambda_x * (ax - jx) if p.adaptive else 0.0,
            -p.lambda_y * (ay - jy) if p.adaptive else 0.0,
            hx * (fv - zx),
            hy * (fv - zy),
        ])

    v = rk4_step(s.as_array(), rhs, t, dt)
    if not np.all(np.isfinite(v)):
        raise NumericalAbort(f"controller state became non-finite at t={t + dt:.6g}")
    return replace(s, x=v[0], y=v[1], a_x=v[2], a_y=v[3], z_x=v[4], z_y=v[5], j_filter=j_filter)
