"""Lie-bracket averaging of the planar single-integrator ESC.

The oscillatory loop

    p' = sqrt(w) * g_sin(p) * sin(w t) + sqrt(w) * g_cos(p) * cos(w t)

with g_sin = (c f, a_y) and g_cos = (a_x, -c f) is approximated, for large w,
by the Lie bracket system  z' = [g_sin, g_cos](z) * nu(cos, sin) * w.  The
factor w comes from the two sqrt(w) amplitudes and cancels the 1/w in nu for
dithers of frequency w, so the averaged field does not depend on w.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import field as fld
from .esc import EscParams
from .errors import NumericalAbort

FD_STEP = 1e-6
NU_PANELS = 10_000

PlanarVectorField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Dither:
    """Periodic zero-mean input u(w t).

    ``shape`` is ``"sin"``, ``"cos"`` or a callable of the phase w t that is
    2*pi periodic with zero average.
    """

    shape: str | Callable[[float], float]
    omega: float = 1.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"dither frequency must be positive, got {self.omega}")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    def __call__(self, t):
        phase = np.multiply(self.omega, t)
        if self.shape == "sin":
            return np.sin(phase)
        if self.shape == "cos":
            return np.cos(phase)
        if callable(self.shape):
            return np.vectorize(self.shape, otypes=[float])(phase)
        raise ValueError(f"unknown dither shape {self.shape!r}")


def dither_eval(d: Dither, t: float) -> float:
    return float(d(t))


def nu(u_j: Dither, u_i: Dither, period: float | None = None, panels: int = NU_PANELS) -> float:
    """(1/T) * int_0^T u_j(s) int_0^s u_i(r) dr ds by composite Simpson.

    The inner integral is accumulated panel by panel with Simpson's rule on
    panel midpoints, the outer one with composite Simpson on the nodes.
    """
    T = u_i.period if period is None else float(period)
    for d in (u_j, u_i):
        if not math.isclose(d.period, T, rel_tol=1e-12):
            raise ValueError(f"dither period {d.period} does not match T={T}")
    if panels % 2:
        panels += 1
    s = np.linspace(0.0, T, panels + 1)
    h = T / panels
    mid = s[:-1] + 0.5 * h
    ui_nodes = u_i(s)
    inner_inc = (h / 6.0) * (ui_nodes[:-1] + 4.0 * u_i(mid) + ui_nodes[1:])
    inner = np.concatenate(([0.0], np.cumsum(inner_inc)))
    g = u_j(s) * inner
    outer = (h / 3.0) * (g[0] + g[-1] + 4.0 * g[1:-1:2].sum() + 2.0 * g[2:-1:2].sum())
    return float(outer / T)


def jacobian_fd(g: PlanarVectorField, p: Sequence[float], step: float = FD_STEP) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    J = np.empty((2, 2))
    for k in range(2):
        e = np.zeros(2)
        e[k] = step
        J[:, k] = (np.asarray(g(p + e)) - np.asarray(g(p - e))) / (2.0 * step)
    return J


def lie_bracket(g_i: PlanarVectorField, g_j: PlanarVectorField, p: Sequence[float]) -> np.ndarray:
    """[g_i, g_j](p) = Dg_j(p) g_i(p) - Dg_i(p) g_j(p) with FD Jacobians."""
    p = np.asarray(p, dtype=float)
    return jacobian_fd(g_j, p) @ np.asarray(g_i(p)) - jacobian_fd(g_i, p) @ np.asarray(g_j(p))


def esc_vector_fields(field: fld.ScalarField, esc: EscParams, t: float = 0.0,
                      amplitudes: Sequence[float] | None = None):
    """The two input vector fields of the planar loop (sin channel, cos channel)."""
    a_x, a_y = amplitudes if amplitudes is not None else (esc.a_x0, esc.a_y0)
    c = esc.c

    def g_sin(p):
        return np.array([c * fld.eval_at(field, p[0], p[1], t), a_y])

    def g_cos(p):
        return np.array([a_x, -c * fld.eval_at(field, p[0], p[1], t)])

    return g_sin, g_cos


def lbs_rhs(p: Sequence[float], field: fld.ScalarField, esc: EscParams, t: float = 0.0,
            amplitudes: Sequence[float] | None = None) -> np.ndarray:
    """Averaged (Lie bracket system) velocity at p with amplitudes frozen."""
    g_sin, g_cos = esc_vector_fields(field, esc, t, amplitudes)
    u_sin, u_cos = Dither("sin", esc.omega), Dither("cos", esc.omega)
    weight = esc.omega * nu(u_cos, u_sin)
    return lie_bracket(g_sin, g_cos, p) * weight


def lbs_rhs_closed_form(p: Sequence[float], field: fld.ScalarField, esc: EscParams, t: float = 0.0,
                        amplitudes: Sequence[float] | None = None) -> np.ndarray:
    """Hand-expanded bracket for sin/cos dithers, used as an oracle and fast path."""
    a_x, a_y = amplitudes if amplitudes is not None else (esc.a_x0, esc.a_y0)
    c = esc.c
    f = fld.eval_at(field, p[0], p[1], t)
    fx, fy = fld.grad(field, p, t)
    return np.array([
        0.5 * c * a_x * fx - 0.5 * c * c * f * fy,
        0.5 * c * c * f * fx + 0.5 * c * a_y * fy,
    ])


def lbs_gradient_part(p: Sequence[float], field: fld.ScalarField, esc: EscParams, t: float = 0.0,
                      amplitudes: Sequence[float] | None = None) -> np.ndarray:
    """Pure-gradient part alpha * grad f with alpha_i = c a_i / 2 (drops the f*grad f cross terms)."""
    a_x, a_y = amplitudes if amplitudes is not None else (esc.a_x0, esc.a_y0)
    fx, fy = fld.grad(field, p, t)
    return np.array([0.5 * esc.c * a_x * fx, 0.5 * esc.c * a_y * fy])


def simulate_lbs(p0: Sequence[float], field: fld.ScalarField, esc: EscParams, duration: float,
                 step: float, amplitudes: Sequence[float] | None = None,
                 exact_bracket: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step RK4 integration of the Lie bracket system.

    Returns ``(t, positions)`` with positions of shape (n, 2). The closed-form
    bracket is used by default; ``exact_bracket=True`` goes through the generic
    finite-difference bracket and quadrature (slow, for cross-checks).
    """
    from .sim import rk4_step

    if not step > 0:
        raise ValueError("step must be positive")
    rhs_fn = lbs_rhs if exact_bracket else lbs_rhs_closed_form
    n = int(round(duration / step))
    if exact_bracket:
        # nu is independent of position; compute it once
        weight = esc.omega * nu(Dither("cos", esc.omega), Dither("sin", esc.omega))

        def rhs(t, z):
            g_sin, g_cos = esc_vector_fields(field, esc, t, amplitudes)
            return lie_bracket(g_sin, g_cos, z) * weight
    else:
        def rhs(t, z):
            return rhs_fn(z, field, esc, t, amplitudes)

    ts = np.arange(n + 1) * step
    out = np.empty((n + 1, 2))
    z = np.asarray(p0, dtype=float)
    out[0] = z
    for k in range(n):
        z = rk4_step(z, rhs, ts[k], step)
        if not np.all(np.isfinite(z)):
            raise NumericalAbort(f"LBS state became non-finite at t={ts[k + 1]:.6g}")
        out[k + 1] = z
    return ts, out
