"""Scalar objective fields and a noisy point sensor.

Three analytic kinds are supported (quadratic bowl, Gaussian light bump and a
softened inverse-square source) plus ``custom`` fields wrapping an arbitrary
callable. Any kind can be relocated over time by a waypoint schedule, which
translates the field instantaneously at each activation time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Mapping, Sequence

import numpy as np

FD_STEP = 1e-6

KINDS = ("quadratic", "gaussian", "inverse-square", "custom")
# integer codes understood by the compiled kernels
KIND_CODES = {"quadratic": 0, "gaussian": 1, "inverse-square": 2}


class FieldError(ValueError):
    pass


@dataclass(frozen=True)
class ScalarField:
    """Objective f(x, y, t).

    ``peak`` is the extremum value f*. ``weights`` are the quadratic curvature
    weights (w_x, w_y) so that f = f* - w_x dx^2 - w_y dy^2; ``width`` is the
    Gaussian sigma or the inverse-square softening radius.
    """

    kind: str
    peak: float
    center: tuple[float, float]
    weights: tuple[float, float] = (1.0, 1.0)
    width: float = 1.0
    waypoints: tuple[tuple[float, tuple[float, float]], ...] = ()
    func: Callable[[float, float], float] | None = dc_field(default=None, compare=False)

    def center_at(self, t: float) -> tuple[float, float]:
        c = self.center
        for t_on, wp in self.waypoints:
            if t >= t_on:
                c = wp
            else:
                break
        return c

    def params_at(self, t: float) -> np.ndarray:
        """Flat parameter vector for the compiled kernels."""
        cx, cy = self.center_at(t)
        if self.kind == "quadratic":
            return np.array([self.peak, cx, cy, self.weights[0], self.weights[1]])
        return np.array([self.peak, cx, cy, self.width, 0.0])

    @property
    def kind_code(self) -> int:
        return KIND_CODES.get(self.kind, -1)

    def switch_times(self) -> list[float]:
        return [t_on for t_on, _ in self.waypoints]


FIELD_KEYS = frozenset({"kind", "peak", "center", "weights", "width", "waypoints", "func"})


def build_field(spec: Mapping | ScalarField) -> ScalarField:
    """Validate a field description (mapping) and return a ScalarField.

    Recognised keys: ``kind``, ``peak``, ``center``, ``weights`` (quadratic),
    ``width`` (gaussian / inverse-square), ``waypoints`` (list of
    ``[time, [x, y]]``) and ``func`` (custom).
    """
    if isinstance(spec, ScalarField):
        return spec
    unknown = set(spec) - FIELD_KEYS
    if unknown:
        raise FieldError(f"unknown field key(s) {sorted(unknown)}; expected {sorted(FIELD_KEYS)}")
    kind = spec.get("kind", "quadratic")
    if kind not in KINDS:
        raise FieldError(f"unknown field kind {kind!r}; expected one of {KINDS}")
    peak = float(spec.get("peak", 10.0 if kind == "quadratic" else 1.0))
    center = _pair(spec.get("center", (0.0, 0.0)), "center")
    weights = _pair(spec.get("weights", (1.0, 1.0)), "weights")
    width = float(spec.get("width", 1.0))
    if kind == "quadratic" and (weights[0] <= 0 or weights[1] <= 0):
        raise FieldError(f"quadratic weights must be positive, got {weights}")
    if kind in ("gaussian", "inverse-square") and not width > 0:
        raise FieldError(f"width must be positive, got {width}")
    func = spec.get("func")
    if kind == "custom" and not callable(func):
        raise FieldError("custom field requires a callable 'func(x, y)'")

    waypoints = []
    for item in spec.get("waypoints", ()) or ():
        t_on, wp = item
        waypoints.append((float(t_on), _pair(wp, "waypoint center")))
    times = [w[0] for w in waypoints]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise FieldError(f"waypoint times must be strictly increasing, got {times}")
    return ScalarField(kind, peak, center, weights, width, tuple(waypoints), func)


def _pair(v: Sequence[float], name: str) -> tuple[float, float]:
    try:
        a, b = v
        out = (float(a), float(b))
    except (TypeError, ValueError):
        raise FieldError(f"{name} must be a pair of numbers, got {v!r}") from None
    if not all(math.isfinite(u) for u in out):
        raise FieldError(f"{name} must be finite, got {v!r}")
    return out


def eval_at(field: ScalarField, x: float, y: float, t: float = 0.0) -> float:
    cx, cy = field.center_at(t)
    dx, dy = x - cx, y - cy
    k = field.kind
    if k == "quadratic":
        return field.peak - field.weights[0] * dx * dx - field.weights[1] * dy * dy
    if k == "gaussian":
        s = field.width
        return field.peak * math.exp(-(dx * dx + dy * dy) / (2.0 * s * s))
    if k == "inverse-square":
        r2 = field.width * field.width
        return field.peak * r2 / (dx * dx + dy * dy + r2)
    # custom fields are defined around the origin and translated with the schedule
    return float(field.func(dx + field.center[0], dy + field.center[1]))


def evaluate(field: ScalarField, p: Sequence[float], t: float = 0.0) -> float:
    return eval_at(field, p[0], p[1], t)


def grad(field: ScalarField, p: Sequence[float], t: float = 0.0) -> np.ndarray:
    """Gradient of the field; analytic for built-in kinds, central FD for custom."""
    x, y = float(p[0]), float(p[1])
    cx, cy = field.center_at(t)
    dx, dy = x - cx, y - cy
    k = field.kind
    if k == "quadratic":
        return np.array([-2.0 * field.weights[0] * dx, -2.0 * field.weights[1] * dy])
    if k == "gaussian":
        s2 = field.width * field.width
        v = field.peak * math.exp(-(dx * dx + dy * dy) / (2.0 * s2))
        return np.array([-v * dx / s2, -v * dy / s2])
    if k == "inverse-square":
        r2 = field.width * field.width
        den = dx * dx + dy * dy + r2
        g = -2.0 * field.peak * r2 / (den * den)
        return np.array([g * dx, g * dy])
    return fd_grad(lambda u, v: eval_at(field, u, v, t), x, y)


def fd_grad(fn: Callable[[float, float], float], x: float, y: float, step: float = FD_STEP) -> np.ndarray:
    return np.array([
        (fn(x + step, y) - fn(x - step, y)) / (2 * step),
        (fn(x, y + step) - fn(x, y - step)) / (2 * step),
    ])


def extremum_at(field: ScalarField, t: float = 0.0) -> np.ndarray:
    """Location of the extremum at time t.

    For custom fields the caller-provided ``center`` is taken as the extremum.
    """
    return np.array(field.center_at(t), dtype=float)


class SensorModel:
    """Point sensor returning f plus zero-mean Gaussian noise.

    The sensor owns its random stream, so a sensor instance must not be shared
    between concurrent runs.
    """

    def __init__(self, noise_std: float = 0.0, rng: np.random.Generator | None = None):
        if not noise_std >= 0:
            raise FieldError(f"noise_std must be >= 0, got {noise_std}")
        self.noise_std = float(noise_std)
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def noise(self, n: int) -> np.ndarray | None:
        """Draw n noise samples, or None for a noiseless sensor (no draws consumed)."""
        if self.noise_std == 0.0:
            return None
        return self.noise_std * self.rng.standard_normal(n)

    def sample(self) -> float:
        if self.noise_std == 0.0:
            return 0.0
        return self.noise_std * float(self.rng.standard_normal())


def measure(sensor: SensorModel, field: ScalarField, p: Sequence[float], t: float = 0.0) -> float:
    return evaluate(field, p, t) + sensor.sample()
