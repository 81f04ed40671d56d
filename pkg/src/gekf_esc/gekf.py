"""Geometric continuous-discrete extended Kalman filter for gradient estimation.

State X = (x1, x2, x3, x4, x5) with x1 = (K/2) df/dx, x2 = (K/2) df/dy,
x3 = x1', x4 = x2' and x5 = f, where K = (2/sqrt(w)) sin(w dt/2) and dt is
the measurement interval. Between measurements the state follows a constant
velocity model integrated with N Euler substeps; each measurement of f is
related to the state through a first-order Chen-Fliess expansion of f along
the dithered flow over one interval, evaluated at the interval midpoint.

Two measurement models are available:

``derived``
    Consistent with the loop's input pairing (sin channel carries
    (c f, a_y), cos channel carries (a_x, -c f)):
    h = x5 + (2c x1 x5 + 2a_y x2) sin + (2a_x x1 - 2c x2 x5) cos.
``paper-literal``
    The sin/cos assignment as originally printed:
    h = x5 + (2c x1 x5 + 2a_x x2) cos + (2a_y x1 - 2c x2 x5) sin.

When the loop washes out the measurement before it drives the dither, the
c-channel amplitude is the filtered signal rather than f itself. With
``dither_drive="filtered"`` the runner passes ``drive=(F_x, F_y)``, which
substitutes those known values for x5 in the c terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

MODELS = ("derived", "paper-literal")
DRIVES = ("estimate", "filtered")
PSD_TOL = 1e-9

# constant-velocity Jacobian
A = np.zeros((5, 5))
A[0, 2] = 1.0
A[1, 3] = 1.0


def compute_K(omega: float, dt: float) -> float:
    if not (omega > 0 and dt > 0):
        raise ValueError("omega and dt must be positive")
    return (2.0 / math.sqrt(omega)) * math.sin(0.5 * omega * dt)


@dataclass(frozen=True)
class GekfParams:
    t_out: float = 0.1
    substeps: int = 10
    Q: np.ndarray = field(default_factory=lambda: 0.05 * np.eye(5))
    R: float = 0.5
    omega: float = 30.0
    c: float = 0.3
    a_x: float = 1.0
    a_y: float = 1.0
    model: str = "derived"
    joseph: bool = False
    dither_drive: str = "estimate"
    drive: tuple[float, float] | None = None

    @property
    def K(self) -> float:
        return compute_K(self.omega, self.t_out)

    def validate(self) -> "GekfParams":
        if not self.t_out > 0:
            raise ValueError(f"t_out must be positive, got {self.t_out}")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError(f"substeps must be an integer >= 1, got {self.substeps}")
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.dither_drive not in DRIVES:
            raise ValueError(f"dither_drive must be one of {DRIVES}, got {self.dither_drive!r}")
        Q = np.asarray(self.Q, dtype=float)
        if Q.shape != (5, 5) or not np.allclose(Q, Q.T) or np.linalg.eigvalsh(Q).min() < -PSD_TOL:
            raise ValueError("Q must be a symmetric PSD 5x5 matrix")
        if abs(self.K) < 1e-12:
            raise ValueError("K vanishes: omega * t_out is a multiple of 2*pi, gradient is unobservable")
        return self

    def with_amplitudes(self, a_x: float, a_y: float, drive=None) -> "GekfParams":
        d = None if drive is None else (float(drive[0]), float(drive[1]))
        return replace(self, a_x=float(a_x), a_y=float(a_y), drive=d)


@dataclass(frozen=True)
class GekfState:
    X: np.ndarray
    P: np.ndarray


@dataclass(frozen=True)
class LbsEstimate:
    J_x: float
    J_y: float
    grad_x: float
    grad_y: float


def init(x0: Sequence[float], P0) -> GekfState:
    X = np.array(x0, dtype=float).reshape(5)
    P = np.asarray(P0, dtype=float)
    if P.ndim == 1:
        P = np.diag(P)
    if P.shape != (5, 5):
        raise ValueError(f"P0 must be 5x5 or a length-5 diagonal, got shape {P.shape}")
    if not np.allclose(P, P.T):
        raise ValueError("P0 must be symmetric")
    if np.linalg.eigvalsh(P).min() < -PSD_TOL:
        raise ValueError("P0 must be positive semi-definite")
    return GekfState(X, P.copy())


def predict(s: GekfState, p: GekfParams) -> GekfState:
    X, P = s.X.copy(), s.P.copy()
    h = p.t_out / p.substeps
    Q = np.asarray(p.Q, dtype=float)
    for _ in range(int(p.substeps)):
        X = X + h * np.array([X[2], X[3], 0.0, 0.0, 0.0])
        P = P + h * (A @ P + P @ A.T + Q)
    return GekfState(X, P)


def _drives(X: np.ndarray, p: GekfParams) -> tuple[float, float, bool]:
    if p.drive is None:
        return X[4], X[4], True
    return p.drive[0], p.drive[1], False


def h_measure(s: GekfState, p: GekfParams, t_mid: float) -> float:
    x1, x2, _, _, x5 = s.X
    dx, dy, _ = _drives(s.X, p)
    sn, cs = math.sin(p.omega * t_mid), math.cos(p.omega * t_mid)
    c, ax, ay = p.c, p.a_x, p.a_y
    if p.model == "derived":
        return x5 + (2 * c * x1 * dx + 2 * ay * x2) * sn + (2 * ax * x1 - 2 * c * x2 * dy) * cs
    return x5 + (2 * c * x1 * dx + 2 * ax * x2) * cs + (2 * ay * x1 - 2 * c * x2 * dy) * sn


def jacobian_C(s: GekfState, p: GekfParams, t_mid: float) -> np.ndarray:
    x1, x2, _, _, _ = s.X
    dx, dy, from_state = _drives(s.X, p)
    sn, cs = math.sin(p.omega * t_mid), math.cos(p.omega * t_mid)
    c, ax, ay = p.c, p.a_x, p.a_y
    if p.model == "derived":
        d5 = 2 * c * x1 * sn - 2 * c * x2 * cs
        C = [2 * c * dx * sn + 2 * ax * cs, 2 * ay * sn - 2 * c * dy * cs]
    else:
        d5 = 2 * c * x1 * cs - 2 * c * x2 * sn
        C = [2 * c * dx * cs + 2 * ay * sn, 2 * ax * cs - 2 * c * dy * sn]
    return np.array([C[0], C[1], 0.0, 0.0, 1 + (d5 if from_state else 0.0)])


def update(s: GekfState, y: float, p: GekfParams, t_mid: float) -> GekfState:
    """Scalar measurement update; the covariance is symmetrised afterwards."""
    C = jacobian_C(s, p, t_mid)
    PC = s.P @ C
    L = PC / (p.R + C @ PC)
    IKC = np.eye(5) - np.outer(L, C)
    if p.joseph:
        P = IKC @ s.P @ IKC.T + p.R * np.outer(L, L)
    else:
        P = IKC @ s.P
    P = 0.5 * (P + P.T)
    X = s.X + L * (y - h_measure(s, p, t_mid))
    return GekfState(X, P)


def gradient_estimate(s: GekfState, p: GekfParams) -> np.ndarray:
    K = p.K
    if K == 0:
        raise ValueError("K is zero; gradient cannot be recovered")
    return 2.0 * s.X[:2] / K


def lbs_estimate(grad: Sequence[float], alpha1: float, alpha2: float) -> LbsEstimate:
    gx, gy = float(grad[0]), float(grad[1])
    return LbsEstimate(alpha1 * gx, alpha2 * gy, gx, gy)


def min_eig(P: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(P).min())
