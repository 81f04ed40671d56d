# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled controller integration kernel (see _kernels_py.advance for the contract)."""
from libc.math cimport sin, cos, exp, sqrt

import numpy as np

BACKEND = "cython"


cdef inline double _field(int kind, double* fp, double x, double y) noexcept nogil:
    cdef double dx = x - fp[1]
    cdef double dy = y - fp[2]
    cdef double s, r2
    if kind == 0:
        return fp[0] - fp[3] * dx * dx - fp[4] * dy * dy
    if kind == 1:
        s = fp[3]
        return fp[0] * exp(-(dx * dx + dy * dy) / (2.0 * s * s))
    r2 = fp[3] * fp[3]
    return fp[0] * r2 / (dx * dx + dy * dy + r2)


cdef inline void _washout(double* u_prev, double* y_prev, double u, double h, double dt,
                          bint lowpass) noexcept nogil:
    if h == 0:
        u_prev[0] = u
        y_prev[0] = u
        return
    if lowpass:
        y_prev[0] = (y_prev[0] + h * dt * u) / (1.0 + h * dt)
    else:
        y_prev[0] = (y_prev[0] + u - u_prev[0]) / (1.0 + h * dt)
    u_prev[0] = u


cdef struct Ctx:
    double omega, sw, c, lx, ly, jx, jy, hx, hy, f_hold
    int field_kind
    bint hold, lowpass
    double fp[5]


cdef inline void _rhs(Ctx* g, double t, double* v, double nz, double* out) noexcept nogil:
    cdef double fv, dxf, dyf, sn, cs
    if g.hold:
        fv = g.f_hold
    else:
        fv = _field(g.field_kind, g.fp, v[0], v[1]) + nz
    if g.hx == 0:
        dxf = fv
    elif g.lowpass:
        dxf = v[4]
    else:
        dxf = fv - v[4]
    if g.hy == 0:
        dyf = fv
    elif g.lowpass:
        dyf = v[5]
    else:
        dyf = fv - v[5]
    sn = sin(g.omega * t)
    cs = cos(g.omega * t)
    out[0] = g.c * dxf * g.sw * sn + v[2] * g.sw * cs
    out[1] = -g.c * dyf * g.sw * cs + v[3] * g.sw * sn
    out[2] = -g.lx * (v[2] - g.jx)
    out[3] = -g.ly * (v[3] - g.jy)
    out[4] = g.hx * (fv - v[4])
    out[5] = g.hy * (fv - v[5])


def advance(double[::1] state, double[::1] jf, long k0, long nsteps, double dt, double omega,
            double c, double lam_x, double lam_y, double J_x, double J_y, double h1, double h2,
            bint adaptive, int target, int kind, int field_kind, fparams, noise,
            double f_hold, bint hold, field_fn=None):
    if field_kind < 0 and not hold:
        raise ValueError("compiled kernel does not support custom fields")
    cdef Ctx g
    cdef double[::1] fpv = np.ascontiguousarray(fparams, dtype=np.float64)
    cdef double[::1] nzv
    cdef bint has_noise = noise is not None
    if has_noise:
        nzv = np.ascontiguousarray(noise, dtype=np.float64)
        if nzv.shape[0] < nsteps:
            raise ValueError("noise array shorter than nsteps")
    cdef int j
    for j in range(5):
        g.fp[j] = fpv[j]
    cdef bint filt = target == 0
    g.omega = omega
    g.sw = sqrt(omega)
    g.c = c
    g.hx = h1 if filt else 0.0
    g.hy = h2 if filt else 0.0
    g.lowpass = kind == 1
    g.lx = lam_x if adaptive else 0.0
    g.ly = lam_y if adaptive else 0.0
    g.jx = J_x
    g.jy = J_y
    g.f_hold = f_hold
    g.hold = hold
    g.field_kind = field_kind
    cdef bint wash = adaptive and not filt

    cdef double v[6]
    cdef double w[6]
    cdef double a1[6]
    cdef double a2[6]
    cdef double a3[6]
    cdef double a4[6]
    for j in range(6):
        v[j] = state[j]
    cdef double jin_x = jf[0], jout_x = jf[1], jin_y = jf[2], jout_y = jf[3]
    cdef double hdt = 0.5 * dt
    cdef double sdt = dt / 6.0
    cdef double t, nz = 0.0, fm = f_hold
    cdef long i
    with nogil:
        for i in range(nsteps):
            if wash:
                _washout(&jin_x, &jout_x, J_x, h1, dt, g.lowpass)
                _washout(&jin_y, &jout_y, J_y, h2, dt, g.lowpass)
                g.jx = jout_x
                g.jy = jout_y
            t = (k0 + i) * dt
            if has_noise:
                nz = nzv[i]
            _rhs(&g, t, v, nz, a1)
            for j in range(6):
                w[j] = v[j] + hdt * a1[j]
            _rhs(&g, t + hdt, w, nz, a2)
            for j in range(6):
                w[j] = v[j] + hdt * a2[j]
            _rhs(&g, t + hdt, w, nz, a3)
            for j in range(6):
                w[j] = v[j] + dt * a3[j]
            _rhs(&g, t + dt, w, nz, a4)
            for j in range(6):
                v[j] = v[j] + sdt * (a1[j] + 2.0 * a2[j] + 2.0 * a3[j] + a4[j])
            if not hold:
                fm = _field(g.field_kind, g.fp, v[0], v[1]) + nz
    for j in range(6):
        state[j] = v[j]
    jf[0] = jin_x
    jf[1] = jout_x
    jf[2] = jin_y
    jf[3] = jout_y
    return fm
