"""Pure-Python controller integration kernel.

Mirrors ``_kernels.pyx`` operation for operation so both backends produce the
same trajectories. It also accepts a Python callable for custom fields, which
the compiled kernel cannot.
"""
from __future__ import annotations

import math

BACKEND = "python"


def field_value(kind, fp, x, y, fn=None):
    dx = x - fp[1]
    dy = y - fp[2]
    if kind == 0:
        return fp[0] - fp[3] * dx * dx - fp[4] * dy * dy
    if kind == 1:
        s = fp[3]
        return fp[0] * math.exp(-(dx * dx + dy * dy) / (2.0 * s * s))
    if kind == 2:
        r2 = fp[3] * fp[3]
        return fp[0] * r2 / (dx * dx + dy * dy + r2)
    return fn(x, y)


def _washout(u_prev, y_prev, u, h, dt, lowpass):
    if h == 0:
        return u, u
    if lowpass:
        return u, (y_prev + h * dt * u) / (1.0 + h * dt)
    return u, (y_prev + u - u_prev) / (1.0 + h * dt)


def advance(state, jf, k0, nsteps, dt, omega, c, lam_x, lam_y, J_x, J_y, h1, h2,
            adaptive, target, kind, field_kind, fparams, noise, f_hold, hold, field_fn=None):
    """Advance the controller ``nsteps`` RK4 steps of size ``dt`` in place.

    ``state`` = [x, y, a_x, a_y, z_x, z_y] and ``jf`` = J washout memory
    [in_x, out_x, in_y, out_y] are float64 arrays updated in place. Step i
    starts at t = (k0 + i) * dt. With ``hold`` the loop is driven by the held
    measurement ``f_hold``; otherwise the field is sampled at every RK4 stage
    plus ``noise[i]`` (if noise is not None). Returns the last measured f.
    """
    x, y, ax, ay, zx, zy = (float(v) for v in state)
    fp = [float(v) for v in fparams]
    sw = math.sqrt(omega)
    filt = target == 0
    hx = h1 if filt else 0.0
    hy = h2 if filt else 0.0
    lowpass = kind == 1
    jin_x, jout_x, jin_y, jout_y = (float(v) for v in jf)
    wash = adaptive and not filt
    jx, jy = J_x, J_y
    lx = lam_x if adaptive else 0.0
    ly = lam_y if adaptive else 0.0
    fm = f_hold

    def rhs(t, x, y, ax, ay, zx, zy, nz):
        if hold:
            fv = f_hold
        else:
            fv = field_value(field_kind, fp, x, y, field_fn) + nz
        if hx == 0:
            dxf = fv
        else:
            dxf = zx if lowpass else fv - zx
        if hy == 0:
            dyf = fv
        else:
            dyf = zy if lowpass else fv - zy
        sn = math.sin(omega * t)
        cs = math.cos(omega * t)
        return (c * dxf * sw * sn + ax * sw * cs,
                -c * dyf * sw * cs + ay * sw * sn,
                -lx * (ax - jx),
                -ly * (ay - jy),
                hx * (fv - zx),
                hy * (fv - zy))

    hdt = 0.5 * dt
    sdt = dt / 6.0
    for i in range(nsteps):
        if wash:
            jin_x, jout_x = _washout(jin_x, jout_x, J_x, h1, dt, lowpass)
            jin_y, jout_y = _washout(jin_y, jout_y, J_y, h2, dt, lowpass)
            jx, jy = jout_x, jout_y
        t = (k0 + i) * dt
        nz = 0.0 if noise is None else float(noise[i])
        a1 = rhs(t, x, y, ax, ay, zx, zy, nz)
        a2 = rhs(t + hdt, x + hdt * a1[0], y + hdt * a1[1], ax + hdt * a1[2], ay + hdt * a1[3],
                 zx + hdt * a1[4], zy + hdt * a1[5], nz)
        a3 = rhs(t + hdt, x + hdt * a2[0], y + hdt * a2[1], ax + hdt * a2[2], ay + hdt * a2[3],
                 zx + hdt * a2[4], zy + hdt * a2[5], nz)
        a4 = rhs(t + dt, x + dt * a3[0], y + dt * a3[1], ax + dt * a3[2], ay + dt * a3[3],
                 zx + dt * a3[4], zy + dt * a3[5], nz)
        x = x + sdt * (a1[0] + 2.0 * a2[0] + 2.0 * a3[0] + a4[0])
        y = y + sdt * (a1[1] + 2.0 * a2[1] + 2.0 * a3[1] + a4[1])
        ax = ax + sdt * (a1[2] + 2.0 * a2[2] + 2.0 * a3[2] + a4[2])
        ay = ay + sdt * (a1[3] + 2.0 * a2[3] + 2.0 * a3[3] + a4[3])
        zx = zx + sdt * (a1[4] + 2.0 * a2[4] + 2.0 * a3[4] + a4[4])
        zy = zy + sdt * (a1[5] + 2.0 * a2[5] + 2.0 * a3[5] + a4[5])
        if not hold:
            fm = field_value(field_kind, fp, x, y, field_fn) + nz
    state[0], state[1], state[2], state[3], state[4], state[5] = x, y, ax, ay, zx, zy
    jf[0], jf[1], jf[2], jf[3] = jin_x, jout_x, jin_y, jout_y
    return fm
