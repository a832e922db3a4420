"""Compiled inner loops.

Every kernel loops members outermost and time innermost.  Signatures and
results match :mod:`slidingdisk.kernels._numpy` exactly; the return value
is the first step index at which a non-finite state appeared, or -1.
"""
import math

import numba
import numpy as np

jit = numba.njit(nogil=True, cache=True)


@jit
def neg_dU(x, kind, amp, k):
    if kind == 0:
        return 0.0
    return amp * k * math.sin(k * x)


@jit
def ou_coefficients(h, sig, c, alpha):
    gamma = (sig + 1.0) / sig
    kr = c * gamma
    if kr > 0.0:
        decay_m1 = math.expm1(-kr * h)
        amp = alpha * math.sqrt(-math.expm1(-2.0 * kr * h) / (2.0 * kr))
    else:
        decay_m1 = 0.0
        amp = alpha * math.sqrt(h)
    return decay_m1 / gamma, amp


@jit
def baoab_chunk(states, xi, h, sig, c, alpha, kind, amp, k, stride, out):
    n, m = xi.shape
    fric, namp = ou_coefficients(h, sig, c, alpha)
    hh = 0.5 * h
    bad = -1
    for i in range(n):
        x = states[i, 0]
        th = states[i, 1]
        v = states[i, 2]
        om = states[i, 3]
        r = 0
        for j in range(m):
            v += hh * neg_dU(x, kind, amp, k)
            x += hh * v
            th += hh * om
            a = fric * (v + om) + namp * xi[i, j]
            v += a
            om += a / sig
            x += hh * v
            th += hh * om
            v += hh * neg_dU(x, kind, amp, k)
            if (j + 1) % stride == 0:
                out[i, r, 0] = x
                out[i, r, 1] = th
                out[i, r, 2] = v
                out[i, r, 3] = om
                r += 1
            if not (math.isfinite(x) and math.isfinite(v) and math.isfinite(om) and math.isfinite(th)):
                if bad < 0 or j < bad:
                    bad = j
                break
        states[i, 0] = x
        states[i, 1] = th
        states[i, 2] = v
        states[i, 3] = om
    return bad


@jit
def em_chunk(states, dw, h, sig, c, alpha, kind, amp, k, stride, out):
    n = dw.shape[0]
    m = dw.shape[1]
    nscale = alpha * sig / math.sqrt(sig * sig + 1.0)
    bad = -1
    for i in range(n):
        x = states[i, 0]
        th = states[i, 1]
        v = states[i, 2]
        om = states[i, 3]
        r = 0
        for j in range(m):
            f = neg_dU(x, kind, amp, k) * h
            cw = c * (v + om) * h
            nz = nscale * (dw[i, j, 0] + dw[i, j, 1] / sig)
            x += v * h
            th += om * h
            v += f - cw + nz
            om += (nz - cw) / sig
            if (j + 1) % stride == 0:
                out[i, r, 0] = x
                out[i, r, 1] = th
                out[i, r, 2] = v
                out[i, r, 3] = om
                r += 1
            if not (math.isfinite(x) and math.isfinite(v) and math.isfinite(om) and math.isfinite(th)):
                if bad < 0 or j < bad:
                    bad = j
                break
        states[i, 0] = x
        states[i, 1] = th
        states[i, 2] = v
        states[i, 3] = om
    return bad


@jit
def reduced_em_chunk(ys, z, h, sig, c, kind, amp, k, noise_coef, stride, out):
    n, m = z.shape
    kr = c * (sig + 1.0) / sig
    sq = math.sqrt(h)
    d = sig + 1.0
    bad = -1
    for i in range(n):
        y1 = ys[i, 0]
        y2 = ys[i, 1]
        y1d = ys[i, 2]
        y2d = ys[i, 3]
        r = 0
        for j in range(m):
            f = -neg_dU((sig * y2 - y1) / d, kind, amp, k)
            ny1 = y1 + y1d * h
            ny2 = y2 + y2d * h
            y1d += f * h
            y2d += (-f - kr * y2d) * h + noise_coef * sq * z[i, j]
            y1 = ny1
            y2 = ny2
            if (j + 1) % stride == 0:
                out[i, r, 0] = y1
                out[i, r, 1] = y2
                out[i, r, 2] = y1d
                out[i, r, 3] = y2d
                r += 1
            if not (math.isfinite(y1) and math.isfinite(y2) and math.isfinite(y1d) and math.isfinite(y2d)):
                if bad < 0 or j < bad:
                    bad = j
                break
        ys[i, 0] = y1
        ys[i, 1] = y2
        ys[i, 2] = y1d
        ys[i, 3] = y2d
    return bad


@jit
def _controlled_rhs(y1, y2, y1d, y2d, sig, kr, kind, amp, k, drive):
    dU = -neg_dU((sig * y2 - y1) / (sig + 1.0), kind, amp, k)
    return y1d, y2d, dU, -dU - kr * y2d + drive


@jit
def controlled_rk4(y0, h, steps_per_interval, phidot, sig, c, kind, amp, k, gain, traj):
    """RK4 for the controlled reduced system; ``traj`` gets every state if non-empty."""
    kr = c * (sig + 1.0) / sig
    y1 = y0[0]
    y2 = y0[1]
    y1d = y0[2]
    y2d = y0[3]
    record = traj.shape[0] > 0
    if record:
        traj[0, 0] = y1
        traj[0, 1] = y2
        traj[0, 2] = y1d
        traj[0, 3] = y2d
    idx = 0
    for q in range(phidot.shape[0]):
        drive = gain * phidot[q]
        for _ in range(steps_per_interval):
            a1, a2, a3, a4 = _controlled_rhs(y1, y2, y1d, y2d, sig, kr, kind, amp, k, drive)
            b1, b2, b3, b4 = _controlled_rhs(
                y1 + 0.5 * h * a1, y2 + 0.5 * h * a2, y1d + 0.5 * h * a3, y2d + 0.5 * h * a4,
                sig, kr, kind, amp, k, drive,
            )
            c1, c2, c3, c4 = _controlled_rhs(
                y1 + 0.5 * h * b1, y2 + 0.5 * h * b2, y1d + 0.5 * h * b3, y2d + 0.5 * h * b4,
                sig, kr, kind, amp, k, drive,
            )
            d1, d2, d3, d4 = _controlled_rhs(
                y1 + h * c1, y2 + h * c2, y1d + h * c3, y2d + h * c4,
                sig, kr, kind, amp, k, drive,
            )
            y1 += h / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
            y2 += h / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
            y1d += h / 6.0 * (a3 + 2.0 * b3 + 2.0 * c3 + d3)
            y2d += h / 6.0 * (a4 + 2.0 * b4 + 2.0 * c4 + d4)
            idx += 1
            if record:
                traj[idx, 0] = y1
                traj[idx, 1] = y2
                traj[idx, 2] = y1d
                traj[idx, 3] = y2d
    out = np.empty(4)
    out[0] = y1
    out[1] = y2
    out[2] = y1d
    out[3] = y2d
    return out


@jit
def tube_chunk(incs, phi_incs, dev, alive_fine, alive_coarse, start_index, coarse_every, eps):
    """Advance deviations ``phi - omega`` and flag exits of the eps-tube.

    ``alive_coarse`` only looks at grid indices divisible by ``coarse_every``.
    """
    n, m, p = incs.shape
    eps2 = eps * eps
    for i in range(n):
        if not alive_coarse[i]:
            continue
        for j in range(m):
            r2 = 0.0
            for q in range(p):
                dev[i, q] += phi_incs[j, q] - incs[i, j, q]
                r2 += dev[i, q] * dev[i, q]
            if r2 >= eps2:
                alive_fine[i] = False
                if (start_index + j + 1) % coarse_every == 0:
                    alive_coarse[i] = False
                    break
    return -1
