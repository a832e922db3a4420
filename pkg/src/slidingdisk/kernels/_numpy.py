"""Pure-numpy versions of the compiled kernels.

Time is the Python-level loop; members are vectorised.  Arithmetic is
ordered as in :mod:`slidingdisk.kernels._numba` so both paths agree to a
few ulps per step.
"""
import math

import numpy as np


def neg_dU(x, kind, amp, k):
    if kind == 0:
        return np.zeros_like(x)
    return amp * k * np.sin(k * x)


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


def _first_bad(bad, j, finite):
    if bad < 0 and not finite.all():
        return j
    return bad


def baoab_chunk(states, xi, h, sig, c, alpha, kind, amp, k, stride, out):
    n, m = xi.shape
    fric, namp = ou_coefficients(h, sig, c, alpha)
    hh = 0.5 * h
    x = states[:, 0].copy()
    th = states[:, 1].copy()
    v = states[:, 2].copy()
    om = states[:, 3].copy()
    bad = -1
    r = 0
    for j in range(m):
        v += hh * neg_dU(x, kind, amp, k)
        x += hh * v
        th += hh * om
        a = fric * (v + om) + namp * xi[:, j]
        v += a
        om += a / sig
        x += hh * v
        th += hh * om
        v += hh * neg_dU(x, kind, amp, k)
        if (j + 1) % stride == 0:
            out[:, r, 0] = x
            out[:, r, 1] = th
            out[:, r, 2] = v
            out[:, r, 3] = om
            r += 1
        bad = _first_bad(bad, j, np.isfinite(x) & np.isfinite(v) & np.isfinite(om) & np.isfinite(th))
    states[:, 0] = x
    states[:, 1] = th
    states[:, 2] = v
    states[:, 3] = om
    return bad


def em_chunk(states, dw, h, sig, c, alpha, kind, amp, k, stride, out):
    m = dw.shape[1]
    nscale = alpha * sig / math.sqrt(sig * sig + 1.0)
    x = states[:, 0].copy()
    th = states[:, 1].copy()
    v = states[:, 2].copy()
    om = states[:, 3].copy()
    bad = -1
    r = 0
    for j in range(m):
        f = neg_dU(x, kind, amp, k) * h
        cw = c * (v + om) * h
        nz = nscale * (dw[:, j, 0] + dw[:, j, 1] / sig)
        x += v * h
        th += om * h
        v += f - cw + nz
        om += (nz - cw) / sig
        if (j + 1) % stride == 0:
            out[:, r, 0] = x
            out[:, r, 1] = th
            out[:, r, 2] = v
            out[:, r, 3] = om
            r += 1
        bad = _first_bad(bad, j, np.isfinite(x) & np.isfinite(v) & np.isfinite(om) & np.isfinite(th))
    states[:, 0] = x
    states[:, 1] = th
    states[:, 2] = v
    states[:, 3] = om
    return bad


def reduced_em_chunk(ys, z, h, sig, c, kind, amp, k, noise_coef, stride, out):
    n, m = z.shape
    kr = c * (sig + 1.0) / sig
    sq = math.sqrt(h)
    d = sig + 1.0
    y1 = ys[:, 0].copy()
    y2 = ys[:, 1].copy()
    y1d = ys[:, 2].copy()
    y2d = ys[:, 3].copy()
    bad = -1
    r = 0
    for j in range(m):
        f = -neg_dU((sig * y2 - y1) / d, kind, amp, k)
        ny1 = y1 + y1d * h
        ny2 = y2 + y2d * h
        y1d = y1d + f * h
        y2d = y2d + (-f - kr * y2d) * h + noise_coef * sq * z[:, j]
        y1 = ny1
        y2 = ny2
        if (j + 1) % stride == 0:
            out[:, r, 0] = y1
            out[:, r, 1] = y2
            out[:, r, 2] = y1d
            out[:, r, 3] = y2d
            r += 1
        bad = _first_bad(bad, j, np.isfinite(y1) & np.isfinite(y2) & np.isfinite(y1d) & np.isfinite(y2d))
    ys[:, 0] = y1
    ys[:, 1] = y2
    ys[:, 2] = y1d
    ys[:, 3] = y2d
    return bad


def _controlled_rhs(y, sig, kr, kind, amp, k, drive):
    dU = -float(neg_dU(np.array((sig * y[1] - y[0]) / (sig + 1.0)), kind, amp, k))
    return np.array([y[2], y[3], dU, -dU - kr * y[3] + drive])


def controlled_rk4(y0, h, steps_per_interval, phidot, sig, c, kind, amp, k, gain, traj):
    kr = c * (sig + 1.0) / sig
    y = np.array(y0, dtype=float)
    record = traj.shape[0] > 0
    if record:
        traj[0] = y
    idx = 0
    for q in range(phidot.shape[0]):
        drive = gain * phidot[q]
        for _ in range(steps_per_interval):
            a = _controlled_rhs(y, sig, kr, kind, amp, k, drive)
            b = _controlled_rhs(y + 0.5 * h * a, sig, kr, kind, amp, k, drive)
            cc = _controlled_rhs(y + 0.5 * h * b, sig, kr, kind, amp, k, drive)
            d = _controlled_rhs(y + h * cc, sig, kr, kind, amp, k, drive)
            y = y + h / 6.0 * (a + 2.0 * b + 2.0 * cc + d)
            idx += 1
            if record:
                traj[idx] = y
    return y


def tube_chunk(incs, phi_incs, dev, alive_fine, alive_coarse, start_index, coarse_every, eps):
    n, m, p = incs.shape
    eps2 = eps * eps
    live = alive_coarse.copy()
    for j in range(m):
        dev[live] += phi_incs[j] - incs[live, j]
        out = live & (np.einsum("ij,ij->i", dev, dev) >= eps2)
        alive_fine[out] = False
        if (start_index + j + 1) % coarse_every == 0:
            alive_coarse[out] = False
            live &= ~out
    return -1
