"""Numerical checks of the two geometric ergodicity conditions on the disk.

Approximate controllability: a piecewise-linear input ``phi`` is found by
multiple shooting with damped least squares on the controlled reduced
system, then re-verified by integration at two step sizes.

Second randomisation: the derivative of the frictionless ``lambda``-flow
with respect to four bump weights, by central differences, against the
linear-response ODE as an independent oracle.
"""
from dataclasses import dataclass, field
import json
import math

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import kernels
from .controls import BumpBasis, ControlPath, default_gain
from .disk import State, YState, to_y
from .errors import NonfiniteEntries, SynthesisFailure, ValidationError
from .integrate import aligned_step, simulate_controlled
from .seeds import derive_seed, rng


def zeta_point(p, x0=None):
    """Rest state whose ``x``-argument sits where ``d2U`` is maximal."""
    if x0 is None:
        x0 = p.potential.curvature_point()
    return to_y(State(x0, 0.0, 0.0, 0.0), p.sigma_ratio)


def _gain(p, gain):
    return default_gain(p) if gain is None else float(gain)


def lambda_flow_batch(a, base, bumps, lams, t, p, h=1e-3, gain=None):
    """Terminal ``YState`` arrays of the lambda-flow for each row of ``lams``.

    ``xi2`` and its velocity are prescribed in closed form; ``(xi1, xi1')``
    obey ``xi1'' = dU((sigma xi2 - xi1)/(sigma+1))`` and are integrated by RK4.
    """
    a = a.as_array() if isinstance(a, YState) else np.asarray(a, dtype=float)
    lams = np.atleast_2d(np.asarray(lams, dtype=float))
    kappa = _gain(p, gain)
    n = int(round(t / h))
    if n <= 0 or abs(n * h - t) > 1e-9 * max(1.0, t):
        raise ValidationError("t must be an integer multiple of h")
    sig = p.sigma_ratio
    s = 0.5 * h * np.arange(2 * n + 1)
    base_int = base.integral_at(s) if base is not None else np.zeros_like(s)
    base_val = base.values_at(s) if base is not None else np.zeros_like(s)
    xi2 = a[1] + a[3] * s + kappa * (base_int[None, :] + lams @ bumps.integrals(s).T)
    xi2dot = a[3] + kappa * (base_val[None, :] + lams @ bumps.values(s).T)
    dU = p.potential.dU
    d = sig + 1.0
    y1 = np.full(lams.shape[0], a[0])
    y1d = np.full(lams.shape[0], a[2])
    for k in range(n):
        j = 2 * k
        k1x, k1v = y1d, dU((sig * xi2[:, j] - y1) / d)
        k2x, k2v = y1d + 0.5 * h * k1v, dU((sig * xi2[:, j + 1] - (y1 + 0.5 * h * k1x)) / d)
        k3x, k3v = y1d + 0.5 * h * k2v, dU((sig * xi2[:, j + 1] - (y1 + 0.5 * h * k2x)) / d)
        k4x, k4v = y1d + h * k3v, dU((sig * xi2[:, j + 2] - (y1 + h * k3x)) / d)
        y1 = y1 + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        y1d = y1d + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return np.column_stack([y1, xi2[:, -1], y1d, xi2dot[:, -1]])


def lambda_flow(a, base, bumps, lam, t, p, h=1e-3, gain=None):
    return YState.from_array(lambda_flow_batch(a, base, bumps, [lam], t, p, h, gain)[0])


# row order of the Jacobian: (xi1, xi1dot, xi2, xi2dot)
_ROWS = [0, 2, 1, 3]


@dataclass
class JacobianReport:
    matrix: np.ndarray
    singular_values: np.ndarray
    condition_number: float
    rank: int
    delta: float

    @classmethod
    def from_matrix(cls, M, delta, tol=1e-10):
        M = np.asarray(M, dtype=float)
        if not np.all(np.isfinite(M)):
            raise NonfiniteEntries("Jacobian has non-finite entries")
        sv = np.linalg.svd(M, compute_uv=False)
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
        rank = int(np.sum(sv > tol * max(1.0, sv[0])))
        return cls(M, sv, cond, rank, float(delta))

    def to_json(self):
        cond = self.condition_number if math.isfinite(self.condition_number) else None
        return json.dumps(
            {
                "matrix": self.matrix.tolist(),
                "singular_values": self.singular_values.tolist(),
                "condition_number": cond,
                "rank": self.rank,
                "delta": self.delta,
            },
            sort_keys=True,
        )


def lambda_jacobian(a, base, bumps, t, p, h=1e-3, delta=1e-4, gain=None):
    """Central-difference Jacobian of the lambda-flow at ``lambda = 0``."""
    lams = np.vstack([delta * np.eye(4), -delta * np.eye(4)])
    out = lambda_flow_batch(a, base, bumps, lams, t, p, h, gain)
    M = ((out[:4] - out[4:]) / (2 * delta)).T[_ROWS]
    return JacobianReport.from_matrix(M, delta)


def linearized_response(a, bumps, t, p, h=1e-3, gain=None):
    """Linear response of the lambda-flow frozen at the curvature of ``a``.

    ``eta'' = -(U''/(sigma+1)) eta + U'' sigma/(sigma+1) * d_xi2`` gives the
    ``xi1`` rows; the ``xi2`` rows are ``gain * int phi_i`` and
    ``gain * phi_i(t)``.
    """
    a = a.as_array() if isinstance(a, YState) else np.asarray(a, dtype=float)
    kappa = _gain(p, gain)
    sig = p.sigma_ratio
    x0 = (sig * a[1] - a[0]) / (sig + 1.0)
    u2 = float(p.potential.d2U(x0))
    ka = u2 / (sig + 1.0)
    kb = u2 * sig / (sig + 1.0)
    n = int(round(t / h))

    def forcing(s):
        return kb * kappa * bumps.integrals(s)

    eta = np.zeros(4)
    etad = np.zeros(4)
    for k in range(n):
        s = k * h
        f0, f1, f2 = forcing(s), forcing(s + 0.5 * h), forcing(s + h)
        k1x, k1v = etad, -ka * eta + f0
        k2x, k2v = etad + 0.5 * h * k1v, -ka * (eta + 0.5 * h * k1x) + f1
        k3x, k3v = etad + 0.5 * h * k2v, -ka * (eta + 0.5 * h * k2x) + f1
        k4x, k4v = etad + h * k3v, -ka * (eta + h * k3x) + f2
        eta = eta + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        etad = etad + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return np.vstack([eta, etad, kappa * bumps.integrals(t), kappa * bumps.values(t)])


def verify_control(start, control, target, p, eps, h=None):
    """Terminal distance, taken as the worse of steps ``h`` and ``h/2``."""
    h = aligned_step(control, 0.01) if h is None else h
    tgt = target.as_array() if isinstance(target, YState) else np.asarray(target, dtype=float)
    d1 = np.linalg.norm(simulate_controlled(start, p, control, h=h, record=False) - tgt)
    d2 = np.linalg.norm(simulate_controlled(start, p, control, h=0.5 * h, record=False) - tgt)
    dist = float(max(d1, d2))
    return dist, dist < eps


@dataclass
class _LMResult:
    free: np.ndarray
    distance: float
    iterations: int
    history: list = field(default_factory=list)


def _fd_jacobian(fun, x, r, fd_step=1e-6):
    J = np.empty((r.size, x.size))
    for i in range(x.size):
        dx = fd_step * max(1.0, abs(x[i]))
        xp = x.copy()
        xp[i] += dx
        J[:, i] = (fun(xp) - r) / dx
    return J


def _levenberg_marquardt(fun, x0, tol, max_iter=300, jac=None):
    """Damped Gauss-Newton on an underdetermined residual.

    The step is ``-J^T (J J^T + mu s I)^{-1} r`` with ``s`` the mean diagonal
    of ``J J^T``; ``mu`` shrinks on success and grows on failure.  ``jac``
    defaults to forward differences.
    """
    x = np.array(x0, dtype=float)
    r = fun(x)
    cost = float(r @ r)
    mu = 1e-3
    it = 0
    for it in range(1, max_iter + 1):
        if math.sqrt(cost) < tol:
            break
        J = _fd_jacobian(fun, x, r) if jac is None else jac(x, r)
        JJ = J @ J.T
        scale = max(float(np.trace(JJ)) / r.size, 1e-12)
        improved = False
        for _ in range(30):
            try:
                step = -J.T @ np.linalg.solve(JJ + mu * scale * np.eye(r.size), r)
            except np.linalg.LinAlgError:
                mu *= 4.0
                continue
            xn = x + step
            rn = fun(xn)
            cn = float(rn @ rn)
            if np.isfinite(cn) and cn < cost:
                x, r, cost = xn, rn, cn
                mu = max(mu * 0.3, 1e-15)
                improved = True
                break
            mu *= 4.0
        if not improved:
            break
    return _LMResult(x, math.sqrt(cost), it)


def _x_of(y, sig):
    return (sig * y[1] - y[0]) / (sig + 1.0), (sig * y[3] - y[2]) / (sig + 1.0)


def _hermite(u, x0, d0, x1, d1, span):
    return (
        (2 * u**3 - 3 * u**2 + 1) * x0
        + (u**3 - 2 * u**2 + u) * span * d0
        + (-2 * u**3 + 3 * u**2) * x1
        + (u**3 - u**2) * span * d1
    )


def two_phase_guess(start, target, p, t_total, n_knots, gain, well_shift=0, coef_scale=0.0, seed=0, n_fine=100):
    """Input slopes and node states from a smooth path built in two phases.

    ``x`` leaves the start for the bottom of a potential well within the
    first second, wobbles there so that ``Y1`` picks up exactly the required
    displacement and velocity through the potential coupling, then moves to
    the target ``x`` in the last second.  Staying where ``d2U > 0`` keeps the
    path insensitive to input errors.  ``Y2`` and ``phi'`` follow in closed
    form; ``phi'`` is averaged over each knot interval.

    Returns ``(slopes, nodes)`` with ``nodes`` the states at interior knots.
    """
    s = start.as_array() if isinstance(start, YState) else np.asarray(start, dtype=float)
    g = target.as_array() if isinstance(target, YState) else np.asarray(target, dtype=float)
    sig = p.sigma_ratio
    M = n_knots - 1
    dt = t_total / M
    n = M * n_fine + 1
    t = np.linspace(0.0, t_total, n)
    xs, xsd = _x_of(s, sig)
    xg, xgd = _x_of(g, sig)
    L = p.potential.period
    bottom = p.potential.curvature_point()
    xw = bottom + L * (np.round((xg - bottom) / L) + well_shift)
    tau = dt * math.ceil(min(1.0, 0.25 * t_total) / dt - 1e-9)
    tau = min(tau, 0.25 * t_total)
    base = np.full(n, xw)
    head = t < tau
    base[head] = _hermite(t[head] / tau, xs, xsd, xw, 0.0, tau)
    tail = t > t_total - tau
    base[tail] = _hermite((t[tail] - (t_total - tau)) / tau, xw, 0.0, xg, xgd, tau)
    um = np.clip((t - tau) / (t_total - 2 * tau), 0.0, 1.0)
    B = np.stack([16.0 * (um * (1 - um)) ** 2 * np.cos(np.pi * j * um) for j in range(8)], axis=1)
    w = np.full(n, t[1])
    w[0] = w[-1] = 0.5 * t[1]
    dU = p.potential.dU
    need = np.array([g[0] - s[0] - s[2] * t_total, g[2] - s[2]])

    def moments(a):
        f = dU(base + B @ a)
        return np.array([w @ ((t_total - t) * f), w @ f]) - need

    a0 = coef_scale * rng(derive_seed(seed, "guess-coef")).standard_normal(B.shape[1])
    a = _levenberg_marquardt(moments, a0, tol=1e-10, max_iter=100).free
    x = base + B @ a
    f = dU(x)
    y1d = s[2] + cumulative_trapezoid(f, t, initial=0.0)
    y1 = s[0] + cumulative_trapezoid(y1d, t, initial=0.0)
    y2 = ((sig + 1.0) * x + y1) / sig
    y2d = np.gradient(y2, t, edge_order=2)
    y2dd = np.gradient(y2d, t, edge_order=2)
    kr = p.c * p.gamma_fric()
    phid = (y2dd + f + kr * y2d) / gain
    slopes = np.array([phid[k * n_fine:(k + 1) * n_fine + 1].mean() for k in range(M)])
    nodes = np.column_stack([y1, y2, y1d, y2d])[n_fine:-1:n_fine]
    return slopes, nodes


def _multiple_shooting(start, target, p, slopes, nodes, dt, h, gain, tol, max_iter=200):
    """Solve for knot slopes with node states as auxiliary unknowns.

    Residuals are the continuity defects at interior knots and the terminal
    mismatch, all unit-weighted.  Returns the refined slopes.
    """
    s = start.as_array() if isinstance(start, YState) else np.asarray(start, dtype=float)
    g = target.as_array() if isinstance(target, YState) else np.asarray(target, dtype=float)
    M = slopes.size
    spi = int(round(dt / h))
    kind, amp, k = p.potential.kernel_args
    sig, c = p.sigma_ratio, p.c
    empty = np.empty((0, 4))

    def seg(y, q):
        return kernels.controlled_rk4(np.ascontiguousarray(y), h, spi, np.array([q]), sig, c, kind, amp, k, gain, empty)

    def split(z):
        return z[:M], np.vstack([s, z[M:].reshape(M - 1, 4)])

    def fun(z):
        q, heads = split(z)
        ends = np.vstack([heads[1:], g])
        return np.concatenate([seg(heads[i], q[i]) - ends[i] for i in range(M)])

    def jac(z, r):
        q, heads = split(z)
        J = np.zeros((4 * M, z.size))
        d = 1e-7
        for i in range(M):
            rows = slice(4 * i, 4 * i + 4)
            ref = seg(heads[i], q[i])
            J[rows, i] = (seg(heads[i], q[i] + d) - ref) / d
            if i > 0:
                for j in range(4):
                    y = heads[i].copy()
                    y[j] += d
                    J[rows, M + 4 * (i - 1) + j] = (seg(y, q[i]) - ref) / d
            if i < M - 1:
                J[rows, M + 4 * i:M + 4 * i + 4] -= np.eye(4)
        return J

    z0 = np.concatenate([slopes, np.asarray(nodes, dtype=float).ravel()])
    res = _levenberg_marquardt(fun, z0, tol=tol, max_iter=max_iter, jac=jac)
    return res.free[:M], res.distance, res.iterations


def ramp_guess(start, target, p, t_total, n_knots, gain):
    """Knot values whose slope holds ``Y2'`` near the average speed needed."""
    s = start.as_array() if isinstance(start, YState) else np.asarray(start)
    g = target.as_array() if isinstance(target, YState) else np.asarray(target)
    vbar = (g[1] - s[1]) / t_total
    rate = p.c * p.gamma_fric()
    knots = np.linspace(0.0, t_total, n_knots)
    if gain == 0:
        return np.zeros(n_knots - 1)
    # jump of Y2' to vbar at the start, then hold it against friction
    slope = rate * vbar / gain
    vals = slope * knots + (vbar - s[3]) / gain * (knots > 0)
    return vals[1:]


def build_control(start, target, p, t_total=20.0, n_knots=16, eps=1e-2, seed=0, h_max=0.01, gain=None, n_starts=8):
    """Find a piecewise-linear input steering ``start`` into the ``eps``-ball of ``target``.

    Each start seeds a multiple-shooting solve (node states as auxiliary
    unknowns), then the knot values are polished by single shooting on the
    terminal mismatch and re-verified.  Start 0 is :func:`two_phase_guess`,
    start 1 is plain single shooting from the :func:`ramp_guess` profile, later starts use other wells and
    seeded wobble coefficients.

    Raises :class:`SynthesisFailure` with the best distance if no start
    succeeds.
    """
    if n_knots < 8:
        raise ValidationError("n_knots must be >= 8")
    if not t_total > 0 or not eps > 0:
        raise ValidationError("t_total and eps must be positive")
    kappa = _gain(p, gain)
    start = start if isinstance(start, YState) else YState.from_array(start)
    target = target if isinstance(target, YState) else YState.from_array(target)
    tgt = target.as_array()
    proto = ControlPath.zero(t_total, n_knots, kappa)
    h = aligned_step(proto, h_max)
    dt = proto.spacing

    def make(free):
        return ControlPath.from_free_values(t_total, free, kappa)

    def residual(free):
        return simulate_controlled(start, p, make(free), h=h, record=False) - tgt

    zero = np.zeros(n_knots - 1)
    dist0, ok0 = verify_control(start, make(zero), target, p, eps, h)
    if ok0:
        return make(zero)

    diagnostics = {"starts": []}
    best = dist0
    for k in range(n_starts):
        entry = {"start": k}
        try:
            if k == 1:
                res = _levenberg_marquardt(
                    residual, ramp_guess(start, target, p, t_total, n_knots, kappa), tol=0.25 * eps
                )
                free = res.free
                entry["iterations"] = res.iterations
            else:
                shift = 0 if k == 0 else (-1) ** k * ((k - 1) // 2 % 2)
                slopes, nodes = two_phase_guess(
                    start, target, p, t_total, n_knots, kappa,
                    well_shift=shift, coef_scale=0.0 if k == 0 else 0.5, seed=derive_seed(seed, "control-start", k),
                )
                slopes, defect, iters = _multiple_shooting(
                    start, target, p, slopes, nodes, dt, h, kappa, tol=1e-3 * eps
                )
                free = np.cumsum(slopes) * dt
                entry.update(defect=defect, iterations=iters)
                if np.linalg.norm(residual(free)) >= 0.25 * eps:
                    res = _levenberg_marquardt(residual, free, tol=0.25 * eps, max_iter=100)
                    free = res.free
                    entry["polish_iterations"] = res.iterations
        except (FloatingPointError, np.linalg.LinAlgError, ValidationError) as err:
            entry["error"] = str(err)
            diagnostics["starts"].append(entry)
            continue
        ctrl = make(free)
        dist, ok = verify_control(start, ctrl, target, p, eps, h)
        entry["distance"] = dist
        diagnostics["starts"].append(entry)
        best = min(best, dist)
        if ok:
            return ctrl
    raise SynthesisFailure("no start reached the target ball", best, diagnostics)


def random_pairs(master, n, sigma, offset=1.0, speed=1.0):
    """Seeded start/target ``YState`` pairs for controllability sweeps.

    Start positions are uniform on ``[0, 1)``, target positions are the start
    plus an offset in ``[-offset, offset]``; all velocities lie in
    ``[-speed, speed]``.  Pair ``i`` depends only on ``(master, i)``.
    """
    out = []
    for i in range(n):
        g = rng(derive_seed(master, "control-pair", i))
        x, th = g.uniform(0.0, 1.0, 2)
        v, w = g.uniform(-speed, speed, 2)
        dx, dth = g.uniform(-offset, offset, 2)
        tv, tw = g.uniform(-speed, speed, 2)
        out.append((to_y(State(x, th, v, w), sigma), to_y(State(x + dx, th + dth, tv, tw), sigma)))
    return out
