"""Time integrators for the sliding disk.

Two stochastic schemes act on ``(x, theta, v, omega)``:

* ``euler_maruyama``: explicit, consumes the raw 2-vector noise increment
  (Brownian or Lévy).
* ``baoab_split``: half kick, half drift, exact friction/noise solve,
  half drift, half kick.  Friction and noise act along ``u = (1, 1/sigma)``
  only, so the middle substep is a scalar Ornstein-Uhlenbeck update of
  ``v + omega`` and costs one standard normal.

Ensemble runs go through :func:`run_ensemble`; the per-member noise
stream depends only on that member's seed, so results do not depend on
batching or thread count.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import csv
import math
import os

import numpy as np

from . import kernels
from .controls import default_gain
from .disk import State, YState, casimir, energy  # noqa: F401
from .errors import KnotMisalignment, NonfiniteState, SchemeNoiseMismatch, ValidationError
from .noise import LevyCharacteristics, draw_increments
from .seeds import SeedStream, derive_seed, derive_seeds, rng

SCHEMES = ("euler_maruyama", "baoab_split")
BATCH = 64
CHUNK_STEPS = 1 << 14


@dataclass(frozen=True)
class SchemeSpec:
    kind: str = "baoab_split"
    h: float = 0.01

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValidationError(f"unknown scheme {self.kind!r}")
        if not self.h > 0:
            raise ValidationError("step h must be positive")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    energy: np.ndarray = None
    casimir: np.ndarray = None

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x", "theta", "v", "omega", "energy", "casimir"])
            for t, s, e, c in zip(self.times, self.states, self.energy, self.casimir):
                w.writerow([repr(float(t))] + [repr(float(a)) for a in s] + [repr(float(e)), repr(float(c))])


def em_step(s, p, h, dw):
    """One explicit Euler-Maruyama step with noise increment ``dw`` (2-vector)."""
    sig = p.sigma_ratio
    f = -float(p.potential.dU(s.x)) * h
    cw = p.c * (s.v + s.omega) * h
    nz = p.alpha * sig / math.sqrt(sig * sig + 1.0) * (dw[0] + dw[1] / sig)
    new = (s.x + s.v * h, s.theta + s.omega * h, s.v + f - cw + nz, s.omega + (nz - cw) / sig)
    if not all(math.isfinite(a) for a in new):
        raise NonfiniteState("state became non-finite")
    return State(*new)


def _ou_coefficients(p, h):
    gamma = p.gamma_fric()
    kr = p.c * gamma
    if kr > 0:
        return math.expm1(-kr * h) / gamma, p.alpha * math.sqrt(-math.expm1(-2 * kr * h) / (2 * kr))
    return 0.0, p.alpha * math.sqrt(h)


def ou_exact_step(s, p, h, xi):
    """Exact solve of the friction/noise part over ``h``; positions are untouched."""
    fric, amp = _ou_coefficients(p, h)
    a = fric * (s.v + s.omega) + amp * xi
    return State(s.x, s.theta, s.v + a, s.omega + a / p.sigma_ratio)


def baoab_step(s, p, h, xi):
    hh = 0.5 * h
    v = s.v - hh * float(p.potential.dU(s.x))
    x = s.x + hh * v
    th = s.theta + hh * s.omega
    mid = ou_exact_step(State(x, th, v, s.omega), p, h, xi)
    x = mid.x + hh * mid.v
    th = mid.theta + hh * mid.omega
    v = mid.v - hh * float(p.potential.dU(x))
    return State(x, th, v, mid.omega)


def thread_count(threads=None):
    if threads is None:
        threads = int(os.environ.get("SLIDINGDISK_THREADS", "1"))
    return max(1, int(threads))


def n_steps_for(T, h):
    n = int(round(T / h))
    if n <= 0 or abs(n * h - T) > 1e-9 * max(1.0, T):
        raise ValidationError(f"T = {T} is not an integer multiple of h = {h}")
    return n


def _check_noise(scheme, noise):
    if noise is None:
        return None
    if not isinstance(noise, LevyCharacteristics):
        raise ValidationError("noise source must be LevyCharacteristics or None (Brownian)")
    if noise.dim != 2:
        raise ValidationError("the disk needs a 2-dimensional driving noise")
    standard = noise.is_brownian and np.array_equal(noise.gauss, np.eye(2)) and not noise.drift.any()
    if scheme.kind == "baoab_split" and not standard:
        raise SchemeNoiseMismatch("baoab_split requires standard Brownian driving noise")
    return None if standard else noise


def _run_batch(states, p, scheme, n_steps, seeds, stride, noise, out):
    """Advance ``states`` (modified in place) and fill ``out`` with records."""
    nb = states.shape[0]
    gens = [rng(s) for s in seeds]
    h = scheme.h
    args = p.kernel_args
    chunk = max(stride, (CHUNK_STEPS // stride) * stride)
    done = 0
    rec = 0
    while done < n_steps:
        m = min(chunk, n_steps - done)
        nrec = m // stride
        buf = np.empty((nb, max(nrec, 1), 4))
        if scheme.kind == "baoab_split":
            xi = np.empty((nb, m))
            for i, g in enumerate(gens):
                xi[i] = g.standard_normal(m)
            bad = kernels.baoab_chunk(states, xi, h, *args, stride, buf)
        else:
            dw = np.empty((nb, m, 2))
            if noise is None:
                sq = math.sqrt(h)
                for i, g in enumerate(gens):
                    dw[i] = sq * g.standard_normal((m, 2))
            else:
                dts = np.full(m, h)
                for i, g in enumerate(gens):
                    dw[i] = draw_increments(noise, dts, g)
            bad = kernels.em_chunk(states, dw, h, *args, stride, buf)
        if bad >= 0:
            raise NonfiniteState("state became non-finite", done + int(bad))
        if nrec:
            out[:, rec : rec + nrec] = buf[:, :nrec]
        rec += nrec
        done += m
    return out


def run_ensemble(states0, p, scheme, n_steps, seeds, stride=None, noise=None, threads=None):
    """Integrate many independent members.

    ``states0``: ``(n, 4)`` array; ``seeds``: ``n`` per-member 64-bit seeds.
    Returns ``(records, final)`` with ``records`` of shape
    ``(n, n_steps // stride, 4)`` (states after steps ``stride, 2 stride, ...``).
    """
    noise = _check_noise(scheme, noise)
    states = np.array(states0, dtype=float).reshape(-1, 4)
    seeds = np.asarray(seeds, dtype=np.uint64).ravel()
    n = states.shape[0]
    if seeds.size != n:
        raise ValidationError("need one seed per ensemble member")
    stride = n_steps if stride is None else int(stride)
    if stride <= 0 or n_steps % stride:
        raise ValidationError("stride must divide the number of steps")
    records = np.empty((n, n_steps // stride, 4))
    batches = [(b, min(b + BATCH, n)) for b in range(0, n, BATCH)]

    def work(bounds):
        a, b = bounds
        st = states[a:b].copy()
        _run_batch(st, p, scheme, n_steps, seeds[a:b], stride, noise, records[a:b])
        states[a:b] = st

    nt = thread_count(threads)
    if nt == 1 or len(batches) == 1:
        for bb in batches:
            work(bb)
    else:
        with ThreadPoolExecutor(nt) as pool:
            list(pool.map(work, batches))
    return records, states


def simulate(s0, p, scheme, T, noise_source=None, seed=0, stride=1, observables=("energy", "casimir")):
    """Single trajectory from ``s0``; ``noise_source`` ``None`` means Brownian."""
    n = n_steps_for(T, scheme.h)
    s0 = s0.as_array() if isinstance(s0, State) else np.asarray(s0, dtype=float)
    seeds = np.array([derive_seed(seed, "path")], dtype=np.uint64)
    rec, _ = run_ensemble(s0[None, :], p, scheme, n, seeds, stride, noise_source, threads=1)
    states = np.vstack([s0[None, :], rec[0]])
    times = scheme.h * stride * np.arange(states.shape[0])
    traj = Trajectory(times, states)
    if "energy" in observables:
        traj.energy = 0.5 * states[:, 2] ** 2 + 0.5 * p.sigma_ratio * states[:, 3] ** 2 + p.potential.value(states[:, 0])
    if "casimir" in observables:
        traj.casimir = -states[:, 2] + p.sigma_ratio * states[:, 3]
    return traj


def ensemble_seeds(seed, tag, n_init, n_noise):
    """``(n_init * n_noise,)`` member seeds, row-major in ``(i, j)``."""
    i, j = np.meshgrid(np.arange(n_init), np.arange(n_noise), indexing="ij")
    return derive_seeds(SeedStream(int(seed), (tag,)), i.ravel(), j.ravel())


def aligned_step(control, h_max):
    """Largest step ``<= h_max`` that divides the knot spacing."""
    m = int(math.ceil(control.spacing / h_max - 1e-12))
    return control.spacing / m


def _steps_per_interval(control, h):
    r = control.spacing / h
    m = int(round(r))
    if m < 1 or abs(r - m) > 1e-9 * max(1.0, r):
        raise KnotMisalignment(f"knot spacing {control.spacing} is not a multiple of h = {h}")
    return m


def simulate_controlled(y0, p, control, T=None, h=0.01, gain=None, record=True):
    """RK4 for ``Y1'' = dU(x)``, ``Y2'' = -dU(x) - c gamma Y2' + gain * phi'``.

    ``x = (sigma Y2 - Y1)/(sigma + 1)``.  ``phi'`` is piecewise constant, so the
    knots must sit on the step grid.  Returns ``(times, ys)``; with
    ``record=False`` only the terminal state (a 4-array) is returned.
    """
    T = control.t_total if T is None else T
    spi = _steps_per_interval(control, h)
    n_int = int(round(T / control.spacing))
    if n_int < 0 or abs(n_int * control.spacing - T) > 1e-9 * max(1.0, T) or n_int > control.n_knots - 1:
        raise KnotMisalignment("T must be a knot time of the control")
    if gain is None:
        gain = control.gain if control.gain is not None else default_gain(p)
    y0 = y0.as_array() if isinstance(y0, YState) else np.asarray(y0, dtype=float)
    slopes = np.ascontiguousarray(control.slopes()[:n_int], dtype=float)
    kind, amp, k = p.potential.kernel_args
    traj = np.empty((n_int * spi + 1 if record else 0, 4))
    final = kernels.controlled_rk4(
        np.ascontiguousarray(y0), float(h), spi, slopes, p.sigma_ratio, p.c, kind, amp, k, float(gain), traj
    )
    if not record:
        return np.asarray(final)
    return h * np.arange(traj.shape[0]), traj


def reduced_ensemble(ys0, p, h, n_steps, seeds, noise_coef=None, stride=None):
    """Euler-Maruyama on the reduced ``Y`` system with one scalar noise.

    ``noise_coef`` defaults to ``alpha * gamma_fric``, the norm of the
    re-derived noise row.
    """
    if noise_coef is None:
        noise_coef = p.alpha * p.gamma_fric()
    ys = np.array(ys0, dtype=float).reshape(-1, 4)
    n = ys.shape[0]
    stride = n_steps if stride is None else stride
    out = np.empty((n, n_steps // stride, 4))
    kind, amp, k = p.potential.kernel_args
    for a in range(0, n, BATCH):
        b = min(a + BATCH, n)
        z = np.empty((b - a, n_steps))
        for i, s in enumerate(np.asarray(seeds, dtype=np.uint64)[a:b]):
            z[i] = rng(s).standard_normal(n_steps)
        sub = ys[a:b].copy()
        bad = kernels.reduced_em_chunk(sub, z, h, p.sigma_ratio, p.c, kind, amp, k, float(noise_coef), stride, out[a:b])
        if bad >= 0:
            raise NonfiniteState("reduced state became non-finite", int(bad))
        ys[a:b] = sub
    return out, ys


__all__ = [
    "SchemeSpec",
    "Trajectory",
    "em_step",
    "ou_exact_step",
    "baoab_step",
    "simulate",
    "run_ensemble",
    "simulate_controlled",
    "reduced_ensemble",
    "energy",
    "casimir",
]
