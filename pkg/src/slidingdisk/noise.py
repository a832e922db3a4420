"""Driving Lévy noise: drift + non-degenerate Gaussian part + finite-activity jumps.

Only compound-Poisson jump parts are simulated.  An infinite-activity
small-jump martingale enters solely through :func:`effective_drift`.
"""
from dataclasses import dataclass, field
import csv
import math

import numpy as np
from scipy import integrate

from . import kernels
from .errors import DegenerateGaussPart, EmptyGrid, NegativeRate, QuadratureFailure, ValidationError
from .seeds import derive_seed, rng


@dataclass(frozen=True)
class JumpComponent:
    """Poisson jumps at ``rate`` per unit time.

    ``kind="fixed"`` jumps by ``z``; ``kind="gaussian"`` draws each jump from
    independent normals with per-coordinate ``mean`` and ``sd``.
    """

    rate: float
    kind: str = "fixed"
    z: tuple = ()
    mean: tuple = ()
    sd: tuple = ()

    def __post_init__(self):
        if self.kind not in ("fixed", "gaussian"):
            raise ValidationError(f"unknown jump size family {self.kind!r}")
        if self.kind == "gaussian" and any(s <= 0 for s in self.sd):
            raise ValidationError("gaussian jump sd components must be > 0")

    @classmethod
    def fixed(cls, rate, z):
        return cls(float(rate), "fixed", z=tuple(np.atleast_1d(z).astype(float)))

    @classmethod
    def gaussian(cls, rate, mean, sd):
        return cls(
            float(rate),
            "gaussian",
            mean=tuple(np.atleast_1d(mean).astype(float)),
            sd=tuple(np.atleast_1d(sd).astype(float)),
        )

    @property
    def dim(self):
        return len(self.z) if self.kind == "fixed" else len(self.mean)

    def first_moment(self):
        return np.array(self.z if self.kind == "fixed" else self.mean)

    def second_moment(self):
        if self.kind == "fixed":
            z = np.array(self.z)
            return np.outer(z, z)
        m = np.array(self.mean)
        return np.diag(np.square(self.sd)) + np.outer(m, m)


@dataclass(frozen=True)
class LevyCharacteristics:
    dim: int
    drift: np.ndarray
    gauss: np.ndarray
    jumps: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "drift", np.asarray(self.drift, dtype=float).reshape(self.dim))
        object.__setattr__(self, "gauss", np.asarray(self.gauss, dtype=float).reshape(self.dim, self.dim))
        object.__setattr__(self, "jumps", tuple(self.jumps))
        for j in self.jumps:
            if j.dim != self.dim:
                raise ValidationError("jump dimension does not match noise dimension")
        validate_characteristics(self)

    @classmethod
    def brownian(cls, dim=1, scale=1.0):
        return cls(dim, np.zeros(dim), scale * np.eye(dim))

    @property
    def is_brownian(self):
        return not any(j.rate > 0 for j in self.jumps)


def validate_characteristics(chars):
    """Raise unless the Gaussian part is non-degenerate and all rates are >= 0."""
    g = np.asarray(chars.gauss, dtype=float)
    p = g.shape[0]
    norm = np.linalg.norm(g, 2)
    if not abs(np.linalg.det(g)) > 1e-12 * norm**p:
        raise DegenerateGaussPart("Gaussian matrix of the noise must have non-zero determinant")
    for j in chars.jumps:
        if j.rate < 0:
            raise NegativeRate(f"jump rate must be >= 0, got {j.rate}")


def _gaussian_truncated_flux(j, eta):
    """``E[z 1{eta < |z| <= 1}]`` for one gaussian jump law."""
    mean = np.array(j.mean)
    sd = np.array(j.sd)
    p = mean.size
    opts = dict(epsabs=1e-12, epsrel=1e-12, limit=200)
    if p == 1:
        m, s = mean[0], sd[0]

        def f(z):
            return z * math.exp(-0.5 * ((z - m) / s) ** 2) / (s * math.sqrt(2 * math.pi))

        a, e1 = integrate.quad(f, -1.0, -eta, **opts)
        b, e2 = integrate.quad(f, eta, 1.0, **opts)
        if e1 + e2 > 1e-10:
            raise QuadratureFailure(f"jump-flux quadrature error {e1 + e2:.2e}")
        return np.array([a + b])
    if p == 2:
        norm = 1.0 / (2 * math.pi * sd[0] * sd[1])

        def dens(r, phi):
            x, y = r * math.cos(phi), r * math.sin(phi)
            return norm * math.exp(-0.5 * (((x - mean[0]) / sd[0]) ** 2 + ((y - mean[1]) / sd[1]) ** 2))

        out = []
        for comp in (math.cos, math.sin):
            val, err = integrate.dblquad(
                lambda r, phi: r * comp(phi) * dens(r, phi) * r,
                0.0, 2 * math.pi, eta, 1.0, epsabs=1e-11, epsrel=1e-10,
            )
            if err > 1e-10:
                raise QuadratureFailure(f"jump-flux quadrature error {err:.2e}")
            out.append(val)
        return np.array(out)
    raise QuadratureFailure("truncated jump flux is only implemented for dim <= 2")


def effective_drift(chars, eta):
    """Drift after moving jumps with ``eta < |z| <= 1`` out of the compensator."""
    if not eta > 0:
        raise ValidationError("truncation level eta must be > 0")
    out = chars.drift.copy()
    for j in chars.jumps:
        if j.rate == 0:
            continue
        if j.kind == "fixed":
            z = np.array(j.z)
            r = np.linalg.norm(z)
            if eta < r <= 1.0:
                out -= j.rate * z
        else:
            if eta >= 1.0:
                continue
            out -= j.rate * _gaussian_truncated_flux(j, eta)
    return out


def small_jump_l2_bound(chars, eta):
    """``int_{|z|<=eta} |z|^2 nu(dz)``, the variance of the omitted small-jump martingale."""
    total = 0.0
    for j in chars.jumps:
        if j.kind == "fixed":
            z = np.array(j.z)
            if np.linalg.norm(z) <= eta:
                total += j.rate * float(z @ z)
        elif len(j.mean) == 1:
            m, s = j.mean[0], j.sd[0]
            val, _ = integrate.quad(
                lambda z: z * z * math.exp(-0.5 * ((z - m) / s) ** 2) / (s * math.sqrt(2 * math.pi)),
                -eta, eta,
            )
            total += j.rate * val
        else:
            raise QuadratureFailure("small-jump bound only implemented for dim 1 gaussian jumps")
    return total


def increment_moments(chars, dt):
    """Exact mean vector and covariance matrix of ``omega(t + dt) - omega(t)``."""
    mean = chars.drift.copy()
    cov = chars.gauss @ chars.gauss.T
    for j in chars.jumps:
        mean = mean + j.rate * j.first_moment()
        cov = cov + j.rate * j.second_moment()
    return mean * dt, cov * dt


@dataclass(frozen=True)
class IncrementStream:
    grid: np.ndarray
    increments: np.ndarray

    def path(self):
        """Cumulative noise values on the grid, starting at zero."""
        p = self.increments.shape[1]
        return np.vstack([np.zeros((1, p)), np.cumsum(self.increments, axis=0)])

    def to_csv(self, path):
        p = self.increments.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"dw_{i + 1}" for i in range(p)])
            for t, row in zip(self.grid[1:], self.increments):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def draw_increments(chars, dts, gen, n_paths=None):
    """Increments over intervals ``dts`` using generator ``gen``.

    Returns shape ``(len(dts), p)`` or ``(n_paths, len(dts), p)``.  Draw
    order: Gaussian normals, then per jump component its Poisson counts
    followed by its size normals.
    """
    dts = np.asarray(dts, dtype=float)
    p = chars.dim
    shape = (len(dts),) if n_paths is None else (n_paths, len(dts))
    bshape = dts[:, None] if n_paths is None else dts[None, :, None]
    z = gen.standard_normal(shape + (p,))
    out = bshape * chars.drift + np.sqrt(bshape) * (z @ chars.gauss.T)
    for j in chars.jumps:
        if j.rate == 0:
            continue
        counts = gen.poisson(j.rate * dts, size=shape).astype(float)[..., None]
        if j.kind == "fixed":
            out += counts * np.array(j.z)
        else:
            zz = gen.standard_normal(shape + (p,))
            out += counts * np.array(j.mean) + np.sqrt(counts) * np.array(j.sd) * zz
    return out


def sample_increments(chars, grid, seed):
    """Sample one noise path on ``grid``; deterministic in ``seed``."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise EmptyGrid("sampling grid needs at least two points")
    if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise ValidationError("grid must start at 0 and be strictly increasing")
    gen = rng(derive_seed(seed, "noise"))
    return IncrementStream(grid, draw_increments(chars, np.diff(grid), gen))


@dataclass(frozen=True)
class TubeEstimate:
    """Probability that the noise stays in an eps-tube around a path.

    ``probability`` is the discrete-monitoring estimate extrapolated in
    sqrt(step) (``2 p(h) - p(4h)`` on the same paths); ``raw_probability``
    is the plain grid frequency at step ``h``, which overestimates the
    true value because crossings between grid points are missed.
    """

    probability: float
    stderr: float
    n_samples: int
    epsilon: float
    raw_probability: float = float("nan")
    raw_stderr: float = float("nan")
    step: float = float("nan")


def tube_step(epsilon, horizon):
    return min(1e-3 * horizon, epsilon**2 / 10.0) / 4.0


def reflection_series(epsilon, t, terms=50):
    """``P[sup_{s<=t} |B_s| < epsilon]`` for standard 1-D Brownian motion."""
    k = np.arange(terms)
    a = (2 * k + 1) * math.pi / (2 * epsilon)
    return float(4 / math.pi * np.sum((-1.0) ** k / (2 * k + 1) * np.exp(-(a**2) * t / 2)))


def tube_probability(chars, phi, epsilon, horizon, n_samples, seed, batch=2048, chunk=1024):
    """Monte-Carlo estimate of ``P[sup_s |phi_s - phi_0 - (omega_s - omega_0)| < epsilon]``.

    ``phi`` is any object with ``values_at(times)`` returning ``(len, p)`` or
    ``(len,)`` arrays (a :class:`~slidingdisk.controls.ControlPath` works).
    Paths are drawn on a uniform grid with step at most
    ``min(1e-3 t, eps^2/10) / 4``; every fourth grid point forms the coarse
    grid used for the sqrt(step) extrapolation.
    """
    if n_samples < 100:
        raise ValidationError("tube_probability needs n_samples >= 100")
    if not epsilon > 0 or not horizon > 0:
        raise ValidationError("epsilon and horizon must be positive")
    coarse_every = 4
    n_coarse = int(math.ceil(horizon / (4 * tube_step(epsilon, horizon))))
    n_steps = coarse_every * n_coarse
    h = horizon / n_steps
    times = np.linspace(0.0, horizon, n_steps + 1)
    pv = np.asarray(phi.values_at(times), dtype=float).reshape(n_steps + 1, -1)
    if pv.shape[1] == 1 and chars.dim > 1:
        pv = np.repeat(pv, chars.dim, axis=1)
    phi_incs = np.ascontiguousarray(np.diff(pv - pv[0], axis=0))
    fine = np.zeros(n_samples, dtype=bool)
    coarse = np.zeros(n_samples, dtype=bool)
    dts = np.full(chunk, h)
    for b0 in range(0, n_samples, batch):
        nb = min(batch, n_samples - b0)
        gen = rng(derive_seed(seed, "tube", b0 // batch))
        dev = np.zeros((nb, chars.dim))
        af = np.ones(nb, dtype=bool)
        ac = np.ones(nb, dtype=bool)
        idx = np.arange(nb)
        for s0 in range(0, n_steps, chunk):
            m = min(chunk, n_steps - s0)
            # draws cover the whole batch so the stream does not depend on exits
            incs = draw_increments(chars, dts[:m], gen, n_paths=nb)
            live = idx[ac]
            if live.size == 0:
                continue
            sub_dev = np.ascontiguousarray(dev[live])
            sub_f = af[live].copy()
            sub_c = ac[live].copy()
            kernels.tube_chunk(
                np.ascontiguousarray(incs[live]), phi_incs[s0 : s0 + m], sub_dev,
                sub_f, sub_c, s0, coarse_every, float(epsilon),
            )
            dev[live] = sub_dev
            af[live] = sub_f
            ac[live] = sub_c
        fine[b0 : b0 + nb] = af
        coarse[b0 : b0 + nb] = ac
    n = n_samples
    raw = fine.mean()
    y = 2.0 * fine - coarse
    est = float(np.clip(y.mean(), 0.0, 1.0))
    se = float(y.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return TubeEstimate(
        probability=est,
        stderr=se,
        n_samples=n,
        epsilon=float(epsilon),
        raw_probability=float(raw),
        raw_stderr=float(math.sqrt(raw * (1 - raw) / n)),
        step=h,
    )
