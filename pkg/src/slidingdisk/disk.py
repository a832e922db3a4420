"""Sliding-disk mechanical model.

Phase point ``(x, theta, v, omega)``: translation, rotation angle, and
their velocities.  The dimensionless Lagrangian is
``v**2/2 + sigma*omega**2/2 - U(x)`` and friction plus white noise act
only on the combination ``v + omega``; the orthogonal combination
``-v + sigma*omega`` (the casimir) is moved by the potential force alone.

Positions are kept unwrapped.  Everything that needs a normalisable
density (Gibbs log-density, sampler, quadrature) reduces ``x`` modulo the
potential period and ``theta`` modulo 1.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate

from .errors import NonpositiveSigma, QuadratureFailure, ValidationError, ZeroAlpha

TWO_PI = 2.0 * math.pi

# integer tags understood by the kernels
POTENTIAL_CONSTANT = 0
POTENTIAL_COSINE = 1

THETA_PERIOD = 1.0


@dataclass(frozen=True)
class Potential:
    """Periodic potential ``U``.

    ``kind="cosine"``: ``U(x) = amplitude * cos(2 pi x / period)``.
    ``kind="constant"``: ``U(x) = level``.
    """

    kind: str = "cosine"
    amplitude: float = 1.0
    period: float = 1.0
    level: float = 0.0

    def __post_init__(self):
        if self.kind not in ("cosine", "constant"):
            raise ValidationError(f"unknown potential kind {self.kind!r}")
        if not self.period > 0:
            raise ValidationError("potential period must be positive")

    @classmethod
    def cosine(cls, amplitude=1.0, period=1.0):
        return cls("cosine", float(amplitude), float(period))

    @classmethod
    def constant(cls, level=0.0):
        return cls("constant", 0.0, 1.0, float(level))

    @property
    def is_constant(self):
        return self.kind == "constant" or self.amplitude == 0.0

    @property
    def kernel_args(self):
        """``(kind_code, amplitude, wavenumber)`` for the compiled kernels."""
        if self.is_constant:
            return POTENTIAL_CONSTANT, 0.0, 0.0
        return POTENTIAL_COSINE, float(self.amplitude), TWO_PI / self.period

    def value(self, x):
        if self.kind == "constant":
            return np.full_like(np.asarray(x, dtype=float), self.level)[()]
        return self.amplitude * np.cos(TWO_PI * np.asarray(x, dtype=float) / self.period)

    def dU(self, x):
        if self.is_constant:
            return np.zeros_like(np.asarray(x, dtype=float))[()]
        k = TWO_PI / self.period
        return -self.amplitude * k * np.sin(k * np.asarray(x, dtype=float))

    def d2U(self, x):
        if self.is_constant:
            return np.zeros_like(np.asarray(x, dtype=float))[()]
        k = TWO_PI / self.period
        return -self.amplitude * k * k * np.cos(k * np.asarray(x, dtype=float))

    @property
    def sup_dU(self):
        if self.is_constant:
            return 0.0
        return TWO_PI * abs(self.amplitude) / self.period

    @property
    def min_value(self):
        if self.kind == "constant":
            return self.level
        return -abs(self.amplitude)

    def curvature_point(self):
        """Position in ``[0, period)`` where ``d2U`` is largest."""
        if self.is_constant:
            return 0.0
        return 0.5 * self.period if self.amplitude > 0 else 0.0


@dataclass(frozen=True)
class DiskParams:
    sigma_ratio: float = 1.0
    c: float = 1.0
    alpha: float = math.sqrt(2.0)
    potential: Potential = Potential()

    def __post_init__(self):
        if not self.sigma_ratio > 0:
            raise NonpositiveSigma(f"sigma_ratio must be > 0, got {self.sigma_ratio}")
        if self.c < 0:
            raise ValidationError(f"friction c must be >= 0, got {self.c}")
        if self.alpha < 0:
            raise ValidationError(f"noise amplitude alpha must be >= 0, got {self.alpha}")

    def beta(self):
        """Inverse temperature ``2c / alpha**2``."""
        if self.alpha == 0:
            raise ZeroAlpha("beta is undefined for alpha = 0")
        return 2.0 * self.c / self.alpha**2

    def gamma_fric(self):
        return (self.sigma_ratio + 1.0) / self.sigma_ratio

    @property
    def kernel_args(self):
        kind, amp, k = self.potential.kernel_args
        return (float(self.sigma_ratio), float(self.c), float(self.alpha), kind, amp, k)


@dataclass(frozen=True)
class State:
    x: float = 0.0
    theta: float = 0.0
    v: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(float(f)) for f in self.as_array()):
            raise ValidationError("state components must be finite")

    def as_array(self):
        return np.array([self.x, self.theta, self.v, self.omega], dtype=float)

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass(frozen=True)
class YState:
    """``Y1 = -x + sigma*theta``, ``Y2 = x + theta`` and their velocities."""

    y1: float = 0.0
    y2: float = 0.0
    y1dot: float = 0.0
    y2dot: float = 0.0

    def as_array(self):
        return np.array([self.y1, self.y2, self.y1dot, self.y2dot], dtype=float)

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


def _check_sigma(sigma):
    if not sigma > 0:
        raise NonpositiveSigma(f"sigma_ratio must be > 0, got {sigma}")


def energy(s, p):
    return 0.5 * s.v**2 + 0.5 * p.sigma_ratio * s.omega**2 + float(p.potential.value(s.x))


def friction_matrices(sigma_ratio):
    """Friction matrix ``C`` and its square root ``sigma/sqrt(sigma^2+1) * C``."""
    _check_sigma(sigma_ratio)
    s = float(sigma_ratio)
    C = np.array([[1.0, 1.0 / s], [1.0 / s, 1.0 / s**2]])
    return C, (s / math.sqrt(s * s + 1.0)) * C


def drift(s, p):
    sig = p.sigma_ratio
    # C @ (v, sigma*omega) == u * (v + omega) with u = (1, 1/sigma)
    w = s.v + s.omega
    return np.array(
        [
            s.v,
            s.omega,
            -float(p.potential.dU(s.x)) - p.c * w,
            -p.c * w / sig,
        ]
    )


def to_y(s, sigma):
    return YState(
        -s.x + sigma * s.theta,
        s.x + s.theta,
        -s.v + sigma * s.omega,
        s.v + s.omega,
    )


def from_y(y, sigma):
    d = sigma + 1.0
    return State(
        (sigma * y.y2 - y.y1) / d,
        (y.y1 + y.y2) / d,
        (sigma * y.y2dot - y.y1dot) / d,
        (y.y1dot + y.y2dot) / d,
    )


def to_y_array(states, sigma):
    """Vectorised :func:`to_y` on an ``(..., 4)`` array."""
    a = np.asarray(states, dtype=float)
    x, th, v, om = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    return np.stack([-x + sigma * th, x + th, -v + sigma * om, v + om], axis=-1)


def from_y_array(ys, sigma):
    a = np.asarray(ys, dtype=float)
    y1, y2, y1d, y2d = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    d = sigma + 1.0
    return np.stack(
        [(sigma * y2 - y1) / d, (y1 + y2) / d, (sigma * y2d - y1d) / d, (y1d + y2d) / d],
        axis=-1,
    )


def casimir(s, sigma):
    return -s.v + sigma * s.omega


def gibbs_log_density(s, p):
    """Unnormalised log Gibbs density ``-beta * E`` on the reduced cell."""
    if p.alpha == 0:
        raise ZeroAlpha("Gibbs density needs alpha > 0")
    x = math.fmod(s.x, p.potential.period)
    if x < 0:
        x += p.potential.period
    reduced = State(x, s.theta % THETA_PERIOD, s.v, s.omega)
    return -p.beta() * energy(reduced, p)


def _require_temperature(p):
    if p.alpha == 0:
        raise ZeroAlpha("Gibbs measure needs alpha > 0")
    if p.c <= 0:
        raise ValidationError("Gibbs measure needs c > 0 (beta = 0 is not normalisable)")


def gibbs_sample(p, n, seed):
    """Draw ``n`` states from the Gibbs measure as an ``(n, 4)`` array.

    ``x`` is drawn by rejection from ``exp(-beta U)`` on one period with the
    envelope ``exp(-beta min U)``; ``theta`` is uniform on ``[0, 1)``.
    """
    _require_temperature(p)
    rng = np.random.default_rng(seed)
    beta = p.beta()
    L = p.potential.period
    out = np.empty((n, 4))
    v = rng.standard_normal(n) / math.sqrt(beta)
    om = rng.standard_normal(n) / math.sqrt(beta * p.sigma_ratio)
    th = rng.uniform(0.0, THETA_PERIOD, n)
    if p.potential.is_constant:
        x = rng.uniform(0.0, L, n)
    else:
        x = np.empty(n)
        filled = 0
        umin = p.potential.min_value
        while filled < n:
            m = max(64, 2 * (n - filled))
            cand = rng.uniform(0.0, L, m)
            acc = rng.uniform(0.0, 1.0, m) < np.exp(-beta * (p.potential.value(cand) - umin))
            take = cand[acc][: n - filled]
            x[filled : filled + take.size] = take
            filled += take.size
    out[:, 0] = x
    out[:, 1] = th
    out[:, 2] = v
    out[:, 3] = om
    return out


def gibbs_observable_mean(p, g):
    """``int g exp(-beta U) dx / int exp(-beta U) dx`` over one period."""
    _require_temperature(p)
    beta = p.beta()
    L = p.potential.period
    umin = p.potential.min_value

    def w(x):
        return math.exp(-beta * (float(p.potential.value(x)) - umin))

    num, e1 = integrate.quad(lambda x: g(x) * w(x), 0.0, L, epsabs=1e-12, epsrel=1e-12, limit=200)
    den, e2 = integrate.quad(w, 0.0, L, epsabs=1e-12, epsrel=1e-12, limit=200)
    if e1 > 1e-10 or e2 > 1e-10 or den <= 0:
        raise QuadratureFailure(f"quadrature error estimates {e1:.2e}, {e2:.2e}")
    return num / den


def reduced_coefficients(p):
    """Coefficients of the reduced ``(Y1, Y2)`` system.

    Returns ``(gamma_fric, y2dot_noise_row, abar)``.  ``y2dot_noise_row``
    multiplies ``(dB_v, dB_omega)`` in the ``d(v + omega)`` equation; its
    Euclidean norm ``alpha * gamma_fric`` is the intensity of the single
    scalar Brownian motion driving ``Y2dot``.  ``abar`` is
    ``alpha (sigma+1) / sqrt(sigma^2+1)``; the reduced equation as usually quoted
    uses ``abar * sqrt(2)``, which agrees with the norm only at
    ``sigma = 1``.
    """
    s = p.sigma_ratio
    gamma = (s + 1.0) / s
    abar = p.alpha * (s + 1.0) / math.sqrt(s * s + 1.0)
    row = abar * np.array([1.0, 1.0 / s])
    return gamma, row, abar


def kinetic_form_y(sigma):
    """Matrix ``K`` with ``v^2/2 + sigma omega^2/2 = ydot^T K ydot``."""
    d = sigma + 1.0
    # v = (sigma*y2d - y1d)/d, omega = (y1d + y2d)/d
    A = np.array([[-1.0 / d, sigma / d], [1.0 / d, 1.0 / d]])
    M = np.diag([0.5, 0.5 * sigma])
    return A.T @ M @ A
