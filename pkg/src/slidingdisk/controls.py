"""Deterministic input paths and bump functions."""
from dataclasses import dataclass
import json
import math

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class ControlPath:
    """Piecewise-linear path through ``values`` at uniform knots on ``[0, t_total]``.

    ``values`` may be ``(n_knots,)`` or ``(n_knots, p)``; ``values[0]`` must
    be zero.  ``gain`` is the scalar multiplying the path derivative in the
    controlled equations (``None`` means the model default).
    """

    t_total: float
    values: np.ndarray
    gain: float = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.shape[0] < 2:
            raise ValidationError("a control path needs at least two knots")
        if not np.all(np.isfinite(v)):
            raise ValidationError("control knot values must be finite")
        if np.any(v[0] != 0.0):
            raise ValidationError("control path must start at zero")
        if not self.t_total > 0:
            raise ValidationError("t_total must be positive")

    @classmethod
    def zero(cls, t_total, n_knots=2, gain=None):
        return cls(float(t_total), np.zeros(n_knots), gain)

    @classmethod
    def from_free_values(cls, t_total, free, gain=None):
        return cls(float(t_total), np.concatenate([[0.0], np.asarray(free, dtype=float)]), gain)

    @classmethod
    def line(cls, t_total, slope, gain=None):
        slope = np.atleast_1d(np.asarray(slope, dtype=float))
        return cls(float(t_total), np.vstack([np.zeros_like(slope), slope * t_total]), gain)

    @property
    def n_knots(self):
        return self.values.shape[0]

    @property
    def spacing(self):
        return self.t_total / (self.n_knots - 1)

    @property
    def knots(self):
        return np.linspace(0.0, self.t_total, self.n_knots)

    def slopes(self):
        return np.diff(self.values, axis=0) / self.spacing

    def values_at(self, times):
        t = np.clip(np.asarray(times, dtype=float), 0.0, self.t_total)
        if self.values.ndim == 1:
            return np.interp(t, self.knots, self.values)
        return np.stack([np.interp(t, self.knots, col) for col in self.values.T], axis=-1)

    def integral_at(self, times):
        """``int_0^t phi(s) ds`` (1-D paths only)."""
        t = np.clip(np.atleast_1d(np.asarray(times, dtype=float)), 0.0, self.t_total)
        v = self.values
        dt = self.spacing
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * dt)])
        q = np.minimum((t / dt).astype(int), self.n_knots - 2)
        tau = t - q * dt
        slope = (v[q + 1] - v[q]) / dt
        return cum[q] + v[q] * tau + 0.5 * slope * tau * tau

    def to_json(self):
        return json.dumps(
            {
                "t_total": self.t_total,
                "knots": self.knots.tolist(),
                "values": self.values.tolist(),
                "gain": self.gain,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(float(d["t_total"]), np.asarray(d["values"], dtype=float), d.get("gain"))


@dataclass(frozen=True)
class BumpBasis:
    """Four monomial bumps ``phi_i(s) = (s/t)**i``, ``i = 1..4``."""

    t: float
    powers: tuple = (1, 2, 3, 4)

    def values(self, s):
        s = np.asarray(s, dtype=float)
        return np.stack([(s / self.t) ** i for i in self.powers], axis=-1)

    def integrals(self, s):
        s = np.asarray(s, dtype=float)
        return np.stack([self.t * (s / self.t) ** (i + 1) / (i + 1) for i in self.powers], axis=-1)

    def gram_condition(self, n=100):
        grid = np.linspace(0.0, self.t, n)
        F = self.values(grid)
        return float(np.linalg.cond(F.T @ F))


def default_gain(p):
    """Default control gain, ``alpha (sigma+1) sqrt(2) / sqrt(sigma^2+1)``."""
    s = p.sigma_ratio
    return p.alpha * (s + 1.0) / math.sqrt(s * s + 1.0) * math.sqrt(2.0)
