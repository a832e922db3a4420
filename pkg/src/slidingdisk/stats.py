"""Ensemble statistics: mean-squared displacement, power-law fits,
time averages and marginal goodness-of-fit tests."""
from dataclasses import dataclass, field
import csv
import json
import math
import warnings

import numpy as np
from scipy import integrate, stats as sps

from .disk import THETA_PERIOD, gibbs_observable_mean, gibbs_sample
from .errors import DegenerateWindow, SparseBins, ValidationError
from .integrate import SchemeSpec, ensemble_seeds, n_steps_for, run_ensemble
from .seeds import derive_seed

OBSERVABLES = ("x", "theta", "x_plus_theta", "casimir_pos")


def observable_coefficients(name, sigma):
    """Weights ``(a, b)`` of the linear observable ``a x + b theta``."""
    if isinstance(name, (tuple, list)):
        return float(name[0]), float(name[1])
    table = {
        "x": (1.0, 0.0),
        "theta": (0.0, 1.0),
        "x_plus_theta": (1.0, 1.0),
        "casimir_pos": (-1.0, float(sigma)),
    }
    try:
        return table[name]
    except KeyError:
        raise ValidationError(f"unknown observable {name!r}") from None


@dataclass(frozen=True)
class EnsembleSpec:
    n_init: int = 64
    n_noise: int = 32
    init: str = "gibbs"
    init_states: np.ndarray = None
    observable: object = "x"
    T: float = 200.0
    record_dt: float = 1.0

    def __post_init__(self):
        if self.n_init < 2 or self.n_noise < 2:
            raise ValidationError("n_init and n_noise must both be >= 2")
        if self.init not in ("gibbs", "rest", "explicit"):
            raise ValidationError(f"unknown init {self.init!r}")
        if self.init == "explicit":
            if self.init_states is None or len(self.init_states) != self.n_init:
                raise ValidationError("explicit init needs n_init states")

    def record_times(self):
        n = int(round(self.T / self.record_dt))
        return self.record_dt * np.arange(1, n + 1)


@dataclass
class MsdSeries:
    observable: str
    times: np.ndarray
    msd: np.ndarray
    stderr: np.ndarray
    n_init: int
    n_noise: int

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["observable", "t", "msd", "stderr", "n_init", "n_noise"])
            for t, m, s in zip(self.times, self.msd, self.stderr):
                w.writerow([self.observable, repr(float(t)), repr(float(m)), repr(float(s)), self.n_init, self.n_noise])


def initial_states(spec, p, seed):
    if spec.init == "gibbs":
        return gibbs_sample(p, spec.n_init, derive_seed(seed, "init"))
    if spec.init == "rest":
        base = np.zeros(4) if spec.init_states is None else np.asarray(spec.init_states, dtype=float).reshape(-1)[:4]
        base = base.copy()
        base[2:] = 0.0
        return np.tile(base, (spec.n_init, 1))
    return np.asarray(spec.init_states, dtype=float).reshape(spec.n_init, 4)


def ensemble_displacements(spec, p, scheme, seed, threads=None):
    """Observable displacement ``O_t - O_0`` with shape ``(n_init, n_noise, n_rec)``."""
    n_steps = n_steps_for(spec.T, scheme.h)
    stride = n_steps_for(spec.record_dt, scheme.h)
    if n_steps % stride:
        raise ValidationError("record_dt must divide T")
    x0 = initial_states(spec, p, seed)
    starts = np.repeat(x0, spec.n_noise, axis=0)
    seeds = ensemble_seeds(derive_seed(seed, "noise"), "member", spec.n_init, spec.n_noise)
    rec, _ = run_ensemble(starts, p, scheme, n_steps, seeds, stride, threads=threads)
    a, b = observable_coefficients(spec.observable, p.sigma_ratio)
    obs = a * (rec[:, :, 0] - starts[:, None, 0]) + b * (rec[:, :, 1] - starts[:, None, 1])
    return obs.reshape(spec.n_init, spec.n_noise, -1)


def msd_from_displacements(d, centering="two_level"):
    """MSD and standard error from ``(n_init, n_noise, n_rec)`` displacements.

    ``two_level``: unbiased variance across noise replicas at each initial
    condition, then averaged over initial conditions.  ``single_level``:
    variance around the pooled mean.
    """
    n_init, n_noise, _ = d.shape
    if centering == "two_level":
        per_init = d.var(axis=1, ddof=1)
        return per_init.mean(axis=0), per_init.std(axis=0, ddof=1) / math.sqrt(n_init)
    if centering == "single_level":
        flat = d.reshape(n_init * n_noise, -1)
        sq = (flat - flat.mean(axis=0)) ** 2
        return flat.var(axis=0, ddof=1), sq.std(axis=0, ddof=1) / math.sqrt(flat.shape[0])
    raise ValidationError(f"unknown centering {centering!r}")


def msd_two_level(spec, p, scheme=None, seed=0, centering="two_level", threads=None):
    scheme = scheme or SchemeSpec()
    d = ensemble_displacements(spec, p, scheme, seed, threads)
    msd, se = msd_from_displacements(d, centering)
    name = spec.observable if isinstance(spec.observable, str) else "custom"
    return MsdSeries(name, spec.record_times(), msd, se, spec.n_init, spec.n_noise)


@dataclass
class FitResult:
    exponent: float
    prefactor: float
    window: tuple
    residual: float

    def to_json(self):
        return json.dumps(
            {"exponent": self.exponent, "prefactor": self.prefactor, "window": list(self.window), "residual": self.residual},
            sort_keys=True,
        )


def power_law_fit(series, window):
    """Least-squares line through ``(log t, log msd)`` for ``t`` in ``window``."""
    t0, t1 = window
    times = np.asarray(series.times if hasattr(series, "times") else series[0], dtype=float)
    msd = np.asarray(series.msd if hasattr(series, "msd") else series[1], dtype=float)
    sel = (times >= t0) & (times <= t1)
    if sel.sum() < 5:
        raise DegenerateWindow(f"need >= 5 points in [{t0}, {t1}], got {int(sel.sum())}")
    if np.any(msd[sel] <= 0):
        raise DegenerateWindow("msd must be positive throughout the fit window")
    lt, lm = np.log(times[sel]), np.log(msd[sel])
    A = np.column_stack([lt, np.ones_like(lt)])
    coef, *_ = np.linalg.lstsq(A, lm, rcond=None)
    resid = float(np.linalg.norm(A @ coef - lm))
    return FitResult(float(coef[0]), float(math.exp(coef[1])), (float(t0), float(t1)), resid)


def ballistic_band_ratio(series, p, t):
    """``msd(t) / t^2`` relative to ``(1 + sigma)/beta``; warns outside ``[1/4, 4]``."""
    i = int(np.argmin(np.abs(np.asarray(series.times) - t)))
    ratio = series.msd[i] / series.times[i] ** 2 / ((1 + p.sigma_ratio) / p.beta())
    if not 0.25 <= ratio <= 4.0:
        warnings.warn(f"msd/t^2 at t={t} is {ratio:.3g} x (1+sigma)/beta, outside [1/4, 4]", RuntimeWarning)
    return float(ratio)


def integrated_autocorr_time(y, c=5.0):
    """Integrated autocorrelation time in samples, ``1 + 2 sum rho_k``.

    Window: smallest ``M`` with ``M >= c * tau(M)``.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    f = np.fft.rfft(y - y.mean(), n=2 * n)
    acf = np.fft.irfft(f * np.conjugate(f))[:n]
    if acf[0] == 0:
        return 1.0
    rho = acf / acf[0]
    taus = 2.0 * np.cumsum(rho) - 1.0
    ms = np.arange(n)
    ok = ms >= c * taus
    m = int(np.argmax(ok)) if ok.any() else n - 1
    return float(max(taus[m], 1.0))


@dataclass
class BirkhoffResult:
    times: np.ndarray
    running_mean: np.ndarray
    mean: float
    tau: float
    ess: float
    stderr: float


def birkhoff_average(traj, g):
    """Running time average of ``g(states)`` along a trajectory.

    ``tau`` is the integrated autocorrelation time in time units and
    ``ess = duration / tau``.
    """
    vals = np.asarray(g(traj.states), dtype=float)
    if vals.ndim == 0:
        vals = np.full(traj.states.shape[0], float(vals))
    dt = float(traj.times[1] - traj.times[0])
    running = np.cumsum(vals) / np.arange(1, vals.size + 1)
    tau_samples = integrated_autocorr_time(vals)
    duration = float(traj.times[-1] - traj.times[0])
    tau = tau_samples * dt
    var = float(vals.var(ddof=1)) if vals.size > 1 else 0.0
    se = math.sqrt(var * tau_samples / vals.size)
    return BirkhoffResult(traj.times, running, float(running[-1]), tau, duration / tau, se)


@dataclass(frozen=True)
class MarginalSpec:
    """Analytic one-dimensional marginal: ``gaussian`` (variance) or ``position`` (params)."""

    kind: str
    variance: float = None
    params: object = None
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def velocity(cls, p):
        return cls("gaussian", variance=1.0 / p.beta())

    @classmethod
    def spin(cls, p):
        return cls("gaussian", variance=1.0 / (p.beta() * p.sigma_ratio))

    @classmethod
    def position(cls, p):
        return cls("position", params=p)

    @classmethod
    def uniform_angle(cls):
        return cls("uniform", variance=THETA_PERIOD)

    def reduce(self, samples):
        s = np.asarray(samples, dtype=float)
        if self.kind == "position":
            return np.mod(s, self.params.potential.period)
        if self.kind == "uniform":
            return np.mod(s, self.variance)
        return s

    def bin_edges(self, k):
        q = np.linspace(0.0, 1.0, k + 1)
        if self.kind == "gaussian":
            e = sps.norm.ppf(q, scale=math.sqrt(self.variance))
            return e
        if self.kind == "uniform":
            return q * self.variance
        return self._position_quantiles(q)

    def _position_quantiles(self, q):
        p = self.params
        L = p.potential.period
        beta = p.beta()
        grid = np.linspace(0.0, L, 20001)
        w = np.exp(-beta * (p.potential.value(grid) - p.potential.min_value))
        cdf = integrate.cumulative_simpson(w, x=grid, initial=0.0)
        cdf /= cdf[-1]
        edges = np.interp(q, cdf, grid)
        edges[0], edges[-1] = 0.0, L
        return edges


@dataclass
class MarginalTestResult:
    statistic: float
    dof: int
    p_value: float
    passed: bool


def marginal_test(samples, spec, level=0.01, n_bins=None):
    """Pearson chi-square test against an analytic marginal, equiprobable bins."""
    x = spec.reduce(samples)
    n = x.size
    if n < 1000:
        raise SparseBins(f"need >= 1000 samples, got {n}")
    k = n_bins or int(min(50, max(10, n // 200)))
    if k < 10 or n / k < 5:
        raise SparseBins(f"{k} bins with expected count {n / k:.1f}")
    edges = spec.bin_edges(k)
    inner = edges[1:-1]
    counts = np.bincount(np.searchsorted(inner, x, side="right"), minlength=k)
    expected = n / k
    stat = float(np.sum((counts - expected) ** 2) / expected)
    pval = float(sps.chi2.sf(stat, k - 1))
    return MarginalTestResult(stat, k - 1, pval, pval >= level)


@dataclass
class CheckRow:
    check: str
    estimate: float
    stderr: float
    reference: float
    statistic: float
    passed: bool


def gibbs_check(p, n, scheme, T, seed, threads=None):
    """Start from the Gibbs law, integrate to ``T`` and test the marginals."""
    x0 = gibbs_sample(p, n, derive_seed(seed, "gibbs-init"))
    seeds = ensemble_seeds(derive_seed(seed, "gibbs-noise"), "member", n, 1)
    _, xt = run_ensemble(x0, p, scheme, n_steps_for(T, scheme.h), seeds, threads=threads)
    beta = p.beta()
    rows = []

    def mean_row(name, vals, ref):
        m = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(vals.size))
        z = (m - ref) / se if se > 0 else 0.0
        rows.append(CheckRow(name, m, se, ref, z, abs(z) <= 3.0))

    mean_row("E[v^2]", xt[:, 2] ** 2, 1.0 / beta)
    mean_row("E[sigma omega^2]", p.sigma_ratio * xt[:, 3] ** 2, 1.0 / beta)
    L = p.potential.period
    g = lambda x: np.cos(2 * np.pi * x / L)  # noqa: E731
    mean_row("E[cos 2pi x/L]", g(xt[:, 0]), gibbs_observable_mean(p, lambda x: math.cos(2 * math.pi * x / L)))
    for name, col, spec in (
        ("marginal v", 2, MarginalSpec.velocity(p)),
        ("marginal omega", 3, MarginalSpec.spin(p)),
        ("marginal x", 0, MarginalSpec.position(p)),
    ):
        r = marginal_test(xt[:, col], spec)
        rows.append(CheckRow(name, r.p_value, float("nan"), 0.01, r.statistic, r.passed))
    return rows


def write_check_rows(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["check", "estimate", "stderr", "reference", "statistic", "pass"])
        for r in rows:
            w.writerow([r.check, repr(r.estimate), repr(r.stderr), repr(r.reference), repr(r.statistic), int(r.passed)])
