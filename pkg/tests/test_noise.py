import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from slidingdisk.controls import ControlPath
from slidingdisk.errors import DegenerateGaussPart, EmptyGrid, NegativeRate, ValidationError
from slidingdisk.noise import (
    JumpComponent,
    LevyCharacteristics,
    effective_drift,
    increment_moments,
    reflection_series,
    sample_increments,
    small_jump_l2_bound,
    tube_probability,
)


def brownian1():
    return LevyCharacteristics.brownian(1)


def with_jumps(*jumps, dim=1, drift=None, gauss=None):
    drift = np.zeros(dim) if drift is None else drift
    gauss = np.eye(dim) if gauss is None else gauss
    return LevyCharacteristics(dim, drift, gauss, jumps)


# validation ---------------------------------------------------------------

def test_identity_gauss_is_valid():
    assert brownian1().is_brownian


def test_zero_gauss_rejected():
    with pytest.raises(DegenerateGaussPart):
        LevyCharacteristics(1, [0.0], [[0.0]])


def test_negative_rate_rejected():
    with pytest.raises(NegativeRate):
        with_jumps(JumpComponent.fixed(-1.0, [0.1, 0.1]), dim=2)


def test_singular_2d_gauss_rejected():
    with pytest.raises(DegenerateGaussPart):
        LevyCharacteristics(2, [0, 0], [[1.0, 1.0], [1.0, 1.0]])


def test_gaussian_jump_needs_positive_sd():
    with pytest.raises(ValidationError):
        JumpComponent.gaussian(1.0, [0.0], [0.0])


# effective drift -------------------------------------------------------------

def test_effective_drift_no_jumps():
    chars = LevyCharacteristics(1, [0.7], [[1.0]])
    assert effective_drift(chars, 0.3) == pytest.approx([0.7], abs=0)


def test_effective_drift_fixed_jump_inside_band():
    chars = with_jumps(JumpComponent.fixed(1.0, [0.5]))
    assert effective_drift(chars, 0.2) == pytest.approx([-0.5], abs=1e-15)


def test_effective_drift_fixed_jump_above_one_excluded():
    chars = with_jumps(JumpComponent.fixed(3.0, [2.0]))
    assert effective_drift(chars, 0.2) == pytest.approx([0.0], abs=0)


def _gauss_flux(rate, m, s, eta):
    # int z N(z; m, s) dz over eta < |z| <= 1, closed form
    def seg(a, b):
        a_, b_ = (a - m) / s, (b - m) / s
        return m * (stats.norm.cdf(b_) - stats.norm.cdf(a_)) - s * (stats.norm.pdf(b_) - stats.norm.pdf(a_))

    return rate * (seg(eta, 1.0) + seg(-1.0, -eta))


@pytest.mark.parametrize("m,s,eta", [(0.0, 0.3, 0.1), (0.4, 0.2, 0.25), (-0.3, 0.5, 0.05)])
def test_effective_drift_gaussian_matches_closed_form(m, s, eta):
    chars = with_jumps(JumpComponent.gaussian(2.0, [m], [s]), drift=[0.1])
    assert effective_drift(chars, eta)[0] == pytest.approx(0.1 - _gauss_flux(2.0, m, s, eta), abs=1e-9)


def test_effective_drift_gaussian_2d_symmetric_zero():
    chars = with_jumps(JumpComponent.gaussian(1.5, [0.0, 0.0], [0.3, 0.3]), dim=2)
    assert np.allclose(effective_drift(chars, 0.1), 0.0, atol=1e-9)


@given(st.floats(1.01, 5.0), st.floats(0.0, 4.0))
def test_effective_drift_eta_one_large_jumps_unchanged(z, rate):
    chars = with_jumps(JumpComponent.fixed(rate, [z]), drift=[0.25])
    assert effective_drift(chars, 1.0)[0] == 0.25


def test_small_jump_bound_fixed():
    chars = with_jumps(JumpComponent.fixed(2.0, [0.1]))
    assert small_jump_l2_bound(chars, 0.5) == pytest.approx(2.0 * 0.01)


# moments -----------------------------------------------------------------

def test_moments_pure_brownian():
    mean, cov = increment_moments(LevyCharacteristics.brownian(2), 0.5)
    assert np.array_equal(mean, np.zeros(2))
    assert np.allclose(cov, 0.5 * np.eye(2), atol=0)


def test_moments_fixed_jump():
    mean, cov = increment_moments(with_jumps(JumpComponent.fixed(2.0, [1.0])), 1.0)
    assert mean == pytest.approx([2.0])
    assert cov[0, 0] == pytest.approx(3.0)


def test_moments_gaussian_jump():
    mean, cov = increment_moments(with_jumps(JumpComponent.gaussian(2.0, [0.0], [0.3])), 1.0)
    assert mean == pytest.approx([0.0])
    assert cov[0, 0] == pytest.approx(1.18)


@given(st.floats(0.01, 10.0), st.floats(0.0, 3.0), st.floats(-1.0, 1.0))
def test_moments_linear_in_dt(dt, rate, z):
    chars = with_jumps(JumpComponent.fixed(rate, [z]), drift=[0.3])
    m1, c1 = increment_moments(chars, 1.0)
    m, c = increment_moments(chars, dt)
    assert np.allclose(m, m1 * dt) and np.allclose(c, c1 * dt)


# sampling ---------------------------------------------------------------

def test_near_deterministic_drift():
    chars = LevyCharacteristics(1, [1.0], [[1e-9]])
    s = sample_increments(chars, [0.0, 1.0], seed=4)
    assert abs(s.increments[0, 0] - 1.0) < 1e-6


def test_sampling_deterministic_in_seed():
    chars = with_jumps(JumpComponent.gaussian(2.0, [0.0], [0.3]))
    grid = np.linspace(0, 1, 11)
    a = sample_increments(chars, grid, 17)
    b = sample_increments(chars, grid, 17)
    c = sample_increments(chars, grid, 18)
    assert np.array_equal(a.increments, b.increments)
    assert not np.array_equal(a.increments, c.increments)
    assert a.increments.shape == (10, 1)


def test_empty_grid_rejected():
    with pytest.raises(EmptyGrid):
        sample_increments(brownian1(), [0.0], 1)


def test_nonincreasing_grid_rejected():
    with pytest.raises(ValidationError):
        sample_increments(brownian1(), [0.0, 0.5, 0.5], 1)


def test_sample_moments_match_formula():
    chars = with_jumps(JumpComponent.gaussian(2.0, [0.0], [0.3]))
    n = 100_000
    inc = sample_increments(chars, np.arange(n + 1, dtype=float), 5).increments[:, 0]
    mean, cov = increment_moments(chars, 1.0)
    se_mean = math.sqrt(cov[0, 0] / n)
    assert abs(inc.mean() - mean[0]) < 3 * se_mean
    # var of the sample variance uses the fourth central moment
    m4 = np.mean((inc - inc.mean()) ** 4)
    se_var = math.sqrt((m4 - inc.var() ** 2) / n)
    assert abs(inc.var(ddof=1) - cov[0, 0]) < 3 * se_var


def test_increments_stationary_two_halves():
    chars = with_jumps(JumpComponent.fixed(1.0, [0.5]), drift=[0.2])
    inc = sample_increments(chars, np.linspace(0.0, 2.0, 20_001), 9).increments[:, 0]
    ks = stats.ks_2samp(inc[:10_000], inc[10_000:])
    assert ks.pvalue > 0.01


def test_csv_header(tmp_path):
    s = sample_increments(LevyCharacteristics.brownian(2), np.linspace(0, 1, 5), 1)
    path = tmp_path / "noise.csv"
    s.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,dw_1,dw_2"
    assert len(lines) == 5
    assert float(lines[-1].split(",")[0]) == 1.0


def test_path_starts_at_zero():
    s = sample_increments(brownian1(), np.linspace(0, 1, 5), 1)
    assert np.array_equal(s.path()[0], [0.0])
    assert np.allclose(s.path()[-1], s.increments.sum(axis=0))


# tube probabilities ----------------------------------------------------

def test_reflection_series_known_value():
    assert reflection_series(1.0, 1.0) == pytest.approx(0.370777, abs=1e-6)
    assert reflection_series(1.0, 1.0, terms=20) == pytest.approx(reflection_series(1.0, 1.0, terms=50), abs=1e-15)


def test_tube_noise_free_line():
    chars = LevyCharacteristics(1, [0.5], [[1e-9]])
    est = tube_probability(chars, ControlPath.line(1.0, 0.5), 0.1, 1.0, 200, 3)
    assert est.probability == 1.0


def test_tube_wide_epsilon_near_one():
    est = tube_probability(brownian1(), ControlPath.zero(1.0), 3.0, 1.0, 2000, 1)
    assert est.probability >= 0.99


def test_tube_matches_reflection_series():
    est = tube_probability(brownian1(), ControlPath.zero(1.0), 1.0, 1.0, 20_000, 11)
    assert abs(est.probability - reflection_series(1.0, 1.0)) < 3 * est.stderr
    # the plain grid frequency misses crossings and sits above the extrapolated value
    assert est.raw_probability >= est.probability


def test_tube_monotone_in_epsilon():
    probs = [
        tube_probability(brownian1(), ControlPath.zero(1.0), e, 1.0, 4000, 2).probability for e in (0.8, 1.0, 1.2)
    ]
    assert probs[0] <= probs[1] <= probs[2]


def test_tube_estimate_bounds():
    est = tube_probability(brownian1(), ControlPath.zero(1.0), 0.5, 1.0, 1000, 8)
    assert 0.0 <= est.probability <= 1.0
    assert est.probability - 3 * est.stderr >= -0.01 and est.probability + 3 * est.stderr <= 1.01


def test_tube_needs_samples():
    with pytest.raises(ValidationError):
        tube_probability(brownian1(), ControlPath.zero(1.0), 1.0, 1.0, 10, 1)
