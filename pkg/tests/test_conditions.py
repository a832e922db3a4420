import json
import math

import numpy as np
import pytest

from slidingdisk.conditions import (
    build_control,
    lambda_flow,
    lambda_jacobian,
    linearized_response,
    random_pairs,
    verify_control,
    zeta_point,
)
from slidingdisk.controls import BumpBasis, ControlPath, default_gain
from slidingdisk.disk import State, YState, to_y
from slidingdisk.errors import SynthesisFailure, ValidationError
from slidingdisk.integrate import simulate_controlled
from slidingdisk.seeds import derive_seed, rng


@pytest.fixture(scope="module")
def example_control():
    from slidingdisk.disk import DiskParams, Potential

    p = DiskParams(1.0, 0.1, 5.0, Potential.cosine())
    start = to_y(State(0.0, 0.0, 0.0, 0.0), 1.0)
    target = to_y(State(0.3, 2.0, 0.5, -0.2), 1.0)
    return p, start, target, build_control(start, target, p, 20.0, 16, 1e-2, seed=0)


# control paths -------------------------------------------------------------

def test_control_path_json_round_trip():
    c = ControlPath.from_free_values(4.0, [0.5, -1.0, 2.0], gain=3.0)
    d = json.loads(c.to_json())
    assert set(d) == {"t_total", "knots", "values", "gain"}
    back = ControlPath.from_json(c.to_json())
    assert back.t_total == c.t_total and back.gain == 3.0
    assert np.array_equal(back.values, c.values)


def test_control_path_validation():
    with pytest.raises(ValidationError):
        ControlPath(1.0, np.array([1.0, 2.0]))
    with pytest.raises(ValidationError):
        ControlPath(1.0, np.array([0.0]))
    with pytest.raises(ValidationError):
        ControlPath(1.0, np.array([0.0, np.nan]))


def test_control_path_integral():
    c = ControlPath.from_free_values(3.0, [1.0, 0.0, 2.0])
    s = np.linspace(0, 3, 3001)
    num = np.concatenate([[0], np.cumsum(0.5 * np.diff(s) * (c.values_at(s)[1:] + c.values_at(s)[:-1]))])
    assert np.allclose(c.integral_at(s), num, atol=1e-12)


def test_bump_gram_condition():
    assert BumpBasis(0.5).gram_condition() < 1e8


def test_default_gain_suite_b(suite_b):
    assert default_gain(suite_b) == pytest.approx(10.0)


# synthesis ----------------------------------------------------------------

def test_spec_example_synthesises(example_control):
    p, start, target, ctrl = example_control
    dist, ok = verify_control(start, ctrl, target, p, 1e-2)
    assert ok and dist < 1e-2
    assert ctrl.n_knots == 16


def test_zero_control_at_equilibrium(suite_b):
    a = zeta_point(suite_b, 0.0)
    ctrl = build_control(a, a, suite_b, 5.0, 8, 1e-2)
    assert not np.any(ctrl.values)
    assert verify_control(a, ctrl, a, suite_b, 1e-2)[0] == 0.0


def test_flat_casimir_change_fails(flat_b):
    start = to_y(State(0.0, 0.0, 0.0, 0.0), 1.0)
    target = to_y(State(0.0, 0.0, 1.0, 0.0), 1.0)  # casimir -v + sigma omega changes by 1
    with pytest.raises(SynthesisFailure) as info:
        build_control(start, target, flat_b, 5.0, 8, 1e-2, n_starts=2)
    assert info.value.best_distance >= 1e-2


def test_n_knots_too_small(suite_b):
    a = zeta_point(suite_b)
    with pytest.raises(ValidationError):
        build_control(a, to_y(State(0.3, 0, 0, 0), 1.0), suite_b, 20.0, 7, 1e-2)


def test_random_pairs_seeded():
    a = random_pairs(5, 3, 1.0)
    b = random_pairs(5, 3, 1.0)
    assert all(np.array_equal(x[0].as_array(), y[0].as_array()) for x, y in zip(a, b))
    assert random_pairs(5, 2, 1.0)[1][1] == a[1][1]


def test_small_sweep(suite_b):
    for i, (s, g) in enumerate(random_pairs(11, 3, 1.0)):
        ctrl = build_control(s, g, suite_b, 20.0, 41, 1e-2, seed=i)
        assert verify_control(s, ctrl, g, suite_b, 1e-2)[1]


def test_verify_sensitivity(example_control):
    p, start, target, ctrl = example_control
    flips = 0
    for k in range(10):
        g = rng(derive_seed(0, "perturb", k))
        bumped = ctrl.values + 10 * 1e-2 * g.uniform(-1, 1, ctrl.values.shape)
        bumped[0] = 0.0
        flips += not verify_control(start, ControlPath(ctrl.t_total, bumped, ctrl.gain), target, p, 1e-2)[1]
    assert flips >= 1


def test_verify_pass_implies_distance(example_control):
    p, start, target, ctrl = example_control
    dist, ok = verify_control(start, ctrl, target, p, 1e-2)
    assert ok == (dist < 1e-2)


# lambda flow ---------------------------------------------------------------

def test_lambda_flow_flat_rest_unchanged(flat_b):
    a = YState(0.2, -0.4, 0.0, 0.0)
    out = lambda_flow(a, None, BumpBasis(0.5), np.zeros(4), 0.5, flat_b)
    assert np.allclose(out.as_array(), a.as_array(), atol=0)


def test_lambda_flow_flat_decoupled(flat_b):
    a = YState(0.2, -0.4, 0.3, 0.1)
    b = BumpBasis(0.5)
    o1 = lambda_flow(a, None, b, np.zeros(4), 0.5, flat_b).as_array()
    o2 = lambda_flow(a, None, b, [1.0, -2.0, 0.5, 3.0], 0.5, flat_b).as_array()
    assert o1[0] == o2[0] and o1[2] == o2[2]
    assert o1[1] != o2[1]


def test_lambda_flow_taylor(suite_b):
    # third-order Taylor series of xi1 from the force and its rate at the start
    a = YState(0.1, 0.4, 0.2, -0.3)
    t = 1e-3
    out = lambda_flow(a, None, BumpBasis(t), np.zeros(4), t, suite_b, h=1e-4).as_array()
    sig = suite_b.sigma_ratio
    x0 = (sig * a.y2 - a.y1) / (sig + 1)
    xdot = (sig * a.y2dot - a.y1dot) / (sig + 1)
    f0 = suite_b.potential.dU(x0)
    f1 = suite_b.potential.d2U(x0) * xdot
    assert out[0] == pytest.approx(a.y1 + a.y1dot * t + f0 * t**2 / 2 + f1 * t**3 / 6, abs=1e-11)
    assert out[2] == pytest.approx(a.y1dot + f0 * t + f1 * t**2 / 2, abs=1e-8)
    assert out[1] == pytest.approx(a.y2 + a.y2dot * t, abs=1e-15)


# Jacobian -----------------------------------------------------------------

@pytest.mark.parametrize("t", [0.1, 0.5])
def test_jacobian_at_zeta(suite_b, t):
    a = zeta_point(suite_b)
    b = BumpBasis(t)
    rep = lambda_jacobian(a, ControlPath.zero(t), b, t, suite_b)
    L = linearized_response(a, b, t, suite_b)
    assert np.linalg.norm(rep.matrix - L) / np.linalg.norm(L) < 1e-3
    if t == 0.5:
        assert rep.rank == 4 and rep.condition_number < 1e6
    assert np.all(np.diff(rep.singular_values) <= 0) and np.all(rep.singular_values >= 0)


def test_zeta_location(suite_b):
    a = zeta_point(suite_b)
    x0 = (a.y2 - a.y1) / 2
    assert x0 == pytest.approx(0.5)


def test_linearized_bump_rows(suite_b):
    t = 0.5
    L = linearized_response(zeta_point(suite_b), BumpBasis(t), t, suite_b)
    kappa = default_gain(suite_b)
    assert np.allclose(L[2], kappa * t / np.arange(2, 6))
    assert np.allclose(L[3], kappa)


def test_jacobian_flat_rank(flat_b):
    t = 0.5
    rep = lambda_jacobian(zeta_point(flat_b, 0.5), ControlPath.zero(t), BumpBasis(t), t, flat_b)
    assert rep.rank <= 2
    assert np.all(rep.singular_values[2:] < 1e-10)
    assert np.all(linearized_response(zeta_point(flat_b, 0.5), BumpBasis(t), t, flat_b)[:2] == 0)


def test_jacobian_richardson(suite_b):
    t = 0.5
    a = zeta_point(suite_b)
    m1 = lambda_jacobian(a, ControlPath.zero(t), BumpBasis(t), t, suite_b, delta=1e-4).matrix
    m2 = lambda_jacobian(a, ControlPath.zero(t), BumpBasis(t), t, suite_b, delta=5e-5).matrix
    assert np.max(np.abs(m1 - m2)) / np.max(np.abs(m1)) < 1e-6


def test_jacobian_local_uniformity(suite_b):
    t = 0.5
    z = zeta_point(suite_b).as_array()
    b = BumpBasis(t)
    conds = []
    for k in range(20):
        g = rng(derive_seed(3, "uniformity", k))
        d = g.normal(size=4)
        a = z + 1e-2 * g.uniform() * d / np.linalg.norm(d)
        base = ControlPath.from_free_values(t, 1e-2 * g.uniform(-1, 1, 4))
        conds.append(lambda_jacobian(a, base, b, t, suite_b).condition_number)
    assert max(conds) / min(conds) < 2


def test_jacobian_json(suite_b):
    t = 0.5
    rep = lambda_jacobian(zeta_point(suite_b), ControlPath.zero(t), BumpBasis(t), t, suite_b)
    d = json.loads(rep.to_json())
    assert set(d) == {"matrix", "singular_values", "condition_number", "rank", "delta"}
