import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qedmodel import tp1
from qedmodel.errors import DomainError
from qedmodel.instanton import (EndpointWarning, bounce_action, escape_probability,
                                instanton_action, instanton_time_map, instanton_trajectory,
                                velocity_residual, wkb_subleading, zero_energy_check)
from qedmodel.potentials import barrier, log_potential_d1
from qedmodel.rates import kramers_rate


@pytest.fixture(scope="module")
def traj():
    return instanton_trajectory(tp1(0.02), 40.0, 8001)


def test_time_map_identity():
    assert instanton_time_map(0.7, 0.7, tp1()) == 0.0


def test_time_map_monotone():
    x = np.linspace(0.5, 1.0, 1002)[1:-1]
    t = instanton_time_map(x, 0.75, tp1())
    assert np.all(np.diff(t) < 0)
    t_anti = instanton_time_map(x, 0.75, tp1(), sign=-1)
    assert np.allclose(t_anti, -t)


@given(st.floats(0.501, 0.999), st.floats(0.501, 0.999), st.floats(0.501, 0.999))
def test_time_map_additivity(a, b, c):
    p = tp1()
    lhs = instanton_time_map(b, a, p)
    rhs = instanton_time_map(b, c, p) + instanton_time_map(c, a, p)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_time_map_domain():
    with pytest.raises(DomainError):
        instanton_time_map(1.2, 0.7, tp1())
    with pytest.raises(DomainError):
        instanton_time_map(0.7, 0.4, tp1())


def test_trajectory_residual(traj):
    p = tp1(0.02)
    scale = np.max(np.abs(log_potential_d1(traj.values, p)))
    assert velocity_residual(traj, p) <= 1e-6 * scale


def test_trajectory_endpoints(traj):
    b = barrier(tp1(0.02))
    # exponential approach with rate |V''| at each end, floored by the endpoint clamp
    clamp = 2e-12
    assert abs(traj.values[0] - b.y_min) <= max(10 * math.exp(-b.v2_min * 40.0), clamp)
    assert abs(traj.values[-1] - b.y_max) <= max(10 * math.exp(b.v2_max * 40.0), clamp)
    assert np.all(np.diff(traj.values) <= 0)


def test_short_window_warns():
    with pytest.warns(EndpointWarning):
        instanton_trajectory(tp1(0.02), 5.0, 501)


def test_anti_instanton_is_time_reversal(traj):
    anti = instanton_trajectory(tp1(0.02), 40.0, 8001, kind="anti-instanton")
    assert np.allclose(anti.values, traj.values[::-1], atol=1e-12)
    assert velocity_residual(anti, tp1(0.02)) <= 1e-6


def test_bounce_symmetry():
    b = instanton_trajectory(tp1(0.02), 40.0, 4001, kind="bounce")
    assert np.max(np.abs(b.values - b.values[::-1])) <= 1e-9
    assert b.action_s0 == pytest.approx(2 * barrier(tp1(0.02)).e_b, rel=1e-12)


def test_round_trip_interior(traj):
    p = tp1(0.02)
    inner = np.abs(traj.times) <= 15.0
    x0 = -p.kappa / (2 * p.g)
    t_back = instanton_time_map(np.exp(traj.values[inner]), x0, p)
    assert np.max(np.abs(t_back - traj.times[inner])) <= 1e-8


def test_zero_energy(traj):
    assert zero_energy_check(traj, tp1(0.02)) <= 1e-9


def test_zero_energy_discriminates(traj):
    rng = np.random.default_rng(0)
    bent = type(traj)(traj.times, traj.values + 1e-3 * rng.normal(size=traj.values.size),
                      traj.kind, traj.endpoints, traj.action_s0)
    assert zero_energy_check(bent, tp1(0.02)) > 1e-6


def test_zero_energy_rejects_bounce():
    b = instanton_trajectory(tp1(0.02), 40.0, 401, kind="bounce")
    with pytest.raises(DomainError):
        zero_energy_check(b, tp1(0.02))


def test_action_equals_barrier():
    p = tp1(0.02)
    s0, a = instanton_action(p, 0.0, math.log(0.5))
    assert s0 == pytest.approx(0.056853, abs=1e-6)
    assert abs(s0 - barrier(p).e_b) <= 1e-10
    assert a == pytest.approx(2 * s0 / 0.02)
    assert instanton_action(p, 0.3, 0.3) == (0.0, 0.0)
    assert bounce_action(p) == pytest.approx(2 * s0)
    with pytest.raises(DomainError):
        instanton_action(p, math.log(0.5), 0.0)


def test_escape_probability_is_arrhenius():
    p = tp1(0.02)
    k = kramers_rate(p)
    assert escape_probability(p) == pytest.approx(math.exp(-k.exponent), rel=1e-14)
    assert escape_probability(p) == pytest.approx(3.40e-3, rel=2e-3)


def test_wkb_subleading():
    w = wkb_subleading(kramers_rate(tp1(0.02)).rate * 0.02, t0=1.5)
    assert w.s1_of_t(1.5) == 0.0
    assert w.s1_of_t(2.5) == pytest.approx(-7.64e-6, rel=1e-3)
    assert w.s1_of_t(1.5 + 2 * 0.7) == pytest.approx(2 * w.s1_of_t(1.5 + 0.7), rel=1e-14)


def test_normal_solution_has_zero_action():
    # dy/dt = -V' relaxes into the well; the response field and its action vanish
    p = tp1(0.02)
    assert instanton_action(p, 0.0, 0.0)[0] == 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        instanton_trajectory(p, 40.0, 2001)
