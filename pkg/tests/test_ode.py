import math

import numpy as np
import pytest

from corpus import rank2_cases, rank3_cases
from jacobi3.errors import StepFailure
from jacobi3.exprcalc import CompiledExprs
from jacobi3.hamflow import hamiltonian_field
from jacobi3.ode import Controls, Event, solve


def oscillator(_t, y):
    return np.array([y[1], -y[0]])


def test_harmonic_oscillator_accuracy():
    sol = solve(oscillator, 0.0, [1.0, 0.0], 20.0)
    assert sol.t_final == 20.0
    assert np.allclose(sol.y_final, [math.cos(20), -math.sin(20)], atol=1e-8, rtol=0)
    assert sol.steps > 10 and sol.evaluations >= 6 * sol.steps


def test_backward_integration():
    sol = solve(oscillator, 0.0, [1.0, 0.0], -5.0)
    assert sol.t_final == -5.0
    assert np.allclose(sol.y_final, [math.cos(5), math.sin(5)], atol=1e-8, rtol=0)


def test_dense_output_is_close():
    sol = solve(oscillator, 0.0, [1.0, 0.0], 6.0)
    t = np.linspace(0, 6, 97)
    assert np.max(np.abs(sol(t)[:, 0] - np.cos(t))) < 1e-6


def test_stops_are_hit_exactly():
    stops = np.linspace(0, 3, 31)
    sol = solve(oscillator, 0.0, [1.0, 0.0], 3.0, stops=stops)
    assert set(stops.tolist()) <= set(sol.t.tolist())
    idx = np.searchsorted(sol.t, stops)
    assert np.allclose(sol.y[idx, 0], np.cos(stops), atol=1e-9, rtol=0)
    # landing on stops must not cost the run its step size
    free = solve(oscillator, 0.0, [1.0, 0.0], 3.0)
    assert sol.steps <= free.steps + len(stops)


def test_event_location():
    # first zero of cos after t = 0
    sol = solve(oscillator, 0.0, [1.0, 0.0], 10.0, events=[Event(lambda t, y: y[0])])
    assert sol.event_t == pytest.approx(math.pi / 2, abs=1e-10)
    assert abs(sol.event_y[0]) <= 1e-10
    assert sol.t_final == sol.event_t


def test_event_accept_predicate_skips_crossings():
    # only crossings with y' > 0, i.e. the zero at 3π/2
    ev = Event(lambda t, y: y[0], accept=lambda t, y: y[1] > 0)
    sol = solve(oscillator, 0.0, [1.0, 0.0], 10.0, events=[ev])
    assert sol.event_t == pytest.approx(3 * math.pi / 2, abs=1e-10)


def test_no_event_runs_to_end():
    sol = solve(oscillator, 0.0, [1.0, 0.0], 1.0, events=[Event(lambda t, y: y[0] - 5)])
    assert sol.event_t is None and sol.t_final == 1.0


def test_step_failure_on_blowup():
    # y' = y² from y(0) = 1 blows up at t = 1
    with pytest.raises(StepFailure):
        solve(lambda t, y: y * y, 0.0, [1.0], 2.0)


def test_step_failure_on_budget():
    with pytest.raises(StepFailure):
        solve(oscillator, 0.0, [1.0, 0.0], 100.0, Controls(max_steps=5))


def _flow(J):
    v = CompiledExprs(hamiltonian_field(J, "1").components)
    return lambda _t, y: v.scalar(y[0], y[1], y[2])


def endpoint_errors(f, y0, t_end, h):
    ref = solve(f, 0.0, y0, t_end, Controls(rtol=1e-13, atol=1e-15)).y_final
    errs = []
    for step in (h, h / 2):
        y = solve(f, 0.0, y0, t_end, Controls(fixed_step=step)).y_final
        errs.append(np.max(np.abs(y - ref)))
    return errs


@pytest.mark.parametrize("J,x0,t_end,h", [
    (rank3_cases()["abc111"], (0.7, 0.7, 0.7), 2.0, 0.2),
    (rank2_cases()["cylinder_expz"], (1.0, 0.2, -0.5), 2.0, 0.25),
])
def test_fixed_step_order(J, x0, t_end, h):
    e1, e2 = endpoint_errors(_flow(J), np.array(x0), t_end, h)
    assert e2 > 0
    assert e1 / e2 >= 16 * 0.8


def test_fixed_step_exact_on_constant_field():
    f = _flow(rank2_cases()["cylinder"])
    for step in (0.5, 0.25):
        y = solve(f, 0.0, np.array([1.0, 0.0, 0.0]), 10.0, Controls(fixed_step=step)).y_final
        assert np.max(np.abs(y - [1.0, 0.0, -10.0])) <= 1e-12
