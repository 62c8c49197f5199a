import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import concertq as cq
from concertq.fluid import PiecewisePath, default_horizon


def path(ts, vs, extend="const"):
    return PiecewisePath(np.asarray(ts, float), np.asarray(vs, float), extend=extend)


def brute_force_regulator(x, grid):
    """Dense-grid running max of (-x)^+, the oracle for reflect."""
    return np.maximum.accumulate(np.maximum(-x(grid), 0.0))


# -- PiecewisePath ------------------------------------------------------------


def test_path_requires_increasing_breakpoints():
    with pytest.raises(ValueError):
        path([0.0, 0.0], [1.0, 2.0])


def test_path_eval_const_extension():
    p = path([0.0, 1.0], [0.0, 2.0])
    assert p(-1.0) == 0.0
    assert p(0.5) == 1.0
    assert p(3.0) == 2.0


def test_path_eval_slope_extension():
    p = path([0.0, 1.0], [0.0, 2.0], extend="slope")
    assert p(-1.0) == -2.0
    assert p(2.0) == 4.0


def test_path_addition_merges_breakpoints():
    a = path([0.0, 2.0], [0.0, 2.0])
    b = path([1.0, 3.0], [1.0, 0.0])
    c = a + b
    ts = np.array([0.0, 0.5, 1.0, 2.0, 2.5, 3.0])
    assert np.allclose(c(ts), a(ts) + b(ts))


def test_path_integral_exact():
    p = path([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
    assert p.integral(0.0, 2.0) == pytest.approx(1.0, abs=1e-15)
    assert p.integral(0.5, 1.5) == pytest.approx(0.75, abs=1e-15)
    # integration into the constant extension
    assert p.integral(0.0, 3.0) == pytest.approx(1.0, abs=1e-15)


def test_path_csv_round_trip():
    p = path([0.0, 0.5, 2.0], [1.0, -0.25, 1.0 / 3.0], extend="slope")
    q = PiecewisePath.from_csv(p.to_csv())
    assert np.array_equal(q.times, p.times)
    assert np.array_equal(q.values, p.values)
    assert q.extend == "slope"


# -- netflow ------------------------------------------------------------------


def test_netflow_uniform_profile():
    # uniform mass 1 on [-1, 1], mu=1, opening 0: rises at 0.5, falls at -0.5
    F = path([-1.0, 1.0], [0.0, 1.0])
    q = cq.QueueSpec(id=1, mu=1.0, t_start=0.0)
    x = cq.netflow(F, q, horizon=(-2.0, 2.0))
    assert x(-1.0) == 0.0
    assert x(0.0) == 0.5
    assert x(1.0) == 0.0
    assert x(0.5) == pytest.approx(0.25, abs=1e-15)


def test_netflow_no_arrivals():
    F = path([0.0], [0.0])
    q = cq.QueueSpec(id=1, mu=1.0, t_start=0.0)
    x = cq.netflow(F, q, horizon=(0.0, 3.0))
    assert x(2.0) == -2.0


def test_netflow_rejects_decreasing_cdf():
    F = path([0.0, 1.0], [1.0, 0.0])
    q = cq.QueueSpec(id=1, mu=1.0, t_start=0.0)
    with pytest.raises(cq.DomainError):
        cq.netflow(F, q)


# -- reflect ------------------------------------------------------------------


def test_reflect_nonnegative_input_is_identity():
    x = path([0.0, 1.0, 2.0], [0.0, 1.0, 0.0], extend="slope")
    phi, psi = cq.reflect(x)
    assert np.all(psi.values == 0.0)
    assert np.allclose(phi(x.times), x.values)


def test_reflect_pure_drain():
    x = path([0.0, 2.0], [0.0, -2.0], extend="slope")
    phi, psi = cq.reflect(x)
    ts = np.linspace(0, 2, 9)
    assert np.allclose(psi(ts), ts)
    assert np.all(phi(ts) == 0.0)


def test_reflect_worked_triple():
    x = path([0.0, 1.0, 2.0], [0.0, -1.0, 0.5], extend="slope")
    phi, psi = cq.reflect(x)
    assert np.allclose(psi(np.array([0.0, 1.0, 2.0])), [0.0, 1.0, 1.0])
    assert np.allclose(phi(np.array([0.0, 1.0, 2.0])), [0.0, 0.0, 1.5])


def test_reflect_inserts_breakpoint_at_reattained_minimum():
    # dips to -1, recovers, dips again: regulator restarts rising at t=3
    x = path([0.0, 1.0, 2.0, 4.0], [0.0, -1.0, 0.0, -2.0], extend="slope")
    _, psi = cq.reflect(x)
    assert 3.0 in psi.times
    grid = np.arange(0.0, 4.0001, 1e-4)
    assert np.max(np.abs(psi(grid) - brute_force_regulator(x, grid))) <= 1e-12


def test_reflect_starts_at_clipped_initial_value():
    x = path([0.0, 1.0], [-0.5, 1.0], extend="slope")
    _, psi = cq.reflect(x)
    assert psi.values[0] == 0.5
    x2 = path([0.0, 1.0], [0.5, 1.0], extend="slope")
    _, psi2 = cq.reflect(x2)
    assert psi2.values[0] == 0.0


@st.composite
def piecewise_linear_paths(draw):
    n = draw(st.integers(min_value=2, max_value=8))
    dts = draw(
        st.lists(st.floats(0.1, 2.0), min_size=n - 1, max_size=n - 1)
    )
    vals = draw(
        st.lists(st.floats(-5.0, 5.0), min_size=n, max_size=n)
    )
    ts = np.concatenate(([0.0], np.cumsum(dts)))
    return path(ts, vals, extend="slope")


@given(piecewise_linear_paths())
@settings(max_examples=200, deadline=None)
def test_reflect_matches_dense_grid_oracle(x):
    _, psi = cq.reflect(x)
    grid = np.linspace(x.times[0], x.times[-1], 2001)
    grid = np.union1d(grid, x.times)
    oracle = brute_force_regulator(x, grid)
    assert np.max(np.abs(psi(grid) - oracle)) <= 1e-9 * max(
        1.0, float(np.max(np.abs(x.values)))
    )


@given(piecewise_linear_paths())
@settings(max_examples=200, deadline=None)
def test_reflect_structural_invariants(x):
    phi, psi = cq.reflect(x)
    assert np.all(phi.values >= 0.0)
    assert psi.is_nondecreasing()
    # phi equals x while the regulator has not moved off its initial value
    untouched = psi.values == psi.values[0]
    if psi.values[0] == 0.0:
        assert np.allclose(phi(psi.times[untouched]), x(psi.times[untouched]), atol=1e-12)
    # the regulator only grows where the reflected path sits at zero
    # (growth below a few ulps of the value scale is rounding at inserted
    # crossing breakpoints, not real growth)
    scale = max(1.0, float(np.max(np.abs(psi.values))))
    growing = np.diff(psi.values) > 1e-12 * scale
    starts = phi.values[:-1][growing]
    assert np.all(starts <= 1e-9 * scale)


@given(piecewise_linear_paths(), piecewise_linear_paths())
@settings(max_examples=100, deadline=None)
def test_regulator_is_lipschitz(x, y):
    # compare on a common breakpoint set: refine y onto x's span
    ts = np.union1d(x.times, y.times)
    xa = PiecewisePath(ts, x(ts), extend="slope")
    ya = PiecewisePath(ts, y(ts), extend="slope")
    _, px = cq.reflect(xa)
    _, py = cq.reflect(ya)
    # sups of piecewise-linear differences are attained at breakpoints
    grid = np.linspace(ts[0], ts[-1], 1501)
    grid = np.union1d(grid, np.concatenate([ts, px.times, py.times]))
    gap_inputs = float(np.max(np.abs(xa(grid) - ya(grid))))
    gap_regulators = float(np.max(np.abs(px(grid) - py(grid))))
    assert gap_regulators <= gap_inputs + 1e-9


# -- fluid processes ----------------------------------------------------------


def queue_spec(mu=1.0, t_start=0.0):
    return cq.QueueSpec(id=1, mu=mu, t_start=t_start)


def uniform_profile():
    return cq.ArrivalProfile((cq.Segment(1, 1, -1.0, 1.0, 0.5),))


def test_fluid_queue_uniform():
    q = cq.fluid_queue(uniform_profile(), queue_spec())
    assert q(0.0) == 0.5
    assert q(1.0) == 0.0
    assert np.all(q.values >= 0.0)


def test_fluid_queue_empty_profile_is_zero():
    q = cq.fluid_queue(cq.ArrivalProfile(()), queue_spec())
    assert np.all(q.values == 0.0)


def test_fluid_busy_empty_profile_is_zero():
    b = cq.fluid_busy(cq.ArrivalProfile(()), queue_spec())
    ts = np.linspace(-1, 3, 11)
    assert np.allclose(b(ts), 0.0)


def test_fluid_busy_never_idle_equilibrium():
    s = cq.scenario_from_dict(
        {"queues": [{"mu": 1, "t_start": 0}], "populations": [{"alpha": 1, "beta": 1}]}
    )
    eq = cq.solve_single(s)
    b = cq.fluid_busy(eq.profile, s.queues[0])
    for t in (0.0, 0.25, 0.5, 1.0):
        assert b(t) == pytest.approx(max(t, 0.0), abs=1e-12)


def test_fluid_busy_terminal_idle_share():
    # netflow dips 0.3 below zero at t=1 and recovers; with mu=2 the busy
    # clock ends 0.15 behind the wall clock
    q = queue_spec(mu=2.0)
    profile = cq.ArrivalProfile(
        (cq.Segment(1, 1, 0.0, 1.0, 1.7), cq.Segment(1, 1, 1.0, 2.0, 3.0))
    )
    horizon = (-0.5, 2.0)
    x = cq.netflow(profile.queue_cdf(1), q, horizon)
    assert float(np.min(x.values)) == pytest.approx(-0.3, abs=1e-12)
    b = cq.fluid_busy(profile, q, horizon)
    assert (2.0 - 0.0) - b(2.0) == pytest.approx(0.15, abs=1e-12)


def test_fluid_wait_pre_opening():
    # nobody in queue, arriving half a time unit before opening
    profile = cq.ArrivalProfile((cq.Segment(1, 1, 0.0, 1.0, 1.0),))
    w = cq.fluid_wait(profile, queue_spec())
    assert w(-0.5) == 0.5


def test_fluid_wait_from_queue_length():
    w = cq.fluid_wait(uniform_profile(), queue_spec())
    assert w(0.0) == pytest.approx(0.5, abs=1e-15)
    # drained queue after the terminal time
    assert w(1.5) == 0.0


def test_cost_curve_flat_on_equilibrium_support():
    pop = cq.PopulationSpec(id=1, alpha=1.0, beta=1.0)
    c = cq.cost_curve(pop, uniform_profile(), queue_spec())
    ts = np.linspace(-1.0, 1.0, 21)
    assert np.allclose(c(ts), 1.0, atol=1e-12)


def test_cost_curve_past_terminal_time_is_tardiness_only():
    pop = cq.PopulationSpec(id=1, alpha=1.0, beta=1.0)
    c = cq.cost_curve(pop, uniform_profile(), queue_spec())
    assert c(2.0) == pytest.approx(2.0, abs=1e-12)
    assert c(3.0) > c(2.0)


def test_flow_conservation():
    # total mass equals rate times busy time once the queue has drained
    profile = cq.ArrivalProfile(
        (cq.Segment(1, 1, -0.5, 0.75, 0.8), cq.Segment(2, 1, 0.25, 1.5, 0.4))
    )
    q = queue_spec(mu=1.3)
    lo, hi = default_horizon(profile, [q])
    b = cq.fluid_busy(profile, q, (lo, hi))
    assert q.mu * b(hi) == pytest.approx(profile.mass(queue=1), abs=1e-9)


def test_arrival_profile_cdf_and_masses():
    profile = cq.ArrivalProfile(
        (cq.Segment(1, 1, 0.0, 1.0, 0.5), cq.Segment(2, 1, 0.5, 1.5, 1.0))
    )
    F = profile.queue_cdf(1)
    assert F(0.0) == 0.0
    assert F(1.0) == pytest.approx(1.0)
    assert F(1.5) == pytest.approx(1.5)
    assert F.is_nondecreasing()
    assert profile.mass(population=1) == pytest.approx(0.5)
    assert profile.first_arrival(1) == 0.0
    assert profile.routing_masses()[(2, 1)] == pytest.approx(1.0)


def test_arrival_profile_csv_round_trip():
    profile = cq.ArrivalProfile(
        (cq.Segment(1, 1, -0.75, 0.75, 0.5), cq.Segment(1, 2, 0.25, 0.75, 0.5))
    )
    again = cq.ArrivalProfile.from_csv(profile.to_csv())
    assert again == profile
