import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pfdyn import systems
from pfdyn.difiter import (Box, DifferentialIteration, OrbitOverflow, compact_invariance_probe,
                           cycle_mean_residual, detect_cycle, orbit, step)
from pfdyn.equilibria import find_zeros
from pfdyn.lorenzlab import LorenzParams
from pfdyn.polymap import DimensionError, PolyMap


def it_of(F, delta):
    return DifferentialIteration(F, np.array([delta]))


def test_zero_field_is_identity():
    it = it_of(PolyMap.zero(2, 2), 0.1)
    x = np.array([0.3, -1.7])
    assert np.array_equal(step(it, x), x)


def test_logistic_step_value():
    assert step(it_of(systems.logistic(1.0), 0.1), [0.5])[0] == pytest.approx(0.525, abs=1e-15)


def test_step_at_wing_is_fixed():
    a = LorenzParams().fixed_points()["alpha_plus"]
    assert np.array_equal(step(it_of(systems.lorenz(), 0.005), a), a)


def test_constant_orbit_and_period_one():
    it = it_of(systems.logistic(1.0), 0.01)
    orb = orbit(it, [1.0], 100, burn_in=0)
    assert np.all(orb.points == 1.0)
    cyc = detect_cycle(orb)
    assert cyc.period_steps == 1 and cyc.closure_error == 0.0
    np.testing.assert_array_equal(cycle_mean_residual(it, orb.points), [0.0])


def test_logistic_orbit_monotone_to_one():
    orb = orbit(it_of(systems.logistic(1.0), 0.01), [0.5], 3000, burn_in=0)
    x = orb.points[:, 0]
    assert np.all(np.diff(x) >= 0)
    assert abs(x[-1] - 1.0) < 1e-6
    assert detect_cycle(orb).period_steps == 1


def test_orbit_starts_at_start_and_follows_step():
    it = it_of(systems.lorenz(), 0.005)
    orb = orbit(it, [1.0, 1.0, 1.0], 50, burn_in=0)
    assert np.array_equal(orb.points[0], [1.0, 1.0, 1.0])
    for j in range(50):
        assert np.array_equal(orb.points[j + 1], step(it, orb.points[j]))


def test_lorenz_orbit_bounded_and_two_sided():
    orb = orbit(it_of(systems.lorenz(), 0.005), [1.0, 1.0, 1.0], 200_000)
    assert np.abs(orb.points).max() < 100
    assert (orb.points[:, 0] < 0).any() and (orb.points[:, 0] > 0).any()


def test_orbit_determinism():
    it = it_of(systems.lorenz(), 0.005)
    a = orbit(it, [1.0, 2.0, 3.0], 20_000)
    b = orbit(it_of(systems.lorenz(), 0.005), [1.0, 2.0, 3.0], 20_000)
    assert a.points.tobytes() == b.points.tobytes()


@settings(max_examples=25, deadline=None)
@given(st.floats(-5, -0.01), st.floats(1e-4, 0.1), st.floats(-3, 3), st.integers(1, 500))
def test_linear_closed_form(lam, delta, a0, n):
    F = PolyMap.from_terms(1, [[(lam, (1,))]])
    orb = orbit(it_of(F, delta), [a0], n, burn_in=0)
    exact = a0 * (1 + delta * lam) ** np.arange(n + 1)
    np.testing.assert_allclose(orb.points[:, 0], exact, rtol=1e-12, atol=1e-300)


def test_overflow_reports_step():
    F = PolyMap.from_terms(1, [[(1.0, (2,))]])
    with pytest.raises(OrbitOverflow) as err:
        orbit(it_of(F, 0.5), [10.0], 1000, burn_in=0)
    assert 0 < err.value.step < 1000


def test_step_nonfinite_raises():
    F = PolyMap.from_terms(1, [[(1.0, (2,))]])
    with pytest.raises(OrbitOverflow):
        step(it_of(F, 1.0), [1e200])


def test_step_at_newton_zero_is_small():
    it = it_of(systems.lorenz(), 0.005)
    for eq in find_zeros(systems.lorenz(), Box.parse("-30,30;-30,30;0,60"), 6):
        assert np.linalg.norm(step(it, eq.location) - eq.location) <= 0.005 * max(eq.residual,
                                                                                   1e-300) * 1.0001


def test_invalid_configuration():
    with pytest.raises(ValueError):
        DifferentialIteration(systems.logistic(), np.array([0.0]))
    with pytest.raises(ValueError):
        DifferentialIteration(systems.logistic(), np.array([0.1]), tau=np.array([0.7]))
    with pytest.raises(DimensionError):
        DifferentialIteration(PolyMap.zero(2, 1), np.array([0.1]))
    with pytest.raises(DimensionError):
        DifferentialIteration(systems.lorenz(), np.array([0.1, 0.2]), blocks=(0, 1))


def test_block_deltas():
    F = PolyMap.identity(2)
    it = DifferentialIteration(F, np.array([0.1, 0.3]), blocks=(0, 1))
    np.testing.assert_allclose(it.tau, [0.25, 0.75])
    np.testing.assert_allclose(step(it, [1.0, 1.0]), [1.1, 1.3])
    it2 = DifferentialIteration.from_time(F, [1.0, 3.0], 10, blocks=(0, 1))
    np.testing.assert_allclose(it2.delta_vector, [0.1, 0.3])


def test_harmonic_cycle():
    delta = 1e-4
    it = it_of(systems.harmonic(), delta)
    orb = orbit(it, [1.0, 0.0], 150_000, burn_in=0)
    # Euler spirals out by about pi*delta per turn; the tolerance must cover that
    cyc = detect_cycle(orb, tol=20 * delta, field=systems.harmonic())
    assert abs(cyc.period_time - 2 * np.pi) < 0.01 * 2 * np.pi
    assert abs(cyc.period_time - 2 * np.pi) < 10 * delta + 20 * delta
    assert np.linalg.norm(cyc.mean_field_residual) < 10 * delta


def test_default_tol_misses_euler_drift():
    orb = orbit(it_of(systems.harmonic(), 1e-4), [1.0, 0.0], 150_000, burn_in=0)
    assert detect_cycle(orb) is None


def test_lorenz_window_is_not_a_cycle():
    it = it_of(systems.lorenz(), 0.005)
    orb = orbit(it, [1.0, 1.0, 1.0], 60_000)
    window = orb.points[-2000:]
    assert np.linalg.norm(cycle_mean_residual(it, window)) > 1.0


def test_probe_examples():
    box01 = Box(np.array([0.0]), np.array([1.0]))
    assert compact_invariance_probe(it_of(PolyMap.zero(1, 1), 0.1), box01, 50, 100).fraction_escaped == 0
    assert compact_invariance_probe(it_of(systems.logistic(2.0), 0.4), box01, 200, 500).fraction_escaped == 0
    box = Box.parse("-30,30;-30,30;0,60")
    rep = compact_invariance_probe(it_of(systems.lorenz(), 0.005), box, 16, 100_000, seed=3)
    assert rep.fraction_escaped == 0
    assert rep.max_excursion < 100


def test_box_parse():
    b = Box.parse("-1,1;0,2")
    assert b.dim == 2
    np.testing.assert_array_equal(b.contains([[0, 1], [2, 1]]), [True, False])
    with pytest.raises(ValueError):
        Box.parse("1,0")
