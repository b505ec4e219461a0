import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pfdyn import saddle, series
from pfdyn.difiter import DifferentialIteration
from pfdyn.hermite import hermite_eval
from pfdyn.lorenzlab import lorenz_decomposition, lorenz_G, wing_frame
from pfdyn.polymap import PolyMap, decompose_partial_linear, evaluate


def poly1(*terms):
    return PolyMap.from_terms(1, [list(terms)])


# -- series engine -------------------------------------------------------------

def test_hermite_generating_identity():
    for x in (0.0, 0.5, -0.5, 2.0, -2.0):
        P = poly1((2 * x, (1,)), (-1.0, (2,)))
        for n in range(21):
            got = saddle.series_exp_derivative(P, None, n).value
            want = hermite_eval(n, x)
            assert abs(got - want) <= 1e-10 * max(abs(want), 1.0)
    assert saddle.series_exp_derivative(poly1((4.0, (1,)), (-1.0, (2,))), None, 3).value == \
        pytest.approx(40.0, rel=1e-14)


def test_series_trivial_cases():
    zero = PolyMap.zero(1, 1)
    assert saddle.series_exp_derivative(zero, None, 0).value == 1.0
    for n in (1, 2, 7):
        assert saddle.series_exp_derivative(zero, None, n).value == 0.0
    mu = 1.7
    for n in range(12):
        v = saddle.series_exp_derivative(poly1((mu, (1,))), None, n).value
        assert v == pytest.approx(mu**n, rel=1e-13)


def test_series_cap():
    with pytest.raises(series.SeriesCapExceeded):
        saddle.series_exp_derivative(poly1((1.0, (1,))), None, 40)
    assert saddle.series_exp_derivative(poly1((1.0, (1,))), None, 40, cap=40).value == \
        pytest.approx(1.0, rel=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=2, max_size=2), st.integers(0, 5), st.integers(0, 5))
def test_series_of_linear_form(c, n1, n2):
    # exp(c1 a + c2 b): derivative is c1^n1 c2^n2
    P = PolyMap.from_terms(2, [[(c[0], (1, 0)), (c[1], (0, 1))]])
    v = series.exp_derivative(P, (n1, n2))
    assert v == pytest.approx(c[0] ** n1 * c[1] ** n2, rel=1e-12, abs=1e-12)


def test_series_product_rule():
    # exp(a^2 + a b) at (2, 1): 2! * [a^2 b] coefficient = 2 * (1 + 0) ... compare to sympy
    import sympy as sp
    a, b = sp.symbols("a b")
    expr = sp.exp(a**2 + 3 * a * b - b)
    want = float(sp.diff(expr, a, 3, b, 2).subs({a: 0, b: 0}))
    P = PolyMap.from_terms(2, [[(1.0, (2, 0)), (3.0, (1, 1)), (-1.0, (0, 1))]])
    assert series.exp_derivative(P, (3, 2)) == pytest.approx(want, rel=1e-13)


# -- critical points -------------------------------------------------------------

def test_critical_point_linear_map():
    for delta in (0.1, 0.01):
        f = poly1((1.0 + delta, (1,)))
        pts = saddle.critical_points(saddle.PlancherelRotach(f, [1.0], (1,)))
        assert len(pts) == 1
        assert pts[0].location[0] == pytest.approx(1 / (1 + delta), rel=1e-13)


def test_critical_point_identity_limit():
    f = PolyMap.identity(2)
    pr = saddle.PlancherelRotach(f, [2.0, 0.5], (3, 4))
    (cp,) = saddle.critical_points(pr)
    np.testing.assert_allclose(cp.location, [1.5, 8.0], rtol=1e-13)


def test_critical_residuals_independent(lorenz_F):
    it = DifferentialIteration(lorenz_F, np.array([0.01]))
    pr = saddle.PlancherelRotach.from_iteration(it, [0.5, 1.0, 0.8], (4, 4, 4))
    pts = saddle.critical_points(pr, starts=64)
    assert pts
    for cp in pts:
        assert np.linalg.norm(pr.gradient(cp.location)) < 1e-10


def test_tracked_critical_point_becomes_real():
    F = PolyMap.from_terms(2, [[(-1.0, (0, 1)), (0.5, (2, 0))], [(1.0, (1, 0)), (-1.0, (1, 1))]])
    y, n = np.array([1.0, 2.0]), (2, 3)
    target = np.array(n) / y
    dist, imag = [], []
    for delta in (1e-2, 1e-3, 1e-4):
        it = DifferentialIteration(F, np.array([delta]))
        pts = saddle.critical_points(saddle.PlancherelRotach.from_iteration(it, y, n))
        tracked = min(pts, key=lambda c: np.linalg.norm(c.location - target))
        dist.append(np.linalg.norm(tracked.location - target))
        imag.append(np.abs(tracked.location.imag).max())
    assert dist[0] > dist[1] > dist[2]
    # real coefficients: the point continued from n / y stays real
    assert max(imag) < 1e-12


def test_split_critical_points_match_joint(classic):
    frame = wing_frame(classic, (0.3, 0.8, 0.6))
    G = lorenz_G(classic)
    n = 3
    pr = saddle.PlancherelRotach(G.linear_substitute(frame.T), frame.s_vector, (n, n, n))
    pts = saddle.critical_points(pr, starts=128, seed=2)
    b = frame.omega_bar / np.sqrt(2)
    mu = frame.mu
    # 1-D equations: mu u = n, v (b - mu v) = n, w (b + mu w) = n
    vs = np.roots([-mu, b, -n]).astype(complex)
    ws = np.roots([mu, b, -n]).astype(complex)
    expected = [np.array([n / mu, v, w]) for v in vs for w in ws]
    assert len(pts) == 4
    for e in expected:
        assert min(np.linalg.norm(cp.location - e) for cp in pts) < 1e-9


# -- Hessian -------------------------------------------------------------------------

def test_hessian_lorenz_quadratic(lorenz_F, rng):
    r, s, t = 0.4, 1.3, -0.7
    for at in rng.normal(size=(3, 3)):
        rep = saddle.hessian_yF(lorenz_F, [r, s, t], at)
        np.testing.assert_allclose(rep.matrix, [[0, t, -s], [t, 0, 0], [-s, 0, 0]], atol=1e-15)
        mu = np.hypot(s, t)
        np.testing.assert_allclose(np.sort(rep.eigenvalues), [-mu, 0.0, mu], atol=1e-14)
        assert rep.degenerate and rep.symbolic_rank == 2


def test_hessian_trivial_cases():
    rep = saddle.hessian_yF(PolyMap.linear(np.array([[1.0, 2.0], [3.0, 4.0]])), [1.0, 1.0], [0, 0])
    assert np.all(rep.matrix == 0) and rep.degenerate
    rep = saddle.hessian_yF(poly1((1.0, (2,))), [1.0], [0.3])
    assert rep.matrix[0, 0] == 2.0 and not rep.degenerate


def test_hessian_finite_differences(rng):
    F = PolyMap.from_terms(2, [[(1.0, (3, 0)), (2.0, (1, 2))], [(-1.0, (2, 2)), (0.5, (0, 1))]])
    y = np.array([0.7, -1.2])
    yF = F.dot(y).gradient()
    h = 1e-5
    for x in rng.uniform(-1, 1, (20, 2)):
        H = saddle.hessian_yF(F, y, x).matrix
        fd = np.column_stack([(evaluate(yF, x + h * e) - evaluate(yF, x - h * e)) / (2 * h)
                              for e in np.eye(2)])
        assert np.abs(H - fd).max() <= 1e-6 * max(1.0, np.abs(H).max())


# -- asymptotic iteration and dominance --------------------------------------------

def test_lorenz_G(classic):
    rho = classic.rho
    want = PolyMap.from_terms(3, [[(1.0, (1, 0, 0))],
                                  [(1.0, (0, 1, 0)), (rho, (1, 0, 0)), (-1.0, (1, 0, 1))],
                                  [(1.0, (0, 0, 1)), (1.0, (1, 1, 0))]])
    assert lorenz_G(classic) == want


def test_zero_coupling_gives_identity():
    dec = decompose_partial_linear(PolyMap.linear(np.diag([2.0, -1.0, 3.0])), (0,))
    assert saddle.asymptotic_iteration(dec) == PolyMap.identity(3)


def test_wing_G_shift(classic, rng):
    dec = lorenz_decomposition(classic)
    alpha = classic.fixed_points()["alpha_plus"]
    a = classic.alpha
    G = saddle.asymptotic_iteration(dec)
    G_plus = saddle.conjugate_to_origin(saddle.asymptotic_iteration(dec, alpha=alpha), alpha)
    for y in rng.normal(size=(4, 3)):
        r, s, t = y
        for x in rng.uniform(-20, 20, (5, 3)):
            lhs = evaluate(G_plus.dot(y), x)[0]
            rhs = evaluate(G.dot(y), x)[0] - (s * (classic.rho - x[2]) + t * x[1]) * a
            assert lhs == pytest.approx(rhs, abs=1e-10 * (1 + abs(rhs)))


def test_dominance_examples(classic, rng):
    dec = lorenz_decomposition(classic)
    alpha = classic.fixed_points()["alpha_plus"]
    y = np.array([0.2, 0.9, -0.4])
    pts = rng.uniform([-20, -20, 0], [20, 20, 60], (200, 3))
    rep = saddle.dominance(dec, alpha, y, pts)
    want = (y[1] * (classic.rho - pts[:, 2]) + y[2] * pts[:, 1]) * classic.alpha
    np.testing.assert_allclose(rep.values, want, rtol=1e-12, atol=1e-10)
    assert set(np.unique(rep.signs)) == {-1.0, 1.0}
    mirror = saddle.dominance(dec, classic.fixed_points()["alpha_minus"], y, pts)
    np.testing.assert_array_equal(mirror.signs, -rep.signs)
    # a zero sharing the b-part of the origin: no coupling term at all
    flat = saddle.dominance(dec, np.array([0.0, 5.0, 3.0]), y, pts)
    assert np.all(flat.values == 0) and len(flat.communication) == len(pts)


# -- resolvent gap ------------------------------------------------------------------

def test_gap_identity_is_zero():
    pr = saddle.PlancherelRotach(PolyMap.identity(2), [1.3, -0.4], (3, 2))
    assert abs(saddle.resolvent_gap(pr).gap) < 1e-14


@settings(max_examples=20, deadline=None)
@given(st.floats(1e-3, 0.2), st.floats(0.1, 2.0), st.integers(1, 12))
def test_gap_linear_closed_form(delta, s, n):
    f = poly1((1.0 + delta, (1,)))
    g = saddle.resolvent_gap(saddle.PlancherelRotach(f, [n * s], (n,)))
    want = (n * s) ** n * (1 - (1 + delta) ** n)
    assert g.gap == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_gap_in_rotated_basis_uses_transposed_covector(classic):
    frame = wing_frame(classic, (0.1, 1.0, 1.0))
    pr = saddle.PlancherelRotach(PolyMap.identity(3), frame.s_vector, (2, 2, 2))
    g = saddle.resolvent_gap(pr, basis=frame.T)
    assert abs(g.gap) < 1e-12
    assert g.pure == pytest.approx(np.prod((frame.T.T @ frame.s_vector) ** 2))
