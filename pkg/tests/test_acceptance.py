"""Acceptance criteria 1-9, one pass/fail line each."""
import json
import time

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from pfdyn import cli, equilibria, hermite, lorenzlab as ll, saddle, systems, ulam
from pfdyn.difiter import Box, DifferentialIteration, detect_cycle, orbit
from pfdyn.polymap import PolyMap, evaluate


@pytest.fixture
def report(capsys):
    def emit(num, ok, elapsed, limit, detail=""):
        within = elapsed < limit
        status = "PASS" if ok and within else "FAIL"
        with capsys.disabled():
            print(f"\ncriterion {num}: {status} ({elapsed:.2f}s / {limit}s) {detail}")
        return ok and within
    return emit


def multiset_distance(a, b):
    cost = np.abs(np.asarray(a, complex)[:, None] - np.asarray(b, complex)[None, :])
    r, c = linear_sum_assignment(cost)
    return cost[r, c].max()


def full_logistic():
    F = PolyMap.from_terms(1, [[(3.0, (1,)), (-4.0, (2,))]])
    return DifferentialIteration(F, np.array([1.0]))


def test_criterion_1_logistic(report):
    t0 = time.perf_counter()
    F = systems.logistic(1.0)
    eqs = equilibria.find_zeros(F, Box.parse("-2,2"), delta=0.01)
    locs = sorted(float(e.location[0]) for e in eqs)
    zeros_ok = len(locs) == 2 and abs(locs[0]) < 1e-12 and abs(locs[1] - 1) < 1e-12
    one = [e for e in eqs if abs(e.location[0] - 1) < 1e-9][0]
    mult_err = abs(one.multipliers[0] - 0.99)
    orb = orbit(DifferentialIteration(F, np.array([0.01])), [0.5], 3000, burn_in=0)
    orbit_err = abs(orb.points[3000, 0] - 1)
    ok = zeros_ok and mult_err < 1e-14 and orbit_err < 1e-6
    assert report(1, ok, time.perf_counter() - t0, 1,
                  f"zeros={locs} multiplier_err={mult_err:.1e} |a_3000-1|={orbit_err:.1e}")


def test_criterion_2_lorenz_equilibria(report, classic):
    t0 = time.perf_counter()
    s, r, b = classic.sigma, classic.rho, classic.beta
    F = ll.lorenz_field(classic)
    a = np.sqrt(72.0)
    resid = max(np.linalg.norm(evaluate(F, [sx * a, sx * a, 27.0])) for sx in (1, -1))
    eig = equilibria.equilibrium_at(F, np.zeros(3)).eigenvalues
    # companion-matrix oracle for (beta + l)[(sigma + l)(1 + l) - sigma rho]
    poly = np.polymul([1.0, b], np.polysub(np.polymul([1.0, s], [1.0, 1.0]), [s * r]))
    comp = np.diag(np.ones(2), -1)
    comp[0] = -np.asarray(poly[1:]) / poly[0]
    dist = multiset_distance(eig, np.linalg.eigvals(comp))
    rng = np.random.default_rng(2)
    cp = equilibria.characteristic_polynomial(F, classic.fixed_points()["alpha_plus"])
    worst = derived_worst = 0.0
    for lam in rng.uniform(-30, 30, 20):
        printed = lam * (b + lam) * (1 + s + lam) - classic.alpha**2 * (lam + 2 * s)
        derived = lam * (b + lam) * (1 + s + lam) + classic.alpha**2 * (lam + 2 * s)
        got = np.polyval(cp, lam)
        worst = max(worst, min(abs(got - printed), abs(got + printed)) / abs(printed))
        derived_worst = max(derived_worst, min(abs(got - derived), abs(got + derived)) / abs(derived))
    ok = resid < 1e-10 and dist < 1e-8 and worst < 1e-8
    assert report(2, ok, time.perf_counter() - t0, 1,
                  f"residual={resid:.1e} origin_multiset={dist:.1e} "
                  f"wing_vs_printed_rel={worst:.2e} wing_vs_plus_alpha2_rel={derived_worst:.1e}")


def test_criterion_3_hermite(report):
    t0 = time.perf_counter()
    worst = 0.0
    for x in (0.0, 0.5, -0.5, 2.0, -2.0):
        P = PolyMap.from_terms(1, [[(2 * x, (1,)), (-1.0, (2,))]])
        for n in range(21):
            got = saddle.series_exp_derivative(P, None, n).value
            want = hermite.hermite_eval(n, x)
            worst = max(worst, abs(got - want) / max(abs(want), 1.0))
    z2 = hermite.hermite_zeros(2).zeros
    z3 = hermite.hermite_zeros(3).zeros
    zero_err = max(np.abs(z2 - [-2**-0.5, 2**-0.5]).max(),
                   np.abs(z3 - [-np.sqrt(1.5), 0.0, np.sqrt(1.5)]).max())
    interlace = True
    prev = hermite.hermite_zeros(1).zeros
    for n in range(2, 101):
        z = hermite.hermite_zeros(n).zeros
        interlace &= bool(np.all(z[:-1] < prev) and np.all(prev < z[1:]))
        prev = z
    ok = worst < 1e-10 and zero_err < 1e-12 and interlace
    assert report(3, ok, time.perf_counter() - t0, 5,
                  f"identity_rel={worst:.1e} zeros_err={zero_err:.1e} interlacing={interlace}")


def test_criterion_4_basis_change(report, classic):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    lin = quad = orth = 0.0
    for u, v, w, r, s, t in rng.normal(size=(1000, 6)):
        fr = ll.wing_frame(classic, (r, s, t))
        x = fr.T @ np.array([u, v, w])
        lin = max(lin, abs(evaluate(fr.L(), x)[0] - (fr.mu * u + fr.omega_bar * (v + w) / np.sqrt(2))))
        quad = max(quad, abs(evaluate(fr.Q(), x)[0] - fr.mu * (w * w - v * v) / 2))
        orth = max(orth, np.linalg.norm(fr.T.T @ fr.T - np.eye(3)))
    ok = lin < 1e-10 and quad < 1e-10 and orth < 1e-12
    assert report(4, ok, time.perf_counter() - t0, 1,
                  f"L_err={lin:.1e} Q_err={quad:.1e} orth={orth:.1e}")


def test_criterion_5_resolvent_gap(report, classic):
    t0 = time.perf_counter()
    choices = [(0.1, 1.0, 1.0), (0.0, 2**-0.5, 2**-0.5), (0.5, 0.8, -0.3)]
    rows, factors_ok = [], True
    for sv in choices:
        fr = ll.wing_frame(classic, sv)
        for n in (2, 4, 6, 8):
            g = ll.resolvent_gap_comparison(classic, sv, n)
            complete = np.isfinite(g.series_gap) and np.isfinite(g.printed_gap)
            factors_ok &= bool(complete)
            rows.append((sv, n, g.kappa, g.relative_difference_printed,
                         g.relative_difference_derived))
            gu, gv, gw = ll.gamma_split(fr, n)
            factors_ok &= abs(gu.series_value - fr.mu**n) <= 1e-9 * fr.mu**n
            for gf in (gv, gw):
                factors_ok &= abs(gf.series_value - gf.closed_form) <= 1e-9 * max(1, abs(gf.closed_form))
    printed = max(r[3] for r in rows)
    derived = max(r[4] for r in rows)
    kappas = sorted({r[2] for r in rows})
    assert report(5, factors_ok, time.perf_counter() - t0, 30,
                  f"kappa={kappas} max_rel_diff_printed={printed:.4f} "
                  f"max_rel_diff_derived={derived:.1e}")


def test_criterion_6_ulam(report):
    t0 = time.perf_counter()
    errs = []
    for cells in (128, 256, 512, 1024):
        part = ulam.GridPartition(Box(np.array([0.0]), np.array([1.0])), (cells,))
        dens = ulam.invariant_density(ulam.build_transition(full_logistic(), part, 64, seed=7))
        e = np.linspace(0, 1, cells + 1)
        exact = np.diff(2 / np.pi * np.arcsin(np.sqrt(e)))
        errs.append(float(np.abs(dens.weights - exact).sum()))
    hist = ulam.orbit_histogram(full_logistic(), [0.3], 10_000_000, part)
    l1_hist = float(np.abs(hist - dens.weights).sum())
    monotone = all(a > b for a, b in zip(errs, errs[1:]))
    ok = errs[-1] < 0.05 and l1_hist < 0.08 and monotone
    assert report(6, ok, time.perf_counter() - t0, 60,
                  f"L1_analytic={[round(x, 4) for x in errs]} L1_histogram={l1_hist:.4f}")


def test_criterion_7_lorenz(report, classic):
    t0 = time.perf_counter()
    rep = ll.lorenz_study(classic, delta=0.005, steps=2_000_000)
    inside = rep["orbit"]["inside_box"]
    ratio = rep["orbit"]["wing_occupancy_ratio"]
    crossings = rep["crossings"]["count"]
    radial = rep["radial_confrontation"]
    recorded = all(radial[w]["ks_beta_half"] is not None for w in ("alpha_plus", "alpha_minus"))
    ok = inside and 0.5 <= ratio <= 2 and crossings > 100 and recorded
    assert report(7, ok, time.perf_counter() - t0, 120,
                  f"inside={inside} occupancy={ratio:.3f} crossings={crossings} "
                  f"ks_beta_half=({radial['alpha_plus']['ks_beta_half']:.3f}, "
                  f"{radial['alpha_minus']['ks_beta_half']:.3f})")


def test_criterion_8_cycles(report):
    t0 = time.perf_counter()
    delta = 1e-4
    H = PolyMap.from_terms(2, [[(0.5, (2, 0)), (0.5, (0, 2))]])
    F = ll.hamilton_build(H)
    orb = orbit(DifferentialIteration(F, np.array([delta])), [1.0, 0.0], 150_000, burn_in=0)
    # Euler closes each turn only to about pi*delta; the tolerance is sized to that drift
    cyc = detect_cycle(orb, tol=20 * delta, field=F)
    found = cyc is not None
    period_err = abs(cyc.period_time / (2 * np.pi) - 1) if found else np.inf
    resid = float(np.linalg.norm(cyc.mean_field_residual)) if found else np.inf
    ok = found and period_err < 0.01 and resid < 10 * delta
    assert report(8, ok, time.perf_counter() - t0, 10,
                  f"period_time={cyc.period_time if found else None} rel_err={period_err:.1e} "
                  f"residual={resid:.1e}")


def test_criterion_9_determinism(report, tmp_path):
    t0 = time.perf_counter()
    sysfile = tmp_path / "full.json"
    sysfile.write_text(json.dumps(systems.system_to_dict(full_logistic().field)))
    blobs = []
    d = tmp_path
    for _ in range(2):
        # same paths both times, so the embedded configs are comparable byte for byte
        assert cli.run(["ulam", "--system", str(sysfile), "--delta", "1", "--box", "0,1",
                        "--cells", "1024", "--samples", "64", "--seed", "7",
                        "--out", str(d / "density.bin"), "--report", str(d / "ulam.json")]) == 0
        assert cli.run(["lorenz", "--steps", "2000000", "--seed", "7",
                        "--report", str(d / "lorenz.json"), "--csv", str(d / "ovals.csv")]) == 0
        blobs.append([(d / f).read_bytes()
                      for f in ("density.bin", "ulam.json", "lorenz.json", "ovals.csv")])
    same = blobs[0] == blobs[1]
    assert report(9, same, time.perf_counter() - t0, 400, f"bit_identical={same}")
