"""Zeros of a polynomial field, their spectra, and attractivity under the iteration."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .difiter import Box
from .polymap import DimensionError, PolyMap, evaluate, jacobian_at, jacobian_map

NEWTON_MAX_ITER = 100
NEWTON_TOL = 1e-13
DEDUP_TOL = 1e-8
RESIDUAL_TOL = 1e-12

ATTRACTIVE, REPULSIVE, MIXED, MARGINAL = "attractive", "repulsive", "mixed", "marginal"


@dataclass
class Equilibrium:
    location: np.ndarray
    residual: float
    eigenvalues: np.ndarray
    delta: float | None = None
    possibly_non_isolated: bool = False

    @property
    def multipliers(self) -> np.ndarray | None:
        if self.delta is None:
            return None
        return 1 + self.delta * self.eigenvalues

    @property
    def classification(self) -> str | None:
        return None if self.delta is None else classify(self, self.delta)


@dataclass
class ZeroSearch:
    equilibria: list[Equilibrium]
    abandoned_singular: int = 0
    not_converged: int = 0
    starts: int = 0
    diagnostics: list[str] = field(default_factory=list)


def spectrum(field: PolyMap, at) -> np.ndarray:
    """Eigenvalues of the Jacobian at a point, sorted by (real, imag)."""
    J = jacobian_at(field, np.asarray(at, dtype=float))
    ev = np.linalg.eigvals(J)
    return ev[np.lexsort((ev.imag, ev.real))]


def _newton_batch(field: PolyMap, X: np.ndarray):
    """Damped Newton on all rows of X at once.

    Returns (X, converged, singular).  A step that increases ||F|| is halved
    (up to 30 times) before being accepted.
    """
    jac = jacobian_map(field)
    d = field.dim_in
    n = X.shape[0]
    active = np.ones(n, dtype=bool)
    singular = np.zeros(n, dtype=bool)
    converged = np.zeros(n, dtype=bool)
    F = evaluate(field, X)
    norm = np.linalg.norm(F, axis=1)
    for _ in range(NEWTON_MAX_ITER):
        converged |= active & (norm < NEWTON_TOL)
        active &= ~converged
        if not active.any():
            break
        idx = np.flatnonzero(active)
        J = evaluate(jac, X[idx]).reshape(-1, d, d)
        cond_ok = np.isfinite(J).all(axis=(1, 2))
        dets = np.abs(np.linalg.det(np.where(cond_ok[:, None, None], J, np.eye(d))))
        scale = np.maximum(np.abs(J).max(axis=(1, 2)), 1e-300) ** d
        sing = (~cond_ok) | (dets <= 1e-14 * scale)
        singular[idx[sing]] = True
        active[idx[sing]] = False
        idx = idx[~sing]
        if idx.size == 0:
            break
        dx = np.linalg.solve(J[~sing], -F[idx][..., None])[..., 0]
        t = np.ones(idx.size)
        Xn = X[idx] + dx
        Fn = evaluate(field, Xn)
        nn = np.linalg.norm(Fn, axis=1)
        for _ in range(30):
            worse = ~(nn <= norm[idx])
            if not worse.any():
                break
            t[worse] *= 0.5
            Xn[worse] = X[idx[worse]] + t[worse, None] * dx[worse]
            Fn[worse] = evaluate(field, Xn[worse])
            nn[worse] = np.linalg.norm(Fn[worse], axis=1)
        stalled = np.all(Xn == X[idx], axis=1)
        X[idx], F[idx], norm[idx] = Xn, Fn, nn
        # a stalled iterate at machine precision still counts if the residual is tiny
        done = stalled & (nn < RESIDUAL_TOL)
        converged[idx[done]] = True
        active[idx[stalled]] = False
    converged |= norm < NEWTON_TOL
    return X, converged | (norm < RESIDUAL_TOL), singular


def find_zeros_report(field: PolyMap, box: Box, grid_density: int = 8,
                      delta: float | None = None) -> ZeroSearch:
    if not field.is_square:
        raise DimensionError("find_zeros needs a square field")
    if box.dim != field.dim_in:
        raise DimensionError("box dimension does not match the field")
    axes = [np.linspace(lo, hi, grid_density) for lo, hi in zip(box.lo, box.hi)]
    starts = np.array(list(itertools.product(*axes)), dtype=float)
    X, ok, singular = _newton_batch(field, starts.copy())
    cand = X[ok]
    # independent re-check of the residual, then deterministic dedup in lex order
    res = np.linalg.norm(evaluate(field, cand), axis=1) if len(cand) else np.zeros(0)
    cand, res = cand[res < RESIDUAL_TOL], res[res < RESIDUAL_TOL]
    order = np.lexsort(cand.T[::-1]) if len(cand) else np.zeros(0, dtype=int)
    cand, res = cand[order], res[order]
    clusters: list[list[int]] = []
    for i, x in enumerate(cand):
        for cl in clusters:
            if np.linalg.norm(cand[cl[0]] - x) < DEDUP_TOL:
                cl.append(i)
                break
        else:
            clusters.append([i])
    eqs = []
    for cl in clusters:
        best = cl[int(np.argmin(res[cl]))]
        spread = max(np.linalg.norm(cand[i] - cand[best]) for i in cl)
        loc = cand[best]
        eqs.append(Equilibrium(loc, float(res[best]), spectrum(field, loc), delta,
                               possibly_non_isolated=spread > 1e-10))
    eqs.sort(key=lambda e: tuple(e.location))
    diags = []
    if singular.any():
        diags.append(f"{int(singular.sum())} starts abandoned at a singular Jacobian")
    return ZeroSearch(eqs, int(singular.sum()), int((~ok & ~singular).sum()), len(starts), diags)


def find_zeros(field: PolyMap, box: Box, grid_density: int = 8,
               delta: float | None = None) -> list[Equilibrium]:
    """Real zeros of ``field`` reached by Newton from a grid of starts in ``box``.

    Converged points closer than 1e-8 are merged (and flagged as possibly
    non-isolated when the merged points are not numerically identical).
    Every returned zero has ||F|| < 1e-12, sorted lexicographically.
    """
    return find_zeros_report(field, box, grid_density, delta).equilibria


def equilibrium_at(field: PolyMap, location, delta: float | None = None) -> Equilibrium:
    loc = np.asarray(location, dtype=float)
    res = float(np.linalg.norm(evaluate(field, loc)))
    return Equilibrium(loc, res, spectrum(field, loc), delta)


def classify(eq: Equilibrium | np.ndarray, delta: float) -> str:
    """Classify a zero of F as a fixed point of a + delta F(a).

    attractive if every multiplier |1 + delta lambda| < 1, repulsive if every
    one exceeds 1, marginal if some multiplier sits on the unit circle, mixed
    otherwise.
    """
    lam = eq.eigenvalues if isinstance(eq, Equilibrium) else np.asarray(eq)
    mod = np.abs(1 + delta * lam)
    if np.all(mod < 1):
        return ATTRACTIVE
    if np.all(mod > 1):
        return REPULSIVE
    if np.any(mod == 1) or np.any(lam == 0):
        return MARGINAL
    return MIXED


@dataclass
class FaultReport:
    lambda_tau: np.ndarray
    block_of_eigenvalue: np.ndarray
    aggregate: float
    on_fault: bool
    fault_eigenvalues: list[int]
    fault_directions: list[np.ndarray]
    signs: np.ndarray
    verdict: str


def _eigen_blocks(field: PolyMap | None, eq: Equilibrium, blocks) -> np.ndarray:
    """Block of each eigenvalue: the block holding the largest eigenvector entry."""
    if blocks is None or field is None:
        return np.zeros(len(eq.eigenvalues), dtype=int)
    blocks = np.asarray(blocks)
    J = jacobian_at(field, eq.location)
    ev, vec = np.linalg.eig(J)
    out = np.empty(len(eq.eigenvalues), dtype=int)
    for k, lam in enumerate(eq.eigenvalues):
        j = int(np.argmin(np.abs(ev - lam)))
        out[k] = blocks[int(np.argmax(np.abs(vec[:, j])))]
    return out


def lemma1_analysis(eq: Equilibrium, tau=(1.0,), field: PolyMap | None = None,
                    blocks=None, tol: float = 1e-9) -> FaultReport:
    """Sign analysis of lambda*tau at a zero.

    Real parts of the eigenvalues are weighted by tau of the block each one
    belongs to.  The aggregate sum decides between the invariant
    distribution (positive) and the fixed point (negative); an aggregate
    within ``tol`` of zero is a fault.  For several blocks the report also
    lists the points of the tau-simplex edges where the aggregate vanishes.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau < 0) or abs(tau.sum() - 1) > 1e-12:
        raise ValueError("tau must be non-negative and sum to 1")
    blk = _eigen_blocks(field, eq, blocks)
    re = eq.eigenvalues.real
    lt = re * tau[blk]
    agg = float(lt.sum())
    fault_eigs = [int(k) for k in np.flatnonzero(np.abs(lt) < tol)]
    per_block = np.array([re[blk == i].sum() for i in range(tau.size)])
    dirs = []
    for i, j in itertools.combinations(range(tau.size), 2):
        a, b = per_block[i], per_block[j]
        if a == b:
            continue
        s = b / (b - a)              # s*a + (1-s)*b = 0
        if 0 <= s <= 1:
            t = np.zeros(tau.size)
            t[i], t[j] = s, 1 - s
            dirs.append(t)
    on_fault = abs(agg) < tol
    signs = np.sign(np.where(np.abs(lt) < tol, 0.0, lt))
    if on_fault:
        verdict = "fault"
    elif agg > 0:
        verdict = "invariant distribution dominates"
    else:
        verdict = "fixed point dominates"
    if np.any(signs > 0) and np.any(signs < 0):
        verdict += " (mixed signs)"
    return FaultReport(lt, blk, agg, on_fault, fault_eigs, dirs, signs, verdict)


def _faddeev_leverrier(J: np.ndarray) -> np.ndarray:
    """Coefficients of det(lambda I - J), highest power first."""
    d = J.shape[0]
    c = np.zeros(d + 1, dtype=J.dtype)
    c[0] = 1
    M = np.zeros_like(J)
    I = np.eye(d, dtype=J.dtype)
    for k in range(1, d + 1):
        M = J @ M + c[k - 1] * I
        c[k] = -np.trace(J @ M) / k
    return c


def characteristic_polynomial(field: PolyMap, at) -> np.ndarray:
    """Coefficients of det(J(at) - lambda I) in powers of lambda, highest first.

    Uses exact Faddeev-LeVerrier expansion for d <= 4 and the product of
    eigenvalue factors beyond.
    """
    loc = at.location if isinstance(at, Equilibrium) else np.asarray(at, dtype=float)
    J = jacobian_at(field, loc)
    d = J.shape[0]
    if d <= 4:
        coeffs = _faddeev_leverrier(J)
    else:
        coeffs = np.real_if_close(np.poly(np.linalg.eigvals(J)))
    return (-1) ** d * coeffs
