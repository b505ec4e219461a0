"""Plancherel-Rotach functional gamma(a) = y . f(a) - n . log a.

Critical points, Hessian structure, the asymptotic iterations G and G_alpha
of a partially linear field, the dominance term between two zeros, and the
resolvent gap computed by brute-force power series.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import sympy

from . import series
from .difiter import DifferentialIteration
from .polymap import (DimensionError, PartialLinearDecomposition, PolyMap, evaluate,
                      jacobian_map, translate)

DEGENERACY_RTOL = 1e-9


@dataclass(frozen=True)
class PlancherelRotach:
    """gamma(a) = y . f(a) - sum_l n_l log a_l for a map f: R^d -> R^d."""

    f: PolyMap
    y: np.ndarray
    n: tuple[int, ...]

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y))
        n = tuple(int(k) for k in np.atleast_1d(self.n))
        if y.shape != (self.f.dim_out,):
            raise DimensionError(f"y must have length {self.f.dim_out}")
        if len(n) != self.f.dim_in:
            raise DimensionError(f"n must have length {self.f.dim_in}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "n", n)

    @classmethod
    def from_iteration(cls, it: DifferentialIteration, y, n) -> "PlancherelRotach":
        return cls(it.as_map(), y, n)

    @property
    def dim(self) -> int:
        return self.f.dim_in

    def exponent(self) -> PolyMap:
        """The polynomial part y . f."""
        return self.f.dot(self.y)

    def value(self, a) -> complex:
        a = np.asarray(a, dtype=complex)
        return complex(evaluate(self.exponent(), a)[0] - np.dot(self.n, np.log(a)))

    def gradient(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=complex)
        return evaluate(self.exponent().gradient(), a) - np.asarray(self.n) / a

    def hessian(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=complex)
        H = evaluate(jacobian_map(self.exponent().gradient()), a).reshape(self.dim, self.dim)
        return H + np.diag(np.asarray(self.n) / a**2)

    def critical_system(self) -> PolyMap:
        """a_l * d gamma / d a_l = a_l * d(y.f)/da_l - n_l, a polynomial system."""
        d = self.dim
        grad = self.exponent().gradient()
        rows = []
        for l in range(d):
            row = {}
            for m in grad.components[l]:
                p = list(m.powers)
                p[l] += 1
                row[tuple(p)] = row.get(tuple(p), 0) + m.coef
            row[(0,) * d] = row.get((0,) * d, 0) - self.n[l]
            rows.append(row)
        return PolyMap.from_dicts(d, rows)


@dataclass
class CriticalPoint:
    location: np.ndarray
    gradient_residual: float
    hessian: np.ndarray
    hessian_eigenvalues: np.ndarray
    degenerate: bool


@dataclass
class CriticalSearch:
    points: list[CriticalPoint]
    starts: int
    converged: int
    diagnostics: list[str]


def _is_degenerate(eigs: np.ndarray, rtol: float = DEGENERACY_RTOL) -> bool:
    mags = np.abs(eigs)
    top = mags.max() if mags.size else 0.0
    return bool(top == 0 or mags.min() < rtol * top)


def critical_points_report(pr: PlancherelRotach, starts: int = 64, seed: int = 0,
                           tol: float = 1e-12, max_iter: int = 200) -> CriticalSearch:
    if any(k < 1 for k in pr.n):
        raise ValueError("all n_l must be >= 1")
    d = pr.dim
    g = pr.critical_system()
    jg = jacobian_map(g)
    radius = 2 * max(k / abs(v) if v != 0 else 1.0 for k, v in zip(pr.n, pr.y))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0xC0])))
    r = radius * np.sqrt(rng.random((starts, d)))
    X = r * np.exp(2j * np.pi * rng.random((starts, d)))
    ok = np.zeros(starts, dtype=bool)
    for _ in range(max_iter):
        G = evaluate(g, X)
        nrm = np.linalg.norm(G, axis=1)
        ok = nrm < tol * max(1.0, max(pr.n))
        if ok.all():
            break
        J = evaluate(jg, X).reshape(-1, d, d)
        good = np.abs(np.linalg.det(J)) > 1e-300
        act = ~ok & good
        if not act.any():
            break
        X[act] = X[act] - np.linalg.solve(J[act], G[act][..., None])[..., 0]
        X[~np.isfinite(X).all(axis=1)] = np.nan
    G = evaluate(g, X)
    ok = np.isfinite(X).all(axis=1) & (np.linalg.norm(G, axis=1) < 1e-9 * max(1.0, max(pr.n)))
    found: list[np.ndarray] = []
    for x in X[ok]:
        if not any(np.linalg.norm(x - z) < 1e-8 * max(1.0, np.linalg.norm(z)) for z in found):
            found.append(x)
    found.sort(key=lambda z: tuple(np.round(np.c_[z.real, z.imag].ravel(), 10)))
    pts = []
    for z in found:
        H = pr.hessian(z)
        eigs = np.linalg.eigvals(H)
        res = float(np.linalg.norm(pr.gradient(z)))
        pts.append(CriticalPoint(z, res, H, eigs, _is_degenerate(eigs)))
    diags = [] if pts else ["no start converged"]
    return CriticalSearch(pts, starts, int(ok.sum()), diags)


def critical_points(pr: PlancherelRotach, starts: int = 64, seed: int = 0,
                    tol: float = 1e-12, max_iter: int = 200) -> list[CriticalPoint]:
    """Complex critical points of gamma from seeded random starts.

    Newton runs on the pole-free system a_l d gamma/d a_l = 0, starting in
    the polydisk of radius 2 max(n_l / |y_l|).  Converged points are merged
    within a relative distance of 1e-8.
    """
    return critical_points_report(pr, starts, seed, tol, max_iter).points


@dataclass
class HessianReport:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    degenerate: bool
    constant: bool
    symbolic_rank: int | None


def hessian_yF(field: PolyMap, y, at) -> HessianReport:
    """Hessian of the scalar y . F at a point, with its eigen-decomposition.

    When the Hessian does not depend on the point (F of degree <= 2) its rank
    is also computed exactly from the rational values of the coefficients.
    """
    y = np.asarray(y)
    yF = field.dot(y)
    hmap = jacobian_map(yF.gradient())
    d = field.dim_in
    at = np.asarray(at, dtype=complex if np.iscomplexobj(y) else float)
    H = evaluate(hmap, at).reshape(d, d)
    H = 0.5 * (H + H.T)
    if np.iscomplexobj(H):
        eigs, vecs = np.linalg.eig(H)
    else:
        eigs, vecs = np.linalg.eigh(H)
    constant = hmap.degree == 0
    rank = None
    if constant and not hmap.is_complex:
        entries = evaluate(hmap, np.zeros(d)).reshape(d, d)
        M = sympy.Matrix(d, d, [sympy.Rational(Fraction(float(v))) for v in entries.ravel()])
        rank = int(M.rank())
    degenerate = _is_degenerate(eigs) if rank is None else rank < d
    return HessianReport(H, eigs, vecs, degenerate, constant, rank)


# -- asymptotic iterations ---------------------------------------------------

def asymptotic_iteration(dec: PartialLinearDecomposition, tau=1.0, alpha=None) -> PolyMap:
    """G(a, b) = (a + tau C(a, b), b), or G_alpha(u, v) = (u + tau C(u + alpha_a, v), v).

    C is the coupling of the decomposition: every term of the a-equations
    linear in the b-block.  This is the small-step limit of the iteration
    after rescaling the b-block by |t|/n.
    """
    d = dec.dim
    coupling = dec.coupling()
    if alpha is not None:
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape != (d,):
            raise DimensionError(f"alpha must have length {d}")
        shift = np.zeros(d)
        shift[list(dec.a_block)] = alpha[list(dec.a_block)]
        coupling = coupling.linear_substitute(np.eye(d), shift)
    tau = np.broadcast_to(np.asarray(tau, dtype=float), (len(dec.a_block),))
    coupling = coupling.scale(tau)
    rows = PolyMap.identity(d).as_dicts()
    cd = coupling.as_dicts()
    for k, i in enumerate(dec.a_block):
        for p, c in cd[k].items():
            rows[i][p] = rows[i].get(p, 0) + c
    return PolyMap.from_dicts(d, rows)


def conjugate_to_origin(G_alpha: PolyMap, alpha) -> PolyMap:
    """x -> G_alpha(x - alpha) + alpha: the alpha-iteration seen from the origin."""
    return translate(G_alpha, -np.asarray(alpha, dtype=float))


@dataclass
class DominanceReport:
    values: np.ndarray
    signs: np.ndarray
    communication: np.ndarray


def dominance_term(dec: PartialLinearDecomposition, alpha, y, tau=1.0) -> PolyMap:
    """The scalar x . tau C(a, beta): gamma(G) minus gamma(conjugated G_alpha).

    x is y restricted to the a-block and beta the b-block part of alpha.
    """
    d = dec.dim
    alpha = np.asarray(alpha, dtype=float)
    y = np.asarray(y)
    fix_b = np.eye(d)
    shift = np.zeros(d)
    for j in dec.b_block:
        fix_b[j, j] = 0.0
        shift[j] = alpha[j]
    tau = np.broadcast_to(np.asarray(tau, dtype=float), (len(dec.a_block),))
    c = dec.coupling().linear_substitute(fix_b, shift).scale(tau)
    return c.dot(y[list(dec.a_block)])


def dominance(dec: PartialLinearDecomposition, alpha, y, points, tau=1.0,
              rtol: float = 1e-9) -> DominanceReport:
    """Sign of Re(x tau C(a) beta) at the given points.

    Positive favours the distribution at the origin, negative the one at
    alpha; points where the term vanishes (relative to its largest sampled
    magnitude) sample the communication surface.
    """
    term = dominance_term(dec, alpha, y, tau)
    pts = np.atleast_2d(np.asarray(points))
    vals = np.real(evaluate(term, pts)[:, 0])
    scale = np.max(np.abs(vals)) if vals.size else 0.0
    zero = np.abs(vals) <= rtol * scale if scale > 0 else np.ones(vals.shape, dtype=bool)
    signs = np.where(zero, 0.0, np.sign(vals))
    return DominanceReport(vals, signs, pts[zero])


# -- resolvent gap -----------------------------------------------------------

@dataclass(frozen=True)
class SeriesDerivative:
    multi_index: tuple[int, ...]
    value: complex | float


def series_exp_derivative(P: PolyMap, y=None, n=0, cap: int = series.DEFAULT_CAP
                          ) -> SeriesDerivative:
    """d^n exp(y . P(a)) / da^n at 0 via truncated power series.

    A scalar P is used as is (multiplied by a scalar y if one is given).
    """
    if P.dim_out == 1:
        scalar = P if y is None else P.scale(np.atleast_1d(y)[0])
    else:
        if y is None:
            raise ValueError("a vector map needs a covector y")
        scalar = P.dot(y)
    n = tuple(int(k) for k in np.atleast_1d(n))
    if len(n) == 1 and scalar.dim_in > 1:
        raise DimensionError("multi-index length must match the number of variables")
    return SeriesDerivative(n, series.exp_derivative(scalar, n, cap))


@dataclass(frozen=True)
class ResolventGap:
    gap: complex | float
    pure: complex | float
    series: complex | float

    @property
    def relative(self) -> float:
        return abs(self.gap) / abs(self.pure) if self.pure != 0 else float("inf")


def resolvent_gap(pr: PlancherelRotach, basis=None, cap: int = series.DEFAULT_CAP
                  ) -> ResolventGap:
    """d^n [exp(y . a) - exp(y . f(a))] at 0, i.e. y^n - H_n(y).

    With ``basis`` (a d x d matrix B) the derivative is taken in the
    coordinates u with a = B u; the pure-power term becomes (B^T y)^n.
    """
    f = pr.f
    y = pr.y
    if basis is not None:
        B = np.asarray(basis, dtype=float)
        f = f.linear_substitute(B)
        ylin = B.T @ y
    else:
        ylin = y
    pure = np.prod(ylin.astype(complex) ** np.asarray(pr.n))
    pure = pure.real if np.isrealobj(ylin) else pure
    H = series_exp_derivative(f, y, pr.n, cap).value
    return ResolventGap(pure - H, pure.item() if hasattr(pure, "item") else pure, H)
