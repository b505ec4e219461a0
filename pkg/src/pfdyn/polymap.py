"""Multivariate polynomial vector fields R^d -> R^m.

A :class:`PolyMap` stores each output component as a tuple of monomials in
canonical form: sorted by graded-lex order of the exponent vectors, no
duplicate exponents, no zero coefficients.  Instances are immutable.

Evaluation multiplies out powers by repeated multiplication in a fixed order,
so the compiled orbit kernels in :mod:`pfdyn._kernels` reproduce it
bit-for-bit.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

Powers = tuple[int, ...]


class DimensionError(ValueError):
    """Input vector or map has the wrong dimension."""


def _order_key(powers: Powers):
    return (sum(powers), powers)


@dataclass(frozen=True)
class Monomial:
    coef: complex | float
    powers: Powers

    def __post_init__(self):
        if len(self.powers) < 1:
            raise DimensionError("monomial needs at least one variable")
        if any(int(e) != e or e < 0 for e in self.powers):
            raise ValueError(f"powers must be non-negative integers: {self.powers}")
        if not np.isfinite(self.coef):
            raise ValueError(f"non-finite coefficient {self.coef!r}")
        object.__setattr__(self, "powers", tuple(int(e) for e in self.powers))

    @property
    def degree(self) -> int:
        return sum(self.powers)


def _canon(terms: dict[Powers, complex | float]) -> tuple[Monomial, ...]:
    out = []
    for p in sorted(terms, key=_order_key):
        c = terms[p]
        if c != 0:
            if isinstance(c, complex) and c.imag == 0:
                c = c.real
            out.append(Monomial(c, p))
    return tuple(out)


def _to_dict(mons: Iterable[Monomial]) -> dict[Powers, complex | float]:
    d: dict[Powers, complex | float] = {}
    for m in mons:
        d[m.powers] = d.get(m.powers, 0) + m.coef
    return d


def _poly_mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for a, ca in p.items():
        for b, cb in q.items():
            k = tuple(x + y for x, y in zip(a, b))
            out[k] = out.get(k, 0) + ca * cb
    return out


def _poly_add(p: dict, q: dict, scale=1.0) -> dict:
    out = dict(p)
    for k, c in q.items():
        out[k] = out.get(k, 0) + scale * c
    return out


@dataclass(frozen=True)
class PolyMap:
    """Vector of polynomials in ``dim_in`` variables with ``dim_out`` components."""

    dim_in: int
    components: tuple[tuple[Monomial, ...], ...]
    names: tuple[str, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.dim_in < 1:
            raise DimensionError("dim_in must be >= 1")
        comps = []
        for comp in self.components:
            for m in comp:
                if len(m.powers) != self.dim_in:
                    raise DimensionError(
                        f"monomial {m.powers} does not match dim_in={self.dim_in}")
            comps.append(_canon(_to_dict(comp)))
        object.__setattr__(self, "components", tuple(comps))

    # -- construction ----------------------------------------------------
    @classmethod
    def from_terms(cls, dim_in: int, components: Sequence[Iterable[tuple]],
                   names=None) -> "PolyMap":
        """Build from per-component lists of ``(coef, powers)`` pairs."""
        comps = [tuple(Monomial(c, tuple(p)) for c, p in comp) for comp in components]
        return cls(dim_in, tuple(comps), None if names is None else tuple(names))

    @classmethod
    def from_dicts(cls, dim_in: int, dicts: Sequence[dict], names=None) -> "PolyMap":
        comps = [tuple(Monomial(c, p) for p, c in d.items() if c != 0) for d in dicts]
        return cls(dim_in, tuple(comps), None if names is None else tuple(names))

    @classmethod
    def zero(cls, dim_in: int, dim_out: int) -> "PolyMap":
        return cls(dim_in, tuple(() for _ in range(dim_out)))

    @classmethod
    def identity(cls, d: int) -> "PolyMap":
        return cls.linear(np.eye(d))

    @classmethod
    def linear(cls, matrix, offset=None) -> "PolyMap":
        """The affine map ``a -> matrix @ a + offset``."""
        M = np.atleast_2d(np.asarray(matrix))
        m, d = M.shape
        dicts = []
        for i in range(m):
            row = {}
            for j in range(d):
                if M[i, j] != 0:
                    p = [0] * d
                    p[j] = 1
                    row[tuple(p)] = M[i, j].item()
            if offset is not None and offset[i] != 0:
                row[(0,) * d] = np.asarray(offset)[i].item()
            dicts.append(row)
        return cls.from_dicts(d, dicts)

    @classmethod
    def variable(cls, d: int, j: int) -> "PolyMap":
        p = [0] * d
        p[j] = 1
        return cls.from_dicts(d, [{tuple(p): 1.0}])

    @classmethod
    def constant(cls, d: int, values) -> "PolyMap":
        return cls.from_dicts(d, [{(0,) * d: v} for v in np.atleast_1d(values).tolist()])

    # -- basic properties --------------------------------------------------
    @property
    def dim_out(self) -> int:
        return len(self.components)

    @property
    def is_square(self) -> bool:
        return self.dim_in == self.dim_out

    @property
    def degree(self) -> int:
        return max((m.degree for comp in self.components for m in comp), default=0)

    @property
    def is_complex(self) -> bool:
        return any(isinstance(m.coef, complex) for c in self.components for m in c)

    def component(self, i: int) -> "PolyMap":
        return PolyMap(self.dim_in, (self.components[i],))

    def as_dicts(self) -> list[dict[Powers, complex | float]]:
        return [_to_dict(c) for c in self.components]

    def __repr__(self):
        names = self.names or tuple(f"x{j}" for j in range(self.dim_in))
        rows = []
        for comp in self.components:
            parts = []
            for m in comp:
                vs = "*".join(
                    n if e == 1 else f"{n}^{e}" for n, e in zip(names, m.powers) if e)
                parts.append(f"{m.coef!r}" + (f"*{vs}" if vs else ""))
            rows.append(" + ".join(parts) or "0")
        return f"PolyMap[{self.dim_in}->{self.dim_out}](" + "; ".join(rows) + ")"

    # -- arithmetic --------------------------------------------------------
    def _check_same_shape(self, other: "PolyMap"):
        if (self.dim_in, self.dim_out) != (other.dim_in, other.dim_out):
            raise DimensionError(
                f"shape mismatch {self.dim_in}->{self.dim_out} vs "
                f"{other.dim_in}->{other.dim_out}")

    def __add__(self, other: "PolyMap") -> "PolyMap":
        self._check_same_shape(other)
        return PolyMap.from_dicts(
            self.dim_in, [_poly_add(p, q) for p, q in zip(self.as_dicts(), other.as_dicts())],
            self.names)

    def __sub__(self, other: "PolyMap") -> "PolyMap":
        self._check_same_shape(other)
        return PolyMap.from_dicts(
            self.dim_in,
            [_poly_add(p, q, -1.0) for p, q in zip(self.as_dicts(), other.as_dicts())],
            self.names)

    def __neg__(self) -> "PolyMap":
        return self.scale(-1.0)

    def scale(self, factors) -> "PolyMap":
        """Multiply component i by ``factors[i]`` (or all by a scalar)."""
        f = np.broadcast_to(np.asarray(factors), (self.dim_out,))
        return PolyMap.from_dicts(
            self.dim_in,
            [{k: c * f[i].item() for k, c in d.items()} for i, d in enumerate(self.as_dicts())],
            self.names)

    def mul(self, other: "PolyMap") -> "PolyMap":
        """Componentwise product; a one-component factor broadcasts."""
        if self.dim_in != other.dim_in:
            raise DimensionError("dim_in mismatch")
        a, b = self.as_dicts(), other.as_dicts()
        if len(a) == 1 and len(b) > 1:
            a = a * len(b)
        if len(b) == 1 and len(a) > 1:
            b = b * len(a)
        if len(a) != len(b):
            raise DimensionError("dim_out mismatch")
        return PolyMap.from_dicts(self.dim_in, [_poly_mul(p, q) for p, q in zip(a, b)])

    def dot(self, y) -> "PolyMap":
        """The scalar polynomial ``sum_i y_i * self_i``."""
        y = np.asarray(y)
        if y.shape != (self.dim_out,):
            raise DimensionError(f"expected covector of length {self.dim_out}")
        acc: dict = {}
        for yi, d in zip(y.tolist(), self.as_dicts()):
            if yi != 0:
                acc = _poly_add(acc, d, yi)
        return PolyMap.from_dicts(self.dim_in, [acc])

    def stack(self, other: "PolyMap") -> "PolyMap":
        if self.dim_in != other.dim_in:
            raise DimensionError("dim_in mismatch")
        return PolyMap(self.dim_in, self.components + other.components)

    # -- evaluation --------------------------------------------------------
    def __call__(self, point):
        return evaluate(self, point)

    # -- calculus ----------------------------------------------------------
    def derivative(self, j: int) -> "PolyMap":
        """Partial derivative of every component with respect to variable j."""
        out = []
        for comp in self.components:
            d = {}
            for m in comp:
                e = m.powers[j]
                if e:
                    p = list(m.powers)
                    p[j] -= 1
                    d[tuple(p)] = d.get(tuple(p), 0) + e * m.coef
            out.append(d)
        return PolyMap.from_dicts(self.dim_in, out, self.names)

    def gradient(self) -> "PolyMap":
        """Gradient of a scalar map as a dim_in -> dim_in map."""
        if self.dim_out != 1:
            raise DimensionError("gradient needs a scalar map")
        comps = tuple(self.derivative(j).components[0] for j in range(self.dim_in))
        return PolyMap(self.dim_in, comps, self.names)

    # -- substitution ------------------------------------------------------
    def substitute(self, inner: "PolyMap") -> "PolyMap":
        """Composition ``a -> self(inner(a))``."""
        if inner.dim_out != self.dim_in:
            raise DimensionError(
                f"inner map has {inner.dim_out} outputs, need {self.dim_in}")
        inner_d = inner.as_dicts()
        one = {(0,) * inner.dim_in: 1.0}
        cache: dict[tuple[int, int], dict] = {}

        def power(j: int, e: int) -> dict:
            if e == 0:
                return one
            key = (j, e)
            if key not in cache:
                cache[key] = _poly_mul(power(j, e - 1), inner_d[j])
            return cache[key]

        out = []
        for comp in self.components:
            acc: dict = {}
            for m in comp:
                term = {k: v * m.coef for k, v in one.items()}
                for j, e in enumerate(m.powers):
                    if e:
                        term = _poly_mul(term, power(j, e))
                acc = _poly_add(acc, term)
            out.append(acc)
        return PolyMap.from_dicts(inner.dim_in, out)

    def linear_substitute(self, matrix, offset=None) -> "PolyMap":
        """``a -> self(matrix @ a + offset)``."""
        return self.substitute(PolyMap.linear(matrix, offset))

    def restrict_degree(self, lo: int = 0, hi: int | None = None) -> "PolyMap":
        """Keep only monomials whose total degree lies in [lo, hi]."""
        hi = math.inf if hi is None else hi
        comps = tuple(tuple(m for m in c if lo <= m.degree <= hi) for c in self.components)
        return PolyMap(self.dim_in, comps, self.names)

    def max_degree_in(self, block: Sequence[int]) -> int:
        return max((sum(m.powers[j] for j in block) for c in self.components for m in c),
                   default=0)


def _check_point(map: PolyMap, x: np.ndarray):
    if x.shape[-1] != map.dim_in:
        raise DimensionError(f"point has length {x.shape[-1]}, map expects {map.dim_in}")


def evaluate(map: PolyMap, point) -> np.ndarray:
    """Evaluate at a point (shape (d,)) or a batch of points (shape (N, d)).

    Products are formed left to right by repeated multiplication and the
    monomials are summed in canonical order.
    """
    x = np.asarray(point)
    if x.dtype.kind not in "fc":
        x = x.astype(float)
    _check_point(map, x)
    dtype = np.result_type(x.dtype, complex if map.is_complex else float)
    out = np.zeros(x.shape[:-1] + (map.dim_out,), dtype=dtype)
    xs = [x[..., j] for j in range(map.dim_in)]
    for i, comp in enumerate(map.components):
        acc = np.zeros(x.shape[:-1], dtype=dtype)
        for m in comp:
            term = np.full(x.shape[:-1], m.coef, dtype=dtype)
            for j, e in enumerate(m.powers):
                for _ in range(e):
                    term = term * xs[j]
            acc = acc + term
        out[..., i] = acc
    return out


def jacobian(map: PolyMap) -> list[list[PolyMap]]:
    """Matrix of scalar PolyMaps ``J[i][j] = d map_i / d a_j``."""
    derivs = [map.derivative(j) for j in range(map.dim_in)]
    return [[derivs[j].component(i) for j in range(map.dim_in)] for i in range(map.dim_out)]


def jacobian_map(map: PolyMap) -> PolyMap:
    """Jacobian flattened row-major into a single PolyMap with m*d outputs."""
    derivs = [map.derivative(j) for j in range(map.dim_in)]
    comps = tuple(derivs[j].components[i]
                  for i in range(map.dim_out) for j in range(map.dim_in))
    return PolyMap(map.dim_in, comps)


def jacobian_at(map: PolyMap, point) -> np.ndarray:
    x = np.asarray(point)
    vals = evaluate(jacobian_map(map), x)
    return vals.reshape(x.shape[:-1] + (map.dim_out, map.dim_in))


def translate(map: PolyMap, alpha) -> PolyMap:
    """The conjugated map ``a -> map(a + alpha) - alpha``."""
    if not map.is_square:
        raise DimensionError("translate needs a square map")
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (map.dim_in,):
        raise DimensionError(f"alpha must have length {map.dim_in}")
    shifted = map.linear_substitute(np.eye(map.dim_in), alpha)
    return shifted - PolyMap.constant(map.dim_in, alpha)


# -- partial linearity -----------------------------------------------------

@dataclass(frozen=True)
class PartialLinearDecomposition:
    """``F = linear @ (a, b) + (A(a)b + B(a), C(a)b + D(a))``.

    ``a_block`` holds the coordinates F may be nonlinear in; F is affine in
    the complementary ``b_block`` with polynomial coefficients in ``a``.
    ``A`` and ``C`` are the bilinear cross parts (degree >= 1 in a, exactly
    one b factor), ``B`` and ``D`` the pure-a parts of degree >= 2.  All four
    are stored as maps over the full coordinate vector.  ``lam`` and
    ``lam_prime`` are the diagonal of ``linear`` on the two blocks;
    ``diagonal`` records whether ``linear`` has no other entries.
    """

    dim: int
    a_block: tuple[int, ...]
    b_block: tuple[int, ...]
    linear: np.ndarray
    A: PolyMap
    B: PolyMap
    C: PolyMap
    D: PolyMap

    @property
    def p(self) -> int:
        return len(self.a_block)

    @property
    def lam(self) -> np.ndarray:
        return np.array([self.linear[i, i] for i in self.a_block])

    @property
    def lam_prime(self) -> np.ndarray:
        return np.array([self.linear[i, i] for i in self.b_block])

    @property
    def diagonal(self) -> bool:
        off = self.linear - np.diag(np.diag(self.linear))
        return not np.any(off)

    def recompose(self) -> PolyMap:
        lin = PolyMap.linear(self.linear)
        dicts = [dict() for _ in range(self.dim)]
        for rows, parts in ((self.a_block, (self.A, self.B)), (self.b_block, (self.C, self.D))):
            for part in parts:
                for k, i in enumerate(rows):
                    dicts[i] = _poly_add(dicts[i], part.as_dicts()[k])
        return lin + PolyMap.from_dicts(self.dim, dicts)

    def coupling(self) -> PolyMap:
        """Every term of the a-equations that is linear in b.

        This is the full coefficient of b in the a-rows, i.e. the off-diagonal
        linear block plus ``A(a)b``; the asymptotic iteration moves the a
        coordinates by exactly this term.
        """
        dicts = []
        for k, i in enumerate(self.a_block):
            row = dict(self.A.as_dicts()[k])
            for j in self.b_block:
                if self.linear[i, j] != 0:
                    p = [0] * self.dim
                    p[j] = 1
                    row[tuple(p)] = row.get(tuple(p), 0) + self.linear[i, j].item()
            dicts.append(row)
        return PolyMap.from_dicts(self.dim, dicts)


def decompose_partial_linear(map: PolyMap, a_block: Sequence[int],
                             strict: bool = False) -> PartialLinearDecomposition | None:
    """Split ``map`` into the partially linear template for the given a-block.

    Returns None when some term has degree >= 2 in the b-block, when a
    constant term is present, or when there is no b-block at all.  With
    ``strict=True`` the linear part must also be diagonal.
    """
    if not map.is_square:
        raise DimensionError("decomposition needs a square map")
    d = map.dim_in
    a_block = tuple(sorted(set(int(i) for i in a_block)))
    if any(i < 0 or i >= d for i in a_block):
        raise DimensionError(f"block indices out of range for d={d}")
    b_block = tuple(j for j in range(d) if j not in a_block)
    if not b_block or not a_block:
        return None
    in_a = np.zeros(d, dtype=bool)
    in_a[list(a_block)] = True

    linear = np.zeros((d, d))
    cross: list[dict] = [dict() for _ in range(d)]
    pure: list[dict] = [dict() for _ in range(d)]
    for i, comp in enumerate(map.components):
        for m in comp:
            pw = np.asarray(m.powers)
            deg_a = int(pw[in_a].sum())
            deg_b = int(pw[~in_a].sum())
            if deg_b > 1 or m.degree == 0:
                return None
            if m.degree == 1:
                if isinstance(m.coef, complex):
                    return None
                linear[i, int(np.argmax(pw))] = m.coef
            elif deg_b == 1:
                cross[i][m.powers] = m.coef
            else:
                assert deg_a >= 2
                pure[i][m.powers] = m.coef
    dec = PartialLinearDecomposition(
        dim=d, a_block=a_block, b_block=b_block, linear=linear,
        A=PolyMap.from_dicts(d, [cross[i] for i in a_block]),
        B=PolyMap.from_dicts(d, [pure[i] for i in a_block]),
        C=PolyMap.from_dicts(d, [cross[i] for i in b_block]),
        D=PolyMap.from_dicts(d, [pure[i] for i in b_block]),
    )
    if strict and not dec.diagonal:
        return None
    return dec


def search_partial_linear(map: PolyMap, strict: bool = False,
                          max_dim: int = 12) -> list[PartialLinearDecomposition]:
    """All proper a-block splits (2^d - 2 of them) that admit a decomposition."""
    d = map.dim_in
    if d > max_dim:
        raise ValueError(f"split search limited to d <= {max_dim}")
    found = []
    for size in range(1, d):
        for block in itertools.combinations(range(d), size):
            dec = decompose_partial_linear(map, block, strict=strict)
            if dec is not None:
                found.append(dec)
    return found
