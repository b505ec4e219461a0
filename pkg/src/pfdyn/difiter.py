"""The differential iteration f(a, delta) = a + delta * F(a).

Each coordinate l of the state belongs to a time-variable block i (for an
ODE there is a single block); coordinate l is stepped with delta[blocks[l]].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .polymap import DimensionError, PolyMap, evaluate

OVERFLOW_THRESHOLD = _kernels.OVERFLOW


class OrbitOverflow(ArithmeticError):
    """The orbit left the representable range."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"orbit diverged at step {step}")


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionError("box bounds must be 1-D arrays of equal length")
        if not np.all(hi > lo):
            raise ValueError("degenerate box: need hi > lo on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def contains(self, X) -> np.ndarray:
        X = np.asarray(X)
        return np.all((X >= self.lo) & (X <= self.hi), axis=-1)

    @classmethod
    def parse(cls, text: str) -> "Box":
        """Parse ``"lo,hi;lo,hi;..."``."""
        try:
            pairs = [tuple(float(v) for v in part.split(",")) for part in text.split(";")]
        except ValueError as exc:
            raise ValueError(f"cannot parse box {text!r}") from exc
        if any(len(p) != 2 for p in pairs):
            raise ValueError(f"cannot parse box {text!r}")
        return cls(np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]))


@dataclass(frozen=True)
class DifferentialIteration:
    field: PolyMap
    delta: np.ndarray
    blocks: tuple[int, ...] | None = None
    tau: np.ndarray | None = None
    delta_max: float = 1.0

    def __post_init__(self):
        if not self.field.is_square:
            raise DimensionError("the field of a differential iteration must be square")
        delta = np.atleast_1d(np.asarray(self.delta, dtype=float))
        d = self.field.dim_in
        blocks = self.blocks if self.blocks is not None else (0,) * d
        blocks = tuple(int(b) for b in blocks)
        if len(blocks) != d:
            raise DimensionError(f"blocks must assign all {d} coordinates")
        if max(blocks) >= delta.shape[0] or min(blocks) < 0:
            raise DimensionError("block index outside the delta vector")
        if not np.all((delta > 0) & (delta <= self.delta_max)):
            raise ValueError(f"delta components must lie in (0, {self.delta_max}]")
        tau = self.tau
        if tau is None:
            tau = delta / delta.sum()
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        if tau.shape != delta.shape or np.any(tau < 0) or abs(tau.sum() - 1.0) > 1e-12:
            raise ValueError("tau must be non-negative, sum to 1, and match delta")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "tau", tau)

    @classmethod
    def from_time(cls, field: PolyMap, t, n: int, blocks=None) -> "DifferentialIteration":
        """delta_i = t_i / n with direction tau = t / |t|."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return cls(field, t / n, blocks, t / t.sum(), delta_max=float(np.max(t / n)))

    @property
    def dim(self) -> int:
        return self.field.dim_in

    @property
    def delta_vector(self) -> np.ndarray:
        """Per-coordinate step, delta[blocks[l]]."""
        return self.delta[list(self.blocks)]

    def as_map(self) -> PolyMap:
        """f(a) = a + delta * F(a) as a PolyMap."""
        return PolyMap.identity(self.dim) + self.field.scale(self.delta_vector)

    def _flat(self):
        if not hasattr(self, "_flat_cache"):
            object.__setattr__(self, "_flat_cache", _kernels.flatten(self.field))
        return self._flat_cache


def step(it: DifferentialIteration, a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape[-1] != it.dim:
        raise DimensionError(f"state has length {a.shape[-1]}, expected {it.dim}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = a + it.delta_vector * evaluate(it.field, a)
    if not np.all(np.isfinite(out)):
        raise OrbitOverflow(1, "step produced a non-finite state")
    return out


@dataclass(frozen=True)
class Orbit:
    """Retained part of a trajectory.

    ``points[0]`` is the state after ``offset`` steps from ``start``
    (``offset`` is the burn-in; with no burn-in ``points[0] == start``).
    """

    points: np.ndarray
    delta_used: np.ndarray
    start: np.ndarray
    offset: int = 0

    def __len__(self):
        return self.points.shape[0]


def orbit(it: DifferentialIteration, start, n_steps: int, burn_in: int | None = None,
          threshold: float = OVERFLOW_THRESHOLD) -> Orbit:
    """Iterate ``n_steps`` times; keep the states from step ``burn_in`` on.

    ``burn_in`` defaults to 10% of ``n_steps``.  Raises OrbitOverflow with
    the failing step index when a coordinate exceeds ``threshold``.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if burn_in is None:
        burn_in = n_steps // 10
    if not 0 <= burn_in <= n_steps:
        raise ValueError("burn_in must lie in [0, n_steps]")
    start = np.asarray(start, dtype=float)
    if start.shape != (it.dim,):
        raise DimensionError(f"start must have length {it.dim}")
    coefs, powers, offsets = it._flat()
    pts, fail = _kernels.orbit_kernel(coefs, powers, offsets, it.delta_vector, start,
                                      int(n_steps), int(burn_in), float(threshold))
    if fail >= 0:
        raise OrbitOverflow(int(fail))
    return Orbit(pts, it.delta_vector.copy(), start.copy(), int(burn_in))


@dataclass(frozen=True)
class CycleReport:
    period_steps: int
    period_time: float
    closure_error: float
    mean_field_residual: np.ndarray | None


def detect_cycle(orb: Orbit, tol: float | None = None,
                 field: PolyMap | None = None) -> CycleReport | None:
    """Minimal recurrence at the tail of an orbit.

    Distances from the last point back to earlier points are scanned over at
    most half the orbit.  The period is the first return into the
    ``tol``-ball after the orbit has left it, refined to the closest approach
    within that return.  An orbit that never leaves the ball is period 1.
    ``tol`` defaults to 1e-6 times the diameter of the orbit's bounding box.
    """
    pts = orb.points
    if len(pts) == 0:
        raise ValueError("empty orbit")
    if tol is None:
        span = np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)) if len(pts) > 1 else 0.0
        tol = 1e-6 * span if span > 0 else 1e-12
    m = len(pts) - 1
    jmax = len(pts) // 2
    if jmax < 1:
        return None
    back = pts[m - jmax: m][::-1]              # back[j-1] = pts[m-j]
    dist = np.linalg.norm(back - pts[m], axis=1)
    inside = dist < tol
    if inside.all():
        period = 1
    else:
        left = int(np.argmin(inside)) if inside[0] else 0
        ret = np.flatnonzero(inside[left:])
        if ret.size == 0:
            return None
        first = left + int(ret[0])
        end = first + int(np.argmin(inside[first:])) if not inside[first:].all() else jmax
        period = first + int(np.argmin(dist[first:end])) + 1
    closure = float(dist[period - 1])
    dvals = np.unique(orb.delta_used)
    period_time = period * float(dvals[0]) if dvals.size == 1 else float("nan")
    resid = None
    if field is not None:
        resid = cycle_mean_residual(field, pts[m - period + 1: m + 1])
    return CycleReport(period, period_time, closure, resid)


def cycle_mean_residual(field: PolyMap | DifferentialIteration, points) -> np.ndarray:
    """(1/n) sum_k F(points[k]) over one cycle."""
    if isinstance(field, DifferentialIteration):
        field = field.field
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return evaluate(field, pts).mean(axis=0)


@dataclass(frozen=True)
class ProbeReport:
    fraction_escaped: float
    max_excursion: float
    samples: int
    horizon: int
    seed: int
    escaped: np.ndarray = field(repr=False, default=None)


def compact_invariance_probe(it: DifferentialIteration, box: Box, samples: int,
                             horizon: int, seed: int = 0,
                             threshold: float = OVERFLOW_THRESHOLD) -> ProbeReport:
    """Monte Carlo check that the box is (eventually) mapped into itself.

    Starts are drawn uniformly in the box.  A start counts as escaped when
    its orbit diverges or ends outside the box after ``horizon`` steps;
    ``max_excursion`` is the largest state norm seen along any orbit.
    """
    if box.dim != it.dim:
        raise DimensionError("box dimension does not match the field")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0x5EED])))
    starts = box.lo + (box.hi - box.lo) * rng.random((samples, it.dim))
    coefs, powers, offsets = it._flat()
    escaped, exc = _kernels.probe_kernel(coefs, powers, offsets, it.delta_vector, starts,
                                         int(horizon), box.lo, box.hi, float(threshold))
    start_norm = np.linalg.norm(starts, axis=1)
    max_exc = float(np.max(np.maximum(exc, start_norm))) if samples else 0.0
    return ProbeReport(float(escaped.mean()) if samples else 0.0, max_exc,
                       samples, horizon, seed, escaped)
