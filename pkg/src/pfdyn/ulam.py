"""Ulam discretization of the Perron-Frobenius operator of an iteration.

The box is cut into a regular grid; each cell is sampled on a stratified
sub-grid, every sample is pushed through one step of the iteration, and the
destination cells are tallied into a sparse row-stochastic matrix.  Its
leading left eigenvector estimates the invariant density.  Orbit histograms
and first-visit times along single orbits are provided as independent
oracles.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .difiter import Box, DifferentialIteration, orbit

log = logging.getLogger(__name__)

CHUNK_CELLS = 4096


class NotConverged(RuntimeError):
    def __init__(self, residual: float, iters: int):
        self.residual = residual
        self.iters = iters
        super().__init__(f"power iteration did not converge in {iters} steps "
                         f"(last residual {residual:.3e})")


@dataclass(frozen=True)
class GridPartition:
    box: Box
    cells_per_axis: tuple[int, ...]

    def __post_init__(self):
        cells = tuple(int(c) for c in np.atleast_1d(self.cells_per_axis))
        if len(cells) != self.box.dim or min(cells) < 1:
            raise ValueError("need one positive cell count per axis")
        object.__setattr__(self, "cells_per_axis", cells)

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def total_cells(self) -> int:
        return math.prod(self.cells_per_axis)

    @property
    def width(self) -> np.ndarray:
        return (self.box.hi - self.box.lo) / np.asarray(self.cells_per_axis)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.width))

    def cell_of(self, X) -> np.ndarray:
        """Flat (row-major) cell index of each point; -1 outside the box."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        u = (X - self.box.lo) / self.width
        cells = np.asarray(self.cells_per_axis)
        inside = np.all((u >= 0) & (u < cells), axis=1)
        k = np.minimum(np.floor(np.where(inside[:, None], u, 0)).astype(np.int64), cells - 1)
        flat = np.ravel_multi_index(tuple(k.T), self.cells_per_axis)
        return np.where(inside, flat, -1)

    def cell_lower(self, idx) -> np.ndarray:
        multi = np.stack(np.unravel_index(np.asarray(idx), self.cells_per_axis), axis=-1)
        return self.box.lo + multi * self.width

    def centers(self) -> np.ndarray:
        return self.cell_lower(np.arange(self.total_cells)) + 0.5 * self.width

    def edges(self, axis: int) -> np.ndarray:
        return np.linspace(self.box.lo[axis], self.box.hi[axis], self.cells_per_axis[axis] + 1)


@dataclass
class TransitionMatrix:
    matrix: sp.csr_matrix
    escaped_mass_per_row: np.ndarray
    flagged_rows: np.ndarray
    absorbing: bool = False

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _strata(samples: int, d: int) -> tuple[int, int]:
    k = max(1, int(math.floor(samples ** (1.0 / d) + 1e-9)))
    return k, samples - k**d


def _sample_chunk(part: GridPartition, cells: np.ndarray, samples: int, seed: int,
                  chunk: int) -> np.ndarray:
    """Stratified sample points for a block of cells, shape (len(cells)*samples, d)."""
    d = part.dim
    k, extra = _strata(samples, d)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, chunk])))
    grid = np.stack(np.meshgrid(*[np.arange(k)] * d, indexing="ij"), axis=-1).reshape(-1, d)
    strat = (grid[None] + rng.random((cells.size, k**d, d))) / k
    if extra:
        strat = np.concatenate([strat, rng.random((cells.size, extra, d))], axis=1)
    lower = part.cell_lower(cells)
    return (lower[:, None, :] + strat * part.width).reshape(-1, d)


def build_transition(it: DifferentialIteration, part: GridPartition, samples_per_cell: int,
                     seed: int = 0, absorbing: bool = False, threads: int = 1
                     ) -> TransitionMatrix:
    """Ulam matrix of one iteration step on the grid.

    Cells are processed in fixed blocks of CHUNK_CELLS, each with its own
    random stream keyed by (seed, block index), so the result does not depend
    on ``threads``.  Mass leaving the box is recorded and dropped before the
    rows are renormalized; a row that loses all its mass falls back to the
    uniform row (or, with ``absorbing=True``, to a self-loop) and is flagged.
    """
    if samples_per_cell < 1:
        raise ValueError("samples_per_cell must be >= 1")
    if part.dim != it.dim:
        raise ValueError("partition dimension does not match the iteration")
    coefs, powers, offsets = it._flat()
    delta = it.delta_vector
    n = part.total_cells
    bounds = list(range(0, n, CHUNK_CELLS)) + [n]

    def work(b: int):
        cells = np.arange(bounds[b], bounds[b + 1])
        X = _sample_chunk(part, cells, samples_per_cell, seed, b)
        with np.errstate(over="ignore", invalid="ignore"):
            Y = _kernels.step_many(coefs, powers, offsets, delta, X)
        dest = part.cell_of(np.where(np.isfinite(Y), Y, np.inf))
        src = np.repeat(cells, samples_per_cell)
        return src, dest

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(len(bounds) - 1)))
    else:
        results = [work(b) for b in range(len(bounds) - 1)]
    src = np.concatenate([r[0] for r in results])
    dest = np.concatenate([r[1] for r in results])
    out = dest < 0
    escaped = np.bincount(src[out], minlength=n) / samples_per_cell
    counts = sp.coo_matrix((np.ones(int((~out).sum())), (src[~out], dest[~out])),
                           shape=(n, n)).tocsr()
    counts.sum_duplicates()
    row_mass = np.asarray(counts.sum(axis=1)).ravel()
    flagged = np.flatnonzero(row_mass == 0)
    if flagged.size:
        log.warning("%d cells lose all sampled mass; using %s fallback", flagged.size,
                    "absorbing" if absorbing else "uniform")
    inv = np.divide(1.0, row_mass, out=np.zeros(n), where=row_mass > 0)
    P = sp.diags(inv) @ counts
    if flagged.size:
        if absorbing:
            fill = sp.coo_matrix((np.ones(flagged.size), (flagged, flagged)), shape=(n, n))
        else:
            rows = np.repeat(flagged, n)
            cols = np.tile(np.arange(n), flagged.size)
            fill = sp.coo_matrix((np.full(rows.size, 1.0 / n), (rows, cols)), shape=(n, n))
        P = P + fill
    P = sp.csr_matrix(P)
    P.sort_indices()
    return TransitionMatrix(P, escaped, flagged, absorbing)


@dataclass
class InvariantDensity:
    weights: np.ndarray
    residual: float
    iterations: int

    def density(self, part: GridPartition) -> np.ndarray:
        """Weights divided by cell volume."""
        return self.weights / part.cell_volume


def invariant_density(tm: TransitionMatrix | sp.spmatrix, tol: float = 1e-12,
                      max_iters: int = 100_000) -> InvariantDensity:
    """Left power iteration w <- w P from the uniform vector.

    Stops once ||w P - w||_1 < tol; the residual is recomputed with one
    explicit product after the loop.
    """
    P = tm.matrix if isinstance(tm, TransitionMatrix) else sp.csr_matrix(tm)
    PT = P.T.tocsr()
    n = P.shape[0]
    w = np.full(n, 1.0 / n)
    res = np.inf
    for k in range(1, max_iters + 1):
        wn = PT @ w
        wn /= wn.sum()
        res = float(np.abs(wn - w).sum())
        w = wn
        if res < tol:
            break
    else:
        raise NotConverged(res, max_iters)
    check = float(np.abs(PT @ w - w).sum())
    if check >= tol:
        raise NotConverged(check, k)
    return InvariantDensity(w, check, k)


def orbit_histogram(it: DifferentialIteration, start, steps: int, part: GridPartition,
                    burn_in: int | None = None) -> np.ndarray:
    """Normalized cell visit counts along one orbit (after burn-in)."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    orb = orbit(it, start, steps, burn_in)
    idx = part.cell_of(orb.points)
    counts = np.bincount(idx[idx >= 0], minlength=part.total_cells).astype(float)
    total = counts.sum()
    return counts / total if total > 0 else counts


@dataclass
class DoorstepReport:
    first_visit_steps: np.ndarray
    t_delta: float
    max_first_visit: int
    unvisited_fraction: float


def doorstep(it: DifferentialIteration, start, part: GridPartition, horizon: int
             ) -> DoorstepReport:
    """First step at which one orbit enters each cell (-1 if never within ``horizon``).

    t_delta is delta times the largest first-visit step among visited cells.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    coefs, powers, offsets = it._flat()
    first = _kernels.first_visits(coefs, powers, offsets, it.delta_vector,
                                  np.asarray(start, dtype=float), int(horizon), part.box.lo,
                                  part.width, np.asarray(part.cells_per_axis, dtype=np.int64))
    visited = first >= 0
    mx = int(first[visited].max()) if visited.any() else 0
    step = float(np.max(it.delta_vector))
    return DoorstepReport(first, step * mx, mx, float(1 - visited.mean()))


def marginals(weights: np.ndarray, part: GridPartition) -> list[np.ndarray]:
    w = weights.reshape(part.cells_per_axis)
    d = part.dim
    return [w.sum(axis=tuple(a for a in range(d) if a != ax)) for ax in range(d)]
