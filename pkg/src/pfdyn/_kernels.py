"""Compiled orbit kernels.

A PolyMap is flattened into three arrays (coefficients, exponents, and
per-component offsets into them).  The kernels evaluate monomials exactly as
:func:`pfdyn.polymap.evaluate` does: coefficient first, then repeated
multiplication variable by variable, summed in canonical order.  Keeping the
operation order identical makes compiled and NumPy results bit-identical.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .polymap import PolyMap

OVERFLOW = 1e12


def flatten(map: PolyMap):
    coefs, powers, offsets = [], [], [0]
    for comp in map.components:
        for m in comp:
            coefs.append(float(np.real(m.coef)))
            powers.append(m.powers)
        offsets.append(len(coefs))
    if map.is_complex:
        raise TypeError("compiled kernels need real coefficients")
    pw = np.asarray(powers, dtype=np.int64).reshape(-1, map.dim_in)
    return np.asarray(coefs, dtype=np.float64), pw, np.asarray(offsets, dtype=np.int64)


@njit(cache=True)
def _field(coefs, powers, offsets, x, out):
    d = x.shape[0]
    for i in range(offsets.shape[0] - 1):
        acc = 0.0
        for k in range(offsets[i], offsets[i + 1]):
            term = coefs[k]
            for j in range(d):
                for _ in range(powers[k, j]):
                    term = term * x[j]
            acc = acc + term
        out[i] = acc


@njit(cache=True)
def orbit_kernel(coefs, powers, offsets, delta, start, n_steps, keep_from, threshold):
    """Iterate a <- a + delta*F(a).

    Returns (points, fail_step).  ``points`` holds steps keep_from..n_steps;
    fail_step is -1 on success, otherwise the first step whose state is
    non-finite or exceeds ``threshold`` in absolute value.
    """
    d = start.shape[0]
    n_keep = n_steps + 1 - keep_from
    pts = np.empty((max(n_keep, 0), d))
    x = start.copy()
    f = np.empty(d)
    if keep_from == 0:
        pts[0, :] = x
    for s in range(1, n_steps + 1):
        _field(coefs, powers, offsets, x, f)
        for j in range(d):
            x[j] = x[j] + delta[j] * f[j]
        for j in range(d):
            v = x[j]
            if not (abs(v) <= threshold):
                return pts[: max(s - keep_from, 0)], s
        if s >= keep_from:
            pts[s - keep_from, :] = x
    return pts, -1


@njit(cache=True)
def step_many(coefs, powers, offsets, delta, X):
    """One iteration step applied to each row of X."""
    n, d = X.shape
    out = np.empty_like(X)
    f = np.empty(d)
    for r in range(n):
        _field(coefs, powers, offsets, X[r], f)
        for j in range(d):
            out[r, j] = X[r, j] + delta[j] * f[j]
    return out


@njit(cache=True)
def probe_kernel(coefs, powers, offsets, delta, X, horizon, lo, hi, threshold):
    """Iterate many starts; report escape flag and max norm per start.

    A start escapes if it diverges (exceeds ``threshold``) or ends outside
    the box [lo, hi].
    """
    n, d = X.shape
    escaped = np.zeros(n, dtype=np.bool_)
    excursion = np.zeros(n)
    x = np.empty(d)
    f = np.empty(d)
    for r in range(n):
        for j in range(d):
            x[j] = X[r, j]
        best = 0.0
        blown = False
        for _ in range(horizon):
            _field(coefs, powers, offsets, x, f)
            nrm = 0.0
            for j in range(d):
                x[j] = x[j] + delta[j] * f[j]
                nrm += x[j] * x[j]
            nrm = np.sqrt(nrm)
            if not (nrm <= threshold):
                blown = True
                best = np.inf
                break
            if nrm > best:
                best = nrm
        if not blown:
            for j in range(d):
                if x[j] < lo[j] or x[j] > hi[j]:
                    blown = True
        escaped[r] = blown
        excursion[r] = best
    return escaped, excursion


@njit(cache=True)
def first_visits(coefs, powers, offsets, delta, start, horizon, lo, width, cells):
    """First step at which the orbit enters each grid cell (-1 if never)."""
    d = start.shape[0]
    total = 1
    for j in range(d):
        total *= cells[j]
    first = np.full(total, -1, dtype=np.int64)
    x = start.copy()
    f = np.empty(d)
    for s in range(horizon + 1):
        if s > 0:
            _field(coefs, powers, offsets, x, f)
            for j in range(d):
                x[j] = x[j] + delta[j] * f[j]
        idx = 0
        inside = True
        for j in range(d):
            u = (x[j] - lo[j]) / width[j]
            if not (u >= 0.0 and u < cells[j]):
                inside = False
                break
            idx = idx * cells[j] + min(int(u), cells[j] - 1)
        if inside and first[idx] < 0:
            first[idx] = s
    return first
