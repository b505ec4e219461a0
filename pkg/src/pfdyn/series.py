"""Truncated multivariate power series of exp(P(a)).

The coefficients of E = exp(P) follow from the Euler-operator identity
D E = (D P) E with D = sum_l a_l d/da_l, which on monomials reads

    |k| E_k = sum_{0 < j <= k} |j| P_j E_{k-j}.

Coefficients are stored in a dense array over the box 0 <= k <= n, which
is closed under the convolution above, so only the requested box is ever
computed.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .polymap import DimensionError, PolyMap

DEFAULT_CAP = 36


class SeriesCapExceeded(MemoryError):
    """Requested derivative order exceeds the configured total-degree cap."""


def _dense(P: PolyMap, n: tuple[int, ...], dtype) -> np.ndarray:
    arr = np.zeros(tuple(k + 1 for k in n), dtype=dtype)
    for m in P.components[0]:
        if all(e <= k for e, k in zip(m.powers, n)):
            arr[m.powers] += m.coef
    return arr


def exp_coefficients(P: PolyMap, n, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Taylor coefficients of exp(P) for all multi-indices k <= n."""
    if P.dim_out != 1:
        raise DimensionError("exp_coefficients needs a scalar polynomial")
    n = tuple(int(k) for k in np.atleast_1d(n))
    if len(n) != P.dim_in:
        raise DimensionError(f"multi-index has length {len(n)}, need {P.dim_in}")
    if any(k < 0 for k in n):
        raise ValueError("multi-index entries must be >= 0")
    if sum(n) > cap:
        raise SeriesCapExceeded(f"total order {sum(n)} exceeds cap {cap}")
    dtype = complex if P.is_complex else float
    coef = _dense(P, n, dtype)
    zero = (0,) * len(n)
    c0 = coef[zero]
    coef[zero] = 0
    deg = np.zeros(coef.shape, dtype=float)
    for ax, size in enumerate(coef.shape):
        shape = [1] * coef.ndim
        shape[ax] = size
        deg = deg + np.arange(size).reshape(shape)
    dp = deg * coef
    E = np.zeros(coef.shape, dtype=dtype)
    E[zero] = 1.0
    for k in sorted(itertools.product(*(range(s) for s in coef.shape)), key=sum):
        tot = sum(k)
        if tot == 0:
            continue
        head = tuple(slice(0, ki + 1) for ki in k)
        tail = tuple(slice(ki, None, -1) if ki > 0 else slice(0, 1) for ki in k)
        E[k] = np.sum(dp[head] * E[tail]) / tot
    return E * np.exp(c0)


def exp_derivative(P: PolyMap, n, cap: int = DEFAULT_CAP):
    """d^n exp(P(a)) / da^n at a = 0 (the coefficient times prod n_l!)."""
    n = tuple(int(k) for k in np.atleast_1d(n))
    E = exp_coefficients(P, n, cap)
    fact = math.prod(math.factorial(k) for k in n)
    val = E[n] * fact
    return val.item() if hasattr(val, "item") else val
