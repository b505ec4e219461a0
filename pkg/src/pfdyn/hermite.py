"""Physicists' Hermite polynomials H_n, their zeros, and zero-law comparisons.

Convention: H_0 = 1, H_1 = 2x, H_{n+1} = 2x H_n - 2n H_{n-1}, generated by
exp(2xt - t^2).  The probabilists' He_n would rescale every argument by
sqrt(2); nothing in this package uses it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

BY_LARGEST_ZERO = "by_largest_zero"
BY_SQRT_2N = "by_sqrt_2n"


def hermite_eval(n: int, x):
    """H_n(x) by the three-term recurrence; x may be real, complex, or an array."""
    if n < 0:
        raise ValueError("degree must be >= 0")
    x = np.asarray(x)
    h_prev = np.ones_like(x, dtype=np.result_type(x, float))
    if n == 0:
        return h_prev if h_prev.ndim else h_prev.item()
    h = 2 * x * h_prev
    for k in range(1, n):
        h_prev, h = h, 2 * x * h - 2 * k * h_prev
    return h if np.ndim(h) else h.item()


def _newton_ratio(n: int, x: np.ndarray) -> np.ndarray:
    """H_n(x) / H_n'(x) from the orthonormal recurrence (no overflow)."""
    # orthonormal psi_k = H_k / sqrt(2^k k! sqrt(pi)), without the Gaussian factor
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    for k in range(n):
        p_prev, p = p, np.sqrt(2.0 / (k + 1)) * x * p - np.sqrt(k / (k + 1)) * p_prev
    # H_n' = 2n H_{n-1}  ->  psi_n' = sqrt(2n) psi_{n-1}
    return p / (np.sqrt(2.0 * n) * p_prev)


def jacobi_matrix(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the symmetric Jacobi matrix of H_n."""
    return np.zeros(n), np.sqrt(np.arange(1, n) / 2.0)


def gauss_hermite(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights (Golub-Welsch) for the weight exp(-x^2)."""
    diag, off = jacobi_matrix(n)
    nodes, vecs = eigh_tridiagonal(diag, off)
    weights = np.sqrt(np.pi) * vecs[0] ** 2
    return nodes, weights


@dataclass(frozen=True)
class HermiteZeroSet:
    n: int
    zeros: np.ndarray
    scaling: str = BY_LARGEST_ZERO

    def scaled(self) -> np.ndarray:
        if self.scaling == BY_LARGEST_ZERO:
            top = np.max(np.abs(self.zeros))
            return self.zeros / top if top > 0 else self.zeros.copy()
        if self.scaling == BY_SQRT_2N:
            return self.zeros / np.sqrt(2.0 * self.n)
        raise ValueError(f"unknown scaling {self.scaling!r}")


def hermite_zeros(n: int, scaling: str = BY_LARGEST_ZERO) -> HermiteZeroSet:
    """Zeros of H_n: Jacobi-matrix eigenvalues plus one Newton correction."""
    if not 1 <= n <= 500:
        raise ValueError("degree must lie in [1, 500]")
    nodes, _ = gauss_hermite(n)
    nodes = nodes - _newton_ratio(n, nodes)
    # enforce exact symmetry of the set
    nodes = np.sort(nodes)
    nodes = 0.5 * (nodes - nodes[::-1])
    if n % 2:
        nodes[n // 2] = 0.0
    return HermiteZeroSet(n, nodes, scaling)


def beta_half_cdf(x, symmetric: bool = False):
    """CDF of the Beta(1/2, 1/2) (arcsine) law.

    On [0, 1] this is (2/pi) arcsin(sqrt(x)); with ``symmetric=True`` the law
    is carried to [-1, 1] and the CDF is 1/2 + arcsin(x)/pi.
    """
    x = np.asarray(x, dtype=float)
    lo = -1.0 if symmetric else 0.0
    if np.any((x < lo) | (x > 1)) or np.any(np.isnan(x)):
        raise ValueError(f"argument outside [{lo:g}, 1]")
    out = 0.5 + np.arcsin(x) / np.pi if symmetric else 2 / np.pi * np.arcsin(np.sqrt(x))
    return out if out.ndim else out.item()


def semicircle_cdf(x):
    x = np.clip(np.asarray(x, dtype=float), -1, 1)
    return 0.5 + (x * np.sqrt(1 - x * x) + np.arcsin(x)) / np.pi


def ks_statistic(sample, cdf) -> float:
    """Exact sup distance between the empirical CDF of ``sample`` and ``cdf``."""
    xs = np.sort(np.asarray(sample, dtype=float))
    m = xs.size
    F = cdf(xs)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))


@dataclass(frozen=True)
class LawComparison:
    n: int
    ks_arcsine: float
    ks_semicircle: float
    scaling: str

    @property
    def better(self) -> str:
        return "arcsine" if self.ks_arcsine < self.ks_semicircle else "semicircle"


def law_comparison(zs: HermiteZeroSet, min_n: int = 10) -> LawComparison:
    """KS distances of the scaled zeros to the arcsine and semicircle laws on [-1, 1]."""
    if zs.n < min_n:
        raise ValueError(f"law comparison needs n >= {min_n}")
    x = np.clip(zs.scaled(), -1, 1)
    return LawComparison(
        zs.n,
        ks_statistic(x, lambda v: beta_half_cdf(v, symmetric=True)),
        ks_statistic(x, semicircle_cdf),
        zs.scaling,
    )
