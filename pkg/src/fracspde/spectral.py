"""Dirichlet-Laplacian eigenpairs on (0,1) and sine-spectral transforms.

The operator A = -d^2/dx^2 with zero Dirichlet boundary conditions on
D = (0,1) has eigenvalues lambda_k = (k*pi)^2 and L^2-normalized
eigenfunctions phi_k(x) = sqrt(2)*sin(k*pi*x), k >= 1.  Everything in this
module works in that basis: a field is just the vector of its first N sine
coefficients.

Grid convention
---------------
All grid-based operations use M interior nodes x_j = j/(M+1), j = 1..M.
On that grid the type-I discrete sine transform diagonalizes projection and
synthesis, making ``project`` and ``synthesize`` exact inverses on
span{phi_1..phi_N} whenever N <= M, and giving the quadrature rule
int_0^1 u v dx ~= (1/(M+1)) * sum_j u(x_j) v(x_j), which is exact on the
resolved span.

Projecting a *nonlinear* function of a field is only alias-free when the
grid oversamples the modes; ``project`` therefore rejects N > M/2.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.fft import dst

__all__ = [
    "eigenvalue",
    "eigenvalues",
    "eigenfunction_at",
    "grid_nodes",
    "project",
    "synthesize",
    "apply_fractional_laplacian",
]

_SQRT2 = math.sqrt(2.0)


def eigenvalue(k: int) -> float:
    """Eigenvalue lambda_k = (k*pi)^2 of the Dirichlet Laplacian on (0,1).

    Parameters
    ----------
    k : int
        Mode index, k >= 1.
    """
    if k < 1:
        raise ValueError(f"mode index must be >= 1, got {k}")
    return (k * math.pi) ** 2


def eigenvalues(n_modes: int) -> np.ndarray:
    """Array [lambda_1, ..., lambda_N]."""
    if n_modes < 1:
        raise ValueError(f"n_modes must be >= 1, got {n_modes}")
    return (np.arange(1, n_modes + 1) * math.pi) ** 2


def eigenfunction_at(k: int, x) -> float | np.ndarray:
    """phi_k(x) = sqrt(2)*sin(k*pi*x) for x in [0, 1] (scalar or array)."""
    if k < 1:
        raise ValueError(f"mode index must be >= 1, got {k}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("evaluation point outside [0, 1]")
    out = _SQRT2 * np.sin(k * math.pi * x)
    return float(out) if out.ndim == 0 else out


def grid_nodes(n_points: int) -> np.ndarray:
    """Interior nodes x_j = j/(M+1), j = 1..M."""
    if n_points < 1:
        raise ValueError(f"n_points must be >= 1, got {n_points}")
    return np.arange(1, n_points + 1) / (n_points + 1.0)


def project(grid_values: np.ndarray, n_modes: int) -> np.ndarray:
    """Sine coefficients (u, phi_k), k = 1..N, of grid samples of u.

    ``grid_values`` holds samples on the M interior nodes of
    :func:`grid_nodes` along the last axis.  The quadrature is the DST-I
    rule with uniform weight 1/(M+1); it reproduces exact L^2 inner
    products for u in span{phi_1..phi_M}.

    N is capped at M/2 so that projections of *nonlinearly transformed*
    fields stay alias-free (2x oversampling).
    """
    grid_values = np.asarray(grid_values, dtype=float)
    m = grid_values.shape[-1]
    if n_modes < 1:
        raise ValueError(f"n_modes must be >= 1, got {n_modes}")
    if 2 * n_modes > m:
        raise ValueError(
            f"n_modes={n_modes} exceeds the alias-free capacity M/2={m / 2:g} "
            f"of a grid with {m} nodes")
    return dst(grid_values, type=1, axis=-1)[..., :n_modes] / (_SQRT2 * (m + 1))


def synthesize(coeffs: np.ndarray, n_points: int) -> np.ndarray:
    """Evaluate sum_k coeffs[k-1] * phi_k at the M interior nodes.

    Inverse of :func:`project` on the resolved span: for any coefficient
    vector c with N <= M, project(synthesize(c, M), N) == c to rounding.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[-1]
    if n_points < n:
        raise ValueError(f"grid with {n_points} nodes cannot carry {n} modes")
    padded = np.zeros(coeffs.shape[:-1] + (n_points,))
    padded[..., :n] = coeffs
    return dst(padded, type=1, axis=-1) / _SQRT2


def apply_fractional_laplacian(coeffs: np.ndarray, s: float) -> np.ndarray:
    """A^s in coefficient space: coeffs[k] -> lambda_k^s * coeffs[k].

    The spectral fractional Laplacian is diagonal in the sine basis, so
    this is an elementwise scaling by (k*pi)^(2s).
    """
    if not 0.0 < s <= 1.0:
        raise ValueError(f"fractional order s must be in (0, 1], got {s}")
    coeffs = np.asarray(coeffs, dtype=float)
    return coeffs * eigenvalues(coeffs.shape[-1]) ** s
