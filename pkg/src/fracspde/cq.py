"""Backward-Euler convolution-quadrature weights for fractional derivatives.

The discrete Riemann–Liouville derivative of order ``a`` on a uniform grid
with step tau uses the coefficients of ((1-z)/tau)^a:

    ((1-z)/tau)^a = sum_{j>=0} d_j z^j,
    d_j = tau^(-a) * (-1)^j * binom(a, j).

``cq_weights`` computes them by the stable two-term recurrence; the two
``weights_by_*`` functions are independent oracles (power-series
composition in high precision, and FFT coefficient extraction on a circle)
kept for the self-test and the test suite.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "cq_weights",
    "apply_cq_history",
    "weights_by_series",
    "weights_by_contour",
]


def cq_weights(a: float, tau: float, n_weights: int) -> np.ndarray:
    """Weights d_0 .. d_{n_weights-1} of order ``a`` at step ``tau``.

    d_0 = tau^(-a) > 0; every later weight is negative for a in (0,1),
    via d_j = d_{j-1} * (j-1-a)/j.
    """
    if not 0.0 < a < 1.0:
        raise ValueError(f"quadrature order must be in (0, 1), got {a}")
    if tau <= 0.0:
        raise ValueError(f"step size must be positive, got {tau}")
    if n_weights < 1:
        raise ValueError(f"n_weights must be >= 1, got {n_weights}")
    w = np.empty(n_weights)
    w[0] = 1.0
    for j in range(1, n_weights):
        w[j] = w[j - 1] * ((j - 1 - a) / j)
    return w * tau ** (-a)


def apply_cq_history(weights: np.ndarray, history: np.ndarray) -> float:
    """sum_{i=0}^{n-1} d_i * u^{n-i} for history = [u^1, ..., u^n]."""
    history = np.asarray(history, dtype=float)
    n = history.shape[0]
    if n > weights.shape[0]:
        raise ValueError(
            f"history of length {n} exceeds weight table of length {weights.shape[0]}")
    return float(np.dot(weights[:n], history[::-1]))


def weights_by_series(a: float, tau: float, n_weights: int, dps: int = 50) -> np.ndarray:
    """Oracle: coefficients of exp(a*log(1-z))/tau^a by power-series composition.

    log(1-z) = -sum_{m>=1} z^m/m, then B = exp(A) coefficient recurrence
    b_j = (1/j) sum_{k=1}^{j} k a_k b_{j-k}, all in mpmath arithmetic.
    """
    import mpmath as mp

    with mp.workdps(dps):
        aa = mp.mpf(a)
        log_coeffs = [mp.mpf(0)] + [-aa / m for m in range(1, n_weights)]
        out = [mp.mpf(1)] + [mp.mpf(0)] * (n_weights - 1)
        for j in range(1, n_weights):
            acc = mp.mpf(0)
            for k in range(1, j + 1):
                acc += k * log_coeffs[k] * out[j - k]
            out[j] = acc / j
        scale = mp.mpf(tau) ** (-aa)
        return np.array([float(b * scale) for b in out])


def weights_by_contour(a: float, tau: float, n_weights: int,
                       n_points: int = 4096) -> np.ndarray:
    """Oracle: Cauchy coefficient extraction of ((1-z)/tau)^a on |z| = r.

    d_j = (1/(M r^j)) sum_l g(r e^{2 pi i l/M}) e^{-2 pi i j l/M}.  Accuracy
    is limited by the radius/rounding tradeoff (~1e-8 relative for the
    defaults), so this is the *secondary* oracle.
    """
    r = 1e-10 ** (1.0 / n_points)
    z = r * np.exp(2j * np.pi * np.arange(n_points) / n_points)
    g = ((1.0 - z) / tau) ** a
    coeffs = np.fft.fft(g).real / n_points
    return coeffs[:n_weights] / r ** np.arange(n_weights)
