"""Fractional Brownian motion increments on a uniform time grid.

Two exact-in-distribution samplers are provided for the stationary
increment vector (fractional Gaussian noise) of an fBm with Hurst index
H in (0,1):

* :func:`sample_fbm_cholesky` — dense Cholesky factor of the increment
  covariance.  O(L^3); used as the distributional oracle and fine for
  L up to a couple thousand.
* :func:`sample_fbm_circulant` — circulant embedding (Davies–Harte),
  O(L log L); the production sampler.  The embedding of fractional
  Gaussian noise is nonnegative definite for every H, so a materially
  negative eigenvalue signals an implementation bug and raises.

Ensembles for the noise expansion W^H_Q = sum_k sqrt(Lambda_k) phi_k W^H_k
are generated by :func:`mode_increments`: one counter-based RNG stream per
(mode, trajectory) pair, derived from a single master seed via
``SeedSequence(master_seed, spawn_key=(mode, trajectory))``.  That makes
ensembles reproducible, independent of chunking/parallel schedule, and
subset-stable (mode k, trajectory i always sees the same path regardless
of how many other modes or trajectories are generated).
"""
from __future__ import annotations

import math

import numpy as np

__all__ = [
    "fbm_covariance",
    "increment_covariance",
    "increment_covariance_matrix",
    "sample_fbm_cholesky",
    "sample_fbm_circulant",
    "mode_increments",
    "dump_ensemble",
    "load_ensemble",
]


def _check_hurst(h: float) -> None:
    if not 0.0 < h < 1.0:
        raise ValueError(f"Hurst index must be in (0, 1), got {h}")


def fbm_covariance(t: float, u: float, h: float) -> float:
    """Cov(W^H(t), W^H(u)) = (t^2H + u^2H - |t-u|^2H) / 2."""
    _check_hurst(h)
    if t < 0.0 or u < 0.0:
        raise ValueError("fBm covariance requires nonnegative times")
    return 0.5 * (t ** (2 * h) + u ** (2 * h) - abs(t - u) ** (2 * h))


def increment_covariance(h: float, tau: float, lag: np.ndarray) -> np.ndarray:
    """Autocovariance gamma(j) = E[dW_n dW_{n+j}] of the increment process.

    gamma(j) = tau^2H/2 * (|j+1|^2H + |j-1|^2H - 2|j|^2H).
    """
    _check_hurst(h)
    j = np.abs(np.asarray(lag, dtype=float))
    two_h = 2 * h
    return 0.5 * tau ** two_h * ((j + 1) ** two_h + np.abs(j - 1) ** two_h - 2 * j ** two_h)


def increment_covariance_matrix(h: float, tau: float, n_steps: int) -> np.ndarray:
    """Full L x L covariance of the increment vector (symmetric Toeplitz)."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    idx = np.arange(n_steps)
    return increment_covariance(h, tau, idx[:, None] - idx[None, :])


def sample_fbm_cholesky(h: float, tau: float, n_steps: int,
                        rng: np.random.Generator, n_paths: int = 1) -> np.ndarray:
    """Exact fGn sampler via Cholesky factorization; returns (n_paths, L)."""
    cov = increment_covariance_matrix(h, tau, n_steps)
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"increment covariance (H={h}, tau={tau}, L={n_steps}) is not "
            f"numerically positive definite: {exc}") from exc
    return rng.standard_normal((n_paths, n_steps)) @ factor.T


def sample_fbm_circulant(h: float, tau: float, n_steps: int,
                         rng: np.random.Generator, n_paths: int = 1) -> np.ndarray:
    """Davies–Harte fGn sampler; returns (n_paths, L).

    The covariance sequence gamma(0..L) is embedded in a circulant of size
    2L whose eigenvalues (the real FFT of the first row) are provably
    nonnegative for fractional Gaussian noise; tiny negative rounding
    residue is clamped, anything materially negative raises.

    Draw layout (fixed; part of the reproducibility contract): for each
    path, 2L standard normals are consumed as
    [xi_0, xi_L, Re xi_1..Re xi_{L-1}, Im xi_1..Im xi_{L-1}].
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    g = increment_covariance(h, tau, np.arange(n_steps + 1))
    if n_steps == 1:
        return math.sqrt(g[0]) * rng.standard_normal((n_paths, 1))
    first_row = np.concatenate([g[:n_steps], g[n_steps:n_steps + 1], g[n_steps - 1:0:-1]])
    eigs = np.fft.fft(first_row).real
    if eigs.min() < -1e-10 * eigs.max():
        raise ValueError(
            f"circulant embedding for H={h}, L={n_steps} has eigenvalue "
            f"{eigs.min():.3e}; the fGn embedding must be nonnegative definite")
    eigs = np.clip(eigs, 0.0, None)
    m = 2 * n_steps
    z = rng.standard_normal((n_paths, m))
    xi = np.empty((n_paths, m), dtype=complex)
    xi[:, 0] = math.sqrt(m) * z[:, 0]
    xi[:, n_steps] = math.sqrt(m) * z[:, 1]
    xi[:, 1:n_steps] = math.sqrt(m / 2.0) * (z[:, 2:n_steps + 1] + 1j * z[:, n_steps + 1:])
    xi[:, n_steps + 1:] = np.conj(xi[:, 1:n_steps])[:, ::-1]
    paths = np.fft.ifft(np.sqrt(eigs) * xi, axis=-1)[:, :n_steps].real
    return paths


def _stream(master_seed: int, mode: int, trajectory: int) -> np.random.Generator:
    seq = np.random.SeedSequence(master_seed, spawn_key=(mode, trajectory))
    return np.random.Generator(np.random.Philox(seq))


def mode_increments(h: float, tau: float, n_steps: int, master_seed: int,
                    n_modes: int, trajectories) -> np.ndarray:
    """fGn increments for modes 1..n_modes and the given trajectory indices.

    Returns an array of shape (len(trajectories), n_steps, n_modes);
    entry [i, n, k-1] is dW^H_k over the n-th step for trajectory
    ``trajectories[i]``.  Increments are *unit-amplitude*: the noise
    spectral weights sqrt(Lambda_k) are applied by the solver, so the same
    ensemble can be reused across different m.
    """
    trajectories = list(trajectories)
    out = np.empty((len(trajectories), n_steps, n_modes))
    for ki in range(n_modes):
        for i, traj in enumerate(trajectories):
            rng = _stream(master_seed, ki + 1, traj)
            out[i, :, ki] = sample_fbm_circulant(h, tau, n_steps, rng, 1)[0]
    return out


# ---------------------------------------------------------------------------
# binary ensemble dump (little-endian float64, mode-major), for resumability

_MAGIC = b"FBME"
_HEADER_DTYPE = np.dtype([
    ("hurst", "<f8"), ("tau", "<f8"),
    ("n_steps", "<u8"), ("n_modes", "<u8"), ("n_traj", "<u8"), ("seed", "<u8"),
])


def dump_ensemble(path, increments: np.ndarray, h: float, tau: float,
                  master_seed: int) -> None:
    """Write an ensemble (n_traj, L, n_modes) to ``path``.

    Layout: 4-byte magic ``FBME``, a packed little-endian header
    (hurst f8, tau f8, n_steps u8, n_modes u8, n_traj u8, seed u8), then
    the increments as float64 in mode-major order (mode, trajectory, step).
    """
    increments = np.asarray(increments, dtype=float)
    n_traj, n_steps, n_modes = increments.shape
    header = np.array([(h, tau, n_steps, n_modes, n_traj, master_seed)],
                      dtype=_HEADER_DTYPE)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(header.tobytes())
        fh.write(np.ascontiguousarray(
            increments.transpose(2, 0, 1)).astype("<f8").tobytes())


def load_ensemble(path):
    """Read a dump written by :func:`dump_ensemble`.

    Returns (increments, meta) with increments shaped (n_traj, L, n_modes)
    and meta a dict of the header fields.
    """
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not an fBm ensemble dump (bad magic {magic!r})")
        header = np.frombuffer(fh.read(_HEADER_DTYPE.itemsize), dtype=_HEADER_DTYPE)[0]
        n_steps, n_modes, n_traj = (int(header["n_steps"]), int(header["n_modes"]),
                                    int(header["n_traj"]))
        payload = np.frombuffer(fh.read(), dtype="<f8")
    expected = n_modes * n_traj * n_steps
    if payload.size != expected:
        raise ValueError(f"{path}: truncated payload ({payload.size} of {expected} values)")
    increments = payload.reshape(n_modes, n_traj, n_steps).transpose(1, 2, 0).copy()
    meta = {"hurst": float(header["hurst"]), "tau": float(header["tau"]),
            "n_steps": n_steps, "n_modes": n_modes, "n_traj": n_traj,
            "seed": int(header["seed"])}
    return increments, meta
