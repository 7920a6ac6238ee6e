import math

import numpy as np
import pytest
from scipy import stats

from fracspde import fbm


def test_covariance_closed_form():
    assert fbm.fbm_covariance(1.0, 1.0, 0.3) == pytest.approx(1.0)
    assert fbm.fbm_covariance(2.0, 1.0, 0.5) == pytest.approx(1.0)   # min(t,u)
    assert fbm.fbm_covariance(2.0, 1.0, 0.75) == pytest.approx(math.sqrt(2.0))


def test_covariance_domain_errors():
    with pytest.raises(ValueError):
        fbm.fbm_covariance(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        fbm.fbm_covariance(-1.0, 1.0, 0.5)


def test_increment_covariance_matrix_brownian():
    c = fbm.increment_covariance_matrix(0.5, 0.25, 6)
    np.testing.assert_allclose(c, 0.25 * np.eye(6), atol=1e-15)


def test_increment_covariance_matrix_entries():
    c = fbm.increment_covariance_matrix(0.75, 1.0, 4)
    assert np.all(np.diag(c) == pytest.approx(1.0))
    # lag-1 entry: (|2|^1.5 + 0 - 2)/2
    assert c[1, 0] == pytest.approx(0.5 * (2 ** 1.5 - 2))
    np.testing.assert_allclose(c, c.T, atol=0)


def test_increment_correlation_sign():
    # anti-persistent vs persistent increments, deterministic check
    lag1_low = fbm.increment_covariance_matrix(0.3, 1.0, 3)[1, 0]
    lag1_high = fbm.increment_covariance_matrix(0.8, 1.0, 3)[1, 0]
    assert lag1_low < 0 < lag1_high


def test_increment_covariance_consistent_with_fbm_covariance():
    # entries must equal the bilinear expansion of the path covariance
    h, tau, n = 0.67, 0.125, 5
    grid = tau * np.arange(n + 1)
    c = fbm.increment_covariance_matrix(h, tau, n)
    for i in range(n):
        for j in range(n):
            expect = (fbm.fbm_covariance(grid[i + 1], grid[j + 1], h)
                      - fbm.fbm_covariance(grid[i + 1], grid[j], h)
                      - fbm.fbm_covariance(grid[i], grid[j + 1], h)
                      + fbm.fbm_covariance(grid[i], grid[j], h))
            assert c[i, j] == pytest.approx(expect, abs=1e-12)


def test_increment_covariance_psd():
    for h in (0.2, 0.5, 0.9):
        c = fbm.increment_covariance_matrix(h, 0.01, 48)
        eigs = np.linalg.eigvalsh(c)
        assert eigs.min() > -1e-12 * eigs.max()


def test_samplers_deterministic():
    for sampler in (fbm.sample_fbm_cholesky, fbm.sample_fbm_circulant):
        a = sampler(0.7, 0.5, 16, np.random.default_rng(99), 4)
        b = sampler(0.7, 0.5, 16, np.random.default_rng(99), 4)
        assert a.shape == (4, 16)
        assert np.array_equal(a, b)


def test_brownian_case_kolmogorov_smirnov():
    # H=0.5 -> iid N(0, tau) increments for both samplers
    tau = 0.04
    for sampler, seed in ((fbm.sample_fbm_cholesky, 1),
                          (fbm.sample_fbm_circulant, 2)):
        x = sampler(0.5, tau, 20, np.random.default_rng(seed), 500).ravel()
        p = stats.kstest(x, "norm", args=(0.0, math.sqrt(tau))).pvalue
        assert p > 0.01, f"{sampler.__name__}: KS p={p:.4f}"


def test_sample_covariance_matches_exact():
    # moderate-size version of the covariance acceptance check
    h, tau, n_steps, n_paths = 0.3, 1.0, 16, 40_000
    exact = fbm.increment_covariance_matrix(h, tau, n_steps)
    se = np.sqrt((np.outer(np.diag(exact), np.diag(exact)) + exact ** 2)
                 / n_paths)
    for sampler, seed in ((fbm.sample_fbm_cholesky, 5),
                          (fbm.sample_fbm_circulant, 6)):
        x = sampler(h, tau, n_steps, np.random.default_rng(seed), n_paths)
        sample = x.T @ x / n_paths
        dev = np.max(np.abs(sample - exact) / se)
        assert dev < 5.0, f"{sampler.__name__}: worst deviation {dev:.2f} SE"


def test_endpoint_variance_self_similarity():
    # Var(W(t_n)) = t_n^{2H} at every grid time, 5-sigma band
    h, tau, n_steps, n_paths = 0.3, 0.25, 16, 40_000
    x = fbm.sample_fbm_circulant(h, tau, n_steps, np.random.default_rng(8),
                                 n_paths)
    w = np.cumsum(x, axis=1)
    var = np.mean(w * w, axis=0)             # known zero mean
    t = tau * np.arange(1, n_steps + 1)
    target = t ** (2 * h)
    se = target * math.sqrt(2.0 / n_paths)
    assert np.all(np.abs(var - target) < 5 * se)


def test_single_step_case():
    x = fbm.sample_fbm_circulant(0.8, 0.5, 1, np.random.default_rng(0), 20_000)
    assert x.shape == (20_000, 1)
    target = 0.5 ** 1.6
    assert np.var(x) == pytest.approx(target, rel=5 * math.sqrt(2.0 / 20_000))


def _energy_statistic_p_value(x, y, n_perm=99, seed=7):
    """Two-sample energy test p-value via permutations.

    Uses a pooled float32 distance matrix; each permuted statistic needs
    one matrix-vector product (quadratic-form identity), which keeps 10^4
    paths per group tractable.
    """
    pooled = np.vstack([x, y]).astype(np.float32)
    n, m = x.shape[0], pooled.shape[0]
    sq = np.sum(pooled * pooled, axis=1)
    dist = np.empty((m, m), dtype=np.float32)
    for lo in range(0, m, 2000):
        hi = min(lo + 2000, m)
        d2 = sq[lo:hi, None] + sq[None, :] - 2.0 * (pooled[lo:hi] @ pooled.T)
        np.maximum(d2, 0.0, out=d2)
        dist[lo:hi] = np.sqrt(d2, out=d2)
    row_sums = dist @ np.ones(m, dtype=np.float32)
    s_tot = float(row_sums.sum())

    def statistic(mask):
        v = dist @ mask
        s_aa = float(mask @ v)
        a_rows = float(mask @ row_sums)
        s_ab = a_rows - s_aa
        s_bb = s_tot - 2.0 * a_rows + s_aa
        return (2.0 * s_ab - s_aa - s_bb) / (n * n)

    mask = np.zeros(m, dtype=np.float32)
    mask[:n] = 1.0
    observed = statistic(mask)
    rng = np.random.default_rng(seed)
    exceed = 0
    for _ in range(n_perm):
        mask = np.zeros(m, dtype=np.float32)
        mask[rng.permutation(m)[:n]] = 1.0
        if statistic(mask) >= observed:
            exceed += 1
    return (1 + exceed) / (n_perm + 1)


def test_circulant_matches_cholesky_energy_distance():
    # distribution equality of the two samplers, not rejected at 1%
    rng = np.random.default_rng(2024)
    n = 10_000
    x = fbm.sample_fbm_cholesky(0.8, 1.0, 32, rng, n)
    y = fbm.sample_fbm_circulant(0.8, 1.0, 32, rng, n)
    p = _energy_statistic_p_value(x, y)
    assert p > 0.01, f"energy test rejected sampler equality, p={p:.3f}"


def test_mode_increments_shape_and_subset_stability():
    full = fbm.mode_increments(0.6, 0.1, 8, 42, 5, range(4))
    assert full.shape == (4, 8, 5)
    fewer_modes = fbm.mode_increments(0.6, 0.1, 8, 42, 3, range(4))
    np.testing.assert_array_equal(fewer_modes, full[:, :, :3])
    some_traj = fbm.mode_increments(0.6, 0.1, 8, 42, 5, [1, 3])
    np.testing.assert_array_equal(some_traj, full[[1, 3]])


def test_mode_increments_seed_sensitivity():
    a = fbm.mode_increments(0.6, 0.1, 8, 42, 2, [0])
    b = fbm.mode_increments(0.6, 0.1, 8, 43, 2, [0])
    assert not np.array_equal(a, b)


def test_ensemble_dump_round_trip(tmp_path):
    inc = fbm.mode_increments(0.7, 0.02, 6, 9, 4, range(3))
    path = tmp_path / "ens.bin"
    fbm.dump_ensemble(path, inc, 0.7, 0.02, 9)
    loaded, meta = fbm.load_ensemble(path)
    np.testing.assert_array_equal(loaded, inc)
    assert meta["hurst"] == 0.7
    assert meta["tau"] == 0.02
    assert meta["n_steps"] == 6
    assert meta["n_modes"] == 4
    assert meta["n_traj"] == 3
    assert meta["seed"] == 9


def test_ensemble_dump_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + b"\0" * 64)
    with pytest.raises(ValueError):
        fbm.load_ensemble(path)
