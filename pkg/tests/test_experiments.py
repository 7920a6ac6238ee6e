import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracspde import spectral
from fracspde.experiments import (
    ExperimentConfig,
    LevelResult,
    StudyResult,
    emit_table,
    pathwise_error,
    predict_rates,
    run_convergence_study,
)
from fracspde.solver import ModelParams


def _config(**kw):
    base = dict(alpha=0.3, s=0.7, hurst=0.8, m=-1.0, axis="time",
                levels=(4, 8, 16), fixed_other=8, n_traj=6, seed=11)
    base.update(kw)
    return ExperimentConfig(**base)


# ---------------------------------------------------------------------------
# rate prediction


def test_predict_rates_examples():
    p = predict_rates(ModelParams(alpha=0.3, s=0.7, hurst=0.3, m=0.0))
    assert p.rho == pytest.approx(0.25)
    assert p.temporal == pytest.approx(0.3 - 0.25 * 0.3 / 0.7, abs=1e-12)
    assert round(p.temporal, 3) == 0.193

    p = predict_rates(ModelParams(alpha=0.5, s=0.5, hurst=0.5, m=-0.5))
    assert p.rho == pytest.approx(0.125)
    assert p.temporal == pytest.approx(0.375)


def test_predict_rates_clamps_rho():
    # m=-1 (and below) clamp rho to 0: temporal rate = H,
    # spatial rate = 2 min(s, sH/alpha)
    for m in (-1.0, -2.0):
        p = predict_rates(ModelParams(alpha=0.3, s=0.7, hurst=0.8, m=m))
        assert p.rho == 0.0
        assert p.temporal == pytest.approx(0.8)
        assert p.spatial == pytest.approx(2 * min(0.7, 0.7 * 0.8 / 0.3))

    # sigma is clamped at zero too
    p = predict_rates(ModelParams(alpha=0.9, s=0.3, hurst=0.1, m=1.0))
    assert p.sigma == 0.0
    assert p.spatial == 0.0


# ---------------------------------------------------------------------------
# pathwise error


def test_pathwise_error_basics():
    a = np.array([1.0, 2.0, 3.0])
    assert pathwise_error(a, a) == 0.0
    b = a.copy()
    b[0] += 0.25
    assert pathwise_error(a, b) == pytest.approx(0.25)


def test_pathwise_error_zero_pads():
    coarse = np.array([1.0, 1.0])
    fine = np.array([1.0, 1.0, 2.0, -2.0])
    assert pathwise_error(coarse, fine) == pytest.approx(np.sqrt(8.0))
    assert pathwise_error(fine, coarse) == pytest.approx(np.sqrt(8.0))


def test_pathwise_error_matches_grid_quadrature():
    rng = np.random.default_rng(23)
    coarse = rng.standard_normal(8)
    fine = rng.standard_normal(16)
    m = 4095
    diff = spectral.synthesize(fine, m).copy()
    diff -= spectral.synthesize(coarse, m)
    quad = np.sqrt(np.sum(diff ** 2) / (m + 1))
    assert pathwise_error(coarse, fine) == pytest.approx(quad, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31), na=st.integers(1, 12),
       nb=st.integers(1, 12))
def test_pathwise_error_symmetric_property(seed, na, nb):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(na), rng.standard_normal(nb)
    assert pathwise_error(a, b) == pathwise_error(b, a)
    assert pathwise_error(a, b) >= 0.0


# ---------------------------------------------------------------------------
# configuration validation


def test_config_rejects_bad_axis():
    with pytest.raises(ValueError, match="axis"):
        _config(axis="frequency")


def test_config_rejects_non_doubling_levels():
    with pytest.raises(ValueError, match="double"):
        _config(levels=(4, 8, 24))
    with pytest.raises(ValueError, match="double"):
        _config(levels=(8, 4))
    with pytest.raises(ValueError):
        _config(levels=())


def test_config_bounds():
    with pytest.raises(ValueError, match="n_traj"):
        _config(n_traj=1)
    with pytest.raises(ValueError, match="seed"):
        _config(seed=-3)
    with pytest.raises(ValueError, match="alpha"):
        _config(alpha=2.0)
    with pytest.raises(ValueError, match="fixed_other"):
        _config(fixed_other=0)


# ---------------------------------------------------------------------------
# study behaviour


def test_zero_noise_gives_empty_rates():
    res = run_convergence_study(_config(noise_amplitude=0.0))
    assert all(row.error == 0.0 for row in res.rows)
    assert all(row.observed_rate is None for row in res.rows)


def test_rate_attachment():
    res = run_convergence_study(_config())
    assert [row.level for row in res.rows] == [4, 8, 16]
    assert all(row.observed_rate is not None for row in res.rows[:-1])
    assert res.rows[-1].observed_rate is None
    assert all(row.error > 0 for row in res.rows)
    assert res.theoretical_rate == pytest.approx(0.8)


def test_errors_shrink_under_refinement():
    res = run_convergence_study(_config(levels=(4, 8, 16, 32), n_traj=16))
    errors = [row.error for row in res.rows]
    assert errors[-1] < errors[0]


def test_study_deterministic_across_thread_counts():
    cfg = _config(n_traj=60)      # spans three trajectory batches
    a = run_convergence_study(cfg, threads=1)
    b = run_convergence_study(cfg, threads=3)
    assert a == b


def test_study_space_axis():
    cfg = _config(axis="space", levels=(2, 4, 8), fixed_other=16,
                  hurst=0.3, n_traj=8)
    res = run_convergence_study(cfg)
    assert res.theoretical_rate == pytest.approx(1.4)
    assert len(res.rows) == 3
    assert res.rows[0].observed_rate is not None


def test_threads_validation():
    with pytest.raises(ValueError, match="threads"):
        run_convergence_study(_config(), threads=0)


# ---------------------------------------------------------------------------
# CSV emission


def test_emit_table_format():
    cfg = _config()
    res = StudyResult(config=cfg, prediction=predict_rates(cfg.model_params()),
                      rows=(LevelResult(32, 0.000123456789, 0.5),
                            LevelResult(64, 1e-05, None)))
    buf = io.StringIO()
    emit_table(res, buf)
    assert buf.getvalue() == ("level,error,observed_rate,theoretical_rate\n"
                              "32,0.000123457,0.5,0.8\n"
                              "64,1e-05,,0.8\n")


def test_emit_table_header_only():
    cfg = _config()
    res = StudyResult(config=cfg, prediction=predict_rates(cfg.model_params()),
                      rows=())
    buf = io.StringIO()
    emit_table(res, buf)
    assert buf.getvalue() == "level,error,observed_rate,theoretical_rate\n"


def test_emit_table_to_path(tmp_path):
    res = run_convergence_study(_config())
    target = tmp_path / "table.csv"
    emit_table(res, target)
    lines = target.read_text().splitlines()
    assert lines[0] == "level,error,observed_rate,theoretical_rate"
    assert len(lines) == 4
    # finest row has an empty observed-rate cell
    assert lines[-1].split(",")[2] == ""
