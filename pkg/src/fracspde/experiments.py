"""Monte Carlo convergence-rate studies and their theoretical predictions.

The observed quantities are strong errors between coupled discrete
solutions on adjacent refinement levels,

    e_l = sqrt( E ||u_l - u_{2l}||^2_{L2(0,1)} ),

estimated over a trajectory ensemble.  Coupling means both resolutions are
driven by the same noise realisation: on the time axis every trajectory is
sampled once at the finest step count and coarsened by summing adjacent
increments, on the space axis all runs share the modewise noise of the
largest mode count.  Observed rates are log2 ratios of consecutive errors
and are attached to the coarser of the two levels.

The predicted rates come from the regularity exponents of the model: with
noise spectrum Lambda_k = k^m in d = 1 dimensions let

    rho   = max(0, (1 + m) d / 4)
    sigma = max(0, min(s - rho, s H / alpha - rho))

Then the expected temporal order is H - rho * alpha / s and the spatial
order (in the mode count N) is 2 sigma / d.
"""
from __future__ import annotations

import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import fbm
from .solver import Discretization, ModelParams, SolverError, run_ensemble

__all__ = [
    "ExperimentConfig",
    "RatePrediction",
    "LevelResult",
    "StudyResult",
    "predict_rates",
    "pathwise_error",
    "run_convergence_study",
    "emit_table",
]

#: trajectories per batch; fixed so that results do not depend on the
#: worker count (every batch draws its own seeded streams and the final
#: reduction runs over a preallocated array in trajectory order).
_CHUNK = 25

_AXES = ("time", "space")


@dataclass(frozen=True)
class RatePrediction:
    rho: float
    sigma: float
    temporal: float
    spatial: float


def predict_rates(params: ModelParams, dim: int = 1) -> RatePrediction:
    """Theoretical strong convergence orders for a parameter set."""
    rho = max(0.0, (1.0 + params.m) * dim / 4.0)
    temporal = max(0.0, params.hurst - rho * params.alpha / params.s)
    sigma = max(0.0, min(params.s - rho,
                         params.s * params.hurst / params.alpha - rho))
    return RatePrediction(rho=rho, sigma=sigma, temporal=temporal,
                          spatial=2.0 * sigma / dim)


@dataclass(frozen=True)
class ExperimentConfig:
    """One convergence study: model parameters plus the refinement ladder.

    ``axis`` selects what is refined: "time" sweeps the step count over
    ``levels`` at ``fixed_other`` modes, "space" sweeps the mode count at
    ``fixed_other`` steps.  Levels must double from one to the next so the
    coupled refinement (one extra run at twice the finest level) lines up.
    ``noise_amplitude`` scales the noise and exists for diagnostics; 0
    makes the dynamics deterministic.
    """

    alpha: float
    s: float
    hurst: float
    m: float
    axis: str
    levels: tuple
    fixed_other: int
    n_traj: int = 100
    seed: int = 0
    t_final: float = 0.01
    nonlinearity: str = "sin"
    noise_amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(v) for v in self.levels))
        if self.axis not in _AXES:
            raise ValueError(f"axis must be 'time' or 'space', got {self.axis!r}")
        if not self.levels:
            raise ValueError("levels must be non-empty")
        if any(v < 1 for v in self.levels):
            raise ValueError(f"levels must be positive, got {self.levels}")
        for a, b in zip(self.levels, self.levels[1:]):
            if b != 2 * a:
                raise ValueError(
                    f"levels must double at each refinement, got {a} -> {b}")
        if self.fixed_other < 1:
            raise ValueError(f"fixed_other must be >= 1, got {self.fixed_other}")
        if self.n_traj < 2:
            raise ValueError(f"n_traj must be >= 2, got {self.n_traj}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if self.noise_amplitude < 0.0:
            raise ValueError("noise_amplitude must be >= 0")
        # delegate the remaining parameter validation
        self.model_params()

    def model_params(self) -> ModelParams:
        return ModelParams(alpha=self.alpha, s=self.s, hurst=self.hurst,
                           m=self.m, t_final=self.t_final,
                           nonlinearity=self.nonlinearity)


@dataclass(frozen=True)
class LevelResult:
    level: int
    error: float
    observed_rate: float | None


@dataclass(frozen=True)
class StudyResult:
    config: ExperimentConfig
    prediction: RatePrediction
    rows: tuple = field(default_factory=tuple)

    @property
    def theoretical_rate(self) -> float:
        return (self.prediction.temporal if self.config.axis == "time"
                else self.prediction.spatial)


def pathwise_error(coeffs_a: np.ndarray, coeffs_b: np.ndarray) -> np.ndarray:
    """L2(0,1) distance of two expansions, zero-padding the shorter one.

    Broadcasts over leading axes; the last axis is the mode index.  Since
    the modes are orthonormal this is just the euclidean norm of the
    coefficient difference.
    """
    coeffs_a = np.asarray(coeffs_a, dtype=float)
    coeffs_b = np.asarray(coeffs_b, dtype=float)
    na, nb = coeffs_a.shape[-1], coeffs_b.shape[-1]
    n = max(na, nb)
    if na < n:
        pad = [(0, 0)] * (coeffs_a.ndim - 1) + [(0, n - na)]
        coeffs_a = np.pad(coeffs_a, pad)
    if nb < n:
        pad = [(0, 0)] * (coeffs_b.ndim - 1) + [(0, n - nb)]
        coeffs_b = np.pad(coeffs_b, pad)
    return np.sqrt(np.sum((coeffs_a - coeffs_b) ** 2, axis=-1))


def _chunk_squared_errors(config: ExperimentConfig, trajectories) -> np.ndarray:
    """Squared adjacent-pair errors for a batch of trajectory indices.

    Returns an array of shape (len(levels), len(trajectories)): entry
    [i, j] is ||u_{l_i} - u_{2 l_i}||^2 for trajectory j, where the run at
    2 * levels[-1] is the extra refinement closing the last pair.
    """
    params = config.model_params()
    all_levels = list(config.levels) + [2 * config.levels[-1]]
    t_final = config.t_final
    out = np.empty((len(config.levels), len(trajectories)))

    first_traj = trajectories[0] if len(trajectories) else 0
    if config.axis == "time":
        n_modes = config.fixed_other
        finest = all_levels[-1]
        increments = fbm.mode_increments(
            config.hurst, t_final / finest, finest, config.seed, n_modes,
            trajectories)
        previous = None
        for i, n_steps in enumerate(all_levels):
            group = finest // n_steps
            coarse = increments.reshape(
                len(trajectories), n_steps, group, n_modes).sum(axis=2)
            disc = Discretization(n_modes=n_modes, n_steps=n_steps,
                                  tau=t_final / n_steps)
            try:
                final = run_ensemble(params, disc, coarse, config.noise_amplitude)
            except SolverError as exc:
                raise SolverError(
                    f"level {n_steps}: {exc} [trajectory indices offset by "
                    f"{first_traj}]") from exc
            if previous is not None:
                out[i - 1] = np.sum((previous - final) ** 2, axis=-1)
            previous = final
    else:
        n_steps = config.fixed_other
        tau = t_final / n_steps
        widest = all_levels[-1]
        increments = fbm.mode_increments(
            config.hurst, tau, n_steps, config.seed, widest, trajectories)
        previous = None
        for i, n_modes in enumerate(all_levels):
            disc = Discretization(n_modes=n_modes, n_steps=n_steps, tau=tau)
            try:
                final = run_ensemble(params, disc, increments[:, :, :n_modes],
                                     config.noise_amplitude)
            except SolverError as exc:
                raise SolverError(
                    f"level {n_modes}: {exc} [trajectory indices offset by "
                    f"{first_traj}]") from exc
            if previous is not None:
                out[i - 1] = pathwise_error(previous, final) ** 2
            previous = final
    return out


def run_convergence_study(config: ExperimentConfig,
                          threads: int | None = None) -> StudyResult:
    """Estimate strong errors and observed rates over the refinement ladder.

    Trajectories are processed in fixed-size batches; batches may run on a
    thread pool (``threads`` caps the workers) but each writes into its own
    slice of the accumulator, so the result is identical for any worker
    count.  The observed rate log2(e_l / e_{l+1}) sits on the coarser
    level's row; the finest row has none.  Rates are omitted (None) when
    an error vanishes, e.g. with zero noise amplitude.
    """
    n_traj = config.n_traj
    chunks = [range(lo, min(lo + _CHUNK, n_traj))
              for lo in range(0, n_traj, _CHUNK)]
    sq_errors = np.empty((len(config.levels), n_traj))

    def work(chunk):
        sq_errors[:, chunk.start:chunk.stop] = _chunk_squared_errors(config, chunk)

    if threads is not None and threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    max_workers = min(len(chunks), threads or (os.cpu_count() or 1))
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            list(pool.map(work, chunks))
    else:
        for chunk in chunks:
            work(chunk)

    errors = np.sqrt(np.mean(sq_errors, axis=1))
    rows = []
    for i, level in enumerate(config.levels):
        rate = None
        if i + 1 < len(errors):
            e0, e1 = errors[i], errors[i + 1]
            if e0 > 0.0 and e1 > 0.0 and np.isfinite(e0) and np.isfinite(e1):
                rate = float(np.log2(e0 / e1))
        rows.append(LevelResult(level=level, error=float(errors[i]),
                                observed_rate=rate))
    return StudyResult(config=config,
                       prediction=predict_rates(config.model_params()),
                       rows=tuple(rows))


def _fmt(value) -> str:
    return "" if value is None else f"{value:.6g}"


def emit_table(result: StudyResult, destination) -> None:
    """Write the study as CSV: level,error,observed_rate,theoretical_rate.

    Numbers use 6 significant digits; undefined rates are empty cells.
    ``destination`` is a path or a text stream.  An empty study still gets
    the header line.
    """
    lines = ["level,error,observed_rate,theoretical_rate"]
    theo = result.theoretical_rate
    for row in result.rows:
        lines.append(",".join([str(row.level), _fmt(row.error),
                               _fmt(row.observed_rate), _fmt(theo)]))
    text = "\n".join(lines) + "\n"
    if isinstance(destination, io.TextIOBase) or hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", newline="") as fh:
            fh.write(text)
