"""Command line front end.

Three subcommands:

* ``study``       run a convergence study, write ``table.csv`` + ``manifest.json``
* ``trajectory``  run one path at the finest level, dump ``trajectory.bin``
* ``selftest``    quick internal consistency checks, exit status 0/1

Configuration is a plain-text file of ``key = value`` lines (``#`` starts
a comment).  Recognised keys:

    alpha, s, hurst, m     model parameters (floats)
    t_final                final time (default 0.01)
    axis                   "time" or "space"
    levels                 comma-separated refinement ladder, e.g. 32,64,128
    fixed_other            resolution of the non-swept axis (int)
    n_traj                 Monte Carlo sample size (default 100)
    seed                   master seed, drives all randomness (int)
    nonlinearity           "sin" or "zero" (default sin)

Any key can be overridden on the command line with ``--set key=value``.
Unknown or missing keys are reported by name.  There is no wall-clock
entropy anywhere: everything random follows from ``seed``.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, cq, fbm, mlf, solver
from .experiments import ExperimentConfig, emit_table, run_convergence_study

__all__ = ["RunSpec", "parse_config", "serialize_config", "run", "main"]

_CONFIG_KEYS = ("alpha", "s", "hurst", "m", "t_final", "axis", "levels",
                "fixed_other", "n_traj", "seed", "nonlinearity")
_DEFAULTS = {"t_final": 0.01, "n_traj": 100, "nonlinearity": "sin"}


@dataclass(frozen=True)
class RunSpec:
    """One CLI invocation: command, config location, outputs, overrides."""

    command: str
    config_path: str | None = None
    output_dir: str | None = None
    overrides: tuple = ()
    threads: int | None = None


def _parse_value(key: str, raw: str):
    try:
        if key in ("alpha", "s", "hurst", "m", "t_final"):
            return float(raw)
        if key in ("fixed_other", "n_traj", "seed"):
            return int(raw)
        if key == "levels":
            return tuple(int(part.strip()) for part in raw.split(","))
        if key in ("axis", "nonlinearity"):
            return raw
    except ValueError:
        raise ValueError(f"bad value for config key {key!r}: {raw!r}") from None
    raise ValueError(f"unknown config key {key!r}")


def parse_config(text: str, overrides=()) -> ExperimentConfig:
    """Parse ``key = value`` lines, apply overrides, validate."""
    values = dict(_DEFAULTS)
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"unknown config key {key!r}")
        if key in seen:
            raise ValueError(f"duplicate config key {key!r}")
        seen.add(key)
        values[key] = _parse_value(key, raw)
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"--set needs key=value, got {item!r}")
        key, _, raw = item.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"unknown config key {key!r}")
        values[key] = _parse_value(key, raw)
    missing = sorted(set(_CONFIG_KEYS) - values.keys())
    if missing:
        raise ValueError(f"missing required config key {missing[0]!r}")
    return ExperimentConfig(**values)


def serialize_config(config: ExperimentConfig) -> str:
    """Inverse of :func:`parse_config` (up to formatting)."""
    lines = []
    for key in _CONFIG_KEYS:
        value = getattr(config, key)
        if key == "levels":
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _write_manifest(out_dir: Path, config: ExperimentConfig, command: str) -> None:
    echo = {key: getattr(config, key) for key in _CONFIG_KEYS}
    echo["levels"] = list(config.levels)
    payload = {"command": command, "config": echo, "seed": config.seed,
               "version": __version__}
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config(spec: RunSpec) -> ExperimentConfig:
    text = Path(spec.config_path).read_text()
    return parse_config(text, spec.overrides)


def _cmd_study(spec: RunSpec) -> int:
    config = _load_config(spec)
    result = run_convergence_study(config, threads=spec.threads)
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    emit_table(result, out_dir / "table.csv")
    _write_manifest(out_dir, config, "study")
    for row in result.rows:
        rate = "" if row.observed_rate is None else f"  rate {row.observed_rate:.3f}"
        print(f"level {row.level:>6d}  error {row.error:.6g}{rate}")
    print(f"theoretical rate {result.theoretical_rate:.3f}")
    return 0


def _cmd_trajectory(spec: RunSpec) -> int:
    config = _load_config(spec)
    params = config.model_params()
    if config.axis == "time":
        n_modes, n_steps = config.fixed_other, config.levels[-1]
    else:
        n_modes, n_steps = config.levels[-1], config.fixed_other
    disc = solver.Discretization(n_modes=n_modes, n_steps=n_steps,
                                 tau=config.t_final / n_steps)
    increments = fbm.mode_increments(config.hurst, disc.tau, n_steps,
                                     config.seed, n_modes, [0])
    states = solver.run_trajectory(params, disc, increments[0])
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    solver.dump_trajectory(out_dir / "trajectory.bin", states, params, disc,
                           config.seed)
    _write_manifest(out_dir, config, "trajectory")
    print(f"wrote {out_dir / 'trajectory.bin'} "
          f"({n_steps + 1} levels x {n_modes} modes)")
    return 0


# ---------------------------------------------------------------------------
# selftest suites


def _selftest_fbm() -> str:
    h, n_steps, n_paths = 0.8, 32, 4000
    rng = np.random.default_rng(1234)
    paths = fbm.sample_fbm_circulant(h, 1.0, n_steps, rng, n_paths)
    totals = paths.sum(axis=1)
    var = totals.var(ddof=1)
    target = float(n_steps) ** (2 * h)
    se = math.sqrt(2.0 / (n_paths - 1)) * target
    if abs(var - target) > 5 * se:
        raise AssertionError(
            f"Var(W(T)) = {var:.4g}, expected {target:.4g} +- {5 * se:.2g}")
    return f"endpoint variance {var:.4g} vs {target:.4g}"


def _selftest_cq() -> str:
    worst = 0.0
    for alpha in (0.3, 0.7):
        a = 1.0 - alpha
        fast = cq.cq_weights(a, 0.01, 32)
        slow = cq.weights_by_series(a, 0.01, 32)
        worst = max(worst, float(np.max(np.abs(fast - slow) / np.abs(slow))))
    if worst > 1e-12:
        raise AssertionError(f"weight mismatch, rel {worst:.2e}")
    return f"recurrence vs series, rel {worst:.2e}"


def _selftest_mlf() -> str:
    checks = [
        (1.0, 1.0, -1.0, math.exp(-1.0)),
        (1.0, 2.0, -2.0, -math.expm1(-2.0) / 2.0),
        (0.5, 1.0, -1.0, 0.427583576155807),
        (0.5, 2.0, -1.0, 0.5559627432513196),
    ]
    worst = 0.0
    for alpha, beta, z, ref in checks:
        got = mlf.mittag_leffler(alpha, beta, z)
        worst = max(worst, abs(got - ref) / abs(ref))
    if worst > 1e-10:
        raise AssertionError(f"value mismatch, rel {worst:.2e}")
    return f"reference values, rel {worst:.2e}"


def _selftest_solver_order() -> str:
    alpha, lam_s, t_final = 0.5, np.array([1.0]), 1.0
    ref = mlf.linear_mode_reference(1.0, alpha, 1.0, t_final)
    errors = []
    for n_steps in (16, 32, 64, 128):
        tau = t_final / n_steps
        weights = cq.cq_weights(1.0 - alpha, tau, n_steps)
        history = np.zeros((n_steps + 1, 1))
        for n in range(1, n_steps + 1):
            history[n] = solver.step(history[:n], weights, lam_s, tau, 1.0, 0.0)
        errors.append(abs(history[n_steps, 0] - ref))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    mean = float(orders.mean())
    if not 0.85 <= mean <= 1.15:
        raise AssertionError(f"observed order {mean:.3f}, expected ~1")
    return f"scalar backward-Euler order {mean:.3f}"


def _cmd_selftest(spec: RunSpec) -> int:
    suites = [
        ("fbm sampler statistics", _selftest_fbm),
        ("cq weight table", _selftest_cq),
        ("mittag-leffler values", _selftest_mlf),
        ("scalar solver order", _selftest_solver_order),
    ]
    failed = []
    for name, fn in suites:
        try:
            detail = fn()
            print(f"ok   {name}: {detail}")
        except Exception as exc:
            failed.append(name)
            print(f"FAIL {name}: {exc}")
    if failed:
        print(f"selftest failed: {', '.join(failed)}")
        return 1
    print("selftest passed")
    return 0


_HANDLERS = {"study": _cmd_study, "trajectory": _cmd_trajectory,
             "selftest": _cmd_selftest}


def run(spec: RunSpec) -> int:
    """Execute one invocation; returns the process exit status."""
    try:
        return _HANDLERS[spec.command](spec)
    except (ValueError, OSError, solver.SolverError, mlf.MittagLefflerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracspde",
        description="convergence studies for a stochastic time-fractional "
                    "diffusion equation")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("study", "run a convergence study"),
                            ("trajectory", "dump one finest-level trajectory")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--threads", type=int, default=None,
                       help="max worker threads (default: machine parallelism)")
    sub.add_parser("selftest", help="run built-in consistency checks")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    spec = RunSpec(command=args.command,
                   config_path=getattr(args, "config", None),
                   output_dir=getattr(args, "out", None),
                   overrides=tuple(getattr(args, "set", None) or ()),
                   threads=getattr(args, "threads", None))
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
