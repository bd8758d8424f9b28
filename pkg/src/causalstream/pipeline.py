"""End-to-end run over a finite stream, shared by the CLI and the tests.

The first third of the stream is the tuning prefix. Its per-variable mean
and standard deviation z-normalise the whole stream, and it is where an
``auto`` regime threshold is calibrated.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, RunConfig
from .engine import RegimeEngine, StepOutput, calibrate_tau_unit

__all__ = ["Normalizer", "fit_normalizer", "resolve_tau_unit", "RunResult", "run_engine", "tuning_length"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    def forward(self, x):
        return (np.asarray(x, dtype=float) - self._col(self.mean, x)) / self._col(self.std, x)

    def inverse(self, z):
        return np.asarray(z, dtype=float) * self._col(self.std, z) + self._col(self.mean, z)

    @staticmethod
    def _col(v, x):
        return v[:, None] if np.ndim(x) == 2 else v

    @classmethod
    def identity(cls, d: int) -> "Normalizer":
        return cls(np.zeros(d), np.ones(d))


def tuning_length(n: int) -> int:
    return max(1, n // 3)


def fit_normalizer(x) -> Normalizer:
    """Mean and standard deviation of the tuning prefix, with constant
    variables left unscaled."""
    x = np.asarray(x, dtype=float)
    prefix = x[:, : tuning_length(x.shape[1])]
    prefix = prefix[:, np.all(np.isfinite(prefix), axis=0)]
    if prefix.shape[1] == 0:
        raise ConfigError("tuning prefix has no finite rows")
    std = prefix.std(axis=1)
    return Normalizer(prefix.mean(axis=1), np.where(std > 0, std, 1.0))


def resolve_tau_unit(z, cfg: RunConfig) -> float:
    if cfg.tau_unit != "auto":
        return float(cfg.tau_unit)
    prefix = z[:, : tuning_length(z.shape[1])]
    prefix = prefix[:, np.all(np.isfinite(prefix), axis=0)]
    if prefix.shape[1] <= cfg.n_window:
        raise ConfigError(
            f"tau_unit=auto needs a tuning third longer than n_window={cfg.n_window}; "
            f"got {prefix.shape[1]} rows"
        )
    base = calibrate_tau_unit(prefix, cfg.engine_config(1.0), cfg.tau_quantile)
    return base * cfg.tau_margin


@dataclass
class RunResult:
    steps: list
    ticks: list
    engine: RegimeEngine
    normalizer: Normalizer
    tau_unit: float
    skipped: list = field(default_factory=list)

    def forecasts(self) -> np.ndarray:
        """Forecasts in original units, one row per step."""
        return np.array([self.normalizer.inverse(s.forecast) for s in self.steps])


def run_engine(x, cfg: RunConfig, ticks=None, on_step=None) -> RunResult:
    """Run the engine over ``x`` (d x T).

    ``ticks`` labels the columns (default ``1..T``). Columns with non-finite
    values are skipped with a warning. ``on_step(tick, step, result)`` is
    called after every post-warm-up tick.
    """
    x = np.asarray(x, dtype=float)
    d, n = x.shape
    ticks = list(range(1, n + 1)) if ticks is None else list(ticks)
    norm = fit_normalizer(x) if cfg.normalize else Normalizer.identity(d)
    z = norm.forward(x)
    tau_unit = resolve_tau_unit(z, cfg)
    engine = RegimeEngine(d, cfg.engine_config(tau_unit))
    result = RunResult(steps=[], ticks=[], engine=engine, normalizer=norm, tau_unit=tau_unit)
    for tick, col in zip(ticks, z.T):
        try:
            step: StepOutput | None = engine.process_tick(col)
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            log.warning("skipping tick %s: %s", tick, exc)
            result.skipped.append(tick)
            continue
        if step is None:
            continue
        result.steps.append(step)
        result.ticks.append(tick)
        if on_step is not None:
            on_step(tick, step, result)
    return result
