"""Flat ``key = value`` run configuration.

One namespace covers the generator, the engine and the run driver. Values
come from built-in defaults, then an optional config file, then command-line
flags, each layer overriding the previous one.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .engine import EngineConfig
from .lm import LMConfig
from .synth import GenConfig

__all__ = ["ConfigError", "RunConfig", "parse_config_text", "load_config_file", "build_config"]


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _sequence(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(int(c) for c in text)
    parts = [p for p in str(text).replace(" ", "").split(",") if p]
    if not parts:
        raise ValueError("empty sequence")
    return tuple(int(p) for p in parts)


def _tau(text) -> float | str:
    if isinstance(text, (int, float)):
        return float(text)
    if text.strip().lower() == "auto":
        return "auto"
    return float(text)


@dataclass(frozen=True)
class RunConfig:
    # generator
    d: int = 5
    edge_density: float = 0.5
    weight_low: float = 0.5
    weight_high: float = 2.0
    segment_len: int = 500
    sequence: tuple = (1, 2, 1)
    ar_coeff_low: float = 0.8
    ar_coeff_high: float = 0.998
    ar_noise_var_low: float = 0.01
    ar_noise_var_high: float = 0.1
    redraw_ar_per_segment: bool = False
    # engine
    n_window: int = 50
    h: int = 8
    mu: float = 0.98
    tau_unit: float | str = "auto"
    tau_quantile: float = 1.0
    tau_margin: float = 1.5
    l_s: int = 5
    edge_threshold: float = 0.3
    lm_damping_init: float = 1e-3
    lm_damping_factor: float = 2.0
    lm_max_iter: int = 100
    lm_rel_tol: float = 1e-6
    search_iter: int = 10
    ica_max_iter: int = 200
    ica_tol: float = 1e-4
    demixing_update: str = "window_ica"
    track_iter: int = 5
    freeze_demixing: bool = False
    seed: int = 0
    # driver
    normalize: bool = True
    eval_every: int = 25
    baseline_static: bool = False

    def validate(self) -> "RunConfig":
        """Raise :class:`ConfigError` unless every downstream config builds."""
        try:
            self.gen_config()
            self.engine_config(1.0)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.tau_unit != "auto" and not (isinstance(self.tau_unit, float) and self.tau_unit > 0):
            raise ConfigError("tau_unit must be 'auto' or a positive number")
        if not 0.0 < self.tau_quantile <= 1.0:
            raise ConfigError("tau_quantile must lie in (0, 1]")
        if not self.tau_margin > 0:
            raise ConfigError("tau_margin must be positive")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")
        return self

    def gen_config(self) -> GenConfig:
        return GenConfig(
            d=self.d,
            edge_density=self.edge_density,
            weight_low=self.weight_low,
            weight_high=self.weight_high,
            segment_len=self.segment_len,
            sequence=self.sequence,
            ar_coeff_range=(self.ar_coeff_low, self.ar_coeff_high),
            ar_noise_var_range=(self.ar_noise_var_low, self.ar_noise_var_high),
            redraw_ar_per_segment=self.redraw_ar_per_segment,
            seed=self.seed,
        )

    def engine_config(self, tau_unit: float | None = None) -> EngineConfig:
        tau = self.tau_unit if tau_unit is None else tau_unit
        if tau == "auto":
            raise ConfigError("tau_unit is 'auto'; calibrate it first")
        return EngineConfig(
            n_window=self.n_window,
            h=self.h,
            mu=self.mu,
            tau_unit=float(tau),
            l_s=self.l_s,
            edge_threshold=self.edge_threshold,
            lm=LMConfig(self.lm_damping_init, self.lm_damping_factor, self.lm_max_iter, self.lm_rel_tol),
            search_iter=self.search_iter,
            ica_max_iter=self.ica_max_iter,
            ica_tol=self.ica_tol,
            demixing_update=self.demixing_update,
            track_iter=self.track_iter,
            freeze_demixing=self.freeze_demixing,
            seed=self.seed,
        )


_PARSERS = {}
for _f in fields(RunConfig):
    if _f.name == "sequence":
        _PARSERS[_f.name] = _sequence
    elif _f.name == "tau_unit":
        _PARSERS[_f.name] = _tau
    elif _f.type == "bool":
        _PARSERS[_f.name] = _bool
    elif _f.type == "int":
        _PARSERS[_f.name] = int
    elif _f.type == "float":
        _PARSERS[_f.name] = float
    else:
        _PARSERS[_f.name] = str

KEYS = tuple(_PARSERS)


def parse_config_text(text: str) -> dict:
    """Raw ``{key: value}`` strings from config text; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def load_config_file(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def build_config(file_values: dict | None = None, cli_values: dict | None = None) -> RunConfig:
    """Defaults, overridden by ``file_values``, overridden by ``cli_values``.
    ``None`` entries in ``cli_values`` mean the flag was not given."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (cli_values or {}).items() if v is not None})
    parsed = {}
    for key, value in merged.items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}")
        if isinstance(value, str):
            try:
                value = _PARSERS[key](value)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from exc
        parsed[key] = value
    return replace(RunConfig(), **parsed).validate()
