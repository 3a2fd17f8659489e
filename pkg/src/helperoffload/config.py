"""Experiment configuration: YAML loading, defaults and validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .chains import TwoStateChain
from .energy import SystemParams
from .policies import POLICY_NAMES

SWEEP_AXES = ("D", "K", "P11", "Q")
_SCALAR_FIELDS = ("D", "K", "t0", "gamma", "w", "lambda0", "gain_good", "gain_bad", "Q")
_PROB_FIELDS = ("P00", "P11", "Pgg", "Pbb")


class ConfigError(ValueError):
    """Raised for invalid configuration values."""


class ConfigParseError(ConfigError):
    """Raised when a configuration file cannot be read or parsed."""


@dataclass
class ExperimentConfig:
    params: SystemParams = field(default_factory=SystemParams)
    policies: list[str] = field(default_factory=lambda: ["zero-opt", "equal"])
    axis: str | None = None
    values: list[float] = field(default_factory=list)
    episodes: int = 10_000
    seed: int = 0
    out: str = "results.csv"
    q_threshold: float | None = None
    rounding: bool = True
    initial: tuple[int, int] | None = None

    def __post_init__(self):
        validate_config(self)


def params_from_dict(d: dict | None) -> SystemParams:
    """Build SystemParams from a flat or nested mapping; missing keys take the defaults."""
    d = dict(d or {})
    for block in ("cpu_chain", "channel_chain"):
        d.update(d.pop(block, None) or {})
    unknown = set(d) - set(_SCALAR_FIELDS) - set(_PROB_FIELDS)
    if unknown:
        raise ConfigError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
    base = SystemParams()
    kw = {}
    for name in _SCALAR_FIELDS:
        if name in d:
            try:
                kw[name] = int(d[name]) if name == "K" else float(d[name])
            except (TypeError, ValueError):
                raise ConfigError(f"params.{name}: expected a number, got {d[name]!r}") from None
    for name in _PROB_FIELDS:
        if name in d:
            try:
                p = float(d[name])
            except (TypeError, ValueError):
                raise ConfigError(f"params.{name}: expected a probability, got {d[name]!r}") from None
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"params.{name}: probability must lie in [0, 1], got {p}")
            kw[name] = p
    cpu = TwoStateChain(kw.pop("P00", base.P00), kw.pop("P11", base.P11))
    chan = TwoStateChain(kw.pop("Pgg", base.Pgg), kw.pop("Pbb", base.Pbb))
    for name in ("D", "Q"):
        if name in kw and kw[name] == int(kw[name]):
            kw[name] = int(kw[name])
    try:
        return SystemParams(cpu_chain=cpu, channel_chain=chan, **kw)
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from None


def validate_config(cfg: ExperimentConfig) -> None:
    for p in cfg.policies:
        if p not in POLICY_NAMES:
            raise ConfigError(f"policies: unknown policy {p!r}; choose from {', '.join(POLICY_NAMES)}")
    if cfg.axis is not None:
        if cfg.axis not in SWEEP_AXES:
            raise ConfigError(f"sweep.axis: must be one of {', '.join(SWEEP_AXES)}, got {cfg.axis!r}")
        if not cfg.values:
            raise ConfigError("sweep.values: at least one value is required")
        for v in cfg.values:
            if cfg.axis == "P11":
                if not 0.0 <= v <= 1.0:
                    raise ConfigError(f"sweep.values: P11 must lie in [0, 1], got {v}")
            elif v != int(v) or v < (0 if cfg.axis == "Q" else 1):
                raise ConfigError(f"sweep.values: {cfg.axis} needs {'non-negative' if cfg.axis == 'Q' else 'positive'} integers, got {v}")
    if int(cfg.episodes) != cfg.episodes or cfg.episodes < 1:
        raise ConfigError(f"episodes: must be a positive integer, got {cfg.episodes}")
    if int(cfg.seed) != cfg.seed or cfg.seed < 0:
        raise ConfigError(f"seed: must be a non-negative integer, got {cfg.seed}")
    if "bacs" in cfg.policies and cfg.q_threshold is not None and cfg.q_threshold < 0:
        raise ConfigError("q_threshold: must be non-negative")


def expand_values(spec) -> list[float]:
    """Sweep values from a list or a ``{start, stop, step}`` mapping (stop inclusive)."""
    if isinstance(spec, dict):
        try:
            start, stop, step = (float(spec[k]) for k in ("start", "stop", "step"))
        except KeyError as exc:
            raise ConfigError(f"sweep.values: range needs start, stop and step (missing {exc})") from None
        if step <= 0:
            raise ConfigError("sweep.values: step must be positive")
        n = int(round((stop - start) / step))
        return [round(start + i * step, 12) for i in range(n + 1)]
    if isinstance(spec, (int, float)):
        return [float(spec)]
    try:
        return [float(v) for v in spec]
    except (TypeError, ValueError):
        raise ConfigError(f"sweep.values: expected a list of numbers, got {spec!r}") from None


def parse_values(text: str) -> list[float]:
    """Parse ``--values`` text: ``1000,2000,3000`` or ``1000:5000:1000``."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"--values range must be start:stop:step, got {text!r}")
        return expand_values(dict(zip(("start", "stop", "step"), parts)))
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values: cannot parse {text!r}") from None


def config_from_dict(raw: dict | None) -> ExperimentConfig:
    raw = dict(raw or {})
    known = {"params", "policies", "sweep", "episodes", "seed", "out", "q_threshold", "rounding", "initial"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    kw = {"params": params_from_dict(raw.get("params"))}
    if "policies" in raw:
        pol = raw["policies"]
        kw["policies"] = [pol] if isinstance(pol, str) else list(pol)
    sweep = raw.get("sweep") or {}
    if sweep:
        kw["axis"] = sweep.get("axis")
        kw["values"] = expand_values(sweep.get("values", []))
    for key in ("episodes", "seed", "q_threshold"):
        if raw.get(key) is not None:
            try:
                kw[key] = float(raw[key]) if key == "q_threshold" else int(raw[key])
            except (TypeError, ValueError):
                raise ConfigError(f"{key}: expected a number, got {raw[key]!r}") from None
    if "out" in raw:
        kw["out"] = str(raw["out"])
    if "rounding" in raw:
        kw["rounding"] = bool(raw["rounding"])
    if raw.get("initial") is not None:
        init = raw["initial"]
        try:
            c = {"busy": 0, "idle": 1}[str(init["cpu"]).lower()]
            h = {"good": 0, "bad": 1}[str(init["channel"]).lower()]
        except (KeyError, TypeError):
            raise ConfigError("initial: expected {cpu: busy|idle, channel: good|bad}") from None
        kw["initial"] = (c, h)
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    """Read a YAML experiment file. An empty file yields the default scenario."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigParseError(f"{path}: YAML parse error{where}: {getattr(exc, 'problem', exc)}") from None
    if raw is not None and not isinstance(raw, dict):
        raise ConfigParseError(f"{path}: top level must be a mapping")
    return config_from_dict(raw)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {
        "params": cfg.params.to_dict(),
        "policies": list(cfg.policies),
        "episodes": cfg.episodes,
        "seed": cfg.seed,
        "out": cfg.out,
        "rounding": cfg.rounding,
    }
    if cfg.axis:
        out["sweep"] = {"axis": cfg.axis, "values": list(cfg.values)}
    if cfg.q_threshold is not None:
        out["q_threshold"] = cfg.q_threshold
    if cfg.initial is not None:
        out["initial"] = {"cpu": ("busy", "idle")[cfg.initial[0]], "channel": ("good", "bad")[cfg.initial[1]]}
    return out


