"""Flat key/value run configuration.

The file format is ``key = value`` lines grouped under ``[section]`` headers.
Sections are organisational only; keys are globally unique, and any key the
parser does not know is an error rather than a silent ignore.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

from .errors import ConfigError

SCENARIO_NAMES = ("LIN", "CUB", "EXP", "SIN")
OUTCOME_KINDS = ("continuous", "binary", "both")
METHOD_NAMES = ("UW", "UW_R", "FW", "FW_A", "IPSW", "GPPP", "PSPP", "LWP", "AIPW")
SPEC_CHOICES = ("true", "false", "both")
WORKERS_ENV = "NPINFER_WORKERS"

_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


@dataclass(frozen=True)
class SimConfig:
    """Validated settings for a simulation run.

    Dimension identities (``N = H * M_h * N_hj`` and ``n_R = H * m_h * n_hj``)
    are enforced at parse time so downstream code can rely on them.
    """

    N: int
    H: int
    M_h: int
    N_hj: int
    n_A: int
    n_R: int
    m_h: int
    n_hj: int
    gamma1: float
    B: int
    L: int
    K: int
    seed: int
    icc: float = 0.2
    x_noise_scale: float | None = None
    scenarios: tuple[str, ...] = ("LIN",)
    outcome: str = "continuous"
    methods: tuple[str, ...] = METHOD_NAMES
    qr_spec: str = "both"
    pm_spec: str = "both"
    ignore_design: bool = False
    ci_reference: str = "t"
    workers: int | None = None

    def spec_grid(self, which: str) -> tuple[bool, ...]:
        value = self.qr_spec if which == "qr" else self.pm_spec
        if value == "both":
            return (True, False)
        return (value == "true",)


_INT_KEYS = {"N", "H", "M_h", "N_hj", "n_A", "n_R", "m_h", "n_hj", "B", "L", "K", "seed", "workers"}
_FLOAT_KEYS = {"gamma1", "icc", "x_noise_scale"}
_LIST_KEYS = {"scenarios", "methods"}
_CHOICE_KEYS = {"outcome": OUTCOME_KINDS, "qr_spec": SPEC_CHOICES, "pm_spec": SPEC_CHOICES,
                "ci_reference": ("t", "z")}
_BOOL_KEYS = {"ignore_design"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _LIST_KEYS | set(_CHOICE_KEYS) | _BOOL_KEYS

_REQUIRED_SIMULATE = {"N", "H", "M_h", "N_hj", "n_A", "n_R", "m_h", "n_hj",
                      "gamma1", "B", "L", "K", "seed"}
_REQUIRED_ESTIMATE = {"B", "L", "seed"}


def parse_config_text(text: str, source: str = "<config>") -> dict[str, object]:
    """Parse the raw file into typed values, rejecting unknown keys."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            continue  # section headers carry no meaning
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = value

    typed: dict[str, object] = {}
    for key, value in raw.items():
        try:
            if key in _INT_KEYS:
                typed[key] = int(value)
            elif key in _FLOAT_KEYS:
                typed[key] = float(value)
            elif key in _BOOL_KEYS:
                typed[key] = _BOOL[value.lower()]
            elif key in _LIST_KEYS:
                typed[key] = tuple(part.strip() for part in value.split(",") if part.strip())
            else:
                typed[key] = value
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"{source}: bad value for {key!r}: {value!r}") from exc
    return typed


def _validate_lists(values: dict[str, object]) -> None:
    scenarios = values.get("scenarios", ("LIN",))
    for name in scenarios:
        if name not in SCENARIO_NAMES:
            raise ConfigError(f"unknown scenario {name!r}; choose from {SCENARIO_NAMES}")
    methods = values.get("methods")
    if methods is not None:
        if methods == ("all",):
            values["methods"] = METHOD_NAMES
        else:
            for name in methods:
                if name not in METHOD_NAMES:
                    raise ConfigError(f"unknown method {name!r}; choose from {METHOD_NAMES}")
    for key, choices in _CHOICE_KEYS.items():
        if key in values and values[key] not in choices:
            raise ConfigError(f"{key} must be one of {choices}, got {values[key]!r}")


def sim_config_from_values(values: dict[str, object]) -> SimConfig:
    missing = sorted(_REQUIRED_SIMULATE - set(values))
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    _validate_lists(values)
    cfg = SimConfig(**values)

    if cfg.N != cfg.H * cfg.M_h * cfg.N_hj:
        raise ConfigError(f"N = {cfg.N} but H * M_h * N_hj = {cfg.H * cfg.M_h * cfg.N_hj}")
    if cfg.n_R != cfg.H * cfg.m_h * cfg.n_hj:
        raise ConfigError(f"n_R = {cfg.n_R} but H * m_h * n_hj = {cfg.H * cfg.m_h * cfg.n_hj}")
    if cfg.m_h < 2:
        raise ConfigError("m_h must be at least 2 (the cluster bootstrap needs two PSUs per stratum)")
    if cfg.m_h > cfg.M_h:
        raise ConfigError("m_h cannot exceed M_h")
    if cfg.n_hj > cfg.N_hj:
        raise ConfigError("n_hj cannot exceed N_hj")
    if not 0 < cfg.n_A < cfg.N:
        raise ConfigError("n_A must lie strictly between 0 and N")
    if cfg.B < 2:
        raise ConfigError("B must be at least 2")
    if cfg.L < 1:
        raise ConfigError("L must be at least 1")
    if cfg.K < 1:
        raise ConfigError("K must be at least 1")
    if not 0 <= cfg.icc < 1:
        raise ConfigError("icc must lie in [0, 1)")
    if cfg.x_noise_scale is not None and cfg.x_noise_scale < 0:
        raise ConfigError("x_noise_scale must be non-negative")
    if cfg.seed < 0:
        raise ConfigError("seed must be non-negative")
    if cfg.workers is not None and cfg.workers < 1:
        raise ConfigError("workers must be positive")
    if not cfg.scenarios:
        raise ConfigError("scenarios must not be empty")
    if not cfg.methods:
        raise ConfigError("methods must not be empty")
    return cfg


def load_sim_config(path: str) -> SimConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return sim_config_from_values(parse_config_text(text, source=path))


def load_estimate_config(path: str) -> dict[str, object]:
    """Settings for the estimate-on-data mode; only B, L and seed are required."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    values = parse_config_text(text, source=path)
    missing = sorted(_REQUIRED_ESTIMATE - set(values))
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    _validate_lists(values)
    for key in ("B", "L"):
        if int(values[key]) < (2 if key == "B" else 1):
            raise ConfigError(f"{key} too small")
    return values


def resolve_workers(cli_value: int | None, cfg_value: int | None) -> int:
    if cli_value is not None:
        return max(1, cli_value)
    if cfg_value is not None:
        return max(1, cfg_value)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from exc
    return max(1, os.cpu_count() or 1)
