"""Run configuration shared by the CLI subcommands."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import InvalidConfigError, PersistenceError
from .process_tensor import CrossBlockMode, Scheme, TruncationConfig


@dataclass(frozen=True)
class RunConfig:
    j: float = 0.25
    jprime: float = 0.25
    depth: int = 8
    chi_max: int = 64
    cutoff: float = 1e-12
    cross_block_mode: CrossBlockMode = CrossBlockMode.KEEP_COLUMN
    scheme: Scheme = Scheme.PRESERVING
    lambda_points: int | None = None
    observable: str = "pauli_z"
    output_path: str | None = None
    output_format: str = "csv"
    threads: int | str = 1
    cache_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "cross_block_mode", CrossBlockMode(self.cross_block_mode))
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if int(self.depth) != self.depth or self.depth < 1:
            raise InvalidConfigError(f"depth must be an integer >= 1, got {self.depth}")
        object.__setattr__(self, "depth", int(self.depth))
        if self.lambda_points is not None and self.lambda_points < 2 * self.depth + 1:
            raise InvalidConfigError(
                f"lambda_points = {self.lambda_points} < 2*depth+1 = {2 * self.depth + 1}"
            )
        if self.observable != "pauli_z":
            raise InvalidConfigError(f"unknown observable {self.observable!r}")
        if self.output_format not in ("csv", "json"):
            raise InvalidConfigError(f"unknown output format {self.output_format!r}")
        if self.threads != "auto" and (int(self.threads) != self.threads or int(self.threads) < 1):
            raise InvalidConfigError(f"threads must be a positive integer or 'auto', got {self.threads}")
        self.truncation  # validates chi_max and cutoff

    @property
    def truncation(self) -> TruncationConfig:
        return TruncationConfig(self.chi_max, self.cutoff, self.cross_block_mode, self.scheme)

    @property
    def n_threads(self) -> int:
        if self.threads == "auto":
            return os.cpu_count() or 1
        return int(self.threads)

    @property
    def n_lambda(self) -> int:
        return self.lambda_points if self.lambda_points is not None else 4 * self.depth + 1

    def echo(self) -> dict[str, Any]:
        out = asdict(self)
        out["cross_block_mode"] = self.cross_block_mode.value
        out["scheme"] = self.scheme.value
        return out


FIELD_NAMES = {f.name for f in fields(RunConfig)}


def load_config_file(path: str | os.PathLike) -> dict[str, Any]:
    """Read a YAML or JSON mapping; keys may use dashes or underscores."""
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise PersistenceError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise InvalidConfigError(f"config {path} is not valid YAML/JSON: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise InvalidConfigError(f"config {path} must hold a mapping")
    out = {}
    for k, v in data.items():
        key = str(k).replace("-", "_")
        key = {"chi": "chi_max", "mode": "cross_block_mode", "format": "output_format", "output": "output_path"}.get(
            key, key
        )
        if key not in FIELD_NAMES:
            raise InvalidConfigError(f"unknown config key {k!r}")
        out[key] = v
    return out


def merge_config(file_values: Mapping[str, Any], flag_values: Mapping[str, Any]) -> RunConfig:
    """Flags that were given override file values; both override defaults."""
    merged = dict(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None and k in FIELD_NAMES})
    try:
        return RunConfig(**merged)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidConfigError):
            raise
        raise InvalidConfigError(str(exc)) from exc
