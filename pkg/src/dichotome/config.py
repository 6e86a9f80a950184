"""Versioned run configuration read from a flat TOML file."""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import check_gamma
from .errors import ConfigError
from .scalespace import ScaleSpaceConfig

CONFIG_VERSION = 1

_SCALE_KEYS = {f.name for f in dataclasses.fields(ScaleSpaceConfig)}


@dataclass(frozen=True)
class RunConfig:
    """Parameters shared by the CLI commands.

    Scale-space keys (``sigma2_levels``, ``gamma_set``, ``thr_plus``, ...) sit
    at the top level of the file next to the command keys below.
    """

    version: int = CONFIG_VERSION
    gamma: float | None = None
    gammas: tuple[float, ...] = ()
    mesh: tuple[int, int] = (30, 30)
    bins: int = 16
    threads: int | None = None
    scale_space: ScaleSpaceConfig = field(default_factory=ScaleSpaceConfig)

    def __post_init__(self) -> None:
        if self.version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {self.version!r}")
        for g in ((self.gamma,) if self.gamma is not None else ()) + tuple(self.gammas):
            try:
                check_gamma(g)
            except ValueError as exc:
                raise ConfigError(f"invalid gamma {g!r}: {exc}") from None
        if len(self.mesh) != 2 or min(self.mesh) < 1:
            raise ConfigError(f"mesh must be two positive integers, got {self.mesh!r}")
        if self.bins < 1:
            raise ConfigError("bins must be >= 1")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> "RunConfig":
        data = dict(data)
        scale = {k: data.pop(k) for k in list(data) if k in _SCALE_KEYS}
        known = {f.name for f in dataclasses.fields(cls)} - {"scale_space"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if "version" not in data:
            raise ConfigError("config file lacks a version field")
        if "gammas" in data:
            data["gammas"] = tuple(float(g) for g in data["gammas"])
        if "mesh" in data:
            data["mesh"] = tuple(int(v) for v in data["mesh"])
        try:
            return cls(scale_space=ScaleSpaceConfig(**scale), **data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Copy with non-None overrides applied; scale-space keys allowed."""
        overrides = {k: v for k, v in overrides.items() if v is not None}
        scale = {k: overrides.pop(k) for k in list(overrides) if k in _SCALE_KEYS}
        scale_space = dataclasses.replace(self.scale_space, **scale) if scale else self.scale_space
        return dataclasses.replace(self, scale_space=scale_space, **overrides)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return RunConfig.from_mapping(data)
