"""JSON run configuration: tracker, compensation and detector settings plus paths."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Any, Mapping

from .compensation import CompensationConfig
from .detection_io import DetectorModel
from .errors import ConfigError
from .geometry import StereoRig, default_rig, rig_from_dict
from .tracker import Strategy, TrackerConfig


def load_json(path: str | os.PathLike) -> Any:
    spath = os.fspath(path)
    try:
        with open(spath) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"no such file: {spath}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{spath}:{exc.lineno}: invalid JSON: {exc.msg}") from None


def from_mapping(cls, data: Mapping[str, Any] | None, where: str):
    """Instantiate a dataclass from a mapping, rejecting unknown keys."""
    data = data or {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_rig(path: str | os.PathLike | None) -> StereoRig:
    if path is None:
        return default_rig()
    data = load_json(path)
    if not isinstance(data, Mapping):
        raise ConfigError(f"{os.fspath(path)}: rig config must be a JSON object")
    try:
        return rig_from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{os.fspath(path)}: {exc}") from None


@dataclass
class RunConfig:
    rig: str | None = None
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    compensation: CompensationConfig = field(default_factory=CompensationConfig)
    detector: DetectorModel = field(default_factory=DetectorModel)
    strategy: Strategy = Strategy.C
    left: str | None = None
    right: str | None = None
    out: str | None = None
    seed: int | None = None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: str = ".") -> RunConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"run config: unknown keys {sorted(unknown)}")

        def path(key: str, must_exist: bool) -> str | None:
            val = data.get(key)
            if val is None:
                return None
            p = os.path.join(base_dir, val)
            if must_exist and not os.path.exists(p):
                raise ConfigError(f"run config: {key} file not found: {p}")
            return p

        try:
            strategy = Strategy(data.get("strategy", "C"))
        except ValueError:
            raise ConfigError(f"run config: unknown strategy {data.get('strategy')!r}") from None
        return cls(
            rig=path("rig", True),
            tracker=from_mapping(TrackerConfig, data.get("tracker"), "tracker"),
            compensation=from_mapping(CompensationConfig, data.get("compensation"), "compensation"),
            detector=from_mapping(DetectorModel, data.get("detector"), "detector"),
            strategy=strategy,
            left=path("left", True),
            right=path("right", True),
            out=path("out", False),
            seed=None if data.get("seed") is None else int(data["seed"]),
        )

    @classmethod
    def load(cls, path: str | os.PathLike | None) -> RunConfig:
        if path is None:
            return cls()
        data = load_json(path)
        if not isinstance(data, Mapping):
            raise ConfigError(f"{os.fspath(path)}: run config must be a JSON object")
        return cls.from_dict(data, os.path.dirname(os.fspath(path)) or ".")

    def to_dict(self) -> dict[str, Any]:
        return {
            "rig": self.rig,
            "tracker": dataclasses.asdict(self.tracker),
            "compensation": dataclasses.asdict(self.compensation),
            "detector": dataclasses.asdict(self.detector),
            "strategy": self.strategy.value,
            "left": self.left,
            "right": self.right,
            "out": self.out,
            "seed": self.seed,
        }
