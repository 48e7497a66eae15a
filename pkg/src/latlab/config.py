"""Experiment configuration files (TOML) and basis files."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .core import ConeVector, Dims
from .errors import InvalidArgumentError

SUBCOMMANDS = ("lambda1", "nondiv", "equidist", "conesweep", "selftest")


@dataclass
class ExperimentConfig:
    command: str
    m: int = 1
    n: int = 1
    seed: int = 0
    out: str | None = None
    params: dict = field(default_factory=dict)
    source: str | None = None

    @property
    def dims(self) -> Dims:
        return Dims(self.m, self.n)

    def get(self, key, default=None):
        return self.params.get(key, default)

    def require(self, key):
        if key not in self.params:
            raise InvalidArgumentError(f"config key {key!r} is required for {self.command}")
        return self.params[key]

    def positive_int(self, key, default=None) -> int:
        v = self.params.get(key, default)
        if v is None:
            raise InvalidArgumentError(f"config key {key!r} is required for {self.command}")
        if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
            raise InvalidArgumentError(f"{key} must be a positive integer, got {v!r}")
        return v

    def positive_float(self, key, default=None) -> float:
        v = self.params.get(key, default)
        if v is None:
            raise InvalidArgumentError(f"config key {key!r} is required for {self.command}")
        v = float(v)
        if not v > 0:
            raise InvalidArgumentError(f"{key} must be positive, got {v!r}")
        return v

    def ladder(self, key) -> list:
        vals = [float(x) for x in self.require(key)]
        if not vals:
            raise InvalidArgumentError(f"{key} must be a non-empty array")
        return vals

    def cone_vectors(self) -> list:
        """(ray, ConeVector) pairs from ``rays`` x ``floors``, or from explicit ``t_list``."""
        if "t_list" in self.params:
            return [(tuple(t), ConeVector(self.dims, tuple(float(x) for x in t)))
                    for t in self.params["t_list"]]
        rays = self.require("rays")
        floors = self.ladder("floors")
        out = []
        for ray in rays:
            for s in floors:
                out.append((tuple(float(x) for x in ray),
                            ConeVector.along_ray(self.dims, ray, s)))
        return out


def parse_config(text: str, command: str | None = None, source: str | None = None) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise InvalidArgumentError(f"malformed config: {exc}") from exc
    cmd = raw.pop("command", command)
    if command is not None and cmd != command:
        raise InvalidArgumentError(f"config is for {cmd!r}, not {command!r}")
    if cmd not in SUBCOMMANDS:
        raise InvalidArgumentError(f"unknown command {cmd!r}")
    m, n = raw.pop("m", 1), raw.pop("n", 1)
    seed, out = raw.pop("seed", 0), raw.pop("out", None)
    for name, v in (("m", m), ("n", n)):
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise InvalidArgumentError(f"{name} must be a positive integer, got {v!r}")
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise InvalidArgumentError(f"seed must be a non-negative integer, got {seed!r}")
    return ExperimentConfig(cmd, m, n, seed, out, raw, source)


def load_config(path, command: str | None = None) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(text, command, str(p))
    # basis files are resolved relative to the config
    bf = cfg.params.get("basis_file")
    if bf is not None and not Path(bf).is_absolute():
        cfg.params["basis_file"] = str(p.parent / bf)
    return cfg


def read_basis_file(path) -> np.ndarray:
    """Whitespace-separated k x k reals, one row per line; '#' starts a comment."""
    try:
        B = np.loadtxt(path, dtype=float, comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise InvalidArgumentError(f"cannot read basis file {path}: {exc}") from exc
    if B.shape[0] != B.shape[1]:
        raise InvalidArgumentError(f"basis must be square, got shape {B.shape}")
    return B
