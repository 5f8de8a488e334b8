"""Validated experiment configuration (JSON, versioned schema)."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SCHEMA_VERSION = 1
DENSITIES = ("uniform", "parabolic", "bump", "cosine")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ToyConfig(_Strict):
    """Toy systems: ``a u + b xi`` or the clipped controlled system."""

    a: float = Field(0.5, gt=-1, lt=1)
    b: float = Field(1.0, gt=0)
    density: Literal[DENSITIES] = "uniform"
    expansion: float = Field(1.2, gt=1, le=5)
    damping: float = Field(0.3, ge=0, lt=1)
    injection: tuple[float, float] = (2.0, 0.1)


class NSConfig(_Strict):
    nu: float = Field(0.05, gt=0, le=10)
    n: int = Field(32, ge=16, le=256)
    dt: float = Field(0.01, gt=0, le=0.1)
    n_modes: int = Field(4, ge=1, le=8)
    amplitudes: list[float] = Field(default_factory=lambda: [1.0, 1.0, 1.0, 1.0])
    density: Literal[DENSITIES] = "uniform"
    gamma: tuple[float, float] = (0.2, 0.8)
    window: tuple[float, float] = (0.1, 0.7)
    init_scale: float = Field(1.0, ge=0)

    @field_validator("amplitudes")
    @classmethod
    def _non_negative(cls, v):
        if any(x < 0 for x in v):
            raise ValueError("noise amplitudes must be non-negative")
        return v

    @model_validator(mode="after")
    def _consistent(self):
        if len(self.amplitudes) != self.n_modes:
            raise ValueError("need one amplitude per noise mode")
        if not 0 < self.gamma[0] < self.gamma[1] < 1:
            raise ValueError("gamma must lie strictly inside the top edge")
        if not 0 <= self.window[0] < self.window[1] < 1:
            raise ValueError("forcing window must satisfy 0 <= start < stop < 1")
        if abs(round(1 / self.dt) * self.dt - 1) > 1e-9:
            raise ValueError("dt must divide the unit interval")
        return self


class CouplingParams(_Strict):
    delta: float = Field(0.2, gt=0)
    r: float = Field(0.8, gt=0, lt=1)
    q: float = Field(0.5, gt=0, lt=1)
    alpha: float = Field(1.0, gt=0, le=1)


class EnsembleConfig(_Strict):
    size: int = Field(1000, ge=8, le=10**6)
    k_max: int = Field(12, ge=1, le=200)
    batches: int = Field(4, ge=2, le=64)
    chunk: int = Field(512, ge=1)


class ExperimentConfig(_Strict):
    """Top-level experiment description; every field has a documented default."""

    schema_version: Literal[1] = SCHEMA_VERSION
    system: Literal["toy-affine", "toy-controlled", "navier-stokes"] = "toy-affine"
    toy: ToyConfig = ToyConfig()
    ns: NSConfig = NSConfig()
    coupling: CouplingParams = CouplingParams()
    ensemble: EnsembleConfig = EnsembleConfig()
    initial: list[list[float]] | None = None
    seed: int = Field(0, ge=0, lt=2**64)
    steps: int = Field(30, ge=0, le=10**5)
    zero_noise: bool = False

    def resolved(self) -> dict:
        return self.model_dump(mode="json")


def load_config(path: str | Path | None, seed: int | None = None) -> ExperimentConfig:
    """Read and validate a config file; ``seed`` overrides the stored seed."""
    data = {} if path is None else json.loads(Path(path).read_text())
    if seed is not None:
        data["seed"] = seed
    return ExperimentConfig.model_validate(data)
