"""Run configuration (JSON) and its validation.

Every section has defaults that reproduce the reference setup: model 1,
omega = 3, the 32 x 33 x 90 x 64 grid and eight sources at r = 4.01.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import forward, grids, greens, inverse, models


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeometryConfig(_Section):
    a: float = 1.0
    r0: float = 3.0
    b: float = 4.0
    z_half: float = 2.0

    @model_validator(mode="after")
    def _check(self):
        grids.Geometry(**self.model_dump())
        return self

    def build(self) -> grids.Geometry:
        return grids.Geometry(**self.model_dump())


class GridConfig(_Section):
    Nr: int = 32
    Nrp: int = 33
    Nphi: int = 90
    Nz: int = 64

    @model_validator(mode="after")
    def _check(self):
        grids.GridSpec(**self.model_dump())
        return self

    def build(self) -> grids.GridSpec:
        return grids.GridSpec(**self.model_dump())


class SourcesConfig(_Section):
    amplitude: List[float] = Field(default_factory=lambda: [1.0] * 8)
    r: List[float] = Field(default_factory=lambda: [4.01] * 8)
    phi: List[float] = Field(default_factory=lambda: list(greens.default_sources().phi))
    z: List[float] = Field(default_factory=lambda: [-1.0] * 4 + [1.0] * 4)

    @model_validator(mode="after")
    def _check(self):
        self.build()
        return self

    def build(self) -> greens.SourceSet:
        return greens.SourceSet(np.array(self.amplitude, float), np.array(self.r, float),
                                np.array(self.phi, float), np.array(self.z, float))


class ModelConfig(_Section):
    id: Literal["model1", "model2", "zero"] = "model1"
    A0: Optional[float] = None

    @field_validator("A0")
    @classmethod
    def _positive(cls, v):
        if v is not None and not v > 0:
            raise ValueError("A0 must be positive")
        return v

    def build(self) -> models.ModelSpec:
        return models.ModelSpec(self.id, self.A0)


class ForwardConfig(_Section):
    max_iter: int = Field(200, ge=1)
    tol: float = Field(1e-13, gt=0)

    def build(self) -> forward.ForwardSettings:
        return forward.ForwardSettings(max_iter=self.max_iter, tol=self.tol)


class RegConfig(_Section):
    method: Literal["tsvd", "tikhonov"] = "tsvd"
    tsvd_rel_threshold: float = Field(1e-10, gt=0, lt=1)
    rank_rule: Literal["auto", "threshold", "discrepancy"] = "auto"
    tikhonov_alpha: Optional[float] = Field(None, gt=0)
    noise_delta: float = Field(0.0, ge=0)
    discrepancy_tau: float = Field(1.0, gt=0)
    div_tol: float = Field(1e-12, gt=0)
    omega_combine: Literal["single", "mean"] = "single"

    def build(self, **override) -> inverse.RegSettings:
        return inverse.RegSettings(**{**self.model_dump(), **override})


class GreensConfig(_Section):
    eps: float = Field(1e-6, ge=0)


class IOConfig(_Section):
    output_dir: str = "out"
    save_table: bool = False


class BenchConfig(_Section):
    grids: List[GridConfig] = Field(default_factory=lambda: [
        GridConfig(Nr=16, Nrp=17, Nphi=32, Nz=32),
        GridConfig(Nr=16, Nrp=17, Nphi=32, Nz=64),
        GridConfig(Nr=16, Nrp=17, Nphi=64, Nz=32),
    ])
    omega: float = Field(2.0, gt=0)
    repeats: int = Field(3, ge=1)


class RunConfig(_Section):
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    omegas: List[float] = Field(default_factory=lambda: [3.0], min_length=1)
    sources: SourcesConfig = Field(default_factory=SourcesConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    forward: ForwardConfig = Field(default_factory=ForwardConfig)
    regularization: RegConfig = Field(default_factory=RegConfig)
    greens: GreensConfig = Field(default_factory=GreensConfig)
    io: IOConfig = Field(default_factory=IOConfig)
    bench: BenchConfig = Field(default_factory=BenchConfig)

    @field_validator("omegas")
    @classmethod
    def _positive_omegas(cls, v):
        if any(not o > 0 for o in v):
            raise ValueError("all omegas must be positive")
        return v

    @model_validator(mode="after")
    def _combine(self):
        if len(self.omegas) > 1 and self.regularization.omega_combine == "single":
            raise ValueError("several omegas need regularization.omega_combine = 'mean'")
        return self

    def make_grids(self) -> grids.Grids:
        return grids.make_grids(self.geometry.build(), self.grid.build())


def load_config(path) -> RunConfig:
    """Parse and validate a JSON config file; raises pydantic.ValidationError."""
    return RunConfig.model_validate(json.loads(Path(path).read_text()))


def format_validation_error(exc) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "\n".join(lines)
