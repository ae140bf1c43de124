"""Run configuration schema (YAML file, validated before any computation)."""

from __future__ import annotations

from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, model_validator

from .deformation import DeformationParams
from .geometry import CellConfiguration, Curve, make_circle, make_ellipse
from .media import VACUUM_PERMITTIVITY, FrequencyGrid, MembraneModel


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelSpec(_Strict):
    preset: Optional[Literal["typical"]] = None
    sigma0: Optional[PositiveFloat] = None
    eps0: Optional[float] = Field(default=None, ge=0)
    sigma_m: Optional[PositiveFloat] = None
    eps_m: Optional[float] = Field(default=None, ge=0)
    eps0_relative: Optional[float] = Field(default=None, ge=0)
    eps_m_relative: Optional[float] = Field(default=None, ge=0)
    delta: Optional[PositiveFloat] = None

    def build(self) -> MembraneModel:
        base = MembraneModel.typical() if self.preset == "typical" else None
        vals = {}
        for name in ("sigma0", "eps0", "sigma_m", "eps_m", "delta"):
            v = getattr(self, name)
            if name in ("eps0", "eps_m") and getattr(self, name + "_relative") is not None:
                if v is not None:
                    raise ConfigError(f"give either {name} or {name}_relative")
                v = getattr(self, name + "_relative") * VACUUM_PERMITTIVITY
            if v is None:
                if base is None:
                    raise ConfigError(f"model.{name} is required without a preset")
                v = getattr(base, name)
            vals[name] = v
        return MembraneModel(**vals)


class GridSpec(_Strict):
    omega_min: PositiveFloat = 1e4
    omega_max: PositiveFloat = 1e9
    points: int = Field(default=200, ge=0)
    omegas: Optional[List[PositiveFloat]] = None

    def build(self) -> FrequencyGrid:
        if self.omegas is not None:
            return FrequencyGrid(np.array(self.omegas))
        if self.points < 3:
            raise ConfigError("frequency grid needs at least 3 points")
        return FrequencyGrid.logspace(self.omega_min, self.omega_max, self.points)


class CircleSpec(_Strict):
    kind: Literal["circle"]
    radius: PositiveFloat
    center: tuple[float, float] = (0.0, 0.0)


class EllipseSpec(_Strict):
    kind: Literal["ellipse"]
    a: PositiveFloat
    b: PositiveFloat
    center: tuple[float, float] = (0.0, 0.0)
    angle: float = 0.0


class FourierSpec(_Strict):
    """x(t) = Re sum_m cx[m] e^{imt}; coefficients given as [re, im] pairs."""

    kind: Literal["fourier"]
    cx: List[tuple[float, float]]
    cy: List[tuple[float, float]]


CurveSpec = Annotated[Union[CircleSpec, EllipseSpec, FourierSpec], Field(discriminator="kind")]


def build_curve(spec, n: int) -> Curve:
    if spec.kind == "circle":
        return make_circle(spec.radius, n, spec.center)
    if spec.kind == "ellipse":
        return make_ellipse(spec.a, spec.b, spec.center, spec.angle, n)
    cx = [complex(*c) for c in spec.cx]
    cy = [complex(*c) for c in spec.cy]
    return Curve.from_fourier(cx, cy, n)


class GeometrySpec(_Strict):
    """Cells in the unit cell (``frame: unit_cell``) or already rescaled boundaries."""

    frame: Literal["unit_cell", "rescaled"] = "unit_cell"
    nodes: int = Field(default=128, ge=8)
    cells: List[CurveSpec] = Field(min_length=1)

    @model_validator(mode="after")
    def _power_of_two(self):
        if self.nodes & (self.nodes - 1):
            raise ValueError("nodes must be a power of two")
        return self

    def build(self) -> CellConfiguration:
        curves = [build_curve(c, self.nodes) for c in self.cells]
        return CellConfiguration(curves, unit_cell=self.frame == "unit_cell")

    def boundaries(self) -> CellConfiguration:
        """Boundaries on which M is evaluated."""
        cfg = self.build()
        return cfg.rescaled() if cfg.unit_cell else cfg


class MwfSpec(_Strict):
    r0: PositiveFloat


class EnsembleSpec(_Strict):
    samples: PositiveInt = 64
    seed: int = Field(default=0, ge=0)
    r_in: PositiveFloat = 0.1
    r_out: PositiveFloat = 0.2
    center: tuple[float, float] = (0.5, 0.5)
    rotation: float = Field(default=0.0, ge=0)
    shear: float = Field(default=0.0, ge=0)
    translation: float = Field(default=0.0, ge=0)
    bumps: List[float] = []
    kappa: float = 0.5
    kappa_prime: float = 3.0
    tolerance: Optional[PositiveFloat] = None
    resum: bool = True

    def build(self) -> DeformationParams:
        return DeformationParams(tuple(self.center), self.r_in, self.r_out, self.rotation,
                                 self.shear, self.translation, tuple(self.bumps),
                                 self.kappa, self.kappa_prime)


class EffectiveSpec(_Strict):
    mode: Literal["dilute", "periodic", "random"] = "dilute"
    ensemble: Optional[EnsembleSpec] = None

    @model_validator(mode="after")
    def _ensemble(self):
        if self.mode == "random" and self.ensemble is None:
            raise ValueError("random mode needs an ensemble block")
        return self


class CellsMwf(_Strict):
    kind: Literal["mwf"]
    r0: PositiveFloat


class CellsGeometry(_Strict):
    kind: Literal["geometry"] = "geometry"


class ImagingSpec(_Strict):
    probe_radius: PositiveFloat = 1.0
    probe_nodes: int = Field(default=128, ge=16)
    inclusion: CurveSpec
    inclusion_nodes: int = Field(default=128, ge=16)
    f: float = Field(ge=0, lt=1)
    cells: Union[CellsMwf, CellsGeometry] = CellsGeometry()
    patterns: List[float] = [0.0]
    angles: PositiveInt = 180
    data_dir: Optional[str] = None
    anisotropy_omegas: Optional[List[PositiveFloat]] = None


class SuspensionSpec(_Strict):
    name: str
    model: Optional[ModelSpec] = None
    geometry: Optional[GeometrySpec] = None


class PulseBlock(_Strict):
    center: Optional[PositiveFloat] = None
    bandwidth_fraction: float = Field(default=0.5, gt=0, lt=2)
    n_times: int = Field(default=1001, ge=11)
    n_freq: int = Field(default=2049, ge=11)
    suspensions: List[SuspensionSpec] = Field(min_length=1)


class RunConfig(_Strict):
    model: ModelSpec = ModelSpec(preset="typical")
    grid: GridSpec = GridSpec()
    geometry: Optional[GeometrySpec] = None
    mwf: Optional[MwfSpec] = None
    effective: Optional[EffectiveSpec] = None
    imaging: Optional[ImagingSpec] = None
    pulse: Optional[PulseBlock] = None

    def require(self, block: str):
        value = getattr(self, block)
        if value is None:
            raise ConfigError(f"this command needs a '{block}' block")
        return value


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return RunConfig.model_validate(data)
