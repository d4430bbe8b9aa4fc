"""
Pydantic schemas for JSON run configurations and reports.
"""
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.coneweyl.errors import ConfigError

SCHEMA_VERSION = 1


class CapGeometry(BaseModel):
    kind: Literal["cap"] = "cap"
    theta0: float = Field(gt=0.0, lt=3.141592653589793)
    n_samples: int = Field(default=256, ge=8)


class CsvGeometry(BaseModel):
    kind: Literal["csv"] = "csv"
    path: str
    n_resample: int = Field(default=256, ge=8)
    interior_point: Optional[List[float]] = None

    @field_validator("interior_point")
    @classmethod
    def _three_components(cls, v):
        if v is not None and len(v) != 3:
            raise ValueError("interior_point needs three components")
        return v


class ConstantGeometry(BaseModel):
    kind: Literal["constant"] = "constant"
    kappa: float
    length: float = Field(gt=0.0)
    n_samples: int = Field(default=256, ge=8)


GeometrySpec = Annotated[Union[CapGeometry, CsvGeometry, ConstantGeometry], Field(discriminator="kind")]


class GridSpec(BaseModel):
    """Discretization of the truncated strip; n_r defaults to (R_max − R)/h_r."""
    n_r: Optional[int] = Field(default=None, ge=1)
    n_s: int = Field(default=32, ge=1)
    h_r: float = Field(default=0.25, gt=0.0)


class BracketingSpec(BaseModel):
    enabled: bool = True
    m: Optional[int] = Field(default=None, ge=2)
    n: Optional[int] = Field(default=None, ge=2)
    M: Optional[float] = Field(default=None, gt=0.0)


class ConstantsSpec(BaseModel):
    aplus: float = Field(default=1.0, gt=0.0)
    aminus: float = Field(default=1.0, gt=0.0)
    A: float = Field(default=1.0, gt=0.0)
    CG: float = Field(default=1.0, gt=0.0)


class OutputSpec(BaseModel):
    csv: Optional[str] = None
    json_path: Optional[str] = Field(default=None, alias="json")

    model_config = ConfigDict(populate_by_name=True)


def _as_list(value):
    if isinstance(value, dict):
        return [value]
    return value


def _check_descending(values: List[float]) -> List[float]:
    if any(v <= 0 for v in values):
        raise ValueError("lambdas must be strictly positive")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ValueError("lambdas must be sorted strictly descending")
    return values


class StudyConfig(BaseModel):
    """Weyl-law study: geometry, coupling, sides and the λ schedule."""
    schema_version: Literal[1] = SCHEMA_VERSION
    geometry: List[GeometrySpec] = Field(min_length=1)
    alpha: float = Field(gt=0.0)
    side: Literal["Plus", "Minus", "Both", "Custom"] = "Both"
    lambdas: List[float] = Field(min_length=1)
    R: float = Field(default=2.0, ge=1.0)
    r_max_factor: float = Field(default=3.0, gt=0.0)
    r_max: Optional[float] = Field(default=None, gt=0.0)
    grid: GridSpec = GridSpec()
    bracketing: BracketingSpec = BracketingSpec()
    constants: ConstantsSpec = ConstantsSpec()
    outputs: OutputSpec = OutputSpec()
    workers: Optional[int] = Field(default=None, ge=1)
    numerics: Dict[str, Any] = Field(default_factory=dict)

    model_config = ConfigDict(extra="forbid")

    @field_validator("geometry", mode="before")
    @classmethod
    def _single_loop(cls, v):
        return _as_list(v)

    @field_validator("lambdas")
    @classmethod
    def _lambdas_descending(cls, v):
        return _check_descending(v)

    @model_validator(mode="after")
    def _r_max_beyond_r(self):
        if self.r_max is not None and self.r_max <= self.R:
            raise ValueError("r_max must exceed R")
        return self


class CurvatureConfig(BaseModel):
    geometry: List[GeometrySpec] = Field(min_length=1)
    alpha: float = Field(default=1.0, gt=0.0)

    @field_validator("geometry", mode="before")
    @classmethod
    def _single_loop(cls, v):
        return _as_list(v)


class DeltaLawSpec(BaseModel):
    c: float = Field(gt=0.0)
    rho: float = Field(default=0.75, gt=0.0, le=1.0)


class Robin1DConfig(BaseModel):
    r: List[float] = Field(min_length=1)
    delta: List[float] = Field(default_factory=list)
    bc: List[Literal["DirichletAtDelta", "NeumannAtDelta"]] = ["DirichletAtDelta", "NeumannAtDelta"]
    law: Optional[DeltaLawSpec] = None

    @model_validator(mode="after")
    def _delta_source(self):
        if self.law is None and not self.delta:
            raise ValueError("either delta values or a law is required")
        if any(v <= 0 for v in self.r + self.delta):
            raise ValueError("r and delta must be positive")
        return self


class CountConfig(BaseModel):
    geometry: List[GeometrySpec] = Field(min_length=1)
    alpha: float = Field(default=1.0, gt=0.0)
    side: Literal["Plus", "Minus", "Custom"] = "Plus"
    lambdas: List[float] = Field(min_length=1)
    R: float = Field(default=2.0, ge=1.0)
    r_max_factor: float = Field(default=3.0, gt=0.0)
    r_max: Optional[float] = Field(default=None, gt=0.0)
    grid: GridSpec = GridSpec()
    constants: ConstantsSpec = ConstantsSpec()
    strategy: Literal["auto", "dense", "sparse"] = "auto"
    export_matrix: Optional[str] = None

    @field_validator("geometry", mode="before")
    @classmethod
    def _single_loop(cls, v):
        return _as_list(v)

    @field_validator("lambdas")
    @classmethod
    def _lambdas_descending(cls, v):
        return _check_descending(v)


class BracketConfig(BaseModel):
    geometry: List[GeometrySpec] = Field(min_length=1)
    alpha: float = Field(default=1.0, gt=0.0)
    side: Literal["Plus", "Minus", "Custom"] = "Custom"
    lam: float = Field(gt=0.0, alias="lambda")
    R: float = Field(default=2.0, ge=1.0)
    m: Optional[int] = Field(default=None, ge=2)
    n: Optional[int] = Field(default=None, ge=2)
    M: Optional[float] = Field(default=None, gt=0.0)
    constants: ConstantsSpec = ConstantsSpec()

    model_config = ConfigDict(populate_by_name=True)

    @field_validator("geometry", mode="before")
    @classmethod
    def _single_loop(cls, v):
        return _as_list(v)


class WeylRow(BaseModel):
    lam: float = Field(alias="lambda")
    count_plus: Optional[int] = None
    count_minus: Optional[int] = None
    bracket_lower: Optional[int] = None
    bracket_upper: Optional[int] = None
    lambda_times_count: float
    predicted_constant: float
    relative_error: float

    model_config = ConfigDict(populate_by_name=True)


REPORT_COLUMNS = ["lambda", "count_plus", "count_minus", "bracket_lower", "bracket_upper",
                  "lambda_times_count", "predicted_constant", "relative_error"]


class WeylReport(BaseModel):
    rows: List[WeylRow] = Field(default_factory=list)
    predicted_constant: float = Field(ge=0.0)
    header_note: str = ""
    metadata: Dict[str, Any] = Field(default_factory=dict)


def parse_config(model, data: Dict[str, Any]):
    """Validate raw JSON data, turning pydantic errors into ConfigError naming the field."""
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise ConfigError(f"Invalid configuration field '{field}': {first['msg']}", field=field)
