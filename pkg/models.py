"""
Configuration models: process settings from the environment and the
experiment description read from JSON.
"""

from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# scalar c (meaning c*I) or a d x d nested list
MatrixValue = Union[float, List[List[float]]]


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="HOMOBOUND_", env_file=".env", extra="ignore")

    threads: int = Field(1, ge=1, description="cap on concurrent auxiliary solves per grid")
    log_level: str = "INFO"
    log_config: str = "logging.ini"
    output_dir: str = "results"
    dense_oracle_max_points: int = Field(512, ge=1)


def get_settings() -> Settings:
    return Settings()


class InclusionConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    increment: MatrixValue
    h: List[float] = Field(..., description="rectangle side lengths, 0 < h <= Y")
    center: Optional[List[float]] = None
    strict: bool = Field(True, description="open rectangle |x| < h/2; false for the closed one")


class InclusionMaterialConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["inclusions"] = "inclusions"
    A0: MatrixValue
    inclusions: List[InclusionConfig] = Field(default_factory=list)


class BitmapMaterialConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["bitmap"]
    path: str = Field(..., description="PGM or CSV bitmap, relative to the config file")
    a_matrix: float = Field(..., gt=0)
    a_inclusion: float = Field(..., gt=0)
    smooth: bool = False


class SyntheticBitmapConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["synthetic"]
    shape: List[int] = Field(..., min_length=2, max_length=2)
    fraction: float = Field(..., gt=0, lt=1)
    a_matrix: float = Field(..., gt=0)
    a_inclusion: float = Field(..., gt=0)
    smooth: bool = False


MaterialConfig = Annotated[
    Union[InclusionMaterialConfig, BitmapMaterialConfig, SyntheticBitmapConfig],
    Field(discriminator="kind"),
]


class SolverConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tol: float = Field(1e-8, gt=0)
    max_iter: int = Field(1000, ge=1)


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: Optional[str] = None
    formats: List[Literal["json", "csv", "html"]] = Field(default_factory=lambda: ["json", "csv"])


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field("experiment", pattern=r"^[A-Za-z0-9_.-]+$")
    cell: List[float] = Field(..., min_length=2, max_length=3)
    grids: List[List[int]] = Field(..., min_length=1)
    formulations: List[Literal["primal", "dual", "bounds"]] = Field(
        default_factory=lambda: ["primal", "dual", "bounds"], min_length=1
    )
    material: MaterialConfig
    solver: SolverConfig = Field(default_factory=SolverConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    dual_source: Literal["solve", "reconstruct"] = "solve"
    seed: int = 0
