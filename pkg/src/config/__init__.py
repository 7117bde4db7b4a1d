from src.config.constants import (
    GAIN_FLOOR,
    GRID_GAINS,
    GRID_SATURATIONS,
    InitScheme,
    Measure,
    NormKind,
    OrthogonalScheme,
    Scenario,
    TaskId,
)
from src.config.errors import (
    ConfigError,
    DegenerateSampleError,
    DimensionError,
    FormatError,
    GammaRnnError,
    NonFiniteError,
    NumericalError,
    SingularMatrixError,
)
from src.config.settings import GridSpec, RunConfig

__all__ = [
    "GAIN_FLOOR",
    "GRID_GAINS",
    "GRID_SATURATIONS",
    "InitScheme",
    "Measure",
    "NormKind",
    "OrthogonalScheme",
    "Scenario",
    "TaskId",
    "ConfigError",
    "DegenerateSampleError",
    "DimensionError",
    "FormatError",
    "GammaRnnError",
    "NonFiniteError",
    "NumericalError",
    "SingularMatrixError",
    "GridSpec",
    "RunConfig",
]
