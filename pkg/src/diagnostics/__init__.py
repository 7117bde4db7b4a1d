from src.diagnostics.grid import (
    GridCell,
    GridRow,
    GridTable,
    mi_landscape,
    random_model,
    scan_grid,
    stability_grid,
)
from src.diagnostics.jacobian import mean_jacobian_norm
from src.diagnostics.lyapunov import (
    LinearStepMap,
    LyapunovSpectrum,
    RnnStepMap,
    lyapunov_spectrum,
    mle_snapshot,
)
from src.diagnostics.mutual_info import MiEstimate, mi_mixture, mi_window_pairs

__all__ = [
    "GridCell",
    "GridRow",
    "GridTable",
    "mi_landscape",
    "random_model",
    "scan_grid",
    "stability_grid",
    "mean_jacobian_norm",
    "LinearStepMap",
    "LyapunovSpectrum",
    "RnnStepMap",
    "lyapunov_spectrum",
    "mle_snapshot",
    "MiEstimate",
    "mi_mixture",
    "mi_window_pairs",
]
